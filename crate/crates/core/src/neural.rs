//! Small multilayer perceptron with hand-written backpropagation and Adam.
//!
//! Hidden layers use `tanh`; the output layer uses sigmoid, softmax or the
//! identity. All arithmetic is `f64`.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Sigmoid,
    Softmax,
    Identity,
}

impl OutputActivation {
    fn code(self) -> u8 {
        match self {
            OutputActivation::Sigmoid => 0,
            OutputActivation::Softmax => 1,
            OutputActivation::Identity => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(OutputActivation::Sigmoid),
            1 => Ok(OutputActivation::Softmax),
            2 => Ok(OutputActivation::Identity),
            _ => Err(Error::Parse {
                line: 0,
                msg: format!("unknown output activation code {c}"),
            }),
        }
    }
}

/// Dense layer `z = W x + b`, `W` stored row-major as `n_out x n_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            w: vec![0.0; n_in * n_out],
            b: vec![0.0; n_out],
        }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.b.iter().enumerate().map(|(o, &b)| {
            let row = &self.w[o * self.n_in..(o + 1) * self.n_in];
            b + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>()
        }));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<Layer>,
    output: OutputActivation,
    version: u64,
}

/// Activations recorded by a forward pass, tied to the parameter version
/// that produced them.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    /// `acts[l]` is the input of layer `l`; the last entry is the output.
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("cache has an output")
    }
}

/// Same layout as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(p: &MlpParams) -> Self {
        Self {
            layers: p
                .layers
                .iter()
                .map(|l| Layer::zeros(l.n_in, l.n_out))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.w.iter_mut().zip(&b.w).for_each(|(x, y)| *x += y);
            a.b.iter_mut().zip(&b.b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.w.iter_mut().for_each(|x| *x *= s);
            l.b.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }

    /// Weights then biases, layer by layer.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()).copied())
    }
}

fn tanh_prime_from_output(a: f64) -> f64 {
    1.0 - a * a
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Softmax restricted to positions where `allowed` is true; other
/// positions get probability 0.
pub fn masked_softmax(z: &[f64], allowed: &[bool]) -> Result<Vec<f64>> {
    if z.len() != allowed.len() {
        return Err(Error::Dimension(format!(
            "{} logits for a mask of {}",
            z.len(),
            allowed.len()
        )));
    }
    let max = z
        .iter()
        .zip(allowed)
        .filter(|(_, &a)| a)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::InvalidParameter("mask allows no action".into()));
    }
    let e: Vec<f64> = z
        .iter()
        .zip(allowed)
        .map(|(&v, &a)| if a { (v - max).exp() } else { 0.0 })
        .collect();
    let s: f64 = e.iter().sum();
    Ok(e.into_iter().map(|v| v / s).collect())
}

impl MlpParams {
    /// All weights and biases zero.
    pub fn zeros(layer_sizes: &[usize], output: OutputActivation) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "layer sizes {layer_sizes:?} need at least two positive entries"
            )));
        }
        Ok(Self {
            layers: layer_sizes
                .windows(2)
                .map(|w| Layer::zeros(w[0], w[1]))
                .collect(),
            output,
            version: 0,
        })
    }

    /// Weights uniform in `+-sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn xavier<R: Rng>(
        layer_sizes: &[usize],
        output: OutputActivation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut p = Self::zeros(layer_sizes, output)?;
        for l in &mut p.layers {
            let a = (6.0 / (l.n_in + l.n_out) as f64).sqrt();
            l.w.iter_mut().for_each(|w| *w = rng.gen_range(-a..a));
        }
        Ok(p)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].n_in];
        s.extend(self.layers.iter().map(|l| l.n_out));
        s
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Direct parameter access; bumps the version so older caches go stale.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.version += 1;
        &mut self.layers
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(&l.b).all(|v| v.is_finite()))
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        let n_in = self.layers[0].n_in;
        if x.len() != n_in {
            return Err(Error::Dimension(format!(
                "input of length {} for {n_in} inputs",
                x.len()
            )));
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(l.n_out);
            l.affine(acts.last().expect("non-empty"), &mut z);
            let a = if i < last {
                z.into_iter().map(f64::tanh).collect()
            } else {
                match self.output {
                    OutputActivation::Sigmoid => z.into_iter().map(sigmoid).collect(),
                    OutputActivation::Softmax => softmax(&z),
                    OutputActivation::Identity => z,
                }
            };
            acts.push(a);
        }
        let y = acts.last().expect("non-empty").clone();
        Ok((
            y,
            ForwardCache {
                version: self.version,
                acts,
            },
        ))
    }

    /// Gradients of a scalar loss given `dL/dy` at the output.
    pub fn backward(&self, cache: &ForwardCache, dy: &[f64]) -> Result<Gradients> {
        if cache.version != self.version || cache.acts.len() != self.layers.len() + 1 {
            return Err(Error::StaleCache {
                params: self.version,
                cache: cache.version,
            });
        }
        let y = cache.output();
        if dy.len() != y.len() {
            return Err(Error::Dimension(format!(
                "upstream gradient of length {} for {} outputs",
                dy.len(),
                y.len()
            )));
        }
        let mut delta: Vec<f64> = match self.output {
            OutputActivation::Sigmoid => dy.iter().zip(y).map(|(g, a)| g * a * (1.0 - a)).collect(),
            OutputActivation::Softmax => {
                let dot: f64 = dy.iter().zip(y).map(|(g, a)| g * a).sum();
                dy.iter().zip(y).map(|(g, a)| a * (g - dot)).collect()
            }
            OutputActivation::Identity => dy.to_vec(),
        };
        let mut grads = Gradients::zeros_like(self);
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let input = &cache.acts[li];
            let g = &mut grads.layers[li];
            for o in 0..layer.n_out {
                let d = delta[o];
                g.b[o] = d;
                if d != 0.0 {
                    let row = &mut g.w[o * layer.n_in..(o + 1) * layer.n_in];
                    row.iter_mut().zip(input).for_each(|(w, x)| *w = d * x);
                }
            }
            if li > 0 {
                let mut prev = vec![0.0; layer.n_in];
                for (o, &d) in delta.iter().enumerate() {
                    if d != 0.0 {
                        let row = &layer.w[o * layer.n_in..(o + 1) * layer.n_in];
                        prev.iter_mut().zip(row).for_each(|(p, w)| *p += d * w);
                    }
                }
                delta = prev
                    .into_iter()
                    .zip(input)
                    .map(|(p, &a)| p * tanh_prime_from_output(a))
                    .collect();
            }
        }
        Ok(grads)
    }

    const MAGIC: &'static [u8; 6] = b"ECCMLP";
    const FORMAT: u32 = 1;

    /// Checkpoint layout, little endian: magic `ECCMLP`, format `u32`,
    /// number of sizes `u32`, each size `u32`, output activation `u8`,
    /// then per layer the weights (row-major) and biases as `f64`.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&Self::FORMAT.to_le_bytes())?;
        let sizes = self.layer_sizes();
        w.write_all(&(sizes.len() as u32).to_le_bytes())?;
        for s in sizes {
            w.write_all(&(s as u32).to_le_bytes())?;
        }
        w.write_all(&[self.output.code()])?;
        for l in &self.layers {
            for v in l.w.iter().chain(&l.b) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let bad = |msg: &str| Error::Parse {
            line: 0,
            msg: msg.into(),
        };
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(bad("not a network checkpoint"));
        }
        let mut u32buf = [0u8; 4];
        let mut read_u32 = |r: &mut R| -> Result<u32> {
            r.read_exact(&mut u32buf)?;
            Ok(u32::from_le_bytes(u32buf))
        };
        if read_u32(&mut r)? != Self::FORMAT {
            return Err(bad("unsupported checkpoint format"));
        }
        let count = read_u32(&mut r)? as usize;
        if count > 64 {
            return Err(bad("implausible layer count"));
        }
        let sizes = (0..count)
            .map(|_| read_u32(&mut r).map(|s| s as usize))
            .collect::<Result<Vec<_>>>()?;
        let mut code = [0u8; 1];
        r.read_exact(&mut code)?;
        let mut p = Self::zeros(&sizes, OutputActivation::from_code(code[0])?)?;
        let mut buf = [0u8; 8];
        for l in &mut p.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                r.read_exact(&mut buf)?;
                *v = f64::from_le_bytes(buf);
            }
        }
        Ok(p)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(params: &MlpParams, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Gradients::zeros_like(params),
            v: Gradients::zeros_like(params),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Descends along `grads`. Non-finite gradients leave everything
    /// untouched and return an error.
    pub fn step(&mut self, params: &mut MlpParams, grads: &Gradients) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        if grads.layers.len() != params.layers.len()
            || grads
                .layers
                .iter()
                .zip(&params.layers)
                .any(|(g, p)| g.w.len() != p.w.len() || g.b.len() != p.b.len())
        {
            return Err(Error::Dimension(
                "gradient shape does not match parameters".into(),
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for li in 0..params.layers.len() {
            let p = &mut params.layers[li];
            let g = &grads.layers[li];
            let m = &mut self.m.layers[li];
            let v = &mut self.v.layers[li];
            let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
                for i in 0..p.len() {
                    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                    let mh = m[i] / c1;
                    let vh = v[i] / c2;
                    p[i] -= lr * mh / (vh.sqrt() + eps);
                }
            };
            update(&mut p.w, &g.w, &mut m.w, &mut v.w);
            update(&mut p.b, &g.b, &mut m.b, &mut v.b);
        }
        params.version += 1;
        Ok(())
    }
}
