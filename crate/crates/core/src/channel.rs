//! BPSK over AWGN.
//!
//! Bit 0 maps to +1, bit 1 to -1. LLRs are `2y / sigma^2`, so a positive
//! LLR favours bit 0.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::gf2::BitVector;
use crate::rng;

/// How an SNR figure in dB maps to the per-sample noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrConvention {
    /// `sigma^2 = 1 / (2 * 10^(dB/10))`: noise power N0/2 per real dimension.
    RealDimension,
    /// `sigma^2 = 1 / 10^(dB/10)`: the figure is the per-sample SNR `1/sigma^2`.
    /// The published BLER operating points for these constructions line up
    /// with this convention.
    #[default]
    SampleSnr,
}

impl SnrConvention {
    pub fn noise_variance(self, esn0_db: f64) -> f64 {
        let lin = 10f64.powf(esn0_db / 10.0);
        match self {
            SnrConvention::RealDimension => 1.0 / (2.0 * lin),
            SnrConvention::SampleSnr => 1.0 / lin,
        }
    }

    pub fn sigma(self, esn0_db: f64) -> f64 {
        self.noise_variance(esn0_db).sqrt()
    }

    /// Inverse of [`noise_variance`](Self::noise_variance).
    pub fn esn0_db(self, noise_variance: f64) -> f64 {
        let lin = match self {
            SnrConvention::RealDimension => 1.0 / (2.0 * noise_variance),
            SnrConvention::SampleSnr => 1.0 / noise_variance,
        };
        10.0 * lin.log10()
    }
}

/// `sigma = sqrt(1 / (2 * 10^(esn0_db / 10)))`.
pub fn esn0_to_sigma(esn0_db: f64) -> f64 {
    SnrConvention::RealDimension.sigma(esn0_db)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub esn0_db: f64,
    pub seed: u64,
    #[serde(default)]
    pub convention: SnrConvention,
}

impl ChannelSpec {
    pub fn new(esn0_db: f64, seed: u64) -> Self {
        Self {
            esn0_db,
            seed,
            convention: SnrConvention::default(),
        }
    }

    pub fn with_convention(mut self, convention: SnrConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn noise_variance(&self) -> f64 {
        self.convention.noise_variance(self.esn0_db)
    }

    pub fn sigma(&self) -> f64 {
        self.noise_variance().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlrFrame {
    pub llrs: Vec<f64>,
}

impl LlrFrame {
    pub fn new(llrs: Vec<f64>) -> Self {
        Self { llrs }
    }

    pub fn len(&self) -> usize {
        self.llrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.llrs.is_empty()
    }

    /// Noiseless LLRs of magnitude `scale` for a codeword.
    pub fn noiseless(codeword: &BitVector, scale: f64) -> Self {
        Self {
            llrs: modulate_bpsk(codeword)
                .into_iter()
                .map(|x| x * scale)
                .collect(),
        }
    }

    /// Hard decisions: 1 where the LLR is negative.
    pub fn hard_decisions(&self) -> BitVector {
        BitVector::from_vec_unchecked(self.llrs.iter().map(|&l| u8::from(l < 0.0)).collect())
    }
}

pub fn modulate_bpsk(c: &BitVector) -> Vec<f64> {
    c.as_slice().iter().map(|&b| 1.0 - 2.0 * b as f64).collect()
}

/// Adds noise to BPSK symbols. The noise of sample `i` depends only on
/// `(spec.seed, frame_index, i)`.
pub fn transmit_awgn(x: &[f64], spec: &ChannelSpec, frame_index: u64) -> LlrFrame {
    let mut rng = rng::substream(spec.seed, "noise", frame_index);
    let sigma = spec.sigma();
    let scale = 2.0 / (sigma * sigma);
    LlrFrame {
        llrs: x
            .iter()
            .map(|&s| {
                let n: f64 = StandardNormal.sample(&mut rng);
                (s + sigma * n) * scale
            })
            .collect(),
    }
}

/// Allocation-free variant used by the evaluator: writes the LLRs of a
/// noisy BPSK codeword into `out`, drawing standard normals from `rng`.
pub(crate) fn fill_llrs<R: rand::Rng>(codeword: &[u8], sigma: f64, rng: &mut R, out: &mut [f64]) {
    let scale = 2.0 / (sigma * sigma);
    for (o, &b) in out.iter_mut().zip(codeword) {
        let n: f64 = StandardNormal.sample(rng);
        *o = (1.0 - 2.0 * b as f64 + sigma * n) * scale;
    }
}
