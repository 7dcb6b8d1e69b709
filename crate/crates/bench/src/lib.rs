//! Fixtures shared by the criterion benchmarks.

use ecc_core::baselines::dega_reliabilities;
use ecc_core::channel::{modulate_bpsk, transmit_awgn, ChannelSpec};
use ecc_core::gf2::BitVector;
use ecc_core::polar::{polar_encode, PolarCode};
use ecc_core::rng;
use rand::Rng;

/// DE/GA code designed at `db`.
pub fn dega_code(n: usize, k: usize, db: f64) -> PolarCode {
    dega_reliabilities(n, db).unwrap().top_k(k).unwrap()
}

/// `count` noisy LLR frames of random codewords at `db`.
pub fn noisy_frames(code: &PolarCode, db: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let spec = ChannelSpec::new(db, seed);
    let mut bits = rng::substream(seed, "info", 0);
    (0..count as u64)
        .map(|f| {
            let info: Vec<u8> = (0..code.k()).map(|_| bits.gen_range(0..2)).collect();
            let cw = polar_encode(code, &BitVector::from_bits(&info).unwrap()).unwrap();
            transmit_awgn(&modulate_bpsk(&cw), &spec, f).llrs
        })
        .collect()
}
