//! Reinforcement-learning constructors: a Gaussian policy over the parity
//! part of standard-form generator matrices ([`pg`]) and an actor-critic
//! agent that grows nested polar information sets ([`a2c`]).

pub mod a2c;
pub mod pg;

/// Rewards shifted to zero mean and scaled to unit (population) standard
/// deviation. A constant batch is only centered; the flag reports that.
pub fn normalize_rewards(rewards: &[f64]) -> (Vec<f64>, bool) {
    if rewards.is_empty() {
        return (Vec::new(), false);
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let centered = rewards.iter().map(|r| r - mean);
    if var > 0.0 {
        let sd = var.sqrt();
        (centered.map(|c| c / sd).collect(), false)
    } else {
        (centered.collect(), true)
    }
}
