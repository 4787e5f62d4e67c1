//! Truth generation and reward sampling.
//!
//! Randomness is ChaCha12 throughout (seedable, portable, documented
//! keystream). Instance generation uses a generator seeded from the
//! spec's `rng_seed`; simulation paths each use a generator seeded from
//! the master seed with the ChaCha stream index set to the path index,
//! so paths are independent and embarrassingly parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{oracle_solution, ValuationProfile};

/// Maximum rejection-sampling attempts before an instance spec is
/// declared infeasible.
const REJECTION_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NoiseModel {
    /// value + Normal(0, 1) noise.
    Gaussian,
    /// Bernoulli(value) sample in {0, 1}; requires value in [0, 1].
    Bernoulli,
}

/// One observation of an agent's own valuation.
pub fn sample_observation(noise: NoiseModel, true_value: f64, rng: &mut impl Rng) -> Result<f64> {
    match noise {
        NoiseModel::Gaussian => {
            let z: f64 = rng.sample(StandardNormal);
            Ok(true_value + z)
        }
        NoiseModel::Bernoulli => {
            if !(0.0..=1.0).contains(&true_value) {
                return Err(Error::InvalidInput(format!(
                    "bernoulli noise requires a value in [0, 1], got {true_value}"
                )));
            }
            Ok(if rng.random::<f64>() < true_value { 1.0 } else { 0.0 })
        }
    }
}

/// Parameters for sampling a valuation instance with a prescribed match
/// count and minimum gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub n_buyers: usize,
    pub m_sellers: usize,
    pub k_star: usize,
    pub min_gap: f64,
    pub value_range: [f64; 2],
    pub rng_seed: u64,
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.n_buyers == 0 || self.m_sellers == 0 {
            errs.push("instance needs at least one buyer and one seller".to_string());
        }
        if self.k_star == 0 || self.k_star > self.n_buyers.min(self.m_sellers) {
            errs.push(format!(
                "k_star must satisfy 1 <= k_star <= min(N, M) = {}",
                self.n_buyers.min(self.m_sellers)
            ));
        }
        if !(self.min_gap > 0.0) {
            errs.push("min_gap must be positive".to_string());
        }
        let [lo, hi] = self.value_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            errs.push("value_range must be a finite interval [lo, hi] with lo < hi".to_string());
        }
        // k_star crossings each need a band of width 2 * min_gap around
        // the price inside the value range.
        if hi - lo < 2.0 * self.min_gap {
            errs.push("value_range too narrow for the requested min_gap".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errs))
        }
    }
}

/// Draws all N + M valuations i.i.d. uniform on the value range and
/// accepts the first draw whose oracle solution hits `k_star` exactly
/// with realized gap at least `min_gap`.
pub fn generate_instance(spec: &InstanceSpec) -> Result<ValuationProfile> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.rng_seed);
    let [lo, hi] = spec.value_range;
    for _ in 0..REJECTION_BUDGET {
        let buyers: Vec<f64> = (0..spec.n_buyers).map(|_| rng.random_range(lo..hi)).collect();
        let sellers: Vec<f64> = (0..spec.m_sellers).map(|_| rng.random_range(lo..hi)).collect();
        let profile = oracle_solution(&buyers, &sellers)?;
        if profile.k_star == spec.k_star && profile.delta.is_some_and(|d| d >= spec.min_gap) {
            return Ok(profile);
        }
    }
    Err(Error::InfeasibleSpec { draws: REJECTION_BUDGET })
}

/// Per-path generator: master seed keys the cipher, the path index
/// selects the keystream.
pub fn path_rng(master_seed: u64, path_index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(path_index);
    rng
}
