//! Closed-form calculators for the regret bound constants, for
//! empirical-vs-theoretical comparison.
//!
//! All bounds are gap-based: they depend on valuations only through the
//! pairwise gaps around the break-even index (plus the explicit utility
//! cap `b_max`), and use the natural logarithm throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{buyer_order, seller_order, ValuationProfile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    /// Concentration exponent; the displayed bound constants use 4.
    pub beta: f64,
    pub alpha_max: f64,
    pub alpha_min: f64,
    /// Per-round utility cap in the MN*b_max*pi^2/6 correction term.
    pub b_max: f64,
}

impl TheoryParams {
    pub fn new(alpha_min: f64, alpha_max: f64, b_max: f64) -> Self {
        Self { beta: 4.0, alpha_max, alpha_min, b_max }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 4.0 && self.alpha_min >= self.beta && self.alpha_max >= self.alpha_min) {
            return Err(Error::InvalidInput(
                "bound validity needs alpha_max >= alpha_min >= beta >= 4".into(),
            ));
        }
        Ok(())
    }

    /// (sqrt(alpha_max) + sqrt(beta))^2, the shared gap-term coefficient.
    fn coef(&self) -> f64 {
        let c = self.alpha_max.sqrt() + self.beta.sqrt();
        c * c
    }
}

/// Valuations in mechanism order: buyers descending, sellers ascending.
struct SortedValues {
    buyers: Vec<f64>,
    sellers: Vec<f64>,
    /// agent id per sorted rank, for scattering results back.
    buyer_ids: Vec<usize>,
    seller_ids: Vec<usize>,
    k: usize,
}

fn sorted_values(profile: &ValuationProfile) -> Result<SortedValues> {
    if profile.k_star == 0 {
        return Err(Error::DegenerateInstance(
            "theory bounds require an oracle match count of at least 1".into(),
        ));
    }
    let buyer_ids = buyer_order(&profile.buyer_values);
    let seller_ids = seller_order(&profile.seller_values);
    Ok(SortedValues {
        buyers: buyer_ids.iter().map(|&i| profile.buyer_values[i]).collect(),
        sellers: seller_ids.iter().map(|&j| profile.seller_values[j]).collect(),
        buyer_ids,
        seller_ids,
        k: profile.k_star,
    })
}

fn checked_gap(gap: f64, what: &str) -> Result<f64> {
    if gap > 0.0 {
        Ok(gap)
    } else {
        Err(Error::DegenerateInstance(format!("non-positive gap in {what}")))
    }
}

/// Social-welfare regret bound: three gap double-sums scaling with
/// log(T) plus the constant MN*b_max*pi^2/6 correction.
pub fn social_upper_bound(profile: &ValuationProfile, params: &TheoryParams, t: u64) -> Result<f64> {
    let (coef, constant) = social_upper_bound_parts(profile, params)?;
    Ok(coef * (t as f64).ln() + constant)
}

/// The bound split as (log-coefficient, constant term).
pub fn social_upper_bound_parts(
    profile: &ValuationProfile,
    params: &TheoryParams,
) -> Result<(f64, f64)> {
    params.validate()?;
    let sv = sorted_values(profile)?;
    let coef = params.coef();
    let (n, m, k) = (sv.buyers.len(), sv.sellers.len(), sv.k);

    let mut gap_sum = 0.0;
    for i in 0..k {
        for i2 in k..n {
            gap_sum += 1.0 / checked_gap(sv.buyers[i] - sv.buyers[i2], "buyer-buyer sum")?;
        }
    }
    for j in 0..k {
        for j2 in k..m {
            gap_sum += 1.0 / checked_gap(sv.sellers[j2] - sv.sellers[j], "seller-seller sum")?;
        }
    }
    for j2 in k..m {
        for i2 in k..n {
            gap_sum += 1.0 / checked_gap(sv.sellers[j2] - sv.buyers[i2], "seller-buyer sum")?;
        }
    }
    let constant = (m * n) as f64 * params.b_max * std::f64::consts::PI.powi(2) / 6.0;
    Ok((coef * gap_sum, constant))
}

/// Per-agent regret bounds at horizon `t`, indexed by agent id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndividualBounds {
    pub buyers: Vec<f64>,
    pub sellers: Vec<f64>,
}

/// Cumulative price-deviation constants (C_b, C_s): the log(T)
/// coefficients of sum |p(t) - p*| on the buyer-facing and
/// seller-facing side respectively.
pub fn price_bound_constants(profile: &ValuationProfile, params: &TheoryParams) -> Result<(f64, f64)> {
    params.validate()?;
    let sv = sorted_values(profile)?;
    let coef = params.coef();
    let (n, m, k) = (sv.buyers.len(), sv.sellers.len(), sv.k);
    let root_m = ((m - k + 1) as f64).sqrt();
    let root_n = ((n - k + 1) as f64).sqrt();

    let mut two_cb = 0.0;
    for j in 0..k - 1 {
        two_cb += coef / checked_gap(sv.sellers[k - 1] - sv.sellers[j], "C_b participant sellers")?;
    }
    for i2 in k..n {
        two_cb +=
            coef * root_m / checked_gap(sv.buyers[k - 1] - sv.buyers[i2], "C_b non-participant buyers")?;
    }
    for j2 in k..m {
        let gap = checked_gap(sv.sellers[j2] - sv.sellers[k - 1], "C_b non-participant sellers")?;
        two_cb += ((n - k + 1) as f64 + root_n) * coef / gap;
    }

    let mut two_cs = 0.0;
    for i in 0..k - 1 {
        two_cs += coef / checked_gap(sv.buyers[i] - sv.buyers[k - 1], "C_s participant buyers")?;
    }
    for j2 in k..m {
        two_cs +=
            coef * root_n / checked_gap(sv.sellers[j2] - sv.sellers[k - 1], "C_s non-participant sellers")?;
    }
    for i2 in k..n {
        let gap = checked_gap(sv.buyers[k - 1] - sv.buyers[i2], "C_s non-participant buyers")?;
        two_cs += ((m - k + 1) as f64 + root_m) * coef / gap;
    }

    Ok((two_cb / 2.0, two_cs / 2.0))
}

/// Individual regret bounds: participants get the sqrt(T log T) term
/// plus a price-deviation constant; non-participants get a pure
/// log(T) / gap bound.
pub fn individual_upper_bounds(
    profile: &ValuationProfile,
    params: &TheoryParams,
    t: u64,
) -> Result<IndividualBounds> {
    params.validate()?;
    let sv = sorted_values(profile)?;
    let p_star = profile.p_star.expect("k_star >= 1 implies a price");
    let coef = params.coef();
    let root_coef = params.alpha_max.sqrt() + params.beta.sqrt();
    let (n, m, k) = (sv.buyers.len(), sv.sellers.len(), sv.k);
    let (c_b, c_s) = price_bound_constants(profile, params)?;
    let log_t = (t as f64).ln();
    let sqrt_term = root_coef * ((t as f64) * log_t).sqrt();

    let mut buyers = vec![0.0; n];
    for rank in 0..n {
        let value = sv.buyers[rank];
        let bound = if rank < k {
            let c_prime =
                (n - k) as f64 * coef / checked_gap(value - p_star, "participant buyer gap")? + c_b;
            sqrt_term + c_prime * log_t
        } else {
            ((m - k + 1) as f64).sqrt() * coef * log_t
                / checked_gap(sv.buyers[k - 1] - value, "non-participant buyer gap")?
        };
        buyers[sv.buyer_ids[rank]] = bound;
    }

    let mut sellers = vec![0.0; m];
    for rank in 0..m {
        let value = sv.sellers[rank];
        let bound = if rank < k {
            let c_prime =
                (m - k) as f64 * coef / checked_gap(p_star - value, "participant seller gap")? + c_s;
            sqrt_term + c_prime * log_t
        } else {
            ((n - k + 1) as f64).sqrt() * coef * log_t
                / checked_gap(value - sv.sellers[k - 1], "non-participant seller gap")?
        };
        sellers[sv.seller_ids[rank]] = bound;
    }

    Ok(IndividualBounds { buyers, sellers })
}

/// Closed-form relaxation of the semi-bandit social-regret lower-bound
/// constant. Missing order statistics beyond the break-even index
/// resolve to sentinels so min/max pick the surviving term.
pub fn social_lower_bound_constant(profile: &ValuationProfile) -> Result<f64> {
    let sv = sorted_values(profile)?;
    let (n, m, k) = (sv.buyers.len(), sv.sellers.len(), sv.k);
    let b_next = if k < n { sv.buyers[k] } else { f64::NEG_INFINITY };
    let s_next = if k < m { sv.sellers[k] } else { f64::INFINITY };
    let buyer_anchor = sv.buyers[k - 1].min(s_next);
    let seller_anchor = sv.sellers[k - 1].max(b_next);

    let mut total = 0.0;
    for i2 in k..n {
        total += 2.0 / checked_gap(buyer_anchor - sv.buyers[i2], "lower-bound buyer gap")?;
    }
    for j2 in k..m {
        total += 2.0 / checked_gap(sv.sellers[j2] - seller_anchor, "lower-bound seller gap")?;
    }
    Ok(total)
}

/// Minimax participant-regret reference line sqrt(T)/36.
pub fn minimax_reference(t: u64) -> f64 {
    (t as f64).sqrt() / 36.0
}
