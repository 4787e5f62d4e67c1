//! Bidding strategies: confidence-bound learners (UCB buyers, LCB
//! sellers), truthful oracles, and myopic price-setter deviants.

use crate::error::{Error, Result};
use crate::market::{buyer_order, seller_order, ValuationProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Buyer,
    Seller,
}

/// One agent's running estimate of her own valuation.
///
/// The empirical mean is kept as (sum, count) so that it equals the exact
/// arithmetic mean of all observed samples; it is undefined until the
/// first participation.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentBelief {
    pub side: Side,
    /// Confidence-width scale (alpha_{b,i} or alpha_{s,j}).
    pub alpha: f64,
    sample_sum: f64,
    participation_count: u64,
}

impl AgentBelief {
    pub fn new(side: Side, alpha: f64) -> Self {
        Self { side, alpha, sample_sum: 0.0, participation_count: 0 }
    }

    pub fn participation_count(&self) -> u64 {
        self.participation_count
    }

    /// Exact running mean; `None` before the first sample.
    pub fn empirical_mean(&self) -> Option<f64> {
        (self.participation_count > 0).then(|| self.sample_sum / self.participation_count as f64)
    }
}

/// Confidence width sqrt(alpha * ln(round_t) / n).
fn confidence_width(alpha: f64, round_t: u64, n: u64) -> f64 {
    (alpha * (round_t as f64).ln() / n as f64).sqrt()
}

/// Buyer bid: empirical mean plus the confidence width. An agent that
/// has never participated bids the valuation cap `v_cap`, which forces
/// participation like an infinite-width bound would.
pub fn ucb_bid(belief: &AgentBelief, round_t: u64, v_cap: f64) -> Result<f64> {
    if belief.side != Side::Buyer {
        return Err(Error::InvalidInput("ucb_bid requires a buyer belief".into()));
    }
    if round_t < 1 {
        return Err(Error::InvalidInput("round index must be >= 1".into()));
    }
    match belief.empirical_mean() {
        None => Ok(v_cap),
        Some(mean) => {
            Ok(mean + confidence_width(belief.alpha, round_t, belief.participation_count))
        }
    }
}

/// Seller bid: empirical mean minus the confidence width; may be
/// negative. A cold-start seller bids 0.
pub fn lcb_bid(belief: &AgentBelief, round_t: u64) -> Result<f64> {
    if belief.side != Side::Seller {
        return Err(Error::InvalidInput("lcb_bid requires a seller belief".into()));
    }
    if round_t < 1 {
        return Err(Error::InvalidInput("round index must be >= 1".into()));
    }
    match belief.empirical_mean() {
        None => Ok(0.0),
        Some(mean) => {
            Ok(mean - confidence_width(belief.alpha, round_t, belief.participation_count))
        }
    }
}

/// Folds one observed sample into the belief.
pub fn update_belief(mut belief: AgentBelief, observed_sample: f64) -> Result<AgentBelief> {
    if !observed_sample.is_finite() {
        return Err(Error::InvalidInput("observed sample must be finite".into()));
    }
    belief.sample_sum += observed_sample;
    belief.participation_count += 1;
    Ok(belief)
}

/// Per-agent strategy selection.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StrategyKind {
    ConfidenceBound,
    /// Always bids the true valuation; `value` overrides the profile's
    /// valuation when set.
    Truthful {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        value: Option<f64>,
    },
    /// The price-setting buyer shades her bid to just above the
    /// next-best crossing point.
    DeviantBuyerKstar { epsilon: f64 },
    /// The price-setting seller shades her ask to just below the
    /// next-best crossing point.
    DeviantSellerKstar { epsilon: f64 },
    /// Both price setters deviate, anchored on the oracle midpoint.
    DeviantBoth { epsilon: f64 },
}

impl StrategyKind {
    pub fn epsilon(&self) -> Option<f64> {
        match self {
            StrategyKind::DeviantBuyerKstar { epsilon }
            | StrategyKind::DeviantSellerKstar { epsilon }
            | StrategyKind::DeviantBoth { epsilon } => Some(*epsilon),
            _ => None,
        }
    }
}

/// Sorted-order statistics around the break-even index. Missing order
/// statistics resolve to sentinels so max/min pick the surviving term.
struct PriceSetterContext {
    b_kstar: f64,
    s_kstar: f64,
    /// (K*+1)-th highest buyer value, -inf when K* = N.
    b_next: f64,
    /// (K*+1)-th lowest seller value, +inf when K* = M.
    s_next: f64,
}

fn price_setter_context(profile: &ValuationProfile) -> Result<(Vec<usize>, Vec<usize>, PriceSetterContext)> {
    let k = profile.k_star;
    if k == 0 {
        return Err(Error::InvalidInput(
            "deviant bidding is undefined when the oracle match count is zero".into(),
        ));
    }
    let b_order = buyer_order(&profile.buyer_values);
    let s_order = seller_order(&profile.seller_values);
    let ctx = PriceSetterContext {
        b_kstar: profile.buyer_values[b_order[k - 1]],
        s_kstar: profile.seller_values[s_order[k - 1]],
        b_next: b_order.get(k).map_or(f64::NEG_INFINITY, |&i| profile.buyer_values[i]),
        s_next: s_order.get(k).map_or(f64::INFINITY, |&j| profile.seller_values[j]),
    };
    Ok((b_order, s_order, ctx))
}

/// Bid of a myopic deviant. Only the K*-th buyer (resp. seller) in the
/// oracle order is a price setter; calling this for any other agent is
/// an error.
pub fn deviant_bid(
    kind: StrategyKind,
    profile: &ValuationProfile,
    side: Side,
    agent_id: usize,
) -> Result<f64> {
    let epsilon = kind
        .epsilon()
        .ok_or_else(|| Error::InvalidInput("deviant_bid requires a deviant strategy kind".into()))?;
    if epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(Error::InvalidInput("deviant epsilon must be positive and finite".into()));
    }
    let (b_order, s_order, ctx) = price_setter_context(profile)?;
    let k = profile.k_star;

    match (kind, side) {
        (StrategyKind::DeviantBuyerKstar { .. }, Side::Buyer)
        | (StrategyKind::DeviantBoth { .. }, Side::Buyer) => {
            if b_order[k - 1] != agent_id {
                return Err(Error::InvalidInput(format!(
                    "buyer {agent_id} is not the price-setting buyer"
                )));
            }
            let anchor = match kind {
                StrategyKind::DeviantBuyerKstar { .. } => ctx.s_kstar,
                _ => (ctx.b_kstar + ctx.s_kstar) / 2.0,
            };
            Ok(anchor.max(ctx.b_next) + epsilon)
        }
        (StrategyKind::DeviantSellerKstar { .. }, Side::Seller)
        | (StrategyKind::DeviantBoth { .. }, Side::Seller) => {
            if s_order[k - 1] != agent_id {
                return Err(Error::InvalidInput(format!(
                    "seller {agent_id} is not the price-setting seller"
                )));
            }
            let anchor = match kind {
                StrategyKind::DeviantSellerKstar { .. } => ctx.b_kstar,
                _ => (ctx.b_kstar + ctx.s_kstar) / 2.0,
            };
            Ok(anchor.min(ctx.s_next) - epsilon)
        }
        _ => Err(Error::InvalidInput(
            "deviant strategy kind does not apply to this side".into(),
        )),
    }
}
