//! Average-price double-auction clearing and the oracle solution under
//! true valuations.
//!
//! Clearing sorts buyer bids descending and seller bids ascending, finds
//! the largest `k` such that the k-th highest buyer bid is at least the
//! k-th lowest seller bid, and prices the trade at the average of those
//! two order statistics. Ties on the same side break by lowest agent id.

use crate::error::{Error, Result};

/// One round of submitted bids. Buyer bids are indexed by buyer id,
/// seller bids (asking prices) by seller id.
#[derive(Debug, Clone, PartialEq)]
pub struct BidProfile {
    pub buyer_bids: Vec<f64>,
    pub seller_bids: Vec<f64>,
}

impl BidProfile {
    pub fn new(buyer_bids: Vec<f64>, seller_bids: Vec<f64>) -> Result<Self> {
        if buyer_bids.is_empty() || seller_bids.is_empty() {
            return Err(Error::InvalidInput(
                "bid profile needs at least one buyer and one seller".into(),
            ));
        }
        if buyer_bids.iter().chain(&seller_bids).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("bids must be finite".into()));
        }
        Ok(Self { buyer_bids, seller_bids })
    }
}

/// The cleared outcome of one round.
///
/// `price` is absent exactly when `k == 0`. Participant id lists are
/// sorted ascending. The mechanism is budget balanced by construction:
/// `k` buyers each pay `price` and `k` sellers each receive `price`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub k: usize,
    pub price: Option<f64>,
    pub participating_buyers: Vec<usize>,
    pub participating_sellers: Vec<usize>,
    pub bids: BidProfile,
}

impl RoundOutcome {
    pub fn buyer_participates(&self, id: usize) -> bool {
        self.participating_buyers.binary_search(&id).is_ok()
    }

    pub fn seller_participates(&self, id: usize) -> bool {
        self.participating_sellers.binary_search(&id).is_ok()
    }
}

/// Agent ids sorted into the mechanism's natural order: buyers by bid
/// descending, sellers by bid ascending, equal bids by lowest id first.
pub fn buyer_order(bids: &[f64]) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..bids.len()).collect();
    ids.sort_by(|&a, &b| bids[b].total_cmp(&bids[a]).then(a.cmp(&b)));
    ids
}

pub fn seller_order(bids: &[f64]) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..bids.len()).collect();
    ids.sort_by(|&a, &b| bids[a].total_cmp(&bids[b]).then(a.cmp(&b)));
    ids
}

/// Clears one round under the average-price rule.
///
/// `k` is the largest index with (k-th highest buyer bid) >= (k-th lowest
/// seller bid); equality counts as a trade. The price is the average of
/// those two bids.
pub fn clear_market(bids: &BidProfile) -> Result<RoundOutcome> {
    if bids.buyer_bids.is_empty() || bids.seller_bids.is_empty() {
        return Err(Error::InvalidInput("empty market side".into()));
    }
    let b_order = buyer_order(&bids.buyer_bids);
    let s_order = seller_order(&bids.seller_bids);

    let mut k = 0;
    for idx in 0..b_order.len().min(s_order.len()) {
        if bids.buyer_bids[b_order[idx]] >= bids.seller_bids[s_order[idx]] {
            k = idx + 1;
        } else {
            break;
        }
    }

    let price = if k > 0 {
        Some((bids.buyer_bids[b_order[k - 1]] + bids.seller_bids[s_order[k - 1]]) / 2.0)
    } else {
        None
    };
    let mut participating_buyers: Vec<usize> = b_order[..k].to_vec();
    let mut participating_sellers: Vec<usize> = s_order[..k].to_vec();
    participating_buyers.sort_unstable();
    participating_sellers.sort_unstable();

    Ok(RoundOutcome {
        k,
        price,
        participating_buyers,
        participating_sellers,
        bids: bids.clone(),
    })
}

/// Clears one round of the relaxed fixed-price system: every buyer with
/// bid >= `p_star` and every seller with bid <= `p_star` trades at
/// `p_star`, with no matching constraint between the two sides. `k` is
/// reported as the buyer-participant count.
pub fn clear_fixed_price(bids: &BidProfile, p_star: f64) -> Result<RoundOutcome> {
    if !p_star.is_finite() {
        return Err(Error::InvalidInput("fixed price must be finite".into()));
    }
    let participating_buyers: Vec<usize> = (0..bids.buyer_bids.len())
        .filter(|&i| bids.buyer_bids[i] >= p_star)
        .collect();
    let participating_sellers: Vec<usize> = (0..bids.seller_bids.len())
        .filter(|&j| bids.seller_bids[j] <= p_star)
        .collect();
    let any_trade = !participating_buyers.is_empty() || !participating_sellers.is_empty();
    Ok(RoundOutcome {
        k: participating_buyers.len(),
        price: any_trade.then_some(p_star),
        participating_buyers,
        participating_sellers,
        bids: bids.clone(),
    })
}

/// True valuations together with the oracle outcome of clearing them.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuationProfile {
    pub buyer_values: Vec<f64>,
    pub seller_values: Vec<f64>,
    pub k_star: usize,
    /// Oracle price; absent iff `k_star == 0`.
    pub p_star: Option<f64>,
    pub optimal_buyers: Vec<usize>,
    pub optimal_sellers: Vec<usize>,
    /// Minimum distance of any agent's valuation from `p_star`; absent
    /// iff `k_star == 0`.
    pub delta: Option<f64>,
}

impl ValuationProfile {
    pub fn n_buyers(&self) -> usize {
        self.buyer_values.len()
    }

    pub fn m_sellers(&self) -> usize {
        self.seller_values.len()
    }

    pub fn buyer_is_optimal(&self, id: usize) -> bool {
        self.optimal_buyers.binary_search(&id).is_ok()
    }

    pub fn seller_is_optimal(&self, id: usize) -> bool {
        self.optimal_sellers.binary_search(&id).is_ok()
    }
}

/// Derives the oracle solution by clearing the true valuations.
pub fn oracle_solution(buyer_values: &[f64], seller_values: &[f64]) -> Result<ValuationProfile> {
    let truth = BidProfile::new(buyer_values.to_vec(), seller_values.to_vec())?;
    let outcome = clear_market(&truth)?;
    let delta = outcome.price.map(|p| {
        buyer_values
            .iter()
            .chain(seller_values)
            .map(|v| (v - p).abs())
            .fold(f64::INFINITY, f64::min)
    });
    Ok(ValuationProfile {
        buyer_values: buyer_values.to_vec(),
        seller_values: seller_values.to_vec(),
        k_star: outcome.k,
        p_star: outcome.price,
        optimal_buyers: outcome.participating_buyers,
        optimal_sellers: outcome.participating_sellers,
        delta,
    })
}
