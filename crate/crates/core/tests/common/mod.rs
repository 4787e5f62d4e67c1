//! Shared test oracles, implemented independently of the library's
//! clearing code: the match count comes from exhaustive subset
//! enumeration and the orderings from selection sort.

/// Largest k such that some k buyers and k sellers can trade (every
/// chosen bid >= every chosen ask), found by enumerating all subset
/// pairs. Only usable for small markets.
pub fn brute_force_k(buyer_bids: &[f64], seller_bids: &[f64]) -> usize {
    let n = buyer_bids.len();
    let m = seller_bids.len();
    assert!(n <= 16 && m <= 16, "exhaustive oracle is exponential");
    let mut best = 0usize;
    for a in 0u32..1 << n {
        let k = a.count_ones() as usize;
        if k <= best {
            continue;
        }
        let min_bid = (0..n)
            .filter(|i| a >> i & 1 == 1)
            .map(|i| buyer_bids[i])
            .fold(f64::INFINITY, f64::min);
        for b in 0u32..1 << m {
            if b.count_ones() as usize != k {
                continue;
            }
            let max_ask = (0..m)
                .filter(|j| b >> j & 1 == 1)
                .map(|j| seller_bids[j])
                .fold(f64::NEG_INFINITY, f64::max);
            if min_bid >= max_ask {
                best = k;
                break;
            }
        }
    }
    best
}

/// Buyer ids by bid descending (id ascending on ties), via selection
/// sort over the raw arrays.
pub fn selection_buyer_order(bids: &[f64]) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..bids.len()).collect();
    let mut out = Vec::with_capacity(bids.len());
    while !remaining.is_empty() {
        let mut best = 0;
        for idx in 1..remaining.len() {
            if bids[remaining[idx]] > bids[remaining[best]] {
                best = idx;
            }
        }
        out.push(remaining.remove(best));
    }
    out
}

/// Seller ids by ask ascending (id ascending on ties).
pub fn selection_seller_order(bids: &[f64]) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..bids.len()).collect();
    let mut out = Vec::with_capacity(bids.len());
    while !remaining.is_empty() {
        let mut best = 0;
        for idx in 1..remaining.len() {
            if bids[remaining[idx]] < bids[remaining[best]] {
                best = idx;
            }
        }
        out.push(remaining.remove(best));
    }
    out
}

/// Full independent clearing oracle: (k, price, buyer set, seller set).
pub fn brute_force_clear(
    buyer_bids: &[f64],
    seller_bids: &[f64],
) -> (usize, Option<f64>, Vec<usize>, Vec<usize>) {
    let k = brute_force_k(buyer_bids, seller_bids);
    if k == 0 {
        return (0, None, vec![], vec![]);
    }
    let b_order = selection_buyer_order(buyer_bids);
    let s_order = selection_seller_order(seller_bids);
    let price = (buyer_bids[b_order[k - 1]] + seller_bids[s_order[k - 1]]) / 2.0;
    let mut buyers = b_order[..k].to_vec();
    let mut sellers = s_order[..k].to_vec();
    buyers.sort_unstable();
    sellers.sort_unstable();
    (k, Some(price), buyers, sellers)
}
