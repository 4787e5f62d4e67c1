//! Repeated-market driver: per-round bid collection, clearing, feedback
//! delivery, and multi-path replication.
//!
//! Paths are independent given (master_seed, path_index) and run in
//! parallel; per-path results are always combined in ascending path
//! order so the aggregate is identical for any thread count.

use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::agents::{lcb_bid, ucb_bid, update_belief, AgentBelief, Side, StrategyKind};
use crate::agents::deviant_bid;
use crate::environment::{path_rng, sample_observation, NoiseModel};
use crate::error::{Error, Result};
use crate::market::{clear_fixed_price, clear_market, BidProfile, RoundOutcome, ValuationProfile};
use crate::metrics::RegretLedger;

/// Per-agent strategies and confidence scales for one market.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentRoster {
    pub buyer_strategies: Vec<StrategyKind>,
    pub seller_strategies: Vec<StrategyKind>,
    pub buyer_alphas: Vec<f64>,
    pub seller_alphas: Vec<f64>,
}

impl AgentRoster {
    /// Everyone runs confidence-bound bidding with the given alphas.
    pub fn confidence_bound(buyer_alphas: Vec<f64>, seller_alphas: Vec<f64>) -> Self {
        Self {
            buyer_strategies: vec![StrategyKind::ConfidenceBound; buyer_alphas.len()],
            seller_strategies: vec![StrategyKind::ConfidenceBound; seller_alphas.len()],
            buyer_alphas,
            seller_alphas,
        }
    }

    pub fn truthful(n_buyers: usize, m_sellers: usize) -> Self {
        Self {
            buyer_strategies: vec![StrategyKind::Truthful { value: None }; n_buyers],
            seller_strategies: vec![StrategyKind::Truthful { value: None }; m_sellers],
            buyer_alphas: vec![4.0; n_buyers],
            seller_alphas: vec![4.0; m_sellers],
        }
    }

    pub fn alpha_max(&self) -> f64 {
        self.buyer_alphas.iter().chain(&self.seller_alphas).copied().fold(f64::NAN, f64::max)
    }

    pub fn alpha_min(&self) -> f64 {
        self.buyer_alphas.iter().chain(&self.seller_alphas).copied().fold(f64::NAN, f64::min)
    }
}

/// Simulation knobs shared by every path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub noise: NoiseModel,
    /// Cold-start buyer bid (valuation cap).
    pub v_cap: f64,
    /// Route clearing through the fixed-price relaxed system.
    pub relaxed_mode: bool,
    pub horizon: u64,
    /// Trace decimation stride; cumulative ledgers stay exact.
    pub stride: u64,
}

impl SimSettings {
    /// Every round up to 10^4 rounds, every 10th beyond.
    pub fn default_stride(horizon: u64) -> u64 {
        if horizon <= 10_000 {
            1
        } else {
            10
        }
    }
}

/// A learner bids from its belief; everything else is a bid frozen at
/// path construction (truthful and deviant bids are pure functions of
/// the true profile).
#[derive(Debug, Clone, Copy, PartialEq)]
enum ResolvedStrategy {
    Learner,
    Fixed(f64),
}

fn resolve_strategies(
    strategies: &[StrategyKind],
    profile: &ValuationProfile,
    side: Side,
) -> Result<Vec<ResolvedStrategy>> {
    let values = match side {
        Side::Buyer => &profile.buyer_values,
        Side::Seller => &profile.seller_values,
    };
    strategies
        .iter()
        .enumerate()
        .map(|(id, kind)| match kind {
            StrategyKind::ConfidenceBound => Ok(ResolvedStrategy::Learner),
            StrategyKind::Truthful { value } => {
                Ok(ResolvedStrategy::Fixed(value.unwrap_or(values[id])))
            }
            deviant => Ok(ResolvedStrategy::Fixed(deviant_bid(*deviant, profile, side, id)?)),
        })
        .collect()
}

/// Mutable state of one simulation path.
pub struct PathState {
    /// Rounds completed so far.
    pub round: u64,
    pub buyer_beliefs: Vec<AgentBelief>,
    pub seller_beliefs: Vec<AgentBelief>,
    pub ledger: RegretLedger,
    buyer_resolved: Vec<ResolvedStrategy>,
    seller_resolved: Vec<ResolvedStrategy>,
    rng: ChaCha12Rng,
}

impl PathState {
    pub fn new(
        profile: &ValuationProfile,
        roster: &AgentRoster,
        settings: &SimSettings,
        rng: ChaCha12Rng,
    ) -> Result<Self> {
        let n = profile.n_buyers();
        let m = profile.m_sellers();
        if roster.buyer_strategies.len() != n
            || roster.seller_strategies.len() != m
            || roster.buyer_alphas.len() != n
            || roster.seller_alphas.len() != m
        {
            return Err(Error::InvalidInput("roster size does not match the profile".into()));
        }
        if settings.relaxed_mode && profile.p_star.is_none() {
            return Err(Error::InvalidInput(
                "relaxed mode needs an oracle price (k_star >= 1)".into(),
            ));
        }
        Ok(Self {
            round: 0,
            buyer_beliefs: roster
                .buyer_alphas
                .iter()
                .map(|&a| AgentBelief::new(Side::Buyer, a))
                .collect(),
            seller_beliefs: roster
                .seller_alphas
                .iter()
                .map(|&a| AgentBelief::new(Side::Seller, a))
                .collect(),
            ledger: RegretLedger::new(n, m),
            buyer_resolved: resolve_strategies(&roster.buyer_strategies, profile, Side::Buyer)?,
            seller_resolved: resolve_strategies(&roster.seller_strategies, profile, Side::Seller)?,
            rng,
        })
    }
}

/// Advances one round: collect bids, clear, deliver feedback, account.
///
/// Bids for round t use the round-(t-1) confidence width, so the round-2
/// width is zero (ln 1 = 0); round 1 is all cold starts. Participating
/// learners receive one noisy sample of their own value; non-participants
/// observe nothing.
pub fn step_round(
    state: &mut PathState,
    profile: &ValuationProfile,
    settings: &SimSettings,
) -> Result<RoundOutcome> {
    let t = state.round + 1;
    let width_round = t.saturating_sub(1).max(1);

    let buyer_bids: Vec<f64> = state
        .buyer_resolved
        .iter()
        .zip(&state.buyer_beliefs)
        .map(|(strategy, belief)| match strategy {
            ResolvedStrategy::Fixed(bid) => Ok(*bid),
            ResolvedStrategy::Learner => ucb_bid(belief, width_round, settings.v_cap),
        })
        .collect::<Result<_>>()?;
    let seller_bids: Vec<f64> = state
        .seller_resolved
        .iter()
        .zip(&state.seller_beliefs)
        .map(|(strategy, belief)| match strategy {
            ResolvedStrategy::Fixed(bid) => Ok(*bid),
            ResolvedStrategy::Learner => lcb_bid(belief, width_round),
        })
        .collect::<Result<_>>()?;

    let bids = BidProfile { buyer_bids, seller_bids };
    let outcome = if settings.relaxed_mode {
        clear_fixed_price(&bids, profile.p_star.expect("validated at construction"))?
    } else {
        clear_market(&bids)?
    };

    for &i in &outcome.participating_buyers {
        if state.buyer_resolved[i] == ResolvedStrategy::Learner {
            let sample =
                sample_observation(settings.noise, profile.buyer_values[i], &mut state.rng)?;
            state.buyer_beliefs[i] = update_belief(state.buyer_beliefs[i].clone(), sample)?;
        }
        if let Some(p) = outcome.price {
            state.ledger.buyer_noisy_utility[i] += profile.buyer_values[i] - p;
        }
    }
    for &j in &outcome.participating_sellers {
        if state.seller_resolved[j] == ResolvedStrategy::Learner {
            let sample =
                sample_observation(settings.noise, profile.seller_values[j], &mut state.rng)?;
            state.seller_beliefs[j] = update_belief(state.seller_beliefs[j].clone(), sample)?;
        }
        if let Some(p) = outcome.price {
            state.ledger.seller_noisy_utility[j] += p - profile.seller_values[j];
        }
    }

    state.ledger.record_round(profile, &outcome)?;
    state.round = t;
    Ok(outcome)
}

/// One decimated trace point; regrets are cumulative through round `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub t: u64,
    pub k: usize,
    /// |p(t) - p*| at this round (0 when unpriced or k_star = 0).
    pub price_dev: f64,
    pub social_regret: f64,
    pub buyer_regret: Vec<f64>,
    pub seller_regret: Vec<f64>,
}

/// Exact statistics over the final 10% of rounds, kept regardless of
/// trace decimation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TailStats {
    pub rounds: u64,
    pub rounds_at_k_star: u64,
    pub abs_price_dev_sum: f64,
}

/// Cumulative totals frozen at quarter-horizon marks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checkpoint {
    pub t: u64,
    pub social_regret: f64,
    pub price_deviation_sum: f64,
}

pub struct PathTrace {
    pub records: Vec<TraceRecord>,
    pub final_ledger: RegretLedger,
    pub tail: TailStats,
    pub checkpoints: Vec<Checkpoint>,
    pub budget_violations: u64,
}

fn checkpoint_rounds(horizon: u64) -> Vec<u64> {
    let mut ts: Vec<u64> = [horizon / 4, horizon / 2, 3 * horizon / 4, horizon]
        .into_iter()
        .filter(|&t| t >= 1)
        .collect();
    ts.dedup();
    ts
}

/// Runs one full path of `settings.horizon` rounds.
pub fn run_path(
    profile: &ValuationProfile,
    roster: &AgentRoster,
    settings: &SimSettings,
    rng: ChaCha12Rng,
) -> Result<PathTrace> {
    if settings.horizon < 1 {
        return Err(Error::InvalidInput("horizon must be >= 1".into()));
    }
    let mut state = PathState::new(profile, roster, settings, rng)?;
    let mut records = Vec::new();
    let mut tail = TailStats::default();
    let mut checkpoints = Vec::new();
    let mut budget_violations = 0u64;
    let checkpoint_ts = checkpoint_rounds(settings.horizon);
    let tail_start = settings.horizon - settings.horizon / 10 + 1;

    for t in 1..=settings.horizon {
        let outcome = step_round(&mut state, profile, settings)?;

        if !settings.relaxed_mode && outcome.price.is_some() {
            // k buyers pay the price and k sellers receive it; any count
            // mismatch breaks exact budget balance.
            let paid = outcome.participating_buyers.len() as f64 * outcome.price.unwrap();
            let received = outcome.participating_sellers.len() as f64 * outcome.price.unwrap();
            if paid - received != 0.0 {
                budget_violations += 1;
            }
        }

        let price_dev = match (outcome.price, profile.p_star) {
            (Some(p), Some(p_star)) => (p - p_star).abs(),
            _ => 0.0,
        };
        if t >= tail_start {
            tail.rounds += 1;
            if outcome.k == profile.k_star {
                tail.rounds_at_k_star += 1;
            }
            tail.abs_price_dev_sum += price_dev;
        }
        if checkpoint_ts.contains(&t) {
            checkpoints.push(Checkpoint {
                t,
                social_regret: state.ledger.social_regret,
                price_deviation_sum: state.ledger.price_deviation,
            });
        }
        if t % settings.stride == 0 || t == settings.horizon {
            records.push(TraceRecord {
                t,
                k: outcome.k,
                price_dev,
                social_regret: state.ledger.social_regret,
                buyer_regret: state.ledger.buyer_regret.clone(),
                seller_regret: state.ledger.seller_regret.clone(),
            });
        }
    }

    Ok(PathTrace {
        records,
        final_ledger: state.ledger,
        tail,
        checkpoints,
        budget_violations,
    })
}

/// Mean and interquartile band of one series at one recorded round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub q25: f64,
    pub q75: f64,
}

/// Quantile by linear interpolation between order statistics:
/// q(p) = x_(lo) + frac * (x_(lo+1) - x_(lo)) with h = (n-1) * p,
/// lo = floor(h), frac = h - lo.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

fn stat_over_paths(values: &mut [f64]) -> Stat {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.sort_by(f64::total_cmp);
    Stat { mean, q25: quantile(values, 0.25), q75: quantile(values, 0.75) }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregateCheckpoint {
    pub t: u64,
    pub social_regret_mean: f64,
    pub price_deviation_mean: f64,
}

/// Cross-path aggregation: per recorded round, the mean and 25%/75%
/// quantiles of every tracked series.
pub struct AggregateResult {
    pub ts: Vec<u64>,
    pub k: Vec<Stat>,
    pub price_dev: Vec<Stat>,
    pub social_regret: Vec<Stat>,
    /// Indexed [agent][record].
    pub buyer_regret: Vec<Vec<Stat>>,
    pub seller_regret: Vec<Vec<Stat>>,
    pub final_buyer_regret: Vec<Stat>,
    pub final_seller_regret: Vec<Stat>,
    pub final_social_regret: Stat,
    pub final_price_deviation: Stat,
    /// Pooled over all paths' final 10% of rounds.
    pub tail_k_star_fraction: f64,
    pub tail_mean_abs_price_dev: f64,
    pub checkpoints: Vec<AggregateCheckpoint>,
    pub budget_violations: u64,
    pub paths: usize,
}

/// Runs `paths` independent paths and aggregates them. Path index `p`
/// uses the ChaCha stream `p` of the master seed; reduction is in
/// ascending path order, so the result does not depend on thread count.
pub fn run_experiment(
    profile: &ValuationProfile,
    roster: &AgentRoster,
    settings: &SimSettings,
    paths: usize,
    master_seed: u64,
) -> Result<AggregateResult> {
    if paths < 1 {
        return Err(Error::InvalidInput("need at least one path".into()));
    }
    let traces: Vec<PathTrace> = (0..paths)
        .into_par_iter()
        .map(|p| run_path(profile, roster, settings, path_rng(master_seed, p as u64)))
        .collect::<Result<_>>()?;
    aggregate(&traces, profile)
}

fn aggregate(traces: &[PathTrace], profile: &ValuationProfile) -> Result<AggregateResult> {
    let n_records = traces[0].records.len();
    if traces.iter().any(|tr| tr.records.len() != n_records) {
        return Err(Error::InvalidInput("paths produced unequal trace grids".into()));
    }
    let ts: Vec<u64> = traces[0].records.iter().map(|r| r.t).collect();
    let n = profile.n_buyers();
    let m = profile.m_sellers();

    let series = |f: &dyn Fn(&TraceRecord) -> f64| -> Vec<Stat> {
        (0..n_records)
            .map(|idx| {
                let mut vals: Vec<f64> = traces.iter().map(|tr| f(&tr.records[idx])).collect();
                stat_over_paths(&mut vals)
            })
            .collect()
    };

    let k = series(&|r| r.k as f64);
    let price_dev = series(&|r| r.price_dev);
    let social_regret = series(&|r| r.social_regret);
    let buyer_regret: Vec<Vec<Stat>> =
        (0..n).map(|i| series(&move |r: &TraceRecord| r.buyer_regret[i])).collect();
    let seller_regret: Vec<Vec<Stat>> =
        (0..m).map(|j| series(&move |r: &TraceRecord| r.seller_regret[j])).collect();

    let final_stat = |f: &dyn Fn(&RegretLedger) -> f64| -> Stat {
        let mut vals: Vec<f64> = traces.iter().map(|tr| f(&tr.final_ledger)).collect();
        stat_over_paths(&mut vals)
    };
    let final_buyer_regret: Vec<Stat> =
        (0..n).map(|i| final_stat(&move |l: &RegretLedger| l.buyer_regret[i])).collect();
    let final_seller_regret: Vec<Stat> =
        (0..m).map(|j| final_stat(&move |l: &RegretLedger| l.seller_regret[j])).collect();

    let tail_rounds: u64 = traces.iter().map(|tr| tr.tail.rounds).sum();
    let tail_hits: u64 = traces.iter().map(|tr| tr.tail.rounds_at_k_star).sum();
    let tail_dev: f64 = traces.iter().map(|tr| tr.tail.abs_price_dev_sum).sum();

    let n_checkpoints = traces[0].checkpoints.len();
    let checkpoints: Vec<AggregateCheckpoint> = (0..n_checkpoints)
        .map(|c| AggregateCheckpoint {
            t: traces[0].checkpoints[c].t,
            social_regret_mean: traces.iter().map(|tr| tr.checkpoints[c].social_regret).sum::<f64>()
                / traces.len() as f64,
            price_deviation_mean: traces
                .iter()
                .map(|tr| tr.checkpoints[c].price_deviation_sum)
                .sum::<f64>()
                / traces.len() as f64,
        })
        .collect();

    Ok(AggregateResult {
        ts,
        k,
        price_dev,
        social_regret,
        buyer_regret,
        seller_regret,
        final_buyer_regret,
        final_seller_regret,
        final_social_regret: final_stat(&|l: &RegretLedger| l.social_regret),
        final_price_deviation: final_stat(&|l: &RegretLedger| l.price_deviation),
        tail_k_star_fraction: tail_hits as f64 / tail_rounds.max(1) as f64,
        tail_mean_abs_price_dev: tail_dev / tail_rounds.max(1) as f64,
        checkpoints,
        budget_violations: traces.iter().map(|tr| tr.budget_violations).sum(),
        paths: traces.len(),
    })
}
