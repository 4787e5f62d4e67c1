//! Result serialization: the per-round series CSV, the run summary
//! JSON, and saved instance files for replay.
//!
//! All files are pure functions of (config, master seed): fixed row and
//! field order, fixed numeric formatting (9 significant digits via
//! exponent notation, `.` separator), LF line endings.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ResolvedExperiment};
use crate::error::{Error, Result};
use crate::market::{oracle_solution, ValuationProfile};
use crate::sim::{AggregateCheckpoint, AggregateResult, Stat};
use crate::theory::{
    individual_upper_bounds, minimax_reference, price_bound_constants, social_lower_bound_constant,
    social_upper_bound_parts, IndividualBounds, TheoryParams,
};

/// 9 significant digits, platform-independent.
pub fn format_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

fn stat_columns(stat: &Stat) -> String {
    format!("{},{},{}", format_sig9(stat.mean), format_sig9(stat.q25), format_sig9(stat.q75))
}

/// Renders the aggregate series as CSV. Row order is fixed: rounds
/// ascending; within a round the metrics K, price_dev, regret_buyer
/// (agent ids ascending), regret_seller, regret_social. The agent_id
/// column is empty for market-level metrics.
pub fn render_series_csv(aggregate: &AggregateResult) -> String {
    let mut out = String::from("t,metric,agent_id,mean,q25,q75\n");
    for idx in 0..aggregate.ts.len() {
        let t = aggregate.ts[idx];
        out.push_str(&format!("{t},K,,{}\n", stat_columns(&aggregate.k[idx])));
        out.push_str(&format!("{t},price_dev,,{}\n", stat_columns(&aggregate.price_dev[idx])));
        for (id, series) in aggregate.buyer_regret.iter().enumerate() {
            out.push_str(&format!("{t},regret_buyer,{id},{}\n", stat_columns(&series[idx])));
        }
        for (id, series) in aggregate.seller_regret.iter().enumerate() {
            out.push_str(&format!("{t},regret_seller,{id},{}\n", stat_columns(&series[idx])));
        }
        out.push_str(&format!("{t},regret_social,,{}\n", stat_columns(&aggregate.social_regret[idx])));
    }
    out
}

/// Closed-form bound values at the run's horizon.
#[derive(Debug, Clone, Serialize)]
pub struct TheoryReport {
    pub params: TheoryParams,
    pub social_bound_log_coefficient: f64,
    pub social_bound_constant: f64,
    pub social_upper_bound: f64,
    pub price_bound_c_b: f64,
    pub price_bound_c_s: f64,
    pub individual_upper_bounds: IndividualBounds,
    pub social_lower_bound_constant: f64,
}

/// Computes the theory report for a resolved run; fails on degenerate
/// instances (zero gaps, no oracle trade) or alphas below the bound's
/// validity region.
pub fn theory_report(resolved: &ResolvedExperiment) -> Result<TheoryReport> {
    let params = TheoryParams::new(
        resolved.roster.alpha_min(),
        resolved.roster.alpha_max(),
        resolved.settings.v_cap,
    );
    let t = resolved.settings.horizon;
    let (coef, constant) = social_upper_bound_parts(&resolved.profile, &params)?;
    let (c_b, c_s) = price_bound_constants(&resolved.profile, &params)?;
    Ok(TheoryReport {
        params,
        social_bound_log_coefficient: coef,
        social_bound_constant: constant,
        social_upper_bound: coef * (t as f64).ln() + constant,
        price_bound_c_b: c_b,
        price_bound_c_s: c_s,
        individual_upper_bounds: individual_upper_bounds(&resolved.profile, &params, t)?,
        social_lower_bound_constant: social_lower_bound_constant(&resolved.profile)?,
    })
}

/// Final-round ledgers, bound report, and full provenance for one run.
#[derive(Debug, Serialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub paths: usize,
    pub horizon: u64,
    pub instance: InstanceFile,
    pub buyer_alphas: Vec<f64>,
    pub seller_alphas: Vec<f64>,
    pub final_buyer_regret: Vec<Stat>,
    pub final_seller_regret: Vec<Stat>,
    pub final_social_regret: Stat,
    pub final_price_deviation: Stat,
    pub tail_k_star_fraction: f64,
    pub tail_mean_abs_price_dev: f64,
    pub checkpoints: Vec<AggregateCheckpoint>,
    pub budget_violations: u64,
    /// Minimax participant-regret reference sqrt(T)/36 at the horizon.
    pub minimax_reference: f64,
    pub theory: Option<TheoryReport>,
    /// Why the theory report is absent, when it is.
    pub theory_error: Option<String>,
}

pub fn build_summary(
    aggregate: &AggregateResult,
    resolved: &ResolvedExperiment,
    config: &ExperimentConfig,
) -> Summary {
    let (theory, theory_error) = match theory_report(resolved) {
        Ok(report) => (Some(report), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Summary {
        config: config.clone(),
        master_seed: resolved.master_seed,
        paths: aggregate.paths,
        horizon: resolved.settings.horizon,
        instance: InstanceFile::from_profile(&resolved.profile),
        buyer_alphas: resolved.roster.buyer_alphas.clone(),
        seller_alphas: resolved.roster.seller_alphas.clone(),
        final_buyer_regret: aggregate.final_buyer_regret.clone(),
        final_seller_regret: aggregate.final_seller_regret.clone(),
        final_social_regret: aggregate.final_social_regret,
        final_price_deviation: aggregate.final_price_deviation,
        tail_k_star_fraction: aggregate.tail_k_star_fraction,
        tail_mean_abs_price_dev: aggregate.tail_mean_abs_price_dev,
        checkpoints: aggregate.checkpoints.clone(),
        budget_violations: aggregate.budget_violations,
        minimax_reference: minimax_reference(resolved.settings.horizon),
        theory,
        theory_error,
    }
}

/// Writes `series.csv` and `summary.json` into the config's output
/// directory; returns both paths.
pub fn emit_results(
    aggregate: &AggregateResult,
    resolved: &ResolvedExperiment,
    config: &ExperimentConfig,
) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(&config.out_dir)?;
    let series_path = config.out_dir.join("series.csv");
    let summary_path = config.out_dir.join("summary.json");
    fs::write(&series_path, render_series_csv(aggregate))?;
    let summary = build_summary(aggregate, resolved, config);
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    fs::write(&summary_path, json)?;
    Ok((series_path, summary_path))
}

/// On-disk instance form: true valuations only; every derived quantity
/// (k_star, p_star, optimal sets, gap) is recomputed on load so a stale
/// file cannot smuggle in inconsistent oracle data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub buyer_values: Vec<f64>,
    pub seller_values: Vec<f64>,
    pub k_star: usize,
    pub p_star: Option<f64>,
    pub delta: Option<f64>,
}

impl InstanceFile {
    pub fn from_profile(profile: &ValuationProfile) -> Self {
        Self {
            buyer_values: profile.buyer_values.clone(),
            seller_values: profile.seller_values.clone(),
            k_star: profile.k_star,
            p_star: profile.p_star,
            delta: profile.delta,
        }
    }
}

pub fn save_instance(path: &Path, profile: &ValuationProfile) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut json = serde_json::to_string_pretty(&InstanceFile::from_profile(profile))?;
    json.push('\n');
    fs::write(path, json)?;
    Ok(())
}

pub fn load_instance(path: &Path) -> Result<ValuationProfile> {
    let text = fs::read_to_string(path)?;
    let file: InstanceFile = serde_json::from_str(&text)?;
    let profile = oracle_solution(&file.buyer_values, &file.seller_values)?;
    if profile.k_star != file.k_star {
        return Err(Error::InvalidInput(format!(
            "instance file claims k_star = {} but the valuations clear at {}",
            file.k_star, profile.k_star
        )));
    }
    Ok(profile)
}
