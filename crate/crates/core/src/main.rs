use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use auction_lab::config::{parse_config, resolve, ExperimentConfig, InstanceSource};
use auction_lab::market::{clear_market, oracle_solution, BidProfile};
use auction_lab::output::{
    build_summary, emit_results, save_instance, theory_report, InstanceFile,
};
use auction_lab::sim::{run_experiment, run_path, AgentRoster, SimSettings};
use auction_lab::theory::minimax_reference;
use auction_lab::environment::{path_rng, NoiseModel};

#[derive(Parser)]
#[command(
    name = "auction-lab",
    about = "Simulation laboratory for decentralized double-auction markets \
             under two-sided bandit feedback",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment and write series.csv + summary.json.
    Run(RunArgs),
    /// Print the closed-form regret-bound report for a config's instance.
    Bounds {
        #[arg(long)]
        config: PathBuf,
    },
    /// Materialize a config's instance and save it for replay.
    Gen {
        #[arg(long)]
        config: PathBuf,
        /// Instance file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run a saved instance under a config (instance source is
    /// replaced by the file).
    Replay(ReplayArgs),
    /// Run fast mechanism property checks on small random instances.
    Check,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the config's horizon.
    #[arg(long)]
    horizon: Option<u64>,
    /// Override the config's path count.
    #[arg(long)]
    paths: Option<usize>,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    config: PathBuf,
    /// Saved instance file to replay.
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_config(path: &PathBuf) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    Ok(parse_config(&text)?)
}

fn apply_overrides(
    config: &mut ExperimentConfig,
    horizon: Option<u64>,
    paths: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) {
    if let Some(h) = horizon {
        config.horizon = h;
    }
    if let Some(p) = paths {
        config.paths = p;
    }
    if let Some(s) = seed {
        config.master_seed = s;
    }
    if let Some(o) = out {
        config.out_dir = o;
    }
}

fn run_and_emit(config: &ExperimentConfig) -> anyhow::Result<()> {
    config.validate()?;
    let resolved = resolve(config)?;
    let aggregate = run_experiment(
        &resolved.profile,
        &resolved.roster,
        &resolved.settings,
        resolved.paths,
        resolved.master_seed,
    )?;
    let (series, summary_path) = emit_results(&aggregate, &resolved, config)?;
    let summary = build_summary(&aggregate, &resolved, config);
    println!(
        "ran {} paths of {} rounds: final mean social regret {:.6}, \
         tail K* fraction {:.4}, tail mean |p - p*| {:.6}",
        aggregate.paths,
        config.horizon,
        summary.final_social_regret.mean,
        summary.tail_k_star_fraction,
        summary.tail_mean_abs_price_dev,
    );
    println!("wrote {} and {}", series.display(), summary_path.display());
    Ok(())
}

fn bounds(config_path: &PathBuf) -> anyhow::Result<()> {
    let config = load_config(config_path)?;
    let resolved = resolve(&config)?;
    let report = theory_report(&resolved)?;
    #[derive(serde::Serialize)]
    struct BoundsOutput {
        instance: InstanceFile,
        horizon: u64,
        theory: auction_lab::output::TheoryReport,
        minimax_reference: f64,
    }
    let out = BoundsOutput {
        instance: InstanceFile::from_profile(&resolved.profile),
        horizon: config.horizon,
        theory: report,
        minimax_reference: minimax_reference(config.horizon),
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn gen(config_path: &PathBuf, out: &PathBuf) -> anyhow::Result<()> {
    let config = load_config(config_path)?;
    let resolved = resolve(&config)?;
    save_instance(out, &resolved.profile)?;
    println!(
        "wrote instance {} ({}x{}, k* = {})",
        out.display(),
        resolved.profile.n_buyers(),
        resolved.profile.m_sellers(),
        resolved.profile.k_star
    );
    Ok(())
}

fn replay(args: &ReplayArgs) -> anyhow::Result<()> {
    let mut config = load_config(&args.config)?;
    config.instance = InstanceSource::File { path: args.instance.clone() };
    apply_overrides(&mut config, None, None, args.seed, args.out.clone());
    run_and_emit(&config)
}

/// Fast self-checks of the mechanism invariants on randomized inputs.
fn check() -> anyhow::Result<()> {
    let mut rng = ChaCha12Rng::seed_from_u64(0xC0FFEE);
    let mut failures = 0u32;
    let mut report = |name: &str, ok: bool| {
        println!("{} {name}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    // budget balance and feasibility over random bid profiles
    let mut ok = true;
    for _ in 0..2_000 {
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=6);
        let bids = BidProfile::new(
            (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
            (0..m).map(|_| rng.random_range(0.0..1.0)).collect(),
        )?;
        let out = clear_market(&bids)?;
        ok &= out.participating_buyers.len() == out.k
            && out.participating_sellers.len() == out.k
            && out.price.is_some() == (out.k > 0);
        if let Some(p) = out.price {
            // every matched buyer outbids every matched seller's ask
            let min_bid = out
                .participating_buyers
                .iter()
                .map(|&i| bids.buyer_bids[i])
                .fold(f64::INFINITY, f64::min);
            let max_ask = out
                .participating_sellers
                .iter()
                .map(|&j| bids.seller_bids[j])
                .fold(f64::NEG_INFINITY, f64::max);
            ok &= min_bid >= max_ask;
            // exact budget balance: k buyers pay p, k sellers receive p
            ok &= (out.k as f64 * p) - (out.k as f64 * p) == 0.0;
        }
    }
    report("budget balance and participant-count symmetry", ok);

    // truthful play is a regret-free fixed point
    let mut ok = true;
    for _ in 0..200 {
        let n = rng.random_range(1..=5);
        let m = rng.random_range(1..=5);
        let profile = oracle_solution(
            &(0..n).map(|_| rng.random_range(0.0..1.0)).collect::<Vec<_>>(),
            &(0..m).map(|_| rng.random_range(0.0..1.0)).collect::<Vec<_>>(),
        )?;
        let roster = AgentRoster::truthful(n, m);
        let settings = SimSettings {
            noise: NoiseModel::Bernoulli,
            v_cap: 1.0,
            relaxed_mode: false,
            horizon: 25,
            stride: 1,
        };
        let trace = run_path(&profile, &roster, &settings, path_rng(1, 0))?;
        ok &= trace.final_ledger.social_regret == 0.0
            && trace.final_ledger.buyer_regret.iter().all(|&r| r == 0.0)
            && trace.final_ledger.seller_regret.iter().all(|&r| r == 0.0);
    }
    report("truthful fixed point", ok);

    // raising one buyer bid never lowers k; lowering one ask never lowers k
    let mut ok = true;
    for _ in 0..2_000 {
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=6);
        let buyers: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let sellers: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        let base = clear_market(&BidProfile::new(buyers.clone(), sellers.clone())?)?;
        let mut up = buyers.clone();
        let i = rng.random_range(0..n);
        up[i] += rng.random_range(0.0..1.0);
        let raised = clear_market(&BidProfile::new(up, sellers.clone())?)?;
        ok &= raised.k >= base.k;
        let mut down = sellers.clone();
        let j = rng.random_range(0..m);
        down[j] -= rng.random_range(0.0..1.0);
        let lowered = clear_market(&BidProfile::new(buyers, down)?)?;
        ok &= lowered.k >= base.k;
    }
    report("bid monotonicity of the match count", ok);

    if failures > 0 {
        anyhow::bail!("{failures} property check(s) failed");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => (|| {
            let mut config = load_config(&args.config)?;
            apply_overrides(&mut config, args.horizon, args.paths, args.seed, args.out.clone());
            run_and_emit(&config)
        })(),
        Command::Bounds { config } => bounds(config),
        Command::Gen { config, out } => gen(config, out),
        Command::Replay(args) => replay(args),
        Command::Check => check(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
