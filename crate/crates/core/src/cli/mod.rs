// Copyright (c) The swarm-consensus Authors.
// SPDX-License-Identifier: Apache-2.0

//! Command-line front end: `round`, `rating-experiment`, `sybil-sweep`, and
//! `latency`. Every command writes its artifacts plus a `manifest.json` into
//! the output directory.
//!
//! Exit codes: 0 success, 1 invalid configuration or arguments, 2 runtime
//! failure.

mod manifest;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

pub use manifest::{sha256_hex, ArtifactSet, RunManifest, MANIFEST_FILE};

use crate::economics::{self, linspace, linspace_usize, sybil_sweep, SweepConfig};
use crate::simulator::{
    self, default_abilities, rating_experiment, GenerationTime, LatencyParams, RatingExperimentConfig, ScenarioConfig,
    SimError, Simulation,
};

pub const SEED_ENV: &str = "SWARM_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig { .. } | SimError::Agent(_) => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn runtime<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(name = "swarm", version, about = "Swarm consensus simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run consensus rounds from a JSON scenario file.
    Round(RoundArgs),
    /// Estimate agent ratings over increasing numbers of rounds.
    RatingExperiment(RatingArgs),
    /// Sybil attack profitability over swarm size and deposit.
    SybilSweep(SweepArgs),
    /// Evaluate the analytic round-latency model.
    Latency(LatencyArgs),
}

#[derive(Debug, Args)]
pub struct RoundArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    /// Override the number of rounds.
    #[arg(long)]
    pub rounds: Option<u64>,
    #[arg(long, default_value = "out/round")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RatingArgs {
    #[arg(long, default_value_t = 10)]
    pub agents: usize,
    /// Comma-separated round checkpoints.
    #[arg(long, value_delimiter = ',', default_values_t = [10u64, 100, 1000])]
    pub rounds_list: Vec<u64>,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out/rating")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Swarm size range `min:max`.
    #[arg(long, default_value = "10:500")]
    pub n_range: String,
    /// Deposit range `min:max`, in tokens.
    #[arg(long, default_value = "0:2")]
    pub deposit_range: String,
    #[arg(long, default_value_t = 20.0)]
    pub reward: f64,
    /// Grid size as `<sizes>x<deposits>` or a single count for both.
    #[arg(long, default_value = "20x21")]
    pub cells: String,
    #[arg(long, default_value_t = 200)]
    pub rounds_per_cell: usize,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub attack_fraction: f64,
    #[arg(long, default_value_t = 0.5)]
    pub forfeit_fraction: f64,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, default_value = "out/sybil")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LatencyArgs {
    #[arg(long, default_value_t = 10)]
    pub agents: usize,
    /// Mean per-agent generation time.
    #[arg(long, default_value_t = 80.0)]
    pub t_gen_ms: f64,
    /// Half-width of a uniform jitter around the generation time.
    #[arg(long, default_value_t = 0.0)]
    pub t_gen_jitter_ms: f64,
    #[arg(long, default_value_t = 5.0)]
    pub t_commit_ms: f64,
    #[arg(long, default_value_t = 5.0)]
    pub t_reveal_ms: f64,
    #[arg(long, default_value_t = 5.0)]
    pub t_rank_token_ms: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_agg_ms: f64,
    /// Rankings per agent (default: derived from the swarm size).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out/latency")]
    pub out: PathBuf,
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(manifest) => {
            println!("wrote {}", manifest.output_dir.join(MANIFEST_FILE).display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<RunManifest, CliError> {
    match command {
        Command::Round(a) => cmd_round(&a),
        Command::RatingExperiment(a) => cmd_rating_experiment(&a),
        Command::SybilSweep(a) => cmd_sybil_sweep(&a),
        Command::Latency(a) => cmd_latency(&a),
    }
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn csv_writer(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(buf)
}

pub fn cmd_round(args: &RoundArgs) -> Result<RunManifest, CliError> {
    let mut config = load_scenario(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(rounds) = args.rounds {
        config.rounds = rounds;
    }
    let mut sim = Simulation::new(config.clone())?;

    let mut transcripts = Vec::new();
    let mut ratings = Vec::new();
    let mut ledger = Vec::new();
    {
        let mut rw = csv_writer(&mut ratings);
        let mut lw = csv_writer(&mut ledger);
        rw.write_record(["round", "agent_id", "rating"])
            .map_err(runtime("ratings.csv"))?;
        lw.write_record(["round", "agent_id", "delta", "balance"])
            .map_err(runtime("ledger.csv"))?;
        for _ in 0..config.rounds {
            let t = sim.step()?;
            let mut line = serde_json::to_vec(&t).map_err(runtime("transcripts.jsonl"))?;
            line.push(b'\n');
            transcripts.extend_from_slice(&line);
            let round = t.round_id.to_string();
            for (agent, rating) in &t.ratings {
                rw.write_record([round.clone(), agent.to_string(), rating.to_string()])
                    .map_err(runtime("ratings.csv"))?;
            }
            for (agent, delta) in &t.ledger_deltas {
                let balance = sim.state().ledger.balance(*agent);
                lw.write_record([round.clone(), agent.to_string(), delta.to_string(), balance.to_string()])
                    .map_err(runtime("ledger.csv"))?;
            }
        }
        rw.flush().map_err(runtime("ratings.csv"))?;
        lw.flush().map_err(runtime("ledger.csv"))?;
    }

    let mut out = ArtifactSet::create(&args.out).map_err(runtime("output directory"))?;
    out.write("transcripts.jsonl", &transcripts)
        .map_err(runtime("transcripts.jsonl"))?;
    out.write("ratings.csv", &ratings).map_err(runtime("ratings.csv"))?;
    out.write("ledger.csv", &ledger).map_err(runtime("ledger.csv"))?;
    info!("ran {} rounds", config.rounds);
    out.finish("round", config.seed, &config).map_err(runtime("manifest"))
}

#[derive(Serialize)]
struct RatingRunConfig<'a> {
    agents: usize,
    experiment: &'a RatingExperimentConfig,
}

pub fn cmd_rating_experiment(args: &RatingArgs) -> Result<RunManifest, CliError> {
    if args.rounds_list.is_empty() || args.rounds_list.contains(&0) {
        return Err(CliError::Config(
            "--rounds-list: need one or more positive round counts".into(),
        ));
    }
    if args.agents < 2 {
        return Err(CliError::Config("--agents: need at least 2".into()));
    }
    if args.agents == 2 {
        warn!("rank correlation over 2 agents is uninformative");
    }
    let config = RatingExperimentConfig::new(args.seed, default_abilities(args.agents), args.rounds_list.clone());
    let result = rating_experiment(&config)?;

    let mut table = Vec::new();
    result.write_csv(&mut table).map_err(runtime("rating_estimation.csv"))?;
    let mut summary = Vec::new();
    result
        .write_summary_csv(&mut summary)
        .map_err(runtime("rating_summary.csv"))?;
    for (rounds, rho) in result.checkpoints.iter().zip(&result.spearman) {
        match rho {
            Some(r) => println!("rounds={rounds} spearman={r:.4}"),
            None => println!("rounds={rounds} spearman=NA"),
        }
    }

    let mut out = ArtifactSet::create(&args.out).map_err(runtime("output directory"))?;
    out.write("rating_estimation.csv", &table)
        .map_err(runtime("rating_estimation.csv"))?;
    out.write("rating_summary.csv", &summary)
        .map_err(runtime("rating_summary.csv"))?;
    let resolved = RatingRunConfig {
        agents: args.agents,
        experiment: &config,
    };
    out.finish("rating-experiment", args.seed, &resolved)
        .map_err(runtime("manifest"))
}

fn parse_range<T: std::str::FromStr + PartialOrd + Copy>(flag: &str, text: &str) -> Result<(T, T), CliError> {
    let bad = || CliError::Config(format!("{flag}: expected `min:max`, got `{text}`"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo: T = lo.trim().parse().map_err(|_| bad())?;
    let hi: T = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(CliError::Config(format!("{flag}: min exceeds max in `{text}`")));
    }
    Ok((lo, hi))
}

fn parse_cells(text: &str) -> Result<(usize, usize), CliError> {
    let bad = || {
        CliError::Config(format!(
            "--cells: expected `<sizes>x<deposits>` or a count, got `{text}`"
        ))
    };
    let (a, b) = match text.split_once(['x', 'X']) {
        Some((a, b)) => (a, b),
        None => (text, text),
    };
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || b == 0 {
        return Err(bad());
    }
    Ok((a, b))
}

pub fn sweep_config_from_args(args: &SweepArgs) -> Result<SweepConfig, CliError> {
    let (n_lo, n_hi) = parse_range::<usize>("--n-range", &args.n_range)?;
    if n_lo < 2 {
        return Err(CliError::Config("--n-range: swarms need at least 2 agents".into()));
    }
    let (d_lo, d_hi) = parse_range::<f64>("--deposit-range", &args.deposit_range)?;
    if !(d_lo >= 0.0 && d_hi.is_finite()) {
        return Err(CliError::Config(
            "--deposit-range: deposits must be finite and >= 0".into(),
        ));
    }
    let (n_cells, d_cells) = parse_cells(&args.cells)?;
    if args.rounds_per_cell == 0 {
        return Err(CliError::Config("--rounds-per-cell: must be at least 1".into()));
    }
    if !(args.reward.is_finite() && args.reward >= 0.0) {
        return Err(CliError::Config("--reward: must be finite and >= 0".into()));
    }
    if !(0.0..=1.0).contains(&args.forfeit_fraction) {
        return Err(CliError::Config("--forfeit-fraction: must lie in [0, 1]".into()));
    }
    if !(args.attack_fraction > 0.0 && args.attack_fraction <= 1.0) {
        return Err(CliError::Config("--attack-fraction: must lie in (0, 1]".into()));
    }
    let n_values = if n_lo == n_hi {
        vec![n_lo]
    } else {
        linspace_usize(n_lo, n_hi, n_cells)
    };
    let deposits = if d_lo == d_hi {
        vec![d_lo]
    } else {
        linspace(d_lo, d_hi, d_cells)
    };
    let mut config = SweepConfig {
        n_values,
        deposits,
        reward: args.reward,
        forfeit_fraction: args.forfeit_fraction,
        rounds_per_cell: args.rounds_per_cell,
        seed: args.seed,
        ..SweepConfig::default()
    };
    config.attack.attack_fraction = args.attack_fraction;
    Ok(config)
}

pub fn cmd_sybil_sweep(args: &SweepArgs) -> Result<RunManifest, CliError> {
    let config = sweep_config_from_args(args)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs: must be at least 1".into()));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(runtime("thread pool"))?;
    let surface = pool.install(|| sybil_sweep(&config));
    let curve = economics::break_even(&surface);

    let mut surface_csv = Vec::new();
    surface
        .write_csv(&mut surface_csv)
        .map_err(runtime("profit_surface.csv"))?;
    let mut curve_csv = Vec::new();
    economics::write_break_even_csv(&curve, &mut curve_csv).map_err(runtime("break_even.csv"))?;
    for (n, point) in &curve {
        let win = surface.win_rates.get(n).copied().unwrap_or(0.0);
        match point.deposit() {
            Some(d) => println!("N={n} coalition_win_rate={win:.3} break_even_deposit={d}"),
            None => println!("N={n} coalition_win_rate={win:.3} break_even_deposit=NA"),
        }
    }

    let mut out = ArtifactSet::create(&args.out).map_err(runtime("output directory"))?;
    out.write("profit_surface.csv", &surface_csv)
        .map_err(runtime("profit_surface.csv"))?;
    out.write("break_even.csv", &curve_csv)
        .map_err(runtime("break_even.csv"))?;
    out.finish("sybil-sweep", config.seed, &config)
        .map_err(runtime("manifest"))
}

#[derive(Serialize)]
struct LatencyRunConfig {
    agents: usize,
    seed: u64,
    params: LatencyParams,
}

pub fn cmd_latency(args: &LatencyArgs) -> Result<RunManifest, CliError> {
    if args.agents < 2 {
        return Err(CliError::Config("--agents: need at least 2".into()));
    }
    let t_gen = if args.t_gen_jitter_ms > 0.0 {
        GenerationTime::Uniform {
            min_ms: (args.t_gen_ms - args.t_gen_jitter_ms).max(0.0),
            max_ms: args.t_gen_ms + args.t_gen_jitter_ms,
        }
    } else {
        GenerationTime::Constant { ms: args.t_gen_ms }
    };
    let params = LatencyParams {
        t_gen,
        t_commit: args.t_commit_ms,
        t_reveal: args.t_reveal_ms,
        t_rank_token: args.t_rank_token_ms,
        t_agg: args.t_agg_ms,
        k: args
            .k
            .unwrap_or_else(|| crate::protocol::rankers_per_response(args.agents)),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let breakdown = simulator::latency(&params, args.agents, &mut rng)?;

    let mut table = Vec::new();
    {
        let mut w = csv_writer(&mut table);
        w.write_record(["phase", "ms"]).map_err(runtime("latency.csv"))?;
        for (phase, ms) in breakdown.phases() {
            w.write_record([phase.to_string(), ms.to_string()])
                .map_err(runtime("latency.csv"))?;
            println!("{phase}: {ms} ms");
        }
        w.flush().map_err(runtime("latency.csv"))?;
    }
    let mut out = ArtifactSet::create(&args.out).map_err(runtime("output directory"))?;
    out.write("latency.csv", &table).map_err(runtime("latency.csv"))?;
    let resolved = LatencyRunConfig {
        agents: args.agents,
        seed: args.seed,
        params,
    };
    out.finish("latency", args.seed, &resolved).map_err(runtime("manifest"))
}
