//! Batch entry point for the underground-link toolkit: synthesize or
//! ingest soil data, train the channel HMM, solve the transmission MDP,
//! and run simulations and sweeps that emit plot-ready result files.

mod config;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use config::RunConfig;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use wusn_core::data_pipeline::{
    clean, parse_csv, synth_generate, to_pathloss_trace, write_cleaned_csv, write_series_csv,
    PathLossTrace,
};
use wusn_core::hmm::{fit_em, GaussianHmm};
use wusn_core::mdp::{build_model, value_iteration, PolicyFile, POLICY_FORMAT_VERSION};
use wusn_core::simulator::{
    energy_per_success, queue_occupancy_report, run, run_power_sweep, run_queue_sweep,
    write_sweep_csv, KindSpec, RunKind, StateDecoding, SweepContext, SweepRow,
};
use wusn_core::soil_channel::Modulation;

const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "wusn", version, about = "Soil-channel transmission policy toolkit")]
struct Cli {
    /// Path to a TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the top-level seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweep parallelism (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic soil time-series CSV.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and clean a soil CSV, writing the cleaned series.
    Ingest {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the channel HMM from a soil CSV; writes the model JSON and a
    /// per-state summary CSV next to it.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the decision process from a trained model and solve it.
    Solve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the solved policy and both baselines over a trace.
    Simulate {
        #[arg(long)]
        policy: PathBuf,
        /// Trained model JSON (for channel state decoding).
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Power or queue-capacity sweep with per-point policy re-solve.
    Sweep {
        #[arg(long, value_parser = ["power", "queue"])]
        kind: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    if let Err(e) = run_cli() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run_cli() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .ok();
    }
    if cli.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let Some(command) = cli.command else {
        bail!("no subcommand given (try --help)");
    };
    match command {
        Command::Synth { out } => cmd_synth(&cfg, &out),
        Command::Ingest { data, out } => cmd_ingest(&cfg, &data, &out),
        Command::Train { data, out } => cmd_train(&cfg, &data, &out),
        Command::Solve { model, out } => cmd_solve(&cfg, &model, &out),
        Command::Simulate {
            policy,
            model,
            data,
            out,
        } => cmd_simulate(&cfg, &policy, &model, &data, &out),
        Command::Sweep {
            kind,
            data,
            model,
            out,
        } => cmd_sweep(&cfg, &kind, &data, model.as_deref(), &out),
    }
}

fn load_trace(cfg: &RunConfig, data: &Path) -> Result<PathLossTrace> {
    let file = fs::File::open(data)
        .with_context(|| format!("opening data file {}", data.display()))?;
    let series = parse_csv(file, &cfg.csv)?;
    let cleaned = clean(&series)?;
    Ok(to_pathloss_trace(&cleaned, &cfg.geometry.link())?)
}

fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let series = synth_generate(&cfg.synth, cfg.seed)?;
    let file = fs::File::create(out)
        .with_context(|| format!("creating output {}", out.display()))?;
    write_series_csv(&series, file)?;
    println!("wrote {} samples to {}", series.len(), out.display());
    Ok(())
}

fn cmd_ingest(cfg: &RunConfig, data: &Path, out: &Path) -> Result<()> {
    let file = fs::File::open(data)
        .with_context(|| format!("opening data file {}", data.display()))?;
    let series = parse_csv(file, &cfg.csv)?;
    let missing = series.epsilon.iter().filter(|v| v.is_none()).count()
        + series.sigma.iter().filter(|v| v.is_none()).count();
    let cleaned = clean(&series)?;
    let out_file = fs::File::create(out)?;
    write_cleaned_csv(&cleaned, out_file)?;
    println!(
        "cleaned {} samples ({missing} missing cells filled) -> {}",
        cleaned.len(),
        out.display()
    );
    Ok(())
}

fn cmd_train(cfg: &RunConfig, data: &Path, out: &Path) -> Result<()> {
    let trace = load_trace(cfg, data)?;
    let obs = trace.observations();
    let fit_cfg = cfg.hmm.fit_config(cfg.seed);
    let (model, report) = fit_em(&obs, &fit_cfg)?;
    fs::write(out, model.to_json()?)?;
    let summary_path = out.with_extension("states.csv");
    let mut summary = String::from("state,mean_pl_db,mean_delta_db\n");
    for (i, (pl, delta)) in model.state_summary().iter().enumerate() {
        summary.push_str(&format!("{i},{pl:.16e},{delta:.16e}\n"));
    }
    fs::write(&summary_path, summary)?;
    println!(
        "trained {}-state model on {} observations in {} EM iterations \
         (log-likelihood {:.3}) -> {}",
        model.n_states(),
        obs.len(),
        report.iterations,
        report.log_likelihood.last().unwrap(),
        out.display()
    );
    Ok(())
}

fn cmd_solve(cfg: &RunConfig, model_path: &Path, out: &Path) -> Result<()> {
    let model_json = fs::read_to_string(model_path)
        .with_context(|| format!("reading model {}", model_path.display()))?;
    let hmm = GaussianHmm::from_json(&model_json)?;
    let model = build_model(&hmm, &cfg.radio.radio(), &cfg.mdp.coeffs())?;
    let (values, policy, residuals) =
        value_iteration(&model, cfg.mdp.vi_tol, cfg.mdp.vi_max_iters)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
    let sweeps = residuals.len();
    let final_residual = *residuals.last().unwrap();
    let file = PolicyFile {
        version: POLICY_FORMAT_VERSION,
        model,
        policy,
        values,
        residuals,
    };
    fs::write(out, file.to_json()?)?;
    println!(
        "solved in {sweeps} sweeps (final residual {final_residual:.3e}) -> {}",
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SimReport<'a> {
    artifact_version: &'a str,
    config: &'a RunConfig,
    rows: Vec<ReportRow>,
}

#[derive(Serialize)]
struct ReportRow {
    kind: String,
    generated: u64,
    successful: u64,
    unsuccessful: u64,
    dropped: u64,
    energy_metric: f64,
    energy_ratio: Option<f64>,
    occupancy: wusn_core::simulator::OccupancySummary,
}

fn cmd_simulate(
    cfg: &RunConfig,
    policy_path: &Path,
    model_path: &Path,
    data: &Path,
    out: &Path,
) -> Result<()> {
    let trace = load_trace(cfg, data)?;
    let policy_file = PolicyFile::from_json(&fs::read_to_string(policy_path)?)?;
    let hmm = GaussianHmm::from_json(&fs::read_to_string(model_path)?)?;
    if hmm.n_states() != policy_file.policy.n_states {
        bail!(
            "model has {} states but policy expects {}",
            hmm.n_states(),
            policy_file.policy.n_states
        );
    }
    // radio parameters frozen into the policy take precedence so the run
    // matches the conditions the policy was solved for
    let radio = wusn_core::soil_channel::RadioConfig {
        p_t: policy_file.model.p_t,
        t_sym: policy_file.model.t_sym,
        packet_len: policy_file.model.packet_len,
        ..cfg.radio.radio()
    };
    let queue_cap = policy_file.model.coeffs.n_q;
    let kinds: [RunKind; 3] = [
        RunKind::Rl {
            policy: &policy_file.policy,
            hmm: &hmm,
            decoding: StateDecoding::Filtered,
        },
        RunKind::SenseThenTransmit {
            modulation: Modulation::Bpsk,
        },
        RunKind::SenseThenTransmit {
            modulation: Modulation::Psk8,
        },
    ];
    let mut rows = Vec::new();
    let mut report_rows = Vec::new();
    for kind in &kinds {
        let metrics = run(&trace, kind, &radio, queue_cap, cfg.seed)?;
        report_rows.push(ReportRow {
            kind: kind.label(),
            generated: metrics.generated,
            successful: metrics.successful,
            unsuccessful: metrics.unsuccessful_attempts,
            dropped: metrics.dropped,
            energy_metric: metrics.energy_metric,
            energy_ratio: energy_per_success(&metrics).ok(),
            occupancy: queue_occupancy_report(&metrics, queue_cap),
        });
        rows.push(SweepRow {
            power_w: radio.p_t,
            kind: kind.label(),
            n_q: queue_cap,
            t_max: policy_file.model.coeffs.t_max,
            metrics,
        });
    }
    let file = fs::File::create(out)?;
    write_sweep_csv(&rows, file)?;
    let report = SimReport {
        artifact_version: ARTIFACT_VERSION,
        config: cfg,
        rows: report_rows,
    };
    write_json(&out.with_extension("json"), &report)?;
    for r in &report.rows {
        println!(
            "{:>5}: delivered {}/{} dropped {} energy {:.4e}",
            r.kind, r.successful, r.generated, r.dropped, r.energy_metric
        );
    }
    println!("wrote {} and {}", out.display(), out.with_extension("json").display());
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn cmd_sweep(
    cfg: &RunConfig,
    kind: &str,
    data: &Path,
    model: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let trace = load_trace(cfg, data)?;
    let hmm = match model {
        Some(path) => GaussianHmm::from_json(&fs::read_to_string(path)?)?,
        None => {
            let fit_cfg = cfg.hmm.fit_config(cfg.seed);
            fit_em(&trace.observations(), &fit_cfg)?.0
        }
    };
    let ctx = SweepContext {
        trace: &trace,
        hmm: &hmm,
        radio: cfg.radio.radio(),
        coeffs: cfg.mdp.coeffs(),
        vi_tol: cfg.mdp.vi_tol,
        vi_max_iters: cfg.mdp.vi_max_iters,
    };
    let rows = match kind {
        "power" => run_power_sweep(&ctx, &cfg.sweep.powers_w, &KindSpec::DEFAULT_SET, cfg.seed)?,
        "queue" => {
            let radio = wusn_core::soil_channel::RadioConfig {
                p_t: cfg.sweep.queue_sweep_power_w,
                ..ctx.radio
            };
            let ctx = SweepContext { radio, ..ctx };
            run_queue_sweep(&ctx, &cfg.sweep.n_q_values, &KindSpec::DEFAULT_SET, cfg.seed)?
        }
        other => bail!("unknown sweep kind {other}"),
    };
    let file = fs::File::create(out)?;
    write_sweep_csv(&rows, file)?;
    write_json(&out.with_extension("json"), &sweep_report(cfg, kind, &rows))?;
    println!("wrote {} sweep rows to {}", rows.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct SweepReport<'a> {
    artifact_version: &'a str,
    kind: &'a str,
    config: &'a RunConfig,
    /// Per evaluated policy kind: is the dropped-packet count
    /// non-increasing along the sweep axis?
    dropped_monotone_non_increasing: std::collections::BTreeMap<String, bool>,
    /// Relative gap between the RL and 8PSK energy ratios at the highest
    /// power (power sweeps only).
    rl_8psk_energy_gap_at_max_power: Option<f64>,
}

fn sweep_report<'a>(cfg: &'a RunConfig, kind: &'a str, rows: &[SweepRow]) -> SweepReport<'a> {
    let mut monotone = std::collections::BTreeMap::new();
    for label in rows.iter().map(|r| r.kind.clone()).collect::<std::collections::BTreeSet<_>>() {
        let drops: Vec<u64> = rows
            .iter()
            .filter(|r| r.kind == label)
            .map(|r| r.metrics.dropped)
            .collect();
        monotone.insert(label, drops.windows(2).all(|w| w[1] <= w[0]));
    }
    let gap = if kind == "power" {
        let max_power = rows.iter().map(|r| r.power_w).fold(f64::MIN, f64::max);
        let at = |label: &str| {
            rows.iter()
                .find(|r| r.power_w == max_power && r.kind == label)
                .and_then(|r| energy_per_success(&r.metrics).ok())
        };
        match (at("RL"), at("8PSK")) {
            (Some(rl), Some(base)) => Some((rl - base).abs() / base),
            _ => None,
        }
    } else {
        None
    };
    SweepReport {
        artifact_version: ARTIFACT_VERSION,
        kind,
        config: cfg,
        dropped_monotone_non_increasing: monotone,
        rl_8psk_energy_gap_at_max_power: gap,
    }
}
