//! Trace-driven evaluation of transmission policies: replay a path-loss
//! trace, sample per-packet outcomes with a seeded generator, and collect
//! drop/energy/queue metrics for the learned policy and the
//! sense-then-transmit baselines.

use crate::data_pipeline::PathLossTrace;
use crate::hmm::{GaussianHmm, StateFilter};
use crate::mdp::{build_model, policy_lookup, value_iteration, MdpCoeffs, Policy};
use crate::soil_channel::{ber_mpsk, linear_gain, Modulation, RadioConfig};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("energy ratio undefined: no successful packets")]
    UndefinedRatio,
    #[error(transparent)]
    Mdp(#[from] crate::mdp::MdpError),
    #[error(transparent)]
    Hmm(#[from] crate::hmm::HmmError),
    #[error(transparent)]
    Channel(#[from] crate::soil_channel::ChannelError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// How the RL agent turns observations into a channel-state index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum StateDecoding {
    /// Filtered posterior over the observation prefix (deployment setting).
    #[default]
    Filtered,
    /// Memoryless per-sample emission argmax, for sensitivity analysis.
    Instant,
}

/// Policy under evaluation.
#[derive(Debug, Clone, Copy)]
pub enum RunKind<'a> {
    Rl {
        policy: &'a Policy,
        hmm: &'a GaussianHmm,
        decoding: StateDecoding,
    },
    /// Queueless sense-then-transmit with a fixed modulation; a failed
    /// packet is dropped outright.
    SenseThenTransmit { modulation: Modulation },
}

impl RunKind<'_> {
    pub fn label(&self) -> String {
        match self {
            RunKind::Rl { .. } => "RL".into(),
            RunKind::SenseThenTransmit { modulation } => modulation.to_string(),
        }
    }
}

/// Per-period detail, recorded on request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub t: usize,
    pub channel_state: usize,
    pub modulation: Modulation,
    pub attempts: u32,
    pub transmitted_ok: u32,
    pub failed: u32,
    pub queue_after: u32,
}

/// Counters collected over one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub generated: u64,
    pub successful: u64,
    pub unsuccessful_attempts: u64,
    pub dropped: u64,
    /// Per-attempt energy accumulator: sum of t_sym * p_t * (N_t + N_u).
    pub energy_metric: f64,
    /// Physical radiated energy: p_t * t_sym * (P_L / log2 M) * (N_t + N_u).
    pub physical_energy: f64,
    pub queue_trace: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_period_log: Option<Vec<PeriodRecord>>,
}

impl SimMetrics {
    pub fn final_queue(&self) -> u64 {
        self.queue_trace.last().copied().unwrap_or(0) as u64
    }

    /// Packet conservation: everything generated is accounted for.
    pub fn conserves_packets(&self) -> bool {
        self.generated == self.successful + self.dropped + self.final_queue()
    }

    pub fn max_queue(&self) -> u32 {
        self.queue_trace.iter().copied().max().unwrap_or(0)
    }
}

/// Evaluate one policy over the trace with seeded stochastic packet
/// outcomes. Deterministic for fixed (trace, kind, radio, seed): exactly
/// one uniform draw is consumed per attempted packet.
pub fn run(
    trace: &PathLossTrace,
    kind: &RunKind,
    radio: &RadioConfig,
    queue_cap: usize,
    seed: u64,
) -> Result<SimMetrics, SimError> {
    run_detailed(trace, kind, radio, queue_cap, seed, false)
}

pub fn run_detailed(
    trace: &PathLossTrace,
    kind: &RunKind,
    radio: &RadioConfig,
    queue_cap: usize,
    seed: u64,
    record_periods: bool,
) -> Result<SimMetrics, SimError> {
    if trace.is_empty() {
        return Err(SimError::Config("empty trace".into()));
    }
    radio.validate()?;
    if let RunKind::Rl { policy, hmm, .. } = kind {
        if policy.n_q != queue_cap {
            return Err(SimError::Config(format!(
                "policy solved for N_q = {} but simulating with {}",
                policy.n_q, queue_cap
            )));
        }
        if policy.n_states != hmm.n_states() {
            return Err(SimError::Config(format!(
                "policy has {} channel states, model has {}",
                policy.n_states,
                hmm.n_states()
            )));
        }
        hmm.validate()?;
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut filter = match kind {
        RunKind::Rl { hmm, .. } => Some(StateFilter::new(hmm)),
        RunKind::SenseThenTransmit { .. } => None,
    };
    let mut metrics = SimMetrics {
        generated: 0,
        successful: 0,
        unsuccessful_attempts: 0,
        dropped: 0,
        energy_metric: 0.0,
        physical_energy: 0.0,
        queue_trace: Vec::with_capacity(trace.len()),
        per_period_log: record_periods.then(|| Vec::with_capacity(trace.len())),
    };
    let mut queue: u64 = 0;
    for t in 0..trace.len() {
        metrics.generated += 1;
        let obs = [trace.pl[t], trace.delta[t]];
        let (state, modulation, attempts) = match kind {
            RunKind::Rl {
                policy, decoding, ..
            } => {
                let filter = filter.as_mut().unwrap();
                let state = match decoding {
                    StateDecoding::Filtered => filter.push(&obs),
                    StateDecoding::Instant => {
                        filter.push(&obs);
                        instant_state(kind, &obs)
                    }
                };
                let action = policy_lookup(policy, state, queue as usize)?;
                if action.n_attempts as u64 > queue + 1 {
                    return Err(SimError::Config(format!(
                        "policy action {action:?} infeasible at queue length {queue}"
                    )));
                }
                (state, action.modulation, action.n_attempts)
            }
            RunKind::SenseThenTransmit { modulation } => (0, *modulation, 1),
        };

        // outcome sampling against the true instantaneous channel
        let snr = radio.p_t * linear_gain(trace.pl[t]) / radio.eta;
        let pe = ber_mpsk(modulation, snr)?;
        let p_success = crate::soil_channel::packet_success_prob(pe, radio.packet_len);
        let mut n_t = 0u32;
        for _ in 0..attempts {
            if rng.gen::<f64>() < p_success {
                n_t += 1;
            }
        }
        let n_u = attempts - n_t;
        metrics.successful += n_t as u64;
        metrics.unsuccessful_attempts += n_u as u64;
        if attempts > 0 {
            metrics.energy_metric += radio.t_sym * radio.p_t * attempts as f64;
            metrics.physical_energy += radio.p_t
                * radio.t_sym
                * (radio.packet_len as f64 / modulation.bits_per_symbol() as f64)
                * attempts as f64;
        }

        match kind {
            RunKind::Rl { .. } => {
                // failures return to the queue; overflow drops the oldest
                queue = queue + 1 - n_t as u64;
                if queue > queue_cap as u64 {
                    metrics.dropped += queue - queue_cap as u64;
                    queue = queue_cap as u64;
                }
            }
            RunKind::SenseThenTransmit { .. } => {
                if n_t == 0 {
                    metrics.dropped += 1;
                }
            }
        }
        metrics.queue_trace.push(queue as u32);
        if let Some(log) = metrics.per_period_log.as_mut() {
            log.push(PeriodRecord {
                t,
                channel_state: state,
                modulation,
                attempts,
                transmitted_ok: n_t,
                failed: n_u,
                queue_after: queue as u32,
            });
        }
    }
    Ok(metrics)
}

fn instant_state(kind: &RunKind, obs: &[f64; 2]) -> usize {
    if let RunKind::Rl { hmm, .. } = kind {
        let mut filter = StateFilter::new(hmm);
        // fresh filter = prior * emission, i.e. memoryless decoding
        filter.push(obs)
    } else {
        0
    }
}

/// Per-attempt energy metric per successfully delivered packet.
pub fn energy_per_success(m: &SimMetrics) -> Result<f64, SimError> {
    if m.successful == 0 {
        return Err(SimError::UndefinedRatio);
    }
    Ok(m.energy_metric / m.successful as f64)
}

/// Queue occupancy summary of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupancySummary {
    pub max: u32,
    pub mean: f64,
    /// Fraction of periods at or above 90% of capacity.
    pub frac_near_full: f64,
}

pub fn queue_occupancy_report(m: &SimMetrics, queue_cap: usize) -> OccupancySummary {
    if m.queue_trace.is_empty() {
        return OccupancySummary {
            max: 0,
            mean: 0.0,
            frac_near_full: 0.0,
        };
    }
    let n = m.queue_trace.len() as f64;
    let threshold = 0.9 * queue_cap as f64;
    OccupancySummary {
        max: m.max_queue(),
        mean: m.queue_trace.iter().map(|&q| q as f64).sum::<f64>() / n,
        frac_near_full: m
            .queue_trace
            .iter()
            .filter(|&&q| q as f64 >= threshold)
            .count() as f64
            / n,
    }
}

/// Which policies a sweep evaluates; RL is re-solved per sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KindSpec {
    Rl,
    Baseline(Modulation),
}

impl KindSpec {
    pub const DEFAULT_SET: [KindSpec; 3] = [
        KindSpec::Rl,
        KindSpec::Baseline(Modulation::Bpsk),
        KindSpec::Baseline(Modulation::Psk8),
    ];

    pub fn label(&self) -> String {
        match self {
            KindSpec::Rl => "RL".into(),
            KindSpec::Baseline(m) => m.to_string(),
        }
    }
}

/// Shared inputs for sweep runs.
#[derive(Debug, Clone, Copy)]
pub struct SweepContext<'a> {
    pub trace: &'a PathLossTrace,
    pub hmm: &'a GaussianHmm,
    pub radio: RadioConfig,
    pub coeffs: MdpCoeffs,
    pub vi_tol: f64,
    pub vi_max_iters: usize,
}

/// One sweep result row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub power_w: f64,
    pub kind: String,
    pub n_q: usize,
    pub t_max: u32,
    pub metrics: SimMetrics,
}

fn run_point(
    ctx: &SweepContext,
    power: f64,
    coeffs: &MdpCoeffs,
    kind: KindSpec,
    seed: u64,
) -> Result<SweepRow, SimError> {
    let radio = RadioConfig {
        p_t: power,
        ..ctx.radio
    };
    let metrics = match kind {
        KindSpec::Rl => {
            // pe_table depends on transmit power, so the policy is re-solved
            let model = build_model(ctx.hmm, &radio, coeffs)?;
            let (_, policy, _) = value_iteration(&model, ctx.vi_tol, ctx.vi_max_iters)?;
            run(
                ctx.trace,
                &RunKind::Rl {
                    policy: &policy,
                    hmm: ctx.hmm,
                    decoding: StateDecoding::Filtered,
                },
                &radio,
                coeffs.n_q,
                seed,
            )?
        }
        KindSpec::Baseline(m) => run(
            ctx.trace,
            &RunKind::SenseThenTransmit { modulation: m },
            &radio,
            0,
            seed,
        )?,
    };
    Ok(SweepRow {
        power_w: power,
        kind: kind.label(),
        n_q: coeffs.n_q,
        t_max: coeffs.t_max,
        metrics,
    })
}

/// One run per (power, kind), with derived seeds (base seed XOR row index).
/// Points execute in parallel; results come back in (power, kind) order.
pub fn run_power_sweep(
    ctx: &SweepContext,
    powers: &[f64],
    kinds: &[KindSpec],
    seed: u64,
) -> Result<Vec<SweepRow>, SimError> {
    if powers.is_empty() {
        return Err(SimError::Config("empty power list".into()));
    }
    if powers.iter().any(|&p| p <= 0.0) {
        return Err(SimError::Config("non-positive power".into()));
    }
    let points: Vec<(usize, f64, KindSpec)> = powers
        .iter()
        .enumerate()
        .flat_map(|(i, &p)| {
            kinds
                .iter()
                .enumerate()
                .map(move |(j, &k)| (i * kinds.len() + j, p, k))
        })
        .collect();
    points
        .into_par_iter()
        .map(|(idx, power, kind)| run_point(ctx, power, &ctx.coeffs, kind, seed ^ idx as u64))
        .collect()
}

/// Queue-capacity sweep at fixed power with the slot budget scaling rule
/// t_max = ceil(0.1 * N_q); the model is rebuilt and re-solved per point.
pub fn run_queue_sweep(
    ctx: &SweepContext,
    n_q_values: &[usize],
    kinds: &[KindSpec],
    seed: u64,
) -> Result<Vec<SweepRow>, SimError> {
    if n_q_values.is_empty() {
        return Err(SimError::Config("empty N_q list".into()));
    }
    if n_q_values.iter().any(|&q| q < 1) {
        return Err(SimError::Config("N_q must be >= 1".into()));
    }
    let points: Vec<(usize, usize, KindSpec)> = n_q_values
        .iter()
        .enumerate()
        .flat_map(|(i, &q)| {
            kinds
                .iter()
                .enumerate()
                .map(move |(j, &k)| (i * kinds.len() + j, q, k))
        })
        .collect();
    points
        .into_par_iter()
        .map(|(idx, n_q, kind)| {
            let coeffs = MdpCoeffs {
                n_q,
                t_max: ((0.1 * n_q as f64).ceil() as u32).max(1),
                ..ctx.coeffs
            };
            run_point(ctx, ctx.radio.p_t, &coeffs, kind, seed ^ idx as u64)
        })
        .collect()
}

/// Plot-ready CSV: one row per run.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<(), SimError> {
    writeln!(
        w,
        "power_w,kind,n_q,t_max,generated,successful,unsuccessful,dropped,energy_metric,energy_ratio,max_queue"
    )?;
    for r in rows {
        let ratio = energy_per_success(&r.metrics)
            .map(|v| format!("{v:.16e}"))
            .unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{:.16e},{},{}",
            r.power_w,
            r.kind,
            r.n_q,
            r.t_max,
            r.metrics.generated,
            r.metrics.successful,
            r.metrics.unsuccessful_attempts,
            r.metrics.dropped,
            r.metrics.energy_metric,
            ratio,
            r.metrics.max_queue()
        )?;
    }
    Ok(())
}
