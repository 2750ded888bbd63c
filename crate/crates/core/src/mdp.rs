//! Joint (channel state x queue length) decision process: transition
//! kernels, expected rewards, and the value-iteration solver that yields
//! the optimal (modulation, attempts) policy.

use crate::hmm::GaussianHmm;
use crate::soil_channel::{ber_mpsk, linear_gain, Modulation, RadioConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("infeasible action {action:?} for queue length {q1}")]
    InfeasibleAction { action: Action, q1: usize },
    #[error("index ({c}, {q1}) out of range for {n_states} x {n_q} table")]
    IndexOutOfRange {
        c: usize,
        q1: usize,
        n_states: usize,
        n_q: usize,
    },
    #[error("value iteration did not reach tol {tol} in {iters} sweeps (residual {residual})")]
    ConvergenceFailure {
        tol: f64,
        iters: usize,
        residual: f64,
    },
    #[error(transparent)]
    Channel(#[from] crate::soil_channel::ChannelError),
}

/// One transmission decision: modulation scheme and how many packets to
/// attempt this period (0 = hold everything).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub modulation: Modulation,
    pub n_attempts: u32,
}

/// Maximum packets a modulation can fit into the slot budget:
/// t_max slots at log2(M) packets per BPSK-equivalent slot.
pub fn n_pmax(m: Modulation, t_max: u32) -> u32 {
    t_max * m.bits_per_symbol()
}

/// Reward shaping and solver coefficients.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MdpCoeffs {
    /// Penalty weight on unsuccessful transmissions.
    pub alpha1: f64,
    /// Penalty weight on packets left queued.
    pub alpha2: f64,
    /// Discount factor, in [0, 1).
    pub lambda: f64,
    /// Slot budget per period.
    pub t_max: u32,
    /// Queue capacity.
    pub n_q: usize,
}

impl Default for MdpCoeffs {
    fn default() -> Self {
        Self {
            alpha1: 1.0,
            alpha2: 0.1,
            lambda: 0.1,
            t_max: 15,
            n_q: 150,
        }
    }
}

/// Fully assembled decision process. Immutable once built.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdpModel {
    /// Channel transition matrix P(c'|c), row-stochastic.
    pub channel_trans: Vec<Vec<f64>>,
    /// BER per (channel state, modulation) at the state's mean path loss.
    pub pe_table: Vec<[f64; 3]>,
    pub coeffs: MdpCoeffs,
    pub t_sym: f64,
    pub p_t: f64,
    pub packet_len: u32,
}

impl MdpModel {
    pub fn n_states(&self) -> usize {
        self.channel_trans.len()
    }

    pub fn pe(&self, c: usize, m: Modulation) -> f64 {
        let idx = match m {
            Modulation::Bpsk => 0,
            Modulation::Qpsk => 1,
            Modulation::Psk8 => 2,
        };
        self.pe_table[c][idx]
    }
}

/// Converged state values, indexed by (channel state, queue length).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub n_states: usize,
    pub n_q: usize,
    /// Row-major (n_states) x (n_q + 1).
    pub v: Vec<f64>,
}

impl ValueTable {
    pub fn get(&self, c: usize, q1: usize) -> f64 {
        self.v[c * (self.n_q + 1) + q1]
    }
}

/// Greedy policy extracted from the converged value table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub n_states: usize,
    pub n_q: usize,
    /// Row-major (n_states) x (n_q + 1).
    pub actions: Vec<Action>,
}

/// Version-tagged serialized form of a solved policy, carrying the exact
/// model it was solved for.
#[derive(Debug, Serialize, Deserialize)]
pub struct PolicyFile {
    pub version: u32,
    pub model: MdpModel,
    pub policy: Policy,
    pub values: ValueTable,
    /// Sup-norm residual per sweep of the solve.
    pub residuals: Vec<f64>,
}

pub const POLICY_FORMAT_VERSION: u32 = 1;

impl PolicyFile {
    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(raw: &str) -> Result<Self, MdpError> {
        let file: PolicyFile = serde_json::from_str(raw)
            .map_err(|e| MdpError::InvalidInput(format!("policy parse: {e}")))?;
        if file.version != POLICY_FORMAT_VERSION {
            return Err(MdpError::InvalidInput(format!(
                "unsupported policy version {}",
                file.version
            )));
        }
        Ok(file)
    }
}

/// All feasible actions at queue length `q1`: every modulation with
/// 0 <= n <= min(q1 + 1, n_pmax(m)). The +1 is the packet generated this
/// period, which may be transmitted immediately.
pub fn feasible_actions(q1: usize, t_max: u32) -> Vec<Action> {
    let mut out = Vec::new();
    for m in Modulation::ALL {
        let cap = (q1 as u32 + 1).min(n_pmax(m, t_max));
        for n in 0..=cap {
            out.push(Action {
                modulation: m,
                n_attempts: n,
            });
        }
    }
    out
}

pub fn is_feasible(a: &Action, q1: usize, t_max: u32) -> bool {
    a.n_attempts <= (q1 as u32 + 1).min(n_pmax(a.modulation, t_max))
}

/// Probability that one packet transmission fails outright.
pub fn packet_fail_prob(pe: f64, packet_len: u32) -> f64 {
    1.0 - crate::soil_channel::packet_success_prob(pe, packet_len)
}

fn binomial_pmf(n: u32, p: f64) -> Vec<f64> {
    // iterative Pascal construction, exact enough for n <= a few hundred
    let mut pmf = vec![0.0; n as usize + 1];
    pmf[0] = 1.0;
    for _ in 0..n {
        for k in (1..pmf.len()).rev() {
            pmf[k] = pmf[k] * (1.0 - p) + pmf[k - 1] * p;
        }
        pmf[0] *= 1.0 - p;
    }
    pmf
}

/// Distribution of the next queue length after taking `a` at queue `q1`
/// with per-bit error rate `pe`.
///
/// The number of failed attempts is Binomial(n, p_fail) with
/// p_fail = 1 - (1 - pe)^packet_len; the raw next length
/// q1 + 1 - (n - N_u) is clamped to [0, n_q] with the clamped mass
/// aggregated at the boundary (overflow drops the oldest packet).
pub fn queue_transition(
    q1: usize,
    a: &Action,
    pe: f64,
    n_q: usize,
    t_max: u32,
    packet_len: u32,
) -> Result<Vec<f64>, MdpError> {
    if !(0.0..=1.0).contains(&pe) {
        return Err(MdpError::InvalidInput(format!("pe {pe} outside [0, 1]")));
    }
    if q1 > n_q {
        return Err(MdpError::InvalidInput(format!("q1 {q1} > n_q {n_q}")));
    }
    if !is_feasible(a, q1, t_max) {
        return Err(MdpError::InfeasibleAction { action: *a, q1 });
    }
    let p_fail = packet_fail_prob(pe, packet_len);
    let pmf = binomial_pmf(a.n_attempts, p_fail);
    let mut dist = vec![0.0; n_q + 1];
    for (n_u, &mass) in pmf.iter().enumerate() {
        let raw = q1 as i64 + 1 - (a.n_attempts as i64 - n_u as i64);
        let next = raw.clamp(0, n_q as i64) as usize;
        dist[next] += mass;
    }
    Ok(dist)
}

/// Expected one-period reward of action `a` at queue `q1`, in closed form.
///
/// The numerator (N_t - alpha1*N_u - alpha2*(q1 - N_t + 1)) * log2(M) is
/// affine in N_u and the denominator t_sym * p_t * (N_t + N_u) equals
/// t_sym * p_t * n, so the expectation follows from E[N_u] = n * p_fail.
/// Zero attempts yield zero reward.
pub fn expected_reward(
    q1: usize,
    a: &Action,
    pe: f64,
    coeffs: &MdpCoeffs,
    t_sym: f64,
    p_t: f64,
    packet_len: u32,
) -> f64 {
    let n = a.n_attempts as f64;
    if a.n_attempts == 0 {
        return 0.0;
    }
    let p_fail = packet_fail_prob(pe, packet_len);
    let mean_nu = n * p_fail;
    let mean_nt = n - mean_nu;
    let numer = (mean_nt - coeffs.alpha1 * mean_nu
        - coeffs.alpha2 * (q1 as f64 - mean_nt + 1.0))
        * a.modulation.bits_per_symbol() as f64;
    numer / (t_sym * p_t * n)
}

/// Assemble the joint model from a fitted channel HMM and radio parameters.
/// Per-state BER is evaluated at each state's mean path loss.
pub fn build_model(
    h: &GaussianHmm,
    radio: &RadioConfig,
    coeffs: &MdpCoeffs,
) -> Result<MdpModel, MdpError> {
    radio.validate()?;
    if !(0.0..1.0).contains(&coeffs.lambda) {
        return Err(MdpError::InvalidInput(format!(
            "discount {} outside [0, 1)",
            coeffs.lambda
        )));
    }
    let mut pe_table = Vec::with_capacity(h.n_states());
    for (mean_pl, _) in h.state_summary() {
        let snr = radio.p_t * linear_gain(mean_pl) / radio.eta;
        pe_table.push([
            ber_mpsk(Modulation::Bpsk, snr)?,
            ber_mpsk(Modulation::Qpsk, snr)?,
            ber_mpsk(Modulation::Psk8, snr)?,
        ]);
    }
    Ok(MdpModel {
        channel_trans: h.trans.clone(),
        pe_table,
        coeffs: *coeffs,
        t_sym: radio.t_sym,
        p_t: radio.p_t,
        packet_len: radio.packet_len,
    })
}

/// Precomputed per-(q1, action) data reused across sweeps.
struct ActionKernel {
    action: Action,
    /// (next queue length, probability) pairs.
    outcomes: Vec<(usize, f64)>,
}

fn state_kernels(model: &MdpModel, c: usize, q1: usize) -> Vec<(ActionKernel, f64)> {
    feasible_actions(q1, model.coeffs.t_max)
        .into_iter()
        .map(|a| {
            let pe = model.pe(c, a.modulation);
            let dist = queue_transition(
                q1,
                &a,
                pe,
                model.coeffs.n_q,
                model.coeffs.t_max,
                model.packet_len,
            )
            .expect("feasible action");
            let outcomes = dist
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(q, &p)| (q, p))
                .collect();
            let r = expected_reward(
                q1,
                &a,
                pe,
                &model.coeffs,
                model.t_sym,
                model.p_t,
                model.packet_len,
            );
            (
                ActionKernel {
                    action: a,
                    outcomes,
                },
                r,
            )
        })
        .collect()
}

/// Solve the model by value iteration from V0 = 0.
///
/// Each sweep is a Jacobi update evaluated in parallel over states; the
/// sweep residual is the sup-norm change. Ties in the greedy argmax break
/// toward lower modulation order, then fewer attempts (the enumeration
/// order of [`feasible_actions`]).
pub fn value_iteration(
    model: &MdpModel,
    tol: f64,
    max_iters: usize,
) -> Result<(ValueTable, Policy, Vec<f64>), MdpError> {
    if tol <= 0.0 {
        return Err(MdpError::InvalidInput("tol must be positive".into()));
    }
    let n_c = model.n_states();
    let n_q = model.coeffs.n_q;
    let width = n_q + 1;
    let lambda = model.coeffs.lambda;

    // kernels[c][q1] -> feasible actions with rewards and queue outcomes
    let kernels: Vec<Vec<Vec<(ActionKernel, f64)>>> = (0..n_c)
        .into_par_iter()
        .map(|c| (0..width).map(|q1| state_kernels(model, c, q1)).collect())
        .collect();

    let mut v = vec![0.0f64; n_c * width];
    let mut actions = vec![
        Action {
            modulation: Modulation::Bpsk,
            n_attempts: 0,
        };
        n_c * width
    ];
    let mut residuals = Vec::new();
    let mut converged = false;
    for _sweep in 0..max_iters {
        // w[c][q'] = sum_c' P(c'|c) v[c'][q']
        let w: Vec<f64> = (0..n_c * width)
            .into_par_iter()
            .map(|idx| {
                let (c, q) = (idx / width, idx % width);
                let mut s = 0.0;
                for (cp, &p) in model.channel_trans[c].iter().enumerate() {
                    s += p * v[cp * width + q];
                }
                s
            })
            .collect();
        let updated: Vec<(f64, Action)> = (0..n_c * width)
            .into_par_iter()
            .map(|idx| {
                let (c, q1) = (idx / width, idx % width);
                let mut best = f64::NEG_INFINITY;
                let mut best_action = Action {
                    modulation: Modulation::Bpsk,
                    n_attempts: 0,
                };
                for (kernel, reward) in &kernels[c][q1] {
                    let mut ev = 0.0;
                    for &(qp, p) in &kernel.outcomes {
                        ev += p * w[c * width + qp];
                    }
                    let q_value = reward + lambda * ev;
                    if q_value > best {
                        best = q_value;
                        best_action = kernel.action;
                    }
                }
                (best, best_action)
            })
            .collect();
        let mut residual = 0.0f64;
        for (idx, (val, act)) in updated.into_iter().enumerate() {
            residual = residual.max((val - v[idx]).abs());
            v[idx] = val;
            actions[idx] = act;
        }
        residuals.push(residual);
        if residual < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(MdpError::ConvergenceFailure {
            tol,
            iters: max_iters,
            residual: *residuals.last().unwrap_or(&f64::INFINITY),
        });
    }
    Ok((
        ValueTable {
            n_states: n_c,
            n_q,
            v,
        },
        Policy {
            n_states: n_c,
            n_q,
            actions,
        },
        residuals,
    ))
}

/// Stored action at (c, q1); errors on out-of-range indices.
pub fn policy_lookup(p: &Policy, c: usize, q1: usize) -> Result<Action, MdpError> {
    if c >= p.n_states || q1 > p.n_q {
        return Err(MdpError::IndexOutOfRange {
            c,
            q1,
            n_states: p.n_states,
            n_q: p.n_q,
        });
    }
    Ok(p.actions[c * (p.n_q + 1) + q1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bpsk(n: u32) -> Action {
        Action {
            modulation: Modulation::Bpsk,
            n_attempts: n,
        }
    }

    #[test]
    fn feasible_actions_empty_queue() {
        let actions = feasible_actions(0, 15);
        for m in Modulation::ALL {
            let max_n = actions
                .iter()
                .filter(|a| a.modulation == m)
                .map(|a| a.n_attempts)
                .max()
                .unwrap();
            assert_eq!(max_n, 1, "only the new packet exists for {m}");
        }
    }

    #[test]
    fn feasible_actions_modulation_caps() {
        let actions = feasible_actions(100, 15);
        let cap = |m: Modulation| {
            actions
                .iter()
                .filter(|a| a.modulation == m)
                .map(|a| a.n_attempts)
                .max()
                .unwrap()
        };
        assert_eq!(cap(Modulation::Psk8), 45);
        assert_eq!(cap(Modulation::Qpsk), 30);
        assert_eq!(cap(Modulation::Bpsk), 15);
        let actions = feasible_actions(20, 15);
        assert_eq!(
            actions
                .iter()
                .filter(|a| a.modulation == Modulation::Bpsk)
                .map(|a| a.n_attempts)
                .max()
                .unwrap(),
            15
        );
    }

    #[test]
    fn queue_transition_certain_success_empties() {
        let dist = queue_transition(5, &bpsk(6), 0.0, 150, 15, 1000).unwrap();
        assert_relative_eq!(dist[0], 1.0, epsilon = 1e-15);
        assert!(dist[1..].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn queue_transition_no_attempt_is_pure_arrival() {
        let dist = queue_transition(7, &bpsk(0), 0.3, 150, 15, 1000).unwrap();
        assert_relative_eq!(dist[8], 1.0, epsilon = 1e-15);
        let dist = queue_transition(150, &bpsk(0), 0.3, 150, 15, 1000).unwrap();
        assert_relative_eq!(dist[150], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn queue_transition_binomial_example() {
        // p_fail = 0.3 via pe chosen so (1-pe)^1000 = 0.7
        let pe = 1.0 - 0.7f64.powf(1.0 / 1000.0);
        let dist = queue_transition(4, &bpsk(2), pe, 150, 15, 1000).unwrap();
        // q' = 4 + 1 - (2 - N_u); N_u ~ Bin(2, 0.3)
        assert_relative_eq!(dist[3], 0.49, epsilon = 1e-9);
        assert_relative_eq!(dist[4], 0.42, epsilon = 1e-9);
        assert_relative_eq!(dist[5], 0.09, epsilon = 1e-9);
        let total: f64 = dist.iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn queue_transition_rejects_infeasible() {
        assert!(matches!(
            queue_transition(3, &bpsk(5), 0.0, 150, 15, 1000),
            Err(MdpError::InfeasibleAction { .. })
        ));
        assert!(matches!(
            queue_transition(0, &bpsk(16), 0.0, 150, 15, 1000),
            Err(MdpError::InfeasibleAction { .. })
        ));
    }

    #[test]
    fn expected_reward_zero_attempts() {
        let coeffs = MdpCoeffs::default();
        assert_eq!(
            expected_reward(10, &bpsk(0), 0.1, &coeffs, 1.0 / 60000.0, 0.01, 1000),
            0.0
        );
    }

    #[test]
    fn expected_reward_emptied_queue_closed_form() {
        // pe = 0, n = q1 + 1: reward = log2(M) / (t_sym * p_t)
        let coeffs = MdpCoeffs::default();
        let t_sym = 1.0 / 60000.0;
        let p_t = 0.01;
        for m in Modulation::ALL {
            let q1 = 7usize;
            let a = Action {
                modulation: m,
                n_attempts: q1 as u32 + 1,
            };
            let r = expected_reward(q1, &a, 0.0, &coeffs, t_sym, p_t, 1000);
            assert_relative_eq!(
                r,
                m.bits_per_symbol() as f64 / (t_sym * p_t),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn expected_reward_negative_when_mostly_failing() {
        // alpha1 = 1, alpha2 = 0, p_fail > 0.5 -> negative for any n >= 1
        let coeffs = MdpCoeffs {
            alpha2: 0.0,
            ..MdpCoeffs::default()
        };
        let pe = 1.0 - 0.4f64.powf(1.0 / 1000.0); // p_fail = 0.6
        for q1 in [0usize, 3, 20] {
            for a in feasible_actions(q1, 15) {
                if a.n_attempts >= 1 {
                    let r = expected_reward(q1, &a, pe, &coeffs, 1.0 / 60000.0, 0.01, 1000);
                    assert!(r < 0.0, "reward {r} not negative for {a:?} at q1 = {q1}");
                }
            }
        }
    }

    fn single_state_hmm(mean_pl: f64) -> GaussianHmm {
        GaussianHmm {
            initial: vec![1.0],
            trans: vec![vec![1.0]],
            means: vec![[mean_pl, 0.0]],
            covs: vec![[[1.0, 0.0], [0.0, 1.0]]],
        }
    }

    fn table_radio(p_t: f64) -> RadioConfig {
        RadioConfig {
            p_t,
            eta: 1e-13,
            t_sym: 1.0 / 60000.0,
            packet_len: 1000,
        }
    }

    #[test]
    fn build_model_single_state() {
        let model = build_model(
            &single_state_hmm(80.0),
            &table_radio(0.01),
            &MdpCoeffs::default(),
        )
        .unwrap();
        assert_eq!(model.channel_trans, vec![vec![1.0]]);
        assert_eq!(model.pe_table.len(), 1);
    }

    #[test]
    fn pe_table_monotone_in_mean_path_loss() {
        let h = GaussianHmm {
            initial: vec![0.25; 4],
            trans: vec![vec![0.25; 4]; 4],
            means: vec![[80.0, 0.0], [90.0, 0.0], [100.0, 0.0], [110.0, 0.0]],
            covs: vec![[[1.0, 0.0], [0.0, 1.0]]; 4],
        };
        let model = build_model(&h, &table_radio(0.01), &MdpCoeffs::default()).unwrap();
        for m in 0..3 {
            for c in 1..4 {
                assert!(model.pe_table[c][m] >= model.pe_table[c - 1][m]);
            }
        }
    }

    #[test]
    fn myopic_limit_matches_max_reward() {
        let coeffs = MdpCoeffs {
            lambda: 0.0,
            n_q: 20,
            t_max: 3,
            ..MdpCoeffs::default()
        };
        let model = build_model(&single_state_hmm(95.0), &table_radio(0.01), &coeffs).unwrap();
        let (values, _, residuals) = value_iteration(&model, 1e-12, 10).unwrap();
        // one effective sweep: V = max_a R_a
        for q1 in 0..=20usize {
            let best = feasible_actions(q1, 3)
                .iter()
                .map(|a| {
                    expected_reward(
                        q1,
                        a,
                        model.pe(0, a.modulation),
                        &coeffs,
                        model.t_sym,
                        model.p_t,
                        model.packet_len,
                    )
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert_relative_eq!(values.get(0, q1), best, epsilon = 1e-9);
        }
        assert!(residuals.len() <= 2);
    }

    #[test]
    fn convergence_failure_reported() {
        let model = build_model(
            &single_state_hmm(95.0),
            &table_radio(0.01),
            &MdpCoeffs {
                n_q: 10,
                t_max: 2,
                ..MdpCoeffs::default()
            },
        )
        .unwrap();
        assert!(matches!(
            value_iteration(&model, 1e-12, 1),
            Err(MdpError::ConvergenceFailure { .. })
        ));
    }

    #[test]
    fn policy_lookup_contract() {
        let coeffs = MdpCoeffs {
            n_q: 10,
            t_max: 2,
            ..MdpCoeffs::default()
        };
        let model = build_model(&single_state_hmm(90.0), &table_radio(0.01), &coeffs).unwrap();
        let (_, policy, _) = value_iteration(&model, 1e-10, 100).unwrap();
        for q1 in 0..=10usize {
            let a = policy_lookup(&policy, 0, q1).unwrap();
            assert!(is_feasible(&a, q1, coeffs.t_max));
        }
        assert!(matches!(
            policy_lookup(&policy, 1, 0),
            Err(MdpError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            policy_lookup(&policy, 0, 11),
            Err(MdpError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn high_snr_policy_empties_queue() {
        // strong channel: pe ~ 0, best action transmits everything available
        let coeffs = MdpCoeffs::default();
        let model = build_model(&single_state_hmm(60.0), &table_radio(0.01), &coeffs).unwrap();
        let (_, policy, _) = value_iteration(&model, 1e-10, 100).unwrap();
        let q1 = 45usize; // N_pmax(8PSK)
        let a = policy_lookup(&policy, 0, q1).unwrap();
        assert_eq!(a.modulation, Modulation::Psk8);
        assert_eq!(a.n_attempts, 45);
    }

    #[test]
    fn policy_file_roundtrip() {
        let coeffs = MdpCoeffs {
            n_q: 5,
            t_max: 1,
            ..MdpCoeffs::default()
        };
        let model = build_model(&single_state_hmm(90.0), &table_radio(0.01), &coeffs).unwrap();
        let (values, policy, residuals) = value_iteration(&model, 1e-10, 100).unwrap();
        let file = PolicyFile {
            version: POLICY_FORMAT_VERSION,
            model,
            policy: policy.clone(),
            values: values.clone(),
            residuals,
        };
        let json = file.to_json().unwrap();
        let back = PolicyFile::from_json(&json).unwrap();
        assert_eq!(back.policy, policy);
        assert_eq!(back.values, values);
    }

    #[test]
    fn greedy_policy_is_fixed_point() {
        let coeffs = MdpCoeffs {
            n_q: 30,
            t_max: 4,
            ..MdpCoeffs::default()
        };
        let h = GaussianHmm {
            initial: vec![0.5, 0.5],
            trans: vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            means: vec![[85.0, 0.0], [103.0, 0.5]],
            covs: vec![[[1.0, 0.0], [0.0, 1.0]]; 2],
        };
        let model = build_model(&h, &table_radio(0.01), &coeffs).unwrap();
        let (_, p1, r1) = value_iteration(&model, 1e-10, 200).unwrap();
        // one extra sweep: tighter tolerance forces at least one more pass
        let (_, p2, _) = value_iteration(&model, 1e-11, r1.len() + 200).unwrap();
        assert_eq!(p1.actions, p2.actions);
    }
}
