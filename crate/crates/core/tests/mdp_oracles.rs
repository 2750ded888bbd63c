//! Independent oracles for the decision-process kernel: binomial
//! enumeration with multiplicative coefficients, Monte-Carlo reward
//! estimates, and a hand-solvable fixed point.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution};
use wusn_core::hmm::GaussianHmm;
use wusn_core::mdp::{
    expected_reward, feasible_actions, packet_fail_prob, queue_transition, value_iteration,
    Action, MdpCoeffs, MdpModel,
};
use wusn_core::soil_channel::Modulation;

/// C(n, k) p^k (1-p)^(n-k) via the multiplicative coefficient formula,
/// deliberately different from the Pascal construction under test.
fn binom_term(n: u32, k: u32, p: f64) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

#[test]
fn queue_transition_matches_enumeration_on_grid() {
    let (n_q, t_max, packet_len) = (40usize, 5u32, 1000u32);
    for pe in [0.0, 1e-6, 1e-3, 0.2] {
        let p_fail = packet_fail_prob(pe, packet_len);
        for q1 in 0..=n_q {
            for a in feasible_actions(q1, t_max) {
                let got = queue_transition(q1, &a, pe, n_q, t_max, packet_len).unwrap();
                let mut want = vec![0.0; n_q + 1];
                for n_u in 0..=a.n_attempts {
                    let raw = q1 as i64 + 1 - (a.n_attempts as i64 - n_u as i64);
                    let next = raw.clamp(0, n_q as i64) as usize;
                    want[next] += binom_term(a.n_attempts, n_u, p_fail);
                }
                for (g, w) in got.iter().zip(&want) {
                    assert!((g - w).abs() < 1e-12, "q1={q1} a={a:?} pe={pe}");
                }
                assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn expected_reward_matches_monte_carlo() {
    let coeffs = MdpCoeffs::default();
    let (t_sym, p_t, packet_len) = (1.0 / 60000.0, 0.01, 1000u32);
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    for (q1, m, n, pe) in [
        (10usize, Modulation::Bpsk, 8u32, 2e-4),
        (45, Modulation::Psk8, 30, 1e-3),
        (0, Modulation::Qpsk, 1, 5e-4),
    ] {
        let a = Action {
            modulation: m,
            n_attempts: n,
        };
        let closed = expected_reward(q1, &a, pe, &coeffs, t_sym, p_t, packet_len);
        let p_fail = packet_fail_prob(pe, packet_len);
        let dist = Binomial::new(n as u64, p_fail).unwrap();
        let bits = m.bits_per_symbol() as f64;
        let draws = 5_000_000usize;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..draws {
            let n_u = dist.sample(&mut rng) as f64;
            let n_t = n as f64 - n_u;
            let r = (n_t - coeffs.alpha1 * n_u - coeffs.alpha2 * (q1 as f64 - n_t + 1.0)) * bits
                / (t_sym * p_t * n as f64);
            sum += r;
            sq += r * r;
        }
        let mean = sum / draws as f64;
        let var = (sq / draws as f64 - mean * mean).max(0.0);
        let se = (var / draws as f64).sqrt();
        assert!(
            (closed - mean).abs() <= 3.0 * se + 1e-9 * closed.abs(),
            "q1={q1} m={m} n={n}: closed {closed}, mc {mean} +- {se}"
        );
    }
}

/// With one channel state and zero queue capacity the next state is always
/// (0, 0), so V = max_a r(a) + lambda V, i.e. V = r*/(1 - lambda).
#[test]
fn degenerate_chain_fixed_point_closed_form() {
    let h = GaussianHmm {
        initial: vec![1.0],
        trans: vec![vec![1.0]],
        means: vec![[95.0, 0.0]],
        covs: vec![[[1.0, 0.0], [0.0, 1.0]]],
    };
    let coeffs = MdpCoeffs {
        n_q: 0,
        t_max: 15,
        ..MdpCoeffs::default()
    };
    let radio = wusn_core::soil_channel::RadioConfig {
        p_t: 0.01,
        eta: 1e-13,
        t_sym: 1.0 / 60000.0,
        packet_len: 1000,
    };
    let model = wusn_core::mdp::build_model(&h, &radio, &coeffs).unwrap();
    let r_star = feasible_actions(0, coeffs.t_max)
        .iter()
        .map(|a| {
            expected_reward(0, a, model.pe(0, a.modulation), &coeffs, radio.t_sym, radio.p_t, 1000)
        })
        .fold(f64::MIN, f64::max);
    let (values, _, _) = value_iteration(&model, 1e-10, 500).unwrap();
    let want = r_star / (1.0 - coeffs.lambda);
    let got = values.get(0, 0);
    assert!(
        (got - want).abs() < 1e-9 * want.abs().max(1.0),
        "{got} vs {want}"
    );
}

#[test]
fn residual_ratio_bounded_by_discount() {
    // modest random-ish 3-state model
    let h = GaussianHmm {
        initial: vec![0.2, 0.5, 0.3],
        trans: vec![
            vec![0.8, 0.15, 0.05],
            vec![0.1, 0.8, 0.1],
            vec![0.05, 0.25, 0.7],
        ],
        means: vec![[88.0, 0.0], [97.0, 0.1], [106.0, -0.1]],
        covs: vec![[[2.0, 0.1], [0.1, 1.0]]; 3],
    };
    let coeffs = MdpCoeffs {
        n_q: 30,
        t_max: 5,
        ..MdpCoeffs::default()
    };
    let radio = wusn_core::soil_channel::RadioConfig {
        p_t: 0.01,
        eta: 1e-13,
        t_sym: 1.0 / 60000.0,
        packet_len: 1000,
    };
    let model = build_model_helper(&h, &radio, &coeffs);
    let (_, _, residuals) = value_iteration(&model, 1e-10, 200).unwrap();
    assert!(*residuals.last().unwrap() < 1e-10);
    // ratios checked only while residuals are far above float noise
    for w in residuals.windows(2) {
        if w[0] > 1e-2 {
            assert!(
                w[1] / w[0] <= coeffs.lambda + 1e-6,
                "ratio {} from residuals {w:?}",
                w[1] / w[0]
            );
        }
    }
}

fn build_model_helper(
    h: &GaussianHmm,
    radio: &wusn_core::soil_channel::RadioConfig,
    coeffs: &MdpCoeffs,
) -> MdpModel {
    wusn_core::mdp::build_model(h, radio, coeffs).unwrap()
}
