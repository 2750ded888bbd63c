//! Physical-layer math for the buried-sensor uplink: soil propagation
//! constant, composite path loss across the soil-air boundary, SNR, and
//! MPSK bit error rate.
//!
//! All functions here are pure and safe to call concurrently.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vacuum permeability (H/m).
pub const MU_0: f64 = 4.0e-7 * std::f64::consts::PI;
/// Vacuum permittivity (F/m).
pub const EPS_0: f64 = 8.854187817e-12;
/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid modulation order {0}, expected 2, 4, or 8")]
    InvalidModulation(u32),
}

/// Soil dielectric condition at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DielectricState {
    /// Relative permittivity (dimensionless, >= 1 after cleaning).
    pub epsilon_r: f64,
    /// Electrical conductivity (S/m).
    pub sigma: f64,
}

impl DielectricState {
    pub fn new(epsilon_r: f64, sigma: f64) -> Result<Self, ChannelError> {
        if !epsilon_r.is_finite() || !sigma.is_finite() {
            return Err(ChannelError::InvalidInput(format!(
                "non-finite dielectric parameters ({epsilon_r}, {sigma})"
            )));
        }
        if epsilon_r < 1.0 {
            return Err(ChannelError::InvalidInput(format!(
                "relative permittivity {epsilon_r} < 1"
            )));
        }
        if sigma < 0.0 {
            return Err(ChannelError::InvalidInput(format!(
                "negative conductivity {sigma}"
            )));
        }
        Ok(Self { epsilon_r, sigma })
    }
}

/// Uplink geometry and antenna gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    /// Burial depth (m).
    pub d_ug: f64,
    /// Aboveground distance to the basestation (m).
    pub d_ag: f64,
    /// Carrier frequency (Hz).
    pub f: f64,
    /// Transmit antenna gain (dB).
    pub g_t: f64,
    /// Receive antenna gain (dB).
    pub g_r: f64,
}

impl LinkGeometry {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.d_ug > 0.0 && self.d_ag > 0.0 && self.f > 0.0)
            || !self.g_t.is_finite()
            || !self.g_r.is_finite()
        {
            return Err(ChannelError::InvalidInput(format!(
                "invalid link geometry {self:?}"
            )));
        }
        Ok(())
    }
}

/// Complex wavenumber of the lossy soil medium, written as alpha + j*beta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationConstant {
    /// Attenuation constant (Np/m).
    pub alpha: f64,
    /// Phase constant (rad/m).
    pub beta: f64,
}

/// Fixed radio parameters of the sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    /// Transmit power (W).
    pub p_t: f64,
    /// Noise power (W).
    pub eta: f64,
    /// Symbol time (s).
    pub t_sym: f64,
    /// Packet length (bits).
    pub packet_len: u32,
}

impl RadioConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.p_t > 0.0 && self.eta > 0.0 && self.t_sym > 0.0) || self.packet_len < 1 {
            return Err(ChannelError::InvalidInput(format!(
                "invalid radio config {self:?}"
            )));
        }
        Ok(())
    }
}

/// MPSK modulation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Psk8,
}

impl Modulation {
    pub const ALL: [Modulation; 3] = [Modulation::Bpsk, Modulation::Qpsk, Modulation::Psk8];

    pub fn from_order(m: u32) -> Result<Self, ChannelError> {
        match m {
            2 => Ok(Modulation::Bpsk),
            4 => Ok(Modulation::Qpsk),
            8 => Ok(Modulation::Psk8),
            other => Err(ChannelError::InvalidModulation(other)),
        }
    }

    /// Modulation order M.
    pub fn order(&self) -> u32 {
        match self {
            Modulation::Bpsk => 2,
            Modulation::Qpsk => 4,
            Modulation::Psk8 => 8,
        }
    }

    /// Bits carried per symbol, log2(M).
    pub fn bits_per_symbol(&self) -> u32 {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
            Modulation::Psk8 => 3,
        }
    }
}

impl std::fmt::Display for Modulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Modulation::Bpsk => write!(f, "BPSK"),
            Modulation::Qpsk => write!(f, "QPSK"),
            Modulation::Psk8 => write!(f, "8PSK"),
        }
    }
}

/// Complex propagation constant of soil at carrier frequency `f`:
/// k_s = j*2*pi*f * sqrt(mu_0 * (eps_0*eps_r - j*sigma/(2*pi*f))).
///
/// The principal square root puts k_s in the first quadrant, so
/// alpha = Re(k_s) >= 0 and beta = Im(k_s) > 0.
pub fn propagation_constant(
    d: &DielectricState,
    f: f64,
) -> Result<PropagationConstant, ChannelError> {
    if !f.is_finite() || f <= 0.0 {
        return Err(ChannelError::InvalidInput(format!("invalid frequency {f}")));
    }
    if !d.epsilon_r.is_finite() || !d.sigma.is_finite() {
        return Err(ChannelError::InvalidInput(
            "non-finite dielectric state".into(),
        ));
    }
    let omega = 2.0 * std::f64::consts::PI * f;
    let eps_c = Complex64::new(EPS_0 * d.epsilon_r, -d.sigma / omega);
    let k_s = Complex64::i() * omega * (MU_0 * eps_c).sqrt();
    Ok(PropagationConstant {
        alpha: k_s.re,
        beta: k_s.im,
    })
}

/// Underground propagation loss (dB) over burial depth `d_ug`:
/// modified-Friis form 6.4 + 20*log10(d_ug) + 20*log10(beta) + 8.69*alpha*d_ug.
pub fn underground_loss_db(pc: &PropagationConstant, d_ug: f64) -> f64 {
    6.4 + 20.0 * d_ug.log10() + 20.0 * pc.beta.log10() + 8.69 * pc.alpha * d_ug
}

/// Free-space aboveground propagation loss (dB) over distance `d_ag`.
pub fn aboveground_loss_db(f: f64, d_ag: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * d_ag * f / SPEED_OF_LIGHT).log10()
}

/// Refraction loss (dB) at the soil-air boundary, modeled as the
/// normal-incidence power-transmission mismatch between soil (refractive
/// index n) and air.
pub fn refraction_loss_db(d: &DielectricState, f: f64) -> f64 {
    let omega = 2.0 * std::f64::consts::PI * f;
    let n = Complex64::new(d.epsilon_r, -d.sigma / (omega * EPS_0)).sqrt().re;
    10.0 * ((n + 1.0).powi(2) / (4.0 * n)).log10()
}

/// Total uplink path loss (dB): underground + aboveground + refraction
/// losses minus the antenna gains.
pub fn path_loss_db(d: &DielectricState, g: &LinkGeometry) -> Result<f64, ChannelError> {
    g.validate()?;
    let pc = propagation_constant(d, g.f)?;
    Ok(underground_loss_db(&pc, g.d_ug)
        + aboveground_loss_db(g.f, g.d_ag)
        + refraction_loss_db(d, g.f)
        - g.g_t
        - g.g_r)
}

/// Linear channel power gain corresponding to a path loss in dB.
pub fn linear_gain(pl_db: f64) -> f64 {
    10f64.powf(-pl_db / 10.0)
}

/// Complementary error function to near machine precision: a
/// cancellation-free power series below the crossover, the standard
/// continued fraction above it.
fn erfc(x: f64) -> f64 {
    const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 3.0 {
        // erf(x) = (2/sqrt(pi)) x e^{-x^2} sum_n (2x^2)^n / (1*3*...*(2n+1))
        let x2 = 2.0 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut n = 0u32;
        while term > 1e-18 * sum {
            n += 1;
            term *= x2 / (2 * n + 1) as f64;
            sum += term;
        }
        1.0 - FRAC_2_SQRT_PI * x * (-x * x).exp() * sum
    } else {
        // sqrt(pi) e^{x^2} erfc(x) = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
        let mut t = 0.0;
        for k in (1..=60u32).rev() {
            t = (k as f64 / 2.0) / (x + t);
        }
        (-x * x).exp() * FRAC_2_SQRT_PI / 2.0 / (x + t)
    }
}

/// Gaussian tail probability Q(x) = P(N(0,1) > x).
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// MPSK bit error rate at the given linear SNR (P_t * l_p / eta):
/// (2/max(log2 M, 2)) * sum_{i=1}^{max(M/4,1)} Q(sqrt(2*snr)*sin((2i-1)*pi/M)),
/// clamped to [0, 1].
pub fn ber_mpsk(m: Modulation, snr: f64) -> Result<f64, ChannelError> {
    if !snr.is_finite() || snr < 0.0 {
        return Err(ChannelError::InvalidInput(format!("invalid snr {snr}")));
    }
    let order = m.order() as f64;
    let n_terms = (m.order() / 4).max(1);
    let scale = 2.0 / (m.bits_per_symbol() as f64).max(2.0);
    let arg = (2.0 * snr).sqrt();
    let mut sum = 0.0;
    for i in 1..=n_terms {
        let phase = (2 * i - 1) as f64 * std::f64::consts::PI / order;
        sum += q_function(arg * phase.sin());
    }
    Ok((scale * sum).clamp(0.0, 1.0))
}

/// Probability that a whole packet of `packet_len` bits arrives error-free.
pub fn packet_success_prob(pe: f64, packet_len: u32) -> f64 {
    (1.0 - pe).powi(packet_len as i32)
}
