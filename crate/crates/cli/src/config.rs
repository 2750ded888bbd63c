//! Run configuration: one TOML document with CLI-flag overrides.
//! Defaults reproduce the reference simulation parameter set.

use serde::{Deserialize, Serialize};
use wusn_core::data_pipeline::{CsvSchema, SynthConfig};
use wusn_core::hmm::FitConfig;
use wusn_core::mdp::MdpCoeffs;
use wusn_core::soil_channel::{LinkGeometry, RadioConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub d_ug_m: f64,
    pub d_ag_m: f64,
    pub f_hz: f64,
    pub g_t_db: f64,
    pub g_r_db: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        // 9.5 cm burial depth at 300 MHz; the aboveground range is chosen so
        // the calibrated annual trace spans the BPSK/8PSK decision region
        // for transmit powers between 1 mW and 100 mW.
        Self {
            d_ug_m: 0.095,
            d_ag_m: 2800.0,
            f_hz: 300e6,
            g_t_db: 5.0,
            g_r_db: 5.0,
        }
    }
}

impl GeometryConfig {
    pub fn link(&self) -> LinkGeometry {
        LinkGeometry {
            d_ug: self.d_ug_m,
            d_ag: self.d_ag_m,
            f: self.f_hz,
            g_t: self.g_t_db,
            g_r: self.g_r_db,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioSection {
    pub p_t_w: f64,
    pub eta_dbm: f64,
    pub t_sym_s: f64,
    pub packet_len_bits: u32,
}

impl Default for RadioSection {
    fn default() -> Self {
        Self {
            p_t_w: 0.01,
            eta_dbm: -100.0,
            t_sym_s: 1.0 / 60000.0,
            packet_len_bits: 1000,
        }
    }
}

impl RadioSection {
    pub fn radio(&self) -> RadioConfig {
        RadioConfig {
            p_t: self.p_t_w,
            eta: 10f64.powf(self.eta_dbm / 10.0) * 1e-3,
            t_sym: self.t_sym_s,
            packet_len: self.packet_len_bits,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HmmSection {
    pub n_states: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub cov_floor: f64,
}

impl Default for HmmSection {
    fn default() -> Self {
        let d = FitConfig::default();
        Self {
            n_states: d.n_states,
            max_iters: d.max_iters,
            tol: d.tol,
            cov_floor: d.cov_floor,
        }
    }
}

impl HmmSection {
    pub fn fit_config(&self, seed: u64) -> FitConfig {
        FitConfig {
            n_states: self.n_states,
            seed,
            max_iters: self.max_iters,
            tol: self.tol,
            cov_floor: self.cov_floor,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdpSection {
    pub n_q: usize,
    pub t_max: u32,
    pub alpha1: f64,
    pub alpha2: f64,
    pub lambda: f64,
    pub vi_tol: f64,
    pub vi_max_iters: usize,
}

impl Default for MdpSection {
    fn default() -> Self {
        let d = MdpCoeffs::default();
        Self {
            n_q: d.n_q,
            t_max: d.t_max,
            alpha1: d.alpha1,
            alpha2: d.alpha2,
            lambda: d.lambda,
            vi_tol: 1e-10,
            vi_max_iters: 200,
        }
    }
}

impl MdpSection {
    pub fn coeffs(&self) -> MdpCoeffs {
        MdpCoeffs {
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            lambda: self.lambda,
            t_max: self.t_max,
            n_q: self.n_q,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub powers_w: Vec<f64>,
    pub n_q_values: Vec<usize>,
    /// Power used for the queue sweep (W).
    pub queue_sweep_power_w: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            powers_w: vec![0.001, 0.002, 0.005, 0.01, 0.013, 0.016, 0.02, 0.05, 0.1],
            n_q_values: vec![10, 25, 50, 75, 100, 150],
            queue_sweep_power_w: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Single top-level seed; all randomness derives from it.
    pub seed: u64,
    pub geometry: GeometryConfig,
    pub radio: RadioSection,
    pub hmm: HmmSection,
    pub mdp: MdpSection,
    pub sweep: SweepSection,
    pub synth: SynthConfig,
    pub csv: CsvSchema,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            geometry: GeometryConfig::default(),
            radio: RadioSection::default(),
            hmm: HmmSection::default(),
            mdp: MdpSection::default(),
            sweep: SweepSection::default(),
            synth: SynthConfig::default(),
            csv: CsvSchema::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("reading config {}: {e}", path.display()))?;
        Ok(toml::from_str(&raw)?)
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }
}
