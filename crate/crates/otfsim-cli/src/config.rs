//! Experiment configuration: a TOML file plus command-line / environment
//! overrides. Flags take precedence over `OTFSIM_*` environment variables,
//! which take precedence over the file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use otfsim_core::channel::{CsiErrorModel, DelayDopplerProfile, DelayDopplerTap, NoiseModel};
use otfsim_core::modem::ConstellationKind;

use crate::HarnessError;

/// Receivers the harness can run. Labels match the CSV `receiver` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarnessReceiver {
    Lz,
    Lm,
    ConventionalZf,
    ConventionalMmse,
    LzLas,
    LmLas,
}

impl HarnessReceiver {
    pub const ALL: [HarnessReceiver; 6] = [
        HarnessReceiver::Lz,
        HarnessReceiver::Lm,
        HarnessReceiver::ConventionalZf,
        HarnessReceiver::ConventionalMmse,
        HarnessReceiver::LzLas,
        HarnessReceiver::LmLas,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            HarnessReceiver::Lz => "LZ",
            HarnessReceiver::Lm => "LM",
            HarnessReceiver::ConventionalZf => "cZF",
            HarnessReceiver::ConventionalMmse => "cMMSE",
            HarnessReceiver::LzLas => "LZ-LAS",
            HarnessReceiver::LmLas => "LM-LAS",
        }
    }

    pub fn parse(s: &str) -> Result<Self, HarnessError> {
        Self::ALL
            .into_iter()
            .find(|r| r.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                HarnessError::Config(format!(
                    "unknown receiver {s:?}; expected one of LZ, LM, cZF, cMMSE, LZ-LAS, LM-LAS"
                ))
            })
    }
}

/// CSI assumption for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CsiSetting {
    Perfect,
    /// `sigma_e^2 = rho / N_t`, tied to the SNR point.
    Scaled,
    /// Fixed error variance, independent of SNR.
    Fixed(f64),
}

impl CsiSetting {
    pub fn label(&self) -> &'static str {
        match self {
            CsiSetting::Perfect => "perfect",
            CsiSetting::Scaled => "scaled",
            CsiSetting::Fixed(_) => "fixed",
        }
    }

    /// Error model at one SNR point; `None` for perfect CSI.
    pub fn error_model(&self, noise: &NoiseModel<f64>, nt: usize) -> Option<CsiErrorModel<f64>> {
        match self {
            CsiSetting::Perfect => None,
            CsiSetting::Scaled => Some(CsiErrorModel::scaled_to_snr(noise, nt)),
            CsiSetting::Fixed(v) => Some(CsiErrorModel::new(*v).expect("validated at load")),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTap {
    power_db: f64,
    delay: usize,
    doppler: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, untagged)]
enum RawChannel {
    Preset(String),
    Inline {
        taps: Vec<RawTap>,
        #[serde(default = "default_carrier")]
        carrier_hz: f64,
        #[serde(default = "default_spacing")]
        subcarrier_spacing_hz: f64,
    },
}

fn default_carrier() -> f64 {
    4.0e9
}

fn default_spacing() -> f64 {
    15.0e3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComplexitySweep {
    #[serde(default)]
    grid_sizes: Option<Vec<usize>>,
    #[serde(default)]
    antenna_counts: Option<Vec<usize>>,
    #[serde(default)]
    mp_iterations: Option<Vec<u64>>,
    #[serde(default)]
    mp_taps: Option<u64>,
    #[serde(default)]
    mp_doppler_window: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    m: Option<usize>,
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    nt: Option<usize>,
    #[serde(default)]
    nr: Option<usize>,
    #[serde(default)]
    constellation: Option<String>,
    #[serde(default)]
    snr_db: Option<Vec<f64>>,
    #[serde(default)]
    trials: Option<usize>,
    #[serde(default)]
    frames_per_trial: Option<usize>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    receivers: Option<Vec<String>>,
    #[serde(default)]
    csi: Option<String>,
    #[serde(default)]
    sigma_e_sq: Option<f64>,
    #[serde(default)]
    las_max_iters: Option<usize>,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    channel: Option<RawChannel>,
    #[serde(default)]
    complexity: Option<RawComplexitySweep>,
}

/// Complexity-report sweep settings.
#[derive(Debug, Clone)]
pub struct ComplexitySweep {
    /// `M = N` values.
    pub grid_sizes: Vec<usize>,
    /// `N_t = N_r` values.
    pub antenna_counts: Vec<usize>,
    /// Message-passing iteration counts.
    pub mp_iterations: Vec<u64>,
    pub mp_taps: u64,
    pub mp_doppler_window: u64,
}

impl Default for ComplexitySweep {
    fn default() -> Self {
        Self {
            grid_sizes: vec![8, 16, 32],
            antenna_counts: vec![2, 4, 8],
            mp_iterations: vec![20],
            mp_taps: 5,
            mp_doppler_window: 10,
        }
    }
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub m: usize,
    pub n: usize,
    pub nt: usize,
    pub nr: usize,
    pub constellation: ConstellationKind,
    pub snr_db: Vec<f64>,
    /// Channel realizations per SNR point.
    pub trials: usize,
    pub frames_per_trial: usize,
    pub seed: u64,
    pub receivers: Vec<HarnessReceiver>,
    pub csi: CsiSetting,
    /// LAS substitution cap; 0 selects the default `4 * N_t * M * N`.
    pub las_max_iters: usize,
    pub out: Option<PathBuf>,
    channel: ChannelSpec,
    pub complexity: ComplexitySweep,
}

#[derive(Debug, Clone)]
enum ChannelSpec {
    Table2,
    Inline {
        taps: Vec<DelayDopplerTap<f64>>,
        carrier_hz: f64,
        subcarrier_spacing_hz: f64,
    },
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            m: 16,
            n: 16,
            nt: 2,
            nr: 4,
            constellation: ConstellationKind::Qpsk,
            snr_db: vec![0.0, 4.0, 8.0, 12.0],
            trials: 100,
            frames_per_trial: 1,
            seed: 1,
            receivers: vec![HarnessReceiver::Lz, HarnessReceiver::Lm],
            csi: CsiSetting::Perfect,
            las_max_iters: 0,
            out: None,
            channel: ChannelSpec::Table2,
            complexity: ComplexitySweep::default(),
        }
    }
}

/// Flag/environment overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parse a TOML config file.
    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Parse TOML text.
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let raw: RawConfig = toml::from_str(text)
            .map_err(|e| HarnessError::Config(format!("config parse error: {e}")))?;
        let mut cfg = ExperimentConfig::default();
        if let Some(v) = raw.m {
            cfg.m = v;
        }
        if let Some(v) = raw.n {
            cfg.n = v;
        }
        if let Some(v) = raw.nt {
            cfg.nt = v;
        }
        if let Some(v) = raw.nr {
            cfg.nr = v;
        }
        if let Some(s) = raw.constellation {
            cfg.constellation = match s.to_ascii_lowercase().as_str() {
                "bpsk" => ConstellationKind::Bpsk,
                "qpsk" => ConstellationKind::Qpsk,
                other => {
                    return Err(HarnessError::Config(format!(
                        "field 'constellation': unknown value {other:?} (expected bpsk or qpsk)"
                    )))
                }
            };
        }
        if let Some(v) = raw.snr_db {
            cfg.snr_db = v;
        }
        if let Some(v) = raw.trials {
            cfg.trials = v;
        }
        if let Some(v) = raw.frames_per_trial {
            cfg.frames_per_trial = v;
        }
        if let Some(v) = raw.seed {
            cfg.seed = v;
        }
        if let Some(list) = raw.receivers {
            cfg.receivers = list
                .iter()
                .map(|s| HarnessReceiver::parse(s))
                .collect::<Result<_, _>>()?;
        }
        cfg.csi = match raw.csi.as_deref() {
            None | Some("perfect") => CsiSetting::Perfect,
            Some("scaled") => CsiSetting::Scaled,
            Some("fixed") => {
                let v = raw.sigma_e_sq.ok_or_else(|| {
                    HarnessError::Config("field 'csi': \"fixed\" requires 'sigma_e_sq'".into())
                })?;
                CsiSetting::Fixed(v)
            }
            Some(other) => {
                return Err(HarnessError::Config(format!(
                    "field 'csi': unknown value {other:?} (expected perfect, scaled, or fixed)"
                )))
            }
        };
        if let Some(v) = raw.las_max_iters {
            cfg.las_max_iters = v;
        }
        cfg.out = raw.out;
        if let Some(ch) = raw.channel {
            cfg.channel = match ch {
                RawChannel::Preset(name) => {
                    if name.eq_ignore_ascii_case("table2") {
                        ChannelSpec::Table2
                    } else {
                        return Err(HarnessError::Config(format!(
                            "field 'channel': unknown preset {name:?} (expected \"table2\")"
                        )));
                    }
                }
                RawChannel::Inline {
                    taps,
                    carrier_hz,
                    subcarrier_spacing_hz,
                } => ChannelSpec::Inline {
                    taps: taps
                        .into_iter()
                        .map(|t| DelayDopplerTap {
                            power_db: t.power_db,
                            delay: t.delay,
                            doppler: t.doppler,
                        })
                        .collect(),
                    carrier_hz,
                    subcarrier_spacing_hz,
                },
            };
        }
        if let Some(c) = raw.complexity {
            let d = ComplexitySweep::default();
            cfg.complexity = ComplexitySweep {
                grid_sizes: c.grid_sizes.unwrap_or(d.grid_sizes),
                antenna_counts: c.antenna_counts.unwrap_or(d.antenna_counts),
                mp_iterations: c.mp_iterations.unwrap_or(d.mp_iterations),
                mp_taps: c.mp_taps.unwrap_or(d.mp_taps),
                mp_doppler_window: c.mp_doppler_window.unwrap_or(d.mp_doppler_window),
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_overrides(&mut self, overrides: &Overrides) -> Result<(), HarnessError> {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(trials) = overrides.trials {
            self.trials = trials;
        }
        if let Some(out) = &overrides.out {
            self.out = Some(out.clone());
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.snr_db.is_empty() {
            return Err(HarnessError::Config("field 'snr_db': grid is empty".into()));
        }
        if self.trials < 1 || self.frames_per_trial < 1 {
            return Err(HarnessError::Config(
                "fields 'trials'/'frames_per_trial': need at least 1".into(),
            ));
        }
        if self.receivers.is_empty() {
            return Err(HarnessError::Config(
                "field 'receivers': list is empty".into(),
            ));
        }
        if self.nt < 1 || self.nr < self.nt {
            return Err(HarnessError::Config(format!(
                "fields 'nt'/'nr': need 1 <= nt <= nr, got nt = {}, nr = {}",
                self.nt, self.nr
            )));
        }
        if let CsiSetting::Fixed(v) = self.csi {
            if v < 0.0 {
                return Err(HarnessError::Config(
                    "field 'sigma_e_sq': must be >= 0".into(),
                ));
            }
        }
        self.profile().map(|_| ())
    }

    /// The delay-Doppler profile for this run.
    pub fn profile(&self) -> Result<DelayDopplerProfile<f64>, HarnessError> {
        match &self.channel {
            ChannelSpec::Table2 => DelayDopplerProfile::table2(self.m, self.n)
                .map_err(|e| HarnessError::Config(format!("channel preset: {e}"))),
            ChannelSpec::Inline {
                taps,
                carrier_hz,
                subcarrier_spacing_hz,
            } => DelayDopplerProfile::new(
                taps.clone(),
                *carrier_hz,
                *subcarrier_spacing_hz,
                self.m,
                self.n,
            )
            .map_err(|e| HarnessError::Config(format!("channel taps: {e}"))),
        }
    }

    /// Effective LAS substitution cap.
    pub fn las_cap(&self) -> usize {
        if self.las_max_iters > 0 {
            self.las_max_iters
        } else {
            4 * self.nt * self.m * self.n
        }
    }
}
