//! JSON run configuration and its translation into simulation inputs.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detection::SpectrometerModel;
use crate::error::Error;
use crate::sample::SampleModel;
use crate::spectral::{
    default_comb_range, derive_cavity_params, CavityParams, CombIndexRange, CombTruncation, FrequencyGrid,
    PhysicalGeometry,
};
use crate::spectrum::{CrossTerm, Phases, ZwmSetup, SAMPLES_PER_GAMMA};

pub const DEFAULT_ENVELOPE_CUT: f64 = 0.05;
pub const DEFAULT_N_PHASES: usize = 20;
pub const DEFAULT_OUT_DIR: &str = "out";

/// Cavity description. Exactly one of three forms must be given:
/// absolute (`gamma`, `delta_omega`, `tau`), scaled (`gamma_over_fsr`,
/// `fsr_times_tau`, optional `delta_omega` defaulting to 1) or
/// `geometry` plus `gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub omega_s: f64,
    pub omega_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_over_fsr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fsr_times_tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<PhysicalGeometry>,
}

/// Either an explicit `[m_min, m_max]` or an `envelope_cut` for the
/// automatic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_min: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_max: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope_cut: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSection {
    /// Signal-path phase, the one swept in a fringe measurement.
    #[serde(default)]
    pub phi: f64,
    /// Idler-path phase.
    #[serde(default)]
    pub varphi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub start: f64,
    pub stop: f64,
    pub n_points: usize,
}

/// Uniform spectrometer bins. Without a section the instrument is ideal
/// with one bin per retained comb mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrometerSection {
    #[serde(default)]
    pub resolution_sigma: f64,
    pub start: f64,
    pub stop: f64,
    pub n_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    pub n_photons_per_phase: u64,
    #[serde(default)]
    pub seed: u64,
    /// Explicit signal phases; otherwise `n_phases` equispaced over [0, 2 pi).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_phases: Option<usize>,
    /// Comb modes to estimate; defaults to `[0]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<i32>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub cavity: CavitySection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comb: Option<CombSection>,
    pub sample: SampleModel,
    #[serde(default)]
    pub phases: PhaseSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrometer: Option<SpectrometerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub montecarlo: Option<MonteCarloSection>,
    #[serde(default)]
    pub output: OutputSection,
}

/// Configuration problems, reported with the section they concern.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("{0}")]
    Parse(String),
    #[error("[{section}] {message}")]
    Section { section: &'static str, message: String },
}

fn section(section: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Section {
        section,
        message: message.into(),
    }
}

fn section_err(name: &'static str) -> impl Fn(Error) -> ConfigError {
    move |e| section(name, e.to_string())
}

impl SimConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> std::result::Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    /// SHA-256 of the canonical compact serialization, so formatting and key
    /// order in the source file do not matter.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config is always serializable");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn cavity_params(&self) -> std::result::Result<CavityParams, ConfigError> {
        let c = &self.cavity;
        let direct = c.tau.is_some();
        let scaled = c.gamma_over_fsr.is_some() || c.fsr_times_tau.is_some();
        let geometric = c.geometry.is_some();
        let forms = [direct, scaled, geometric].iter().filter(|f| **f).count();
        if forms != 1 {
            return Err(section(
                "cavity",
                "give exactly one of: gamma + delta_omega + tau, gamma_over_fsr + fsr_times_tau, geometry + gamma",
            ));
        }
        let err = section_err("cavity");
        if direct {
            let (Some(gamma), Some(fsr), Some(tau)) = (c.gamma, c.delta_omega, c.tau) else {
                return Err(section("cavity", "absolute form needs gamma, delta_omega and tau"));
            };
            return CavityParams::new(gamma, fsr, tau, c.omega_s, c.omega_p).map_err(err);
        }
        if scaled {
            let (Some(ratio), Some(product)) = (c.gamma_over_fsr, c.fsr_times_tau) else {
                return Err(section(
                    "cavity",
                    "scaled form needs both gamma_over_fsr and fsr_times_tau",
                ));
            };
            if c.gamma.is_some() {
                return Err(section("cavity", "scaled form takes gamma_over_fsr instead of gamma"));
            }
            let fsr = c.delta_omega.unwrap_or(1.0);
            return CavityParams::from_ratios(ratio, product, fsr, c.omega_s, c.omega_p).map_err(err);
        }
        let geometry = c.geometry.as_ref().expect("geometric form");
        let Some(gamma) = c.gamma else {
            return Err(section("cavity", "geometry form needs gamma"));
        };
        if c.delta_omega.is_some() {
            return Err(section("cavity", "geometry form derives delta_omega; do not give it"));
        }
        derive_cavity_params(geometry, c.omega_s, c.omega_p, gamma).map_err(err)
    }

    pub fn comb_truncation(&self, params: &CavityParams) -> std::result::Result<CombTruncation, ConfigError> {
        let comb = self.comb.clone().unwrap_or(CombSection {
            m_min: None,
            m_max: None,
            envelope_cut: None,
        });
        let err = section_err("comb");
        match (comb.m_min, comb.m_max, comb.envelope_cut) {
            (Some(lo), Some(hi), None) => Ok(CombTruncation {
                range: CombIndexRange::new(lo, hi).map_err(err)?,
                capped: false,
            }),
            (None, None, cut) => default_comb_range(params, cut.unwrap_or(DEFAULT_ENVELOPE_CUT)).map_err(err),
            _ => Err(section("comb", "give either m_min and m_max, or envelope_cut")),
        }
    }

    /// Spectrum grid: the configured one, or one covering every retained
    /// mode at the minimum resolution.
    pub fn frequency_grid(
        &self,
        params: &CavityParams,
        comb: &CombIndexRange,
    ) -> std::result::Result<FrequencyGrid, ConfigError> {
        let err = section_err("grid");
        match &self.grid {
            Some(g) => FrequencyGrid::new(g.start, g.stop, g.n_points).map_err(err),
            None => FrequencyGrid::with_max_spacing(
                params.signal_mode(comb.m_min()) - 0.5 * params.fsr(),
                params.signal_mode(comb.m_max()) + 0.5 * params.fsr(),
                params.gamma() / SAMPLES_PER_GAMMA,
            )
            .map_err(err),
        }
    }

    pub fn spectrometer(
        &self,
        params: &CavityParams,
        comb: &CombIndexRange,
    ) -> std::result::Result<SpectrometerModel, ConfigError> {
        let err = section_err("spectrometer");
        match &self.spectrometer {
            Some(s) => SpectrometerModel::uniform(s.resolution_sigma, s.start, s.stop, s.n_bins).map_err(err),
            None => SpectrometerModel::uniform(
                0.0,
                params.signal_mode(comb.m_min()) - 0.5 * params.fsr(),
                params.signal_mode(comb.m_max()) + 0.5 * params.fsr(),
                comb.len(),
            )
            .map_err(err),
        }
    }
}

impl MonteCarloSection {
    pub fn phase_list(&self) -> std::result::Result<Vec<f64>, ConfigError> {
        match (&self.phases, self.n_phases) {
            (Some(_), Some(_)) => Err(section("montecarlo", "give either phases or n_phases, not both")),
            (Some(p), None) => {
                if p.is_empty() || p.iter().any(|v| !v.is_finite()) {
                    return Err(section(
                        "montecarlo",
                        "phases must be a non-empty list of finite numbers",
                    ));
                }
                Ok(p.clone())
            }
            (None, n) => {
                let n = n.unwrap_or(DEFAULT_N_PHASES);
                if n == 0 {
                    return Err(section("montecarlo", "n_phases must be positive"));
                }
                Ok((0..n).map(|k| TAU * k as f64 / n as f64).collect())
            }
        }
    }

    pub fn mode_list(&self) -> Vec<i32> {
        self.modes.clone().unwrap_or_else(|| vec![0])
    }
}

/// A configuration resolved into simulation inputs, with command-line
/// overrides applied.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: SimConfig,
    pub config_hash: String,
    pub seed: u64,
    pub truncation: CombTruncation,
    pub setup: ZwmSetup,
    pub grid: FrequencyGrid,
    pub spectrometer: SpectrometerModel,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub paper_exact_cross_term: bool,
}

impl Scenario {
    pub fn resolve(config: SimConfig, overrides: &Overrides) -> std::result::Result<Self, ConfigError> {
        let params = config.cavity_params()?;
        config.sample.validate().map_err(section_err("sample"))?;
        let truncation = config.comb_truncation(&params)?;
        let grid = config.frequency_grid(&params, &truncation.range)?;
        let spectrometer = config.spectrometer(&params, &truncation.range)?;
        let cross_term = if overrides.paper_exact_cross_term {
            CrossTerm::PaperExact
        } else {
            CrossTerm::Generalized
        };
        let setup = ZwmSetup::new(
            params,
            config.sample.clone(),
            truncation.range,
            Phases::new(config.phases.phi, config.phases.varphi),
        )
        .with_cross_term(cross_term);
        let seed = overrides
            .seed
            .or_else(|| config.montecarlo.as_ref().map(|m| m.seed))
            .unwrap_or(0);
        let out_dir = overrides
            .out_dir
            .clone()
            .or_else(|| config.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
        Ok(Self {
            config_hash: config.hash(),
            config,
            seed,
            truncation,
            setup,
            grid,
            spectrometer,
            out_dir,
        })
    }

    pub fn params(&self) -> &CavityParams {
        &self.setup.params
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALED: &str = r#"{
        "cavity": {"omega_s": 100.0, "omega_p": 250.0, "gamma_over_fsr": 0.01, "fsr_times_tau": 0.1},
        "sample": {"kind": "flat", "t0": [0.5, 0.0]}
    }"#;

    #[test]
    fn scaled_form_defaults() {
        let c = SimConfig::from_json(SCALED).unwrap();
        let s = Scenario::resolve(c, &Overrides::default()).unwrap();
        assert_eq!(s.params().fsr(), 1.0);
        assert!((s.params().gamma() - 0.01).abs() < 1e-15);
        assert_eq!(s.seed, 0);
        assert_eq!(s.out_dir, PathBuf::from("out"));
        assert!(!s.truncation.capped);
        assert_eq!(s.spectrometer.n_bins(), s.truncation.range.len());
    }

    #[test]
    fn missing_cavity_names_the_section() {
        let err = SimConfig::from_json(r#"{"sample": {"kind": "flat", "t0": [1.0, 0.0]}}"#).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("cavity"), "{text}");
        assert!(text.contains("line"), "{text}");
    }

    #[test]
    fn two_cavity_forms_rejected() {
        let text = r#"{
            "cavity": {"omega_s": 1.0, "omega_p": 3.0, "gamma": 0.01, "delta_omega": 1.0, "tau": 0.1,
                       "gamma_over_fsr": 0.01, "fsr_times_tau": 0.1},
            "sample": {"kind": "flat", "t0": [1.0, 0.0]}
        }"#;
        let err = SimConfig::from_json(text).unwrap().cavity_params().unwrap_err();
        assert!(err.to_string().starts_with("[cavity]"));
    }

    #[test]
    fn geometry_form() {
        let text = r#"{
            "cavity": {"omega_s": 10.0, "omega_p": 25.0, "gamma": 0.01,
                       "geometry": {"crystal_length": 1.0, "resonator_length": 2.0,
                                    "group_velocity_signal": 0.5, "group_velocity_idler": 0.4,
                                    "light_speed": 1.0}},
            "sample": {"kind": "flat", "t0": [1.0, 0.0]}
        }"#;
        let p = SimConfig::from_json(text).unwrap().cavity_params().unwrap();
        // T = 2/0.5 + 2/1 = 6, tau = 1/0.4 - 1/0.5 = 0.5
        assert!((p.fsr() - TAU / 6.0).abs() < 1e-15);
        assert!((p.tau() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unknown_field_rejected() {
        let text = SCALED.replace("\"sample\"", "\"smaple\": 1, \"sample\"");
        assert!(SimConfig::from_json(&text).is_err());
    }

    #[test]
    fn comb_forms() {
        let mut c = SimConfig::from_json(SCALED).unwrap();
        let p = c.cavity_params().unwrap();
        c.comb = Some(CombSection {
            m_min: Some(-2),
            m_max: Some(3),
            envelope_cut: None,
        });
        assert_eq!(
            c.comb_truncation(&p).unwrap().range,
            CombIndexRange::new(-2, 3).unwrap()
        );
        c.comb = Some(CombSection {
            m_min: Some(-2),
            m_max: None,
            envelope_cut: Some(0.1),
        });
        assert!(c.comb_truncation(&p).is_err());
    }

    #[test]
    fn overrides_win() {
        let mut c = SimConfig::from_json(SCALED).unwrap();
        c.montecarlo = Some(MonteCarloSection {
            n_photons_per_phase: 10,
            seed: 5,
            phases: None,
            n_phases: Some(4),
            modes: None,
        });
        c.output.dir = Some(PathBuf::from("elsewhere"));
        let o = Overrides {
            out_dir: Some(PathBuf::from("here")),
            seed: Some(9),
            paper_exact_cross_term: true,
        };
        let s = Scenario::resolve(c.clone(), &o).unwrap();
        assert_eq!(s.seed, 9);
        assert_eq!(s.out_dir, PathBuf::from("here"));
        assert_eq!(s.setup.cross_term, CrossTerm::PaperExact);
        let s = Scenario::resolve(c.clone(), &Overrides::default()).unwrap();
        assert_eq!(s.seed, 5);
        assert_eq!(s.out_dir, PathBuf::from("elsewhere"));
        let phases = c.montecarlo.unwrap().phase_list().unwrap();
        assert_eq!(phases, vec![0.0, TAU / 4.0, TAU / 2.0, 3.0 * TAU / 4.0]);
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = SimConfig::from_json(SCALED).unwrap();
        let compact: String = SCALED.split_whitespace().collect();
        let b = SimConfig::from_json(&compact).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let mut c = a.clone();
        c.phases.phi = 1.0;
        assert_ne!(a.hash(), c.hash());
    }

    mod props {
        use super::*;
        use crate::sample::AbsorptionLine;
        use num_complex::Complex64;
        use proptest::prelude::*;

        fn finite() -> impl Strategy<Value = f64> {
            prop_oneof![
                -1e3f64..1e3,
                Just(0.0),
                any::<f64>().prop_filter("finite", |v| v.is_finite())
            ]
        }

        fn sample() -> impl Strategy<Value = SampleModel> {
            prop_oneof![
                (finite(), finite()).prop_map(|(a, b)| SampleModel::Flat {
                    t0: Complex64::new(a, b)
                }),
                (finite(), finite()).prop_map(|(a, b)| SampleModel::BeamSplitter {
                    t0: Complex64::new(a, b)
                }),
                prop::collection::vec((finite(), finite(), finite()), 0..4).prop_map(|v| {
                    SampleModel::LorentzianMixture {
                        lines: v
                            .into_iter()
                            .map(|(center, width, depth)| AbsorptionLine { center, width, depth })
                            .collect(),
                    }
                }),
            ]
        }

        fn config() -> impl Strategy<Value = SimConfig> {
            (
                (
                    finite(),
                    finite(),
                    prop::option::of(finite()),
                    prop::option::of(finite()),
                    prop::option::of(finite()),
                ),
                prop::option::of((
                    prop::option::of(-50i32..50),
                    prop::option::of(-50i32..50),
                    prop::option::of(finite()),
                )),
                sample(),
                (finite(), finite()),
                prop::option::of((finite(), finite(), 0usize..10_000)),
                prop::option::of((
                    any::<u64>(),
                    any::<u64>(),
                    prop::option::of(prop::collection::vec(finite(), 0..5)),
                )),
                prop::option::of("[a-z/]{1,12}"),
            )
                .prop_map(|(cav, comb, sample, (phi, varphi), grid, mc, dir)| SimConfig {
                    cavity: CavitySection {
                        omega_s: cav.0,
                        omega_p: cav.1,
                        gamma: cav.2,
                        delta_omega: cav.3,
                        tau: cav.4,
                        gamma_over_fsr: None,
                        fsr_times_tau: None,
                        geometry: None,
                    },
                    comb: comb.map(|(m_min, m_max, envelope_cut)| CombSection {
                        m_min,
                        m_max,
                        envelope_cut,
                    }),
                    sample,
                    phases: PhaseSection { phi, varphi },
                    grid: grid.map(|(start, stop, n_points)| GridSection { start, stop, n_points }),
                    spectrometer: None,
                    montecarlo: mc.map(|(n, seed, phases)| MonteCarloSection {
                        n_photons_per_phase: n,
                        seed,
                        phases,
                        n_phases: None,
                        modes: Some(vec![0, 1]),
                    }),
                    output: OutputSection {
                        dir: dir.map(PathBuf::from),
                    },
                })
        }

        proptest! {
            #[test]
            fn serialized_config_reparses_identically(c in config()) {
                let back = SimConfig::from_json(&c.to_json()).unwrap();
                prop_assert_eq!(&back, &c);
                prop_assert_eq!(back.hash(), c.hash());
            }
        }
    }
}
