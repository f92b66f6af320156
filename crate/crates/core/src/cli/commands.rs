//! The four subcommands. Each resolves its inputs from a [`Scenario`],
//! computes, then writes its files into the output directory.

use std::f64::consts::TAU;
use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use super::config::Scenario;
use super::output::{write_json, write_text, Cell, CsvTable};
use super::CliError;
use crate::detection::{estimate_visibility, run_phase_sweep, transmission_std_err, MIN_MODE_COUNTS};
use crate::error::Error;
use crate::sample::SampleModel;
use crate::spectral::CavityParams;
use crate::spectrum::{
    compute_spectrum_comb_resolved, compute_spectrum_full, compute_spectrum_good_cavity, invert_visibility,
    peak_deviation, visibility, visibility_from_transmission, CrossTerm, Fidelity, GOOD_CAVITY_LIMIT,
    SAMPLES_PER_GAMMA,
};

pub const SPECTRUM_CSV: &str = "spectrum.csv";
pub const SPECTRUM_JSON: &str = "spectrum.json";
pub const VISIBILITY_CSV: &str = "visibility.csv";
pub const VISIBILITY_JSON: &str = "visibility.json";
pub const COUNTS_CSV: &str = "counts.csv";
pub const ESTIMATES_JSON: &str = "estimates.json";

/// Largest `delta_omega * |tau|` still treated as a negligible phase mismatch
/// across one comb spacing.
pub const PHASE_MISMATCH_LIMIT: f64 = TAU / 10.0;

/// Recommended minimum number of phases in a sweep.
pub const MIN_SWEEP_PHASES: usize = 5;

#[derive(Debug, Clone, Serialize)]
pub struct ParamsReport {
    pub gamma: f64,
    pub delta_omega: f64,
    pub tau: f64,
    pub omega_s: f64,
    pub omega_p: f64,
    pub omega_i: f64,
    pub finesse: f64,
    pub gamma_over_fsr: f64,
    pub fsr_times_tau: f64,
}

impl From<&CavityParams> for ParamsReport {
    fn from(p: &CavityParams) -> Self {
        Self {
            gamma: p.gamma(),
            delta_omega: p.fsr(),
            tau: p.tau(),
            omega_s: p.omega_signal(),
            omega_p: p.omega_pump(),
            omega_i: p.omega_idler(),
            finesse: p.finesse(),
            gamma_over_fsr: p.gamma_over_fsr(),
            fsr_times_tau: p.fsr_times_tau(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CombReport {
    pub m_min: i32,
    pub m_max: i32,
    pub capped: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub params: ParamsReport,
    pub comb: CombReport,
    pub cross_term: CrossTerm,
}

fn provenance(scn: &Scenario) -> Provenance {
    Provenance {
        config_hash: scn.config_hash.clone(),
        seed: scn.seed,
        params: scn.params().into(),
        comb: CombReport {
            m_min: scn.truncation.range.m_min(),
            m_max: scn.truncation.range.m_max(),
            capped: scn.truncation.capped,
        },
        cross_term: scn.setup.cross_term,
    }
}

fn prepare_out_dir(scn: &Scenario) -> Result<(), CliError> {
    fs::create_dir_all(&scn.out_dir)
        .map_err(|e| CliError::Config(format!("[output] cannot create {}: {e}", scn.out_dir.display())))
}

fn write_file(scn: &Scenario, name: &str, text: &str) -> Result<PathBuf, CliError> {
    let path = scn.out_dir.join(name);
    write_text(&path, text).map_err(|e| CliError::Config(format!("[output] cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn write_json_file<T: Serialize>(scn: &Scenario, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let path = scn.out_dir.join(name);
    write_json(&path, value).map_err(|e| CliError::Config(format!("[output] cannot write {}: {e}", path.display())))?;
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
pub struct Deviations {
    pub full_vs_good_cavity: f64,
    pub full_vs_comb_resolved: f64,
    pub good_cavity_vs_comb_resolved: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridReport {
    pub start: f64,
    pub stop: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumHeader {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub phi: f64,
    pub varphi: f64,
    pub grid: GridReport,
    /// Comb-peak deviations, `max |A - B| / max |A|` over retained peaks.
    pub peak_deviation: Deviations,
    /// Largest imaginary residue of the full double sum.
    pub residual_imag: f64,
    /// The same, relative to the full spectrum's peak.
    pub residual_imag_relative: f64,
}

pub fn cmd_spectrum(scn: &Scenario) -> Result<SpectrumHeader, CliError> {
    let setup = &scn.setup;
    let full = compute_spectrum_full(setup, &scn.grid)?;
    let good = compute_spectrum_good_cavity(setup, &scn.grid)?;
    let resolved = compute_spectrum_comb_resolved(setup, &scn.grid)?;

    let peak = full.peak();
    let header = SpectrumHeader {
        provenance: provenance(scn),
        phi: setup.phases.signal,
        varphi: setup.phases.idler,
        grid: GridReport {
            start: scn.grid.start(),
            stop: scn.grid.stop(),
            n_points: scn.grid.len(),
        },
        peak_deviation: Deviations {
            full_vs_good_cavity: peak_deviation(setup, Fidelity::Full, Fidelity::GoodCavity),
            full_vs_comb_resolved: peak_deviation(setup, Fidelity::Full, Fidelity::CombResolved),
            good_cavity_vs_comb_resolved: peak_deviation(setup, Fidelity::GoodCavity, Fidelity::CombResolved),
        },
        residual_imag: full.residual_imag,
        residual_imag_relative: if peak > 0.0 { full.residual_imag / peak } else { 0.0 },
    };

    let mut csv = CsvTable::new(
        &scn.config_hash,
        scn.seed,
        &["omega", "S_full", "S_good_cavity", "S_comb_resolved"],
    );
    for (i, &w) in scn.grid.values().iter().enumerate() {
        csv.row(&[
            Cell::Float(w),
            Cell::Float(full.values[i]),
            Cell::Float(good.values[i]),
            Cell::Float(resolved.values[i]),
        ]);
    }
    prepare_out_dir(scn)?;
    write_file(scn, SPECTRUM_CSV, &csv.into_string())?;
    write_json_file(scn, SPECTRUM_JSON, &header)?;
    Ok(header)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionRow {
    pub m: i32,
    pub omega_idler: f64,
    pub t_true: f64,
    pub t_hat: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Reconstruction {
    pub rows: Vec<ReconstructionRow>,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VisibilityHeader {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub n_modes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<Reconstruction>,
}

pub fn cmd_visibility(scn: &Scenario) -> Result<VisibilityHeader, CliError> {
    let setup = &scn.setup;
    let table = visibility(&setup.params, &setup.sample, &setup.comb)?;

    let reconstruction = matches!(setup.sample, SampleModel::LorentzianMixture { .. }).then(|| {
        let rows: Vec<ReconstructionRow> = table
            .rows
            .iter()
            .map(|r| {
                let t_true = setup.sample.transmissivity(r.omega_idler).norm();
                ReconstructionRow {
                    m: r.m,
                    omega_idler: r.omega_idler,
                    t_true,
                    t_hat: r.t_hat,
                    abs_error: (r.t_hat - t_true).abs(),
                }
            })
            .collect();
        let max_abs_error = rows.iter().map(|r| r.abs_error).fold(0.0, f64::max);
        Reconstruction { rows, max_abs_error }
    });

    let mut csv = CsvTable::new(
        &scn.config_hash,
        scn.seed,
        &["m", "omega_signal", "omega_idler", "V_m", "T_hat"],
    );
    for r in &table.rows {
        csv.row(&[
            Cell::Int(i64::from(r.m)),
            Cell::Float(r.omega_signal),
            Cell::Float(r.omega_idler),
            Cell::Float(r.visibility),
            Cell::Float(r.t_hat),
        ]);
    }
    let header = VisibilityHeader {
        provenance: provenance(scn),
        n_modes: table.rows.len(),
        reconstruction,
    };
    prepare_out_dir(scn)?;
    write_file(scn, VISIBILITY_CSV, &csv.into_string())?;
    write_json_file(scn, VISIBILITY_JSON, &header)?;
    Ok(header)
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeEstimate {
    pub m: i32,
    pub omega_signal: f64,
    pub omega_idler: f64,
    pub visibility: f64,
    pub std_err: f64,
    pub t_hat: f64,
    pub t_hat_std_err: f64,
    pub visibility_analytic: f64,
    pub t_true: f64,
    pub total_counts: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LowStatisticsMode {
    pub m: i32,
    pub counts: u64,
    pub required: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseTotals {
    pub phase: f64,
    pub binned: u64,
    pub out_of_window: u64,
    pub undetected: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloReport {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub n_photons_per_phase: u64,
    pub resolution_sigma: f64,
    pub comb_resolving: bool,
    pub phases: Vec<PhaseTotals>,
    pub estimates: Vec<ModeEstimate>,
    pub low_statistics: Vec<LowStatisticsMode>,
}

/// Runs the sweep and writes both files. Low statistics in any requested
/// mode is reported as an error after the files are written.
pub fn cmd_montecarlo(scn: &Scenario) -> Result<MonteCarloReport, CliError> {
    let mc = scn
        .config
        .montecarlo
        .as_ref()
        .ok_or_else(|| CliError::Config("[montecarlo] section is required for this command".into()))?;
    let phases = mc.phase_list()?;
    let modes = mc.mode_list();
    if let Some(m) = modes.iter().find(|m| !scn.setup.comb.contains(**m)) {
        return Err(CliError::Config(format!(
            "[montecarlo] mode {m} is outside the comb range [{}, {}]",
            scn.setup.comb.m_min(),
            scn.setup.comb.m_max()
        )));
    }
    let setup = &scn.setup;
    let run = run_phase_sweep(setup, &phases, &scn.spectrometer, mc.n_photons_per_phase, scn.seed)?;

    let mut estimates = Vec::new();
    let mut low_statistics = Vec::new();
    for &m in &modes {
        match estimate_visibility(&run, m) {
            Ok(est) => {
                let omega_idler = setup.params.idler_mode(m);
                let t_true = setup.sample.transmissivity(omega_idler).norm();
                estimates.push(ModeEstimate {
                    m,
                    omega_signal: setup.params.signal_mode(m),
                    omega_idler,
                    visibility: est.visibility,
                    std_err: est.std_err,
                    t_hat: invert_visibility(est.visibility)?,
                    t_hat_std_err: transmission_std_err(est.visibility, est.std_err),
                    visibility_analytic: visibility_from_transmission(t_true),
                    t_true,
                    total_counts: est.total_counts,
                });
            }
            Err(Error::LowStatistics { mode, counts, required }) => {
                low_statistics.push(LowStatisticsMode {
                    m: mode,
                    counts,
                    required,
                });
            }
            Err(e) => return Err(e.into()),
        }
    }

    let centers = run.bin_centers();
    let mut csv = CsvTable::new(&scn.config_hash, scn.seed, &["phase", "bin_center", "counts"]);
    for (k, row) in run.counts.iter().enumerate() {
        for (b, &c) in row.iter().enumerate() {
            csv.row(&[Cell::Float(run.phases[k]), Cell::Float(centers[b]), Cell::Int(c as i64)]);
        }
    }
    let report = MonteCarloReport {
        provenance: provenance(scn),
        n_photons_per_phase: mc.n_photons_per_phase,
        resolution_sigma: scn.spectrometer.resolution_sigma(),
        comb_resolving: scn.spectrometer.is_comb_resolving(setup.params.fsr()),
        phases: run
            .phases
            .iter()
            .enumerate()
            .map(|(k, &phase)| PhaseTotals {
                phase,
                binned: run.counts[k].iter().sum(),
                out_of_window: run.out_of_window[k],
                undetected: run.undetected[k],
            })
            .collect(),
        estimates,
        low_statistics,
    };
    prepare_out_dir(scn)?;
    write_file(scn, COUNTS_CSV, &csv.into_string())?;
    write_json_file(scn, ESTIMATES_JSON, &report)?;
    if let Some(low) = report.low_statistics.first() {
        return Err(CliError::LowStatistics(format!(
            "mode {} has {} counts (need at least {MIN_MODE_COUNTS})",
            low.m, low.counts
        )));
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckStatus {
    Pass,
    Warn,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Warn => "WARN",
        };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn check(name: &'static str, ok: bool, detail: String) -> Check {
    Check {
        name,
        status: if ok { CheckStatus::Pass } else { CheckStatus::Warn },
        detail,
    }
}

/// Regime and resolution checks; nothing is simulated.
pub fn cmd_validate(scn: &Scenario) -> Result<Vec<Check>, CliError> {
    let p = scn.params();
    let mut checks = vec![
        check(
            "good-cavity",
            p.gamma_over_fsr() <= GOOD_CAVITY_LIMIT,
            format!(
                "gamma/delta_omega = {:.6e} (limit {GOOD_CAVITY_LIMIT})",
                p.gamma_over_fsr()
            ),
        ),
        check(
            "phase-mismatch",
            p.fsr_times_tau().abs() <= PHASE_MISMATCH_LIMIT,
            format!(
                "delta_omega*|tau| = {:.6e} (limit 2pi/10 = {PHASE_MISMATCH_LIMIT:.6e})",
                p.fsr_times_tau().abs()
            ),
        ),
        check(
            "comb-truncation",
            !scn.truncation.capped,
            format!(
                "modes [{}, {}]{}",
                scn.truncation.range.m_min(),
                scn.truncation.range.m_max(),
                if scn.truncation.capped {
                    ", capped before the envelope decayed"
                } else {
                    ""
                }
            ),
        ),
        check(
            "grid-resolution",
            scn.grid.len() > 1 && scn.grid.spacing() <= p.gamma() / SAMPLES_PER_GAMMA,
            format!(
                "spacing {:.6e} (limit gamma/{SAMPLES_PER_GAMMA} = {:.6e})",
                scn.grid.spacing(),
                p.gamma() / SAMPLES_PER_GAMMA
            ),
        ),
        check(
            "spectrometer-resolution",
            scn.spectrometer.is_comb_resolving(p.fsr()),
            format!(
                "sigma {:.6e} (limit delta_omega/4 = {:.6e})",
                scn.spectrometer.resolution_sigma(),
                0.25 * p.fsr()
            ),
        ),
    ];
    let edges = scn.spectrometer.bin_edges();
    let widest = edges.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    checks.push(check(
        "spectrometer-bins",
        widest <= p.fsr(),
        format!("widest bin {widest:.6e} (limit delta_omega = {:.6e})", p.fsr()),
    ));
    if let Some(mc) = &scn.config.montecarlo {
        let n = mc.phase_list()?.len();
        checks.push(check(
            "sweep-phases",
            n >= MIN_SWEEP_PHASES,
            format!("{n} phases (recommended at least {MIN_SWEEP_PHASES})"),
        ));
    }
    Ok(checks)
}
