//! Python bindings: cavity parameters, sample models, spectra, visibilities
//! and simulated phase sweeps.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use zwm_core::detection::{self, MeasurementRun, SpectrometerModel};
use zwm_core::spectrum::{self as spectra, Fidelity};
use zwm_core::{AbsorptionLine, CombIndexRange, CrossTerm, Error, FrequencyGrid, Phases, ZwmSetup};

/// `(m, omega_signal, omega_idler, V_m, T_hat)`
type VisibilityRow = (i32, f64, f64, f64, f64);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Estimation(_) | Error::CannotNormalize(_) | Error::LowStatistics { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "CavityParams", frozen, from_py_object)]
#[derive(Clone)]
struct PyCavityParams {
    inner: zwm_core::CavityParams,
}

#[pymethods]
impl PyCavityParams {
    #[new]
    fn new(gamma: f64, delta_omega: f64, tau: f64, omega_s: f64, omega_p: f64) -> PyResult<Self> {
        let inner = zwm_core::CavityParams::new(gamma, delta_omega, tau, omega_s, omega_p).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (gamma_over_fsr, fsr_times_tau, omega_s, omega_p, delta_omega = 1.0))]
    fn from_ratios(
        gamma_over_fsr: f64,
        fsr_times_tau: f64,
        omega_s: f64,
        omega_p: f64,
        delta_omega: f64,
    ) -> PyResult<Self> {
        let inner = zwm_core::CavityParams::from_ratios(gamma_over_fsr, fsr_times_tau, delta_omega, omega_s, omega_p)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    #[getter]
    fn delta_omega(&self) -> f64 {
        self.inner.fsr()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau()
    }

    #[getter]
    fn omega_s(&self) -> f64 {
        self.inner.omega_signal()
    }

    #[getter]
    fn omega_p(&self) -> f64 {
        self.inner.omega_pump()
    }

    #[getter]
    fn omega_i(&self) -> f64 {
        self.inner.omega_idler()
    }

    #[getter]
    fn finesse(&self) -> f64 {
        self.inner.finesse()
    }

    fn signal_mode(&self, m: i32) -> f64 {
        self.inner.signal_mode(m)
    }

    fn idler_mode(&self, m: i32) -> f64 {
        self.inner.idler_mode(m)
    }

    fn __repr__(&self) -> String {
        format!(
            "CavityParams(gamma={}, delta_omega={}, tau={}, omega_s={}, omega_p={})",
            self.inner.gamma(),
            self.inner.fsr(),
            self.inner.tau(),
            self.inner.omega_signal(),
            self.inner.omega_pump()
        )
    }
}

#[pyclass(name = "SampleModel", frozen, from_py_object)]
#[derive(Clone)]
struct PySampleModel {
    inner: zwm_core::SampleModel,
}

#[pymethods]
impl PySampleModel {
    #[staticmethod]
    fn flat(t0: Complex64) -> PyResult<Self> {
        let inner = zwm_core::SampleModel::Flat { t0 };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn beam_splitter(t0: Complex64) -> PyResult<Self> {
        let inner = zwm_core::SampleModel::BeamSplitter { t0 };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    /// `lines` is a list of `(center, width, depth)` tuples.
    #[staticmethod]
    fn lorentzian_mixture(lines: Vec<(f64, f64, f64)>) -> PyResult<Self> {
        let inner = zwm_core::SampleModel::LorentzianMixture {
            lines: lines
                .into_iter()
                .map(|(center, width, depth)| AbsorptionLine { center, width, depth })
                .collect(),
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    fn transmissivity(&self, omega: f64) -> Complex64 {
        self.inner.transmissivity(omega)
    }

    fn rear_reflectivity(&self, omega: f64) -> f64 {
        self.inner.rear_reflectivity(omega)
    }
}

fn setup(
    params: &PyCavityParams,
    sample: &PySampleModel,
    comb: (i32, i32),
    phi: f64,
    varphi: f64,
    paper_exact: bool,
) -> PyResult<ZwmSetup> {
    let range = CombIndexRange::new(comb.0, comb.1).map_err(to_py)?;
    let cross = if paper_exact {
        CrossTerm::PaperExact
    } else {
        CrossTerm::Generalized
    };
    Ok(ZwmSetup::new(params.inner, sample.inner.clone(), range, Phases::new(phi, varphi)).with_cross_term(cross))
}

#[pyfunction]
fn phase_mismatch_factor(m: i32, params: &PyCavityParams) -> Complex64 {
    zwm_core::phase_mismatch_factor(m, &params.inner)
}

#[pyfunction]
fn cavity_lineshape(offset: f64, gamma: f64) -> Complex64 {
    zwm_core::cavity_lineshape(offset, gamma)
}

/// Returns `(m_min, m_max, capped)`.
#[pyfunction]
fn default_comb_range(params: &PyCavityParams, envelope_cut: f64) -> PyResult<(i32, i32, bool)> {
    let t = zwm_core::default_comb_range(&params.inner, envelope_cut).map_err(to_py)?;
    Ok((t.range.m_min(), t.range.m_max(), t.capped))
}

/// Signal spectrum on a uniform grid. `fidelity` is one of `full`,
/// `good_cavity` or `comb_resolved`. Returns `(omega, values)`.
#[pyfunction]
#[pyo3(signature = (params, sample, comb, start, stop, n_points, fidelity = "full", phi = 0.0, varphi = 0.0, paper_exact = false))]
#[allow(clippy::too_many_arguments)]
fn spectrum(
    params: &PyCavityParams,
    sample: &PySampleModel,
    comb: (i32, i32),
    start: f64,
    stop: f64,
    n_points: usize,
    fidelity: &str,
    phi: f64,
    varphi: f64,
    paper_exact: bool,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let s = setup(params, sample, comb, phi, varphi, paper_exact)?;
    let grid = FrequencyGrid::new(start, stop, n_points).map_err(to_py)?;
    let result = match fidelity {
        "full" => spectra::compute_spectrum_full(&s, &grid),
        "good_cavity" => spectra::compute_spectrum_good_cavity(&s, &grid),
        "comb_resolved" => spectra::compute_spectrum_comb_resolved(&s, &grid),
        other => return Err(PyValueError::new_err(format!("unknown fidelity {other:?}"))),
    }
    .map_err(to_py)?;
    Ok((grid.values().to_vec(), result.values))
}

/// Norm-wise comb-peak deviation between the full and good-cavity spectra.
#[pyfunction]
fn good_cavity_deviation(params: &PyCavityParams, sample: &PySampleModel, comb: (i32, i32)) -> PyResult<f64> {
    let s = setup(params, sample, comb, 0.0, 0.0, false)?;
    Ok(spectra::peak_deviation(&s, Fidelity::Full, Fidelity::GoodCavity))
}

/// Per-mode rows `(m, omega_signal, omega_idler, V_m, T_hat)`.
#[pyfunction]
fn visibility_table(params: &PyCavityParams, sample: &PySampleModel, comb: (i32, i32)) -> PyResult<Vec<VisibilityRow>> {
    let range = CombIndexRange::new(comb.0, comb.1).map_err(to_py)?;
    let table = spectra::visibility(&params.inner, &sample.inner, &range).map_err(to_py)?;
    Ok(table
        .rows
        .iter()
        .map(|r| (r.m, r.omega_signal, r.omega_idler, r.visibility, r.t_hat))
        .collect())
}

#[pyfunction]
fn visibility_from_transmission(t: f64) -> f64 {
    spectra::visibility_from_transmission(t)
}

#[pyfunction]
fn invert_visibility(v: f64) -> PyResult<f64> {
    spectra::invert_visibility(v).map_err(to_py)
}

/// Fringe visibility from `(phase, intensity)` pairs by a cosine fit.
#[pyfunction]
fn fringe_visibility(samples: Vec<(f64, f64)>) -> PyResult<f64> {
    spectra::fringe_visibility_from_phase_sweep(&samples).map_err(to_py)
}

#[pyclass(name = "PhaseSweep", frozen)]
struct PyPhaseSweep {
    run: MeasurementRun,
}

#[pymethods]
impl PyPhaseSweep {
    #[getter]
    fn seed(&self) -> u64 {
        self.run.seed
    }

    #[getter]
    fn phases(&self) -> Vec<f64> {
        self.run.phases.clone()
    }

    #[getter]
    fn bin_centers(&self) -> Vec<f64> {
        self.run.bin_centers()
    }

    /// Counts indexed `[phase][bin]`.
    #[getter]
    fn counts(&self) -> Vec<Vec<u64>> {
        self.run.counts.clone()
    }

    fn mode_counts(&self, m: i32) -> Vec<u64> {
        self.run.mode_counts(m)
    }

    /// Returns `(V_est, std_err)` for comb mode `m`.
    fn estimate_visibility(&self, m: i32) -> PyResult<(f64, f64)> {
        let e = detection::estimate_visibility(&self.run, m).map_err(to_py)?;
        Ok((e.visibility, e.std_err))
    }
}

/// Simulated fringe measurement with uniform spectrometer bins.
#[pyfunction]
#[pyo3(signature = (params, sample, comb, phases, bins, n_per_phase, seed, resolution_sigma = 0.0, varphi = 0.0))]
#[allow(clippy::too_many_arguments)]
fn phase_sweep(
    params: &PyCavityParams,
    sample: &PySampleModel,
    comb: (i32, i32),
    phases: Vec<f64>,
    bins: (f64, f64, usize),
    n_per_phase: u64,
    seed: u64,
    resolution_sigma: f64,
    varphi: f64,
) -> PyResult<PyPhaseSweep> {
    let s = setup(params, sample, comb, 0.0, varphi, false)?;
    let spectrometer = SpectrometerModel::uniform(resolution_sigma, bins.0, bins.1, bins.2).map_err(to_py)?;
    let run = detection::run_phase_sweep(&s, &phases, &spectrometer, n_per_phase, seed).map_err(to_py)?;
    Ok(PyPhaseSweep { run })
}

#[pymodule]
fn zwm_sim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCavityParams>()?;
    m.add_class::<PySampleModel>()?;
    m.add_class::<PyPhaseSweep>()?;
    m.add_function(wrap_pyfunction!(phase_mismatch_factor, m)?)?;
    m.add_function(wrap_pyfunction!(cavity_lineshape, m)?)?;
    m.add_function(wrap_pyfunction!(default_comb_range, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(good_cavity_deviation, m)?)?;
    m.add_function(wrap_pyfunction!(visibility_table, m)?)?;
    m.add_function(wrap_pyfunction!(visibility_from_transmission, m)?)?;
    m.add_function(wrap_pyfunction!(invert_visibility, m)?)?;
    m.add_function(wrap_pyfunction!(fringe_visibility, m)?)?;
    m.add_function(wrap_pyfunction!(phase_sweep, m)?)?;
    Ok(())
}
