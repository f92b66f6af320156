//! One-pair biphoton state of a cavity-enhanced down-converter and of the
//! two-crystal interferometer, as a complex amplitude over an orthonormal
//! basis labelled by (branch, comb mode `m`, offset `Omega`).
//!
//! The signal photon of basis element `(m, Omega)` sits at
//! `omega_s + m fsr + Omega` and its idler partner at
//! `omega_i - m fsr - Omega`, so every element conserves energy.

use ndarray::Array3;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sample::SampleModel;
use crate::spectral::{
    cavity_lineshape, lorentzian, phase_mismatch_factor, CavityParams, CombIndexRange, FrequencyGrid,
};
use crate::spectrum::{Fidelity, Phases, Spectrum, SAMPLES_PER_GAMMA};

/// Offsets must reach at least this many linewidths on each side.
pub const MIN_HALF_SPAN_GAMMAS: f64 = 25.0;

/// Offset grids coarser than `gamma / 5` are rejected outright.
pub const MAX_OFFSET_SPACING_GAMMAS: f64 = 0.2;

/// Which crystal emitted the signal and which port holds the idler.
///
/// There is no signal-1 / vacuum-port branch: the first crystal's idler never
/// meets the sample's unused port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Branch {
    /// Signal from crystal 1, idler-1.
    S1I1,
    /// Signal from crystal 2, idler-1 transmitted through the sample.
    S2I1,
    /// Signal from crystal 2, idler from the sample's vacuum port.
    S2I0,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateKind {
    SingleCavity,
    Interferometer { sample: SampleModel, idler_phase: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Photon {
    Signal,
    Idler,
}

#[derive(Debug, Clone)]
pub struct BiphotonState {
    params: CavityParams,
    comb: CombIndexRange,
    offsets: FrequencyGrid,
    kind: StateKind,
    normalization: f64,
    /// Shape `(branch, mode, offset)`, branches in [`BiphotonState::branches`] order.
    amplitudes: Array3<Complex64>,
}

impl BiphotonState {
    pub fn params(&self) -> &CavityParams {
        &self.params
    }

    pub fn comb(&self) -> &CombIndexRange {
        &self.comb
    }

    pub fn offsets(&self) -> &FrequencyGrid {
        &self.offsets
    }

    pub fn kind(&self) -> &StateKind {
        &self.kind
    }

    /// The normalization constant `N`.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn amplitudes(&self) -> &Array3<Complex64> {
        &self.amplitudes
    }

    pub fn branches(&self) -> &'static [Branch] {
        match self.kind {
            StateKind::SingleCavity => &[Branch::S1I1],
            StateKind::Interferometer { .. } => &[Branch::S1I1, Branch::S2I1, Branch::S2I0],
        }
    }

    pub fn branch_index(&self, branch: Branch) -> Option<usize> {
        self.branches().iter().position(|&b| b == branch)
    }

    pub fn signal_frequency(&self, m: i32, offset: f64) -> f64 {
        self.params.signal_mode(m) + offset
    }

    pub fn idler_frequency(&self, m: i32, offset: f64) -> f64 {
        self.params.idler_mode(m) - offset
    }

    /// Amplitude of basis element `(branch, m, offset)` at any offset, not
    /// only on the stored grid. Zero for branches the state does not carry.
    pub fn amplitude_at(&self, branch: Branch, m: i32, offset: f64) -> Complex64 {
        let base = phase_mismatch_factor(m, &self.params) * cavity_lineshape(offset, self.params.gamma());
        base * self.normalization * self.branch_coefficient(branch, self.idler_frequency(m, offset))
    }

    /// Branch factor multiplying the common `N Phi_m L(Omega)` amplitude.
    fn branch_coefficient(&self, branch: Branch, idler: f64) -> Complex64 {
        match (&self.kind, branch) {
            (_, Branch::S1I1) => Complex64::new(1.0, 0.0),
            (StateKind::SingleCavity, _) => Complex64::new(0.0, 0.0),
            (StateKind::Interferometer { sample, idler_phase }, Branch::S2I1) => {
                sample.transmissivity(idler).conj() * Complex64::from_polar(1.0, *idler_phase)
            }
            (StateKind::Interferometer { sample, idler_phase }, Branch::S2I0) => {
                Complex64::from_polar(sample.rear_reflectivity(idler), *idler_phase)
            }
        }
    }

    /// Total squared norm with trapezoidal weights over the offsets.
    pub fn norm(&self) -> f64 {
        weighted_norm(&self.amplitudes, &self.offsets.trapezoid_weights())
    }

    /// `|amplitude|^2` summed over branches at a stored sample.
    pub fn branch_weight(&self, mode_index: usize, offset_index: usize) -> f64 {
        (0..self.amplitudes.dim().0)
            .map(|b| self.amplitudes[[b, mode_index, offset_index]].norm_sqr())
            .sum()
    }

    fn fill(&self) -> Array3<Complex64> {
        let branches = self.branches();
        let offsets = self.offsets.values();
        let modes: Vec<i32> = self.comb.iter().collect();
        let shape = (branches.len(), modes.len(), offsets.len());
        let flat: Vec<Complex64> = (0..shape.0 * shape.1)
            .into_par_iter()
            .flat_map_iter(|bm| {
                let (branch, m) = (branches[bm / shape.1], modes[bm % shape.1]);
                offsets.iter().map(move |&o| self.amplitude_at(branch, m, o))
            })
            .collect();
        Array3::from_shape_vec(shape, flat).expect("shape matches element count")
    }
}

fn weighted_norm(amplitudes: &Array3<Complex64>, weights: &[f64]) -> f64 {
    let (nb, nm, _) = amplitudes.dim();
    let mut total = 0.0;
    for b in 0..nb {
        for m in 0..nm {
            for (k, w) in weights.iter().enumerate() {
                total += w * amplitudes[[b, m, k]].norm_sqr();
            }
        }
    }
    total
}

fn check_offsets(offsets: &FrequencyGrid, gamma: f64) -> Result<()> {
    offsets.check_resolves(gamma, 1.0 / MAX_OFFSET_SPACING_GAMMAS)?;
    let half_span = (-offsets.start()).min(offsets.stop());
    let required = MIN_HALF_SPAN_GAMMAS * gamma;
    if half_span < required * (1.0 - 1e-12) {
        return Err(Error::GridTooNarrow { half_span, required });
    }
    Ok(())
}

/// Offset grid `±half_span_gammas * gamma` with `samples_per_gamma` samples per linewidth.
pub fn offset_grid(gamma: f64, half_span_gammas: f64, samples_per_gamma: f64) -> Result<FrequencyGrid> {
    let half = half_span_gammas * gamma;
    FrequencyGrid::with_max_spacing(-half, half, gamma / samples_per_gamma)
}

/// Single down-converter in a signal-resonant cavity, normalized to unit norm
/// on the truncated offset grid.
pub fn build_single_cavity_state(
    params: &CavityParams,
    comb: &CombIndexRange,
    offsets: &FrequencyGrid,
) -> Result<BiphotonState> {
    check_offsets(offsets, params.gamma())?;
    let mut state = BiphotonState {
        params: *params,
        comb: *comb,
        offsets: offsets.clone(),
        kind: StateKind::SingleCavity,
        normalization: 1.0,
        amplitudes: Array3::zeros((0, 0, 0)),
    };
    let raw = state.fill();
    let norm = weighted_norm(&raw, &offsets.trapezoid_weights());
    let scale = 1.0 / norm.sqrt();
    state.normalization = scale;
    state.amplitudes = raw.mapv(|a| a * scale);
    Ok(state)
}

/// Sends idler-1 through the sample into the second crystal, producing the
/// three-branch interferometer state, renormalized to unit norm.
///
/// For a lossless sample `|T|^2 + |R'|^2 = 1`, so the unnormalized norm is
/// exactly twice the input norm and `N` drops by `sqrt(2)`.
pub fn apply_sample_and_second_crystal(
    state: &BiphotonState,
    sample: &SampleModel,
    idler_phase: f64,
) -> Result<BiphotonState> {
    if !matches!(state.kind, StateKind::SingleCavity) {
        return Err(Error::InvalidParams(
            "state has already passed through the sample".into(),
        ));
    }
    sample.validate()?;
    let mut next = BiphotonState {
        params: state.params,
        comb: state.comb,
        offsets: state.offsets.clone(),
        kind: StateKind::Interferometer {
            sample: sample.clone(),
            idler_phase,
        },
        normalization: state.normalization,
        amplitudes: Array3::zeros((0, 0, 0)),
    };
    let raw = next.fill();
    let norm = weighted_norm(&raw, &next.offsets.trapezoid_weights());
    let scale = 1.0 / norm.sqrt();
    next.normalization *= scale;
    next.amplitudes = raw.mapv(|a| a * scale);
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalSpectrum {
    pub grid: FrequencyGrid,
    pub values: Vec<f64>,
    pub which: Photon,
}

impl MarginalSpectrum {
    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn normalized(&self) -> Result<Self> {
        let total = self.integral();
        if !(total > 0.0) {
            return Err(Error::CannotNormalize(total));
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v / total).collect(),
            which: self.which,
        })
    }
}

/// Single-photon spectrum of the signal or idler, summed over branches and
/// comb modes (modes are orthogonal, so no cross terms).
pub fn marginal_spectrum(state: &BiphotonState, which: Photon, grid: &FrequencyGrid) -> Result<MarginalSpectrum> {
    let p = state.params;
    grid.check_resolves(p.gamma(), SAMPLES_PER_GAMMA)?;
    let n2 = state.normalization * state.normalization;
    let values = grid
        .values()
        .par_iter()
        .map(|&w| {
            state
                .comb
                .iter()
                .map(|m| {
                    // Offset of the partner pair inside mode m.
                    let offset = match which {
                        Photon::Signal => w - p.signal_mode(m),
                        Photon::Idler => p.idler_mode(m) - w,
                    };
                    let idler = state.idler_frequency(m, offset);
                    let branch_sum: f64 = state
                        .branches()
                        .iter()
                        .map(|&b| state.branch_coefficient(b, idler).norm_sqr())
                        .sum();
                    n2 * phase_mismatch_factor(m, &p).norm_sqr() * lorentzian(offset, p.gamma()) * branch_sum
                })
                .sum()
        })
        .collect();
    Ok(MarginalSpectrum {
        grid: grid.clone(),
        values,
        which,
    })
}

/// Detector spectrum computed directly from the state amplitudes.
///
/// For a signal frequency `omega` every comb mode pairs with the same idler-1
/// frequency `omega_p - omega`, so the idler-1 projection of the detector
/// field `a1 + exp(i phi) a2` is the coherent sum over `m` of the S1I1 and
/// S2I1 amplitudes. The result is divided by `N^2` to share the global scale
/// of the closed-form spectra.
pub fn correlation_spectrum_oracle(state: &BiphotonState, signal_phase: f64, grid: &FrequencyGrid) -> Result<Spectrum> {
    let p = state.params;
    grid.check_resolves(p.gamma(), SAMPLES_PER_GAMMA)?;
    let rotate = Complex64::from_polar(1.0, signal_phase);
    let n2 = state.normalization * state.normalization;
    let values = grid
        .values()
        .par_iter()
        .map(|&w| {
            let field: Complex64 = state
                .comb
                .iter()
                .map(|m| {
                    let offset = w - p.signal_mode(m);
                    state.amplitude_at(Branch::S1I1, m, offset) + rotate * state.amplitude_at(Branch::S2I1, m, offset)
                })
                .sum();
            field.norm_sqr() / n2
        })
        .collect();
    let idler = match state.kind {
        StateKind::Interferometer { idler_phase, .. } => idler_phase,
        StateKind::SingleCavity => 0.0,
    };
    Ok(Spectrum {
        grid: grid.clone(),
        values,
        fidelity: Fidelity::CorrelationOracle,
        phases: Phases::new(signal_phase, idler),
        residual_imag: 0.0,
    })
}
