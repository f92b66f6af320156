//! Output signal spectra of the cavity-enhanced ZWM interferometer at three
//! levels of approximation, per-mode fringe visibility, and the inversion of
//! visibility back to the sample's transmission magnitude.
//!
//! All spectra share one global scale: a single-mode spectrum with an opaque
//! sample peaks at `4 / gamma`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::fit_cosine;
use crate::sample::SampleModel;
use crate::spectral::{
    cavity_lineshape, lorentzian, phase_mismatch_factor, CavityParams, CombIndexRange, FrequencyGrid,
};

/// Closed-form spectra require at least this many samples per linewidth.
pub const SAMPLES_PER_GAMMA: f64 = 10.0;

/// Above this `gamma / fsr` the good-cavity forms are not trustworthy.
pub const GOOD_CAVITY_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    /// Coherent double sum over comb modes.
    Full,
    /// Incoherent single sum over well-separated modes.
    GoodCavity,
    /// Good-cavity sum with `T` frozen at each mode's idler frequency.
    CombResolved,
    /// Built from the biphoton state amplitudes rather than a closed form.
    CorrelationOracle,
}

/// How the interference term treats the phase of a complex `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossTerm {
    /// `2|T| cos(phi + varphi - arg T)`, what the state's amplitudes produce.
    #[default]
    Generalized,
    /// `2|T| cos(phi + varphi)`, dropping `arg T`.
    PaperExact,
}

/// Relative signal-1/signal-2 phase and the idler propagation phase.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Phases {
    pub signal: f64,
    pub idler: f64,
}

impl Phases {
    pub fn new(signal: f64, idler: f64) -> Self {
        Self { signal, idler }
    }

    pub fn total(&self) -> f64 {
        self.signal + self.idler
    }
}

/// Everything a spectrum evaluation depends on besides the frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ZwmSetup {
    pub params: CavityParams,
    pub sample: SampleModel,
    pub comb: CombIndexRange,
    pub phases: Phases,
    pub cross_term: CrossTerm,
}

impl ZwmSetup {
    pub fn new(params: CavityParams, sample: SampleModel, comb: CombIndexRange, phases: Phases) -> Self {
        Self {
            params,
            sample,
            comb,
            phases,
            cross_term: CrossTerm::Generalized,
        }
    }

    pub fn with_signal_phase(&self, signal: f64) -> Self {
        let mut s = self.clone();
        s.phases.signal = signal;
        s
    }

    pub fn with_cross_term(mut self, cross_term: CrossTerm) -> Self {
        self.cross_term = cross_term;
        self
    }

    fn check(&self, grid: &FrequencyGrid) -> Result<()> {
        self.sample.validate()?;
        grid.check_resolves(self.params.gamma(), SAMPLES_PER_GAMMA)
    }

    fn bracket(&self, t: Complex64) -> f64 {
        interference_bracket(t, self.phases.total(), self.cross_term)
    }
}

/// `1 + |T|^2 + 2|T| cos(phase_sum - arg T)` (or without `arg T`).
pub fn interference_bracket(t: Complex64, phase_sum: f64, cross_term: CrossTerm) -> f64 {
    let mag = t.norm();
    let angle = match cross_term {
        CrossTerm::Generalized if mag > 0.0 => phase_sum - t.arg(),
        _ => phase_sum,
    };
    1.0 + mag * mag + 2.0 * mag * angle.cos()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub grid: FrequencyGrid,
    pub values: Vec<f64>,
    pub fidelity: Fidelity,
    pub phases: Phases,
    /// Largest imaginary part left over by the real-valued extraction.
    pub residual_imag: f64,
}

impl Spectrum {
    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    /// Linear interpolation at `omega`, zero outside the grid.
    pub fn value_at(&self, omega: f64) -> f64 {
        let xs = self.grid.values();
        if xs.len() == 1 {
            return if omega == xs[0] { self.values[0] } else { 0.0 };
        }
        if omega < xs[0] || omega > xs[xs.len() - 1] {
            return 0.0;
        }
        let h = self.grid.spacing();
        let pos = (omega - xs[0]) / h;
        let i = (pos.floor() as usize).min(xs.len() - 2);
        let frac = pos - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }
}

/// Full coherent spectrum at one frequency, returned as (real, imaginary).
pub fn full_at(setup: &ZwmSetup, omega: f64) -> (f64, f64) {
    let p = &setup.params;
    let gamma = p.gamma();
    let terms: Vec<Complex64> = setup
        .comb
        .iter()
        .map(|m| phase_mismatch_factor(m, p) * cavity_lineshape(omega - p.signal_mode(m), gamma))
        .collect();
    // Explicit (m', m) double sum; the (m, m') and (m', m) terms are
    // conjugates, so any imaginary part is rounding.
    let mut sum = Complex64::new(0.0, 0.0);
    for a in &terms {
        let ac = a.conj();
        for b in &terms {
            sum += ac * b;
        }
    }
    let t = setup.sample.transmissivity(p.omega_pump() - omega);
    let bracket = setup.bracket(t);
    (sum.re * bracket, sum.im * bracket)
}

pub fn good_cavity_at(setup: &ZwmSetup, omega: f64) -> f64 {
    let p = &setup.params;
    let bracket = setup.bracket(setup.sample.transmissivity(p.omega_pump() - omega));
    // Same per-term grouping as `comb_resolved_at`, so a flat sample gives
    // bit-identical results from both.
    setup
        .comb
        .iter()
        .map(|m| phase_mismatch_factor(m, p).norm_sqr() * lorentzian(omega - p.signal_mode(m), p.gamma()) * bracket)
        .sum()
}

/// Per-mode factors of the comb-resolved form: (peak frequency, `|Phi_m|^2`,
/// bracket at the mode's idler frequency).
fn comb_mode_terms(setup: &ZwmSetup, envelope: bool) -> Vec<(f64, f64, f64)> {
    let p = &setup.params;
    setup
        .comb
        .iter()
        .map(|m| {
            let t = setup.sample.transmissivity(p.idler_mode(m));
            let bracket = if envelope {
                (1.0 + t.norm()) * (1.0 + t.norm())
            } else {
                setup.bracket(t)
            };
            (p.signal_mode(m), phase_mismatch_factor(m, p).norm_sqr(), bracket)
        })
        .collect()
}

fn sum_comb_terms(terms: &[(f64, f64, f64)], omega: f64, gamma: f64) -> f64 {
    terms
        .iter()
        .map(|&(center, weight, bracket)| weight * lorentzian(omega - center, gamma) * bracket)
        .sum()
}

pub fn comb_resolved_at(setup: &ZwmSetup, omega: f64) -> f64 {
    sum_comb_terms(&comb_mode_terms(setup, false), omega, setup.params.gamma())
}

/// Comb-resolved spectrum with every mode at its fringe maximum `(1 + |T_m|)^2`.
/// Bounds the comb-resolved spectrum from above for every signal phase.
pub fn comb_resolved_envelope_at(setup: &ZwmSetup, omega: f64) -> f64 {
    sum_comb_terms(&comb_mode_terms(setup, true), omega, setup.params.gamma())
}

fn warn_if_not_good_cavity(params: &CavityParams) {
    if params.gamma_over_fsr() > GOOD_CAVITY_LIMIT {
        log::warn!(
            "gamma/fsr = {:.3} exceeds {GOOD_CAVITY_LIMIT}; good-cavity spectra are unreliable",
            params.gamma_over_fsr()
        );
    }
}

fn evaluate<F>(setup: &ZwmSetup, grid: &FrequencyGrid, fidelity: Fidelity, f: F) -> Spectrum
where
    F: Fn(f64) -> f64 + Sync,
{
    let values = grid.values().par_iter().map(|&w| f(w)).collect();
    Spectrum {
        grid: grid.clone(),
        values,
        fidelity,
        phases: setup.phases,
        residual_imag: 0.0,
    }
}

pub fn compute_spectrum_full(setup: &ZwmSetup, grid: &FrequencyGrid) -> Result<Spectrum> {
    setup.check(grid)?;
    let pairs: Vec<(f64, f64)> = grid.values().par_iter().map(|&w| full_at(setup, w)).collect();
    let residual_imag = pairs.iter().map(|(_, im)| im.abs()).fold(0.0, f64::max);
    Ok(Spectrum {
        grid: grid.clone(),
        values: pairs.into_iter().map(|(re, _)| re.max(0.0)).collect(),
        fidelity: Fidelity::Full,
        phases: setup.phases,
        residual_imag,
    })
}

pub fn compute_spectrum_good_cavity(setup: &ZwmSetup, grid: &FrequencyGrid) -> Result<Spectrum> {
    setup.check(grid)?;
    warn_if_not_good_cavity(&setup.params);
    Ok(evaluate(setup, grid, Fidelity::GoodCavity, |w| {
        good_cavity_at(setup, w)
    }))
}

pub fn compute_spectrum_comb_resolved(setup: &ZwmSetup, grid: &FrequencyGrid) -> Result<Spectrum> {
    setup.check(grid)?;
    warn_if_not_good_cavity(&setup.params);
    let terms = comb_mode_terms(setup, false);
    Ok(evaluate(setup, grid, Fidelity::CombResolved, |w| {
        sum_comb_terms(&terms, w, setup.params.gamma())
    }))
}

pub fn compute_comb_resolved_envelope(setup: &ZwmSetup, grid: &FrequencyGrid) -> Result<Spectrum> {
    setup.check(grid)?;
    let terms = comb_mode_terms(setup, true);
    Ok(evaluate(setup, grid, Fidelity::CombResolved, |w| {
        sum_comb_terms(&terms, w, setup.params.gamma())
    }))
}

/// Spectrum values read exactly at each retained comb peak `omega_s + m fsr`.
pub fn comb_peak_values(setup: &ZwmSetup, fidelity: Fidelity) -> Vec<(i32, f64)> {
    setup
        .comb
        .iter()
        .map(|m| {
            let w = setup.params.signal_mode(m);
            let v = match fidelity {
                Fidelity::Full | Fidelity::CorrelationOracle => full_at(setup, w).0,
                Fidelity::GoodCavity => good_cavity_at(setup, w),
                Fidelity::CombResolved => comb_resolved_at(setup, w),
            };
            (m, v)
        })
        .collect()
}

/// `max_m |A_m - B_m| / max_m |A_m|` over the comb peaks of two fidelity levels.
pub fn peak_deviation(setup: &ZwmSetup, reference: Fidelity, approx: Fidelity) -> f64 {
    let a = comb_peak_values(setup, reference);
    let b = comb_peak_values(setup, approx);
    let scale = a.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
    let diff = a
        .iter()
        .zip(&b)
        .map(|((_, x), (_, y))| (x - y).abs())
        .fold(0.0, f64::max);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VisibilityRow {
    pub m: i32,
    pub omega_signal: f64,
    pub omega_idler: f64,
    pub visibility: f64,
    pub t_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisibilityTable {
    pub rows: Vec<VisibilityRow>,
}

/// `2t / (1 + t^2)`: fringe visibility for transmission magnitude `t`.
pub fn visibility_from_transmission(t: f64) -> f64 {
    2.0 * t / (1.0 + t * t)
}

/// Per-mode visibility with `|T|` sampled at each mode's phase-matched idler
/// frequency, plus the inverted transmission as a consistency column.
pub fn visibility(params: &CavityParams, sample: &SampleModel, comb: &CombIndexRange) -> Result<VisibilityTable> {
    sample.validate()?;
    let rows = comb
        .iter()
        .map(|m| {
            let omega_idler = params.idler_mode(m);
            let v = visibility_from_transmission(sample.transmissivity(omega_idler).norm()).min(1.0);
            Ok(VisibilityRow {
                m,
                omega_signal: params.signal_mode(m),
                omega_idler,
                visibility: v,
                t_hat: invert_visibility(v)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(VisibilityTable { rows })
}

/// The `|T| <= 1` root of `V t^2 - 2t + V = 0`.
pub fn invert_visibility(v: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain {
            value: v,
            domain: "[0, 1]",
        });
    }
    // (1 - sqrt(1 - V^2)) / V rationalized; (1-V)(1+V) keeps 1 - V^2 accurate near 1.
    Ok(v / (1.0 + ((1.0 - v) * (1.0 + v)).sqrt()))
}

/// Fringe visibility of a phase sweep of comb-peak intensities via a
/// least-squares fit of `a + b cos(phi + c)`; returns `b / a`.
pub fn fringe_visibility_from_phase_sweep(peak_values: &[(f64, f64)]) -> Result<f64> {
    let (phases, values): (Vec<f64>, Vec<f64>) = peak_values.iter().copied().unzip();
    fit_cosine(&phases, &values, None)?.visibility()
}

/// `(max - min) / (max + min)` of a sampled fringe.
pub fn min_max_visibility(values: &[f64]) -> Result<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max + min > 0.0) {
        return Err(Error::Estimation("fringe has no positive intensity".into()));
    }
    Ok((max - min) / (max + min))
}
