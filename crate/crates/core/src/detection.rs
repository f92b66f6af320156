//! Monte Carlo model of a comb-resolving spectrometer behind the
//! interferometer: photon frequencies drawn from a spectrum, Gaussian
//! instrument response, binning, phase sweeps and fringe fits.
//!
//! Random streams: every draw comes from `ChaCha8Rng::seed_from_u64(seed)`
//! with `set_stream(k)`, where `k` is the phase index of a sweep (and 0 for
//! [`sample_photons`]). Phases are therefore reproducible no matter how they
//! are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{distinct_phase_count, fit_cosine};
use crate::spectral::FrequencyGrid;
use crate::spectrum::{compute_comb_resolved_envelope, compute_spectrum_comb_resolved, Spectrum, ZwmSetup};

/// Minimum counts in a mode bin, summed over phases, for a visibility estimate.
pub const MIN_MODE_COUNTS: u64 = 100;

/// Sampling grid used by [`run_phase_sweep`], in samples per linewidth.
pub const SWEEP_SAMPLES_PER_GAMMA: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrometerModel {
    resolution_sigma: f64,
    bin_edges: Vec<f64>,
}

impl SpectrometerModel {
    pub fn new(resolution_sigma: f64, bin_edges: Vec<f64>) -> Result<Self> {
        if !(resolution_sigma >= 0.0 && resolution_sigma.is_finite()) {
            return Err(Error::InvalidSpectrometer(format!(
                "resolution sigma must be finite and non-negative, got {resolution_sigma}"
            )));
        }
        if bin_edges.len() < 2 {
            return Err(Error::InvalidSpectrometer("need at least two bin edges".into()));
        }
        if !bin_edges.windows(2).all(|w| w[1] > w[0]) || !bin_edges.iter().all(|e| e.is_finite()) {
            return Err(Error::InvalidSpectrometer(
                "bin edges must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self {
            resolution_sigma,
            bin_edges,
        })
    }

    pub fn uniform(resolution_sigma: f64, start: f64, stop: f64, n_bins: usize) -> Result<Self> {
        let grid =
            FrequencyGrid::new(start, stop, n_bins + 1).map_err(|e| Error::InvalidSpectrometer(e.to_string()))?;
        Self::new(resolution_sigma, grid.values().to_vec())
    }

    pub fn resolution_sigma(&self) -> f64 {
        self.resolution_sigma
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn n_bins(&self) -> usize {
        self.bin_edges.len() - 1
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Comb teeth are resolved when the instrument response is narrower than a
    /// quarter of the free spectral range.
    pub fn is_comb_resolving(&self, fsr: f64) -> bool {
        self.resolution_sigma < 0.25 * fsr
    }

    fn bin_of(&self, omega: f64) -> Option<usize> {
        let edges = &self.bin_edges;
        if omega < edges[0] || omega >= edges[edges.len() - 1] {
            return None;
        }
        Some(edges.partition_point(|&e| e <= omega) - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BinnedCounts {
    pub counts: Vec<u64>,
    /// Photons that landed outside the spectrometer window.
    pub out_of_window: u64,
}

impl BinnedCounts {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.out_of_window
    }
}

/// Inverse-CDF sampler for a non-negative spectrum, piecewise linear between
/// grid samples.
#[derive(Debug, Clone)]
pub struct PhotonSampler {
    xs: Vec<f64>,
    ys: Vec<f64>,
    cdf: Vec<f64>,
}

impl PhotonSampler {
    pub fn new(spectrum: &Spectrum) -> Result<Self> {
        let xs = spectrum.grid.values().to_vec();
        let ys = spectrum.values.clone();
        if ys.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::CannotNormalize(f64::NAN));
        }
        if xs.len() < 2 {
            return Err(Error::CannotNormalize(0.0));
        }
        let mut cdf = Vec::with_capacity(xs.len());
        cdf.push(0.0);
        for i in 1..xs.len() {
            let seg = 0.5 * (ys[i - 1] + ys[i]) * (xs[i] - xs[i - 1]);
            cdf.push(cdf[i - 1] + seg);
        }
        let total = cdf[cdf.len() - 1];
        if !(total > 0.0) {
            return Err(Error::CannotNormalize(total));
        }
        Ok(Self { xs, ys, cdf })
    }

    pub fn total(&self) -> f64 {
        self.cdf[self.cdf.len() - 1]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let target = rng.random::<f64>() * self.total();
        let i = self.cdf.partition_point(|&c| c <= target).clamp(1, self.xs.len() - 1);
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (f0, f1) = (self.ys[i - 1], self.ys[i]);
        let h = x1 - x0;
        let r = target - self.cdf[i - 1];
        // Solve f0 s + k s^2 / 2 = r for the linear density f0 + k s.
        let k = (f1 - f0) / h;
        let disc = (f0 * f0 + 2.0 * k * r).max(0.0);
        let denom = f0 + disc.sqrt();
        let s = if denom > 0.0 { 2.0 * r / denom } else { 0.0 };
        x0 + s.clamp(0.0, h)
    }
}

fn draw_and_bin<R: Rng + ?Sized>(
    rng: &mut R,
    sampler: &PhotonSampler,
    spectrometer: &SpectrometerModel,
    n: u64,
) -> BinnedCounts {
    let mut counts = vec![0u64; spectrometer.n_bins()];
    let mut out_of_window = 0;
    let jitter = (spectrometer.resolution_sigma > 0.0)
        .then(|| Normal::new(0.0, spectrometer.resolution_sigma).expect("sigma validated"));
    for _ in 0..n {
        let mut omega = sampler.sample(rng);
        if let Some(j) = &jitter {
            omega += j.sample(rng);
        }
        match spectrometer.bin_of(omega) {
            Some(b) => counts[b] += 1,
            None => out_of_window += 1,
        }
    }
    BinnedCounts { counts, out_of_window }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws `n` photon frequencies from the normalized spectrum, blurs them by
/// the instrument response and bins them.
pub fn sample_photons(
    spectrum: &Spectrum,
    spectrometer: &SpectrometerModel,
    n: u64,
    seed: u64,
) -> Result<BinnedCounts> {
    if n == 0 {
        return Ok(BinnedCounts {
            counts: vec![0; spectrometer.n_bins()],
            out_of_window: 0,
        });
    }
    let sampler = PhotonSampler::new(spectrum)?;
    Ok(draw_and_bin(&mut stream_rng(seed, 0), &sampler, spectrometer, n))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementRun {
    pub seed: u64,
    pub n_photons_per_phase: u64,
    pub phases: Vec<f64>,
    pub bin_edges: Vec<f64>,
    /// `counts[phase][bin]`.
    pub counts: Vec<Vec<u64>>,
    pub out_of_window: Vec<u64>,
    /// Trials that produced no detected photon at this phase.
    pub undetected: Vec<u64>,
    pub omega_signal: f64,
    pub fsr: f64,
}

impl MeasurementRun {
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Bins whose centers lie in `[-fsr/2, fsr/2)` around signal mode `m`.
    pub fn mode_bins(&self, m: i32) -> Vec<usize> {
        let center = self.omega_signal + f64::from(m) * self.fsr;
        let half = 0.5 * self.fsr;
        self.bin_centers()
            .iter()
            .enumerate()
            .filter(|(_, c)| {
                let d = **c - center;
                d >= -half && d < half
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Counts in the mode-`m` bin at each phase.
    pub fn mode_counts(&self, m: i32) -> Vec<u64> {
        let bins = self.mode_bins(m);
        self.counts
            .iter()
            .map(|row| bins.iter().map(|&b| row[b]).sum())
            .collect()
    }
}

/// Grid that covers the spectrometer window plus five instrument widths.
pub fn sweep_sampling_grid(setup: &ZwmSetup, spectrometer: &SpectrometerModel) -> Result<FrequencyGrid> {
    let edges = spectrometer.bin_edges();
    let pad = 5.0 * spectrometer.resolution_sigma();
    FrequencyGrid::with_max_spacing(
        edges[0] - pad,
        edges[edges.len() - 1] + pad,
        setup.params.gamma() / SWEEP_SAMPLES_PER_GAMMA,
    )
}

/// Simulates a fringe measurement over `phases` (signal phase values).
///
/// Each phase runs `n_per_phase` fixed trials against the phase-maximal
/// comb-resolved envelope: a trial yields a photon with probability
/// `int S_phi / int S_envelope`, so detected counts follow the interference
/// fringe while each phase stays a fixed-n multinomial experiment.
pub fn run_phase_sweep(
    setup: &ZwmSetup,
    phases: &[f64],
    spectrometer: &SpectrometerModel,
    n_per_phase: u64,
    seed: u64,
) -> Result<MeasurementRun> {
    if !spectrometer.is_comb_resolving(setup.params.fsr()) {
        log::warn!(
            "resolution sigma {} is not below fsr/4 = {}; comb modes will blend",
            spectrometer.resolution_sigma(),
            0.25 * setup.params.fsr()
        );
    }
    let grid = sweep_sampling_grid(setup, spectrometer)?;
    let envelope = compute_comb_resolved_envelope(setup, &grid)?;
    let envelope_total = envelope.integral();
    if !(envelope_total > 0.0) {
        return Err(Error::CannotNormalize(envelope_total));
    }

    let per_phase: Vec<(BinnedCounts, u64)> = phases
        .par_iter()
        .enumerate()
        .map(|(k, &phi)| {
            let spectrum = compute_spectrum_comb_resolved(&setup.with_signal_phase(phi), &grid)?;
            let p_detect = (spectrum.integral() / envelope_total).clamp(0.0, 1.0);
            let mut rng = stream_rng(seed, k as u64);
            let detected = Binomial::new(n_per_phase, p_detect)
                .map_err(|e| Error::Estimation(e.to_string()))?
                .sample(&mut rng);
            let binned = if detected == 0 {
                BinnedCounts {
                    counts: vec![0; spectrometer.n_bins()],
                    out_of_window: 0,
                }
            } else {
                let sampler = PhotonSampler::new(&spectrum)?;
                draw_and_bin(&mut rng, &sampler, spectrometer, detected)
            };
            Ok((binned, n_per_phase - detected))
        })
        .collect::<Result<_>>()?;

    let mut counts = Vec::with_capacity(phases.len());
    let mut out_of_window = Vec::with_capacity(phases.len());
    let mut undetected = Vec::with_capacity(phases.len());
    for (b, u) in per_phase {
        counts.push(b.counts);
        out_of_window.push(b.out_of_window);
        undetected.push(u);
    }
    Ok(MeasurementRun {
        seed,
        n_photons_per_phase: n_per_phase,
        phases: phases.to_vec(),
        bin_edges: spectrometer.bin_edges().to_vec(),
        counts,
        out_of_window,
        undetected,
        omega_signal: setup.params.omega_signal(),
        fsr: setup.params.fsr(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VisibilityEstimate {
    pub m: i32,
    pub visibility: f64,
    pub std_err: f64,
    pub total_counts: u64,
}

/// Poisson-weighted cosine fit of the mode-`m` counts across the sweep.
pub fn estimate_visibility(run: &MeasurementRun, m: i32) -> Result<VisibilityEstimate> {
    if distinct_phase_count(&run.phases) < 3 {
        return Err(Error::Estimation("need at least 3 distinct phases".into()));
    }
    if run.mode_bins(m).is_empty() {
        return Err(Error::Estimation(format!(
            "mode {m} lies outside the spectrometer window"
        )));
    }
    let counts = run.mode_counts(m);
    let total: u64 = counts.iter().sum();
    if total < MIN_MODE_COUNTS {
        return Err(Error::LowStatistics {
            mode: m,
            counts: total,
            required: MIN_MODE_COUNTS,
        });
    }
    let y: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let weights: Vec<f64> = y.iter().map(|&c| 1.0 / c.max(1.0)).collect();
    let fit = fit_cosine(&run.phases, &y, Some(&weights))?;
    let v = fit.visibility()?;
    Ok(VisibilityEstimate {
        m,
        visibility: v.clamp(0.0, 1.0),
        std_err: fit.visibility_std_err(),
        total_counts: total,
    })
}

/// Standard error of `T_hat = invert_visibility(V)` from that of `V`.
pub fn transmission_std_err(visibility: f64, std_err: f64) -> f64 {
    let v = visibility.clamp(1e-12, 1.0);
    let s = ((1.0 - v) * (1.0 + v)).sqrt();
    if s == 0.0 {
        return f64::INFINITY;
    }
    // d/dV [V / (1 + s)] with s = sqrt(1 - V^2).
    let derivative = 1.0 / (s * (1.0 + s));
    derivative * std_err
}
