//! Cavity parameters, comb geometry and the two spectral factors every other
//! module is built from: the phase-mismatch envelope over comb modes and the
//! complex Lorentzian response of a single cavity-resonant mode.
//!
//! Frequencies are angular frequencies in arbitrary but consistent units.
//! Only the ratios `gamma / fsr` and `fsr * tau` change the physics, so all
//! regime checks are phrased in those ratios.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on comb modes per side when the sinc envelope does not truncate
/// the mode sum (tau = 0, or a tiny nonzero fsr * tau).
pub const MAX_MODES_PER_SIDE: i32 = 64;

/// Regime knobs of the whole simulation.
///
/// The idler center is always `omega_pump - omega_signal` and the finesse is
/// always `pi / gamma`; neither is stored independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CavityParams {
    gamma: f64,
    fsr: f64,
    tau: f64,
    omega_signal: f64,
    omega_pump: f64,
    omega_idler: f64,
}

impl CavityParams {
    /// `gamma` is the cavity damping rate, `fsr` the free spectral range and
    /// `tau` the signal/idler transit-time difference through the crystal
    /// (any sign).
    pub fn new(gamma: f64, fsr: f64, tau: f64, omega_signal: f64, omega_pump: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParams(format!("gamma must be positive, got {gamma}")));
        }
        if !(fsr.is_finite() && fsr > 0.0) {
            return Err(Error::InvalidParams(format!(
                "free spectral range must be positive, got {fsr}"
            )));
        }
        if !tau.is_finite() || !omega_signal.is_finite() || !omega_pump.is_finite() {
            return Err(Error::InvalidParams("non-finite tau or center frequency".into()));
        }
        Ok(Self {
            gamma,
            fsr,
            tau,
            omega_signal,
            omega_pump,
            omega_idler: omega_pump - omega_signal,
        })
    }

    /// Build from the dimensionless pair `(gamma / fsr, fsr * tau)` and an
    /// absolute free spectral range.
    pub fn from_ratios(
        gamma_over_fsr: f64,
        fsr_times_tau: f64,
        fsr: f64,
        omega_signal: f64,
        omega_pump: f64,
    ) -> Result<Self> {
        Self::new(gamma_over_fsr * fsr, fsr, fsr_times_tau / fsr, omega_signal, omega_pump)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn fsr(&self) -> f64 {
        self.fsr
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn omega_signal(&self) -> f64 {
        self.omega_signal
    }

    pub fn omega_pump(&self) -> f64 {
        self.omega_pump
    }

    pub fn omega_idler(&self) -> f64 {
        self.omega_idler
    }

    pub fn finesse(&self) -> f64 {
        PI / self.gamma
    }

    pub fn gamma_over_fsr(&self) -> f64 {
        self.gamma / self.fsr
    }

    pub fn fsr_times_tau(&self) -> f64 {
        self.fsr * self.tau
    }

    /// Center of the m-th cavity-resonant signal mode.
    pub fn signal_mode(&self, m: i32) -> f64 {
        self.omega_signal + f64::from(m) * self.fsr
    }

    /// Idler frequency phase-matched to the m-th signal mode.
    pub fn idler_mode(&self, m: i32) -> f64 {
        self.omega_idler - f64::from(m) * self.fsr
    }

    /// Same cavity with a different damping rate.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(gamma, self.fsr, self.tau, self.omega_signal, self.omega_pump)
    }
}

/// Crystal-in-resonator geometry from which `fsr` and `tau` are derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalGeometry {
    pub crystal_length: f64,
    pub resonator_length: f64,
    pub group_velocity_signal: f64,
    pub group_velocity_idler: f64,
    pub light_speed: f64,
}

impl PhysicalGeometry {
    pub fn validate(&self) -> Result<()> {
        let g = self;
        let finite = [
            g.crystal_length,
            g.resonator_length,
            g.group_velocity_signal,
            g.group_velocity_idler,
            g.light_speed,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidGeometry("non-finite value".into()));
        }
        if !(g.crystal_length > 0.0 && g.crystal_length <= g.resonator_length) {
            return Err(Error::InvalidGeometry(format!(
                "need 0 < crystal length ({}) <= resonator length ({})",
                g.crystal_length, g.resonator_length
            )));
        }
        if !(g.light_speed > 0.0) {
            return Err(Error::InvalidGeometry("light speed must be positive".into()));
        }
        for (name, v) in [
            ("signal group velocity", g.group_velocity_signal),
            ("idler group velocity", g.group_velocity_idler),
        ] {
            if !(v > 0.0 && v <= g.light_speed) {
                return Err(Error::InvalidGeometry(format!("{name} must lie in (0, c], got {v}")));
            }
        }
        Ok(())
    }

    /// Effective cavity round-trip time of the signal.
    pub fn round_trip_time(&self) -> f64 {
        2.0 * self.crystal_length / self.group_velocity_signal
            + 2.0 * (self.resonator_length - self.crystal_length) / self.light_speed
    }

    /// Idler minus signal transit time through the crystal.
    pub fn transit_time_difference(&self) -> f64 {
        self.crystal_length * (1.0 / self.group_velocity_idler - 1.0 / self.group_velocity_signal)
    }
}

pub fn derive_cavity_params(
    geometry: &PhysicalGeometry,
    omega_signal: f64,
    omega_pump: f64,
    gamma: f64,
) -> Result<CavityParams> {
    geometry.validate()?;
    let round_trip = geometry.round_trip_time();
    if !(round_trip > 0.0 && round_trip.is_finite()) {
        return Err(Error::InvalidGeometry(format!(
            "round-trip time must be positive, got {round_trip}"
        )));
    }
    CavityParams::new(
        gamma,
        2.0 * PI / round_trip,
        geometry.transit_time_difference(),
        omega_signal,
        omega_pump,
    )
}

/// `sin(x) / x`, continuous at zero.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Phase-mismatch weight of the m-th signal mode:
/// `sinc(m fsr tau / 2) * exp(-i m fsr tau / 2)`.
pub fn phase_mismatch_factor(m: i32, params: &CavityParams) -> Complex64 {
    let half = 0.5 * f64::from(m) * params.fsr * params.tau;
    Complex64::from_polar(1.0, -half) * sinc(half)
}

/// Complex mode response `sqrt(gamma) / (gamma/2 - i offset)`.
///
/// Its squared magnitude is a Lorentzian of FWHM `gamma` whose integral over
/// all offsets is `2 pi` for every `gamma`.
pub fn cavity_lineshape(offset: f64, gamma: f64) -> Complex64 {
    gamma.sqrt() / Complex64::new(0.5 * gamma, -offset)
}

/// `|cavity_lineshape|^2` without going through complex division.
pub fn lorentzian(offset: f64, gamma: f64) -> f64 {
    gamma / (0.25 * gamma * gamma + offset * offset)
}

/// Inclusive range of retained comb indices, always containing `m = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CombIndexRange {
    m_min: i32,
    m_max: i32,
}

impl CombIndexRange {
    pub fn new(m_min: i32, m_max: i32) -> Result<Self> {
        if m_min > m_max {
            return Err(Error::EmptyCombRange { m_min, m_max });
        }
        if m_min > 0 || m_max < 0 {
            return Err(Error::InvalidParams(format!(
                "comb range [{m_min}, {m_max}] must contain m = 0"
            )));
        }
        Ok(Self { m_min, m_max })
    }

    pub fn symmetric(half_width: i32) -> Self {
        let h = half_width.max(0);
        Self { m_min: -h, m_max: h }
    }

    pub fn single() -> Self {
        Self::symmetric(0)
    }

    pub fn m_min(&self) -> i32 {
        self.m_min
    }

    pub fn m_max(&self) -> i32 {
        self.m_max
    }

    pub fn len(&self) -> usize {
        (self.m_max - self.m_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, m: i32) -> bool {
        (self.m_min..=self.m_max).contains(&m)
    }

    pub fn iter(&self) -> std::ops::RangeInclusive<i32> {
        self.m_min..=self.m_max
    }

    /// Position of mode `m` in `iter()` order.
    pub fn index_of(&self, m: i32) -> Option<usize> {
        self.contains(m).then(|| (m - self.m_min) as usize)
    }
}

/// Outcome of [`default_comb_range`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CombTruncation {
    pub range: CombIndexRange,
    /// Set when the envelope did not truncate the sum and the hard cap was applied.
    pub capped: bool,
}

/// Smallest symmetric comb range that keeps every mode inside the first sinc
/// zero and every mode whose envelope weight `|Phi_m|^2` reaches `envelope_cut`.
pub fn default_comb_range(params: &CavityParams, envelope_cut: f64) -> Result<CombTruncation> {
    if !(envelope_cut > 0.0 && envelope_cut < 1.0) {
        return Err(Error::Domain {
            value: envelope_cut,
            domain: "(0, 1)",
        });
    }
    let x = (params.fsr * params.tau).abs();
    let capped = CombTruncation {
        range: CombIndexRange::symmetric(MAX_MODES_PER_SIDE),
        capped: true,
    };
    if x == 0.0 {
        log::warn!("tau = 0: flat phase-mismatch envelope, comb capped at ±{MAX_MODES_PER_SIDE}");
        return Ok(capped);
    }
    // First sinc zero sits at |m| x / 2 = pi.
    let first_zero = 2.0 * PI / x;
    if first_zero > f64::from(MAX_MODES_PER_SIDE) + 1.0 {
        log::warn!(
            "fsr*tau = {x:e} puts the first envelope zero at |m| = {first_zero:.1}; capping at ±{MAX_MODES_PER_SIDE}"
        );
        return Ok(capped);
    }
    let mut half = (first_zero.ceil() as i32 - 1).max(0);
    // Beyond |m| x / 2 > 1 / sqrt(cut), sinc^2 <= 1 / (m x / 2)^2 < cut.
    let bound = (2.0 / (x * envelope_cut.sqrt())).ceil() as i32 + 1;
    for m in (half + 1)..=bound {
        if phase_mismatch_factor(m, params).norm_sqr() >= envelope_cut {
            half = m;
        }
    }
    if half > MAX_MODES_PER_SIDE {
        log::warn!("envelope cut {envelope_cut} needs ±{half} modes; capping at ±{MAX_MODES_PER_SIDE}");
        return Ok(capped);
    }
    Ok(CombTruncation {
        range: CombIndexRange::symmetric(half),
        capped: false,
    })
}

/// Uniformly spaced, strictly increasing frequency samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyGrid {
    start: f64,
    stop: f64,
    #[serde(skip)]
    values: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(start: f64, stop: f64, n_points: usize) -> Result<Self> {
        if n_points == 0 {
            return Err(Error::InvalidGrid("n_points must be positive".into()));
        }
        if !start.is_finite() || !stop.is_finite() {
            return Err(Error::InvalidGrid("non-finite bounds".into()));
        }
        if n_points == 1 {
            if start != stop {
                return Err(Error::InvalidGrid("single-point grid needs start == stop".into()));
            }
            return Ok(Self {
                start,
                stop,
                values: vec![start],
            });
        }
        if !(stop > start) {
            return Err(Error::InvalidGrid(format!("need start < stop, got [{start}, {stop}]")));
        }
        let step = (stop - start) / (n_points - 1) as f64;
        let mut values: Vec<f64> = (0..n_points).map(|i| start + i as f64 * step).collect();
        values[n_points - 1] = stop;
        Ok(Self { start, stop, values })
    }

    /// Grid with spacing no larger than `max_spacing`.
    pub fn with_max_spacing(start: f64, stop: f64, max_spacing: f64) -> Result<Self> {
        if !(max_spacing > 0.0) {
            return Err(Error::InvalidGrid("spacing must be positive".into()));
        }
        let n = ((stop - start) / max_spacing).ceil() as usize + 1;
        Self::new(start, stop, n.max(2))
    }

    /// Symmetric grid `center ± half_span`.
    pub fn centered(center: f64, half_span: f64, n_points: usize) -> Result<Self> {
        Self::new(center - half_span, center + half_span, n_points)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn stop(&self) -> f64 {
        self.stop
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spacing(&self) -> f64 {
        if self.values.len() < 2 {
            0.0
        } else {
            (self.stop - self.start) / (self.values.len() - 1) as f64
        }
    }

    /// Rejects grids that cannot resolve a comb line of width `gamma`:
    /// spacing must not exceed `gamma / samples_per_gamma`.
    pub fn check_resolves(&self, gamma: f64, samples_per_gamma: f64) -> Result<()> {
        let limit = gamma / samples_per_gamma;
        let spacing = self.spacing();
        if spacing > limit * (1.0 + 1e-12) {
            return Err(Error::GridTooCoarse { spacing, gamma, limit });
        }
        Ok(())
    }

    /// Trapezoidal quadrature weights.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let n = self.values.len();
        let h = self.spacing();
        (0..n)
            .map(|i| {
                if n == 1 {
                    0.0
                } else if i == 0 || i == n - 1 {
                    0.5 * h
                } else {
                    h
                }
            })
            .collect()
    }

    /// Trapezoidal integral of `samples` taken on this grid.
    pub fn integrate(&self, samples: &[f64]) -> f64 {
        assert_eq!(samples.len(), self.values.len(), "sample count must match grid");
        self.trapezoid_weights().iter().zip(samples).map(|(w, s)| w * s).sum()
    }
}
