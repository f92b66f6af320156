//! Amplitude transmissivity of the sample sitting in the idler-1 path.
//!
//! The sample is a lossless four-port: whatever is not transmitted is
//! scattered into the port that otherwise carries vacuum, so the rear
//! reflectivity is always `sqrt(1 - |T|^2)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One absorber in a [`SampleModel::LorentzianMixture`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionLine {
    /// Line center (angular frequency).
    pub center: f64,
    /// Full width at half maximum of the absorption profile.
    pub width: f64,
    /// Optical depth at line center; `|T| = exp(-depth)` there.
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleModel {
    /// Frequency-independent transmission.
    Flat { t0: Complex64 },
    /// Beam splitter with constant transmission amplitude.
    BeamSplitter { t0: Complex64 },
    /// Thin absorbers in series, each with a complex Lorentzian response.
    LorentzianMixture { lines: Vec<AbsorptionLine> },
}

impl SampleModel {
    pub fn transparent() -> Self {
        SampleModel::Flat {
            t0: Complex64::new(1.0, 0.0),
        }
    }

    pub fn opaque() -> Self {
        SampleModel::Flat {
            t0: Complex64::new(0.0, 0.0),
        }
    }

    pub fn flat(t: f64) -> Self {
        SampleModel::Flat {
            t0: Complex64::new(t, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SampleModel::Flat { t0 } | SampleModel::BeamSplitter { t0 } => {
                if !(t0.re.is_finite() && t0.im.is_finite()) {
                    return Err(Error::InvalidSample("t0 is not finite".into()));
                }
                if t0.norm() > 1.0 + 1e-12 {
                    return Err(Error::InvalidSample(format!(
                        "|t0| = {} exceeds 1 (gain media are not supported)",
                        t0.norm()
                    )));
                }
            }
            SampleModel::LorentzianMixture { lines } => {
                for (j, line) in lines.iter().enumerate() {
                    if !line.center.is_finite() {
                        return Err(Error::InvalidSample(format!("line {j}: non-finite center")));
                    }
                    if !(line.width > 0.0 && line.width.is_finite()) {
                        return Err(Error::InvalidSample(format!(
                            "line {j}: width must be positive, got {}",
                            line.width
                        )));
                    }
                    if !(line.depth >= 0.0 && line.depth.is_finite()) {
                        return Err(Error::InvalidSample(format!(
                            "line {j}: depth must be non-negative, got {}",
                            line.depth
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Complex amplitude transmissivity at idler frequency `omega`.
    pub fn transmissivity(&self, omega: f64) -> Complex64 {
        match self {
            SampleModel::Flat { t0 } | SampleModel::BeamSplitter { t0 } => *t0,
            SampleModel::LorentzianMixture { lines } => {
                let exponent: Complex64 = lines
                    .iter()
                    .map(|l| l.depth / Complex64::new(1.0, 2.0 * (omega - l.center) / l.width))
                    .sum();
                (-exponent).exp()
            }
        }
    }

    /// Amplitude reflectivity of the rear surface, `sqrt(1 - |T|^2)`.
    pub fn rear_reflectivity(&self, omega: f64) -> f64 {
        (1.0 - self.transmissivity(omega).norm_sqr()).max(0.0).sqrt()
    }
}

pub fn transmissivity(model: &SampleModel, omega: f64) -> Complex64 {
    model.transmissivity(omega)
}

pub fn rear_reflectivity(model: &SampleModel, omega: f64) -> f64 {
    model.rear_reflectivity(omega)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(center: f64, width: f64, depth: f64) -> AbsorptionLine {
        AbsorptionLine { center, width, depth }
    }

    #[test]
    fn transparent_flat() {
        let s = SampleModel::transparent();
        for w in [-10.0, 0.0, 3.5, 1e6] {
            assert_eq!(s.transmissivity(w), Complex64::new(1.0, 0.0));
            assert_eq!(s.rear_reflectivity(w), 0.0);
        }
        assert_eq!(SampleModel::opaque().rear_reflectivity(1.0), 1.0);
    }

    #[test]
    fn reflectivity_complements_transmission() {
        let s = SampleModel::BeamSplitter {
            t0: Complex64::from_polar(0.6, 0.4),
        };
        assert!((s.rear_reflectivity(0.0) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn mixture_at_line_center_is_real_attenuation() {
        let s = SampleModel::LorentzianMixture {
            lines: vec![line(150.0, 0.5, 0.7)],
        };
        let t = s.transmissivity(150.0);
        assert!((t.re - (-0.7f64).exp()).abs() < 1e-15);
        assert!(t.im.abs() < 1e-15);
    }

    #[test]
    fn mixture_far_detuned_is_transparent() {
        let s = SampleModel::LorentzianMixture {
            lines: vec![line(150.0, 0.5, 2.0)],
        };
        let t = s.transmissivity(150.0 + 1e9);
        assert!((t - Complex64::new(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn zero_depth_mixture_equals_transparent() {
        let s = SampleModel::LorentzianMixture {
            lines: vec![line(1.0, 0.1, 0.0), line(2.0, 0.3, 0.0)],
        };
        for w in [0.0, 1.0, 1.05, 2.0, 7.0] {
            assert_eq!(s.transmissivity(w), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn dispersive_phase_is_odd_about_center() {
        let s = SampleModel::LorentzianMixture {
            lines: vec![line(0.0, 1.0, 1.0)],
        };
        let up = s.transmissivity(0.3);
        let down = s.transmissivity(-0.3);
        assert!((up - down.conj()).norm() < 1e-15);
        assert!(up.arg().abs() > 0.0);
    }

    #[test]
    fn validation() {
        assert!(SampleModel::flat(1.2).validate().is_err());
        assert!(SampleModel::flat(0.7).validate().is_ok());
        let bad = SampleModel::LorentzianMixture {
            lines: vec![line(0.0, 0.0, 1.0)],
        };
        assert!(bad.validate().is_err());
        let bad = SampleModel::LorentzianMixture {
            lines: vec![line(0.0, 1.0, -1.0)],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn serde_form() {
        let s = SampleModel::LorentzianMixture {
            lines: vec![line(1.0, 2.0, 3.0)],
        };
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"kind\":\"lorentzian_mixture\""));
        let back: SampleModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let flat: SampleModel = serde_json::from_str(r#"{"kind":"flat","t0":[0.5,0.0]}"#).unwrap();
        assert_eq!(flat, SampleModel::flat(0.5));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn mixture() -> impl Strategy<Value = SampleModel> {
            prop::collection::vec((-5.0f64..5.0, 0.01f64..3.0, 0.0f64..4.0), 0..5).prop_map(|v| {
                SampleModel::LorentzianMixture {
                    lines: v.into_iter().map(|(c, w, d)| line(c, w, d)).collect(),
                }
            })
        }

        proptest! {
            #[test]
            fn unitarity(s in mixture(), w in -10.0f64..10.0) {
                let t = s.transmissivity(w);
                let r = s.rear_reflectivity(w);
                prop_assert!(t.norm() <= 1.0 + 1e-15);
                prop_assert!((t.norm_sqr() + r * r - 1.0).abs() < 1e-12);
            }

            #[test]
            fn far_line_barely_changes_window(s in mixture(), width in 0.01f64..1.0, depth in 0.0f64..4.0) {
                let SampleModel::LorentzianMixture { lines } = &s else { unreachable!() };
                let mut more = lines.clone();
                // Window is [-10, 10]; put the new line > 1e4 widths beyond its edge.
                more.push(line(10.0 + 2e4 * width, width, depth));
                let s2 = SampleModel::LorentzianMixture { lines: more };
                for i in 0..=200 {
                    let w = -10.0 + 0.1 * f64::from(i);
                    let d = (s.transmissivity(w).norm() - s2.transmissivity(w).norm()).abs();
                    prop_assert!(d < 1e-3);
                }
            }
        }
    }
}
