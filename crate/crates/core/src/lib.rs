//! Simulation of induced-coherence (ZWM) interferometry with
//! cavity-enhanced photon pairs: frequency-comb biphoton states, signal
//! spectra at several levels of approximation, per-mode visibilities and a
//! Monte Carlo model of the detection chain.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod detection;
pub mod error;
pub mod fit;
pub mod sample;
pub mod spectral;
pub mod spectrum;
pub mod state;

pub use detection::{
    estimate_visibility, run_phase_sweep, sample_photons, BinnedCounts, MeasurementRun, SpectrometerModel,
    VisibilityEstimate,
};
pub use error::{Error, Result};
pub use sample::{AbsorptionLine, SampleModel};
pub use spectral::{
    cavity_lineshape, default_comb_range, derive_cavity_params, phase_mismatch_factor, CavityParams, CombIndexRange,
    CombTruncation, FrequencyGrid, PhysicalGeometry,
};
pub use spectrum::{
    compute_spectrum_comb_resolved, compute_spectrum_full, compute_spectrum_good_cavity, invert_visibility, visibility,
    CrossTerm, Fidelity, Phases, Spectrum, VisibilityTable, ZwmSetup,
};
pub use state::{apply_sample_and_second_crystal, build_single_cavity_state, BiphotonState, Branch};
