//! Stability analysis for censored and kinked structural VARs.

pub mod error;
pub mod io;
pub mod lift;
pub mod linalg;
pub mod lmi;
pub mod model;
pub mod presets;
pub mod regime;
pub mod reproduce;
pub mod sdp;
pub mod simulate;
pub mod spectral;

pub use error::{Error, Result};
pub use io::{load_model, parse_model, ModelFile};
pub use lmi::{
    bound_by_bisection, validate_certificate, LmiMode, LyapunovCertificate, MultiplierStructure,
    ValidationReport,
};
pub use model::{CanonicalModel, CksvarModel, MonetaryModelSpec, Side};
pub use regime::{RegimeSystem, SignPattern};
pub use simulate::{
    ergodicity_verdict, simulate_cksvar, simulate_cksvar_with, simulate_skeleton,
    skeleton_stability_scan, system_verdict, ShockSource, StabilityScanReport, Trajectory, Verdict,
    VerdictOptions, VerdictStatus,
};
pub use spectral::{jsr_lower_bound, jsr_upper_bound_norm, BoundMethod, SpectralBound, Witness};
