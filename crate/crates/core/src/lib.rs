//! Simulation of a heralded high-dimensional controlled phase-flip gate built
//! from linear optics on photons carrying orbital angular momentum.
//!
//! The lower layers (`mode_space`, `fock`, `qudit`) are generic over the real
//! scalar through [`scalar::Real`]; the `*64` aliases below fix it to `f64`.

pub mod analysis;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod mode_space;
pub mod oam_d4;
pub mod phase_lock;
pub mod qudit;
pub mod runner;
pub mod scalar;

pub use error::{Error, Result};
pub use fock::{
    apply_transform, inject_product, inject_product_raw, outcome_distribution, post_select, sample_counts,
    DetectionPattern, MultiPhotonState, OccupationConfig, PathBasis,
};
pub use mode_space::{
    compose_transforms, element_transform, Conventions, Element, Mode, ModeSpace, ModeTransform, PlacedElement,
    Pol, SinglePhotonState, TransformKind,
};
pub use qudit::{
    correction_unitary, cpf_oracle, ideal_hd_bs, run_protocol, subspace_hadamard, AuxiliaryConfig, BellOutcome,
    QuditOperator, QuditState,
};
pub use scalar::{Real, C};

pub type Complex64 = C<f64>;
pub type ModeTransform64 = ModeTransform<f64>;
pub type SinglePhoton64 = SinglePhotonState<f64>;
pub type MultiPhoton64 = MultiPhotonState<f64>;
pub type QuditState64 = QuditState<f64>;
pub type ModeTransform32 = ModeTransform<f32>;
pub type SinglePhoton32 = SinglePhotonState<f32>;
