//! Truth tables, fidelity bounds and superposition checks for the d = 4 gate.

mod bases;
mod fidelity;
mod stabilizer;

pub use bases::{x_states, z_states, BasisName, BasisTable, LabeledState};
pub use fidelity::{
    calibrate_dephasing, expected_outputs, fidelity_report, format_sig, hofmann_bounds, locking_observable, measure_table, round_sig,
    run_fidelity_experiment, superposition_suite, Channel, FidelityReport, OutcomeMatrix, SuperpositionResult,
};
pub(crate) use fidelity::finish_csv;
pub use stabilizer::{embedded_pauli, entangled_target, stabilizer_expectations, stabilizer_fidelity, stabilizers, Pauli};

pub use crate::oam_d4::NoiseSpec;
