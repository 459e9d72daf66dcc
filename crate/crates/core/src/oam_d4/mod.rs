//! Four-dimensional realization on OAM photons: O_k-CNOTs, the OAM
//! high-dimensional beam splitter, state preparation, the Hadamard/Bell
//! stage and the full four-photon pipeline.

mod bsm;
mod cnot;
mod hd_bs;
mod noise;
mod pipeline;
mod prep;

pub use bsm::{build_bsm_stage, build_bsm_stage_with, pattern_of, stage_elements, BellDecoder, BsmStage, Decoded, DETECTORS};
pub use cnot::{build_ok_cnot, OkCnot};
pub use hd_bs::{
    build_hd_beamsplitter, transcript_check, Divergence, HdBeamSplitter, Step, Transcript, TranscriptReport, HD_PATHS,
};
pub use noise::{NoiseRealization, NoiseSpec};
pub use pipeline::{pipeline_space, run_cpf_d4, run_cpf_d4_with, BranchMaps, CpfInput, CpfRun, Pipeline, PipelineLayout, PipelineRun};
pub use prep::{prepare_auxiliary, prepare_input, table_a1, PreparationRecipe, RecipeKind, PREP_PATH};

use crate::error::{Error, Result};
use crate::mode_space::{Pol, SinglePhotonState};
use crate::scalar::C;

/// Dimension of the OAM encoding.
pub const D: usize = 4;

/// OAM value carrying each computational level `0..4`.
pub const OAM_ALPHABET: [i64; D] = [-2, -1, 0, 1];

/// Auxiliary subspace index `p` (the auxiliary photons use l = -1 and l = +1).
pub const AUX_P: usize = 1;

pub fn qudit_to_oam(level: usize) -> Result<i64> {
    OAM_ALPHABET.get(level).copied().ok_or(Error::InvalidParameter(format!("qudit level {level} out of range")))
}

pub fn oam_to_qudit(l: i64) -> Result<usize> {
    OAM_ALPHABET
        .iter()
        .position(|&x| x == l)
        .ok_or_else(|| Error::EncodingError(format!("OAM value {l} is outside the d=4 alphabet")))
}

/// Reads the qudit amplitudes of a horizontally polarized photon.
///
/// The photon may sit on any single path; components outside `H x {-2..+1}`
/// are rejected.
pub fn encode_photon(s: &SinglePhotonState<f64>) -> Result<[C<f64>; D]> {
    let mut out = [C::new(0.0, 0.0); D];
    for (m, a) in s.terms() {
        if m.pol != Pol::H {
            return Err(Error::EncodingError(format!("component {m} is not horizontally polarized")));
        }
        out[oam_to_qudit(m.oam)?] += a;
    }
    Ok(out)
}
