use serde::Deserialize;

use crate::error::{Error, Result};

const FROZEN: &str = include_str!("../../fixtures/conventions.toml");

/// Element phase conventions, in units of pi unless noted.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct Conventions {
    pub elements: ElementConventions,
    pub preparation: PreparationConventions,
    pub analyzer: AnalyzerConventions,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct ElementConventions {
    pub pbs_reflection_phase: f64,
    pub mirror_phase: f64,
    pub reflection_flips_oam: bool,
    pub qwp_phase: f64,
    pub interferometer_phase: f64,
    pub bs_reflection_phase: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct PreparationConventions {
    pub prep_qp_axis: f64,
    pub aux_qp_axis: f64,
}

/// q-plate axis offsets in the two arms of the Bell-state analyzer.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct AnalyzerConventions {
    pub photon2_qp_axis: f64,
    pub photon3_qp_axis: f64,
}

impl Conventions {
    /// The conventions shipped with the crate.
    pub fn frozen() -> Self {
        Self::from_toml(FROZEN).expect("bundled conventions fixture parses")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("conventions: {e}")))
    }
}

impl Default for Conventions {
    fn default() -> Self {
        Self::frozen()
    }
}
