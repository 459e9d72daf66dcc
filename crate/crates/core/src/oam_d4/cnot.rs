use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mode_space::{element_transform, Conventions, Element, ModeSpace, ModeTransform};

/// OAM-controlled polarization NOT of order `k` on a single path.
#[derive(Clone, Debug)]
pub struct OkCnot {
    pub k: u8,
    pub transform: ModeTransform<f64>,
}

impl OkCnot {
    pub fn space(&self) -> &Arc<ModeSpace> {
        self.transform.space()
    }
}

/// Builds the order-`k` gate on a one-path space (`"A"`) truncated at `bound`.
pub fn build_ok_cnot(k: u8, bound: u32) -> Result<OkCnot> {
    if !(1..=2).contains(&k) {
        return Err(Error::InvalidParameter(format!("O_k-CNOT order must be 1 or 2, got {k}")));
    }
    let space = ModeSpace::new(["A"], bound)?;
    let transform = element_transform(&Element::OkCnot { order: k }, Some("A"), &space, &Conventions::frozen())?;
    Ok(OkCnot { k, transform })
}
