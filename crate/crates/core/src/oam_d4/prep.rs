//! Input-state preparation from `|H>|0>` with waveplates, q-plates and SPPs.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use crate::error::{Error, Result};
use crate::mode_space::{element_transform, Conventions, Element, Mode, ModeSpace, Pol, SinglePhotonState};
use crate::scalar::C;

use super::OAM_ALPHABET;

/// Path name used for photons prepared in isolation.
pub const PREP_PATH: &str = "S";

#[derive(Clone, Debug, PartialEq)]
pub enum RecipeKind {
    /// Element chain followed by an `H` projection.
    Chain(Vec<Element>),
    /// Equal-weight superposition set analytically (q = 1/4 plates give
    /// non-integer OAM and are not simulated element by element).
    Direct,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreparationRecipe {
    pub row: usize,
    pub name: &'static str,
    pub kind: RecipeKind,
    /// Target amplitudes on the OAM alphabet `[-2, -1, 0, +1]`.
    pub target: [f64; 4],
}

impl fmt::Display for PreparationRecipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {} ({})", self.row, self.name)
    }
}

impl PreparationRecipe {
    /// Looks a recipe up by name (`"-1++1"`), row number (`"6"`) or `row6`.
    pub fn lookup(key: &str) -> Result<Self> {
        let k = key.trim();
        let row = k.strip_prefix("row").unwrap_or(k).parse::<usize>().ok();
        table_a1()
            .into_iter()
            .find(|r| r.name == k || row == Some(r.row))
            .ok_or_else(|| Error::UnknownRecipe(key.to_string()))
    }

    pub fn target_state(&self) -> Result<SinglePhotonState<f64>> {
        let space = ModeSpace::new([PREP_PATH], 4)?;
        let terms: Vec<(Mode, C<f64>)> = OAM_ALPHABET
            .iter()
            .zip(self.target)
            .filter(|(_, a)| *a != 0.0)
            .map(|(&l, a)| (Mode::new(PREP_PATH, Pol::H, l), C::new(a, 0.0)))
            .collect();
        SinglePhotonState::from_terms(space, &terms)
    }
}

/// The ten preparations of the OAM alphabet and its pairwise superpositions.
pub fn table_a1() -> Vec<PreparationRecipe> {
    let conv = Conventions::frozen();
    let qp = Element::QPlate { q: 0.5, axis: PI * conv.preparation.prep_qp_axis };
    let qwp = |a: f64| Element::Qwp { angle: a };
    let hwp = |a: f64| Element::Hwp { angle: a };
    let spp = Element::Spp { dl: -1 };
    let q4 = PI / 4.0;
    let q8 = PI / 8.0;
    let s = FRAC_1_SQRT_2;
    let chain = |v: Vec<Element>| RecipeKind::Chain(v);
    let rows: Vec<(&'static str, RecipeKind, [f64; 4])> = vec![
        ("-2", chain(vec![qwp(-q4), qp.clone(), qwp(-q4), spp.clone()]), [1.0, 0.0, 0.0, 0.0]),
        ("-1", chain(vec![qwp(-q4), qp.clone(), qwp(-q4)]), [0.0, 1.0, 0.0, 0.0]),
        ("0", chain(vec![qwp(q4), qp.clone(), qwp(q4), spp.clone()]), [0.0, 0.0, 1.0, 0.0]),
        ("+1", chain(vec![qwp(q4), qp.clone(), qwp(q4)]), [0.0, 0.0, 0.0, 1.0]),
        ("-2+0", chain(vec![hwp(q8), qwp(q4), qp.clone(), qwp(q4), hwp(q8), spp.clone()]), [s, 0.0, s, 0.0]),
        ("-1++1", chain(vec![hwp(q8), qwp(q4), qp.clone(), qwp(q4), hwp(q8)]), [0.0, s, 0.0, s]),
        (
            "-2-0",
            chain(vec![hwp(-q8), qwp(q4), qp.clone(), qwp(q4), hwp(q8), spp.clone()]),
            [s, 0.0, -s, 0.0],
        ),
        ("-1-+1", chain(vec![hwp(-q8), qwp(q4), qp.clone(), qwp(q4), hwp(q8)]), [0.0, s, 0.0, -s]),
        ("0++1", RecipeKind::Direct, [0.0, 0.0, s, s]),
        ("-1+0", RecipeKind::Direct, [0.0, s, s, 0.0]),
    ];
    rows.into_iter()
        .enumerate()
        .map(|(i, (name, kind, target))| PreparationRecipe { row: i + 1, name, kind, target })
        .collect()
}

/// Runs `recipe` from `|H>|0>` on path [`PREP_PATH`]. Returns the
/// renormalized state and the post-selection probability.
pub fn prepare_input(recipe: &PreparationRecipe) -> Result<(SinglePhotonState<f64>, f64)> {
    let elements = match &recipe.kind {
        RecipeKind::Direct => return Ok((recipe.target_state()?, 1.0)),
        RecipeKind::Chain(v) => v,
    };
    let conv = Conventions::frozen();
    let space = ModeSpace::new([PREP_PATH], 4)?;
    let mut s = SinglePhotonState::basis(space.clone(), &Mode::new(PREP_PATH, Pol::H, 0))?;
    for e in elements.iter().chain(std::iter::once(&Element::Polarizer { angle: 0.0 })) {
        s = element_transform(e, Some(PREP_PATH), &space, &conv)?.apply(&s)?;
    }
    let p = s.probability();
    if p < 1e-12 {
        return Err(Error::EmptyPostSelection);
    }
    Ok((s.normalized()?, p))
}

/// Auxiliary photon `(V|-1> + H|+1>)/sqrt2` made by a q = 1/2 plate and a
/// QWP at pi/4 acting on `|H>|0>`.
pub fn prepare_auxiliary() -> Result<SinglePhotonState<f64>> {
    let conv = Conventions::frozen();
    let space = ModeSpace::new([PREP_PATH], 4)?;
    let mut s = SinglePhotonState::basis(space.clone(), &Mode::new(PREP_PATH, Pol::H, 0))?;
    let chain = [
        Element::QPlate { q: 0.5, axis: PI * conv.preparation.aux_qp_axis },
        Element::Qwp { angle: PI / 4.0 },
    ];
    for e in &chain {
        s = element_transform(e, Some(PREP_PATH), &space, &conv)?.apply(&s)?;
    }
    Ok(s)
}
