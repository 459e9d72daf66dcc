//! Hadamard + Bell-state measurement on the two D outputs.
//!
//! Each arm moves the auxiliary qubit `{-1, +1}` from OAM into polarization
//! at `l = 0`; a PBS and two diagonal analyzers then resolve the Bell state.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fock::{apply_transform, inject_product_raw, MultiPhotonState};
use crate::mode_space::{compose_transforms, Conventions, Element, Mode, ModeSpace, ModeTransform, PlacedElement, Pol, SinglePhotonState};
use crate::qudit::{subspace_hadamard, BellOutcome, Port};
use crate::scalar::C;

use super::hd_bs::HdBeamSplitter;
use super::{qudit_to_oam, AUX_P, D};

/// Detector paths, in display order.
pub const DETECTORS: [&str; 4] = ["M1", "M1m", "M2", "M2m"];

/// Element list of the stage acting on `d1` (photon 2) and `d2` (photon 3).
pub fn stage_elements(d1: &str, d2: &str, conv: &Conventions) -> Vec<PlacedElement> {
    let q4 = PI / 4.0;
    let qp = |axis: f64| Element::QPlate { q: 0.5, axis: PI * axis };
    let on = |e: Element, p: &str| PlacedElement::on(e, p);
    let pbs = |i: [&str; 2], o: [&str; 2]| {
        PlacedElement::two_path(Element::Pbs {
            inputs: [i[0].to_string(), i[1].to_string()],
            outputs: [o[0].to_string(), o[1].to_string()],
        })
    };
    vec![
        on(Element::Qwp { angle: -q4 }, d1),
        on(qp(conv.analyzer.photon2_qp_axis), d1),
        on(Element::Qwp { angle: q4 }, d1),
        on(Element::Qwp { angle: -q4 }, d2),
        on(qp(conv.analyzer.photon3_qp_axis), d2),
        on(Element::Qwp { angle: 0.0 }, d2),
        pbs([d1, d2], ["M1", "M2"]),
        on(Element::Hwp { angle: PI / 8.0 }, "M1"),
        on(Element::Hwp { angle: PI / 8.0 }, "M2"),
        pbs(["M1", "M1m"], ["M1", "M1m"]),
        pbs(["M2", "M2m"], ["M2", "M2m"]),
    ]
}

/// Result of looking up a detector coincidence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decoded {
    Bell(BellOutcome),
    Ambiguous,
}

impl fmt::Display for Decoded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decoded::Bell(b) => write!(f, "{b}"),
            Decoded::Ambiguous => f.write_str("ambiguous"),
        }
    }
}

/// Maps coincidence patterns (`"M1+M2m"`) to Bell outcomes.
#[derive(Clone, Debug)]
pub struct BellDecoder {
    /// Stage output for each Bell state of photons 2 and 3.
    pub images: BTreeMap<BellOutcome, MultiPhotonState<f64>>,
    pub patterns: BTreeMap<String, BTreeSet<BellOutcome>>,
}

impl BellDecoder {
    pub fn decode(&self, pattern: &str) -> Decoded {
        match self.patterns.get(pattern) {
            Some(s) if s.len() == 1 => Decoded::Bell(*s.iter().next().expect("one element")),
            _ => Decoded::Ambiguous,
        }
    }

    /// Outcomes whose every pattern is unique to them.
    pub fn distinguishable(&self) -> BTreeSet<BellOutcome> {
        BellOutcome::ALL
            .into_iter()
            .filter(|b| self.patterns.values().filter(|s| s.contains(b)).all(|s| s.len() == 1))
            .collect()
    }
}

/// Sorted detector paths hit by `config`, joined with `+`.
pub fn pattern_of(space: &ModeSpace, indices: &[u32]) -> String {
    let mut paths: Vec<&str> = indices
        .iter()
        .map(|&i| space.paths()[space.path_of(i as usize)].as_str())
        .filter(|p| DETECTORS.contains(p))
        .collect();
    paths.sort_unstable();
    paths.join("+")
}

#[derive(Clone, Debug)]
pub struct BsmStage {
    pub transform: ModeTransform<f64>,
    /// Physical state of each auxiliary level `{p, d-1}` on the photon-2 and
    /// photon-3 D ports, derived by propagation through the core splitter.
    pub encodings: [BTreeMap<usize, SinglePhotonState<f64>>; 2],
    pub decoder: BellDecoder,
}

/// D-port image of `level` entering `port` of `bs`.
fn d_image(bs: &HdBeamSplitter, space: &Arc<ModeSpace>, t: &ModeTransform<f64>, port: Port, level: usize) -> Result<SinglePhotonState<f64>> {
    let input = SinglePhotonState::basis(space.clone(), &Mode::new(bs.port(port), Pol::H, qudit_to_oam(level)?))?;
    let out = t.apply(&input)?;
    let d = space.path_index(&bs.port(Port::D))?;
    let stray: f64 = out
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(i, _)| space.path_of(*i) != d)
        .map(|(_, a)| a.norm_sqr())
        .sum();
    if stray > 1e-12 {
        return Err(Error::EncodingError(format!("level {level} from port {port:?} does not exit at D")));
    }
    Ok(out)
}

/// Builds the stage on `space`, which must hold the prefixed splitter paths
/// of `bs1`, `bs2` and the four detector paths.
pub fn build_bsm_stage(space: &Arc<ModeSpace>, bs1: &HdBeamSplitter, bs2: &HdBeamSplitter) -> Result<BsmStage> {
    build_bsm_stage_with(space, bs1, bs2, &Conventions::frozen())
}

pub fn build_bsm_stage_with(
    space: &Arc<ModeSpace>,
    bs1: &HdBeamSplitter,
    bs2: &HdBeamSplitter,
    conv: &Conventions,
) -> Result<BsmStage> {
    let (d1, d2) = (bs1.port(Port::D), bs2.port(Port::D));
    let parts = stage_elements(&d1, &d2, conv)
        .iter()
        .map(|e| e.transform(space, conv))
        .collect::<Result<Vec<_>>>()?;
    let transform = compose_transforms(space, &parts)?.with_provenance("BSM stage");

    let top = D - 1;
    let mut encodings: [BTreeMap<usize, SinglePhotonState<f64>>; 2] = Default::default();
    for (k, bs) in [bs1, bs2].into_iter().enumerate() {
        let t = bs.transform(space)?;
        encodings[k].insert(AUX_P, d_image(bs, space, &t, Port::B, AUX_P)?);
        encodings[k].insert(top, d_image(bs, space, &t, Port::A, top)?);
    }

    let h3 = subspace_hadamard::<f64>(AUX_P, D)?;
    let mut images = BTreeMap::new();
    let mut patterns: BTreeMap<String, BTreeSet<BellOutcome>> = BTreeMap::new();
    for b in BellOutcome::ALL {
        let v = b.vector::<f64>(AUX_P, top, D);
        let mut state = MultiPhotonState::zero(space.clone(), 2);
        for x in [AUX_P, top] {
            for y in [AUX_P, top] {
                // (I x H3) |B>
                let mut amp = C::new(0.0, 0.0);
                for z in [AUX_P, top] {
                    amp += h3[(y, z)] * v[x * D + z];
                }
                if amp.norm() < 1e-15 {
                    continue;
                }
                let pair = inject_product_raw(&[encodings[0][&x].clone(), encodings[1][&y].clone()])?;
                state = state.add(&pair.scaled(amp))?;
            }
        }
        let out = apply_transform(&transform, &state)?;
        for (cfg, a) in out.terms() {
            if a.norm_sqr() > 1e-12 {
                patterns.entry(pattern_of(space, cfg.indices())).or_default().insert(b);
            }
        }
        images.insert(b, out);
    }
    Ok(BsmStage { transform, encodings, decoder: BellDecoder { images, patterns } })
}
