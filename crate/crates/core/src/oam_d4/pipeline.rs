//! Four photons through two HD splitters, the Bell stage and the feed-forward
//! correction.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::fock::{apply_transform, inject_product_raw, post_select_raw, DetectionPattern, MultiPhotonState, OccupationConfig};
use crate::linalg::{norm_sqr, CMatrix};
use crate::mode_space::{Mode, ModeSpace, ModeTransform, PlacedElement, Pol, SinglePhotonState};
use crate::qudit::{correction_unitary, BellOutcome, Port, QuditState};
use crate::scalar::C;

use super::bsm::{build_bsm_stage, pattern_of, stage_elements, BsmStage, DETECTORS};
use super::hd_bs::{HdBeamSplitter, HD_PATHS};
use super::noise::{NoiseRealization, NoiseSpec};
use super::{encode_photon, oam_to_qudit, qudit_to_oam, D};

const DD: usize = D * D;

/// Two-photon input on photons 1 and 4.
#[derive(Clone, Debug)]
pub enum CpfInput {
    Product(SinglePhotonState<f64>, SinglePhotonState<f64>),
    Joint(QuditState<f64>),
}

impl CpfInput {
    pub fn levels(m: usize, n: usize) -> Result<Self> {
        Ok(CpfInput::Joint(QuditState::basis(D, m, n)?))
    }

    pub fn to_qudit(&self) -> Result<QuditState<f64>> {
        match self {
            CpfInput::Joint(s) => {
                if s.dim() != D {
                    return Err(Error::InvalidDimension(s.dim()));
                }
                Ok(s.clone())
            }
            CpfInput::Product(a, b) => {
                let (a, b) = (encode_photon(a)?, encode_photon(b)?);
                for v in [&a, &b] {
                    let n = norm_sqr(v);
                    if (n - 1.0).abs() > 1e-9 {
                        return Err(Error::NotNormalized(n));
                    }
                }
                QuditState::product(&a, &b)
            }
        }
    }
}

/// Unnormalized, corrected output of one pass.
#[derive(Clone, Debug)]
pub struct PipelineRun {
    /// `U_B <B| psi_out>` per Bell outcome, on photons 1 and 4.
    pub branches: BTreeMap<BellOutcome, Vec<C<f64>>>,
    /// Probability of each detector pattern jointly with a four-fold coincidence.
    pub tallies: BTreeMap<String, f64>,
    /// Probability of one photon in each splitter output.
    pub coincidence: f64,
}

/// Kraus-like maps per realization and Bell outcome (columns indexed by input `m*4+n`).
#[derive(Clone, Debug)]
pub struct BranchMaps {
    pub realizations: Vec<BTreeMap<BellOutcome, CMatrix<f64>>>,
    /// Survival factor from photon loss.
    pub loss_factor: f64,
}

impl BranchMaps {
    /// Average over realizations of `sum_B in accepted |tr(U^dag K_B)|^2 / D^2`
    /// and of `sum_B tr(K_B^dag K_B) / D`.
    pub fn overlap_and_mass(&self, target: &CMatrix<f64>, accepted: &[BellOutcome]) -> (f64, f64) {
        let n = self.realizations.len().max(1) as f64;
        let dim = target.rows() as f64;
        let (mut ov, mut mass) = (0.0, 0.0);
        for r in &self.realizations {
            for b in accepted {
                let Some(k) = r.get(b) else { continue };
                ov += (&target.adjoint() * k).trace().norm_sqr() / (dim * dim);
                mass += (&k.adjoint() * k).trace().re / dim;
            }
        }
        (ov / n, mass / n)
    }
}

/// Paths, elements and photon placement of the experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineLayout {
    pub paths: Vec<String>,
    pub bound: u32,
    pub elements: Vec<PlacedElement>,
    /// `(path, is_input)` per photon in injection order; auxiliaries have `false`.
    pub sources: [(String, bool); 4],
    /// Paths that must each see one photon.
    pub coincidence: Vec<String>,
}

/// Everything needed to push states through the experiment.
#[derive(Clone, Debug)]
pub struct Pipeline {
    space: Arc<ModeSpace>,
    bs: [HdBeamSplitter; 2],
    splitters: ModeTransform<f64>,
    stage: BsmStage,
    aux: [SinglePhotonState<f64>; 2],
    coincidence: DetectionPattern,
    jitter_expansion: Arc<OnceLock<JitterExpansion>>,
}

/// Branch maps as a polynomial in `z_k = exp(i zeta_k)`: each splitter carries
/// at most two photons through its jittered arm, so the degree per splitter is
/// at most two. `coeffs[a * JITTER_POINTS + b]` multiplies `z_1^a z_2^b`.
#[derive(Debug)]
struct JitterExpansion {
    coeffs: Vec<BTreeMap<BellOutcome, CMatrix<f64>>>,
}

const JITTER_POINTS: usize = 3;

/// Paths `1A..1X, 2A..2X, M1, M1m, M2, M2m`.
pub fn pipeline_space(bound: u32) -> Result<Arc<ModeSpace>> {
    let mut paths: Vec<String> = Vec::new();
    for pre in ["1", "2"] {
        paths.extend(HD_PATHS.iter().map(|p| format!("{pre}{p}")));
    }
    paths.extend(DETECTORS.iter().map(|p| p.to_string()));
    ModeSpace::new(paths, bound)
}

impl Pipeline {
    pub fn new() -> Result<Self> {
        let space = pipeline_space(4)?;
        let bs = Self::default_splitters();
        let splitters = Self::splitter_transform(&space, &bs)?;
        let stage = build_bsm_stage(&space, &bs[0], &bs[1])?;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let aux = [0, 1].map(|k| {
            let b = bs[k].port(Port::B);
            SinglePhotonState::from_terms(
                space.clone(),
                &[(Mode::new(b.clone(), Pol::H, -1), C::new(h, 0.0)), (Mode::new(b, Pol::H, 1), C::new(h, 0.0))],
            )
        });
        let [a0, a1] = aux;
        let coincidence = DetectionPattern::per_path(
            bs.iter().flat_map(|b| [(b.port(Port::C), 1), (b.port(Port::D), 1)]).collect::<Vec<_>>(),
        );
        Ok(Self { space, bs, splitters, stage, aux: [a0?, a1?], coincidence, jitter_expansion: Arc::default() })
    }

    fn splitter_transform(space: &Arc<ModeSpace>, bs: &[HdBeamSplitter; 2]) -> Result<ModeTransform<f64>> {
        bs[0].transform(space)?.then(&bs[1].transform(space)?)
    }

    pub fn space(&self) -> &Arc<ModeSpace> {
        &self.space
    }

    pub fn stage(&self) -> &BsmStage {
        &self.stage
    }

    pub fn splitters(&self) -> &[HdBeamSplitter; 2] {
        &self.bs
    }

    /// Every element in beam order: splitter 1, splitter 2, then the Bell stage.
    pub fn element_chain(&self) -> Vec<PlacedElement> {
        Self::chain_of(&self.bs)
    }

    fn default_splitters() -> [HdBeamSplitter; 2] {
        [HdBeamSplitter::core().with_prefix("1"), HdBeamSplitter::core().with_prefix("2")]
    }

    fn chain_of(bs: &[HdBeamSplitter; 2]) -> Vec<PlacedElement> {
        let mut out: Vec<PlacedElement> = bs.iter().flat_map(|b| b.steps()).flat_map(|s| s.elements).collect();
        out.extend(stage_elements(&bs[0].port(Port::D), &bs[1].port(Port::D), bs[0].conventions()));
        out
    }

    /// Static description of the experiment, available without building it.
    pub fn layout() -> PipelineLayout {
        let bs = Self::default_splitters();
        let mut paths: Vec<String> = Vec::new();
        for pre in ["1", "2"] {
            paths.extend(HD_PATHS.iter().map(|p| format!("{pre}{p}")));
        }
        paths.extend(DETECTORS.iter().map(|p| p.to_string()));
        PipelineLayout {
            paths,
            bound: 4,
            elements: Self::chain_of(&bs),
            sources: [
                (bs[0].port(Port::A), true),
                (bs[0].port(Port::B), false),
                (bs[1].port(Port::B), false),
                (bs[1].port(Port::A), true),
            ],
            coincidence: bs.iter().flat_map(|b| [b.port(Port::C), b.port(Port::D)]).collect(),
        }
    }

    /// Four-photon state `sum c_mn |m>_1A |aux>_1B |aux>_2B |n>_2A`.
    pub fn inject(&self, psi: &QuditState<f64>) -> Result<MultiPhotonState<f64>> {
        let mut state = MultiPhotonState::zero(self.space.clone(), 4);
        for m in 0..D {
            for n in 0..D {
                let c = psi.amp(m, n);
                if c.norm() < 1e-15 {
                    continue;
                }
                let p1 = SinglePhotonState::basis(self.space.clone(), &Mode::new(self.bs[0].port(Port::A), Pol::H, qudit_to_oam(m)?))?;
                let p4 = SinglePhotonState::basis(self.space.clone(), &Mode::new(self.bs[1].port(Port::A), Pol::H, qudit_to_oam(n)?))?;
                let term = inject_product_raw(&[p1, self.aux[0].clone(), self.aux[1].clone(), p4])?;
                state = state.add(&term.scaled(c))?;
            }
        }
        Ok(state)
    }

    /// Probability that splitter `k` (0 or 1) emits one photon at C and one at D.
    pub fn splitter_post_selection(&self, psi: &QuditState<f64>, k: usize) -> Result<f64> {
        let bs = self.bs.get(k).ok_or_else(|| Error::InvalidParameter(format!("no splitter {k}")))?;
        let after = apply_transform(&self.splitters, &self.inject(psi)?)?;
        let pattern = DetectionPattern::per_path([(bs.port(Port::C), 1), (bs.port(Port::D), 1)]);
        Ok(post_select_raw(&after, &pattern)?.1)
    }

    /// Input-side phases of a noise realization (dephasing and flips).
    fn input_phases(r: &NoiseRealization) -> [C<f64>; DD] {
        std::array::from_fn(|j| {
            let (m, n) = (j / D, j % D);
            let mut ph = r.level_phase[0][m] + r.level_phase[1][n];
            if r.flip[0] && m == D - 1 {
                ph += std::f64::consts::PI;
            }
            if r.flip[1] && n == D - 1 {
                ph += std::f64::consts::PI;
            }
            C::from_polar(1.0, ph)
        })
    }

    fn disturb(psi: &QuditState<f64>, r: &NoiseRealization) -> Result<QuditState<f64>> {
        let ph = Self::input_phases(r);
        let amps = psi.amplitudes().iter().zip(ph).map(|(a, p)| a * p).collect();
        QuditState::new(D, amps)
    }

    fn jittered_splitters(&self, jitter: [f64; 2]) -> Result<ModeTransform<f64>> {
        let bs = [self.bs[0].clone().with_jitter(jitter[0]), self.bs[1].clone().with_jitter(jitter[1])];
        Self::splitter_transform(&self.space, &bs)
    }

    /// Propagates `psi` through the experiment, optionally under one noise
    /// realization (photon loss is not applied here).
    pub fn run_direct(&self, psi: &QuditState<f64>, noise: Option<&NoiseRealization>) -> Result<PipelineRun> {
        if psi.dim() != D {
            return Err(Error::InvalidDimension(psi.dim()));
        }
        let psi = match noise {
            Some(r) => Self::disturb(psi, r)?,
            None => psi.clone(),
        };
        let jittered;
        let splitters = match noise {
            Some(r) if r.jitter != [0.0, 0.0] => {
                jittered = self.jittered_splitters(r.jitter)?;
                &jittered
            }
            _ => &self.splitters,
        };
        self.propagate(&psi, splitters)
    }

    fn propagate(&self, psi: &QuditState<f64>, splitters: &ModeTransform<f64>) -> Result<PipelineRun> {
        let input = self.inject(psi)?;
        let after = apply_transform(splitters, &input)?;
        let (kept, _) = post_select_raw(&after, &self.coincidence)?;
        let total = input.norm_sqr();
        let coincidence = kept.norm_sqr() / total;
        let out = apply_transform(&self.stage.transform, &kept)?;

        let c_paths = [self.space.path_index(&self.bs[0].port(Port::C))?, self.space.path_index(&self.bs[1].port(Port::C))?];
        let mut branches: BTreeMap<BellOutcome, Vec<C<f64>>> =
            BellOutcome::ALL.into_iter().map(|b| (b, vec![C::new(0.0, 0.0); DD])).collect();
        let mut tallies: BTreeMap<String, f64> = BTreeMap::new();
        for (cfg, a) in out.terms() {
            let a = *a / total.sqrt();
            let mut levels = [usize::MAX; 2];
            let mut rest = Vec::with_capacity(2);
            for &i in cfg.indices() {
                let (p, pol, l) = self.space.unpack(i as usize);
                match c_paths.iter().position(|&c| c == p) {
                    Some(k) => {
                        if pol != Pol::H {
                            return Err(Error::EncodingError(format!("output {} is not horizontally polarized", self.space.mode(i as usize))));
                        }
                        levels[k] = oam_to_qudit(l)?;
                    }
                    None => rest.push(i),
                }
            }
            if levels.contains(&usize::MAX) {
                return Err(Error::EncodingError("output ports C do not hold one photon each".into()));
            }
            *tallies.entry(pattern_of(&self.space, &rest)).or_default() += a.norm_sqr();
            let m_cfg = OccupationConfig::new(rest);
            for (b, img) in &self.stage.decoder.images {
                let beta = img.amplitude(&m_cfg);
                if beta.norm() > 0.0 {
                    branches.get_mut(b).expect("all outcomes present")[levels[0] * D + levels[1]] += beta.conj() * a;
                }
            }
        }
        for (b, v) in branches.iter_mut() {
            *v = correction_unitary::<f64>(*b, D)?.mul_vec(v);
        }
        Ok(PipelineRun { branches, tallies, coincidence })
    }

    fn maps_through(&self, splitters: &ModeTransform<f64>) -> Result<BTreeMap<BellOutcome, CMatrix<f64>>> {
        let mut cols: BTreeMap<BellOutcome, Vec<Vec<C<f64>>>> = BTreeMap::new();
        for j in 0..DD {
            let run = self.propagate(&QuditState::basis(D, j / D, j % D)?, splitters)?;
            for (b, v) in run.branches {
                cols.entry(b).or_default().push(v);
            }
        }
        Ok(cols.into_iter().map(|(b, c)| (b, CMatrix::from_columns(&c))).collect())
    }

    /// Fourier coefficients of the maps over a grid of jitter phases.
    fn jitter_expansion(&self) -> Result<&JitterExpansion> {
        if let Some(e) = self.jitter_expansion.get() {
            return Ok(e);
        }
        let n = JITTER_POINTS;
        let step = 2.0 * std::f64::consts::PI / n as f64;
        let mut samples = Vec::with_capacity(n * n);
        for p in 0..n {
            for q in 0..n {
                samples.push(self.maps_through(&self.jittered_splitters([step * p as f64, step * q as f64])?)?);
            }
        }
        let mut coeffs = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                let mut acc: BTreeMap<BellOutcome, CMatrix<f64>> = BTreeMap::new();
                for p in 0..n {
                    for q in 0..n {
                        let w = C::from_polar(1.0 / (n * n) as f64, -step * (a * p + b * q) as f64);
                        for (bell, m) in &samples[p * n + q] {
                            let e = acc.entry(*bell).or_insert_with(|| CMatrix::zeros(DD, DD));
                            for i in 0..DD {
                                for j in 0..DD {
                                    e[(i, j)] += m[(i, j)] * w;
                                }
                            }
                        }
                    }
                }
                coeffs.push(acc);
            }
        }
        Ok(self.jitter_expansion.get_or_init(|| JitterExpansion { coeffs }))
    }

    /// Same maps as [`Pipeline::branch_maps`], but each realization's
    /// splitters are rebuilt and every basis input propagated explicitly.
    /// Roughly 20 ms per jittered realization.
    pub fn direct_branch_maps(&self, realizations: &[Option<NoiseRealization>], loss: f64) -> Result<BranchMaps> {
        let mut out = Vec::with_capacity(realizations.len());
        for r in realizations {
            let mut maps = match r {
                Some(r) if r.jitter != [0.0, 0.0] => self.maps_through(&self.jittered_splitters(r.jitter)?)?,
                _ => self.maps_through(&self.splitters)?,
            };
            if let Some(r) = r {
                let ph = Self::input_phases(r);
                for m in maps.values_mut() {
                    for i in 0..DD {
                        for j in 0..DD {
                            m[(i, j)] *= ph[j];
                        }
                    }
                }
            }
            out.push(maps);
        }
        Ok(BranchMaps { realizations: out, loss_factor: (1.0 - loss).powi(4) })
    }

    /// Branch maps from the 16 basis inputs under each realization.
    pub fn branch_maps(&self, realizations: &[Option<NoiseRealization>], loss: f64) -> Result<BranchMaps> {
        let mut base = None;
        let mut out = Vec::with_capacity(realizations.len());
        for r in realizations {
            let jitter = r.as_ref().map(|r| r.jitter).unwrap_or([0.0, 0.0]);
            let mut maps = if jitter == [0.0, 0.0] {
                if base.is_none() {
                    base = Some(self.maps_through(&self.splitters)?);
                }
                base.clone().expect("just set")
            } else {
                let n = JITTER_POINTS;
                let mut acc: BTreeMap<BellOutcome, CMatrix<f64>> = BTreeMap::new();
                for (k, terms) in self.jitter_expansion()?.coeffs.iter().enumerate() {
                    let w = C::from_polar(1.0, jitter[0] * (k / n) as f64 + jitter[1] * (k % n) as f64);
                    for (bell, m) in terms {
                        let e = acc.entry(*bell).or_insert_with(|| CMatrix::zeros(DD, DD));
                        for i in 0..DD {
                            for j in 0..DD {
                                e[(i, j)] += m[(i, j)] * w;
                            }
                        }
                    }
                }
                acc
            };
            if let Some(r) = r {
                let ph = Self::input_phases(r);
                for m in maps.values_mut() {
                    for i in 0..DD {
                        for j in 0..DD {
                            m[(i, j)] *= ph[j];
                        }
                    }
                }
            }
            out.push(maps);
        }
        Ok(BranchMaps { realizations: out, loss_factor: (1.0 - loss).powi(4) })
    }
}

/// Heralded result of [`run_cpf_d4`].
#[derive(Clone, Debug)]
pub struct CpfRun {
    /// Density matrix of photons 1 and 4 (row-major `m*4+n`).
    pub rho: CMatrix<f64>,
    /// Probability of a heralded, accepted event.
    pub probability: f64,
    pub branch_probabilities: BTreeMap<BellOutcome, f64>,
    /// Detector-pattern probabilities jointly with the four-fold coincidence.
    pub tallies: BTreeMap<String, f64>,
    /// Output state when the run is coherent.
    pub pure: Option<QuditState<f64>>,
}

impl CpfRun {
    /// `<phi| rho |phi>`.
    pub fn fidelity_to(&self, phi: &QuditState<f64>) -> f64 {
        let v = phi.amplitudes();
        let rv = self.rho.mul_vec(v);
        v.iter().zip(&rv).map(|(a, b)| a.conj() * b).sum::<C<f64>>().re
    }
}

/// Runs the gate on `input`, keeping Bell outcomes in `accepted`.
pub fn run_cpf_d4(input: &CpfInput, accepted: &[BellOutcome], noise: &NoiseSpec) -> Result<CpfRun> {
    let pipeline = Pipeline::new()?;
    run_cpf_d4_with(&pipeline, input, accepted, noise)
}

/// [`run_cpf_d4`] on a prebuilt pipeline.
pub fn run_cpf_d4_with(pipeline: &Pipeline, input: &CpfInput, accepted: &[BellOutcome], noise: &NoiseSpec) -> Result<CpfRun> {
    noise.validate()?;
    if accepted.is_empty() {
        return Err(Error::InvalidParameter("no accepted Bell outcome".into()));
    }
    let psi = input.to_qudit()?;
    let realizations = noise.draws()?;
    let n = realizations.len() as f64;
    let loss = (1.0 - noise.loss).powi(4);
    let mut rho = CMatrix::zeros(DD, DD);
    let mut branch_probabilities: BTreeMap<BellOutcome, f64> = BTreeMap::new();
    let mut tallies: BTreeMap<String, f64> = BTreeMap::new();
    let mut last = None;
    for r in &realizations {
        let run = pipeline.run_direct(&psi, r.as_ref())?;
        for (b, v) in &run.branches {
            *branch_probabilities.entry(*b).or_default() += norm_sqr(v) * loss / n;
            if accepted.contains(b) {
                for i in 0..DD {
                    for j in 0..DD {
                        rho[(i, j)] += v[i] * v[j].conj() / n;
                    }
                }
            }
        }
        for (k, p) in &run.tallies {
            *tallies.entry(k.clone()).or_default() += p * loss / n;
        }
        last = Some(run);
    }
    let p_acc: f64 = rho.trace().re;
    if !(p_acc > 1e-14) {
        return Err(Error::EmptyPostSelection);
    }
    let rho = rho.scale(C::new(1.0 / p_acc, 0.0));
    let pure = match (noise.is_coherent(), last) {
        (true, Some(run)) => {
            let (_, v) = run
                .branches
                .iter().find(|(b, v)| accepted.contains(b) && norm_sqr(v) > 1e-14)
                .ok_or(Error::EmptyPostSelection)?;
            let s = QuditState::normalized(D, v.clone())?;
            let purity = (&rho * &rho).trace().re;
            ((purity - 1.0).abs() < 1e-9).then_some(s)
        }
        _ => None,
    };
    Ok(CpfRun { rho, probability: p_acc * loss, branch_probabilities, tallies, pure })
}
