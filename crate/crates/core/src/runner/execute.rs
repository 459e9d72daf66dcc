use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::{fidelity_report, superposition_suite, BasisName, Channel, FidelityReport, SuperpositionResult};
use crate::error::Error;
use crate::fock::{apply_transform, inject_product, post_select_raw, sample_counts, DetectionPattern, MultiPhotonState};
use crate::mode_space::{compose_transforms, Conventions, Mode, ModeSpace, SinglePhotonState};
use crate::oam_d4::{prepare_auxiliary, prepare_input, Pipeline, PreparationRecipe};
use crate::phase_lock::{simulate_lock, LockTrace};
use crate::qudit::{cpf_oracle, BellOutcome};

use super::netlist::{Netlist, RunKind, Source, SourceState};
use super::parse::{check_netlist, Diagnostics};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Diagnostics(Diagnostics),
    #[error("{context}: {source}")]
    Runtime { context: String, source: Error },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl RunError {
    /// Process exit code: 1 for netlist diagnostics, 2 for anything at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Diagnostics(_) => 1,
            _ => 2,
        }
    }
}

fn ctx(context: impl Into<String>) -> impl FnOnce(Error) -> RunError {
    let context = context.into();
    move |source| RunError::Runtime { context, source }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    /// SHA-256 of the canonical netlist text.
    pub netlist_sha256: String,
    pub seed: u64,
    pub tool_version: String,
    pub analytic: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LockSummary {
    pub rms_open: f64,
    pub rms_closed: f64,
    pub gain: f64,
    pub diverged: bool,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunResult {
    pub kind: RunKind,
    /// Probability that the run heralds (or passes detection) at all.
    pub heralding_probability: Option<f64>,
    /// Exact outcome probabilities.
    pub probabilities: BTreeMap<String, f64>,
    /// Sampled counts; empty in analytic mode.
    pub tallies: BTreeMap<String, u64>,
    pub shots: u64,
    pub fidelity: Option<FidelityReport>,
    pub process_fidelity: Option<f64>,
    pub superpositions: Option<Vec<SuperpositionResult>>,
    pub lock: Option<LockSummary>,
    #[serde(skip)]
    pub lock_trace: Option<(LockTrace, usize)>,
    pub provenance: Provenance,
}

/// SHA-256 (hex) of the canonical text form.
pub fn netlist_hash(n: &Netlist) -> String {
    let digest = Sha256::digest(n.serialize().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs a validated netlist. The result depends only on the netlist (seed included).
pub fn execute(n: &Netlist) -> Result<RunResult, RunError> {
    check_netlist(n).map_err(RunError::Diagnostics)?;
    let sampled = n.run.shots > 0 && !n.run.analytic;
    let mut r = RunResult {
        kind: n.run.kind,
        heralding_probability: None,
        probabilities: BTreeMap::new(),
        tallies: BTreeMap::new(),
        shots: if sampled { n.run.shots } else { 0 },
        fidelity: None,
        process_fidelity: None,
        superpositions: None,
        lock: None,
        lock_trace: None,
        provenance: Provenance {
            netlist_sha256: netlist_hash(n),
            seed: n.run.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            analytic: !sampled,
        },
    };
    match n.run.kind {
        RunKind::Circuit => run_circuit(n, &mut r)?,
        RunKind::CpfD4 => run_cpf(n, &mut r)?,
        RunKind::Lock => run_lock(n, &mut r)?,
    }
    if sampled && !r.probabilities.is_empty() {
        r.tallies = sample_counts(&r.probabilities, n.run.shots, n.run.seed, 0);
    }
    Ok(r)
}

fn relabel(state: &SinglePhotonState<f64>, space: &std::sync::Arc<ModeSpace>, path: &str) -> crate::error::Result<SinglePhotonState<f64>> {
    let terms: Vec<(Mode, _)> = state.terms().into_iter().map(|(m, a)| (Mode::new(path, m.pol, m.oam), a)).collect();
    SinglePhotonState::from_terms(space.clone(), &terms)
}

/// Single-photon state of a source and its preparation success probability.
fn source_state(s: &Source, space: &std::sync::Arc<ModeSpace>) -> crate::error::Result<(SinglePhotonState<f64>, f64)> {
    match &s.state {
        SourceState::Recipe(r) if matches!(r.as_str(), "aux" | "auxiliary") => Ok((relabel(&prepare_auxiliary()?, space, &s.path)?, 1.0)),
        SourceState::Recipe(r) => {
            let (st, p) = prepare_input(&PreparationRecipe::lookup(r)?)?;
            Ok((relabel(&st, space, &s.path)?, p))
        }
        SourceState::Explicit(terms) => {
            let t: Vec<_> = terms.iter().map(|(pol, l, [re, im])| (Mode::new(s.path.clone(), *pol, *l), crate::C::new(*re, *im))).collect();
            Ok((SinglePhotonState::from_terms(space.clone(), &t)?.normalized()?, 1.0))
        }
        SourceState::Input => Err(Error::InvalidParameter("`input` sources need a cpf_d4 run".into())),
    }
}

fn outcome_key(state: &MultiPhotonState<f64>, cfg: &crate::fock::OccupationConfig, modes: bool) -> String {
    let space = state.space();
    if modes {
        cfg.modes(space).iter().map(|m| m.to_string()).collect::<Vec<_>>().join("+")
    } else {
        (0..space.paths().len())
            .filter_map(|p| {
                let c = cfg.count_on_path(space, p);
                (c > 0).then(|| format!("{}={c}", space.paths()[p]))
            })
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn run_circuit(n: &Netlist, r: &mut RunResult) -> Result<(), RunError> {
    let space = ModeSpace::new(n.space.paths.clone(), n.space.bound).map_err(ctx("[space]"))?;
    let mut photons = Vec::new();
    let mut prep = 1.0;
    for s in &n.sources {
        let (st, p) = source_state(s, &space).map_err(ctx(format!("source `{}`", s.id)))?;
        photons.push(st);
        prep *= p;
    }
    let conv = Conventions::frozen();
    let parts = n
        .elements
        .iter()
        .enumerate()
        .map(|(i, e)| e.transform::<f64>(&space, &conv).map_err(ctx(format!("element {} `{e}`", i + 1))))
        .collect::<Result<Vec<_>, _>>()?;
    let chain = compose_transforms(&space, &parts).map_err(ctx("[elements]"))?;
    let input = inject_product(&photons).map_err(ctx("[sources]"))?;
    let out = apply_transform(&chain, &input).map_err(ctx("[elements]"))?;
    let pattern = DetectionPattern::per_path(n.detection.pattern.iter().map(|(k, v)| (k.clone(), *v)));
    let (kept, _) = post_select_raw(&out, &pattern).map_err(ctx("[detection]"))?;
    let mass = kept.norm_sqr();
    r.heralding_probability = Some(prep * mass);
    if mass > 0.0 {
        for (cfg, a) in kept.terms() {
            *r.probabilities.entry(outcome_key(&kept, cfg, n.detection.resolve_modes)).or_default() += a.norm_sqr() / mass;
        }
    }
    Ok(())
}

fn run_cpf(n: &Netlist, r: &mut RunResult) -> Result<(), RunError> {
    let pipeline = Pipeline::new().map_err(ctx("cpf_d4 pipeline"))?;
    let accepted = &n.detection.accepted;
    let channel = Channel::with_pipeline(pipeline, &n.noise, accepted).map_err(ctx("[noise]"))?;
    let shots = (r.shots > 0).then_some(r.shots);

    let u = cpf_oracle::<f64>(4).map_err(ctx("cpf_d4 pipeline"))?;
    let loss = channel.maps.loss_factor;
    let mut herald = 0.0;
    let mut total = 0.0;
    for b in BellOutcome::ALL {
        let p = channel.maps.overlap_and_mass(&u, &[b]).1 * loss;
        total += p;
        if accepted.contains(&b) {
            herald += p;
        }
        r.probabilities.insert(b.name().to_string(), p);
    }
    r.probabilities.insert("none".into(), (1.0 - total).max(0.0));
    r.heralding_probability = Some(herald);

    let bases = if n.detection.bases.is_empty() { vec![BasisName::ZX, BasisName::XZ] } else { n.detection.bases.clone() };
    if bases.iter().any(|b| matches!(b, BasisName::ZX | BasisName::XZ)) {
        r.fidelity = Some(fidelity_report(&channel, shots, n.run.seed).map_err(ctx("fidelity tables"))?);
    }
    if bases.contains(&BasisName::TableA3) {
        r.superpositions = Some(superposition_suite(&channel, shots, n.run.seed).map_err(ctx("superposition inputs"))?);
    }
    r.process_fidelity = Some(channel.process_fidelity().map_err(ctx("process fidelity"))?);
    Ok(())
}

fn run_lock(n: &Netlist, r: &mut RunResult) -> Result<(), RunError> {
    let l = n.lock.as_ref().ok_or_else(|| RunError::Runtime {
        context: "[lock]".into(),
        source: Error::InvalidParameter("missing lock section".into()),
    })?;
    let tr = simulate_lock(&l.params, &l.drift, &l.gains, l.duration, l.setpoint, n.run.seed).map_err(ctx("[lock]"))?;
    r.lock = Some(LockSummary {
        rms_open: tr.rms_open(),
        rms_closed: tr.rms_closed(),
        gain: tr.gain,
        diverged: tr.diverged,
        samples: tr.len(),
    });
    r.lock_trace = Some((tr, l.stride));
    Ok(())
}
