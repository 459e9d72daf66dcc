use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::analysis::BasisName;
use crate::error::{Error, Result};
use crate::mode_space::{parse_angle, Mode, PlacedElement, Pol};
use crate::oam_d4::NoiseSpec;
use crate::phase_lock::{DriftModel, LockParams, PidGains};
use crate::qudit::BellOutcome;

pub const NETLIST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    /// Generic linear-optics circuit on the declared space.
    Circuit,
    /// The four-photon d = 4 gate with fidelity analysis.
    CpfD4,
    /// Phase-lock loop simulation.
    Lock,
}

impl fmt::Display for RunKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunKind::Circuit => "circuit",
            RunKind::CpfD4 => "cpf_d4",
            RunKind::Lock => "lock",
        })
    }
}

impl FromStr for RunKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "circuit" => Ok(RunKind::Circuit),
            "cpf_d4" => Ok(RunKind::CpfD4),
            "lock" => Ok(RunKind::Lock),
            other => Err(Error::InvalidParameter(format!("unknown run kind `{other}`"))),
        }
    }
}

/// What a photon source emits.
#[derive(Clone, Debug, PartialEq)]
pub enum SourceState {
    /// A preparation-table row (name or number), or `aux` for the auxiliary photon.
    Recipe(String),
    /// Placeholder filled from the basis tables in `cpf_d4` runs.
    Input,
    /// Explicit `(pol, l, amplitude)` terms.
    Explicit(Vec<(Pol, i64, [f64; 2])>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Source {
    pub id: String,
    pub state: SourceState,
    pub path: String,
}

impl fmt::Display for SourceState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceState::Recipe(r) => write!(f, "recipe({r})"),
            SourceState::Input => f.write_str("input"),
            SourceState::Explicit(terms) => {
                f.write_str("state(")?;
                for (i, (pol, l, [re, im])) in terms.iter().enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    write!(f, "{pol}:{l}=({re},{im})")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {} @ {}", self.id, self.state, self.path)
    }
}

fn parse_amplitude(text: &str) -> Result<[f64; 2]> {
    let t = text.trim();
    match t.strip_prefix('(').and_then(|x| x.strip_suffix(')')) {
        Some(inner) => {
            let (re, im) = inner
                .split_once(',')
                .ok_or_else(|| Error::InvalidParameter(format!("amplitude `{t}` must be (re,im)")))?;
            Ok([parse_angle(re)?, parse_angle(im)?])
        }
        None => Ok([parse_angle(t)?, 0.0]),
    }
}

impl FromStr for SourceState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "input" {
            return Ok(SourceState::Input);
        }
        let body = |prefix: &str| s.strip_prefix(prefix).and_then(|x| x.strip_suffix(')')).map(str::trim);
        if let Some(r) = body("recipe(") {
            if r.is_empty() {
                return Err(Error::InvalidParameter("missing parameter value for `recipe`".into()));
            }
            return Ok(SourceState::Recipe(r.to_string()));
        }
        if let Some(inner) = body("state(") {
            let mut terms = Vec::new();
            for part in inner.split(';').filter(|p| !p.trim().is_empty()) {
                let (mode, amp) = part
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidParameter(format!("expected pol:l=amplitude, got `{}`", part.trim())))?;
                if amp.trim().is_empty() {
                    return Err(Error::InvalidParameter(format!("missing parameter value for `{}`", mode.trim())));
                }
                let m: Mode = format!("_:{}", mode.trim()).parse()?;
                terms.push((m.pol, m.oam, parse_amplitude(amp)?));
            }
            if terms.is_empty() {
                return Err(Error::InvalidParameter("state() needs at least one term".into()));
            }
            return Ok(SourceState::Explicit(terms));
        }
        Err(Error::InvalidParameter(format!("unknown source `{s}` (expected recipe(..), state(..) or input)")))
    }
}

impl FromStr for Source {
    type Err = Error;

    /// `id = state @ path`.
    fn from_str(s: &str) -> Result<Self> {
        let (id, rest) =
            s.split_once('=').ok_or_else(|| Error::InvalidParameter(format!("expected `id = source @ path`, got `{}`", s.trim())))?;
        let (state, path) =
            rest.rsplit_once('@').ok_or_else(|| Error::InvalidParameter("source needs `@ path`".into()))?;
        let (id, path) = (id.trim(), path.trim());
        if id.is_empty() || path.is_empty() {
            return Err(Error::InvalidParameter("empty source id or path".into()));
        }
        Ok(Source { id: id.to_string(), state: state.parse()?, path: path.to_string() })
    }
}

/// What is detected and how results are grouped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Detection {
    /// Required photon count per path.
    pub pattern: BTreeMap<String, u32>,
    /// Basis tables for `cpf_d4` runs.
    pub bases: Vec<BasisName>,
    /// Bell outcomes that herald success.
    pub accepted: Vec<BellOutcome>,
    /// Group circuit outcomes by path counts (`false`) or by full modes (`true`).
    pub resolve_modes: bool,
}

impl Default for Detection {
    fn default() -> Self {
        Self { pattern: BTreeMap::new(), bases: Vec::new(), accepted: vec![BellOutcome::PhiPlus], resolve_modes: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunBlock {
    pub kind: RunKind,
    /// Sampled events; `0` leaves tallies empty.
    pub shots: u64,
    pub seed: u64,
    /// Exact probabilities only (no sampling), regardless of `shots`.
    pub analytic: bool,
}

impl Default for RunBlock {
    fn default() -> Self {
        Self { kind: RunKind::Circuit, shots: 0, seed: 0, analytic: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LockBlock {
    pub params: LockParams,
    pub drift: DriftModel,
    pub gains: PidGains,
    /// Simulated time (s).
    pub duration: f64,
    pub setpoint: f64,
    /// Keep every `stride`-th sample in the emitted trace.
    pub stride: usize,
}

impl Default for LockBlock {
    fn default() -> Self {
        Self {
            params: LockParams::default(),
            drift: DriftModel::none(0.0),
            gains: PidGains::default(),
            duration: 0.1,
            setpoint: 0.0,
            stride: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceBlock {
    pub paths: Vec<String>,
    pub bound: u32,
}

impl Default for SpaceBlock {
    fn default() -> Self {
        Self { paths: Vec::new(), bound: crate::mode_space::DEFAULT_BOUND }
    }
}

/// A parsed experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Netlist {
    pub version: u32,
    #[serde(default)]
    pub space: SpaceBlock,
    #[serde(default, with = "as_strings")]
    pub sources: Vec<Source>,
    #[serde(default, with = "as_strings")]
    pub elements: Vec<PlacedElement>,
    #[serde(default)]
    pub detection: Detection,
    #[serde(default)]
    pub run: RunBlock,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lock: Option<LockBlock>,
}

impl Default for Netlist {
    fn default() -> Self {
        Self {
            version: NETLIST_VERSION,
            space: SpaceBlock::default(),
            sources: Vec::new(),
            elements: Vec::new(),
            detection: Detection::default(),
            run: RunBlock::default(),
            noise: NoiseSpec::default(),
            lock: None,
        }
    }
}

mod as_strings {
    use super::*;

    pub fn serialize<T: fmt::Display, S: Serializer>(v: &[T], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_string()))
    }

    pub fn deserialize<'de, T, D>(d: D) -> std::result::Result<Vec<T>, D::Error>
    where
        T: FromStr<Err = Error>,
        D: Deserializer<'de>,
    {
        let raw: Vec<String> = Vec::deserialize(d)?;
        raw.iter().map(|s| s.parse().map_err(serde::de::Error::custom)).collect()
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn bell_name(b: BellOutcome) -> &'static str {
    b.name()
}

impl Netlist {
    /// The built-in controlled phase-flip experiment, heralded on both
    /// distinguishable outcomes.
    pub fn cpf_d4() -> Self {
        let l = crate::oam_d4::Pipeline::layout();
        let sources = l
            .sources
            .iter()
            .enumerate()
            .map(|(i, (path, input))| Source {
                id: format!("s{}", i + 1),
                state: if *input { SourceState::Input } else { SourceState::Recipe("aux".into()) },
                path: path.clone(),
            })
            .collect();
        Self {
            space: SpaceBlock { paths: l.paths, bound: l.bound },
            sources,
            elements: l.elements,
            detection: Detection {
                pattern: l.coincidence.into_iter().map(|p| (p, 1)).collect(),
                accepted: vec![BellOutcome::PhiPlus, BellOutcome::PhiMinus],
                ..Detection::default()
            },
            run: RunBlock { kind: RunKind::CpfD4, ..RunBlock::default() },
            ..Self::default()
        }
    }

    /// A phase-lock run with default parameters.
    pub fn lock() -> Self {
        Self { run: RunBlock { kind: RunKind::Lock, ..RunBlock::default() }, lock: Some(LockBlock::default()), ..Self::default() }
    }

    /// Canonical text form; [`parse_netlist`](super::parse_netlist) reads it back unchanged.
    pub fn serialize(&self) -> String {
        let mut o = String::new();
        let _ = writeln!(o, "version = {}", self.version);

        o.push_str("\n[space]\n");
        if !self.space.paths.is_empty() {
            let _ = writeln!(o, "paths = {}", self.space.paths.join(", "));
        }
        let _ = writeln!(o, "bound = {}", self.space.bound);

        let r = &self.run;
        let _ = writeln!(o, "\n[run]\nkind = {}\nshots = {}\nseed = {}\nanalytic = {}", r.kind, r.shots, r.seed, r.analytic);

        o.push_str("\n[sources]\n");
        for s in &self.sources {
            let _ = writeln!(o, "{s}");
        }

        o.push_str("\n[elements]\n");
        for e in &self.elements {
            let _ = writeln!(o, "{e}");
        }

        let d = &self.detection;
        let pattern: Vec<String> = d.pattern.iter().map(|(k, v)| format!("{k}:{v}")).collect();
        let accepted: Vec<&str> = d.accepted.iter().map(|b| bell_name(*b)).collect();
        o.push_str("\n[detection]\n");
        for (key, list) in [("pattern", pattern.join(", ")), ("bases", join(&d.bases)), ("accepted", accepted.join(", "))] {
            if !list.is_empty() {
                let _ = writeln!(o, "{key} = {list}");
            }
        }
        let _ = writeln!(o, "resolve = {}", if d.resolve_modes { "modes" } else { "paths" });

        let n = &self.noise;
        let _ = writeln!(
            o,
            "\n[noise]\nphase_jitter = {}\noam_dephasing = {}\nloss = {}\nvisibility = {}\ntrajectories = {}",
            n.phase_jitter, n.oam_dephasing, n.loss, n.visibility, n.trajectories
        );

        if let Some(l) = &self.lock {
            let p = &l.params;
            let _ = writeln!(o, "\n[lock]\ntheta = {}\nomega = {}\ncarrier = {}\ntau = {}", p.theta, p.omega, p.carrier, p.tau);
            let _ = writeln!(o, "e0h = {}\ne0v = {}", p.e0h, p.e0v);
            if let Some(c) = p.lpf_cutoff {
                let _ = writeln!(o, "lpf_cutoff = {c}");
            }
            let _ = writeln!(o, "dt = {}\ndetector_noise = {}", p.dt, p.detector_noise);
            let _ = writeln!(o, "{}", drift_lines(&l.drift));
            let g = &l.gains;
            let _ = writeln!(o, "kp = {}\nki = {}\nkd = {}\nout_min = {}\nout_max = {}", g.kp, g.ki, g.kd, g.out_min, g.out_max);
            let _ = writeln!(o, "duration = {}\nsetpoint = {}\nstride = {}", l.duration, l.setpoint, l.stride);
        }
        o
    }
}

fn drift_lines(d: &DriftModel) -> String {
    use crate::phase_lock::DriftKind::*;
    let kind = match d.kind {
        None => "drift = none".to_string(),
        RandomWalk { sigma } => format!("drift = random-walk\nsigma = {sigma}"),
        Sinusoidal { amplitude, period } => format!("drift = sinusoidal\namplitude = {amplitude}\nperiod = {period}"),
        Step { size, at } => format!("drift = step\nsize = {size}\nat = {at}"),
    };
    format!("{kind}\ndrift_initial = {}", d.initial)
}
