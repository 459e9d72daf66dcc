use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::analysis::BasisName;
use crate::error::Error;
use crate::mode_space::{parse_angle, Element, PlacedElement};
use crate::oam_d4::{Pipeline, PreparationRecipe};
use crate::phase_lock::{DriftKind, DriftModel};
use crate::qudit::BellOutcome;

use super::netlist::*;

/// A problem found in a netlist, with a 1-based position (0 when unknown).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            return write!(f, "{}", self.message);
        }
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Item {
    Key(&'static str, String),
    Source(usize),
    Element(usize),
    Section(&'static str),
}

#[derive(Default)]
struct Locator(HashMap<Item, (usize, usize)>);

impl Locator {
    fn at(&self, item: &Item) -> (usize, usize) {
        self.0.get(item).copied().unwrap_or((0, 0))
    }
}

struct Sink {
    diags: Vec<Diagnostic>,
}

impl Sink {
    fn push(&mut self, (line, col): (usize, usize), message: impl Into<String>) {
        self.diags.push(Diagnostic { line, col, message: message.into() });
    }
}

const SECTIONS: [&str; 7] = ["space", "run", "sources", "elements", "detection", "noise", "lock"];

/// Column of the first `=` followed by nothing, for "missing value" errors.
fn empty_value_col(text: &str) -> Option<usize> {
    let b = text.as_bytes();
    (0..b.len()).find(|&i| {
        b[i] == b'=' && text[i + 1..].trim_start().chars().next().is_none_or(|c| matches!(c, ',' | ')' | ']' | ';'))
    })
}

fn message(e: &Error) -> String {
    match e {
        Error::InvalidParameter(m) => m.clone(),
        other => other.to_string(),
    }
}

fn split_list(v: &str) -> Vec<String> {
    v.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect()
}

/// Values of the `[lock]` section before the drift model is assembled.
#[derive(Default)]
struct LockDraft {
    present: bool,
    block: LockBlock,
    drift_kind: Option<String>,
    drift_pos: (usize, usize),
    sigma: Option<f64>,
    amplitude: Option<f64>,
    period: Option<f64>,
    size: Option<f64>,
    at: Option<f64>,
    initial: f64,
}

/// Parses the line-oriented text form. Never panics; every problem becomes a
/// positioned diagnostic.
pub fn parse_netlist(text: &str) -> Result<Netlist, Diagnostics> {
    let mut sink = Sink { diags: Vec::new() };
    let mut loc = Locator::default();
    let mut n = Netlist::default();
    let mut lock = LockDraft { block: LockBlock::default(), ..LockDraft::default() };
    let mut section: Option<&'static str> = None;
    let mut seen_keys: BTreeSet<(String, String)> = BTreeSet::new();
    let mut seen_sections: BTreeSet<&'static str> = BTreeSet::new();

    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        let col0 = content[..indent].chars().count() + 1;

        if let Some(name) = trimmed.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                sink.push((line_no, col0), "unterminated section header");
                section = None;
                continue;
            };
            match SECTIONS.iter().find(|s| **s == name.trim()) {
                Some(s) => {
                    if !seen_sections.insert(s) {
                        sink.push((line_no, col0), format!("duplicate section [{s}]"));
                    }
                    loc.0.insert(Item::Section(s), (line_no, col0));
                    if *s == "lock" {
                        lock.present = true;
                    }
                    section = Some(s);
                }
                None => {
                    sink.push((line_no, col0), format!("unknown section [{}]", name.trim()));
                    section = None;
                }
            }
            continue;
        }

        if section == Some("elements") {
            let idx = n.elements.len();
            match trimmed.parse::<PlacedElement>() {
                Ok(e) => {
                    loc.0.insert(Item::Element(idx), (line_no, col0));
                    n.elements.push(e);
                }
                Err(e) => {
                    let col = match &e {
                        Error::InvalidParameter(m) if m.starts_with("missing parameter value") => {
                            empty_value_col(trimmed).map(|c| col0 + c).unwrap_or(col0)
                        }
                        _ => col0,
                    };
                    let msg = match &e {
                        Error::UnknownElement(k) => format!("unknown element kind `{k}`"),
                        other => message(other),
                    };
                    sink.push((line_no, col), msg);
                }
            }
            continue;
        }

        let Some((key, value)) = trimmed.split_once('=') else {
            sink.push((line_no, col0), format!("expected `key = value`, got `{trimmed}`"));
            continue;
        };
        let key = key.trim().to_string();
        let vcol = col0 + trimmed.find('=').map(|i| i + 1).unwrap_or(0) + (value.len() - value.trim_start().len());
        let value = value.trim();
        let sec = section.unwrap_or("");

        if sec == "sources" {
            let idx = n.sources.len();
            if value.is_empty() {
                sink.push((line_no, vcol), "missing parameter value");
                continue;
            }
            match trimmed.parse::<Source>() {
                Ok(s) => {
                    loc.0.insert(Item::Source(idx), (line_no, col0));
                    n.sources.push(s);
                }
                Err(e) => sink.push((line_no, vcol), message(&e)),
            }
            continue;
        }

        if !seen_keys.insert((sec.to_string(), key.clone())) {
            sink.push((line_no, col0), format!("duplicate key `{key}`"));
            continue;
        }
        if value.is_empty() {
            sink.push((line_no, vcol), format!("missing parameter value for `{key}`"));
            continue;
        }
        let pos = (line_no, vcol);
        let sec_static: &'static str = SECTIONS.iter().find(|s| **s == sec).copied().unwrap_or("");
        loc.0.insert(Item::Key(sec_static, key.clone()), pos);

        let mut err = |m: String| sink.push(pos, m);
        let num = |v: &str| parse_angle(v).map_err(|e| message(&e));
        let int = |v: &str| v.parse::<u64>().map_err(|_| format!("expected a non-negative integer, got `{v}`"));
        let boolean = |v: &str| match v {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(format!("expected true or false, got `{v}`")),
        };

        let res: Result<(), String> = match (sec, key.as_str()) {
            ("", "version") => int(value).map(|v| n.version = v as u32),
            ("space", "paths") => {
                n.space.paths = split_list(value);
                Ok(())
            }
            ("space", "bound") => int(value).map(|v| n.space.bound = v as u32),
            ("run", "kind") => value.parse::<RunKind>().map(|k| n.run.kind = k).map_err(|e| message(&e)),
            ("run", "shots") => int(value).map(|v| n.run.shots = v),
            ("run", "seed") => int(value).map(|v| n.run.seed = v),
            ("run", "analytic") => boolean(value).map(|v| n.run.analytic = v),
            ("detection", "pattern") => {
                let mut m = BTreeMap::new();
                let mut r = Ok(());
                for part in split_list(value) {
                    match part.rsplit_once(':').map(|(p, c)| (p.trim().to_string(), c.trim().parse::<u32>())) {
                        Some((p, Ok(c))) if !p.is_empty() => {
                            if m.insert(p.clone(), c).is_some() {
                                r = Err(format!("path `{p}` listed twice in pattern"));
                            }
                        }
                        _ => r = Err(format!("pattern entries are `path:count`, got `{part}`")),
                    }
                }
                n.detection.pattern = m;
                r
            }
            ("detection", "bases") => split_list(value)
                .iter()
                .map(|b| b.parse::<BasisName>().map_err(|e| message(&e)))
                .collect::<Result<Vec<_>, _>>()
                .map(|v| n.detection.bases = v),
            ("detection", "accepted") => split_list(value)
                .iter()
                .map(|b| BellOutcome::parse(b).map_err(|e| message(&e)))
                .collect::<Result<Vec<_>, _>>()
                .map(|v| n.detection.accepted = v),
            ("detection", "resolve") => match value {
                "paths" => {
                    let _: () = n.detection.resolve_modes = false;
                    Ok(())
                },
                "modes" => {
                    let _: () = n.detection.resolve_modes = true;
                    Ok(())
                },
                _ => Err(format!("resolve must be `paths` or `modes`, got `{value}`")),
            },
            ("noise", "phase_jitter") => num(value).map(|v| n.noise.phase_jitter = v),
            ("noise", "oam_dephasing") => num(value).map(|v| n.noise.oam_dephasing = v),
            ("noise", "loss") => num(value).map(|v| n.noise.loss = v),
            ("noise", "visibility") => num(value).map(|v| n.noise.visibility = v),
            ("noise", "trajectories") => int(value).map(|v| n.noise.trajectories = v as usize),
            ("lock", k) => lock_key(&mut lock, k, value, pos),
            ("", k) => Err(format!("key `{k}` must be inside a section")),
            (s, k) => Err(format!("unknown key `{k}` in [{s}]")),
        };
        if let Err(m) = res {
            err(m);
        }
    }

    if lock.present {
        match assemble_drift(&lock) {
            Ok(d) => lock.block.drift = d,
            Err(m) => sink.push(lock.drift_pos, m),
        }
        n.lock = Some(lock.block);
    }
    n.noise.seed = n.run.seed;
    validate(&n, &loc, &mut sink);
    if sink.diags.is_empty() {
        Ok(n)
    } else {
        Err(Diagnostics(sink.diags))
    }
}

fn lock_key(l: &mut LockDraft, key: &str, value: &str, pos: (usize, usize)) -> Result<(), String> {
    let num = || parse_angle(value).map_err(|e| message(&e));
    let p = &mut l.block.params;
    let g = &mut l.block.gains;
    match key {
        "theta" => p.theta = num()?,
        "omega" => p.omega = num()?,
        "f_mod" => p.omega = 2.0 * std::f64::consts::PI * num()?,
        "carrier" => p.carrier = num()?,
        "tau" => p.tau = num()?,
        "e0h" => p.e0h = num()?,
        "e0v" => p.e0v = num()?,
        "lpf_cutoff" => p.lpf_cutoff = Some(num()?),
        "dt" => p.dt = num()?,
        "detector_noise" => p.detector_noise = num()?,
        "drift" => {
            l.drift_kind = Some(value.to_string());
            l.drift_pos = pos;
        }
        "sigma" => l.sigma = Some(num()?),
        "amplitude" => l.amplitude = Some(num()?),
        "period" => l.period = Some(num()?),
        "size" => l.size = Some(num()?),
        "at" => l.at = Some(num()?),
        "drift_initial" => l.initial = num()?,
        "kp" => g.kp = num()?,
        "ki" => g.ki = num()?,
        "kd" => g.kd = num()?,
        "out_min" => g.out_min = num()?,
        "out_max" => g.out_max = num()?,
        "duration" => l.block.duration = num()?,
        "setpoint" => l.block.setpoint = num()?,
        "stride" => {
            l.block.stride = value.parse().map_err(|_| format!("expected a positive integer, got `{value}`"))?
        }
        other => return Err(format!("unknown key `{other}` in [lock]")),
    }
    Ok(())
}

fn assemble_drift(l: &LockDraft) -> Result<DriftModel, String> {
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| format!("drift needs `{name}`"));
    let kind = match l.drift_kind.as_deref().unwrap_or("none") {
        "none" => DriftKind::None,
        "random-walk" => DriftKind::RandomWalk { sigma: need(l.sigma, "sigma")? },
        "sinusoidal" => DriftKind::Sinusoidal { amplitude: need(l.amplitude, "amplitude")?, period: need(l.period, "period")? },
        "step" => DriftKind::Step { size: need(l.size, "size")?, at: need(l.at, "at")? },
        other => return Err(format!("unknown drift kind `{other}`")),
    };
    Ok(DriftModel { kind, initial: l.initial })
}

/// Parses the JSON front-end (the serde form of [`Netlist`]).
pub fn parse_netlist_json(text: &str) -> Result<Netlist, Diagnostics> {
    let mut n: Netlist = serde_json::from_str(text).map_err(|e| {
        Diagnostics(vec![Diagnostic { line: e.line(), col: e.column(), message: e.to_string() }])
    })?;
    n.noise.seed = n.run.seed;
    let mut sink = Sink { diags: Vec::new() };
    validate(&n, &Locator::default(), &mut sink);
    if sink.diags.is_empty() {
        Ok(n)
    } else {
        Err(Diagnostics(sink.diags))
    }
}

/// Picks the front-end by the first non-blank character.
pub fn parse_any(text: &str) -> Result<Netlist, Diagnostics> {
    if text.trim_start().starts_with('{') {
        parse_netlist_json(text)
    } else {
        parse_netlist(text)
    }
}

/// Checks a structurally valid netlist.
pub fn check_netlist(n: &Netlist) -> Result<(), Diagnostics> {
    let mut sink = Sink { diags: Vec::new() };
    validate(n, &Locator::default(), &mut sink);
    if sink.diags.is_empty() {
        Ok(())
    } else {
        Err(Diagnostics(sink.diags))
    }
}

fn is_aux(r: &str) -> bool {
    matches!(r, "aux" | "auxiliary")
}

fn validate(n: &Netlist, loc: &Locator, sink: &mut Sink) {
    let key = |s: &'static str, k: &str| loc.at(&Item::Key(s, k.to_string()));
    if n.version != NETLIST_VERSION {
        sink.push(key("", "version"), format!("unsupported version {} (expected {NETLIST_VERSION})", n.version));
    }
    let space_pos = key("space", "paths");
    if !(1..=12).contains(&n.space.bound) {
        sink.push(key("space", "bound"), format!("bound {} out of range 1..=12", n.space.bound));
    }
    let mut declared = BTreeSet::new();
    for p in &n.space.paths {
        if !declared.insert(p.as_str()) {
            sink.push(space_pos, format!("duplicate path `{p}`"));
        }
    }
    if n.run.kind != RunKind::Lock && n.space.paths.is_empty() {
        sink.push(loc.at(&Item::Section("space")), "no paths declared");
    }
    let undeclared = |p: &str| !declared.contains(p);

    let mut ids = BTreeSet::new();
    for (i, s) in n.sources.iter().enumerate() {
        let at = loc.at(&Item::Source(i));
        if !ids.insert(s.id.as_str()) {
            sink.push(at, format!("duplicate photon id `{}`", s.id));
        }
        if undeclared(&s.path) {
            sink.push(at, format!("undeclared path `{}`", s.path));
        }
        match &s.state {
            SourceState::Recipe(r) if !is_aux(r) => {
                if PreparationRecipe::lookup(r).is_err() {
                    sink.push(at, format!("unknown preparation recipe `{r}`"));
                }
            }
            SourceState::Input if n.run.kind != RunKind::CpfD4 => {
                sink.push(at, "`input` sources are only valid in cpf_d4 runs");
            }
            SourceState::Explicit(terms) => {
                let mut norm = 0.0;
                for (_, l, [re, im]) in terms {
                    if l.unsigned_abs() > n.space.bound as u64 {
                        sink.push(at, format!("OAM {l} outside the truncation bound {}", n.space.bound));
                    }
                    norm += re * re + im * im;
                }
                if (norm - 1.0).abs() > 1e-6 {
                    sink.push(at, format!("state is not normalized (norm^2 = {norm})"));
                }
            }
            _ => {}
        }
    }

    for (i, e) in n.elements.iter().enumerate() {
        let at = loc.at(&Item::Element(i));
        let paths: Vec<&String> = match (&e.element, &e.path) {
            (Element::Pbs { inputs, outputs } | Element::BeamSplitter { inputs, outputs }, _) => {
                inputs.iter().chain(outputs).collect()
            }
            (_, Some(p)) => vec![p],
            (_, None) => vec![],
        };
        for p in paths {
            if undeclared(p) {
                sink.push(at, format!("undeclared path `{p}`"));
            }
        }
        if let Element::QPlate { q, .. } = e.element {
            if q.abs() > 4.0 {
                sink.push(at, format!("QP charge {q} out of range [-4, 4]"));
            }
        }
    }

    let det = loc.at(&Item::Key("detection", "pattern".into()));
    for p in n.detection.pattern.keys() {
        if undeclared(p) {
            sink.push(det, format!("undeclared path `{p}`"));
        }
    }
    if n.run.shots > 1_000_000_000 {
        sink.push(key("run", "shots"), format!("shots {} exceeds 1e9", n.run.shots));
    }
    if let Err(e) = n.noise.validate() {
        sink.push(loc.at(&Item::Section("noise")), message(&e));
    }

    match n.run.kind {
        RunKind::Circuit => {
            if n.sources.is_empty() {
                sink.push(loc.at(&Item::Section("sources")), "circuit runs need at least one source");
            }
            if !n.detection.bases.is_empty() {
                sink.push(key("detection", "bases"), "basis tables apply to cpf_d4 runs only");
            }
        }
        RunKind::CpfD4 => validate_cpf(n, loc, sink),
        RunKind::Lock => {
            if n.lock.is_none() {
                sink.push(key("run", "kind"), "lock runs need a [lock] section");
            }
        }
    }
    if let Some(l) = &n.lock {
        let at = loc.at(&Item::Section("lock"));
        for r in [l.params.validate(), l.drift.validate(), l.gains.validate()] {
            if let Err(e) = r {
                sink.push(at, message(&e));
            }
        }
        if !(l.duration > 0.0 && l.duration <= 100.0) {
            sink.push(at, format!("duration {} s out of range (0, 100]", l.duration));
        }
        if l.stride == 0 {
            sink.push(at, "stride must be >= 1");
        }
    }
}

fn validate_cpf(n: &Netlist, loc: &Locator, sink: &mut Sink) {
    let layout = Pipeline::layout();
    let key = |s: &'static str, k: &str| loc.at(&Item::Key(s, k.to_string()));
    let want: BTreeSet<&String> = layout.paths.iter().collect();
    let got: BTreeSet<&String> = n.space.paths.iter().collect();
    if want != got || n.space.bound != layout.bound {
        sink.push(key("space", "paths"), format!("cpf_d4 runs use paths {} with bound {}", layout.paths.join(", "), layout.bound));
    }
    if n.sources.len() != 4 {
        sink.push(loc.at(&Item::Section("sources")), format!("cpf_d4 runs need 4 sources, found {}", n.sources.len()));
    } else {
        for (i, (s, (path, input))) in n.sources.iter().zip(&layout.sources).enumerate() {
            let ok = s.path == *path
                && match &s.state {
                    SourceState::Input => *input,
                    SourceState::Recipe(r) => !*input && is_aux(r),
                    SourceState::Explicit(_) => false,
                };
            if !ok {
                let what = if *input { "input" } else { "recipe(aux)" };
                sink.push(loc.at(&Item::Source(i)), format!("source {} must be `{what} @ {path}`", i + 1));
            }
        }
    }
    if n.elements.len() != layout.elements.len() {
        sink.push(
            loc.at(&Item::Section("elements")),
            format!("cpf_d4 runs list the {} pipeline elements, found {}", layout.elements.len(), n.elements.len()),
        );
    }
    if let Some((i, (a, b))) = n.elements.iter().zip(&layout.elements).enumerate().find(|(_, (a, b))| !same_element(a, b)) {
        sink.push(loc.at(&Item::Element(i)), format!("element {} differs from the pipeline: expected `{b}`, found `{a}`", i + 1));
    }
    let want_pattern: BTreeMap<String, u32> = layout.coincidence.iter().map(|p| (p.clone(), 1)).collect();
    if n.detection.pattern != want_pattern {
        let listed: Vec<String> = layout.coincidence.iter().map(|p| format!("{p}:1")).collect();
        sink.push(key("detection", "pattern"), format!("cpf_d4 runs herald on pattern {}", listed.join(", ")));
    }
    if n.detection.accepted.is_empty() {
        sink.push(key("detection", "accepted"), "no accepted Bell outcome");
    }
}

/// Equality up to 1e-12 on numeric parameters (via the descriptor text).
fn same_element(a: &PlacedElement, b: &PlacedElement) -> bool {
    if a == b {
        return true;
    }
    if a.path != b.path || a.element.name() != b.element.name() {
        return false;
    }
    let nums = |e: &PlacedElement| -> Vec<f64> {
        e.element
            .to_string()
            .split(|c: char| !(c.is_ascii_digit() || c == '.' || c == '-' || c == 'e'))
            .filter_map(|t| t.parse().ok())
            .collect()
    };
    let (x, y) = (nums(a), nums(b));
    x.len() == y.len() && x.iter().zip(&y).all(|(p, q)| (p - q).abs() <= 1e-12)
}
