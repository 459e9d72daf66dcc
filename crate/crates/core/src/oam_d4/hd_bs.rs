//! The OAM high-dimensional beam splitter: ports A, B in; C, D out.
//!
//! Port A carries the four-level qudit on l in {-2,-1,0,+1}; port B the
//! auxiliary photon on l in {-1,+1}. Level l=+1 from A and l=-1 from B are
//! exchanged between the outputs, everything else passes A->C or B->D.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mode_space::{compose_transforms, Conventions, Element, Mode, ModeSpace, ModeTransform, PlacedElement};
use crate::qudit::Port;
use crate::scalar::C;

/// Internal path names, unprefixed.
pub const HD_PATHS: [&str; 7] = ["A", "B", "P1", "P2", "C", "D", "X"];

/// One numbered stage of the assembly.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub index: usize,
    pub elements: Vec<PlacedElement>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Variant {
    Standard,
    Core,
}

/// Element-level description of one HD beam splitter.
#[derive(Clone, Debug)]
pub struct HdBeamSplitter {
    prefix: String,
    variant: Variant,
    jitter: f64,
    conventions: Conventions,
    removed: Vec<(usize, String)>,
}

impl Default for HdBeamSplitter {
    fn default() -> Self {
        Self::standard()
    }
}

impl HdBeamSplitter {
    /// Full assembly whose outputs are `H` polarized with the original OAM.
    pub fn standard() -> Self {
        Self {
            prefix: String::new(),
            variant: Variant::Standard,
            jitter: 0.0,
            conventions: Conventions::frozen(),
            removed: Vec::new(),
        }
    }

    /// Assembly with the port-D clean-up omitted: D then carries the
    /// auxiliary level as `-V|-1>` and the swapped qudit level as `-iH|+1>`,
    /// the form expected by the Bell-state stage.
    pub fn core() -> Self {
        Self { variant: Variant::Core, ..Self::standard() }
    }

    /// Prefixes every internal path (e.g. `"1"` gives `1A`, `1B`, ...).
    pub fn with_prefix(mut self, prefix: impl Into<String>) -> Self {
        self.prefix = prefix.into();
        self
    }

    /// Residual phase `zeta` of the inner interferometer (zero when locked).
    pub fn with_jitter(mut self, zeta: f64) -> Self {
        self.jitter = zeta;
        self
    }

    pub fn with_conventions(mut self, conventions: Conventions) -> Self {
        self.conventions = conventions;
        self
    }

    /// Drops the first element named `name` (e.g. `"PP"`) from step `step`.
    pub fn without_element(mut self, step: usize, name: impl Into<String>) -> Self {
        self.removed.push((step, name.into()));
        self
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    pub fn conventions(&self) -> &Conventions {
        &self.conventions
    }

    pub fn path(&self, name: &str) -> String {
        format!("{}{name}", self.prefix)
    }

    pub fn port(&self, port: Port) -> String {
        self.path(match port {
            Port::A => "A",
            Port::B => "B",
            Port::C => "C",
            Port::D => "D",
        })
    }

    pub fn paths(&self) -> Vec<String> {
        HD_PATHS.iter().map(|p| self.path(p)).collect()
    }

    pub fn steps(&self) -> Vec<Step> {
        let p = |n: &str| self.path(n);
        let on = |e: Element, n: &str| PlacedElement::on(e, p(n));
        let pbs = |i: [&str; 2], o: [&str; 2]| {
            PlacedElement::two_path(Element::Pbs { inputs: [p(i[0]), p(i[1])], outputs: [p(o[0]), p(o[1])] })
        };
        let o1 = Element::OkCnot { order: 1 };
        let o2 = Element::OkCnot { order: 2 };
        let hwp4 = Element::Hwp { angle: PI / 4.0 };

        let mut step5 = vec![on(o2.clone(), "P2"), on(Element::Mirror, "P2"), on(Element::PhasePlate { phase: PI }, "P2")];
        if self.jitter != 0.0 {
            step5.push(on(Element::PhasePlate { phase: self.jitter }, "P2"));
        }
        let mut step7 = vec![on(o1.clone(), "C"), on(Element::Mirror, "D")];
        if self.variant == Variant::Standard {
            step7.push(on(o2.clone(), "D"));
            step7.push(on(hwp4.clone(), "D"));
            step7.push(on(Element::Dove { gamma: PI / 4.0 }, "D"));
        }
        let lists = vec![
            vec![
                on(o1.clone(), "A"),
                on(o2.clone(), "B"),
                on(hwp4, "B"),
                on(Element::Dove { gamma: 0.0 }, "B"),
                on(Element::PhasePlate { phase: PI }, "B"),
            ],
            vec![pbs(["A", "X"], ["P1", "P2"])],
            vec![on(o2, "P2")],
            vec![pbs(["P2", "B"], ["D", "P2"])],
            step5,
            vec![pbs(["P1", "P2"], ["C", "X"])],
            step7,
        ];
        lists
            .into_iter()
            .enumerate()
            .map(|(i, mut elements)| {
                let index = i + 1;
                for (s, name) in &self.removed {
                    if *s == index {
                        if let Some(k) = elements.iter().position(|e| e.element.name() == name) {
                            elements.remove(k);
                        }
                    }
                }
                Step { index, elements }
            })
            .collect()
    }

    fn check_space(&self, space: &Arc<ModeSpace>) -> Result<()> {
        for p in self.paths() {
            space.path_index(&p)?;
        }
        if space.bound() < 2 {
            return Err(Error::TruncationOverflow { element: "HD beam splitter".into(), oam: 2, bound: space.bound() });
        }
        Ok(())
    }

    /// One composed transform per step.
    pub fn step_transforms(&self, space: &Arc<ModeSpace>) -> Result<Vec<ModeTransform<f64>>> {
        self.check_space(space)?;
        self.steps()
            .iter()
            .map(|step| {
                let ts = step
                    .elements
                    .iter()
                    .map(|e| e.transform(space, &self.conventions))
                    .collect::<Result<Vec<_>>>()?;
                Ok(compose_transforms(space, &ts)?.with_provenance(format!("{}HD-BS step {}", self.prefix, step.index)))
            })
            .collect()
    }

    pub fn transform(&self, space: &Arc<ModeSpace>) -> Result<ModeTransform<f64>> {
        let steps = self.step_transforms(space)?;
        Ok(compose_transforms(space, &steps)?.with_provenance(format!("{}HD-BS", self.prefix)))
    }

    /// A mode space holding just this splitter's paths.
    pub fn own_space(&self, bound: u32) -> Result<Arc<ModeSpace>> {
        ModeSpace::new(self.paths(), bound)
    }
}

/// Standard splitter on its own paths with truncation `bound`.
pub fn build_hd_beamsplitter(bound: u32) -> Result<(HdBeamSplitter, ModeTransform<f64>)> {
    let bs = HdBeamSplitter::standard();
    let space = bs.own_space(bound)?;
    let t = bs.transform(&space)?;
    Ok((bs, t))
}

/// Expected intermediate states of basis inputs, step by step.
#[derive(Clone, Debug, Default)]
pub struct Transcript {
    /// Input label -> injected mode (unprefixed path).
    pub inputs: BTreeMap<String, Mode>,
    /// (step, input label) -> expected amplitudes per mode.
    pub lines: BTreeMap<(usize, String), Vec<(Mode, C<f64>)>>,
}

impl Transcript {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Transcript::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| Error::InvalidParameter(format!("transcript line {}: {what}", n + 1));
            let f: Vec<&str> = line.split_whitespace().collect();
            if f[0] == "input" {
                if f.len() != 3 {
                    return Err(bad("expected `input <name> <mode>`"));
                }
                out.inputs.insert(f[1].to_string(), f[2].parse()?);
                continue;
            }
            if f.len() != 5 {
                return Err(bad("expected `<step> <input> <mode> <re> <im>`"));
            }
            let step: usize = f[0].parse().map_err(|_| bad("step is not an integer"))?;
            if !out.inputs.contains_key(f[1]) {
                return Err(bad("undeclared input"));
            }
            let mode: Mode = f[2].parse()?;
            let re: f64 = f[3].parse().map_err(|_| bad("bad real part"))?;
            let im: f64 = f[4].parse().map_err(|_| bad("bad imaginary part"))?;
            out.lines.entry((step, f[1].to_string())).or_default().push((mode, C::new(re, im)));
        }
        Ok(out)
    }

    pub fn port_a() -> Self {
        Self::parse(include_str!("../../fixtures/transcript_port_a.txt")).expect("bundled transcript parses")
    }

    pub fn port_b() -> Self {
        Self::parse(include_str!("../../fixtures/transcript_port_b.txt")).expect("bundled transcript parses")
    }
}

/// First mismatch between simulation and transcript.
#[derive(Clone, Debug, PartialEq)]
pub struct Divergence {
    pub step: usize,
    pub input: String,
    pub mode: String,
    pub expected: C<f64>,
    pub found: C<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TranscriptReport {
    pub lines_checked: usize,
    pub first_divergence: Option<Divergence>,
}

impl TranscriptReport {
    pub fn is_ok(&self) -> bool {
        self.first_divergence.is_none()
    }
}

const TRANSCRIPT_TOL: f64 = 1e-10;

/// Steps each transcript input through `bs` and compares every recorded
/// intermediate state amplitude by amplitude. Modes absent from a recorded
/// line must carry zero amplitude.
pub fn transcript_check(bs: &HdBeamSplitter, transcript: &Transcript) -> Result<TranscriptReport> {
    let space = bs.own_space(4)?;
    let steps = bs.step_transforms(&space)?;
    let pref = |m: &Mode| Mode::new(bs.path(&m.path), m.pol, m.oam);
    let mut checked = 0;
    let mut worst: Option<Divergence> = None;
    for (name, mode) in &transcript.inputs {
        let mut amps = vec![C::new(0.0, 0.0); space.dim()];
        amps[space.index(&pref(mode))?] = C::new(1.0, 0.0);
        for (k, t) in steps.iter().enumerate() {
            let step = k + 1;
            amps = t.apply_amplitudes(&amps)?;
            let Some(expected) = transcript.lines.get(&(step, name.clone())) else { continue };
            let mut want = vec![C::new(0.0, 0.0); space.dim()];
            for (m, a) in expected {
                want[space.index(&pref(m))?] += a;
            }
            checked += expected.len();
            let bad = (0..space.dim()).find(|&i| (want[i] - amps[i]).norm() > TRANSCRIPT_TOL);
            if let Some(i) = bad {
                let d = Divergence {
                    step,
                    input: name.clone(),
                    mode: space.mode(i).to_string(),
                    expected: want[i],
                    found: amps[i],
                };
                if worst.as_ref().is_none_or(|w| d.step < w.step) {
                    worst = Some(d);
                }
                break;
            }
        }
    }
    Ok(TranscriptReport { lines_checked: checked, first_divergence: worst })
}
