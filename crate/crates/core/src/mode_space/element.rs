use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::{Conventions, ModeSpace, ModeTransform, Pol, TransformKind};
use crate::error::{Error, Result};
use crate::scalar::{cis, Real, C};

/// One optical element with its parameters. Angles are in radians.
#[derive(Clone, Debug, PartialEq)]
pub enum Element {
    /// Half-wave plate, fast axis at `angle`.
    Hwp { angle: f64 },
    /// Quarter-wave plate, fast axis at `angle`.
    Qwp { angle: f64 },
    /// q-plate of charge `q`; `axis` is the optic-axis offset.
    QPlate { q: f64, axis: f64 },
    /// Spiral phase plate adding `dl` to the OAM index.
    Spp { dl: i64 },
    /// Dove prism rotated by `gamma`.
    Dove { gamma: f64 },
    Mirror,
    PhasePlate { phase: f64 },
    DelayLine,
    /// Linear polarizer passing `cos(angle) H + sin(angle) V`.
    Polarizer { angle: f64 },
    /// Polarization-swapping interferometer with one Dove prism per arm.
    Interferometer { gamma_h: f64, gamma_v: f64 },
    /// OAM-controlled polarization NOT of order 1 or 2.
    OkCnot { order: u8 },
    Pbs { inputs: [String; 2], outputs: [String; 2] },
    /// Symmetric 50:50 beam splitter.
    BeamSplitter { inputs: [String; 2], outputs: [String; 2] },
}

impl Element {
    pub fn name(&self) -> &'static str {
        match self {
            Element::Hwp { .. } => "HWP",
            Element::Qwp { .. } => "QWP",
            Element::QPlate { .. } => "QP",
            Element::Spp { .. } => "SPP",
            Element::Dove { .. } => "DP",
            Element::Mirror => "MIRROR",
            Element::PhasePlate { .. } => "PP",
            Element::DelayLine => "DL",
            Element::Polarizer { .. } => "POL",
            Element::Interferometer { .. } => "INTF",
            Element::OkCnot { .. } => "OCNOT",
            Element::Pbs { .. } => "PBS",
            Element::BeamSplitter { .. } => "BS",
        }
    }

    /// Two-path elements carry their paths in the descriptor.
    pub fn is_two_path(&self) -> bool {
        matches!(self, Element::Pbs { .. } | Element::BeamSplitter { .. })
    }

    pub fn kind(&self) -> TransformKind {
        match self {
            Element::Polarizer { .. } => TransformKind::Projector,
            _ => TransformKind::Unitary,
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.name();
        match self {
            Element::Hwp { angle } | Element::Qwp { angle } | Element::Polarizer { angle } => {
                write!(f, "{n}(angle={angle})")
            }
            Element::QPlate { q, axis } => {
                if *axis == 0.0 {
                    write!(f, "{n}(q={q})")
                } else {
                    write!(f, "{n}(q={q},axis={axis})")
                }
            }
            Element::Spp { dl } => write!(f, "{n}(dl={dl})"),
            Element::Dove { gamma } => write!(f, "{n}(gamma={gamma})"),
            Element::PhasePlate { phase } => write!(f, "{n}(phase={phase})"),
            Element::Mirror | Element::DelayLine => f.write_str(n),
            Element::Interferometer { gamma_h, gamma_v } => {
                write!(f, "{n}(gamma_h={gamma_h},gamma_v={gamma_v})")
            }
            Element::OkCnot { order } => write!(f, "{n}(k={order})"),
            Element::Pbs { inputs, outputs } | Element::BeamSplitter { inputs, outputs } => write!(
                f,
                "{n}(in=[{},{}],out=[{},{}])",
                inputs[0], inputs[1], outputs[0], outputs[1]
            ),
        }
    }
}

enum ArgValue {
    Scalar(String),
    List(Vec<String>),
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '[' | '(' => depth += 1,
            ']' | ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn parse_args(body: &str) -> Result<Vec<(String, ArgValue)>> {
    let mut out = Vec::new();
    if body.trim().is_empty() {
        return Ok(out);
    }
    for part in split_top_level(body) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("expected key=value, got `{}`", part.trim())))?;
        let key = k.trim().to_ascii_lowercase();
        let v = v.trim();
        if v.is_empty() {
            return Err(Error::InvalidParameter(format!("missing parameter value for `{key}`")));
        }
        let value = if let Some(inner) = v.strip_prefix('[') {
            let inner = inner
                .strip_suffix(']')
                .ok_or_else(|| Error::InvalidParameter(format!("unterminated list in `{v}`")))?;
            ArgValue::List(inner.split(',').map(|x| x.trim().to_string()).collect())
        } else {
            ArgValue::Scalar(v.to_string())
        };
        if out.iter().any(|(k2, _)| *k2 == key) {
            return Err(Error::InvalidParameter(format!("duplicate parameter `{key}`")));
        }
        out.push((key, value));
    }
    Ok(out)
}

struct Args {
    name: String,
    items: Vec<(String, ArgValue)>,
}

impl Args {
    fn take(&mut self, key: &str) -> Option<ArgValue> {
        let pos = self.items.iter().position(|(k, _)| k == key)?;
        Some(self.items.remove(pos).1)
    }

    fn number(&mut self, keys: &[&str], default: Option<f64>) -> Result<f64> {
        for k in keys {
            match self.take(k) {
                Some(ArgValue::Scalar(s)) => return parse_angle(&s),
                Some(ArgValue::List(_)) => {
                    return Err(Error::InvalidParameter(format!("{}: `{k}` must be a number", self.name)))
                }
                None => {}
            }
        }
        default.ok_or_else(|| Error::InvalidParameter(format!("{}: missing `{}`", self.name, keys[0])))
    }

    fn pair(&mut self, key: &str) -> Result<[String; 2]> {
        match self.take(key) {
            Some(ArgValue::List(v)) if v.len() == 2 && v.iter().all(|x| !x.is_empty()) => {
                Ok([v[0].clone(), v[1].clone()])
            }
            _ => Err(Error::InvalidParameter(format!("{}: `{key}` must be a list of two paths", self.name))),
        }
    }

    fn finish(self) -> Result<()> {
        match self.items.first() {
            Some((k, _)) => Err(Error::InvalidParameter(format!("{}: unknown parameter `{k}`", self.name))),
            None => Ok(()),
        }
    }
}

impl FromStr for Element {
    type Err = Error;

    /// Parses descriptors such as `HWP(angle=pi/8)` or `PBS(in=[A,X],out=[P1,P2])`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, body) = match s.find('(') {
            Some(i) => {
                let body = s[i + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| Error::InvalidParameter(format!("missing `)` in `{s}`")))?;
                (s[..i].trim(), body)
            }
            None => (s, ""),
        };
        let upper = name.to_ascii_uppercase();
        let mut a = Args { name: upper.clone(), items: parse_args(body)? };
        let el = match upper.as_str() {
            "HWP" => Element::Hwp { angle: a.number(&["angle", "alpha"], None)? },
            "QWP" => Element::Qwp { angle: a.number(&["angle", "beta"], None)? },
            "QP" => Element::QPlate { q: a.number(&["q"], None)?, axis: a.number(&["axis"], Some(0.0))? },
            "SPP" => {
                let x = a.number(&["dl", "delta"], None)?;
                if x.fract() != 0.0 {
                    return Err(Error::InvalidParameter(format!("SPP: non-integer shift {x}")));
                }
                Element::Spp { dl: x as i64 }
            }
            "DP" => Element::Dove { gamma: a.number(&["gamma"], None)? },
            "MIRROR" => Element::Mirror,
            "PP" => Element::PhasePlate { phase: a.number(&["phase", "phi"], None)? },
            "DL" => Element::DelayLine,
            "POL" => Element::Polarizer { angle: a.number(&["angle", "theta"], None)? },
            "INTF" => Element::Interferometer {
                gamma_h: a.number(&["gamma_h"], None)?,
                gamma_v: a.number(&["gamma_v"], None)?,
            },
            "OCNOT" => {
                let k = a.number(&["k", "order"], None)?;
                if k != 1.0 && k != 2.0 {
                    return Err(Error::InvalidParameter(format!("OCNOT: order must be 1 or 2, got {k}")));
                }
                Element::OkCnot { order: k as u8 }
            }
            "PBS" | "BS" => {
                let inputs = a.pair("in")?;
                let outputs = a.pair("out")?;
                if inputs[0] == inputs[1] || outputs[0] == outputs[1] {
                    return Err(Error::InvalidParameter(format!("{upper}: repeated path")));
                }
                if upper == "PBS" {
                    Element::Pbs { inputs, outputs }
                } else {
                    Element::BeamSplitter { inputs, outputs }
                }
            }
            _ => return Err(Error::UnknownElement(name.to_string())),
        };
        a.finish()?;
        Ok(el)
    }
}

/// An element together with the path it sits on (`None` for two-path elements).
#[derive(Clone, Debug, PartialEq)]
pub struct PlacedElement {
    pub element: Element,
    pub path: Option<String>,
}

impl PlacedElement {
    pub fn on(element: Element, path: impl Into<String>) -> Self {
        Self { element, path: Some(path.into()) }
    }

    pub fn two_path(element: Element) -> Self {
        Self { element, path: None }
    }

    pub fn transform<T: Real>(&self, space: &Arc<ModeSpace>, conv: &Conventions) -> Result<ModeTransform<T>> {
        element_transform(&self.element, self.path.as_deref(), space, conv)
    }
}

impl fmt::Display for PlacedElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.path {
            Some(p) => write!(f, "{} @ {p}", self.element),
            None => write!(f, "{}", self.element),
        }
    }
}

impl FromStr for PlacedElement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (desc, path) = match s.rsplit_once('@') {
            Some((d, p)) => (d, Some(p.trim().to_string())),
            None => (s, None),
        };
        let element: Element = desc.parse()?;
        match (&path, element.is_two_path()) {
            (None, false) => {
                Err(Error::InvalidParameter(format!("{}: single-path element needs `@ path`", element.name())))
            }
            (Some(_), true) => {
                Err(Error::InvalidParameter(format!("{}: paths belong in the descriptor", element.name())))
            }
            (Some(p), false) if p.is_empty() => Err(Error::InvalidParameter("empty path after `@`".into())),
            _ => Ok(Self { element, path }),
        }
    }
}

/// Evaluates a real expression with `pi`, `+ - * /`, parentheses and
/// implicit multiplication (`3pi/4`).
pub fn parse_angle(text: &str) -> Result<f64> {
    let toks = tokenize(text)?;
    let mut p = ExprParser { toks: &toks, pos: 0 };
    let v = p.sum()?;
    if p.pos != toks.len() {
        return Err(Error::InvalidParameter(format!("trailing input in `{text}`")));
    }
    if !v.is_finite() {
        return Err(Error::InvalidParameter(format!("non-finite value `{text}`")));
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Op(char),
}

fn tokenize(text: &str) -> Result<Vec<Tok>> {
    let bad = || Error::InvalidParameter(format!("cannot parse number `{text}`"));
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            out.push(Tok::Num(s.parse().map_err(|_| bad())?));
        } else if ch.is_ascii_alphabetic() || ch == 'π' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphabetic() || chars[i] == 'π') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            match word.to_ascii_lowercase().as_str() {
                "pi" | "π" => out.push(Tok::Num(PI)),
                _ => return Err(bad()),
            }
        } else if "+-*/()".contains(ch) {
            out.push(Tok::Op(ch));
            i += 1;
        } else {
            return Err(bad());
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

struct ExprParser<'a> {
    toks: &'a [Tok],
    pos: usize,
}

impl ExprParser<'_> {
    fn err(&self) -> Error {
        Error::InvalidParameter("malformed numeric expression".into())
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn sum(&mut self) -> Result<f64> {
        let mut v = self.product()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let r = self.product()?;
            v = if op == '+' { v + r } else { v - r };
        }
        Ok(v)
    }

    fn product(&mut self) -> Result<f64> {
        let mut v = self.unary()?;
        loop {
            match self.peek().cloned() {
                Some(Tok::Op(op @ ('*' | '/'))) => {
                    self.pos += 1;
                    let r = self.unary()?;
                    v = if op == '*' { v * r } else { v / r };
                }
                Some(Tok::Num(_)) | Some(Tok::Op('(')) => v *= self.unary()?,
                _ => return Ok(v),
            }
        }
    }

    fn unary(&mut self) -> Result<f64> {
        match self.peek().cloned() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            Some(Tok::Num(x)) => {
                self.pos += 1;
                Ok(x)
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let v = self.sum()?;
                if self.peek() != Some(&Tok::Op(')')) {
                    return Err(self.err());
                }
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.err()),
        }
    }
}

type Local<T> = Vec<(Pol, i64, C<T>)>;

fn flip(l: i64, conv: &Conventions) -> i64 {
    if conv.elements.reflection_flips_oam {
        -l
    } else {
        l
    }
}

fn local_map<T: Real>(
    space: &Arc<ModeSpace>,
    path: usize,
    kind: TransformKind,
    provenance: String,
    f: impl Fn(Pol, i64) -> Local<T>,
) -> ModeTransform<T> {
    ModeTransform::from_mode_map(space.clone(), kind, provenance, |p, pol, l| {
        (p == path).then(|| f(pol, l).into_iter().map(|(q, m, a)| (path, q, m, a)).collect())
    })
}

fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}

fn cx<T: Real>(x: f64) -> C<T> {
    C::new(lit(x), T::zero())
}

fn cis64<T: Real>(phi: f64) -> C<T> {
    cis(lit::<T>(phi))
}

/// Exact single-photon matrix of `element`, identity on every other path.
pub fn element_transform<T: Real>(
    element: &Element,
    path: Option<&str>,
    space: &Arc<ModeSpace>,
    conv: &Conventions,
) -> Result<ModeTransform<T>> {
    let provenance = match path {
        Some(p) => format!("{element} @ {p}"),
        None => element.to_string(),
    };
    let on_path = || -> Result<usize> {
        let p = path.ok_or_else(|| Error::InvalidParameter(format!("{}: missing path", element.name())))?;
        space.path_index(p)
    };
    let kind = element.kind();
    let ec = &conv.elements;
    let t = match element {
        Element::Hwp { angle } => {
            let (s2, c2) = (2.0 * angle).sin_cos();
            local_map(space, on_path()?, kind, provenance, move |pol, l| match pol {
                Pol::H => vec![(Pol::H, l, cx(c2)), (Pol::V, l, cx(s2))],
                Pol::V => vec![(Pol::H, l, cx(s2)), (Pol::V, l, cx(-c2))],
            })
        }
        Element::Qwp { angle } => {
            let (s, c) = angle.sin_cos();
            let g: C<T> = cis64(PI * ec.qwp_phase);
            let b: C<T> = C::new(T::zero(), -T::one());
            let m00 = (cx::<T>(c * c) + b * lit::<T>(s * s)) * g;
            let m11 = (cx::<T>(s * s) + b * lit::<T>(c * c)) * g;
            let m01 = (C::new(T::one(), T::zero()) - b) * lit::<T>(c * s) * g;
            local_map(space, on_path()?, kind, provenance, move |pol, l| match pol {
                Pol::H => vec![(Pol::H, l, m00), (Pol::V, l, m01)],
                Pol::V => vec![(Pol::H, l, m01), (Pol::V, l, m11)],
            })
        }
        Element::QPlate { q, axis } => {
            let shift2 = 2.0 * q;
            if (shift2 - shift2.round()).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "QP: charge {q} gives a fractional OAM shift"
                )));
            }
            let s = shift2.round() as i64;
            let half: C<T> = cx(0.5);
            let u: C<T> = cis64(2.0 * axis);
            let ub = u.conj();
            let i: C<T> = C::new(T::zero(), T::one());
            local_map(space, on_path()?, kind, provenance, move |pol, l| match pol {
                Pol::H => vec![
                    (Pol::H, l + s, u * half),
                    (Pol::V, l + s, -i * u * half),
                    (Pol::H, l - s, ub * half),
                    (Pol::V, l - s, i * ub * half),
                ],
                Pol::V => vec![
                    (Pol::H, l + s, -i * u * half),
                    (Pol::V, l + s, -u * half),
                    (Pol::H, l - s, i * ub * half),
                    (Pol::V, l - s, -ub * half),
                ],
            })
        }
        Element::Spp { dl } => {
            let dl = *dl;
            local_map(space, on_path()?, kind, provenance, move |pol, l| vec![(pol, l + dl, cx(1.0))])
        }
        Element::Dove { gamma } => {
            let g = *gamma;
            local_map(space, on_path()?, kind, provenance, move |pol, l| {
                vec![(pol, -l, cis64::<T>(2.0 * g * l as f64) * C::new(T::zero(), T::one()))]
            })
        }
        Element::Mirror => {
            let ph: C<T> = cis64(PI * ec.mirror_phase);
            let c2 = conv.clone();
            local_map(space, on_path()?, kind, provenance, move |pol, l| vec![(pol, flip(l, &c2), ph)])
        }
        Element::PhasePlate { phase } => {
            let ph: C<T> = cis64(*phase);
            local_map(space, on_path()?, kind, provenance, move |pol, l| vec![(pol, l, ph)])
        }
        Element::DelayLine => local_map(space, on_path()?, kind, provenance, |pol, l| vec![(pol, l, cx(1.0))]),
        Element::Polarizer { angle } => {
            let (s, c) = angle.sin_cos();
            local_map(space, on_path()?, kind, provenance, move |pol, l| {
                let w = if pol == Pol::H { c } else { s };
                vec![(Pol::H, l, cx(w * c)), (Pol::V, l, cx(w * s))]
            })
        }
        Element::Interferometer { gamma_h, gamma_v } => {
            let ph: C<T> = cis64::<T>(PI * ec.interferometer_phase) * C::new(T::zero(), T::one());
            let (gh, gv) = (*gamma_h, *gamma_v);
            local_map(space, on_path()?, kind, provenance, move |pol, l| match pol {
                Pol::H => vec![(Pol::V, -l, ph * cis64::<T>(2.0 * gh * l as f64))],
                Pol::V => vec![(Pol::H, -l, ph * cis64::<T>(2.0 * gv * l as f64))],
            })
        }
        Element::OkCnot { order } => {
            let p = path.ok_or_else(|| Error::InvalidParameter("OCNOT: missing path".into()))?;
            let g = if *order == 1 { PI / 4.0 } else { PI / 8.0 };
            let back = if *order == 1 { Element::Hwp { angle: PI / 8.0 } } else { Element::Qwp { angle: PI / 4.0 } };
            let parts = [
                Element::Hwp { angle: PI / 8.0 },
                Element::Interferometer { gamma_h: g, gamma_v: -g },
                back,
            ];
            let mut acc = ModeTransform::identity(space.clone());
            for e in &parts {
                acc = acc.then(&element_transform(e, Some(p), space, conv)?)?;
            }
            acc.with_provenance(provenance).with_kind(kind)
        }
        Element::Pbs { inputs, outputs } | Element::BeamSplitter { inputs, outputs } => {
            let idx = |s: &String| space.path_index(s);
            let (i1, i2, o1, o2) = (idx(&inputs[0])?, idx(&inputs[1])?, idx(&outputs[0])?, idx(&outputs[1])?);
            let extra_out: Vec<usize> = [o1, o2].into_iter().filter(|o| *o != i1 && *o != i2).collect();
            let extra_in: Vec<usize> = [i1, i2].into_iter().filter(|i| *i != o1 && *i != o2).collect();
            let polarizing = matches!(element, Element::Pbs { .. });
            let phase = if polarizing { ec.pbs_reflection_phase } else { ec.bs_reflection_phase };
            let r: C<T> = cis64(PI * phase);
            let conv = conv.clone();
            let amp = cx::<T>(std::f64::consts::FRAC_1_SQRT_2);
            ModeTransform::from_mode_map(space.clone(), kind, provenance, move |p, pol, l| {
                let (straight, across) = if p == i1 {
                    (o1, o2)
                } else if p == i2 {
                    (o2, o1)
                } else {
                    let k = extra_out.iter().position(|o| *o == p)?;
                    return Some(vec![(extra_in[k], pol, l, cx(1.0))]);
                };
                let fl = flip(l, &conv);
                Some(if polarizing {
                    match pol {
                        Pol::H => vec![(straight, Pol::H, l, cx(1.0))],
                        Pol::V => vec![(across, Pol::V, fl, r)],
                    }
                } else {
                    vec![(straight, pol, l, amp), (across, pol, fl, r * amp)]
                })
            })
        }
    };
    if t.kind() == TransformKind::Unitary {
        let defect = t.unitarity_defect();
        if !(defect <= T::check_tolerance()) {
            return Err(Error::ConventionError {
                element: t.provenance().to_string(),
                deviation: defect.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    Ok(t)
}
