//! Abstract two-qudit controlled phase-flip protocol with labeled photons.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{norm_sqr, CMatrix};
use crate::scalar::{one, zero, Real, C};

/// Single- or two-qudit operator.
pub type QuditOperator<T> = CMatrix<T>;

fn norm_tolerance<T: Real>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(100.0))
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    Ok(())
}

/// Joint state `sum c_mn |m>_1 |n>_4`, stored row-major in `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuditState<T: Real> {
    d: usize,
    amps: Vec<C<T>>,
}

impl<T: Real> QuditState<T> {
    /// Requires unit norm.
    pub fn new(d: usize, amps: Vec<C<T>>) -> Result<Self> {
        check_dim(d)?;
        if amps.len() != d * d {
            return Err(Error::InvalidParameter(format!("expected {} amplitudes, got {}", d * d, amps.len())));
        }
        let n = norm_sqr(&amps);
        if (n - T::one()).abs() > norm_tolerance() {
            return Err(Error::NotNormalized(n.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(Self { d, amps })
    }

    /// Rescales `amps` to unit norm.
    pub fn normalized(d: usize, amps: Vec<C<T>>) -> Result<Self> {
        let n = norm_sqr(&amps).sqrt();
        if !(n > T::zero()) {
            return Err(Error::NotNormalized(0.0));
        }
        Self::new(d, amps.into_iter().map(|a| a / n).collect())
    }

    pub fn basis(d: usize, m: usize, n: usize) -> Result<Self> {
        check_dim(d)?;
        if m >= d || n >= d {
            return Err(Error::InvalidParameter(format!("level out of range for d={d}")));
        }
        let mut amps = vec![zero(); d * d];
        amps[m * d + n] = one();
        Ok(Self { d, amps })
    }

    /// `a ⊗ b` for single-qudit amplitude vectors.
    pub fn product(a: &[C<T>], b: &[C<T>]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::InvalidParameter("factors of different dimension".into()));
        }
        let amps = a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect();
        Self::normalized(a.len(), amps)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amps
    }

    pub fn amp(&self, m: usize, n: usize) -> C<T> {
        self.amps[m * self.d + n]
    }

    pub fn apply(&self, op: &QuditOperator<T>) -> Result<Self> {
        if op.cols() != self.amps.len() || op.rows() != self.amps.len() {
            return Err(Error::InvalidDimension(op.rows()));
        }
        Ok(Self { d: self.d, amps: op.mul_vec(&self.amps) })
    }

    /// `[[m, n, re, im], ...]` for every entry.
    pub fn to_json(&self) -> Value {
        let mut rows = Vec::with_capacity(self.amps.len());
        for m in 0..self.d {
            for n in 0..self.d {
                let a = self.amp(m, n);
                rows.push(serde_json::json!([m, n, a.re.to_f64(), a.im.to_f64()]));
            }
        }
        Value::Array(rows)
    }

    /// Parses the [`to_json`](Self::to_json) form; absent entries are zero.
    pub fn from_json(d: usize, v: &Value) -> Result<Self> {
        check_dim(d)?;
        let bad = |why: &str| Error::EncodingError(format!("qudit state JSON: {why}"));
        let rows = v.as_array().ok_or_else(|| bad("expected an array"))?;
        let mut amps = vec![zero(); d * d];
        for r in rows {
            let r = r.as_array().filter(|r| r.len() == 4).ok_or_else(|| bad("entries must be [m,n,re,im]"))?;
            let idx = |k: usize| r[k].as_u64().map(|x| x as usize).filter(|&x| x < d);
            let (m, n) = (idx(0).ok_or_else(|| bad("bad m"))?, idx(1).ok_or_else(|| bad("bad n"))?);
            let re = r[2].as_f64().ok_or_else(|| bad("bad re"))?;
            let im = r[3].as_f64().ok_or_else(|| bad("bad im"))?;
            amps[m * d + n] += C::new(T::lit(re), T::lit(im));
        }
        Self::new(d, amps)
    }
}

/// `I - 2 |d-1,d-1><d-1,d-1|`.
pub fn cpf_oracle<T: Real>(d: usize) -> Result<QuditOperator<T>> {
    check_dim(d)?;
    let mut diag = vec![one(); d * d];
    diag[d * d - 1] = -one::<T>();
    Ok(CMatrix::from_diagonal(&diag))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Port {
    A,
    B,
    C,
    D,
}

/// Ideal high-dimensional beam splitter: `|d-1>` crosses over, every other
/// level goes straight.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HdRouting {
    pub d: usize,
}

pub fn ideal_hd_bs(d: usize) -> Result<HdRouting> {
    check_dim(d)?;
    Ok(HdRouting { d })
}

impl HdRouting {
    pub fn route(&self, port: Port, level: usize) -> Result<(Port, usize)> {
        if level >= self.d {
            return Err(Error::InvalidParameter(format!("level {level} out of range")));
        }
        let top = level == self.d - 1;
        let out = match (port, top) {
            (Port::A, true) | (Port::B, false) => Port::D,
            (Port::A, false) | (Port::B, true) => Port::C,
            _ => return Err(Error::InvalidParameter(format!("{port:?} is not an input port"))),
        };
        Ok((out, level))
    }

    /// Permutation on (path ⊗ qudit), index `port * d + level` with inputs
    /// `[A, B]` and outputs `[C, D]`.
    pub fn matrix<T: Real>(&self) -> QuditOperator<T> {
        let d = self.d;
        let mut m = CMatrix::zeros(2 * d, 2 * d);
        for (pi, port) in [Port::A, Port::B].into_iter().enumerate() {
            for l in 0..d {
                let (out, l2) = self.route(port, l).expect("valid input");
                let oi = if out == Port::C { 0 } else { 1 };
                m[(oi * d + l2, pi * d + l)] = one();
            }
        }
        m
    }
}

/// Hadamard on `span{|p>, |d-1>}`, identity elsewhere.
pub fn subspace_hadamard<T: Real>(p: usize, d: usize) -> Result<QuditOperator<T>> {
    check_dim(d)?;
    if p >= d - 1 {
        return Err(Error::InvalidSubspace { p, d });
    }
    let mut m = CMatrix::identity(d);
    let h = C::new(T::FRAC_1_SQRT_2(), T::zero());
    let t = d - 1;
    m[(p, p)] = h;
    m[(p, t)] = h;
    m[(t, p)] = h;
    m[(t, t)] = -h;
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum BellOutcome {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] =
        [BellOutcome::PhiPlus, BellOutcome::PhiMinus, BellOutcome::PsiPlus, BellOutcome::PsiMinus];

    pub fn name(self) -> &'static str {
        match self {
            BellOutcome::PhiPlus => "PhiPlus",
            BellOutcome::PhiMinus => "PhiMinus",
            BellOutcome::PsiPlus => "PsiPlus",
            BellOutcome::PsiMinus => "PsiMinus",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown Bell outcome `{}`", s.trim())))
    }

    /// Coefficients on `(|a>|a>, |b>|b>, |a>|b>, |b>|a>)`.
    pub fn coefficients(self) -> [f64; 4] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            BellOutcome::PhiPlus => [h, h, 0.0, 0.0],
            BellOutcome::PhiMinus => [h, -h, 0.0, 0.0],
            BellOutcome::PsiPlus => [0.0, 0.0, h, h],
            BellOutcome::PsiMinus => [0.0, 0.0, h, -h],
        }
    }

    /// Bell vector on two qudits over the pair of levels `(a, b)`.
    pub fn vector<T: Real>(self, a: usize, b: usize, d: usize) -> Vec<C<T>> {
        let k = self.coefficients();
        let mut v = vec![zero(); d * d];
        for (i, (x, y)) in [(a, a), (b, b), (a, b), (b, a)].into_iter().enumerate() {
            v[x * d + y] += C::new(T::lit(k[i]), T::zero());
        }
        v
    }
}

impl fmt::Display for BellOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BellOutcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BellOutcome::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown Bell outcome `{s}`")))
    }
}

fn single_flip<T: Real>(d: usize) -> QuditOperator<T> {
    let mut diag = vec![one(); d];
    diag[d - 1] = -one::<T>();
    CMatrix::from_diagonal(&diag)
}

/// Local correction on systems 1 and 4 for a Bell outcome on 2 and 3.
pub fn correction_unitary<T: Real>(outcome: BellOutcome, d: usize) -> Result<QuditOperator<T>> {
    check_dim(d)?;
    let (id, u) = (CMatrix::<T>::identity(d), single_flip::<T>(d));
    Ok(match outcome {
        BellOutcome::PhiPlus => id.kron(&id),
        BellOutcome::PhiMinus => u.kron(&id),
        BellOutcome::PsiPlus => id.kron(&u),
        BellOutcome::PsiMinus => u.kron(&u),
    })
}

/// Auxiliary photons `(|p> + |d-1>)/sqrt2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AuxiliaryConfig {
    pub p: usize,
}

impl AuxiliaryConfig {
    pub fn new(p: usize, d: usize) -> Result<Self> {
        check_dim(d)?;
        if p >= d - 1 {
            return Err(Error::InvalidSubspace { p, d });
        }
        Ok(Self { p })
    }
}

/// Heralded output of one Bell branch.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch<T: Real> {
    /// Corrected, normalized state of systems 1 and 4.
    pub state: QuditState<T>,
    /// Joint probability of passing post-selection and seeing this outcome.
    pub probability: T,
}

/// Runs the full protocol on labeled photons and returns every Bell branch.
pub fn run_protocol<T: Real>(psi: &QuditState<T>, aux: AuxiliaryConfig) -> Result<BTreeMap<BellOutcome, Branch<T>>> {
    let d = psi.d;
    let n = norm_sqr(&psi.amps);
    if (n - T::one()).abs() > norm_tolerance() {
        return Err(Error::NotNormalized(n.to_f64().unwrap_or(f64::NAN)));
    }
    let aux = AuxiliaryConfig::new(aux.p, d)?;
    let (p, top) = (aux.p, d - 1);
    let bs = ideal_hd_bs(d)?;
    let h = T::FRAC_1_SQRT_2();
    let aux_amp = |l: usize| if l == p || l == top { h } else { T::zero() };
    let idx = |a: usize, b: usize, c: usize, e: usize| ((a * d + b) * d + c) * d + e;

    // Output tensor over (photon 1, 2, 3, 4) after relabeling by port.
    let mut out = vec![zero::<T>(); d * d * d * d];
    for m in 0..d {
        for n in 0..d {
            let cmn = psi.amp(m, n);
            if cmn == zero() {
                continue;
            }
            for x in [p, top] {
                for y in [p, top] {
                    let amp = cmn * aux_amp(x) * aux_amp(y);
                    // First splitter: photon 1 at A, photon 2 at B.
                    let (o1, l1) = bs.route(Port::A, m)?;
                    let (o2, l2) = bs.route(Port::B, x)?;
                    // Second splitter: photon 4 at A, photon 3 at B.
                    let (o4, l4) = bs.route(Port::A, n)?;
                    let (o3, l3) = bs.route(Port::B, y)?;
                    if o1 == o2 || o3 == o4 {
                        continue;
                    }
                    let (c1, d1) = if o1 == Port::C { (l1, l2) } else { (l2, l1) };
                    let (c2, d2) = if o4 == Port::C { (l4, l3) } else { (l3, l4) };
                    out[idx(c1, d1, d2, c2)] += amp;
                }
            }
        }
    }

    let h3 = subspace_hadamard::<T>(p, d)?;
    let mut after = vec![zero::<T>(); out.len()];
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                for e in 0..d {
                    let v = out[idx(a, b, c, e)];
                    if v == zero() {
                        continue;
                    }
                    for c2 in 0..d {
                        let g = h3[(c2, c)];
                        if g != zero() {
                            after[idx(a, b, c2, e)] += g * v;
                        }
                    }
                }
            }
        }
    }

    let mut branches = BTreeMap::new();
    for outcome in BellOutcome::ALL {
        let bell = outcome.vector::<T>(p, top, d);
        let mut phi = vec![zero::<T>(); d * d];
        for m in 0..d {
            for n in 0..d {
                let mut acc = zero();
                for x in 0..d {
                    for y in 0..d {
                        let b = bell[x * d + y];
                        if b != zero() {
                            acc += b.conj() * after[idx(m, x, y, n)];
                        }
                    }
                }
                phi[m * d + n] = acc;
            }
        }
        let probability = norm_sqr(&phi);
        if probability <= T::zero() {
            return Err(Error::EmptyPostSelection);
        }
        let corrected = correction_unitary::<T>(outcome, d)?.mul_vec(&phi);
        branches.insert(outcome, Branch { state: QuditState::normalized(d, corrected)?, probability });
    }
    Ok(branches)
}

/// Total heralding probability when accepting `accepted` outcomes.
pub fn heralding_efficiency<T: Real>(branches: &BTreeMap<BellOutcome, Branch<T>>, accepted: &[BellOutcome]) -> T {
    accepted
        .iter()
        .filter_map(|o| branches.get(o))
        .fold(T::zero(), |acc, b| acc + b.probability)
}
