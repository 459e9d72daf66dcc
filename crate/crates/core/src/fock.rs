//! Multi-photon bosonic states on a [`ModeSpace`], evolved by creation-operator
//! substitution.
//!
//! Amplitudes are coefficients in the orthonormal occupation basis, so the
//! `sqrt(n!)` factors of multiply occupied modes live in the basis, not in the
//! stored numbers.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::hash::BuildHasherDefault;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::mode_space::{Mode, ModeSpace, ModeTransform, Pol, SinglePhotonState, TransformKind};
use crate::scalar::{one, zero, Real, C};

/// Fixed-key hasher: iteration order, and with it the float summation order,
/// depends only on the inputs, so results are bit-reproducible across processes.
type StableMap<K, V> = HashMap<K, V, BuildHasherDefault<DefaultHasher>>;

/// Sorted multiset of dense mode indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OccupationConfig(Vec<u32>);

impl OccupationConfig {
    pub fn new(mut modes: Vec<u32>) -> Self {
        modes.sort_unstable();
        Self(modes)
    }

    pub fn from_modes(space: &ModeSpace, modes: &[Mode]) -> Result<Self> {
        let idx = modes.iter().map(|m| space.index(m).map(|i| i as u32)).collect::<Result<Vec<_>>>()?;
        Ok(Self::new(idx))
    }

    pub fn indices(&self) -> &[u32] {
        &self.0
    }

    pub fn photons(&self) -> usize {
        self.0.len()
    }

    pub fn modes(&self, space: &ModeSpace) -> Vec<Mode> {
        self.0.iter().map(|&i| space.mode(i as usize)).collect()
    }

    /// Photons on path index `path`.
    pub fn count_on_path(&self, space: &ModeSpace, path: usize) -> usize {
        self.0.iter().filter(|&&i| space.path_of(i as usize) == path).count()
    }

    pub fn count_of(&self, mode_index: usize) -> usize {
        self.0.iter().filter(|&&i| i as usize == mode_index).count()
    }

    /// `sqrt(prod_m n_m!)`.
    fn bosonic_factor<T: Real>(&self) -> T {
        let mut f = 1.0f64;
        let mut run = 1usize;
        for w in self.0.windows(2) {
            if w[0] == w[1] {
                run += 1;
                f *= run as f64;
            } else {
                run = 1;
            }
        }
        T::lit(f.sqrt())
    }
}

/// Sparse superposition of occupation configurations with a fixed photon number.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiPhotonState<T: Real> {
    space: Arc<ModeSpace>,
    n: usize,
    terms: BTreeMap<OccupationConfig, C<T>>,
}

fn prune<T: Real>(map: &mut BTreeMap<OccupationConfig, C<T>>) {
    map.retain(|_, a| a.norm() > T::prune_threshold());
}

impl<T: Real> MultiPhotonState<T> {
    /// Vacuum-free empty superposition with `n` photons (the zero vector).
    pub fn zero(space: Arc<ModeSpace>, n: usize) -> Self {
        Self { space, n, terms: BTreeMap::new() }
    }

    pub fn from_terms(space: Arc<ModeSpace>, terms: Vec<(OccupationConfig, C<T>)>) -> Result<Self> {
        let n = terms.first().map_or(0, |(c, _)| c.photons());
        let mut map = BTreeMap::new();
        for (c, a) in terms {
            if c.photons() != n {
                return Err(Error::InvalidParameter("configurations with different photon numbers".into()));
            }
            if c.indices().iter().any(|&i| i as usize >= space.dim()) {
                return Err(Error::SpaceMismatch);
            }
            *map.entry(c).or_insert_with(zero) += a;
        }
        prune(&mut map);
        Ok(Self { space, n, terms: map })
    }

    pub fn space(&self) -> &Arc<ModeSpace> {
        &self.space
    }

    pub fn photons(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&OccupationConfig, &C<T>)> {
        self.terms.iter()
    }

    pub fn amplitude(&self, config: &OccupationConfig) -> C<T> {
        self.terms.get(config).copied().unwrap_or_else(zero)
    }

    /// Amplitude of the configuration listing `modes` (any order).
    pub fn amplitude_of(&self, modes: &[Mode]) -> Result<C<T>> {
        Ok(self.amplitude(&OccupationConfig::from_modes(&self.space, modes)?))
    }

    pub fn norm_sqr(&self) -> T {
        self.terms.values().fold(T::zero(), |acc, a| acc + a.norm_sqr())
    }

    pub fn normalized(&self) -> Result<Self> {
        let p = self.norm_sqr();
        if p <= T::zero() {
            return Err(Error::EmptyPostSelection);
        }
        Ok(self.scaled(C::new(T::one() / p.sqrt(), T::zero())))
    }

    pub fn scaled(&self, s: C<T>) -> Self {
        let mut terms: BTreeMap<_, _> = self.terms.iter().map(|(c, a)| (c.clone(), a * s)).collect();
        prune(&mut terms);
        Self { space: self.space.clone(), n: self.n, terms }
    }

    /// `self + other`; used to build joint inputs by linearity.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if !self.space.same_as(&other.space) {
            return Err(Error::SpaceMismatch);
        }
        if self.terms.is_empty() {
            return Ok(other.clone());
        }
        if !other.terms.is_empty() && other.n != self.n {
            return Err(Error::InvalidParameter("adding states with different photon numbers".into()));
        }
        let mut terms = self.terms.clone();
        for (c, a) in &other.terms {
            *terms.entry(c.clone()).or_insert_with(zero) += *a;
        }
        prune(&mut terms);
        Ok(Self { space: self.space.clone(), n: self.n, terms })
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> C<T> {
        self.terms
            .iter()
            .filter_map(|(c, a)| other.terms.get(c).map(|b| a.conj() * b))
            .fold(zero(), |acc, x| acc + x)
    }

    /// Keeps only configurations satisfying `keep`, without renormalizing.
    pub fn filter(&self, keep: impl Fn(&OccupationConfig) -> bool) -> Self {
        let terms = self.terms.iter().filter(|(c, _)| keep(c)).map(|(c, a)| (c.clone(), *a)).collect();
        Self { space: self.space.clone(), n: self.n, terms }
    }

    /// One line per term: `path:pol:l[,path:pol:l...] re im`.
    pub fn to_canonical_text(&self) -> String {
        let mut out = String::new();
        for (c, a) in &self.terms {
            let modes: Vec<String> = c.modes(&self.space).iter().map(Mode::to_string).collect();
            out.push_str(&format!("{} {} {}\n", modes.join(","), a.re, a.im));
        }
        out
    }

    pub fn from_canonical_text(space: Arc<ModeSpace>, text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [modes, re, im] = parts[..] else {
                return Err(Error::InvalidParameter(format!("malformed state line `{line}`")));
            };
            let modes = modes.split(',').map(str::parse).collect::<Result<Vec<Mode>>>()?;
            let num = |s: &str| {
                s.parse::<f64>().map_err(|_| Error::InvalidParameter(format!("bad number `{s}`")))
            };
            terms.push((OccupationConfig::from_modes(&space, &modes)?, C::new(T::lit(num(re)?), T::lit(num(im)?))));
        }
        Self::from_terms(space, terms)
    }
}

impl<T: Real> fmt::Display for MultiPhotonState<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical_text())
    }
}

fn check_space<T: Real>(space: &Arc<ModeSpace>, photons: &[SinglePhotonState<T>]) -> Result<()> {
    if photons.iter().any(|p| !p.space().same_as(space)) {
        return Err(Error::SpaceMismatch);
    }
    Ok(())
}

/// Product `prod_k (sum_j a_kj a_j^dag) |vac>` without normalization.
pub fn inject_product_raw<T: Real>(photons: &[SinglePhotonState<T>]) -> Result<MultiPhotonState<T>> {
    let Some(first) = photons.first() else {
        return Err(Error::InvalidParameter("no photons to inject".into()));
    };
    let space = first.space().clone();
    check_space(&space, photons)?;
    let mut mono: StableMap<Vec<u32>, C<T>> = StableMap::default();
    mono.insert(Vec::new(), one());
    for p in photons {
        let support: Vec<(u32, C<T>)> = p
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > T::prune_threshold())
            .map(|(i, a)| (i as u32, *a))
            .collect();
        let mut next: StableMap<Vec<u32>, C<T>> = StableMap::with_capacity_and_hasher(mono.len() * support.len(), Default::default());
        for (key, a) in &mono {
            for &(j, b) in &support {
                let mut k = key.clone();
                let pos = k.partition_point(|&x| x <= j);
                k.insert(pos, j);
                *next.entry(k).or_insert_with(zero) += *a * b;
            }
        }
        mono = next;
    }
    let terms = mono
        .into_iter()
        .map(|(k, a)| {
            let c = OccupationConfig(k);
            let f = c.bosonic_factor::<T>();
            (c, a * f)
        })
        .collect();
    MultiPhotonState::from_terms(space, terms)
}

/// Symmetrized, normalized product of single-photon states.
pub fn inject_product<T: Real>(photons: &[SinglePhotonState<T>]) -> Result<MultiPhotonState<T>> {
    inject_product_raw(photons)?.normalized()
}

/// Linear-optical evolution `a_j^dag -> sum_k M_kj a_k^dag`.
pub fn apply_transform<T: Real>(t: &ModeTransform<T>, s: &MultiPhotonState<T>) -> Result<MultiPhotonState<T>> {
    if !t.space().same_as(&s.space) {
        return Err(Error::SpaceMismatch);
    }
    // Substitute one input mode at a time over the whole state. Keys are
    // (output multiset so far, input modes still to substitute); merging after
    // each mode keeps the map near the size of the output configuration set.
    type Key = (Vec<u32>, Vec<u32>);
    let mut cur: StableMap<Key, C<T>> = s
        .terms
        .iter()
        .map(|(c, a)| ((Vec::with_capacity(s.n), c.0.clone()), *a / c.bosonic_factor::<T>()))
        .collect();
    let mut modes: Vec<u32> = s.terms.keys().flat_map(|c| c.0.iter().copied()).collect();
    modes.sort_unstable();
    modes.dedup();
    for j in modes {
        let col = t.column(j as usize)?;
        let mut next: StableMap<Key, C<T>> = StableMap::with_capacity_and_hasher(cur.len() * 2, Default::default());
        for ((out, rest), a) in cur {
            // Input configs are sorted, so copies of j sit at the front.
            let e = rest.iter().take_while(|&&x| x == j).count();
            if e == 0 {
                *next.entry((out, rest)).or_insert_with(zero) += a;
                continue;
            }
            let rest = rest[e..].to_vec();
            let mut part: StableMap<Vec<u32>, C<T>> = StableMap::default();
            part.insert(out, a);
            for _ in 0..e {
                let mut grown = StableMap::with_capacity_and_hasher(part.len() * col.len(), Default::default());
                for (key, b) in &part {
                    for &(i, m) in col {
                        let mut k = key.clone();
                        let pos = k.partition_point(|&x| x <= i as u32);
                        k.insert(pos, i as u32);
                        *grown.entry(k).or_insert_with(zero) += *b * m;
                    }
                }
                part = grown;
            }
            for (k, b) in part {
                *next.entry((k, rest.clone())).or_insert_with(zero) += b;
            }
        }
        cur = next;
    }
    let acc = cur.into_iter().map(|((out, _), a)| (out, a));
    let mut terms = BTreeMap::new();
    for (k, a) in acc {
        let c = OccupationConfig(k);
        let f = c.bosonic_factor::<T>();
        let v = a * f;
        if v.norm() > T::prune_threshold() {
            terms.insert(c, v);
        }
    }
    Ok(MultiPhotonState { space: s.space.clone(), n: s.n, terms })
}

/// Applies a sequence of transforms in order.
pub fn apply_chain<T: Real>(ts: &[ModeTransform<T>], s: &MultiPhotonState<T>) -> Result<MultiPhotonState<T>> {
    ts.iter().try_fold(s.clone(), |acc, t| apply_transform(t, &acc))
}

/// Required photon counts per path (or per full mode).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DetectionPattern {
    pub required: BTreeMap<String, u32>,
    /// `true`: keys are path labels and counts sum over polarization and OAM.
    /// `false`: keys are full mode labels `path:pol:l`.
    pub marginalize_pol_oam: bool,
}

impl DetectionPattern {
    pub fn per_path<I, S>(counts: I) -> Self
    where
        I: IntoIterator<Item = (S, u32)>,
        S: Into<String>,
    {
        Self { required: counts.into_iter().map(|(k, v)| (k.into(), v)).collect(), marginalize_pol_oam: true }
    }

    pub fn per_mode<I>(counts: I) -> Self
    where
        I: IntoIterator<Item = (Mode, u32)>,
    {
        Self { required: counts.into_iter().map(|(k, v)| (k.to_string(), v)).collect(), marginalize_pol_oam: false }
    }

    pub fn total(&self) -> u32 {
        self.required.values().sum()
    }

    /// Compiles the pattern into a predicate over configurations.
    pub fn matcher(&self, space: &ModeSpace) -> Result<impl Fn(&OccupationConfig) -> bool + '_> {
        let mut checks: Vec<(Vec<usize>, usize)> = Vec::new();
        for (k, &n) in &self.required {
            if self.marginalize_pol_oam {
                let p = space.path_index(k)?;
                checks.push((vec![p], n as usize));
            } else {
                let m: Mode = k.parse()?;
                checks.push((vec![usize::MAX, space.index(&m)?], n as usize));
            }
        }
        let space = space.clone();
        Ok(move |c: &OccupationConfig| {
            checks.iter().all(|(key, n)| {
                let got = if key.len() == 1 { c.count_on_path(&space, key[0]) } else { c.count_of(key[1]) };
                got == *n
            })
        })
    }
}

/// Keeps configurations matching `p`. Returns the renormalized survivor and
/// the fraction of the input mass that survived.
pub fn post_select<T: Real>(s: &MultiPhotonState<T>, p: &DetectionPattern) -> Result<(MultiPhotonState<T>, T)> {
    let (kept, prob) = post_select_raw(s, p)?;
    if kept.is_empty() || prob <= T::zero() {
        return Err(Error::EmptyPostSelection);
    }
    Ok((kept.normalized()?, prob))
}

/// Like [`post_select`] but leaves the survivor unnormalized.
pub fn post_select_raw<T: Real>(s: &MultiPhotonState<T>, p: &DetectionPattern) -> Result<(MultiPhotonState<T>, T)> {
    let total = s.norm_sqr();
    let keep = p.matcher(&s.space)?;
    let kept = s.filter(keep);
    let prob = if total > T::zero() { kept.norm_sqr() / total } else { T::zero() };
    Ok((kept, prob))
}

/// Labeled projective measurement basis on one path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathBasis<T: Real> {
    pub path: String,
    pub outcomes: Vec<(String, Vec<(Pol, i64, C<T>)>)>,
}

impl<T: Real> PathBasis<T> {
    /// `{H, V}` tensored with a single OAM value.
    pub fn polarization(path: impl Into<String>, oam: i64) -> Self {
        Self {
            path: path.into(),
            outcomes: vec![
                ("H".into(), vec![(Pol::H, oam, one())]),
                ("V".into(), vec![(Pol::V, oam, one())]),
            ],
        }
    }
}

/// Outcome probabilities for a product-basis readout of every occupied path.
///
/// Keys list each resolved path with at least one photon, e.g. `C=H,D=V+V`.
pub fn outcome_distribution<T: Real>(
    s: &MultiPhotonState<T>,
    resolution: &[PathBasis<T>],
) -> Result<BTreeMap<String, T>> {
    let space = s.space.clone();
    let local = 2 * space.ladder_len();
    let mut path_of_basis = Vec::new();
    // slot -> label, per resolved path (None for completion vectors).
    let mut labels: HashMap<usize, Option<String>> = HashMap::new();
    let mut columns: Vec<Option<Vec<(usize, C<T>)>>> = vec![None; space.dim()];
    for pb in resolution {
        let p = space.path_index(&pb.path)?;
        path_of_basis.push(p);
        let slots: Vec<usize> = (0..space.dim()).filter(|&i| space.path_of(i) == p).collect();
        let mut vecs: Vec<Vec<C<T>>> = Vec::new();
        for (_, terms) in &pb.outcomes {
            let mut v = vec![zero(); local];
            for &(pol, l, a) in terms {
                let i = space.slot(p, pol, l).ok_or(Error::TruncationOverflow {
                    element: "basis".into(),
                    oam: l,
                    bound: space.bound(),
                })?;
                v[i - slots[0]] += a;
            }
            for (k, w) in vecs.iter().enumerate() {
                let d = crate::linalg::inner(w, &v);
                if d.norm() > T::lit(1e-10) {
                    return Err(Error::InvalidParameter(format!(
                        "basis on `{}` is not orthogonal (outcomes {k} and {})",
                        pb.path,
                        vecs.len()
                    )));
                }
            }
            let n = crate::linalg::norm_sqr(&v);
            if (n - T::one()).abs() > T::lit(1e-10) {
                return Err(Error::InvalidParameter(format!("basis vector on `{}` is not normalized", pb.path)));
            }
            vecs.push(v);
        }
        let named = vecs.len();
        for e in 0..local {
            if vecs.len() == local {
                break;
            }
            let mut v = vec![zero(); local];
            v[e] = one();
            for w in &vecs {
                let d = crate::linalg::inner(w, &v);
                for (x, y) in v.iter_mut().zip(w) {
                    *x -= d * y;
                }
            }
            let n = crate::linalg::norm_sqr(&v).sqrt();
            if n > T::lit(1e-6) {
                vecs.push(v.iter().map(|x| x / n).collect());
            }
        }
        // W = sum_k |slot_k><b_k|, so column j of W holds conj(b_k[j]) at row slot_k.
        for (j, &sj) in slots.iter().enumerate() {
            let col: Vec<(usize, C<T>)> = vecs
                .iter()
                .enumerate()
                .map(|(k, b)| (slots[k], b[j].conj()))
                .filter(|(_, a)| a.norm() > T::prune_threshold())
                .collect();
            columns[sj] = Some(col);
        }
        for (k, &slot) in slots.iter().enumerate() {
            labels.insert(slot, if k < named { Some(pb.outcomes[k].0.clone()) } else { None });
        }
    }
    let w = ModeTransform::from_mode_map(space.clone(), TransformKind::Unitary, "readout", |p, pol, l| {
        let j = space.slot(p, pol, l)?;
        columns[j].as_ref().map(|col| col.iter().map(|&(i, a)| {
            let (pp, q, m) = space.unpack(i);
            (pp, q, m, a)
        }).collect())
    });
    let rotated = apply_transform(&w, s)?;
    let total = rotated.norm_sqr();
    if total <= T::zero() {
        return Err(Error::EmptyPostSelection);
    }
    let mut dist: BTreeMap<String, T> = BTreeMap::new();
    let mut missing: BTreeMap<String, T> = BTreeMap::new();
    for (c, a) in &rotated.terms {
        let prob = a.norm_sqr() / total;
        let mut parts: Vec<(usize, Vec<String>)> = Vec::new();
        let mut bad: Option<String> = None;
        for &i in &c.0 {
            let p = space.path_of(i as usize);
            match labels.get(&(i as usize)) {
                Some(Some(l)) => match parts.iter_mut().find(|(q, _)| *q == p) {
                    Some((_, v)) => v.push(l.clone()),
                    None => parts.push((p, vec![l.clone()])),
                },
                _ => bad = Some(space.paths()[p].clone()),
            }
        }
        if let Some(path) = bad {
            *missing.entry(path).or_insert_with(T::zero) += prob;
            continue;
        }
        parts.sort_by_key(|(p, _)| path_of_basis.iter().position(|q| q == p));
        let key = parts
            .iter()
            .map(|(p, ls)| format!("{}={}", space.paths()[*p], ls.join("+")))
            .collect::<Vec<_>>()
            .join(",");
        *dist.entry(key).or_insert_with(T::zero) += prob;
    }
    if let Some((path, m)) = missing.into_iter().find(|(_, m)| *m > T::lit(1e-10)) {
        return Err(Error::BasisIncomplete { path, missing: m.to_f64().unwrap_or(f64::NAN) });
    }
    Ok(dist)
}

/// Multinomial draw of `shots` samples from `dist`, reproducible under
/// `(seed, stream)`.
pub fn sample_counts<K: Clone + Ord>(
    dist: &BTreeMap<K, f64>,
    shots: u64,
    seed: u64,
    stream: u64,
) -> BTreeMap<K, u64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut out: BTreeMap<K, u64> = dist.keys().map(|k| (k.clone(), 0)).collect();
    let mut left = shots;
    let mut mass: f64 = dist.values().map(|p| p.max(0.0)).sum();
    let n = dist.len();
    for (i, (k, &p)) in dist.iter().enumerate() {
        if left == 0 {
            break;
        }
        let p = p.max(0.0);
        let draw = if i + 1 == n || mass <= 0.0 {
            left
        } else {
            let q = if mass - p <= 1e-12 * mass { 1.0 } else { (p / mass).clamp(0.0, 1.0) };
            Binomial::new(left, q).map(|b| b.sample(&mut rng)).unwrap_or(0)
        };
        out.insert(k.clone(), draw);
        left -= draw;
        mass -= p;
    }
    out
}
