use std::fmt;
use std::sync::Arc;

use super::{ModeSpace, Pol, SinglePhotonState};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{one, zero, Real, C};

/// How strongly a transform preserves the norm. Ordered from strongest to weakest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TransformKind {
    Unitary,
    Isometry,
    Projector,
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransformKind::Unitary => "unitary",
            TransformKind::Isometry => "isometry",
            TransformKind::Projector => "projector",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Column<T: Real> {
    /// Sparse image, sorted by row.
    Image(Vec<(usize, C<T>)>),
    /// The image leaves the truncation window at this OAM index.
    Overflow(i64),
}

/// Sparse column-stored linear map on a [`ModeSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModeTransform<T: Real> {
    space: Arc<ModeSpace>,
    cols: Vec<Column<T>>,
    kind: TransformKind,
    provenance: String,
}

impl<T: Real> ModeTransform<T> {
    pub fn identity(space: Arc<ModeSpace>) -> Self {
        let cols = (0..space.dim()).map(|j| Column::Image(vec![(j, one())])).collect();
        Self { space, cols, kind: TransformKind::Unitary, provenance: "I".into() }
    }

    /// Builds a transform mode by mode. `f(path, pol, l)` returns the image
    /// as `(path, pol, l, amplitude)` terms, or `None` to leave the mode alone.
    pub fn from_mode_map<F>(
        space: Arc<ModeSpace>,
        kind: TransformKind,
        provenance: impl Into<String>,
        f: F,
    ) -> Self
    where
        F: Fn(usize, Pol, i64) -> Option<Vec<(usize, Pol, i64, C<T>)>>,
    {
        let mut cols = Vec::with_capacity(space.dim());
        for j in 0..space.dim() {
            let (p, pol, oam) = space.unpack(j);
            let col = match f(p, pol, oam) {
                None => Column::Image(vec![(j, one())]),
                Some(terms) => {
                    let mut image: Vec<(usize, C<T>)> = Vec::with_capacity(terms.len());
                    let mut overflow = None;
                    for (tp, tpol, toam, a) in terms {
                        if a.norm() <= T::prune_threshold() {
                            continue;
                        }
                        match space.slot(tp, tpol, toam) {
                            Some(r) => match image.iter_mut().find(|(i, _)| *i == r) {
                                Some(slot) => slot.1 += a,
                                None => image.push((r, a)),
                            },
                            None => overflow = Some(toam),
                        }
                    }
                    match overflow {
                        Some(l) => Column::Overflow(l),
                        None => {
                            image.retain(|(_, a)| a.norm() > T::prune_threshold());
                            image.sort_by_key(|(i, _)| *i);
                            Column::Image(image)
                        }
                    }
                }
            };
            cols.push(col);
        }
        Self { space, cols, kind, provenance: provenance.into() }
    }

    /// Wraps a dense matrix. Entries below the prune threshold are dropped.
    pub fn from_dense(
        space: Arc<ModeSpace>,
        m: &CMatrix<T>,
        kind: TransformKind,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if m.rows() != space.dim() || m.cols() != space.dim() {
            return Err(Error::SpaceMismatch);
        }
        let cols = (0..m.cols())
            .map(|j| {
                Column::Image(
                    (0..m.rows())
                        .map(|i| (i, m[(i, j)]))
                        .filter(|(_, a)| a.norm() > T::prune_threshold())
                        .collect(),
                )
            })
            .collect();
        Ok(Self { space, cols, kind, provenance: provenance.into() })
    }

    pub fn space(&self) -> &Arc<ModeSpace> {
        &self.space
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    /// Element descriptor (or composition of descriptors) this map came from.
    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn with_kind(mut self, kind: TransformKind) -> Self {
        self.kind = kind;
        self
    }

    fn overflow(&self, l: i64) -> Error {
        Error::TruncationOverflow { element: self.provenance.clone(), oam: l, bound: self.space.bound() }
    }

    /// Sparse image of basis mode `j`.
    pub fn column(&self, j: usize) -> Result<&[(usize, C<T>)]> {
        match &self.cols[j] {
            Column::Image(v) => Ok(v),
            Column::Overflow(l) => Err(self.overflow(*l)),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.cols.iter().all(|c| matches!(c, Column::Image(_)))
    }

    pub fn entry(&self, row: usize, col: usize) -> C<T> {
        match &self.cols[col] {
            Column::Image(v) => v.iter().find(|(i, _)| *i == row).map_or(zero(), |(_, a)| *a),
            Column::Overflow(_) => zero(),
        }
    }

    /// Dense matrix; columns that overflow the window are left as zero.
    pub fn dense(&self) -> CMatrix<T> {
        let n = self.space.dim();
        let mut m = CMatrix::zeros(n, n);
        for (j, col) in self.cols.iter().enumerate() {
            if let Column::Image(v) = col {
                for &(i, a) in v {
                    m[(i, j)] = a;
                }
            }
        }
        m
    }

    pub fn apply_amplitudes(&self, amps: &[C<T>]) -> Result<Vec<C<T>>> {
        if amps.len() != self.space.dim() {
            return Err(Error::SpaceMismatch);
        }
        let mut out = vec![zero(); amps.len()];
        for (j, a) in amps.iter().enumerate() {
            if a.norm() <= T::prune_threshold() {
                continue;
            }
            for &(i, m) in self.column(j)? {
                out[i] += m * a;
            }
        }
        for a in out.iter_mut() {
            if a.norm() <= T::prune_threshold() {
                *a = zero();
            }
        }
        Ok(out)
    }

    /// `s' = M s`. Projectors leave the norm unnormalized.
    pub fn apply(&self, s: &SinglePhotonState<T>) -> Result<SinglePhotonState<T>> {
        if !self.space.same_as(s.space()) {
            return Err(Error::SpaceMismatch);
        }
        let amps = self.apply_amplitudes(s.amplitudes())?;
        SinglePhotonState::from_amplitudes(self.space.clone(), amps)
    }

    /// `next * self`: apply `self` first, then `next`.
    pub fn then(&self, next: &Self) -> Result<Self> {
        if !self.space.same_as(&next.space) {
            return Err(Error::SpaceMismatch);
        }
        let n = self.space.dim();
        let mut scratch = vec![zero::<T>(); n];
        let mut touched: Vec<usize> = Vec::new();
        let mut cols = Vec::with_capacity(n);
        for col in &self.cols {
            let v = match col {
                Column::Overflow(l) => {
                    cols.push(Column::Overflow(*l));
                    continue;
                }
                Column::Image(v) => v,
            };
            let mut overflow = None;
            for &(k, a) in v {
                match &next.cols[k] {
                    Column::Overflow(l) => {
                        overflow = Some(*l);
                        break;
                    }
                    Column::Image(w) => {
                        for &(i, b) in w {
                            if scratch[i] == zero() {
                                touched.push(i);
                            }
                            scratch[i] += b * a;
                        }
                    }
                }
            }
            touched.sort_unstable();
            touched.dedup();
            let mut image = Vec::with_capacity(touched.len());
            for &i in &touched {
                if scratch[i].norm() > T::prune_threshold() {
                    image.push((i, scratch[i]));
                }
                scratch[i] = zero();
            }
            touched.clear();
            cols.push(match overflow {
                Some(l) => Column::Overflow(l),
                None => Column::Image(image),
            });
        }
        let kind = self.kind.max(next.kind);
        let provenance = format!("{} ; {}", self.provenance, next.provenance);
        Ok(Self { space: self.space.clone(), cols, kind, provenance })
    }

    /// `max |M†M - I|` over the columns inside the window. For a square
    /// matrix with no overflowing column this also bounds `MM† - I`.
    pub fn unitarity_defect(&self) -> T {
        let defined: Vec<&[(usize, C<T>)]> = self
            .cols
            .iter()
            .filter_map(|c| match c {
                Column::Image(v) => Some(v.as_slice()),
                Column::Overflow(_) => None,
            })
            .collect();
        let mut worst = T::zero();
        for (a, ci) in defined.iter().enumerate() {
            for (b, cj) in defined.iter().enumerate().skip(a) {
                let dot = sparse_dot(ci, cj);
                let target = if a == b { one() } else { zero() };
                worst = worst.max((dot - target).norm());
            }
        }
        worst
    }

    /// `max(|M² - M|, |M - M†|)`.
    pub fn projector_defect(&self) -> T {
        let m = self.dense();
        let sq = &m * &m;
        sq.max_abs_diff(&m).max(m.max_abs_diff(&m.adjoint()))
    }

    /// Checks the matrix against its declared kind.
    pub fn kind_defect(&self) -> T {
        match self.kind {
            TransformKind::Unitary => self.unitarity_defect(),
            TransformKind::Isometry => {
                let m = self.dense();
                let mm = &m.adjoint() * &m;
                mm.max_abs_diff(&CMatrix::identity(self.space.dim()))
            }
            TransformKind::Projector => self.projector_defect(),
        }
    }
}

/// `<a|b>` for row-sorted sparse vectors.
fn sparse_dot<T: Real>(a: &[(usize, C<T>)], b: &[(usize, C<T>)]) -> C<T> {
    let (mut i, mut j) = (0, 0);
    let mut acc = zero();
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1.conj() * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Product of `sequence` in application order (first element acts first).
pub fn compose_transforms<T: Real>(
    space: &Arc<ModeSpace>,
    sequence: &[ModeTransform<T>],
) -> Result<ModeTransform<T>> {
    let mut acc = ModeTransform::identity(space.clone());
    let mut names = Vec::with_capacity(sequence.len());
    for t in sequence {
        acc = acc.then(t)?;
        names.push(t.provenance.clone());
    }
    if names.is_empty() {
        names.push("I".into());
    }
    Ok(acc.with_provenance(names.join(" ; ")))
}
