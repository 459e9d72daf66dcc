//! Truncated optical mode space and single-photon optics.
//!
//! A mode is a (path, polarization, OAM index) triple. Paths are opaque
//! labels; the OAM ladder is truncated to `|l| <= L`.

mod conventions;
mod element;
mod transform;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{zero, Real, C};

pub use conventions::Conventions;
pub use element::{element_transform, parse_angle, Element, PlacedElement};
pub use transform::{compose_transforms, ModeTransform, TransformKind};

/// Linear polarization basis label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pol {
    H,
    V,
}

impl Pol {
    pub const ALL: [Pol; 2] = [Pol::H, Pol::V];

    fn offset(self) -> usize {
        match self {
            Pol::H => 0,
            Pol::V => 1,
        }
    }
}

impl fmt::Display for Pol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pol::H => "H",
            Pol::V => "V",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mode {
    pub path: String,
    pub pol: Pol,
    pub oam: i64,
}

impl Mode {
    pub fn new(path: impl Into<String>, pol: Pol, oam: i64) -> Self {
        Self { path: path.into(), pol, oam }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.path, self.pol, self.oam)
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    /// Parses `path:pol:l`, e.g. `C:H:-1`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let (Some(path), Some(pol), Some(oam), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(Error::InvalidParameter(format!("malformed mode `{s}`")));
        };
        let pol = match pol {
            "H" => Pol::H,
            "V" => Pol::V,
            other => return Err(Error::InvalidParameter(format!("unknown polarization `{other}`"))),
        };
        let oam = oam
            .trim_start_matches('+')
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad OAM index in `{s}`")))?;
        if path.is_empty() {
            return Err(Error::InvalidParameter(format!("empty path in `{s}`")));
        }
        Ok(Mode::new(path, pol, oam))
    }
}

/// Ordered set of paths times `{H, V}` times `[-L, L]`, with a dense index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSpace {
    paths: Vec<String>,
    bound: u32,
}

/// Default OAM truncation for the four-dimensional experiments.
pub const DEFAULT_BOUND: u32 = 4;

impl ModeSpace {
    pub fn new<I, S>(paths: I, bound: u32) -> Result<Arc<Self>>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let paths: Vec<String> = paths.into_iter().map(Into::into).collect();
        for (i, p) in paths.iter().enumerate() {
            if paths[..i].contains(p) {
                return Err(Error::InvalidParameter(format!("duplicate path `{p}`")));
            }
        }
        Ok(Arc::new(Self { paths, bound }))
    }

    pub fn paths(&self) -> &[String] {
        &self.paths
    }

    /// Truncation bound `L`.
    pub fn bound(&self) -> u32 {
        self.bound
    }

    pub fn ladder_len(&self) -> usize {
        2 * self.bound as usize + 1
    }

    fn per_path(&self) -> usize {
        2 * self.ladder_len()
    }

    pub fn dim(&self) -> usize {
        self.paths.len() * self.per_path()
    }

    pub fn path_index(&self, path: &str) -> Result<usize> {
        self.paths
            .iter()
            .position(|p| p == path)
            .ok_or_else(|| Error::UnknownPath(path.to_string()))
    }

    pub fn in_window(&self, oam: i64) -> bool {
        oam.unsigned_abs() <= u64::from(self.bound)
    }

    /// Dense index of `(path index, pol, l)`, `None` outside the window.
    pub fn slot(&self, path: usize, pol: Pol, oam: i64) -> Option<usize> {
        if path >= self.paths.len() || !self.in_window(oam) {
            return None;
        }
        let ladder = (oam + i64::from(self.bound)) as usize;
        Some(path * self.per_path() + pol.offset() * self.ladder_len() + ladder)
    }

    pub fn index(&self, mode: &Mode) -> Result<usize> {
        let p = self.path_index(&mode.path)?;
        self.slot(p, mode.pol, mode.oam).ok_or_else(|| Error::TruncationOverflow {
            element: "mode".into(),
            oam: mode.oam,
            bound: self.bound,
        })
    }

    /// Decomposes a dense index into `(path index, pol, l)`.
    pub fn unpack(&self, idx: usize) -> (usize, Pol, i64) {
        let path = idx / self.per_path();
        let rest = idx % self.per_path();
        let pol = if rest < self.ladder_len() { Pol::H } else { Pol::V };
        let oam = (rest % self.ladder_len()) as i64 - i64::from(self.bound);
        (path, pol, oam)
    }

    pub fn mode(&self, idx: usize) -> Mode {
        let (p, pol, oam) = self.unpack(idx);
        Mode::new(self.paths[p].clone(), pol, oam)
    }

    pub fn path_of(&self, idx: usize) -> usize {
        idx / self.per_path()
    }

    pub fn same_as(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other) || **self == **other
    }
}

/// Amplitude vector of one photon over a [`ModeSpace`].
///
/// The vector is not forced to unit norm: after a projector its squared
/// norm is the post-selection probability.
#[derive(Clone, Debug, PartialEq)]
pub struct SinglePhotonState<T: Real> {
    space: Arc<ModeSpace>,
    amps: Vec<C<T>>,
}

impl<T: Real> SinglePhotonState<T> {
    pub fn from_amplitudes(space: Arc<ModeSpace>, amps: Vec<C<T>>) -> Result<Self> {
        if amps.len() != space.dim() {
            return Err(Error::SpaceMismatch);
        }
        Ok(Self { space, amps })
    }

    pub fn basis(space: Arc<ModeSpace>, mode: &Mode) -> Result<Self> {
        Self::from_terms(space, &[(mode.clone(), crate::scalar::one())])
    }

    /// Sums the given `(mode, amplitude)` terms.
    pub fn from_terms(space: Arc<ModeSpace>, terms: &[(Mode, C<T>)]) -> Result<Self> {
        let mut amps = vec![zero(); space.dim()];
        for (m, a) in terms {
            amps[space.index(m)?] += *a;
        }
        Ok(Self { space, amps })
    }

    pub fn space(&self) -> &Arc<ModeSpace> {
        &self.space
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amps
    }

    pub fn amp(&self, mode: &Mode) -> C<T> {
        self.space.index(mode).map_or(zero(), |i| self.amps[i])
    }

    /// Squared norm; the survival probability after projective elements.
    pub fn probability(&self) -> T {
        crate::linalg::norm_sqr(&self.amps)
    }

    pub fn normalized(&self) -> Result<Self> {
        let p = self.probability();
        if p <= T::zero() {
            return Err(Error::EmptyPostSelection);
        }
        let n = p.sqrt();
        Ok(Self { space: self.space.clone(), amps: self.amps.iter().map(|a| a / n).collect() })
    }

    /// Non-negligible `(mode, amplitude)` pairs in index order.
    pub fn terms(&self) -> Vec<(Mode, C<T>)> {
        self.amps
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > T::prune_threshold())
            .map(|(i, a)| (self.space.mode(i), *a))
            .collect()
    }

    pub fn scaled(&self, s: C<T>) -> Self {
        Self { space: self.space.clone(), amps: self.amps.iter().map(|a| a * s).collect() }
    }
}
