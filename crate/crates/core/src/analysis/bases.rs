use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::C;

/// Single-photon vector on the qudit alphabet, with its display label.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledState {
    pub label: &'static str,
    pub amps: [C<f64>; 4],
}

fn state(label: &'static str, a: [f64; 4]) -> LabeledState {
    LabeledState { label, amps: a.map(|x| C::new(x, 0.0)) }
}

const S: f64 = FRAC_1_SQRT_2;

/// `|-2>, |-1>, |0>, |+1>`.
pub fn z_states() -> [LabeledState; 4] {
    [
        state("-2", [1.0, 0.0, 0.0, 0.0]),
        state("-1", [0.0, 1.0, 0.0, 0.0]),
        state("0", [0.0, 0.0, 1.0, 0.0]),
        state("+1", [0.0, 0.0, 0.0, 1.0]),
    ]
}

/// Pairwise superpositions within each parity class.
pub fn x_states() -> [LabeledState; 4] {
    [
        state("-2+0", [S, 0.0, S, 0.0]),
        state("-2-0", [S, 0.0, -S, 0.0]),
        state("-1++1", [0.0, S, 0.0, S]),
        state("-1-+1", [0.0, S, 0.0, -S]),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BasisName {
    ZX,
    XZ,
    TableA3,
}

impl fmt::Display for BasisName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisName::ZX => "ZX",
            BasisName::XZ => "XZ",
            BasisName::TableA3 => "TableA3",
        })
    }
}

impl FromStr for BasisName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zx" => Ok(BasisName::ZX),
            "xz" => Ok(BasisName::XZ),
            "tablea3" | "a3" | "superpositions" => Ok(BasisName::TableA3),
            _ => Err(Error::InvalidParameter(format!("unknown basis table `{s}`"))),
        }
    }
}

/// Product inputs `(photon 1, photon 4)` in display order.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisTable {
    pub name: BasisName,
    pub entries: Vec<(LabeledState, LabeledState)>,
}

impl BasisTable {
    /// Photon 1 in Z (outer index), photon 4 in X (inner index).
    pub fn zx() -> Self {
        let entries = z_states().into_iter().flat_map(|a| x_states().map(|b| (a.clone(), b))).collect();
        Self { name: BasisName::ZX, entries }
    }

    /// Photon 1 in X (outer index), photon 4 in Z (inner index).
    pub fn xz() -> Self {
        let entries = x_states().into_iter().flat_map(|a| z_states().map(|b| (a.clone(), b))).collect();
        Self { name: BasisName::XZ, entries }
    }

    /// The seven superposition inputs.
    pub fn table_a3() -> Self {
        let m20 = state("-2+0", [S, 0.0, S, 0.0]);
        let m1p1 = state("-1++1", [0.0, S, 0.0, S]);
        let z0p1 = state("0++1", [0.0, 0.0, S, S]);
        let m10 = state("-1+0", [0.0, S, S, 0.0]);
        let entries = vec![
            (m20.clone(), z0p1),
            (m20.clone(), m10.clone()),
            (m20.clone(), m20.clone()),
            (m20.clone(), m1p1.clone()),
            (m1p1.clone(), m10),
            (m1p1.clone(), m20),
            (m1p1.clone(), m1p1),
        ];
        Self { name: BasisName::TableA3, entries }
    }

    pub fn by_name(name: BasisName) -> Self {
        match name {
            BasisName::ZX => Self::zx(),
            BasisName::XZ => Self::xz(),
            BasisName::TableA3 => Self::table_a3(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `"a|b"` labels in table order.
    pub fn labels(&self) -> Vec<String> {
        self.entries.iter().map(|(a, b)| format!("{}|{}", a.label, b.label)).collect()
    }

    /// Two-qudit product vector of entry `i` (row-major `m*4+n`).
    pub fn vector(&self, i: usize) -> Vec<C<f64>> {
        let (a, b) = &self.entries[i];
        a.amps.iter().flat_map(|x| b.amps.iter().map(move |y| x * y)).collect()
    }
}
