//! Pauli operators on the `{|-1>, |+1>}` subspace (levels 1 and 3) of each
//! qudit and the fidelity to `(|-1,-1> + |-1,+1> + |+1,-1> - |+1,+1>)/2`.

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::C;

const LO: usize = 1;
const HI: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// 4x4 embedding of a Pauli matrix; zero outside the subspace.
pub fn embedded_pauli(p: Pauli) -> CMatrix<f64> {
    let mut m = CMatrix::zeros(4, 4);
    let (one, i) = (C::new(1.0, 0.0), C::new(0.0, 1.0));
    match p {
        Pauli::Z => {
            m[(LO, LO)] = one;
            m[(HI, HI)] = -one;
        }
        Pauli::X => {
            m[(LO, HI)] = one;
            m[(HI, LO)] = one;
        }
        Pauli::Y => {
            m[(LO, HI)] = -i;
            m[(HI, LO)] = i;
        }
    }
    m
}

/// `sigma_z x sigma_x`, `sigma_x x sigma_z`, `sigma_y x sigma_y`.
pub fn stabilizers() -> [CMatrix<f64>; 3] {
    use Pauli::*;
    [(Z, X), (X, Z), (Y, Y)].map(|(a, b)| embedded_pauli(a).kron(&embedded_pauli(b)))
}

/// The target state itself, row-major over two qudits.
pub fn entangled_target() -> Vec<C<f64>> {
    let mut v = vec![C::new(0.0, 0.0); 16];
    v[LO * 4 + LO] = C::new(0.5, 0.0);
    v[LO * 4 + HI] = C::new(0.5, 0.0);
    v[HI * 4 + LO] = C::new(0.5, 0.0);
    v[HI * 4 + HI] = C::new(-0.5, 0.0);
    v
}

/// `tr(rho O)` for each stabilizer.
pub fn stabilizer_expectations(rho: &CMatrix<f64>) -> [f64; 3] {
    stabilizers().map(|o| (rho * &o).trace().re)
}

/// `(1 + e1 + e2 + e3) / 4`.
pub fn stabilizer_fidelity(e1: f64, e2: f64, e3: f64) -> Result<f64> {
    for e in [e1, e2, e3] {
        if !(-1.0..=1.0).contains(&e) {
            return Err(Error::InvalidParameter(format!("expectation value {e} outside [-1, 1]")));
        }
    }
    Ok((1.0 + e1 + e2 + e3) / 4.0)
}
