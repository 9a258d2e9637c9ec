//! Continuous Lyapunov equation MC + CMᵀ + Q = 0 for 2×2 systems.

use nalgebra::Matrix2;

use crate::error::{Error, Result};

/// Stationary covariance of dV = MV dt + noise with ⟨F Fᵀ⟩ = Q δ(t − t′).
///
/// Uses the closed form C = [det(M)·Q + (M − tr M·I) Q (M − tr M·I)ᵀ] / (−2 tr M det M),
/// which follows from Cayley–Hamilton for 2×2 matrices. M must be Hurwitz.
pub fn solve_lyapunov_2x2(m: &Matrix2<f64>, q: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let tr = m.trace();
    let det = m.determinant();
    if !(tr < 0.0 && det > 0.0) {
        return Err(Error::Unstable {
            gamma: -tr,
            det,
        });
    }
    let shifted = m - Matrix2::identity() * tr;
    let c = (q * det + shifted * q * shifted.transpose()) / (-2.0 * tr * det);
    // Symmetrize away rounding.
    Ok((c + c.transpose()) * 0.5)
}
