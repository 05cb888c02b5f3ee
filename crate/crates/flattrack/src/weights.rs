//! The coupled weight triple (Qbar, M, Q) with Q = Qbar M^-1 Qbar enforced.
//!
//! The coupling is what makes the closed-form costate exist, so the triple is
//! constructed once, validated, and then shared immutably.

use nalgebra::{Matrix2, SymmetricEigen};

use crate::error::WeightError;

pub type Mat2 = Matrix2<f64>;

pub const EIGENVALUE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct WeightSet {
    qbar: Mat2,
    m: Mat2,
    q: Mat2,
    m_inv: Mat2,
}

fn check_symmetric(name: &'static str, a: &Mat2) -> Result<(), WeightError> {
    let skew = (a[(0, 1)] - a[(1, 0)]).abs();
    let scale = a.amax().max(1.0);
    if skew > 1e-9 * scale {
        return Err(WeightError::NotSymmetric { name, skew });
    }
    Ok(())
}

fn check_spd(name: &'static str, a: &Mat2) -> Result<(), WeightError> {
    // 2x2 symmetric eigenvalues in closed form.
    let tr = a[(0, 0)] + a[(1, 1)];
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
    let min_eig = (tr - disc) / 2.0;
    if min_eig <= EIGENVALUE_FLOOR {
        return Err(WeightError::NotPositiveDefinite { name, eigenvalue: min_eig });
    }
    Ok(())
}

fn symmetrize(a: Mat2) -> Mat2 {
    (a + a.transpose()) * 0.5
}

/// Symmetric positive-definite square root via eigendecomposition.
fn spd_sqrt(a: &Mat2) -> Mat2 {
    let eig = SymmetricEigen::new(*a);
    let d = Mat2::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    symmetrize(eig.eigenvectors * d * eig.eigenvectors.transpose())
}

fn spd_inverse(a: &Mat2) -> Mat2 {
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    Mat2::new(a[(1, 1)], -a[(0, 1)], -a[(1, 0)], a[(0, 0)]) / det
}

impl WeightSet {
    /// Build from the terminal weight Qbar and the error-rate weight M;
    /// the error weight Q is derived from the coupling.
    pub fn from_qbar_m(qbar: Mat2, m: Mat2) -> Result<Self, WeightError> {
        check_symmetric("Qbar", &qbar)?;
        check_symmetric("M", &m)?;
        check_spd("Qbar", &qbar)?;
        check_spd("M", &m)?;
        let m_inv = spd_inverse(&m);
        let q = symmetrize(qbar * m_inv * qbar);
        check_spd("Q", &q)?;
        Ok(Self { qbar, m, q, m_inv })
    }

    /// Build from the error weight Q and M, solving the coupling for the
    /// unique SPD Qbar = M^1/2 (M^-1/2 Q M^-1/2)^1/2 M^1/2.
    pub fn from_q_m(q: Mat2, m: Mat2) -> Result<Self, WeightError> {
        check_symmetric("Q", &q)?;
        check_symmetric("M", &m)?;
        check_spd("Q", &q)?;
        check_spd("M", &m)?;
        let m_sqrt = spd_sqrt(&m);
        let m_sqrt_inv = spd_inverse(&m_sqrt);
        let inner = spd_sqrt(&symmetrize(m_sqrt_inv * q * m_sqrt_inv));
        let qbar = symmetrize(m_sqrt * inner * m_sqrt);
        check_spd("Qbar", &qbar)?;
        let m_inv = spd_inverse(&m);
        // Keep the user's Q exactly; the round-trip residual is checked below.
        let set = Self { qbar, m, q, m_inv };
        debug_assert!(set.coupling_residual() <= 1e-10 * q.amax().max(1.0));
        Ok(set)
    }

    pub fn qbar(&self) -> &Mat2 {
        &self.qbar
    }

    pub fn m(&self) -> &Mat2 {
        &self.m
    }

    pub fn q(&self) -> &Mat2 {
        &self.q
    }

    pub fn m_inv(&self) -> &Mat2 {
        &self.m_inv
    }

    /// Max-norm of Q - Qbar M^-1 Qbar.
    pub fn coupling_residual(&self) -> f64 {
        (self.q - self.qbar * self.m_inv * self.qbar).amax()
    }

    /// Error matrix governing the singular arc, -Qbar M^-1.
    pub fn singular_arc_matrix(&self) -> Mat2 {
        -(self.qbar * self.m_inv)
    }

    /// Smallest eigenvalue of Qbar M^-1 (the slow contraction rate on the
    /// singular arc). Qbar M^-1 is similar to an SPD matrix, so the
    /// eigenvalues are real and positive.
    pub fn arc_rate(&self) -> f64 {
        let a = self.qbar * self.m_inv;
        let tr = a[(0, 0)] + a[(1, 1)];
        let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        (tr - disc) / 2.0
    }
}
