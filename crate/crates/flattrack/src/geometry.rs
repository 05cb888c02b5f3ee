//! Differential-geometric primitives on R^3: Lie derivatives, Lie brackets,
//! bracket decompositions and the flatness validity checks used by the
//! controller and its verification machinery.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2x3, Matrix3, Vector2, Vector3};

use crate::error::GeometryError;

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat2x3 = Matrix2x3<f64>;

/// Step rule for all central differences in this crate: h_k = max(1, |x_k|) * 1e-5.
pub const FD_STEP_SCALE: f64 = 1e-5;

/// Condition-number gate on the {g1, g2, [g1,g2]} basis matrix.
pub const SPAN_CONDITION_LIMIT: f64 = 1e10;

fn fd_step(coord: f64) -> f64 {
    coord.abs().max(1.0) * FD_STEP_SCALE
}

/// Central-difference Jacobian of a map R^3 -> R^3.
pub fn fd_jacobian3<F: Fn(&Vec3) -> Vec3>(f: F, x: &Vec3) -> Mat3 {
    let mut jac = Mat3::zeros();
    for col in 0..3 {
        let h = fd_step(x[col]);
        let mut xp = *x;
        let mut xm = *x;
        xp[col] += h;
        xm[col] -= h;
        let df = (f(&xp) - f(&xm)) / (2.0 * h);
        jac.set_column(col, &df);
    }
    jac
}

/// How the Jacobian of a vector field is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeSource {
    Analytic,
    FiniteDifference,
}

type FieldEval = Arc<dyn Fn(&Vec3) -> Vec3 + Send + Sync>;
type FieldJacobian = Arc<dyn Fn(&Vec3) -> Mat3 + Send + Sync>;

/// A smooth vector field on R^3 with its Jacobian, either analytic or
/// reconstructed by central differences of `eval`.
#[derive(Clone)]
pub struct SmoothVectorField {
    eval: FieldEval,
    jacobian: Option<FieldJacobian>,
    source: DerivativeSource,
}

impl SmoothVectorField {
    pub fn analytic(
        eval: impl Fn(&Vec3) -> Vec3 + Send + Sync + 'static,
        jacobian: impl Fn(&Vec3) -> Mat3 + Send + Sync + 'static,
    ) -> Self {
        Self {
            eval: Arc::new(eval),
            jacobian: Some(Arc::new(jacobian)),
            source: DerivativeSource::Analytic,
        }
    }

    /// Field defined by its evaluation alone; the Jacobian comes from
    /// central differences.
    pub fn from_eval(eval: impl Fn(&Vec3) -> Vec3 + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(eval),
            jacobian: None,
            source: DerivativeSource::FiniteDifference,
        }
    }

    /// Drop the analytic Jacobian and differentiate numerically instead.
    pub fn with_finite_differences(&self) -> Self {
        Self {
            eval: self.eval.clone(),
            jacobian: None,
            source: DerivativeSource::FiniteDifference,
        }
    }

    pub fn source(&self) -> DerivativeSource {
        self.source
    }

    pub fn eval(&self, x: &Vec3) -> Vec3 {
        (self.eval)(x)
    }

    pub fn jacobian(&self, x: &Vec3) -> Mat3 {
        match &self.jacobian {
            Some(jac) => jac(x),
            None => {
                let eval = self.eval.clone();
                fd_jacobian3(move |p| eval(p), x)
            }
        }
    }

    /// a*self + b*other, with the Jacobian combined the same way.
    pub fn linear_combination(a: f64, f: &Self, b: f64, g: &Self) -> Self {
        let (fe, ge) = (f.eval.clone(), g.eval.clone());
        let (fc, gc) = (f.clone(), g.clone());
        Self::analytic(
            move |x| fe(x) * a + ge(x) * b,
            move |x| fc.jacobian(x) * a + gc.jacobian(x) * b,
        )
    }
}

impl fmt::Debug for SmoothVectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothVectorField")
            .field("source", &self.source)
            .finish()
    }
}

type OutputEval = Arc<dyn Fn(&Vec3) -> Vec2 + Send + Sync>;
type OutputJacobian = Arc<dyn Fn(&Vec3) -> Mat2x3 + Send + Sync>;
type OutputHessian = Arc<dyn Fn(&Vec3) -> [Mat3; 2] + Send + Sync>;

/// The flat output map phi: R^3 -> R^2 with first and second derivatives.
#[derive(Clone)]
pub struct FlatOutputMap {
    eval: OutputEval,
    jacobian: OutputJacobian,
    hessian: OutputHessian,
}

impl FlatOutputMap {
    pub fn new(
        eval: impl Fn(&Vec3) -> Vec2 + Send + Sync + 'static,
        jacobian: impl Fn(&Vec3) -> Mat2x3 + Send + Sync + 'static,
        hessian: impl Fn(&Vec3) -> [Mat3; 2] + Send + Sync + 'static,
    ) -> Self {
        Self {
            eval: Arc::new(eval),
            jacobian: Arc::new(jacobian),
            hessian: Arc::new(hessian),
        }
    }

    pub fn eval(&self, x: &Vec3) -> Vec2 {
        (self.eval)(x)
    }

    pub fn jacobian(&self, x: &Vec3) -> Mat2x3 {
        (self.jacobian)(x)
    }

    pub fn hessian(&self, x: &Vec3) -> [Mat3; 2] {
        (self.hessian)(x)
    }

    /// Gradient of the i-th output component.
    pub fn gradient(&self, x: &Vec3, i: usize) -> Vec3 {
        self.jacobian(x).row(i).transpose()
    }
}

impl fmt::Debug for FlatOutputMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FlatOutputMap")
    }
}

/// Lie derivative of a scalar function along a field, given the gradient of
/// the function at x.
pub fn lie_derivative(field: &SmoothVectorField, gradient: &Vec3, x: &Vec3) -> f64 {
    field.eval(x).dot(gradient)
}

/// Lie bracket [g1, g2](x).
pub fn lie_bracket(g1: &SmoothVectorField, g2: &SmoothVectorField, x: &Vec3) -> Vec3 {
    g2.jacobian(x) * g1.eval(x) - g1.jacobian(x) * g2.eval(x)
}

/// Nested bracket [f, [g1,g2]](x). The Jacobian of the first-level bracket is
/// always taken by central differences, so no second derivatives of the
/// fields are required.
pub fn nested_bracket(
    f: &SmoothVectorField,
    g1: &SmoothVectorField,
    g2: &SmoothVectorField,
    x: &Vec3,
) -> Vec3 {
    let bracket_jac = fd_jacobian3(|p| lie_bracket(g1, g2, p), x);
    let bracket_val = lie_bracket(g1, g2, x);
    bracket_jac * f.eval(x) - f.jacobian(x) * bracket_val
}

/// Coefficients of [g1,[g1,g2]] and [g2,[g1,g2]] in the frame
/// {g1, g2, [g1,g2]}.
#[derive(Debug, Clone, Copy)]
pub struct BracketDecomposition {
    pub alpha: Vec3,
    pub beta: Vec3,
    /// Max-norm of the two linear-system residuals.
    pub residual: f64,
}

/// Condition number (2-norm) of a 3x3 matrix; infinite when singular.
pub fn condition_number(m: &Mat3) -> f64 {
    let sv = m.svd(false, false).singular_values;
    let (max, min) = (sv.max(), sv.min());
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Express the second-level brackets in the {g1, g2, [g1,g2]} frame at x.
pub fn decompose_higher_brackets(
    g1: &SmoothVectorField,
    g2: &SmoothVectorField,
    x: &Vec3,
) -> Result<BracketDecomposition, GeometryError> {
    let bracket = lie_bracket(g1, g2, x);
    let mut basis = Mat3::zeros();
    basis.set_column(0, &g1.eval(x));
    basis.set_column(1, &g2.eval(x));
    basis.set_column(2, &bracket);

    let cond = condition_number(&basis);
    if !cond.is_finite() || cond > SPAN_CONDITION_LIMIT {
        return Err(GeometryError::SpanDeficient { at: *x, cond });
    }

    let lu = basis.lu();
    let v1 = nested_bracket(g1, g1, g2, x);
    let v2 = nested_bracket(g2, g1, g2, x);
    let alpha = lu.solve(&v1).ok_or(GeometryError::SpanDeficient { at: *x, cond })?;
    let beta = lu.solve(&v2).ok_or(GeometryError::SpanDeficient { at: *x, cond })?;

    let r1 = (basis * alpha - v1).amax();
    let r2 = (basis * beta - v2).amax();

    Ok(BracketDecomposition {
        alpha,
        beta,
        residual: r1.max(r2),
    })
}

/// Per-sample record of the flatness conditions.
#[derive(Debug, Clone)]
pub struct FlatnessSample {
    pub x: Vec3,
    /// |L_{g2} phi^i| for i = 1, 2; both must vanish.
    pub lg2_phi: [f64; 2],
    /// Determinant of [[L_{g1}phi, L_{[g1,g2]}phi]] (2x2 nondegeneracy check).
    pub nondegeneracy_det: f64,
    /// Rank of {g1, g2, [g1,g2]} judged by the condition gate.
    pub span_rank: usize,
    pub span_condition: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct FlatnessReport {
    pub samples: Vec<FlatnessSample>,
    pub pass: bool,
}

pub const LG2_PHI_TOL: f64 = 1e-10;
pub const NONDEGENERACY_MIN_DET: f64 = 1e-8;

/// Evaluate the flatness conditions for a (g1, g2, phi) triple at each
/// sample. Failures are reported, not thrown.
pub fn flatness_check(
    g1: &SmoothVectorField,
    g2: &SmoothVectorField,
    phi: &FlatOutputMap,
    samples: &[Vec3],
) -> FlatnessReport {
    let mut out = Vec::with_capacity(samples.len());
    let mut all = true;
    for x in samples {
        let dphi = phi.jacobian(x);
        let g2v = g2.eval(x);
        let lg2 = [dphi.row(0).transpose().dot(&g2v), dphi.row(1).transpose().dot(&g2v)];

        let g1v = g1.eval(x);
        let bracket = lie_bracket(g1, g2, x);
        let lg1 = dphi * g1v;
        let lbr = dphi * bracket;
        let det = lg1[0] * lbr[1] - lbr[0] * lg1[1];

        let mut basis = Mat3::zeros();
        basis.set_column(0, &g1v);
        basis.set_column(1, &g2v);
        basis.set_column(2, &bracket);
        let cond = condition_number(&basis);
        let rank = if cond.is_finite() && cond <= SPAN_CONDITION_LIMIT { 3 } else { basis.rank(1e-12) };

        let pass = lg2[0].abs() <= LG2_PHI_TOL
            && lg2[1].abs() <= LG2_PHI_TOL
            && det.abs() >= NONDEGENERACY_MIN_DET
            && rank == 3;
        all &= pass;
        out.push(FlatnessSample {
            x: *x,
            lg2_phi: [lg2[0].abs(), lg2[1].abs()],
            nondegeneracy_det: det,
            span_rank: rank,
            span_condition: cond,
            pass,
        });
    }
    FlatnessReport { samples: out, pass: all }
}
