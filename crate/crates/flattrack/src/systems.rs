//! System descriptors: the (g1, g2, phi) contract plus the two built-in
//! models and a name registry for the CLI.

use nalgebra::SMatrix;

use crate::error::ControlError;
use crate::geometry::{
    decompose_higher_brackets, lie_bracket, BracketDecomposition, FlatOutputMap, Mat2x3, Mat3,
    SmoothVectorField, Vec2, Vec3,
};

/// Admissible-state region.
#[derive(Debug, Clone)]
pub enum Domain {
    All,
    Box { lo: Vec3, hi: Vec3 },
}

impl Domain {
    pub fn contains(&self, x: &Vec3) -> bool {
        match self {
            Domain::All => x.iter().all(|v| v.is_finite()),
            Domain::Box { lo, hi } => (0..3).all(|k| x[k].is_finite() && x[k] >= lo[k] && x[k] <= hi[k]),
        }
    }
}

/// A driftless two-input system with a flat output already expressed in the
/// normalized input basis where g2 does not enter the output derivative.
#[derive(Debug, Clone)]
pub struct FlatSystemDescriptor {
    pub name: String,
    pub g1: SmoothVectorField,
    pub g2: SmoothVectorField,
    pub phi: FlatOutputMap,
    pub domain: Domain,
}

#[derive(Debug, Clone, Copy)]
pub struct InputBounds {
    pub u1_max: f64,
    pub u2_max: f64,
}

impl InputBounds {
    pub fn new(u1_max: f64, u2_max: f64) -> Self {
        assert!(u1_max > 0.0 && u2_max > 0.0, "input bounds must be positive");
        Self { u1_max, u2_max }
    }

    pub fn symmetric(u_max: f64) -> Self {
        Self::new(u_max, u_max)
    }
}

/// Right-hand side g1(x) u1 + g2(x) u2.
pub fn vector_field_rhs(
    system: &FlatSystemDescriptor,
    x: &Vec3,
    u: &Vec2,
) -> Result<Vec3, ControlError> {
    if !system.domain.contains(x) {
        return Err(ControlError::OutOfDomain { system: system.name.clone(), x: *x });
    }
    Ok(system.g1.eval(x) * u[0] + system.g2.eval(x) * u[1])
}

/// Kinematic steerable axle: g1 = sin(x3) d1 + cos(x3) d2, g2 = d3,
/// flat output (x1, x2).
pub fn steerable_axle() -> FlatSystemDescriptor {
    let g1 = SmoothVectorField::analytic(
        |x| Vec3::new(x[2].sin(), x[2].cos(), 0.0),
        |x| {
            let mut j = Mat3::zeros();
            j[(0, 2)] = x[2].cos();
            j[(1, 2)] = -x[2].sin();
            j
        },
    );
    let g2 = SmoothVectorField::analytic(|_| Vec3::new(0.0, 0.0, 1.0), |_| Mat3::zeros());
    let phi = FlatOutputMap::new(
        |x| Vec2::new(x[0], x[1]),
        |_| Mat2x3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0),
        |_| [Mat3::zeros(), Mat3::zeros()],
    );
    FlatSystemDescriptor {
        name: "steerable_axle".to_string(),
        g1,
        g2,
        phi,
        domain: Domain::All,
    }
}

/// Canonical chained form: z1' = v1, z2' = z3 v1, z3' = v2,
/// flat output (z1, z2).
pub fn chained_form() -> FlatSystemDescriptor {
    let g1 = SmoothVectorField::analytic(
        |z| Vec3::new(1.0, z[2], 0.0),
        |_| {
            let mut j = Mat3::zeros();
            j[(1, 2)] = 1.0;
            j
        },
    );
    let g2 = SmoothVectorField::analytic(|_| Vec3::new(0.0, 0.0, 1.0), |_| Mat3::zeros());
    let phi = FlatOutputMap::new(
        |z| Vec2::new(z[0], z[1]),
        |_| Mat2x3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0),
        |_| [Mat3::zeros(), Mat3::zeros()],
    );
    FlatSystemDescriptor {
        name: "chained_form".to_string(),
        g1,
        g2,
        phi,
        domain: Domain::All,
    }
}

pub const REGISTRY: &[&str] = &["steerable_axle", "chained_form"];

/// Look up a built-in system by name.
pub fn by_name(name: &str) -> Option<FlatSystemDescriptor> {
    match name {
        "steerable_axle" => Some(steerable_axle()),
        "chained_form" => Some(chained_form()),
        _ => None,
    }
}

/// All Lie-derivative data the control law needs at one state.
#[derive(Debug, Clone)]
pub struct StateGeometry {
    pub x: Vec3,
    pub phi: Vec2,
    pub dphi: Mat2x3,
    pub g1: Vec3,
    pub g2: Vec3,
    pub bracket: Vec3,
    /// L_{g1} phi
    pub lg1_phi: Vec2,
    /// L_{[g1,g2]} phi
    pub lbr_phi: Vec2,
    /// L_{g1}^2 phi
    pub lg1_sq_phi: Vec2,
    /// L_{[g1,g2]} L_{g1} phi
    pub lbr_lg1_phi: Vec2,
    pub decomposition: BracketDecomposition,
}

impl StateGeometry {
    pub fn at(system: &FlatSystemDescriptor, x: &Vec3) -> Result<Self, ControlError> {
        if !system.domain.contains(x) {
            return Err(ControlError::OutOfDomain { system: system.name.clone(), x: *x });
        }
        let phi = system.phi.eval(x);
        let dphi = system.phi.jacobian(x);
        let hess = system.phi.hessian(x);
        let g1 = system.g1.eval(x);
        let g2 = system.g2.eval(x);
        let j_g1 = system.g1.jacobian(x);
        let bracket = lie_bracket(&system.g1, &system.g2, x);

        let lg1_phi = dphi * g1;
        let lbr_phi = dphi * bracket;

        // grad(L_{g1} phi^j) = J_{g1}^T grad(phi^j) + Hess(phi^j) g1
        let mut lg1_sq_phi = Vec2::zeros();
        let mut lbr_lg1_phi = Vec2::zeros();
        for j in 0..2 {
            let grad_phi_j = dphi.row(j).transpose();
            let grad_lg1 = j_g1.transpose() * grad_phi_j + hess[j] * g1;
            lg1_sq_phi[j] = g1.dot(&grad_lg1);
            lbr_lg1_phi[j] = bracket.dot(&grad_lg1);
        }

        let decomposition = decompose_higher_brackets(&system.g1, &system.g2, x)
            .map_err(|e| match e {
                crate::error::GeometryError::SpanDeficient { at, cond } => {
                    log::debug!("span-deficient frame at {at:?} (cond {cond:.2e})");
                    ControlError::OutOfDomain { system: system.name.clone(), x: *x }
                }
            })?;

        Ok(Self {
            x: *x,
            phi,
            dphi,
            g1,
            g2,
            bracket,
            lg1_phi,
            lbr_phi,
            lg1_sq_phi,
            lbr_lg1_phi,
            decomposition,
        })
    }
}

/// Gradient of L_{g1} phi^j as a full matrix row pair, used by the PMP
/// residual oracle.
pub fn grad_lg1_phi(system: &FlatSystemDescriptor, x: &Vec3) -> [Vec3; 2] {
    let dphi = system.phi.jacobian(x);
    let hess = system.phi.hessian(x);
    let g1 = system.g1.eval(x);
    let j_g1 = system.g1.jacobian(x);
    [
        j_g1.transpose() * dphi.row(0).transpose() + hess[0] * g1,
        j_g1.transpose() * dphi.row(1).transpose() + hess[1] * g1,
    ]
}

/// 3x3 Jacobians of g1 and g2, used by the PMP residual oracle.
pub fn field_jacobians(system: &FlatSystemDescriptor, x: &Vec3) -> [SMatrix<f64, 3, 3>; 2] {
    [system.g1.jacobian(x), system.g2.jacobian(x)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn axle_fields_and_outputs() {
        let sys = steerable_axle();
        let x = Vec3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2);
        let g1 = sys.g1.eval(&x);
        assert_relative_eq!(g1[0], 1.0, epsilon = 1e-15);
        assert!(g1[1].abs() < 1e-15);
        let geo = StateGeometry::at(&sys, &x).unwrap();
        // g2 never enters the output derivative.
        let lg2 = geo.dphi * geo.g2;
        assert_eq!(lg2[0], 0.0);
        assert_eq!(lg2[1], 0.0);
        // L_{g1}^2 phi vanishes identically for the axle.
        assert!(geo.lg1_sq_phi.amax() <= 1e-14);
    }

    #[test]
    fn chained_form_lie_table() {
        let sys = chained_form();
        let z = Vec3::new(0.2, 0.4, -1.3);
        let geo = StateGeometry::at(&sys, &z).unwrap();
        assert_relative_eq!(geo.lg1_phi[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(geo.lg1_phi[1], -1.3, epsilon = 1e-15);
        assert_relative_eq!(geo.lbr_phi[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(geo.lbr_phi[1], -1.0, epsilon = 1e-15);
        assert!(geo.decomposition.alpha.amax() <= 1e-8);
        assert!(geo.decomposition.beta.amax() <= 1e-8);
    }

    #[test]
    fn rhs_is_driftless_and_linear_in_u() {
        for sys in [steerable_axle(), chained_form()] {
            let x = Vec3::new(0.7, -0.2, 0.9);
            assert_eq!(vector_field_rhs(&sys, &x, &Vec2::zeros()).unwrap(), Vec3::zeros());
            let u = Vec2::new(1.3, -0.4);
            let v = Vec2::new(-0.2, 2.0);
            let lhs = vector_field_rhs(&sys, &x, &(u * 2.0 + v * 0.5)).unwrap();
            let rhs = vector_field_rhs(&sys, &x, &u).unwrap() * 2.0
                + vector_field_rhs(&sys, &x, &v).unwrap() * 0.5;
            assert!((lhs - rhs).amax() <= 1e-12);
        }
    }

    #[test]
    fn axle_rhs_examples() {
        let sys = steerable_axle();
        let x = Vec3::new(0.0, 0.0, 0.0);
        let forward = vector_field_rhs(&sys, &x, &Vec2::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(forward[1], 1.0, epsilon = 1e-15);
        assert!(forward[0].abs() < 1e-15 && forward[2].abs() < 1e-15);
        let steer = vector_field_rhs(&sys, &x, &Vec2::new(0.0, 1.0)).unwrap();
        assert_eq!(steer, Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn registry_resolves_names() {
        assert!(by_name("steerable_axle").is_some());
        assert!(by_name("chained_form").is_some());
        assert!(by_name("unicycle").is_none());
    }

    #[test]
    fn out_of_domain_reported() {
        let mut sys = steerable_axle();
        sys.domain = Domain::Box { lo: Vec3::new(-1.0, -1.0, -10.0), hi: Vec3::new(1.0, 1.0, 10.0) };
        let err = vector_field_rhs(&sys, &Vec3::new(5.0, 0.0, 0.0), &Vec2::zeros());
        assert!(matches!(err, Err(ControlError::OutOfDomain { .. })));
    }
}
