//! Smooth reference output signals with first and second time derivatives.

use crate::geometry::Vec2;

/// Sampled reference value with its derivatives.
#[derive(Debug, Clone, Copy)]
pub struct RefPoint {
    pub y: Vec2,
    pub ydot: Vec2,
    pub yddot: Vec2,
}

/// Built-in analytic reference signals. The figure-eight used throughout the
/// examples is y(t) = (2 cos(2 pi t / T), sin(pi t / T)).
#[derive(Debug, Clone)]
pub enum ReferenceSignal {
    Lissajous { period: f64, horizon: f64 },
    Polynomial { c1: Vec<f64>, c2: Vec<f64>, horizon: f64 },
}

impl ReferenceSignal {
    pub fn lissajous(horizon: f64) -> Self {
        assert!(horizon > 0.0, "horizon must be positive");
        ReferenceSignal::Lissajous { period: horizon, horizon }
    }

    pub fn polynomial(c1: Vec<f64>, c2: Vec<f64>, horizon: f64) -> Self {
        assert!(horizon > 0.0, "horizon must be positive");
        ReferenceSignal::Polynomial { c1, c2, horizon }
    }

    /// A constant point target.
    pub fn constant(y: Vec2, horizon: f64) -> Self {
        Self::polynomial(vec![y[0]], vec![y[1]], horizon)
    }

    pub fn horizon(&self) -> f64 {
        match self {
            ReferenceSignal::Lissajous { horizon, .. } => *horizon,
            ReferenceSignal::Polynomial { horizon, .. } => *horizon,
        }
    }

    pub fn eval(&self, t: f64) -> RefPoint {
        match self {
            ReferenceSignal::Lissajous { period, .. } => {
                let w1 = 2.0 * std::f64::consts::PI / period;
                let w2 = std::f64::consts::PI / period;
                RefPoint {
                    y: Vec2::new(2.0 * (w1 * t).cos(), (w2 * t).sin()),
                    ydot: Vec2::new(-2.0 * w1 * (w1 * t).sin(), w2 * (w2 * t).cos()),
                    yddot: Vec2::new(-2.0 * w1 * w1 * (w1 * t).cos(), -w2 * w2 * (w2 * t).sin()),
                }
            }
            ReferenceSignal::Polynomial { c1, c2, .. } => RefPoint {
                y: Vec2::new(horner(c1, t, 0), horner(c2, t, 0)),
                ydot: Vec2::new(horner(c1, t, 1), horner(c2, t, 1)),
                yddot: Vec2::new(horner(c1, t, 2), horner(c2, t, 2)),
            },
        }
    }
}

/// Evaluate the `order`-th derivative of a polynomial with ascending-power
/// coefficients at t.
fn horner(coeffs: &[f64], t: f64, order: usize) -> f64 {
    let mut acc = 0.0;
    for (k, &c) in coeffs.iter().enumerate().skip(order).rev() {
        // falling factorial k (k-1) ... (k-order+1)
        let mut fac = 1.0;
        for j in 0..order {
            fac *= (k - j) as f64;
        }
        acc = acc * t + c * fac;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lissajous_anchor_points() {
        let r = ReferenceSignal::lissajous(5.0);
        let p0 = r.eval(0.0);
        assert_relative_eq!(p0.y[0], 2.0, epsilon = 1e-15);
        assert_relative_eq!(p0.y[1], 0.0, epsilon = 1e-15);
        assert_relative_eq!(p0.ydot[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(p0.ydot[1], std::f64::consts::PI / 5.0, epsilon = 1e-15);
        let mid = r.eval(2.5);
        assert_relative_eq!(mid.y[0], -2.0, epsilon = 1e-12);
        assert_relative_eq!(mid.y[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn polynomial_derivatives() {
        let constant = ReferenceSignal::polynomial(vec![3.0], vec![3.0], 1.0);
        let p = constant.eval(0.4);
        assert_eq!(p.ydot, Vec2::zeros());
        assert_eq!(p.yddot, Vec2::zeros());

        let linear = ReferenceSignal::polynomial(vec![0.0, 1.0], vec![0.0, 2.0], 1.0);
        let p = linear.eval(0.7);
        assert_relative_eq!(p.ydot[0], 1.0);
        assert_relative_eq!(p.ydot[1], 2.0);
        assert_eq!(p.yddot, Vec2::zeros());

        let quad = ReferenceSignal::polynomial(vec![0.0, 0.0, 1.0], vec![0.0], 1.0);
        let p = quad.eval(0.3);
        assert_relative_eq!(p.y[0], 0.09, epsilon = 1e-15);
        assert_relative_eq!(p.ydot[0], 0.6, epsilon = 1e-15);
        assert_relative_eq!(p.yddot[0], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let signals = [
            ReferenceSignal::lissajous(5.0),
            ReferenceSignal::polynomial(vec![1.0, -0.5, 0.25, 0.1], vec![0.0, 2.0, -1.0], 3.0),
        ];
        for sig in &signals {
            let horizon = sig.horizon();
            let h = 1e-5;
            for k in 1..20 {
                let t = horizon * k as f64 / 20.0;
                let plus = sig.eval(t + h);
                let minus = sig.eval(t - h);
                let here = sig.eval(t);
                let fd_dot = (plus.y - minus.y) / (2.0 * h);
                let fd_ddot = (plus.ydot - minus.ydot) / (2.0 * h);
                for i in 0..2 {
                    let scale = here.ydot[i].abs().max(1.0);
                    assert!((fd_dot[i] - here.ydot[i]).abs() / scale <= 1e-4);
                    let scale = here.yddot[i].abs().max(1.0);
                    assert!((fd_ddot[i] - here.yddot[i]).abs() / scale <= 1e-4);
                }
            }
        }
    }
}
