//! Independent verification machinery: finite-difference derivative checks,
//! PMP residuals along simulated trajectories, and a coarse direct
//! transcription of the optimal control problem solved by projected
//! gradient descent.
//!
//! The transcription deliberately avoids the analytic costate: gradients are
//! plain finite differences of forward simulations, so agreement with the
//! closed-form law is evidence, not circularity.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controller::Mode2;
use crate::error::{ControlError, OracleError};
use crate::geometry::{Vec2, Vec3};
use crate::reference::ReferenceSignal;
use crate::simulator::{rk4_step, running_cost_density, SimulationLog};
use crate::systems::{field_jacobians, grad_lg1_phi, FlatSystemDescriptor, InputBounds};
use crate::weights::WeightSet;

/// Central-difference Jacobian check. Returns the max entrywise error with
/// denominator max(1, |entry|).
pub fn finite_difference_check(
    map: &dyn Fn(&Vec3) -> Vec<f64>,
    point: &Vec3,
    analytic_jacobian: &DMatrix<f64>,
) -> f64 {
    let rows = analytic_jacobian.nrows();
    let mut worst: f64 = 0.0;
    for col in 0..3 {
        let h = point[col].abs().max(1.0) * crate::geometry::FD_STEP_SCALE;
        let mut xp = *point;
        let mut xm = *point;
        xp[col] += h;
        xm[col] -= h;
        let fp = map(&xp);
        let fm = map(&xm);
        assert_eq!(fp.len(), rows, "map output size mismatch");
        for r in 0..rows {
            let fd = (fp[r] - fm[r]) / (2.0 * h);
            let reference = analytic_jacobian[(r, col)];
            let err = (fd - reference).abs() / reference.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Bang,
    Singular,
}

/// Residual maxima over one maximal mode segment.
#[derive(Debug, Clone)]
pub struct SegmentResidual {
    pub kind: SegmentKind,
    pub t0: f64,
    pub t1: f64,
    pub samples: usize,
    /// max-norm of d(lambda)/dt minus the costate ODE right side, over
    /// interior samples.
    pub costate_ode: f64,
    /// max |xi1| over samples with interior u1.
    pub xi1: f64,
    pub xi2: f64,
    pub xi2dot_max: f64,
    pub xi2dot_min_abs: f64,
    /// max |xi2ddot| by central differences (singular segments).
    pub xi2ddot: f64,
    /// Bang samples should have sign(u2) = sign(xi2dot); count of
    /// exceptions over unflagged samples.
    pub sign_mismatches: usize,
}

#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub segments: Vec<SegmentResidual>,
    /// Terminal-condition residual at t = T (zero by construction).
    pub terminal: f64,
    pub max_singular_costate_ode: f64,
    pub max_singular_xi1: f64,
    pub max_xi2: f64,
}

pub const MIN_SEGMENT_SAMPLES: usize = 10;

/// Reconstruct the costate along the log, differentiate it in time and
/// compare against the costate ODE; also collect the stationarity residuals
/// per segment.
///
/// The difference quotient is centered on each hold interval and compared
/// with the ODE right side averaged over the interval endpoints using the
/// input actually held there. Centering on the nodes instead would measure
/// the zero-order-hold sampling bias (about 5 |du1/dt| dt) rather than the
/// costate equation.
pub fn pmp_residuals(
    log: &SimulationLog,
    system: &FlatSystemDescriptor,
    weights: &WeightSet,
    reference: &ReferenceSignal,
) -> Result<ResidualReport, OracleError> {
    if log.rows.len() < 3 {
        return Err(OracleError::EmptyLog);
    }
    let rows = &log.rows;
    let dt = log.dt;

    // maximal segments by bang/singular family
    let mut segments: Vec<(SegmentKind, std::ops::Range<usize>)> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let kind = if row.mode2 == Mode2::BangOffManifold { SegmentKind::Bang } else { SegmentKind::Singular };
        match segments.last_mut() {
            Some((k, range)) if *k == kind && range.end == i => range.end = i + 1,
            _ => segments.push((kind, i..i + 1)),
        }
    }

    let mut out = Vec::new();
    for (kind, range) in &segments {
        let len = range.len();
        if len < MIN_SEGMENT_SAMPLES {
            return Err(OracleError::GridTooCoarse {
                t0: rows[range.start].t,
                len,
                min: MIN_SEGMENT_SAMPLES,
            });
        }
        let mut costate_ode: f64 = 0.0;
        let mut xi1: f64 = 0.0;
        let mut xi2: f64 = 0.0;
        let mut xi2dot_max: f64 = 0.0;
        let mut xi2dot_min_abs = f64::INFINITY;
        let mut xi2ddot: f64 = 0.0;
        let mut sign_mismatches = 0usize;

        for i in range.clone() {
            let row = &rows[i];
            xi2 = xi2.max(row.xi2.abs());
            xi2dot_max = xi2dot_max.max(row.xi2_dot.abs());
            xi2dot_min_abs = xi2dot_min_abs.min(row.xi2_dot.abs());
            if row.mode1 == crate::controller::Mode1::SingularInterior {
                xi1 = xi1.max(row.xi1_residual.abs());
            }
            if *kind == SegmentKind::Bang && !row.flags.capture && row.u[1] * row.xi2_dot < 0.0 {
                sign_mismatches += 1;
            }

            // differences centered on the hold interval [t_i, t_{i+1}]
            if i + 1 < range.end {
                let next = &rows[i + 1];
                let lam_dot = (next.lambda - row.lambda) / dt;
                let rhs_left = costate_ode_rhs(system, weights, row, &row.u);
                let rhs_right = held_input_rhs(system, weights, reference, next, &row.u);
                let rhs = (rhs_left + rhs_right) / 2.0;
                costate_ode = costate_ode.max((lam_dot - rhs).amax());
            }
            if *kind == SegmentKind::Singular && i > range.start && i + 1 < range.end {
                let num = (rows[i + 1].xi2_dot - rows[i - 1].xi2_dot) / (2.0 * dt);
                xi2ddot = xi2ddot.max(num.abs());
            }
        }

        out.push(SegmentResidual {
            kind: *kind,
            t0: rows[range.start].t,
            t1: rows[range.end - 1].t,
            samples: len,
            costate_ode,
            xi1,
            xi2,
            xi2dot_max,
            xi2dot_min_abs,
            xi2ddot,
            sign_mismatches,
        });
    }

    // Terminal condition: the logged costate versus the terminal-cost
    // gradient, both evaluated at the final sample.
    let last = rows.last().unwrap();
    let dphi = system.phi.jacobian(&last.x);
    let expected = -(dphi.transpose() * (weights.qbar() * last.e));
    let terminal = (last.lambda - expected).amax();

    let max_singular_costate_ode = out
        .iter()
        .filter(|s| s.kind == SegmentKind::Singular)
        .map(|s| s.costate_ode)
        .fold(0.0, f64::max);
    let max_singular_xi1 = out
        .iter()
        .filter(|s| s.kind == SegmentKind::Singular)
        .map(|s| s.xi1)
        .fold(0.0, f64::max);
    let max_xi2 = out.iter().map(|s| s.xi2).fold(0.0, f64::max);

    Ok(ResidualReport {
        segments: out,
        terminal,
        max_singular_costate_ode,
        max_singular_xi1,
        max_xi2,
    })
}

/// Right side of the costate ODE at a logged sample with a given input.
fn costate_ode_rhs(
    system: &FlatSystemDescriptor,
    weights: &WeightSet,
    row: &crate::simulator::LogRow,
    u: &Vec2,
) -> Vec3 {
    costate_rhs_parts(system, weights, &row.x, &row.e, &row.edot, &row.lambda, u)
}

/// Same right side at the interval's right endpoint, with the error rate
/// rebuilt from the input held over that interval.
fn held_input_rhs(
    system: &FlatSystemDescriptor,
    weights: &WeightSet,
    reference: &ReferenceSignal,
    row: &crate::simulator::LogRow,
    held_u: &Vec2,
) -> Vec3 {
    let rp = reference.eval(row.t);
    let dphi = system.phi.jacobian(&row.x);
    let edot = rp.ydot - (dphi * system.g1.eval(&row.x)) * held_u[0];
    costate_rhs_parts(system, weights, &row.x, &row.e, &edot, &row.lambda, held_u)
}

fn costate_rhs_parts(
    system: &FlatSystemDescriptor,
    weights: &WeightSet,
    x: &Vec3,
    e: &Vec2,
    edot: &Vec2,
    lambda: &Vec3,
    u: &Vec2,
) -> Vec3 {
    let dphi = system.phi.jacobian(x);
    let qe = weights.q() * e;
    let me = weights.m() * edot;
    let grads = grad_lg1_phi(system, x);
    let [jg1, jg2] = field_jacobians(system, x);
    let mut rhs = dphi.transpose() * qe;
    rhs += (grads[0] * me[0] + grads[1] * me[1]) * u[0];
    rhs -= (jg1.transpose() * lambda) * u[0];
    rhs -= (jg2.transpose() * lambda) * u[1];
    rhs
}

/// Discretized optimal control problem on a uniform grid with zero-order
/// hold controls.
#[derive(Debug, Clone)]
pub struct TranscribedOcp {
    pub n: usize,
    pub dt: f64,
    pub u: Vec<Vec2>,
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
    pub cost_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct TranscriptionOptions {
    pub max_iterations: usize,
    /// Stop when the relative cost decrease falls below this.
    pub tol: f64,
    pub fd_step: f64,
    pub armijo_c1: f64,
    pub initial_step: f64,
}

impl Default for TranscriptionOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            tol: 1e-8,
            fd_step: 1e-6,
            armijo_c1: 1e-4,
            initial_step: 1e-3,
        }
    }
}

/// Open-loop cost of a control grid: RK4 states, trapezoidal running cost
/// with each node using its own interval's control, terminal term at the
/// last node.
pub fn discrete_cost(
    system: &FlatSystemDescriptor,
    weights: &WeightSet,
    reference: &ReferenceSignal,
    x0: &Vec3,
    dt: f64,
    u: &[Vec2],
) -> Result<f64, ControlError> {
    let n = u.len();
    let mut x = *x0;
    let mut total = 0.0;
    for k in 0..=n {
        let uk = u[k.min(n - 1)];
        let t = k as f64 * dt;
        let rp = reference.eval(t);
        let phi = system.phi.eval(&x);
        let dphi = system.phi.jacobian(&x);
        let e = rp.y - phi;
        let edot = rp.ydot - (dphi * system.g1.eval(&x)) * uk[0];
        let density = running_cost_density(&e, &edot, weights);
        let w = if k == 0 || k == n { dt / 2.0 } else { dt };
        total += w * density;
        if k == n {
            total += 0.5 * (weights.qbar() * e).dot(&e);
        } else {
            x = rk4_step(system, &uk, &x, dt)?;
        }
    }
    Ok(total)
}

struct CostEvaluator<'a> {
    system: &'a FlatSystemDescriptor,
    weights: &'a WeightSet,
    reference: &'a ReferenceSignal,
    x0: Vec3,
    dt: f64,
    n: usize,
}

impl CostEvaluator<'_> {
    fn density(&self, x: &Vec3, t: f64, u1: f64) -> f64 {
        let rp = self.reference.eval(t);
        let phi = self.system.phi.eval(x);
        let dphi = self.system.phi.jacobian(x);
        let e = rp.y - phi;
        let edot = rp.ydot - (dphi * self.system.g1.eval(x)) * u1;
        running_cost_density(&e, &edot, self.weights)
    }

    fn terminal(&self, x: &Vec3, t: f64) -> f64 {
        let rp = self.reference.eval(t);
        let e = rp.y - self.system.phi.eval(x);
        0.5 * (self.weights.qbar() * e).dot(&e)
    }

    fn node_weight(&self, k: usize) -> f64 {
        if k == 0 || k == self.n {
            self.dt / 2.0
        } else {
            self.dt
        }
    }

    /// States and per-node weighted densities for the full grid.
    fn rollout(&self, u: &[Vec2]) -> Result<(Vec<Vec3>, Vec<f64>, f64), ControlError> {
        let mut states = Vec::with_capacity(self.n + 1);
        let mut weighted = Vec::with_capacity(self.n + 1);
        let mut x = self.x0;
        for k in 0..=self.n {
            states.push(x);
            let uk = u[k.min(self.n - 1)];
            weighted.push(self.node_weight(k) * self.density(&x, k as f64 * self.dt, uk[0]));
            if k < self.n {
                x = rk4_step(self.system, &uk, &x, self.dt)?;
            }
        }
        let cost: f64 =
            weighted.iter().sum::<f64>() + self.terminal(&states[self.n], self.n as f64 * self.dt);
        Ok((states, weighted, cost))
    }

    /// Cost of nodes k.. with the given controls, starting from a stored
    /// nominal state. Only the tail is re-simulated.
    fn tail_cost(&self, states: &[Vec3], k: usize, u: &[Vec2]) -> Result<f64, ControlError> {
        let mut x = states[k];
        let mut total = 0.0;
        for j in k..=self.n {
            let uj = u[j.min(self.n - 1)];
            total += self.node_weight(j) * self.density(&x, j as f64 * self.dt, uj[0]);
            if j < self.n {
                x = rk4_step(self.system, &uj, &x, self.dt)?;
            }
        }
        Ok(total + self.terminal(&x, self.n as f64 * self.dt))
    }
}

/// Minimize the discretized tracking cost by projected gradient descent
/// with forward-difference gradients and Armijo backtracking.
#[allow(clippy::too_many_arguments)]
pub fn transcribe_and_solve(
    system: &FlatSystemDescriptor,
    weights: &WeightSet,
    bounds: &InputBounds,
    reference: &ReferenceSignal,
    x0: &Vec3,
    horizon: f64,
    n: usize,
    seed_control: Option<&[Vec2]>,
    options: &TranscriptionOptions,
) -> Result<TranscribedOcp, ControlError> {
    assert!(n >= 2 && n <= 2000, "grid size out of the supported range");
    let dt = horizon / n as f64;
    let eval = CostEvaluator { system, weights, reference, x0: *x0, dt, n };

    let project = |u: &mut Vec<Vec2>| {
        for v in u.iter_mut() {
            v[0] = v[0].clamp(-bounds.u1_max, bounds.u1_max);
            v[1] = v[1].clamp(-bounds.u2_max, bounds.u2_max);
        }
    };

    let mut u: Vec<Vec2> = match seed_control {
        Some(seed) => {
            assert_eq!(seed.len(), n, "seed control grid size mismatch");
            seed.to_vec()
        }
        None => vec![Vec2::zeros(); n],
    };
    project(&mut u);

    let (mut states, mut weighted, mut cost) = eval.rollout(&u)?;
    let mut history = vec![cost];
    let mut step = options.initial_step;
    let mut converged = false;
    let mut iterations = 0;

    let mut scratch = u.clone();
    for iter in 0..options.max_iterations {
        iterations = iter + 1;

        // forward-difference gradient, re-simulating only the affected tail
        let prefix: Vec<f64> = {
            let mut acc = 0.0;
            let mut out = Vec::with_capacity(n + 1);
            out.push(0.0);
            for w in &weighted {
                acc += w;
                out.push(acc);
            }
            out
        };
        let mut grad = vec![Vec2::zeros(); n];
        for k in 0..n {
            for ch in 0..2 {
                let h = options.fd_step * u[k][ch].abs().max(1.0);
                scratch.copy_from_slice(&u);
                scratch[k][ch] += h;
                let tail = eval.tail_cost(&states, k, &scratch)?;
                let perturbed = prefix[k] + tail;
                grad[k][ch] = (perturbed - cost) / h;
            }
        }

        // Armijo backtracking on the projected step
        let mut accepted = false;
        let mut trial_step = step;
        for _ in 0..60 {
            let mut candidate: Vec<Vec2> =
                u.iter().zip(&grad).map(|(ui, gi)| ui - gi * trial_step).collect();
            project(&mut candidate);
            let direction: f64 = candidate
                .iter()
                .zip(&u)
                .zip(&grad)
                .map(|((c, ui), gi)| gi.dot(&(ui - c)))
                .sum();
            if direction <= 0.0 {
                break; // projected step is not a descent direction
            }
            let (c_states, c_weighted, c_cost) = eval.rollout(&candidate)?;
            if c_cost <= cost - options.armijo_c1 * direction {
                let decrease = (cost - c_cost) / cost.abs().max(1.0);
                u = candidate;
                states = c_states;
                weighted = c_weighted;
                cost = c_cost;
                history.push(cost);
                accepted = true;
                if decrease < options.tol {
                    converged = true;
                }
                break;
            }
            trial_step /= 2.0;
        }

        if !accepted {
            converged = true; // stationary at line-search resolution
            break;
        }
        step = (trial_step * 1.5).min(1.0);
        if converged {
            break;
        }
    }

    Ok(TranscribedOcp { n, dt, u, cost, converged, iterations, cost_history: history })
}

/// Outcome of the local-minimality probe.
#[derive(Debug, Clone)]
pub struct PerturbationReport {
    pub trials: usize,
    pub baseline_cost: f64,
    /// Trials whose cost fell below baseline - slack (1 + baseline).
    pub violations: usize,
    /// Most negative cost change observed (perturbed minus baseline).
    pub worst_delta: f64,
}

pub const PERTURBATION_SLACK: f64 = 1e-6;

/// Extract the applied control grid from a closed-loop log (one control per
/// interval; the final sample's control is never applied).
pub fn control_grid(log: &SimulationLog) -> Vec<Vec2> {
    log.rows[..log.rows.len() - 1].iter().map(|r| r.u).collect()
}

/// Re-simulate random piecewise-constant control perturbations supported on
/// interior (unsaturated) arcs and compare costs. The support is the
/// singular-mode segment with the channel strictly inside its bound: on the
/// reaching segment the held input lags its fast-moving stationary value by
/// O(dt), which is a discretization artifact rather than a statement about
/// the law.
#[allow(clippy::too_many_arguments)]
pub fn perturbation_test(
    log: &SimulationLog,
    system: &FlatSystemDescriptor,
    weights: &WeightSet,
    bounds: &InputBounds,
    reference: &ReferenceSignal,
    n_trials: usize,
    magnitude: f64,
    seed: u64,
) -> Result<PerturbationReport, ControlError> {
    let base_u = control_grid(log);
    let n = base_u.len();
    let x0 = log.rows[0].x;
    let baseline = discrete_cost(system, weights, reference, &x0, log.dt, &base_u)?;

    // interior mask per channel, restricted to the singular arc
    let interior: Vec<[bool; 2]> = log.rows[..n]
        .iter()
        .map(|row| {
            let on_arc = row.mode2.is_singular_family();
            [
                on_arc && row.u[0].abs() < bounds.u1_max - 1e-9,
                on_arc && row.u[1].abs() < bounds.u2_max - 1e-9,
            ]
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    let max_window = (n / 10).max(1);
    for _ in 0..n_trials {
        let ch = rng.gen_range(0..2usize);
        let start = rng.gen_range(0..n);
        let len = rng.gen_range(1..=max_window);
        let delta = rng.gen_range(-magnitude..=magnitude);
        let mut u = base_u.clone();
        for k in start..(start + len).min(n) {
            if interior[k][ch] {
                u[k][ch] += delta;
            }
        }
        for v in u.iter_mut() {
            v[0] = v[0].clamp(-bounds.u1_max, bounds.u1_max);
            v[1] = v[1].clamp(-bounds.u2_max, bounds.u2_max);
        }
        let cost = discrete_cost(system, weights, reference, &x0, log.dt, &u)?;
        let diff = cost - baseline;
        worst = worst.min(diff);
        if cost < baseline - PERTURBATION_SLACK * (1.0 + baseline) {
            violations += 1;
        }
    }

    Ok(PerturbationReport { trials: n_trials, baseline_cost: baseline, violations, worst_delta: worst })
}

/// Bang/singular segmentation of a control grid by thresholding |u2|.
pub fn threshold_segmentation(u: &[Vec2], threshold: f64) -> Vec<(bool, std::ops::Range<usize>)> {
    let mut out: Vec<(bool, std::ops::Range<usize>)> = Vec::new();
    for (i, v) in u.iter().enumerate() {
        let bang = v[1].abs() >= threshold;
        match out.last_mut() {
            Some((b, range)) if *b == bang && range.end == i => range.end = i + 1,
            _ => out.push((bang, i..i + 1)),
        }
    }
    out
}
