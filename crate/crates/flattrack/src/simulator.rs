//! Fixed-step closed-loop integration with zero-order hold, cost
//! accumulation, and structured logging.

use crate::controller::{
    control_step, ControlDecision, ControllerContext, Mode1, Mode2, Tuning,
};
use crate::error::{ControlError, SimulationError};
use crate::geometry::{Vec2, Vec3};
use crate::reference::ReferenceSignal;
use crate::systems::{vector_field_rhs, FlatSystemDescriptor, InputBounds};
use crate::weights::WeightSet;

pub const MAX_STEPS: f64 = 1e7;

/// Classical RK4 step of the driftless dynamics with the input held constant.
pub fn rk4_step(
    system: &FlatSystemDescriptor,
    u: &Vec2,
    x: &Vec3,
    dt: f64,
) -> Result<Vec3, ControlError> {
    let k1 = vector_field_rhs(system, x, u)?;
    let k2 = vector_field_rhs(system, &(x + k1 * (dt / 2.0)), u)?;
    let k3 = vector_field_rhs(system, &(x + k2 * (dt / 2.0)), u)?;
    let k4 = vector_field_rhs(system, &(x + k3 * dt), u)?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RowFlags {
    pub u1_fallback: bool,
    pub capture: bool,
    pub stability_warning: bool,
    pub lyapunov_undefined: bool,
}

/// One logged sample of the closed loop.
#[derive(Debug, Clone)]
pub struct LogRow {
    pub t: f64,
    pub x: Vec3,
    pub u: Vec2,
    pub mode1: Mode1,
    pub mode2: Mode2,
    pub e: Vec2,
    pub edot: Vec2,
    pub norm_e: f64,
    pub xi2_dot: f64,
    pub v: f64,
    /// NaN when the terms are undefined at this sample.
    pub f2: f64,
    pub h2: f64,
    pub xi1_residual: f64,
    pub xi2: f64,
    pub lambda: Vec3,
    /// Running cost integral up to this sample (terminal term excluded).
    pub running_cost: f64,
    pub flags: RowFlags,
}

#[derive(Debug, Clone)]
pub struct SimulationLog {
    pub rows: Vec<LogRow>,
    pub dt: f64,
    /// Terminal cost 0.5 e(T)' Qbar e(T).
    pub terminal_cost: f64,
    /// Running integral plus terminal cost.
    pub total_cost: f64,
}

impl SimulationLog {
    pub fn final_error_norm(&self) -> f64 {
        self.rows.last().map(|r| r.norm_e).unwrap_or(f64::NAN)
    }

    /// (t, from, to) for each change of the u2 mode label.
    pub fn mode2_transitions(&self) -> Vec<(f64, Mode2, Mode2)> {
        let mut out = Vec::new();
        for pair in self.rows.windows(2) {
            if pair[0].mode2 != pair[1].mode2 {
                out.push((pair[1].t, pair[0].mode2, pair[1].mode2));
            }
        }
        out
    }

    /// Maximal index ranges sharing one u2 mode label.
    pub fn mode2_segments(&self) -> Vec<(Mode2, std::ops::Range<usize>)> {
        let mut out: Vec<(Mode2, std::ops::Range<usize>)> = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            match out.last_mut() {
                Some((mode, range)) if *mode == row.mode2 => range.end = i + 1,
                _ => out.push((row.mode2, i..i + 1)),
            }
        }
        out
    }

    /// Maximal index ranges where both inputs are interior-singular.
    pub fn doubly_interior_segments(&self) -> Vec<std::ops::Range<usize>> {
        let mut out: Vec<std::ops::Range<usize>> = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            let hit = row.mode1 == Mode1::SingularInterior && row.mode2 == Mode2::SingularInterior;
            match out.last_mut() {
                Some(range) if hit && range.end == i => range.end = i + 1,
                _ if hit => out.push(i..i + 1),
                _ => {}
            }
        }
        out
    }
}

/// Running-cost integrand 0.5 (e' Q e + edot' M edot).
pub fn running_cost_density(e: &Vec2, edot: &Vec2, weights: &WeightSet) -> f64 {
    0.5 * ((weights.q() * e).dot(e) + (weights.m() * edot).dot(edot))
}

/// Trapezoidal running cost plus the terminal term, recomputed from logged
/// error data.
pub fn accumulate_cost(rows: &[LogRow], weights: &WeightSet, dt: f64) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let mut running = 0.0;
    let mut prev = running_cost_density(&rows[0].e, &rows[0].edot, weights);
    for row in &rows[1..] {
        let here = running_cost_density(&row.e, &row.edot, weights);
        running += dt / 2.0 * (prev + here);
        prev = here;
    }
    let last = rows.last().unwrap();
    running + 0.5 * (weights.qbar() * last.e).dot(&last.e)
}

pub struct SimulationConfig<'a> {
    pub system: &'a FlatSystemDescriptor,
    pub weights: &'a WeightSet,
    pub bounds: &'a InputBounds,
    pub reference: &'a ReferenceSignal,
    pub x0: Vec3,
    pub dt: f64,
    pub horizon: f64,
    pub tuning: Tuning,
}

impl SimulationConfig<'_> {
    pub fn validate(&self) -> Result<usize, SimulationError> {
        if !(self.dt > 0.0) {
            return Err(SimulationError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon > 0.0) {
            return Err(SimulationError::InvalidConfig(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.dt > self.horizon {
            return Err(SimulationError::InvalidConfig(format!(
                "dt = {} exceeds horizon = {}",
                self.dt, self.horizon
            )));
        }
        let steps = (self.horizon / self.dt + 1e-9).floor();
        if steps > MAX_STEPS {
            return Err(SimulationError::InvalidConfig(format!(
                "horizon/dt = {steps} exceeds the {MAX_STEPS} step budget"
            )));
        }
        Ok(steps as usize)
    }
}

fn row_from_decision(t: f64, x: &Vec3, d: &ControlDecision, running_cost: f64) -> LogRow {
    let (f2, h2, undefined) = match &d.diagnostics.lyapunov {
        Some(l) => (l.f2, l.h2.unwrap_or(f64::NAN), false),
        None => (f64::NAN, f64::NAN, true),
    };
    LogRow {
        t,
        x: *x,
        u: d.u,
        mode1: d.mode1,
        mode2: d.mode2,
        e: d.tracking.e,
        edot: d.tracking.edot,
        norm_e: d.tracking.e.norm(),
        xi2_dot: d.diagnostics.xi2_dot,
        v: d.diagnostics.v,
        f2,
        h2,
        xi1_residual: d.diagnostics.xi1_residual,
        xi2: d.diagnostics.xi2,
        lambda: d.diagnostics.lambda,
        running_cost,
        flags: RowFlags {
            u1_fallback: d.flags.u1_fallback,
            capture: d.flags.capture,
            stability_warning: d.diagnostics.stability_warning,
            lyapunov_undefined: undefined,
        },
    }
}

/// Run the closed loop on a fixed grid: control_step, log, integrate.
pub fn simulate(config: &SimulationConfig) -> Result<SimulationLog, SimulationError> {
    let n = config.validate()?;
    let mut ctx = ControllerContext::new();
    let mut x = config.x0;
    let mut rows = Vec::with_capacity(n + 1);
    let mut running = 0.0;
    let mut prev_density = 0.0;

    for k in 0..=n {
        let t = k as f64 * config.dt;
        let decision = control_step(
            config.system,
            config.weights,
            config.bounds,
            config.reference,
            &x,
            t,
            &config.tuning,
            &mut ctx,
        )
        .map_err(|source| SimulationError::Controller { t, source })?;

        let density = running_cost_density(&decision.tracking.e, &decision.tracking.edot, config.weights);
        if k > 0 {
            running += config.dt / 2.0 * (prev_density + density);
        }
        prev_density = density;
        rows.push(row_from_decision(t, &x, &decision, running));

        if k < n {
            x = rk4_step(config.system, &decision.u, &x, config.dt)
                .map_err(|_| SimulationError::OutOfDomain { t })?;
        }
    }

    let last = rows.last().expect("at least one row");
    let terminal_cost = 0.5 * (config.weights.qbar() * last.e).dot(&last.e);
    let total_cost = running + terminal_cost;
    Ok(SimulationLog { rows, dt: config.dt, terminal_cost, total_cost })
}
