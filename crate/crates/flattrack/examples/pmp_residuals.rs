//! Reconstruct the costate along a tracking run and evaluate the first-order
//! optimality residuals segment by segment.
//!
//! Run with: cargo run --release --example pmp_residuals

use flattrack::cli::{builtin_scenario, resolve, run_resolved};
use flattrack::oracle::pmp_residuals;

fn main() {
    let resolved = resolve(builtin_scenario("fig1_ic1").unwrap()).unwrap();
    let log = run_resolved(&resolved).unwrap();
    let report = pmp_residuals(&log, &resolved.system, &resolved.weights, &resolved.reference)
        .expect("enough samples per segment");

    println!("terminal-condition residual: {:.3e}", report.terminal);
    println!("max |xi2| anywhere:          {:.3e}", report.max_xi2);
    println!("segments:");
    for s in &report.segments {
        println!(
            "  {:?} [{:.3}, {:.3}] ({} samples)",
            s.kind, s.t0, s.t1, s.samples
        );
        println!(
            "    costate-ODE residual {:.3e}   |xi1| {:.3e}   |xi2dot| in [{:.1e}, {:.1e}]",
            s.costate_ode, s.xi1, s.xi2dot_min_abs, s.xi2dot_max
        );
    }
    println!(
        "\nNote: the singular-segment residual floor is the zero-order-hold\n\
         stationarity drift (about 5 max|du1/dt| dt), not integrator error."
    );
}
