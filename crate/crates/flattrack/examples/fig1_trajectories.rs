//! All three figure-eight initial conditions in parallel: mode structure,
//! costs, and the bang -> singular transition times.
//!
//! Run with: cargo run --release --example fig1_trajectories

use flattrack::cli::{builtin_scenario, resolve, run_resolved};
use rayon::prelude::*;

fn main() {
    let names = ["fig1_ic1", "fig1_ic2", "fig1_ic3"];
    let results: Vec<_> = names
        .par_iter()
        .map(|name| {
            let resolved = resolve(builtin_scenario(name).unwrap()).unwrap();
            let log = run_resolved(&resolved).unwrap();
            (*name, log)
        })
        .collect();

    for (name, log) in &results {
        let transitions = log.mode2_transitions();
        let singular_entry = transitions.first().map(|(t, _, _)| *t).unwrap_or(f64::NAN);
        println!("{name}:");
        println!("  x0 -> bang for {singular_entry:.3} s, then singular to T");
        println!("  total cost J = {:.4}", log.total_cost);
        println!("  final |e| = {:.3e}", log.final_error_norm());
        let warnings = log.rows.iter().filter(|r| r.flags.stability_warning).count();
        println!("  stability warnings: {warnings}");
    }
}
