//! Close the loop on the figure-eight reference from one initial condition
//! and export the trajectory for external plotting.
//!
//! Run with: cargo run --release --example track_figure_eight

use flattrack::cli::{builtin_scenario, resolve, run_resolved, summarize, trajectory_csv};

fn main() {
    let scenario = builtin_scenario("fig1_ic1").unwrap();
    let resolved = resolve(scenario).unwrap();
    let log = run_resolved(&resolved).unwrap();
    let summary = summarize(&resolved.scenario, &log);

    println!("rows: {}", summary.rows);
    println!("final |e| = {:.3e}", summary.final_error_norm);
    println!("running cost = {:.4}", summary.running_cost);
    println!("terminal cost = {:.4e}", summary.terminal_cost);
    println!("mode transitions:");
    for tr in &summary.mode2_transitions {
        println!("  t = {:.3}: {} -> {}", tr.t, tr.from, tr.to);
    }

    let out = std::env::temp_dir().join("flattrack_fig1_ic1.csv");
    std::fs::write(&out, trajectory_csv(&log)).unwrap();
    println!("trajectory written to {}", out.display());
}
