//! Drive the scenario layer programmatically: write a TOML scenario, run the
//! simulate and sweep commands against it, and read back the outputs.
//!
//! Run with: cargo run --release --example scenario_files

use flattrack::cli::{cmd_simulate, cmd_sweep, SweepParam};

const SCENARIO: &str = r#"
name = "line_tracking"
system = "steerable_axle"
dt = 0.001
horizon = 2.0
x0 = [0.3, -0.2, 0.5]

[weights]
q = [[100.0, 0.0], [0.0, 100.0]]
m = [[1.0, 0.0], [0.0, 1.0]]

[bounds]
u1_max = 10.0
u2_max = 10.0

[reference]
kind = "polynomial"
c1 = [0.0, 0.8]
c2 = [0.0, -0.4]
"#;

fn main() {
    let dir = std::env::temp_dir().join("flattrack_scenario_demo");
    std::fs::create_dir_all(&dir).unwrap();
    let scenario_path = dir.join("line_tracking.toml");
    std::fs::write(&scenario_path, SCENARIO).unwrap();

    let summary = cmd_simulate(scenario_path.to_str().unwrap(), Some(&dir)).unwrap();
    println!(
        "simulate: {} rows, final |e| = {:.3e}, J = {:.4}",
        summary.rows, summary.final_error_norm, summary.total_cost
    );
    println!("outputs in {}", dir.display());

    let rows = cmd_sweep(
        scenario_path.to_str().unwrap(),
        SweepParam::Dt,
        &["0.01".into(), "0.001".into(), "0.0001".into()],
        Some(&dir),
    )
    .unwrap();
    println!("\nsweep over dt:");
    for r in &rows {
        println!(
            "  dt = {:>7}: status = {}, final |e| = {:.3e}",
            r.value,
            r.status,
            r.final_error_norm.unwrap_or(f64::NAN)
        );
    }
}
