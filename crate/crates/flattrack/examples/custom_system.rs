//! Define a user system through the descriptor contract and track a straight
//! line with it. The fields here are given by evaluation only; Jacobians come
//! from finite differences.
//!
//! Run with: cargo run --release --example custom_system

use flattrack::controller::Tuning;
use flattrack::geometry::{flatness_check, FlatOutputMap, Mat2x3, Mat3, SmoothVectorField, Vec2, Vec3};
use flattrack::simulator::{simulate, SimulationConfig};
use flattrack::systems::{Domain, FlatSystemDescriptor};
use flattrack::weights::{Mat2, WeightSet};
use flattrack::{InputBounds, ReferenceSignal};

fn main() {
    // A scaled axle: the drive field has speed gain 2 along the heading.
    let g1 = SmoothVectorField::from_eval(|x| Vec3::new(2.0 * x[2].sin(), 2.0 * x[2].cos(), 0.0));
    let g2 = SmoothVectorField::from_eval(|_| Vec3::new(0.0, 0.0, 1.0));
    let phi = FlatOutputMap::new(
        |x| Vec2::new(x[0], x[1]),
        |_| Mat2x3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0),
        |_| [Mat3::zeros(), Mat3::zeros()],
    );
    let sys = FlatSystemDescriptor {
        name: "scaled_axle".to_string(),
        g1,
        g2,
        phi,
        domain: Domain::All,
    };

    let samples: Vec<Vec3> = (0..20)
        .map(|k| Vec3::new(0.1 * k as f64, -0.05 * k as f64, 0.3 * k as f64))
        .collect();
    let report = flatness_check(&sys.g1, &sys.g2, &sys.phi, &samples);
    println!("flatness check: pass = {}", report.pass);

    let w = WeightSet::from_q_m(Mat2::from_diagonal_element(100.0), Mat2::identity()).unwrap();
    let bounds = InputBounds::symmetric(10.0);
    let reference = ReferenceSignal::polynomial(vec![0.0, 1.0], vec![0.0, 0.5], 3.0);
    let config = SimulationConfig {
        system: &sys,
        weights: &w,
        bounds: &bounds,
        reference: &reference,
        x0: Vec3::new(0.5, -0.5, 0.0),
        dt: 1e-3,
        horizon: 3.0,
        tuning: Tuning::for_bounds(&bounds, 1e-3),
    };
    let log = simulate(&config).unwrap();
    println!("|e(0)| = {:.3}, |e(T)| = {:.3e}", log.rows[0].norm_e, log.final_error_norm());
    println!("cost J = {:.4}", log.total_cost);
    for (t, from, to) in log.mode2_transitions() {
        println!("  t = {:.3}: {} -> {}", t, from.as_str(), to.as_str());
    }
}
