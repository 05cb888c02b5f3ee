//! Flatness validity checks: the input-normalization condition, the 2x2
//! nondegeneracy determinant, and the frame span, over random state samples.
//!
//! Run with: cargo run --example flatness_report

use flattrack::geometry::{flatness_check, FlatOutputMap, Mat2x3, Mat3, SmoothVectorField, Vec2, Vec3};
use flattrack::systems::{chained_form, steerable_axle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let samples: Vec<Vec3> = (0..100)
        .map(|_| {
            Vec3::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            )
        })
        .collect();

    for sys in [steerable_axle(), chained_form()] {
        let report = flatness_check(&sys.g1, &sys.g2, &sys.phi, &samples);
        let min_det = report
            .samples
            .iter()
            .map(|s| s.nondegeneracy_det.abs())
            .fold(f64::INFINITY, f64::min);
        let max_lg2 = report
            .samples
            .iter()
            .map(|s| s.lg2_phi[0].max(s.lg2_phi[1]))
            .fold(0.0, f64::max);
        println!(
            "{:<16} pass = {:<5} min |det| = {:.3e}  max |L_g2 phi| = {:.1e}",
            sys.name, report.pass, min_det, max_lg2
        );
    }

    // a deliberately broken triple: g2 enters the output derivative
    let g1 = SmoothVectorField::analytic(|_| Vec3::new(0.0, 1.0, 0.0), |_| Mat3::zeros());
    let g2 = SmoothVectorField::analytic(|_| Vec3::new(1.0, 0.0, 0.0), |_| Mat3::zeros());
    let phi = FlatOutputMap::new(
        |x| Vec2::new(x[0], x[1]),
        |_| Mat2x3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0),
        |_| [Mat3::zeros(), Mat3::zeros()],
    );
    let report = flatness_check(&g1, &g2, &phi, &samples);
    println!(
        "{:<16} pass = {:<5} (violates the input-normalization condition, as expected)",
        "broken_triple", report.pass
    );
}
