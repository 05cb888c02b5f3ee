//! Lie brackets and higher-bracket decompositions for the built-in systems,
//! computed both from analytic Jacobians and from finite differences.
//!
//! Run with: cargo run --example lie_brackets

use flattrack::geometry::{decompose_higher_brackets, lie_bracket, lie_derivative, Vec3};
use flattrack::systems::{chained_form, steerable_axle};

fn main() {
    for sys in [steerable_axle(), chained_form()] {
        println!("=== {} ===", sys.name);
        let x = Vec3::new(0.4, -0.8, 0.6);

        let grad1 = sys.phi.gradient(&x, 0);
        let grad2 = sys.phi.gradient(&x, 1);
        println!(
            "L_g1 phi = ({:+.4}, {:+.4})   L_g2 phi = ({:+.4}, {:+.4})",
            lie_derivative(&sys.g1, &grad1, &x),
            lie_derivative(&sys.g1, &grad2, &x),
            lie_derivative(&sys.g2, &grad1, &x),
            lie_derivative(&sys.g2, &grad2, &x),
        );

        let bracket = lie_bracket(&sys.g1, &sys.g2, &x);
        println!("[g1, g2]        = ({:+.4}, {:+.4}, {:+.4})", bracket[0], bracket[1], bracket[2]);

        let dec = decompose_higher_brackets(&sys.g1, &sys.g2, &x).expect("frame spans R^3");
        println!(
            "[g1,[g1,g2]]    = {:+.4} g1 {:+.4} g2 {:+.4} [g1,g2]",
            dec.alpha[0], dec.alpha[1], dec.alpha[2]
        );
        println!(
            "[g2,[g1,g2]]    = {:+.4} g1 {:+.4} g2 {:+.4} [g1,g2]   (residual {:.1e})",
            dec.beta[0], dec.beta[1], dec.beta[2], dec.residual
        );

        // same quantities with numerically differentiated fields
        let g1_fd = sys.g1.with_finite_differences();
        let g2_fd = sys.g2.with_finite_differences();
        let bracket_fd = lie_bracket(&g1_fd, &g2_fd, &x);
        println!(
            "finite-difference bracket deviation: {:.2e}",
            (bracket - bracket_fd).amax()
        );
        println!();
    }
}
