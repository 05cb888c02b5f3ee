//! The coupled weight triple: construct from either parameterization, verify
//! the coupling residual and the stability of the singular-arc error matrix.
//!
//! Run with: cargo run --example weight_coupling

use flattrack::weights::{Mat2, WeightSet};

fn main() {
    // the headline choice: Q = 100 I, M = I, hence Qbar = 10 I
    let w = WeightSet::from_q_m(Mat2::from_diagonal_element(100.0), Mat2::identity()).unwrap();
    println!("Q = diag(100, 100), M = I");
    println!("  Qbar = diag({:.1}, {:.1})", w.qbar()[(0, 0)], w.qbar()[(1, 1)]);
    println!("  coupling residual = {:.2e}", w.coupling_residual());
    println!("  singular-arc rate = {:.1} 1/s", w.arc_rate());

    // a correlated pair, round-tripped through both constructors
    let qbar = Mat2::new(4.0, 1.0, 1.0, 3.0);
    let m = Mat2::new(2.0, -0.3, -0.3, 1.0);
    let w = WeightSet::from_qbar_m(qbar, m).unwrap();
    let back = WeightSet::from_q_m(*w.q(), m).unwrap();
    println!("\nround trip through Q = Qbar M^-1 Qbar:");
    println!("  Qbar      = [{:.4}, {:.4}; {:.4}, {:.4}]", qbar[(0, 0)], qbar[(0, 1)], qbar[(1, 0)], qbar[(1, 1)]);
    println!(
        "  recovered = [{:.4}, {:.4}; {:.4}, {:.4}]",
        back.qbar()[(0, 0)],
        back.qbar()[(0, 1)],
        back.qbar()[(1, 0)],
        back.qbar()[(1, 1)]
    );

    let arc = w.singular_arc_matrix();
    println!("\nsingular-arc error matrix -Qbar M^-1:");
    println!("  [{:+.4}, {:+.4}; {:+.4}, {:+.4}]", arc[(0, 0)], arc[(0, 1)], arc[(1, 0)], arc[(1, 1)]);
    println!(
        "  trace = {:.4} (< 0), det = {:.4} (> 0): Hurwitz",
        arc[(0, 0)] + arc[(1, 1)],
        arc[(0, 0)] * arc[(1, 1)] - arc[(0, 1)] * arc[(1, 0)]
    );

    // rejected input
    match WeightSet::from_qbar_m(Mat2::new(1.0, 0.0, 0.0, -1.0), Mat2::identity()) {
        Err(e) => println!("\nindefinite Qbar rejected: {e}"),
        Ok(_) => unreachable!(),
    }
}
