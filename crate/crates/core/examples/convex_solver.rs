//! Solves a small program with affine, quadratic and exponential rows by the
//! barrier method, then round-trips it through the text dump format.
//!
//! maximize t subject to x² + y² ≤ 1, 2^t ≤ 1 + x + y, x, y ≥ 0.
//! The optimum is x = y = 1/√2, t = log2(1 + √2).
//!
//! ```text
//! cargo run --release --example convex_solver
//! ```

use nalgebra::DMatrix;
use repeater_fd::convex::{parse_program, solve, write_program, Constraint, ConvexProgram, SolverSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Variables x, y, t and an auxiliary u = x + y for the exponential row.
    let mut p = ConvexProgram::new(vec![0.0, 0.0, -5.0, 0.0], vec![2.0, 2.0, 5.0, 4.0]);
    p.names = ["x", "y", "t", "u"].map(String::from).to_vec();
    p.objective = vec![0.0, 0.0, 1.0, 0.0];
    let mut q = DMatrix::zeros(4, 4);
    q[(0, 0)] = 1.0;
    q[(1, 1)] = 1.0;
    p.constraints.push(Constraint::Quadratic {
        q,
        g: vec![0.0; 4],
        b: 1.0,
    });
    p.constraints.push(Constraint::Affine {
        a: vec![-1.0, -1.0, 0.0, 1.0],
        b: 0.0,
    });
    p.constraints.push(Constraint::Exp2 { i: 2, j: 3 });
    p.validate()?;

    let settings = SolverSettings::default();
    let report = solve(&p, None, &settings)?;
    let exact = (1.0 + std::f64::consts::SQRT_2).log2();
    println!("status {:?}", report.status);
    println!(
        "x* = {:?}",
        report.x_star.iter().map(|v| format!("{v:.9}")).collect::<Vec<_>>()
    );
    println!(
        "objective {:.12} (exact {exact:.12}, error {:.1e})",
        report.objective_value,
        (report.objective_value - exact).abs()
    );
    println!(
        "gap bound {:.1e}, KKT residual {:.1e}, {} barrier / {} Newton iterations",
        report.duality_gap, report.kkt_residual, report.barrier_iterations, report.newton_iterations
    );

    let text = write_program(&p);
    println!("\n{text}");
    let back = parse_program(&text)?;
    let again = solve(&back, None, &settings)?;
    println!(
        "parsed program {} the original; re-solve objective {:.12}",
        if back == p { "equals" } else { "differs from" },
        again.objective_value
    );
    Ok(())
}
