//! Barrier solver against grid and closed-form optima.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use repeater_fd::convex::{find_strictly_feasible, solve, Constraint, ConvexProgram, SolveStatus, SolverSettings};
use repeater_fd::Error;

/// `(x − a)ᵀ M (x − a) ≤ r` as `xᵀ M x + g·x ≤ b`.
fn ellipse(m: DMatrix<f64>, a: &[f64], r: f64) -> Constraint {
    let n = a.len();
    let av = nalgebra::DVector::from_column_slice(a);
    let ma = &m * &av;
    let g = (0..n).map(|i| -2.0 * ma[i]).collect();
    let b = r - av.dot(&ma);
    Constraint::Quadratic { q: m, g, b }
}

fn random_psd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.2
}

#[test]
fn two_variable_qcqp_matches_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let settings = SolverSettings::default();
    let points = 2001;
    for _ in 0..8 {
        let mut p = ConvexProgram::new(vec![-1.0; 2], vec![1.0; 2]);
        let c: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm: f64 = c.iter().map(|v| v.abs()).sum();
        p.objective = c.iter().map(|v| 0.5 * v / norm).collect();
        for _ in 0..2 {
            let center = [rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)];
            p.constraints
                .push(ellipse(random_psd(2, &mut rng), &center, rng.random_range(0.3..1.0)));
        }
        p.constraints.push(Constraint::Affine {
            a: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            b: 0.5,
        });
        let report = solve(&p, None, &settings).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        assert!(p.max_violation(&report.x_star) <= 1e-8);

        let mut grid = f64::NEG_INFINITY;
        let step = 2.0 / (points - 1) as f64;
        for i in 0..points {
            for j in 0..points {
                let x = [-1.0 + i as f64 * step, -1.0 + j as f64 * step];
                if p.constraints.iter().all(|c| c.value(&x) <= 0.0) {
                    grid = grid.max(p.objective_value(&x));
                }
            }
        }
        assert!(
            report.objective_value >= grid - 1e-9,
            "{} < grid {grid}",
            report.objective_value
        );
        assert!(
            report.objective_value - grid <= 5e-4,
            "{} vs grid {grid}",
            report.objective_value
        );
    }
}

#[test]
fn three_variable_phase_one_reaches_offset_ball() {
    // The origin is infeasible, so phase I has to move into the ball first.
    let settings = SolverSettings::default();
    let center = [2.0, -1.5, 3.0];
    let radius: f64 = 0.75;
    let mut p = ConvexProgram::new(vec![-5.0; 3], vec![5.0; 3]);
    p.objective = vec![1.0, 2.0, -0.5];
    p.constraints
        .push(ellipse(DMatrix::identity(3, 3), &center, radius * radius));
    assert!(p.max_violation(&[0.0; 3]) > 0.0);

    let x0 = find_strictly_feasible(&p, None, &settings).unwrap();
    assert!(p.max_violation(&x0) < 0.0);

    let report = solve(&p, None, &settings).unwrap();
    let cn = p.objective.iter().map(|v| v * v).sum::<f64>().sqrt();
    let exact = p.objective_value(&center) + radius * cn;
    assert!(
        (report.objective_value - exact).abs() <= 1e-6,
        "{} vs {exact}",
        report.objective_value
    );
    assert!(p.max_violation(&report.x_star) <= 1e-8);
}

#[test]
fn exponential_row_matches_closed_form() {
    // maximize t subject to 2^t ≤ 1 + u, u ≤ 3: t* = 2.
    let mut p = ConvexProgram::new(vec![-4.0, 0.0], vec![4.0, 10.0]);
    p.objective = vec![1.0, 0.0];
    p.constraints.push(Constraint::Exp2 { i: 0, j: 1 });
    p.constraints.push(Constraint::Affine {
        a: vec![0.0, 1.0],
        b: 3.0,
    });
    let report = solve(&p, None, &SolverSettings::default()).unwrap();
    assert!((report.objective_value - 2.0).abs() <= 1e-7);
}

#[test]
fn disjoint_constraints_are_infeasible() {
    let mut p = ConvexProgram::new(vec![-5.0; 2], vec![5.0; 2]);
    p.objective = vec![1.0, 1.0];
    p.constraints.push(ellipse(DMatrix::identity(2, 2), &[-2.0, 0.0], 1.0));
    p.constraints.push(ellipse(DMatrix::identity(2, 2), &[2.0, 0.0], 1.0));
    match solve(&p, None, &SolverSettings::default()) {
        Err(Error::InfeasibleStart(v)) => assert!(v > 0.0),
        other => panic!("expected an infeasible start, got {other:?}"),
    }
}
