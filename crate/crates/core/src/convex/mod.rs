//! Small dense convex programs and a log-barrier interior-point solver.
//!
//! A [`ConvexProgram`] maximizes `c·x` over finite box bounds and three
//! kinds of convex inequality:
//!
//! * affine `a·x ≤ b`;
//! * convex quadratic `xᵀQx + g·x ≤ b` with `Q` symmetric PSD;
//! * exponential epigraph `2^{x_i} − 1 ≤ x_j`.

mod barrier;
mod dump;

pub use barrier::{find_strictly_feasible, solve, SolveStatus, SolverReport, SolverSettings, KKT_TOLERANCE};
pub use dump::{parse_program, write_program};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    Affine { a: Vec<f64>, b: f64 },
    Quadratic { q: DMatrix<f64>, g: Vec<f64>, b: f64 },
    Exp2 { i: usize, j: usize },
}

impl Constraint {
    /// `f(x)`; the constraint holds when this is `≤ 0`.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Constraint::Affine { a, b } => dot(a, x) - b,
            Constraint::Quadratic { q, g, b } => {
                let xv = DVector::from_column_slice(x);
                xv.dot(&(q * &xv)) + dot(g, x) - b
            }
            Constraint::Exp2 { i, j } => x[*i].exp2() - 1.0 - x[*j],
        }
    }

    /// Adds `∇f(x)` into `grad` and `∇²f(x)` into `hess`, each scaled by `w_g`, `w_h`.
    fn accumulate(&self, x: &[f64], grad: &mut [f64], w_g: f64, hess: Option<(&mut DMatrix<f64>, f64)>) {
        match self {
            Constraint::Affine { a, .. } => {
                for (g, ai) in grad.iter_mut().zip(a) {
                    *g += w_g * ai;
                }
            }
            Constraint::Quadratic { q, g, .. } => {
                let n = g.len();
                for r in 0..n {
                    let mut s = g[r];
                    for c in 0..n {
                        s += 2.0 * q[(r, c)] * x[c];
                    }
                    grad[r] += w_g * s;
                }
                if let Some((h, w_h)) = hess {
                    for r in 0..n {
                        for c in 0..n {
                            h[(r, c)] += w_h * 2.0 * q[(r, c)];
                        }
                    }
                }
            }
            Constraint::Exp2 { i, j } => {
                let e = x[*i].exp2() * std::f64::consts::LN_2;
                grad[*i] += w_g * e;
                grad[*j] -= w_g;
                if let Some((h, w_h)) = hess {
                    h[(*i, *i)] += w_h * e * std::f64::consts::LN_2;
                }
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.accumulate(x, &mut g, 1.0, None);
        g
    }

    fn kind(&self) -> &'static str {
        match self {
            Constraint::Affine { .. } => "affine",
            Constraint::Quadratic { .. } => "quadratic",
            Constraint::Exp2 { .. } => "exp2",
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `maximize c·x` subject to `lower ≤ x ≤ upper` and every constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexProgram {
    pub names: Vec<String>,
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl ConvexProgram {
    /// Empty program over `n` variables named `x0..`, with the given box.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        let n = lower.len();
        Self {
            names: (0..n).map(|i| format!("x{i}")).collect(),
            objective: vec![0.0; n],
            lower,
            upper,
            constraints: Vec::new(),
        }
    }

    pub fn num_variables(&self) -> usize {
        self.objective.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }

    /// Largest constraint value including box bounds; negative means strictly feasible.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut m = f64::NEG_INFINITY;
        for ((xi, l), u) in x.iter().zip(&self.lower).zip(&self.upper) {
            m = m.max(l - xi).max(xi - u);
        }
        for c in &self.constraints {
            m = m.max(c.value(x));
        }
        m
    }

    /// Checks dimensions, finiteness, box ordering, index ranges, and that
    /// every quadratic form is symmetric PSD.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_variables();
        let bad = |m: String| Err(Error::InvalidProgram(m));
        if n == 0 {
            return bad("no variables".into());
        }
        if self.lower.len() != n || self.upper.len() != n || self.names.len() != n {
            return bad(format!(
                "{n} variables but {} lower, {} upper bounds and {} names",
                self.lower.len(),
                self.upper.len(),
                self.names.len()
            ));
        }
        if !self.objective.iter().all(|v| v.is_finite()) {
            return bad("non-finite objective coefficient".into());
        }
        for (i, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !l.is_finite() || !u.is_finite() || l >= u {
                return bad(format!("variable {i} has bounds [{l}, {u}]"));
            }
        }
        for (ci, c) in self.constraints.iter().enumerate() {
            let ctx = |m: &str| Error::InvalidProgram(format!("constraint {ci} ({}): {m}", c.kind()));
            match c {
                Constraint::Affine { a, b } => {
                    if a.len() != n {
                        return Err(ctx("coefficient length"));
                    }
                    if !b.is_finite() || !a.iter().all(|v| v.is_finite()) {
                        return Err(ctx("non-finite coefficient"));
                    }
                }
                Constraint::Quadratic { q, g, b } => {
                    if q.nrows() != n || q.ncols() != n || g.len() != n {
                        return Err(ctx("coefficient shape"));
                    }
                    if !b.is_finite() || !g.iter().all(|v| v.is_finite()) || !q.iter().all(|v| v.is_finite()) {
                        return Err(ctx("non-finite coefficient"));
                    }
                    let scale = q.amax();
                    if (q - q.transpose()).amax() > 1e-12 * scale {
                        return Err(ctx("Q is not symmetric"));
                    }
                    if scale > 0.0 {
                        let eig = SymmetricEigen::new(q.clone()).eigenvalues;
                        if eig.min() < -1e-10 * scale {
                            return Err(ctx(&format!("Q has negative eigenvalue {:e}", eig.min())));
                        }
                    }
                }
                Constraint::Exp2 { i, j } => {
                    if *i >= n || *j >= n {
                        return Err(ctx("index out of range"));
                    }
                    if i == j {
                        return Err(ctx("exponent and epigraph variable coincide"));
                    }
                }
            }
        }
        Ok(())
    }
}
