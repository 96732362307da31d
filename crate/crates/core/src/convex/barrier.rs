//! Log-barrier path following with damped Newton centering.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Constraint, ConvexProgram};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Barrier parameter growth per outer iteration.
    pub mu: f64,
    pub t0: f64,
    /// Stop once the barrier gap bound `m / t` falls below this.
    pub gap_tolerance: f64,
    /// Centering stops when half the squared Newton decrement is below this.
    pub newton_tolerance: f64,
    pub max_newton_iterations: usize,
    /// Newton steps allowed per centering before moving on to the next `t`.
    pub max_centering_steps: usize,
    pub armijo: f64,
    pub backtrack: f64,
    /// Phase-I returns once every constraint value is below `-margin`.
    pub feasibility_margin: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            mu: 10.0,
            t0: 1.0,
            gap_tolerance: 1e-8,
            newton_tolerance: 1e-14,
            max_newton_iterations: 5000,
            max_centering_steps: 50,
            armijo: 0.01,
            backtrack: 0.5,
            feasibility_margin: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Gap bound reached and the KKT residual is below [`KKT_TOLERANCE`].
    Optimal,
    /// Newton budget exhausted or the residual test failed; the iterate is
    /// strictly feasible but not certified.
    MaxIter,
}

pub const KKT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub x_star: Vec<f64>,
    pub objective_value: f64,
    /// Barrier bound `m / t` on the suboptimality.
    pub duality_gap: f64,
    /// Stationarity residual with duals `1 / (t·(−f_i))`, relative to `max(1, ‖c‖∞)`.
    pub kkt_residual: f64,
    /// Outer barrier-parameter updates.
    pub barrier_iterations: usize,
    pub newton_iterations: usize,
    pub status: SolveStatus,
}

/// Constraint set with an optional shift variable: in phase I every
/// constraint becomes `f_i(x) − s ≤ 0`.
struct Problem<'a> {
    c: &'a [f64],
    cons: &'a [Constraint],
    shift: Option<usize>,
    lower: &'a [f64],
    upper: &'a [f64],
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.c.len()
    }

    fn num_inequalities(&self) -> usize {
        self.cons.len() + 2 * self.n()
    }

    fn con_value(&self, c: &Constraint, x: &[f64]) -> f64 {
        let v = c.value(&x[..self.inner_n()]);
        match self.shift {
            Some(s) => v - x[s],
            None => v,
        }
    }

    fn inner_n(&self) -> usize {
        self.n() - usize::from(self.shift.is_some())
    }

    /// `φ(xn) − φ(x)` computed term by term as log ratios, so it stays
    /// accurate when `t·c·x` dwarfs the change. `None` if `xn` is not interior.
    fn phi_delta(&self, t: f64, x: &[f64], xn: &[f64]) -> Option<f64> {
        let mut d = 0.0;
        for i in 0..self.n() {
            let dx = xn[i] - x[i];
            d += t * self.c[i] * dx;
            let a = (xn[i] - self.lower[i]) / (x[i] - self.lower[i]);
            let b = (self.upper[i] - xn[i]) / (self.upper[i] - x[i]);
            if a <= 0.0 || b <= 0.0 {
                return None;
            }
            d -= a.ln() + b.ln();
        }
        for c in self.cons {
            let f0 = self.con_value(c, x);
            let f1 = self.con_value(c, xn);
            if f1 >= 0.0 || f1.is_nan() {
                return None;
            }
            d -= (f1 / f0).ln();
        }
        Some(d)
    }

    fn grad_hess(&self, t: f64, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n();
        let ni = self.inner_n();
        let mut g = DVector::from_iterator(n, self.c.iter().map(|ci| t * ci));
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            let a = x[i] - self.lower[i];
            let b = self.upper[i] - x[i];
            g[i] += -1.0 / a + 1.0 / b;
            h[(i, i)] += 1.0 / (a * a) + 1.0 / (b * b);
        }
        let mut cg = vec![0.0; n];
        for c in self.cons {
            let f = self.con_value(c, x);
            let inv = 1.0 / (-f);
            cg.iter_mut().for_each(|v| *v = 0.0);
            c.accumulate(&x[..ni], &mut cg[..ni], 1.0, Some((&mut h, inv)));
            if let Some(s) = self.shift {
                cg[s] = -1.0;
            }
            for r in 0..n {
                if cg[r] == 0.0 {
                    continue;
                }
                g[r] += inv * cg[r];
                let wr = inv * inv * cg[r];
                for col in 0..n {
                    h[(r, col)] += wr * cg[col];
                }
            }
        }
        (g, h)
    }

    /// Stationarity residual with duals `1 / (t·(−f_i))`.
    fn kkt_residual(&self, t: f64, x: &[f64]) -> f64 {
        let (g, _) = self.grad_hess(t, x);
        let cmax = self.c.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        g.amax() / t / cmax
    }

    fn max_box_step(&self, x: &[f64], dx: &DVector<f64>) -> f64 {
        let mut s = f64::INFINITY;
        for i in 0..self.n() {
            if dx[i] > 0.0 {
                s = s.min((self.upper[i] - x[i]) / dx[i]);
            } else if dx[i] < 0.0 {
                s = s.min((self.lower[i] - x[i]) / dx[i]);
            }
        }
        s
    }
}

fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = g.len();
    let d = DVector::from_iterator(
        n,
        (0..n).map(|i| {
            let hi = h[(i, i)];
            if hi > 0.0 {
                1.0 / hi.sqrt()
            } else {
                1.0
            }
        }),
    );
    let mut hs = h.clone();
    for r in 0..n {
        for c in 0..n {
            hs[(r, c)] *= d[r] * d[c];
        }
    }
    let rhs = -g.component_mul(&d);
    let y = match hs.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => hs.lu().solve(&rhs)?,
    };
    let dx = y.component_mul(&d);
    dx.iter().all(|v| v.is_finite()).then_some(dx)
}

fn scaled_norm(g: &DVector<f64>, h: &DMatrix<f64>) -> f64 {
    (0..g.len())
        .map(|i| {
            let hi = h[(i, i)];
            if hi > 0.0 {
                g[i].abs() / hi.sqrt()
            } else {
                g[i].abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Backtracking on the Armijo condition. Near an active constraint the
/// barrier value itself loses digits, so when Armijo cannot be certified a
/// step that shrinks the Jacobi-scaled gradient is accepted instead.
#[allow(clippy::too_many_arguments)]
fn line_search(
    p: &Problem,
    t: f64,
    x: &[f64],
    dx: &DVector<f64>,
    g: &DVector<f64>,
    slope: f64,
    max_step: f64,
    s: &SolverSettings,
) -> Option<Vec<f64>> {
    let at = |step: f64| -> Vec<f64> { x.iter().zip(dx.iter()).map(|(a, b)| a + step * b).collect() };
    let mut step = max_step;
    let mut first_interior = None;
    for _ in 0..80 {
        let xn = at(step);
        if let Some(d) = p.phi_delta(t, x, &xn) {
            if d <= s.armijo * step * slope {
                return Some(xn);
            }
            first_interior.get_or_insert(step);
        }
        step *= s.backtrack;
    }
    let (_, h) = p.grad_hess(t, x);
    let g0 = scaled_norm(g, &h);
    let mut step = first_interior?;
    for _ in 0..20 {
        let xn = at(step);
        let (gn, _) = p.grad_hess(t, &xn);
        if scaled_norm(&gn, &h) < (1.0 - 0.01 * step) * g0 {
            return Some(xn);
        }
        step *= s.backtrack;
    }
    None
}

struct Outcome {
    x: Vec<f64>,
    t: f64,
    newton: usize,
    outer: usize,
    status: SolveStatus,
}

/// Below this Newton decrement a step that fails to halve it is treated as
/// the rounding floor and centering ends early, except in the final stage
/// where the duals used for the KKT check need a tight center.
const STALL_DECREMENT: f64 = 1e-6;

fn barrier_minimize(
    p: &Problem,
    x0: Vec<f64>,
    t0: f64,
    s: &SolverSettings,
    early_exit: &dyn Fn(&[f64]) -> bool,
) -> Outcome {
    let m = p.num_inequalities() as f64;
    let mut x = x0;
    let mut t = t0;
    let mut newton = 0;
    let mut outer = 0;
    loop {
        outer += 1;
        let mut stalled = false;
        let mut last_decrement = f64::INFINITY;
        let last_stage = m / t <= s.gap_tolerance;
        for _ in 0..s.max_centering_steps {
            if newton >= s.max_newton_iterations {
                return Outcome {
                    x,
                    t,
                    newton,
                    outer,
                    status: SolveStatus::MaxIter,
                };
            }
            let (g, h) = p.grad_hess(t, &x);
            let Some(dx) = newton_direction(&g, &h) else {
                stalled = true;
                break;
            };
            newton += 1;
            let slope = g.dot(&dx);
            let decrement = -slope / 2.0;
            if decrement <= s.newton_tolerance
                || (!last_stage && decrement <= STALL_DECREMENT && decrement > 0.5 * last_decrement)
            {
                break;
            }
            last_decrement = decrement;
            let max_step = (0.99 * p.max_box_step(&x, &dx)).min(1.0);
            match line_search(p, t, &x, &dx, &g, slope, max_step, s) {
                Some(xn) => x = xn,
                None => {
                    stalled = true;
                    break;
                }
            }
            if early_exit(&x) {
                return Outcome {
                    x,
                    t,
                    newton,
                    outer,
                    status: SolveStatus::Optimal,
                };
            }
        }
        if m / t <= s.gap_tolerance {
            return Outcome {
                x,
                t,
                newton,
                outer,
                status: SolveStatus::Optimal,
            };
        }
        if stalled {
            log::trace!("centering stalled at t = {t:e}");
        }
        t *= s.mu;
    }
}

/// Moves `x` strictly inside the box, keeping it where it already is when possible.
fn interior_of_box(x: Option<&[f64]>, lower: &[f64], upper: &[f64]) -> Vec<f64> {
    lower
        .iter()
        .zip(upper)
        .enumerate()
        .map(|(i, (l, u))| {
            let pad = 1e-6 * (u - l);
            let mid = 0.5 * (l + u);
            let v = x.map_or(mid, |x| x[i]);
            if v.is_finite() {
                v.clamp(l + pad, u - pad)
            } else {
                mid
            }
        })
        .collect()
}

/// Phase I: minimizes `s` subject to `f_i(x) ≤ s` and the box.
pub fn find_strictly_feasible(
    program: &ConvexProgram,
    guess: Option<&[f64]>,
    settings: &SolverSettings,
) -> Result<Vec<f64>> {
    program.validate()?;
    let x0 = interior_of_box(guess, &program.lower, &program.upper);
    let margin = settings.feasibility_margin;
    if program.max_violation(&x0) < -margin {
        return Ok(x0);
    }
    let n = program.num_variables();
    let worst = program
        .constraints
        .iter()
        .map(|c| c.value(&x0))
        .fold(f64::NEG_INFINITY, f64::max);
    let s0 = worst.max(0.0) + 1.0;
    let mut lower = program.lower.clone();
    let mut upper = program.upper.clone();
    lower.push(-1.0);
    upper.push(2.0 * s0 + 1.0);
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let p = Problem {
        c: &c,
        cons: &program.constraints,
        shift: Some(n),
        lower: &lower,
        upper: &upper,
    };
    let mut start = x0;
    start.push(s0);
    let exit = |x: &[f64]| program.max_violation(&x[..n]) < -margin;
    let out = barrier_minimize(&p, start, settings.t0, settings, &exit);
    let x = out.x[..n].to_vec();
    let v = program.max_violation(&x);
    if v < -margin {
        Ok(x)
    } else {
        Err(Error::InfeasibleStart(v))
    }
}

/// Maximizes `c·x`, starting from `start` when it is strictly feasible and
/// running phase I otherwise.
pub fn solve(program: &ConvexProgram, start: Option<&[f64]>, settings: &SolverSettings) -> Result<SolverReport> {
    program.validate()?;
    let x0 = match start {
        Some(x) if x.len() != program.num_variables() => {
            return Err(Error::DimensionMismatch(format!(
                "start has {} entries for {} variables",
                x.len(),
                program.num_variables()
            )))
        }
        Some(x) if program.max_violation(x) < 0.0 => x.to_vec(),
        other => find_strictly_feasible(program, other, settings)?,
    };
    let neg: Vec<f64> = program.objective.iter().map(|c| -c).collect();
    let p = Problem {
        c: &neg,
        cons: &program.constraints,
        shift: None,
        lower: &program.lower,
        upper: &program.upper,
    };
    let out = barrier_minimize(&p, x0, settings.t0, settings, &|_| false);
    let kkt_residual = p.kkt_residual(out.t, &out.x);
    let status = match out.status {
        SolveStatus::Optimal if kkt_residual <= KKT_TOLERANCE => SolveStatus::Optimal,
        _ => SolveStatus::MaxIter,
    };
    Ok(SolverReport {
        objective_value: program.objective_value(&out.x),
        duality_gap: p.num_inequalities() as f64 / out.t,
        kkt_residual,
        barrier_iterations: out.outer,
        newton_iterations: out.newton,
        status,
        x_star: out.x,
    })
}
