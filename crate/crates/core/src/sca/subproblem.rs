//! Variable layout and construction of the convex subproblem solved at each
//! SCA iteration.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::coefficients::SinrSurrogate;
use crate::convex::{Constraint, ConvexProgram};
use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;

/// Positions of the subproblem variables `(α, t_dl, t_ul, T_dl, T_ul, φ_dl, φ_ul)`.
/// A side without UEs has no `t`, `T` or `φ` entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub num_repeaters: usize,
    pub num_dl: usize,
    pub num_ul: usize,
}

impl Layout {
    pub fn new(num_repeaters: usize, num_dl: usize, num_ul: usize) -> Self {
        Self {
            num_repeaters,
            num_dl,
            num_ul,
        }
    }

    fn has_dl(&self) -> bool {
        self.num_dl > 0
    }

    fn has_ul(&self) -> bool {
        self.num_ul > 0
    }

    pub fn alpha(&self, l: usize) -> usize {
        l
    }

    pub fn rate_dl(&self) -> Option<usize> {
        self.has_dl().then_some(self.num_repeaters)
    }

    pub fn rate_ul(&self) -> Option<usize> {
        self.has_ul().then_some(self.num_repeaters + usize::from(self.has_dl()))
    }

    fn num_sides(&self) -> usize {
        usize::from(self.has_dl()) + usize::from(self.has_ul())
    }

    pub fn target_dl(&self) -> Option<usize> {
        self.has_dl().then_some(self.num_repeaters + self.num_sides())
    }

    pub fn target_ul(&self) -> Option<usize> {
        self.has_ul()
            .then_some(self.num_repeaters + self.num_sides() + usize::from(self.has_dl()))
    }

    pub fn slack_dl(&self, k: usize) -> usize {
        self.num_repeaters + 2 * self.num_sides() + k
    }

    pub fn slack_ul(&self, q: usize) -> usize {
        self.num_repeaters + 2 * self.num_sides() + self.num_dl + q
    }

    pub fn num_variables(&self) -> usize {
        self.num_repeaters + 2 * self.num_sides() + self.num_dl + self.num_ul
    }
}

/// One SCA iterate: the expansion point plus epigraph and slack variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaState {
    pub alpha_n: Vec<f64>,
    pub t_dl: f64,
    pub t_ul: f64,
    pub target_dl: f64,
    pub target_ul: f64,
    pub slack_dl: Vec<f64>,
    pub slack_ul: Vec<f64>,
    pub lambda_dl: f64,
    pub lambda_ul: f64,
    pub iteration: usize,
    pub objective_trace: Vec<f64>,
}

impl ScaState {
    pub fn layout(&self) -> Layout {
        Layout::new(self.alpha_n.len(), self.slack_dl.len(), self.slack_ul.len())
    }

    pub fn max_slack(&self) -> f64 {
        self.slack_dl.iter().chain(&self.slack_ul).fold(0.0, |m, v| m.max(*v))
    }

    /// `ω_dl t_dl + ω_ul t_ul − λ_dl Σφ_dl − λ_ul Σφ_ul` with the state's penalties.
    pub fn penalized_objective(&self, config: &ScenarioConfig) -> f64 {
        let lay = self.layout();
        let mut j = 0.0;
        if lay.num_dl > 0 {
            j += config.weight_dl * self.t_dl - self.lambda_dl * self.slack_dl.iter().sum::<f64>();
        }
        if lay.num_ul > 0 {
            j += config.weight_ul * self.t_ul - self.lambda_ul * self.slack_ul.iter().sum::<f64>();
        }
        j
    }

    pub fn rate_objective(&self, config: &ScenarioConfig) -> f64 {
        let lay = self.layout();
        let mut j = 0.0;
        if lay.num_dl > 0 {
            j += config.weight_dl * self.t_dl;
        }
        if lay.num_ul > 0 {
            j += config.weight_ul * self.t_ul;
        }
        j
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let lay = self.layout();
        let mut x = vec![0.0; lay.num_variables()];
        x[..lay.num_repeaters].copy_from_slice(&self.alpha_n);
        if let (Some(t), Some(tt)) = (lay.rate_dl(), lay.target_dl()) {
            x[t] = self.t_dl;
            x[tt] = self.target_dl;
        }
        if let (Some(t), Some(tt)) = (lay.rate_ul(), lay.target_ul()) {
            x[t] = self.t_ul;
            x[tt] = self.target_ul;
        }
        for (k, v) in self.slack_dl.iter().enumerate() {
            x[lay.slack_dl(k)] = *v;
        }
        for (q, v) in self.slack_ul.iter().enumerate() {
            x[lay.slack_ul(q)] = *v;
        }
        x
    }

    /// Copies the variable values of `x` into the state, keeping penalties and history.
    pub fn update_from(&mut self, x: &[f64]) {
        let lay = self.layout();
        self.alpha_n.copy_from_slice(&x[..lay.num_repeaters]);
        if let (Some(t), Some(tt)) = (lay.rate_dl(), lay.target_dl()) {
            self.t_dl = x[t];
            self.target_dl = x[tt];
        }
        if let (Some(t), Some(tt)) = (lay.rate_ul(), lay.target_ul()) {
            self.t_ul = x[t];
            self.target_ul = x[tt];
        }
        for (k, v) in self.slack_dl.iter_mut().enumerate() {
            *v = x[lay.slack_dl(k)];
        }
        for (q, v) in self.slack_ul.iter_mut().enumerate() {
            *v = x[lay.slack_ul(q)];
        }
    }
}

/// Finite box for every subproblem variable.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemBounds {
    pub alpha_upper: Vec<f64>,
    pub rate_lower_dl: f64,
    pub rate_lower_ul: f64,
    pub rate_upper_dl: f64,
    pub rate_upper_ul: f64,
    pub target_lower_dl: f64,
    pub target_lower_ul: f64,
    pub target_upper_dl: f64,
    pub target_upper_ul: f64,
    pub slack_upper_dl: Vec<f64>,
    pub slack_upper_ul: Vec<f64>,
}

const MIN_TARGET: f64 = 1e-9;

fn side_bounds(surrogates: &[SinrSurrogate], alpha_upper: &[f64], qos: f64) -> (f64, f64, f64, f64, Vec<f64>) {
    // Interference never drops below thermal noise, so the signal at the
    // upper corner over that floor caps every achievable SINR.
    let cap = surrogates
        .iter()
        .map(|s| s.signal(alpha_upper) / s.floor.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let target_lower = (qos.exp2() - 1.0).max(MIN_TARGET);
    let target_upper = (2.0 * cap + 1.0).max(2.0 * target_lower + 1.0);
    let rate_upper = (1.0 + target_upper).log2() + 1.0;
    // The slack never needs to exceed the interference it compensates; the
    // penalty keeps it far below this cap at any useful point.
    let slack_upper = surrogates
        .iter()
        .map(|s| {
            let l = alpha_upper.len();
            let mut i_max = s.constant.abs();
            for i in 0..l {
                i_max += s.lin[i].abs() * alpha_upper[i];
                for j in 0..l {
                    i_max += s.quad[(i, j)].abs() * alpha_upper[i] * alpha_upper[j];
                }
            }
            2.0 * (i_max + 1.0)
        })
        .collect();
    (target_lower, target_upper, qos, rate_upper, slack_upper)
}

pub fn subproblem_bounds(
    dl: &[SinrSurrogate],
    ul: &[SinrSurrogate],
    alpha_upper: Vec<f64>,
    config: &ScenarioConfig,
) -> SubproblemBounds {
    let (tl_dl, tu_dl, rl_dl, ru_dl, su_dl) = side_bounds(dl, &alpha_upper, config.qos_dl);
    let (tl_ul, tu_ul, rl_ul, ru_ul, su_ul) = side_bounds(ul, &alpha_upper, config.qos_ul);
    SubproblemBounds {
        alpha_upper,
        rate_lower_dl: rl_dl,
        rate_lower_ul: rl_ul,
        rate_upper_dl: ru_dl,
        rate_upper_ul: ru_ul,
        target_lower_dl: tl_dl,
        target_lower_ul: tl_ul,
        target_upper_dl: tu_dl,
        target_upper_ul: tu_ul,
        slack_upper_dl: su_dl,
        slack_upper_ul: su_ul,
    }
}

/// Convex SINR row `interference(α) − linearized_signal(α, T) − φ ≤ 0`.
pub fn linearize(
    s: &SinrSurrogate,
    state: &ScaState,
    target_index: usize,
    slack_index: usize,
    target_n: f64,
) -> Result<Constraint> {
    let lay = state.layout();
    let n = lay.num_variables();
    let l = lay.num_repeaters;
    let (ca, ct, c0) = s.linearized_signal(&state.alpha_n, target_n)?;
    let mut g = vec![0.0; n];
    for r in 0..l {
        g[lay.alpha(r)] = s.lin[r] - ca[r];
    }
    g[target_index] = -ct;
    g[slack_index] = -1.0;
    let b = c0 - s.constant;
    if s.quad.iter().all(|v| *v == 0.0) {
        return Ok(Constraint::Affine { a: g, b });
    }
    let mut q = DMatrix::zeros(n, n);
    q.view_mut((0, 0), (l, l)).copy_from(&s.quad);
    Ok(Constraint::Quadratic { q, g, b })
}

pub fn linearize_dl(k: usize, s: &SinrSurrogate, state: &ScaState) -> Result<Constraint> {
    let lay = state.layout();
    let target = lay
        .target_dl()
        .ok_or_else(|| Error::InvalidState("no DL users".into()))?;
    if k >= lay.num_dl {
        return Err(Error::IndexOutOfRange {
            index: k,
            len: lay.num_dl,
        });
    }
    linearize(s, state, target, lay.slack_dl(k), state.target_dl)
}

pub fn linearize_ul(q: usize, s: &SinrSurrogate, state: &ScaState) -> Result<Constraint> {
    let lay = state.layout();
    let target = lay
        .target_ul()
        .ok_or_else(|| Error::InvalidState("no UL users".into()))?;
    if q >= lay.num_ul {
        return Err(Error::IndexOutOfRange {
            index: q,
            len: lay.num_ul,
        });
    }
    linearize(s, state, target, lay.slack_ul(q), state.target_ul)
}

/// Assembles the penalized, linearized subproblem at the state's expansion point.
pub fn build_subproblem(
    state: &ScaState,
    dl: &[SinrSurrogate],
    ul: &[SinrSurrogate],
    bounds: &SubproblemBounds,
    config: &ScenarioConfig,
) -> Result<ConvexProgram> {
    let lay = state.layout();
    if dl.len() != lay.num_dl || ul.len() != lay.num_ul || bounds.alpha_upper.len() != lay.num_repeaters {
        return Err(Error::DimensionMismatch(format!(
            "state has L={}, K_dl={}, K_ul={}; got {} DL, {} UL surrogates and {} bounds",
            lay.num_repeaters,
            lay.num_dl,
            lay.num_ul,
            dl.len(),
            ul.len(),
            bounds.alpha_upper.len()
        )));
    }
    let n = lay.num_variables();
    let mut p = ConvexProgram::new(vec![0.0; n], vec![0.0; n]);
    for r in 0..lay.num_repeaters {
        let i = lay.alpha(r);
        p.names[i] = format!("alpha_{r}");
        p.upper[i] = bounds.alpha_upper[r];
    }
    let sides = [
        (
            "dl",
            lay.rate_dl(),
            lay.target_dl(),
            config.weight_dl,
            (bounds.rate_lower_dl, bounds.rate_upper_dl),
            (bounds.target_lower_dl, bounds.target_upper_dl),
        ),
        (
            "ul",
            lay.rate_ul(),
            lay.target_ul(),
            config.weight_ul,
            (bounds.rate_lower_ul, bounds.rate_upper_ul),
            (bounds.target_lower_ul, bounds.target_upper_ul),
        ),
    ];
    for (name, rate, target, weight, (rl, ru), (tl, tu)) in sides {
        let (Some(t), Some(tt)) = (rate, target) else { continue };
        p.names[t] = format!("t_{name}");
        p.names[tt] = format!("T_{name}");
        p.objective[t] = weight;
        p.lower[t] = rl;
        p.upper[t] = ru;
        p.lower[tt] = tl;
        p.upper[tt] = tu;
        p.constraints.push(Constraint::Exp2 { i: t, j: tt });
    }
    for (k, s) in dl.iter().enumerate() {
        let i = lay.slack_dl(k);
        p.names[i] = format!("phi_dl_{k}");
        p.upper[i] = bounds.slack_upper_dl[k];
        p.objective[i] = -state.lambda_dl;
        p.constraints.push(linearize_dl(k, s, state)?);
    }
    for (q, s) in ul.iter().enumerate() {
        let i = lay.slack_ul(q);
        p.names[i] = format!("phi_ul_{q}");
        p.upper[i] = bounds.slack_upper_ul[q];
        p.objective[i] = -state.lambda_ul;
        p.constraints.push(linearize_ul(q, s, state)?);
    }
    Ok(p)
}
