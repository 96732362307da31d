//! Repeater-gain optimization by successive convex approximation.
//!
//! The max-min fairness problem is put in epigraph form with rate variables
//! `t` and SINR targets `T ≤ 2^t − 1`. Each iteration linearizes the
//! `signal/T` terms at the current point, keeps the interference quadratic
//! exact, adds non-negative slacks with an escalating penalty, and solves the
//! resulting convex program. Beamformers stay frozen at the expansion point of
//! a run; the result is re-evaluated with freshly built ZF beamformers.

pub mod coefficients;
pub mod subproblem;

pub use coefficients::{
    compute_dl_coefficients, compute_ul_coefficients, DlCoefficients, SinrSurrogate, UlCoefficients,
};
pub use subproblem::{
    build_subproblem, linearize_dl, linearize_ul, subproblem_bounds, Layout, ScaState, SubproblemBounds,
};

use serde::{Deserialize, Serialize};

use crate::beamforming::{build_beamformers, BeamformingSolution};
use crate::channel::{ChannelRealization, RepeaterWeights};
use crate::convex::{self, SolverSettings};
use crate::error::{Error, Result};
use crate::performance::{evaluate_drop_mode, gain_bounds, repeater_input_powers, DropPerformance, Duplex};
use crate::scenario::{LargeScaleFading, ScenarioConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScaSettings {
    pub max_iterations: usize,
    /// Stop after `patience` consecutive iterations with a penalized-objective
    /// change at most this large.
    pub tolerance: f64,
    pub patience: usize,
    pub lambda_initial: f64,
    pub lambda_growth: f64,
    pub lambda_max: f64,
    /// A run counts as converged when its largest slack is at most this.
    pub slack_tolerance: f64,
    /// Relative decrease of the penalized objective tolerated before a step is rejected.
    pub monotone_tolerance: f64,
    /// Number of SCA runs, each re-freezing the beamformers at the best point so far.
    pub outer_iterations: usize,
    /// Starting points of a multi-start, each a fraction of the per-repeater
    /// gain bound. The best result over all starts and α = 0 is returned.
    pub initial_fractions: Vec<f64>,
    #[serde(skip)]
    pub solver: SolverSettings,
}

impl Default for ScaSettings {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-5,
            patience: 3,
            lambda_initial: 10.0,
            lambda_growth: 1.5,
            lambda_max: 1e4,
            slack_tolerance: 1e-5,
            monotone_tolerance: 1e-9,
            outer_iterations: 1,
            initial_fractions: vec![0.5, 0.05, 0.95],
            solver: SolverSettings::default(),
        }
    }
}

impl ScaSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("optimizer: {m}")));
        if self.max_iterations == 0 || self.patience == 0 || self.outer_iterations == 0 {
            return bad("iteration counts must be positive");
        }
        if !(self.tolerance >= 0.0 && self.slack_tolerance >= 0.0 && self.monotone_tolerance >= 0.0) {
            return bad("tolerances must be non-negative");
        }
        if !(self.lambda_initial > 0.0 && self.lambda_growth >= 1.0 && self.lambda_max >= self.lambda_initial) {
            return bad("penalty schedule needs lambda_initial > 0, growth >= 1, max >= initial");
        }
        if self.initial_fractions.is_empty() || !self.initial_fractions.iter().all(|f| *f > 0.0 && *f < 1.0) {
            return bad("initial_fractions must be non-empty with entries in (0, 1)");
        }
        Ok(())
    }
}

/// One row of the per-run optimizer trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub run: usize,
    pub iteration: usize,
    /// Previous iterate scored with this iteration's penalty.
    pub baseline_objective: f64,
    pub penalized_objective: f64,
    pub rate_objective: f64,
    pub max_slack: f64,
    pub lambda: f64,
    pub accepted: bool,
    pub newton_iterations: usize,
    /// Objective after power projection and ZF rebuild, when evaluable.
    pub true_objective: Option<f64>,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub alpha_star: RepeaterWeights,
    pub performance: DropPerformance,
    pub beamformers: BeamformingSolution,
    pub converged: bool,
    pub residual_slack: f64,
    pub iterations: usize,
    /// True objective at the initial point.
    pub initial_objective: f64,
    pub trace: Vec<TraceEntry>,
}

struct Evaluated {
    alpha: RepeaterWeights,
    bf: BeamformingSolution,
    perf: DropPerformance,
}

fn evaluate(
    real: &ChannelRealization,
    fading: &LargeScaleFading,
    config: &ScenarioConfig,
    duplex: Duplex,
    alpha: RepeaterWeights,
) -> Result<Evaluated> {
    let (alpha, bf) = enforce_power_bounds(real, fading, config, duplex, alpha)?;
    let perf = evaluate_drop_mode(real, &alpha, &bf, config, duplex)?;
    Ok(Evaluated { alpha, bf, perf })
}

/// Projects `alpha` onto `0 ≤ α_ℓ ≤ min(α_max, sqrt(P_max/Ψ_ℓ(α)))`, with Ψ
/// recomputed at the beamformers of the projected point. Returns the
/// compliant weights and their beamformers.
pub fn enforce_power_bounds(
    real: &ChannelRealization,
    fading: &LargeScaleFading,
    config: &ScenarioConfig,
    duplex: Duplex,
    alpha: RepeaterWeights,
) -> Result<(RepeaterWeights, BeamformingSolution)> {
    const SHRINK: f64 = 1.0 - 1e-9;
    let compliant = |a: &[f64], psi: &[f64]| {
        a.iter().zip(psi).all(|(a, p)| {
            *a >= 0.0 && *a <= config.repeater_max_gain && a * a * p <= config.repeater_max_power * (1.0 + 1e-8)
        })
    };
    let mut a: Vec<f64> = alpha.0.iter().map(|v| v.clamp(0.0, config.repeater_max_gain)).collect();
    for _ in 0..30 {
        let w = RepeaterWeights(a.clone());
        let bf = build_beamformers(real, &w, fading)?;
        let psi = repeater_input_powers(real, &bf, config, duplex);
        if compliant(&a, &psi) {
            return Ok((w, bf));
        }
        let ub = gain_bounds(&psi, config);
        for (v, u) in a.iter_mut().zip(&ub) {
            if *v > *u {
                *v = u * SHRINK;
            }
        }
    }
    // Fixed-point projection did not settle: shrink toward zero, which is always compliant.
    let mut scale = 0.5;
    loop {
        let w = RepeaterWeights(a.iter().map(|v| v * scale).collect());
        let bf = build_beamformers(real, &w, fading)?;
        let psi = repeater_input_powers(real, &bf, config, duplex);
        if compliant(&w.0, &psi) || scale < 1e-12 {
            let w = if compliant(&w.0, &psi) {
                w
            } else {
                RepeaterWeights::zeros(a.len())
            };
            let bf = build_beamformers(real, &w, fading)?;
            return Ok((w, bf));
        }
        scale *= 0.5;
    }
}

/// Gains `fraction · min(α_max, sqrt(P_max/Ψ_ℓ))` with Ψ at the α = 0 beamformers.
pub fn initial_weights(
    real: &ChannelRealization,
    fading: &LargeScaleFading,
    config: &ScenarioConfig,
    duplex: Duplex,
    fraction: f64,
) -> Result<RepeaterWeights> {
    let bf0 = build_beamformers(real, &RepeaterWeights::zeros(real.num_repeaters()), fading)?;
    let psi = repeater_input_powers(real, &bf0, config, duplex);
    Ok(RepeaterWeights(
        gain_bounds(&psi, config).iter().map(|b| b * fraction).collect(),
    ))
}

/// SINR surrogates and variable box with beamformers frozen at one point:
/// the nonconvex problem that one outer pass of CCP iterations solves.
#[derive(Debug, Clone)]
pub struct FrozenModel {
    pub dl: Vec<SinrSurrogate>,
    pub ul: Vec<SinrSurrogate>,
    pub bounds: SubproblemBounds,
}

impl FrozenModel {
    /// `ω_dl log2(1 + min_k SINR_k) + ω_ul log2(1 + min_q SINR_q)` on the surrogates.
    pub fn rate_objective(&self, alpha: &[f64], config: &ScenarioConfig) -> f64 {
        let side = |sur: &[SinrSurrogate], w: f64| {
            if sur.is_empty() {
                return 0.0;
            }
            let m = sur.iter().map(|x| x.sinr(alpha)).fold(f64::INFINITY, f64::min);
            w * (1.0 + m).log2()
        };
        side(&self.dl, config.weight_dl) + side(&self.ul, config.weight_ul)
    }
}

pub fn frozen_model(
    real: &ChannelRealization,
    fading: &LargeScaleFading,
    config: &ScenarioConfig,
    duplex: Duplex,
    bf: &BeamformingSolution,
) -> FrozenModel {
    let dc = compute_dl_coefficients(real, fading, bf, config, duplex);
    let uc = compute_ul_coefficients(real, fading, bf, config, duplex);
    let dl: Vec<_> = (0..real.num_dl()).map(|k| SinrSurrogate::dl(&dc, k, config)).collect();
    let ul: Vec<_> = (0..real.num_ul()).map(|q| SinrSurrogate::ul(&uc, q, config)).collect();
    let psi = repeater_input_powers(real, bf, config, duplex);
    let bounds = subproblem_bounds(&dl, &ul, gain_bounds(&psi, config), config);
    FrozenModel { dl, ul, bounds }
}

/// Start state at `alpha`: targets just below the current minimum SINR, rates
/// just below `log2(1 + T)`, slacks covering any QoS shortfall.
fn initial_state(alpha: &[f64], s: &FrozenModel, settings: &ScaSettings) -> ScaState {
    let b = &s.bounds;
    let side = |sur: &[SinrSurrogate], t_lo: f64, t_hi: f64, r_lo: f64| {
        if sur.is_empty() {
            return (0.0, 0.0, Vec::new());
        }
        let min_sinr = sur.iter().map(|x| x.sinr(alpha)).fold(f64::INFINITY, f64::min);
        let target = (min_sinr * (1.0 - 1e-6)).clamp(t_lo * (1.0 + 1e-6) + 1e-12, t_hi * (1.0 - 1e-6));
        let rate = ((1.0 + target).log2() * (1.0 - 1e-6)).max(r_lo + 1e-9 * (1.0 + r_lo.abs()));
        let target = target.max((rate.exp2() - 1.0) * (1.0 + 1e-9) + 1e-15);
        let slack = sur
            .iter()
            .map(|x| {
                let m = x.margin(alpha, target);
                (-m).max(0.0) + 1e-9 * (1.0 + x.interference(alpha))
            })
            .collect();
        (rate, target, slack)
    };
    let (t_dl, target_dl, slack_dl) = side(&s.dl, b.target_lower_dl, b.target_upper_dl, b.rate_lower_dl);
    let (t_ul, target_ul, slack_ul) = side(&s.ul, b.target_lower_ul, b.target_upper_ul, b.rate_lower_ul);
    ScaState {
        alpha_n: alpha.to_vec(),
        t_dl,
        t_ul,
        target_dl,
        target_ul,
        slack_dl,
        slack_ul,
        lambda_dl: settings.lambda_initial,
        lambda_ul: settings.lambda_initial,
        iteration: 0,
        objective_trace: Vec::new(),
    }
}

/// Warm start for the next subproblem: the current iterate moved strictly
/// inside the box, with slacks raised where the linearization requires it.
fn warm_start(state: &ScaState, program: &convex::ConvexProgram) -> Vec<f64> {
    let mut x = state.to_vector();
    for (i, v) in x.iter_mut().enumerate() {
        let (l, u) = (program.lower[i], program.upper[i]);
        // A pad relative to the value, not the box width: wide boxes must
        // not drag the point away from the expansion point.
        let pad = (1e-9 * (1.0 + v.abs())).min(0.25 * (u - l));
        *v = v.clamp(l + pad, u - pad);
    }
    // Clamping a target below its bound can break `2^t − 1 < T`; lower the rate.
    for row in &program.constraints {
        if let convex::Constraint::Exp2 { i, j } = *row {
            if row.value(&x) >= 0.0 {
                let t = (1.0 + x[j]).log2();
                x[i] = (t - 1e-9 * (1.0 + t.abs())).max(program.lower[i] + 0.5 * (t - program.lower[i]).max(0.0));
            }
        }
    }
    let lay = state.layout();
    let slack_index = |c: usize| {
        // Rows after the exp epigraphs follow DL then UL order.
        let first = program.constraints.len() - lay.num_dl - lay.num_ul;
        (c >= first).then(|| {
            let r = c - first;
            if r < lay.num_dl {
                lay.slack_dl(r)
            } else {
                lay.slack_ul(r - lay.num_dl)
            }
        })
    };
    for (c, row) in program.constraints.iter().enumerate() {
        if let Some(i) = slack_index(c) {
            let v = row.value(&x);
            if v >= 0.0 {
                x[i] += v + 1e-9 * (1.0 + x[i].abs());
                x[i] = x[i].min(program.upper[i] * (1.0 - 1e-12));
            }
        }
    }
    x
}

struct RunOutcome {
    state: ScaState,
    iterations: usize,
    /// The run ended because a subproblem had no strictly feasible start.
    stalled: bool,
}

#[allow(clippy::too_many_arguments)]
fn sca_run(
    real: &ChannelRealization,
    fading: &LargeScaleFading,
    config: &ScenarioConfig,
    duplex: Duplex,
    settings: &ScaSettings,
    sur: &FrozenModel,
    alpha0: &[f64],
    run: usize,
    best: &mut Evaluated,
    trace: &mut Vec<TraceEntry>,
) -> Result<RunOutcome> {
    let mut state = initial_state(alpha0, sur, settings);
    let mut streak = 0;
    let mut iterations = 0;
    for n in 0..settings.max_iterations {
        iterations = n + 1;
        state.iteration = n;
        let program = build_subproblem(&state, &sur.dl, &sur.ul, &sur.bounds, config)?;
        let x0 = warm_start(&state, &program);
        let report = match convex::solve(&program, Some(&x0), &settings.solver) {
            Ok(r) => r,
            Err(Error::InfeasibleStart(v)) => {
                // The previous iterate stays the answer of this run.
                log::warn!("run {run} iteration {n}: no strictly feasible start (violation {v:e}); stopping");
                return Ok(RunOutcome {
                    state,
                    iterations,
                    stalled: true,
                });
            }
            Err(e) => return Err(e),
        };

        let j_prev = state.penalized_objective(config);
        let mut candidate = state.clone();
        candidate.update_from(&report.x_star);
        let j_new = candidate.penalized_objective(config);
        let accepted = j_new >= j_prev - settings.monotone_tolerance * (1.0 + j_prev.abs());

        let mut true_objective = None;
        if accepted {
            if (j_new - j_prev).abs() <= settings.tolerance {
                streak += 1;
            } else {
                streak = 0;
            }
            state = candidate;
            state.objective_trace.push(j_new);
            if let Ok(e) = evaluate(real, fading, config, duplex, RepeaterWeights(state.alpha_n.clone())) {
                true_objective = Some(e.perf.objective);
                if e.perf.objective > best.perf.objective {
                    *best = e;
                }
            }
        } else {
            log::debug!("run {run} iteration {n}: rejected non-monotone step {j_prev:e} -> {j_new:e}");
            streak = 0;
        }
        trace.push(TraceEntry {
            run,
            iteration: n,
            baseline_objective: j_prev,
            penalized_objective: state.penalized_objective(config),
            rate_objective: state.rate_objective(config),
            max_slack: state.max_slack(),
            lambda: state.lambda_dl,
            accepted,
            newton_iterations: report.newton_iterations,
            true_objective,
            alpha: state.alpha_n.clone(),
        });
        if streak >= settings.patience {
            break;
        }
        state.lambda_dl = (state.lambda_dl * settings.lambda_growth).min(settings.lambda_max);
        state.lambda_ul = (state.lambda_ul * settings.lambda_growth).min(settings.lambda_max);
    }
    Ok(RunOutcome {
        state,
        iterations,
        stalled: false,
    })
}

/// Result of one outer pass on the model frozen at its start point.
#[derive(Debug, Clone)]
pub struct FrozenSolution {
    pub model: FrozenModel,
    /// Final CCP iterate, inside `model.bounds.alpha_upper`.
    pub alpha: RepeaterWeights,
    /// `model.rate_objective` at `alpha`.
    pub objective: f64,
    pub iterations: usize,
    pub stalled: bool,
}

/// Freezes the model at `init`, then runs CCP from `init` and from every
/// `settings.initial_fractions` point of the model's gain box. Returns the
/// best final iterate by frozen-model objective.
pub fn solve_frozen(
    real: &ChannelRealization,
    fading: &LargeScaleFading,
    config: &ScenarioConfig,
    settings: &ScaSettings,
    duplex: Duplex,
    init: RepeaterWeights,
) -> Result<FrozenSolution> {
    settings.validate()?;
    let start = evaluate(real, fading, config, duplex, init)?;
    let model = frozen_model(real, fading, config, duplex, &start.bf);
    let mut starts = vec![start.alpha.0.clone()];
    starts.extend(
        settings
            .initial_fractions
            .iter()
            .map(|f| model.bounds.alpha_upper.iter().map(|b| b * f).collect::<Vec<_>>()),
    );
    let mut best = Evaluated {
        alpha: start.alpha.clone(),
        bf: start.bf.clone(),
        perf: start.perf.clone(),
    };
    let mut trace = Vec::new();
    let mut answer: Option<FrozenSolution> = None;
    for (run, a0) in starts.iter().enumerate() {
        let out = sca_run(
            real, fading, config, duplex, settings, &model, a0, run, &mut best, &mut trace,
        )?;
        let alpha: Vec<f64> = out
            .state
            .alpha_n
            .iter()
            .zip(&model.bounds.alpha_upper)
            .map(|(a, b)| a.clamp(0.0, *b))
            .collect();
        let objective = model.rate_objective(&alpha, config);
        let iterations = answer.as_ref().map_or(0, |s| s.iterations) + out.iterations;
        let stalled = answer.as_ref().is_some_and(|s| s.stalled) || out.stalled;
        if answer.as_ref().is_none_or(|s| objective > s.objective) {
            answer = Some(FrozenSolution {
                model: model.clone(),
                alpha: RepeaterWeights(alpha),
                objective,
                iterations,
                stalled,
            });
        } else if let Some(s) = answer.as_mut() {
            s.iterations = iterations;
            s.stalled = stalled;
        }
    }
    Ok(answer.expect("at least one start"))
}

/// Optimizes the repeater gains of one drop with a multi-start over
/// `settings.initial_fractions`. The α = 0 point is kept as a candidate, so
/// the result is never worse than switching the repeaters off.
pub fn optimize(
    real: &ChannelRealization,
    fading: &LargeScaleFading,
    config: &ScenarioConfig,
    settings: &ScaSettings,
    duplex: Duplex,
) -> Result<OptimizationResult> {
    settings.validate()?;
    let mut best: Option<OptimizationResult> = None;
    let mut trace = Vec::new();
    let mut iterations = 0;
    for &fraction in &settings.initial_fractions {
        let init = initial_weights(real, fading, config, duplex, fraction)?;
        let mut res = optimize_from(real, fading, config, settings, duplex, init)?;
        let offset = trace.last().map_or(0, |t: &TraceEntry| t.run + 1);
        trace.extend(res.trace.drain(..).map(|t| TraceEntry {
            run: t.run + offset,
            ..t
        }));
        iterations += res.iterations;
        if best
            .as_ref()
            .is_none_or(|b| res.performance.objective > b.performance.objective)
        {
            best = Some(res);
        }
    }
    let mut best = best.expect("at least one start");
    let zero = evaluate(
        real,
        fading,
        config,
        duplex,
        RepeaterWeights::zeros(real.num_repeaters()),
    )?;
    if zero.perf.objective > best.performance.objective {
        best.alpha_star = zero.alpha;
        best.performance = zero.perf;
        best.beamformers = zero.bf;
    }
    best.trace = trace;
    best.iterations = iterations;
    Ok(best)
}

/// Optimizes the repeater gains of one drop starting from `init`.
pub fn optimize_from(
    real: &ChannelRealization,
    fading: &LargeScaleFading,
    config: &ScenarioConfig,
    settings: &ScaSettings,
    duplex: Duplex,
    init: RepeaterWeights,
) -> Result<OptimizationResult> {
    settings.validate()?;
    if init.len() != real.num_repeaters() {
        return Err(Error::DimensionMismatch(format!(
            "{} initial weights for {} repeaters",
            init.len(),
            real.num_repeaters()
        )));
    }
    let start = evaluate(real, fading, config, duplex, init)?;
    let initial_objective = start.perf.objective;
    let nothing_to_do = real.num_repeaters() == 0 || (real.num_dl() == 0 && real.num_ul() == 0);
    if nothing_to_do {
        return Ok(OptimizationResult {
            alpha_star: start.alpha,
            performance: start.perf,
            beamformers: start.bf,
            converged: true,
            residual_slack: 0.0,
            iterations: 0,
            initial_objective,
            trace: Vec::new(),
        });
    }

    let mut best = Evaluated {
        alpha: start.alpha.clone(),
        bf: start.bf.clone(),
        perf: start.perf.clone(),
    };
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut last = None;
    let mut stalled = false;
    let mut from = start;
    for run in 0..settings.outer_iterations {
        let before = best.perf.objective;
        let model = frozen_model(real, fading, config, duplex, &from.bf);
        let out = sca_run(
            real,
            fading,
            config,
            duplex,
            settings,
            &model,
            &from.alpha.0,
            run,
            &mut best,
            &mut trace,
        )?;
        iterations += out.iterations;
        stalled |= out.stalled;
        last = Some(out.state);
        if run + 1 < settings.outer_iterations {
            if best.perf.objective <= before {
                break;
            }
            from = Evaluated {
                alpha: best.alpha.clone(),
                bf: best.bf.clone(),
                perf: best.perf.clone(),
            };
        }
    }
    let residual_slack = last.as_ref().map_or(0.0, ScaState::max_slack);
    Ok(OptimizationResult {
        alpha_star: best.alpha,
        performance: best.perf,
        beamformers: best.bf,
        converged: !stalled && residual_slack <= settings.slack_tolerance,
        residual_slack,
        iterations,
        initial_objective,
        trace,
    })
}
