//! Oracle suites that cross-check the analytic models and solvers against
//! independent references: Monte Carlo SINR, exhaustive grid search over
//! repeater gains, and closed-form or grid optima of random convex programs.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::beamforming::build_beamformers;
use crate::channel::RepeaterWeights;
use crate::convex::{solve, Constraint, ConvexProgram, SolverSettings};
use crate::error::Result;
use crate::harness::{drop_seed, random_weights, sample_drop};
use crate::performance::{dl_sinr, empirical_sinr, ul_sinr, Duplex, LinkTarget};
use crate::sca::{initial_weights, optimize, solve_frozen, FrozenModel, ScaSettings};
use crate::scenario::{PathLossModel, ScenarioConfig};

/// Outcome of one suite.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub failures: usize,
    /// Worst observed value of the suite's figure of merit.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
    pub elapsed: Duration,
}

impl SuiteReport {
    fn new(
        name: &str,
        cases: usize,
        failures: usize,
        worst: f64,
        tolerance: f64,
        detail: String,
        start: Instant,
    ) -> Self {
        Self {
            name: name.to_string(),
            passed: failures == 0 && cases > 0,
            cases,
            failures,
            worst,
            tolerance,
            detail,
            elapsed: start.elapsed(),
        }
    }
}

/// Analytic DL/UL SINR against the symbol-level Monte Carlo estimate.
#[derive(Debug, Clone)]
pub struct SinrOracleParams {
    pub drops: usize,
    pub samples: usize,
    /// Allowed deviation in standard errors.
    pub sigmas: f64,
    pub seed: u64,
}

impl Default for SinrOracleParams {
    fn default() -> Self {
        Self {
            drops: 20,
            samples: 1_000_000,
            sigmas: 3.0,
            seed: 1,
        }
    }
}

/// Scenario used by the SINR oracle: L = 4, K = 2 + 2, Mt = Mr = 8.
pub fn sinr_oracle_config() -> ScenarioConfig {
    ScenarioConfig {
        num_tx_antennas: 8,
        num_rx_antennas: 8,
        num_dl_ues: 2,
        num_ul_ues: 2,
        num_repeaters: 4,
        ..ScenarioConfig::default()
    }
}

pub fn sinr_oracle_suite(params: &SinrOracleParams) -> Result<SuiteReport> {
    let start = Instant::now();
    let cfg = sinr_oracle_config();
    let pl = PathLossModel::default();
    let (mut cases, mut failures, mut worst, mut worst_rel) = (0, 0, 0.0_f64, 0.0_f64);
    for d in 0..params.drops {
        let seed = drop_seed(params.seed, d, 0);
        let ctx = sample_drop(&cfg, &pl, seed, false)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_weights(&ctx.real, &ctx.fading, &cfg, Duplex::Full, &mut rng)?;
        let bf = build_beamformers(&ctx.real, &w, &ctx.fading)?;
        let links = (0..cfg.num_dl_ues)
            .map(LinkTarget::Dl)
            .chain((0..cfg.num_ul_ues).map(LinkTarget::Ul));
        for link in links {
            let analytic = match link {
                LinkTarget::Dl(k) => dl_sinr(k, &ctx.real, &w, &bf, &cfg)?.sinr,
                LinkTarget::Ul(q) => ul_sinr(q, &ctx.real, &w, &bf, &cfg)?.sinr,
            };
            let e = empirical_sinr(link, &ctx.real, &w, &bf, &cfg, params.samples, &mut rng)?;
            let z = (analytic - e.sinr).abs() / e.std_error;
            cases += 1;
            worst = worst.max(z);
            worst_rel = worst_rel.max((analytic - e.sinr).abs() / analytic);
            if !(z <= params.sigmas) {
                failures += 1;
            }
        }
    }
    let detail = format!(
        "{cases} links over {} drops at {} samples; worst {worst:.2} standard errors, worst relative gap {:.2}%",
        params.drops,
        params.samples,
        100.0 * worst_rel
    );
    Ok(SuiteReport::new(
        "sinr-oracle",
        cases,
        failures,
        worst,
        params.sigmas,
        detail,
        start,
    ))
}

/// SCA result against an exhaustive grid over two repeater gains, both on
/// the model with beamformers frozen at the start point.
#[derive(Debug, Clone)]
pub struct GridOracleParams {
    pub drops: usize,
    /// Grid points per axis, spanning `[0, bound]`.
    pub points: usize,
    /// Allowed shortfall of the SCA objective below the grid optimum.
    pub shortfall: f64,
    /// Allowed excess of the SCA objective above the grid optimum.
    pub excess: f64,
    pub seed: u64,
    pub optimizer: ScaSettings,
}

impl Default for GridOracleParams {
    fn default() -> Self {
        Self {
            drops: 20,
            points: 1001,
            shortfall: 1e-2,
            excess: 1e-3,
            seed: 2,
            optimizer: ScaSettings::default(),
        }
    }
}

/// Scenario of the grid oracle: L = 2, K = 1 + 1, Mt = Mr = 4.
pub fn grid_oracle_config() -> ScenarioConfig {
    ScenarioConfig {
        num_tx_antennas: 4,
        num_rx_antennas: 4,
        num_dl_ues: 1,
        num_ul_ues: 1,
        num_repeaters: 2,
        ..ScenarioConfig::default()
    }
}

/// Best frozen-model objective over a `points × points` grid on the model's
/// gain box. Returns the objective and its gains.
pub fn grid_optimum(model: &FrozenModel, config: &ScenarioConfig, points: usize) -> (f64, [f64; 2]) {
    let b = &model.bounds.alpha_upper;
    let steps = (points.max(2) - 1) as f64;
    let mut best = (f64::NEG_INFINITY, [0.0; 2]);
    for i in 0..points {
        for j in 0..points {
            let a = [b[0] * i as f64 / steps, b[1] * j as f64 / steps];
            let v = model.rate_objective(&a, config);
            if v > best.0 {
                best = (v, a);
            }
        }
    }
    best
}

/// Compares one CCP pass from the default start with the grid optimum of the
/// same frozen model. The rebuilt-beamformer objective
/// of the full optimizer is reported alongside but not scored.
pub fn optimizer_grid_suite(params: &GridOracleParams) -> Result<SuiteReport> {
    let start = Instant::now();
    let cfg = grid_oracle_config();
    let pl = PathLossModel::default();
    let sca = &params.optimizer;
    let fraction = sca.initial_fractions[0];
    let (mut failures, mut worst_short, mut worst_excess) = (0, 0.0_f64, 0.0_f64);
    let (mut rebuilt, mut switched_off) = (0.0, 0.0);
    for d in 0..params.drops {
        let ctx = sample_drop(&cfg, &pl, drop_seed(params.seed, d, 0), false)?;
        let init = initial_weights(&ctx.real, &ctx.fading, &cfg, Duplex::Full, fraction)?;
        let frozen = solve_frozen(&ctx.real, &ctx.fading, &cfg, sca, Duplex::Full, init)?;
        let (grid, grid_alpha) = grid_optimum(&frozen.model, &cfg, params.points);
        let gap = grid - frozen.objective;
        worst_short = worst_short.max(gap);
        worst_excess = worst_excess.max(-gap);
        if gap > params.shortfall || -gap > params.excess {
            failures += 1;
            log::warn!(
                "grid drop {d}: sca {:.6} at {:?}, grid {grid:.6} at {grid_alpha:?}",
                frozen.objective,
                frozen.alpha.as_slice()
            );
        }
        let full = optimize(&ctx.real, &ctx.fading, &cfg, sca, Duplex::Full)?;
        rebuilt += full.performance.objective;
        let zero = RepeaterWeights::zeros(cfg.num_repeaters);
        switched_off += crate::performance::evaluate_weights(&ctx.real, &ctx.fading, &zero, &cfg, Duplex::Full)?
            .0
            .objective;
    }
    let detail = format!(
        "{} drops, {}x{} grid; worst shortfall {worst_short:.2e} (tol {:.0e}), worst excess {worst_excess:.2e} (tol {:.0e}); \
         mean rebuilt-beamformer objective {:.3} vs {:.3} at α = 0",
        params.drops,
        params.points,
        params.points,
        params.shortfall,
        params.excess,
        rebuilt / params.drops as f64,
        switched_off / params.drops as f64
    );
    Ok(SuiteReport::new(
        "optimizer-grid",
        params.drops,
        failures,
        worst_short.max(worst_excess),
        params.shortfall,
        detail,
        start,
    ))
}

/// Random convex programs with closed-form or grid optima.
#[derive(Debug, Clone)]
pub struct SolverOracleParams {
    pub instances: usize,
    pub objective_tolerance: f64,
    pub residual_tolerance: f64,
    pub seed: u64,
}

impl Default for SolverOracleParams {
    fn default() -> Self {
        Self {
            instances: 100,
            objective_tolerance: 5e-4,
            residual_tolerance: 1e-8,
            seed: 3,
        }
    }
}

/// A generated instance and its reference optimum.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub family: &'static str,
    pub program: ConvexProgram,
    pub optimum: f64,
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn random_psd<R: Rng + ?Sized>(n: usize, floor: f64, rng: &mut R) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, n, |_, _| gaussian(rng));
    b.transpose() * b * (1.0 / n as f64) + DMatrix::identity(n, n) * floor
}

/// Maximize `c·x` over a box cut by random convex quadratics that are
/// strictly feasible at a random point. Two variables, so a grid applies.
pub fn random_qcqp<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ConvexProgram {
    let mut p = ConvexProgram::new(vec![-2.0; n], vec![2.0; n]);
    p.objective = (0..n).map(|_| gaussian(rng)).collect();
    let xf = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    for _ in 0..rng.random_range(1..=3) {
        let q = random_psd(n, 0.1, rng);
        let g: Vec<f64> = (0..n).map(|_| gaussian(rng)).collect();
        let at = xf.dot(&(&q * &xf)) + g.iter().zip(xf.iter()).map(|(a, b)| a * b).sum::<f64>();
        let margin = rng.random_range(0.2..1.5);
        p.constraints.push(Constraint::Quadratic { q, g, b: at + margin });
    }
    p
}

/// Best objective over the feasible points of a grid, refined by zooming
/// around the incumbent.
pub fn grid_maximum_2d(p: &ConvexProgram) -> Option<f64> {
    let feasible = |x: &[f64]| p.constraints.iter().all(|c| c.value(x) <= 0.0);
    let (mut lo, mut hi) = ([p.lower[0], p.lower[1]], [p.upper[0], p.upper[1]]);
    let n = 400;
    let mut best: Option<(f64, [f64; 2])> = None;
    for _ in 0..5 {
        let h = [(hi[0] - lo[0]) / n as f64, (hi[1] - lo[1]) / n as f64];
        for i in 0..=n {
            for j in 0..=n {
                let x = [lo[0] + h[0] * i as f64, lo[1] + h[1] * j as f64];
                if feasible(&x) {
                    let v = p.objective_value(&x);
                    if best.is_none_or(|(b, _)| v > b) {
                        best = Some((v, x));
                    }
                }
            }
        }
        let (_, x) = best?;
        for k in 0..2 {
            lo[k] = (x[k] - 8.0 * h[k]).max(p.lower[k]);
            hi[k] = (x[k] + 8.0 * h[k]).min(p.upper[k]);
        }
    }
    best.map(|(v, _)| v)
}

/// Maximize `c·x` over an ellipsoid inside a wide box:
/// optimum `c·x₀ + r·sqrt(cᵀA⁻¹c)`.
pub fn random_ellipsoid<R: Rng + ?Sized>(n: usize, rng: &mut R) -> OracleInstance {
    let a = random_psd(n, 0.5, rng);
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let r: f64 = rng.random_range(0.5..2.0);
    let c = DVector::from_fn(n, |_, _| gaussian(rng));
    let ainv_c = a.clone().cholesky().expect("positive definite").solve(&c);
    let optimum = c.dot(&x0) + r * c.dot(&ainv_c).sqrt();
    let g = (&a * &x0) * -2.0;
    let b = r * r - x0.dot(&(&a * &x0));
    let mut p = ConvexProgram::new(vec![-10.0; n], vec![10.0; n]);
    p.objective = c.iter().copied().collect();
    p.constraints.push(Constraint::Quadratic {
        q: a,
        g: g.iter().copied().collect(),
        b,
    });
    OracleInstance {
        family: "ellipsoid",
        program: p,
        optimum,
    }
}

/// Weighted rate allocation `max Σ w_i log2(1 + a_i p_i)`, `Σ p_i ≤ P`,
/// posed with epigraph variables `2^{t_i} − 1 ≤ T_i = a_i p_i`. The
/// reference optimum is water-filling with a bisected water level.
pub fn random_waterfilling<R: Rng + ?Sized>(channels: usize, rng: &mut R) -> OracleInstance {
    let w: Vec<f64> = (0..channels).map(|_| rng.random_range(0.5..2.0)).collect();
    let a: Vec<f64> = (0..channels).map(|_| 10f64.powf(rng.random_range(-1.0..1.5))).collect();
    let power: f64 = rng.random_range(0.5..5.0);
    let ln2 = std::f64::consts::LN_2;
    let alloc = |nu: f64| -> Vec<f64> {
        (0..channels)
            .map(|i| (w[i] / (nu * ln2) - 1.0 / a[i]).max(0.0))
            .collect()
    };
    let (mut lo, mut hi) = (1e-12_f64, 1e6_f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if alloc(mid).iter().sum::<f64>() > power {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p_star = alloc(hi);
    let optimum = (0..channels).map(|i| w[i] * (1.0 + a[i] * p_star[i]).log2()).sum();

    // Variables: t_0..t_{n-1}, T_0..T_{n-1}.
    let n = 2 * channels;
    let mut lower = vec![-1.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..channels {
        upper[i] = (1.0 + a[i] * power).log2() + 1.0;
        lower[channels + i] = 0.0;
        upper[channels + i] = a[i] * power * 1.5;
    }
    let mut p = ConvexProgram::new(lower, upper);
    for i in 0..channels {
        p.objective[i] = w[i];
        p.constraints.push(Constraint::Exp2 { i, j: channels + i });
    }
    let mut budget = vec![0.0; n];
    for i in 0..channels {
        budget[channels + i] = 1.0 / a[i];
    }
    p.constraints.push(Constraint::Affine { a: budget, b: power });
    OracleInstance {
        family: "waterfilling",
        program: p,
        optimum,
    }
}

/// Instance `index` of the certification set: cycles through the three
/// families with sizes up to ten variables.
pub fn oracle_instance<R: Rng + ?Sized>(index: usize, rng: &mut R) -> OracleInstance {
    match index % 3 {
        0 => {
            let program = random_qcqp(2, rng);
            let optimum = grid_maximum_2d(&program).expect("feasible by construction");
            OracleInstance {
                family: "qcqp-grid",
                program,
                optimum,
            }
        }
        1 => random_ellipsoid(rng.random_range(2..=10), rng),
        _ => random_waterfilling(rng.random_range(1..=5), rng),
    }
}

pub fn solver_oracle_suite(params: &SolverOracleParams) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let settings = SolverSettings::default();
    let (mut failures, mut worst_gap, mut worst_residual) = (0, 0.0_f64, f64::NEG_INFINITY);
    for i in 0..params.instances {
        let inst = oracle_instance(i, &mut rng);
        let report = solve(&inst.program, None, &settings)?;
        let residual = inst.program.max_violation(&report.x_star);
        let gap = (report.objective_value - inst.optimum).abs();
        worst_gap = worst_gap.max(gap);
        worst_residual = worst_residual.max(residual);
        if !(gap <= params.objective_tolerance && residual <= params.residual_tolerance) {
            failures += 1;
            log::warn!(
                "{} instance {i}: solver {:.8} vs oracle {:.8}, residual {residual:e}",
                inst.family,
                report.objective_value,
                inst.optimum
            );
        }
    }
    let detail = format!(
        "{} instances; worst objective gap {worst_gap:.2e} (tol {:.0e}), worst residual {worst_residual:.2e} (tol {:.0e})",
        params.instances, params.objective_tolerance, params.residual_tolerance
    );
    Ok(SuiteReport::new(
        "solver-oracle",
        params.instances,
        failures,
        worst_gap,
        params.objective_tolerance,
        detail,
        start,
    ))
}
