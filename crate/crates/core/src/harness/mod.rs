//! Monte Carlo campaigns over the four architectures.
//!
//! Every drop draws one geometry and one set of channels; all architectures
//! are evaluated on those same draws so comparisons are paired. Each random
//! purpose (geometry, direct links, repeater links, half-duplex arrays,
//! random gains) has its own ChaCha stream keyed by the drop seed, so adding
//! or removing an architecture never shifts another one's draws.

mod output;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamforming::build_beamformers;
use crate::channel::{sample_realization_split, ChannelRealization, RepeaterWeights};
use crate::error::{Error, Result};
use crate::performance::{evaluate_weights, gain_bounds, repeater_input_powers, DropPerformance, Duplex};
use crate::sca::{enforce_power_bounds, optimize, ScaSettings, TraceEntry};
use crate::scenario::{derive_fading, sample_geometry, LargeScaleFading, PathLossModel, ScenarioConfig};

pub use output::{
    cdf, mean, median, summarize, write_cdf, write_outputs, write_results_csv, ArchSummary, GainRatio, Summary,
    RESULTS_HEADER,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArchitectureKind {
    /// Repeaters with SCA-optimized gains, full duplex.
    RaFdOpt,
    /// Repeaters with uniformly random feasible gains, full duplex.
    RaFdRandom,
    /// Repeaters with a half-duplex BS that uses all its antennas in each phase.
    RaHd,
    /// Full-duplex massive MIMO without repeaters.
    FdMmimo,
}

/// How the half-duplex baseline sets its repeater gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HdWeightMode {
    #[default]
    Random,
    Optimized,
}

/// One architecture of a campaign. `hd_weight_mode` only matters for `RaHd`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ArchitectureSpec {
    pub kind: ArchitectureKind,
    pub hd_weight_mode: HdWeightMode,
}

impl ArchitectureSpec {
    pub const RA_FD_OPT: Self = Self::new(ArchitectureKind::RaFdOpt);
    pub const RA_FD_RANDOM: Self = Self::new(ArchitectureKind::RaFdRandom);
    pub const RA_HD: Self = Self::new(ArchitectureKind::RaHd);
    pub const RA_HD_OPT: Self = Self {
        kind: ArchitectureKind::RaHd,
        hd_weight_mode: HdWeightMode::Optimized,
    };
    pub const FD_MMIMO: Self = Self::new(ArchitectureKind::FdMmimo);

    pub const fn new(kind: ArchitectureKind) -> Self {
        Self {
            kind,
            hd_weight_mode: HdWeightMode::Random,
        }
    }

    /// The default campaign line-up.
    pub fn defaults() -> Vec<Self> {
        vec![Self::RA_FD_OPT, Self::RA_FD_RANDOM, Self::RA_HD, Self::FD_MMIMO]
    }

    /// Name used in result files.
    pub fn label(&self) -> &'static str {
        match (self.kind, self.hd_weight_mode) {
            (ArchitectureKind::RaFdOpt, _) => "RA-FD-OPT",
            (ArchitectureKind::RaFdRandom, _) => "RA-FD-RANDOM",
            (ArchitectureKind::RaHd, HdWeightMode::Random) => "RA-HD",
            (ArchitectureKind::RaHd, HdWeightMode::Optimized) => "RA-HD-OPT",
            (ArchitectureKind::FdMmimo, _) => "FD-mMIMO",
        }
    }

    /// Lower-case label, used in file names.
    pub fn slug(&self) -> String {
        self.label().to_ascii_lowercase()
    }

    pub fn duplex(&self) -> Duplex {
        match self.kind {
            ArchitectureKind::RaHd => Duplex::Half,
            _ => Duplex::Full,
        }
    }
}

impl fmt::Display for ArchitectureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ArchitectureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = [
            Self::RA_FD_OPT,
            Self::RA_FD_RANDOM,
            Self::RA_HD,
            Self::RA_HD_OPT,
            Self::FD_MMIMO,
        ];
        all.into_iter()
            .find(|a| a.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                let names: Vec<_> = all.iter().map(|a| a.slug()).collect();
                Error::InvalidConfig(format!(
                    "unknown architecture '{s}' (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

impl TryFrom<String> for ArchitectureSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ArchitectureSpec> for String {
    fn from(a: ArchitectureSpec) -> Self {
        a.slug()
    }
}

/// Stream identifiers of the per-drop ChaCha generator.
mod stream {
    pub const GEOMETRY: u64 = 0;
    pub const DIRECT: u64 = 1;
    pub const REPEATER: u64 = 2;
    pub const HD_DIRECT: u64 = 3;
    pub const HD_REPEATER: u64 = 4;
    pub const FD_RANDOM_GAINS: u64 = 5;
    pub const HD_RANDOM_GAINS: u64 = 6;
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of drop `drop`, redraw `attempt`, under `master`.
pub fn drop_seed(master: u64, drop: usize, attempt: usize) -> u64 {
    splitmix(master ^ splitmix(drop as u64) ^ splitmix((attempt as u64).rotate_left(32) ^ 0x5bd1_e995))
}

/// Config of the antenna-preserved half-duplex BS: both phases use all
/// `num_tx_antennas + num_rx_antennas` antennas.
pub fn hd_config(config: &ScenarioConfig) -> ScenarioConfig {
    let m = config.total_antennas();
    ScenarioConfig {
        num_tx_antennas: m,
        num_rx_antennas: m,
        ..config.clone()
    }
}

/// Everything drawn for one drop.
#[derive(Debug, Clone)]
pub struct DropContext {
    pub seed: u64,
    pub fading: LargeScaleFading,
    pub real: ChannelRealization,
    /// M-antenna channels of the half-duplex BS, drawn only when needed.
    pub hd_real: Option<ChannelRealization>,
}

/// Draws the geometry and channels of a drop from `seed`.
pub fn sample_drop(
    config: &ScenarioConfig,
    path_loss: &PathLossModel,
    seed: u64,
    with_hd: bool,
) -> Result<DropContext> {
    let geometry = sample_geometry(config, &mut stream_rng(seed, stream::GEOMETRY));
    let fading = derive_fading(&geometry, path_loss)?;
    let real = sample_realization_split(
        &fading,
        config,
        &mut stream_rng(seed, stream::DIRECT),
        &mut stream_rng(seed, stream::REPEATER),
    )?;
    let hd_real = if with_hd {
        Some(sample_realization_split(
            &fading,
            &hd_config(config),
            &mut stream_rng(seed, stream::HD_DIRECT),
            &mut stream_rng(seed, stream::HD_REPEATER),
        )?)
    } else {
        None
    };
    Ok(DropContext {
        seed,
        fading,
        real,
        hd_real,
    })
}

/// Optimizer statistics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSummary {
    pub converged: bool,
    pub iterations: usize,
    pub residual_slack: f64,
    pub initial_objective: f64,
    /// Empty unless traces were requested.
    pub trace: Vec<TraceEntry>,
}

/// Result of one architecture on one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchOutcome {
    pub arch: ArchitectureSpec,
    pub performance: DropPerformance,
    pub alpha: Vec<f64>,
    /// Ψ_ℓ at the final beamformers, in the architecture's duplex mode.
    pub repeater_input: Vec<f64>,
    pub optimizer: Option<OptimizerSummary>,
}

/// Gains `u_ℓ · min(α_max, sqrt(P_max/Ψ_ℓ))`, `u_ℓ ~ U[0, 1]`, with Ψ at the
/// α = 0 beamformers, then projected onto the true power bounds.
pub fn random_weights<R: Rng + ?Sized>(
    real: &ChannelRealization,
    fading: &LargeScaleFading,
    config: &ScenarioConfig,
    duplex: Duplex,
    rng: &mut R,
) -> Result<RepeaterWeights> {
    let bf0 = build_beamformers(real, &RepeaterWeights::zeros(real.num_repeaters()), fading)?;
    let psi = repeater_input_powers(real, &bf0, config, duplex);
    let alpha = gain_bounds(&psi, config)
        .into_iter()
        .map(|b| b * rng.random::<f64>())
        .collect();
    Ok(enforce_power_bounds(real, fading, config, duplex, RepeaterWeights(alpha))?.0)
}

/// Half-duplex evaluation: SI, UL→DL cross-link and repeater loopback are
/// absent because the phases are separated in time; each SE carries the 1/2
/// time-sharing factor. `real` decides the array sizes.
pub fn evaluate_hd(
    real: &ChannelRealization,
    fading: &LargeScaleFading,
    config: &ScenarioConfig,
    weights: &RepeaterWeights,
) -> Result<DropPerformance> {
    Ok(evaluate_weights(real, fading, weights, config, Duplex::Half)?.0)
}

fn finish(
    arch: ArchitectureSpec,
    real: &ChannelRealization,
    fading: &LargeScaleFading,
    config: &ScenarioConfig,
    weights: RepeaterWeights,
) -> Result<ArchOutcome> {
    let (performance, bf) = evaluate_weights(real, fading, &weights, config, arch.duplex())?;
    Ok(ArchOutcome {
        arch,
        performance,
        repeater_input: repeater_input_powers(real, &bf, config, arch.duplex()),
        alpha: weights.0,
        optimizer: None,
    })
}

fn optimized(
    arch: ArchitectureSpec,
    real: &ChannelRealization,
    fading: &LargeScaleFading,
    config: &ScenarioConfig,
    sca: &ScaSettings,
    keep_trace: bool,
) -> Result<ArchOutcome> {
    let duplex = arch.duplex();
    let res = optimize(real, fading, config, sca, duplex)?;
    Ok(ArchOutcome {
        arch,
        repeater_input: repeater_input_powers(real, &res.beamformers, config, duplex),
        performance: res.performance,
        alpha: res.alpha_star.0,
        optimizer: Some(OptimizerSummary {
            converged: res.converged,
            iterations: res.iterations,
            residual_slack: res.residual_slack,
            initial_objective: res.initial_objective,
            trace: if keep_trace { res.trace } else { Vec::new() },
        }),
    })
}

/// Evaluates one architecture on a drop.
pub fn run_architecture(
    ctx: &DropContext,
    arch: ArchitectureSpec,
    config: &ScenarioConfig,
    sca: &ScaSettings,
    keep_trace: bool,
) -> Result<ArchOutcome> {
    let (real, fading) = (&ctx.real, &ctx.fading);
    match arch.kind {
        ArchitectureKind::RaFdOpt => optimized(arch, real, fading, config, sca, keep_trace),
        ArchitectureKind::RaFdRandom => {
            let mut rng = stream_rng(ctx.seed, stream::FD_RANDOM_GAINS);
            let w = random_weights(real, fading, config, Duplex::Full, &mut rng)?;
            finish(arch, real, fading, config, w)
        }
        ArchitectureKind::FdMmimo => {
            let bare_real = real.truncate_repeaters(0);
            let bare_fading = fading.truncate_repeaters(0);
            finish(arch, &bare_real, &bare_fading, config, RepeaterWeights::zeros(0))
        }
        ArchitectureKind::RaHd => {
            let real = ctx
                .hd_real
                .as_ref()
                .ok_or_else(|| Error::InvalidState("drop sampled without half-duplex channels".into()))?;
            let cfg = hd_config(config);
            match arch.hd_weight_mode {
                HdWeightMode::Optimized => optimized(arch, real, fading, &cfg, sca, keep_trace),
                HdWeightMode::Random => {
                    let mut rng = stream_rng(ctx.seed, stream::HD_RANDOM_GAINS);
                    let w = random_weights(real, fading, &cfg, Duplex::Half, &mut rng)?;
                    finish(arch, real, fading, &cfg, w)
                }
            }
        }
    }
}

/// Campaign-level knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignSettings {
    pub drops: usize,
    /// Worker threads; 0 uses all available cores.
    pub jobs: usize,
    pub archs: Vec<ArchitectureSpec>,
    /// Redraws allowed per drop when ZF is ill-conditioned.
    pub max_redraws: usize,
    /// Keep per-iteration optimizer traces in the result.
    pub keep_traces: bool,
}

impl Default for CampaignSettings {
    fn default() -> Self {
        Self {
            drops: 200,
            jobs: 0,
            archs: ArchitectureSpec::defaults(),
            max_redraws: 20,
            keep_traces: false,
        }
    }
}

impl CampaignSettings {
    pub fn validate(&self) -> Result<()> {
        if self.drops == 0 {
            return Err(Error::InvalidConfig("campaign: drops must be at least 1".into()));
        }
        if self.archs.is_empty() {
            return Err(Error::InvalidConfig("campaign: no architectures selected".into()));
        }
        for (i, a) in self.archs.iter().enumerate() {
            if self.archs[..i].contains(a) {
                return Err(Error::InvalidConfig(format!("campaign: architecture {a} listed twice")));
            }
        }
        Ok(())
    }
}

/// One drop of a campaign; `outcomes` follows the campaign's architecture order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropRecord {
    pub drop: usize,
    pub seed: u64,
    /// Redraws caused by ill-conditioned ZF before this drop was accepted.
    pub redraws: usize,
    pub outcomes: Vec<ArchOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub config: ScenarioConfig,
    pub path_loss: PathLossModel,
    pub seed: u64,
    pub archs: Vec<ArchitectureSpec>,
    pub drops: Vec<DropRecord>,
}

/// Per-UE and per-drop values of one architecture, flattened over drops.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArchSeries {
    pub dl_se: Vec<f64>,
    pub ul_se: Vec<f64>,
    pub dl_sinr: Vec<f64>,
    pub ul_sinr: Vec<f64>,
    pub objective: Vec<f64>,
}

impl CampaignResult {
    pub fn num_drops(&self) -> usize {
        self.drops.len()
    }

    /// Total redraws over all drops.
    pub fn rejections(&self) -> usize {
        self.drops.iter().map(|d| d.redraws).sum()
    }

    pub fn arch_index(&self, arch: ArchitectureSpec) -> Option<usize> {
        self.archs.iter().position(|a| *a == arch)
    }

    pub fn outcomes(&self, index: usize) -> impl Iterator<Item = &ArchOutcome> {
        self.drops.iter().map(move |d| &d.outcomes[index])
    }

    pub fn series(&self, index: usize) -> ArchSeries {
        let mut s = ArchSeries::default();
        for o in self.outcomes(index) {
            let p = &o.performance;
            s.dl_se.extend(p.dl.iter().map(|b| b.se));
            s.dl_sinr.extend(p.dl.iter().map(|b| b.sinr));
            s.ul_se.extend(p.ul.iter().map(|b| b.se));
            s.ul_sinr.extend(p.ul.iter().map(|b| b.sinr));
            s.objective.push(p.objective);
        }
        s
    }
}

fn run_one_drop(
    config: &ScenarioConfig,
    path_loss: &PathLossModel,
    sca: &ScaSettings,
    campaign: &CampaignSettings,
    drop: usize,
) -> Result<DropRecord> {
    let with_hd = campaign.archs.iter().any(|a| a.kind == ArchitectureKind::RaHd);
    let mut last = None;
    for attempt in 0..=campaign.max_redraws {
        let seed = drop_seed(config.rng_seed, drop, attempt);
        let outcomes = sample_drop(config, path_loss, seed, with_hd).and_then(|ctx| {
            campaign
                .archs
                .iter()
                .map(|&a| run_architecture(&ctx, a, config, sca, campaign.keep_traces))
                .collect::<Result<Vec<_>>>()
        });
        match outcomes {
            Ok(outcomes) => {
                return Ok(DropRecord {
                    drop,
                    seed,
                    redraws: attempt,
                    outcomes,
                })
            }
            Err(e @ Error::IllConditioned { .. }) => {
                log::debug!("drop {drop} attempt {attempt} rejected: {e}");
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Runs `campaign.drops` paired drops. The result depends only on the
/// inputs, never on the number of workers.
pub fn run_campaign(
    config: &ScenarioConfig,
    path_loss: &PathLossModel,
    sca: &ScaSettings,
    campaign: &CampaignSettings,
) -> Result<CampaignResult> {
    config.validate()?;
    path_loss.validate()?;
    sca.validate()?;
    campaign.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(campaign.jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    let drops = pool.install(|| {
        (0..campaign.drops)
            .into_par_iter()
            .map(|d| run_one_drop(config, path_loss, sca, campaign, d))
            .collect::<Result<Vec<_>>>()
    })?;
    let result = CampaignResult {
        config: config.clone(),
        path_loss: *path_loss,
        seed: config.rng_seed,
        archs: campaign.archs.clone(),
        drops,
    };
    if result.rejections() > 0 {
        log::info!("{} ill-conditioned drops redrawn", result.rejections());
    }
    Ok(result)
}

#[cfg(test)]
mod tests;
