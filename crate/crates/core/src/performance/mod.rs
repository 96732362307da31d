//! Analytical DL/UL SINR and spectral efficiency for a given weight vector and
//! beamformer set, plus the repeater input power Ψ_ℓ.

mod empirical;

pub use empirical::{empirical_sinr, EmpiricalSinr, LinkTarget, MIN_EMPIRICAL_SAMPLES};

use serde::{Deserialize, Serialize};

use crate::beamforming::{build_beamformers, inner, BeamformingSolution};
use crate::channel::{ChannelRealization, RepeaterWeights, C64};
use crate::error::{Error, Result};
use crate::scenario::{LargeScaleFading, ScenarioConfig};

/// Which interference couplings are active.
///
/// Half-duplex time-shares UL and DL, so the UL→DL cross-link, residual SI
/// and DL loopback through repeaters all vanish.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Duplex {
    Full,
    Half,
}

impl Duplex {
    /// Fraction of time each direction is active.
    pub fn prelog(self) -> f64 {
        match self {
            Duplex::Full => 1.0,
            Duplex::Half => 0.5,
        }
    }
}

/// Received powers at one UE or BS combiner output, in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrBreakdown {
    pub signal: f64,
    pub inter_user: f64,
    /// UL→DL cross-link on the DL side; SI plus repeater loopback on the UL side.
    pub cross_link_or_si: f64,
    pub repeater_noise: f64,
    pub thermal_noise: f64,
    pub sinr: f64,
    pub prelog: f64,
    pub se: f64,
}

impl SinrBreakdown {
    fn new(signal: f64, terms: [f64; 4], prelog: f64) -> Self {
        let [inter_user, cross_link_or_si, repeater_noise, thermal_noise] = terms;
        let denom = inter_user + cross_link_or_si + repeater_noise + thermal_noise;
        let sinr = signal / denom;
        Self {
            signal,
            inter_user,
            cross_link_or_si,
            repeater_noise,
            thermal_noise,
            sinr,
            prelog,
            se: prelog * (1.0 + sinr).log2(),
        }
    }

    pub fn interference_terms(&self) -> [(&'static str, f64); 4] {
        [
            ("inter_user", self.inter_user),
            ("cross_link_or_si", self.cross_link_or_si),
            ("repeater_noise", self.repeater_noise),
            ("thermal_noise", self.thermal_noise),
        ]
    }

    pub fn interference_plus_noise(&self) -> f64 {
        self.interference_terms().iter().map(|(_, v)| v).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropPerformance {
    pub dl: Vec<SinrBreakdown>,
    pub ul: Vec<SinrBreakdown>,
    pub min_dl_se: f64,
    pub min_ul_se: f64,
    /// `ω_dl · min_k SE_k^dl + ω_ul · min_q SE_q^ul`.
    pub objective: f64,
}

impl DropPerformance {
    pub fn from_breakdowns(dl: Vec<SinrBreakdown>, ul: Vec<SinrBreakdown>, config: &ScenarioConfig) -> Self {
        let min = |v: &[SinrBreakdown]| {
            if v.is_empty() {
                0.0
            } else {
                v.iter().map(|b| b.se).fold(f64::INFINITY, f64::min)
            }
        };
        let min_dl_se = min(&dl);
        let min_ul_se = min(&ul);
        Self {
            objective: config.weight_dl * min_dl_se + config.weight_ul * min_ul_se,
            dl,
            ul,
            min_dl_se,
            min_ul_se,
        }
    }
}

fn check_index(i: usize, len: usize) -> Result<()> {
    if i >= len {
        return Err(Error::IndexOutOfRange { index: i, len });
    }
    Ok(())
}

/// UL→DL cross-link amplitude `h_qk + Σ_ℓ α_ℓ h_ℓk^RD h_qℓ^UR`.
pub fn cross_link_gain(real: &ChannelRealization, weights: &RepeaterWeights, q: usize, k: usize) -> C64 {
    let mut g = real.h_uu[q][k];
    for (l, &a) in weights.as_slice().iter().enumerate() {
        g += real.h_rd[l][k] * real.h_ur[q][l] * a;
    }
    g
}

/// DL SINR of UE `k` with the given duplexing mode.
pub fn dl_sinr_mode(
    k: usize,
    real: &ChannelRealization,
    weights: &RepeaterWeights,
    bf: &BeamformingSolution,
    config: &ScenarioConfig,
    duplex: Duplex,
) -> Result<SinrBreakdown> {
    check_index(k, real.num_dl())?;
    let h = real.compound_dl(weights, k)?;
    let rho = config.dl_power;
    let sigma2 = config.noise_power;

    let signal = config.eta(k) * rho * inner(&h, &bf.v[k]).norm_sqr();
    let inter_user = rho
        * (0..real.num_dl())
            .filter(|&kp| kp != k)
            .map(|kp| config.eta(kp) * inner(&h, &bf.v[kp]).norm_sqr())
            .sum::<f64>();
    let cross = match duplex {
        Duplex::Full => {
            config.ul_power
                * (0..real.num_ul())
                    .map(|q| cross_link_gain(real, weights, q, k).norm_sqr())
                    .sum::<f64>()
        }
        Duplex::Half => 0.0,
    };
    let repeater_noise = sigma2
        * weights
            .as_slice()
            .iter()
            .enumerate()
            .map(|(l, &a)| (real.h_rd[l][k] * a).norm_sqr())
            .sum::<f64>();
    Ok(SinrBreakdown::new(
        signal,
        [inter_user, cross, repeater_noise, sigma2],
        duplex.prelog(),
    ))
}

/// Amplitude at the output of combiner `q` of the DL symbol for UE `k` leaking
/// back through the residual SI channel and every repeater loopback
/// `h_ℓ^RB h_ℓ^BR^T`.
///
/// All these copies carry the same symbol, so they add coherently.
pub fn loopback_gain(
    real: &ChannelRealization,
    weights: &RepeaterWeights,
    bf: &BeamformingSolution,
    config: &ScenarioConfig,
    q: usize,
    k: usize,
) -> C64 {
    let w = &bf.w[q];
    let v = &bf.v[k];
    let mut g = inner(w, &(&real.h_si * v)) * config.si_attenuation;
    for (l, &a) in weights.as_slice().iter().enumerate() {
        g += inner(w, &real.h_rb[l]) * real.h_br[l].dot(v) * a;
    }
    g
}

/// UL SINR of UE `q` with the given duplexing mode.
pub fn ul_sinr_mode(
    q: usize,
    real: &ChannelRealization,
    weights: &RepeaterWeights,
    bf: &BeamformingSolution,
    config: &ScenarioConfig,
    duplex: Duplex,
) -> Result<SinrBreakdown> {
    check_index(q, real.num_ul())?;
    let w = &bf.w[q];
    let rho_ul = config.ul_power;
    let sigma2 = config.noise_power;
    let h = real.compound_ul(weights, q)?;

    let signal = rho_ul * inner(w, &h).norm_sqr();
    let inter_user = rho_ul
        * (0..real.num_ul())
            .filter(|&qp| qp != q)
            .map(|qp| real.compound_ul(weights, qp).map(|hq| inner(w, &hq).norm_sqr()))
            .sum::<Result<f64>>()?;
    let loopback = match duplex {
        Duplex::Full => {
            config.dl_power
                * (0..real.num_dl())
                    .map(|k| config.eta(k) * loopback_gain(real, weights, bf, config, q, k).norm_sqr())
                    .sum::<f64>()
        }
        Duplex::Half => 0.0,
    };
    let repeater_noise = sigma2
        * weights
            .as_slice()
            .iter()
            .enumerate()
            .map(|(l, &a)| (inner(w, &real.h_rb[l]) * a).norm_sqr())
            .sum::<f64>();
    let thermal = sigma2 * w.norm_squared();
    Ok(SinrBreakdown::new(
        signal,
        [inter_user, loopback, repeater_noise, thermal],
        duplex.prelog(),
    ))
}

pub fn dl_sinr(
    k: usize,
    real: &ChannelRealization,
    weights: &RepeaterWeights,
    bf: &BeamformingSolution,
    config: &ScenarioConfig,
) -> Result<SinrBreakdown> {
    dl_sinr_mode(k, real, weights, bf, config, Duplex::Full)
}

pub fn ul_sinr(
    q: usize,
    real: &ChannelRealization,
    weights: &RepeaterWeights,
    bf: &BeamformingSolution,
    config: &ScenarioConfig,
) -> Result<SinrBreakdown> {
    ul_sinr_mode(q, real, weights, bf, config, Duplex::Full)
}

/// Total power received by repeater ℓ:
/// `Ψ_ℓ = ρ_ul Σ_q |h_qℓ^UR|² + ρ_dl Σ_k η_k |h_ℓ^BR^T v_k|² + σ²`.
pub fn repeater_input_power(
    l: usize,
    real: &ChannelRealization,
    bf: &BeamformingSolution,
    config: &ScenarioConfig,
) -> Result<f64> {
    check_index(l, real.num_repeaters())?;
    let (ul, dl) = repeater_input_parts(l, real, bf, config);
    Ok(ul + dl + config.noise_power)
}

/// UL-UE and BS contributions to Ψ_ℓ, without the noise floor.
pub fn repeater_input_parts(
    l: usize,
    real: &ChannelRealization,
    bf: &BeamformingSolution,
    config: &ScenarioConfig,
) -> (f64, f64) {
    let ul = config.ul_power * real.h_ur.iter().map(|row| row[l].norm_sqr()).sum::<f64>();
    let dl = config.dl_power
        * bf.v
            .iter()
            .enumerate()
            .map(|(k, v)| config.eta(k) * real.h_br[l].dot(v).norm_sqr())
            .sum::<f64>();
    (ul, dl)
}

/// Ψ_ℓ for every repeater under the given duplexing mode. In half duplex the
/// repeater sees the DL and UL phases separately; the larger phase power sets
/// the output-power constraint.
pub fn repeater_input_powers(
    real: &ChannelRealization,
    bf: &BeamformingSolution,
    config: &ScenarioConfig,
    duplex: Duplex,
) -> Vec<f64> {
    (0..real.num_repeaters())
        .map(|l| {
            let (ul, dl) = repeater_input_parts(l, real, bf, config);
            match duplex {
                Duplex::Full => ul + dl + config.noise_power,
                Duplex::Half => ul.max(dl) + config.noise_power,
            }
        })
        .collect()
}

/// Per-repeater upper bound `min(α_max, sqrt(P_max / Ψ_ℓ))`.
pub fn gain_bounds(psi: &[f64], config: &ScenarioConfig) -> Vec<f64> {
    psi.iter()
        .map(|&p| config.repeater_max_gain.min((config.repeater_max_power / p).sqrt()))
        .collect()
}

pub fn evaluate_drop_mode(
    real: &ChannelRealization,
    weights: &RepeaterWeights,
    bf: &BeamformingSolution,
    config: &ScenarioConfig,
    duplex: Duplex,
) -> Result<DropPerformance> {
    let dl = (0..real.num_dl())
        .map(|k| dl_sinr_mode(k, real, weights, bf, config, duplex))
        .collect::<Result<Vec<_>>>()?;
    let ul = (0..real.num_ul())
        .map(|q| ul_sinr_mode(q, real, weights, bf, config, duplex))
        .collect::<Result<Vec<_>>>()?;
    Ok(DropPerformance::from_breakdowns(dl, ul, config))
}

/// Full-duplex drop performance for fixed beamformers.
pub fn evaluate_drop(
    real: &ChannelRealization,
    weights: &RepeaterWeights,
    bf: &BeamformingSolution,
    config: &ScenarioConfig,
) -> Result<DropPerformance> {
    evaluate_drop_mode(real, weights, bf, config, Duplex::Full)
}

/// Rebuilds ZF beamformers at `weights`, then evaluates.
pub fn evaluate_weights(
    real: &ChannelRealization,
    fading: &LargeScaleFading,
    weights: &RepeaterWeights,
    config: &ScenarioConfig,
    duplex: Duplex,
) -> Result<(DropPerformance, BeamformingSolution)> {
    let bf = build_beamformers(real, weights, fading)?;
    let perf = evaluate_drop_mode(real, weights, &bf, config, duplex)?;
    Ok((perf, bf))
}
