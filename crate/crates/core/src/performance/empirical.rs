//! Symbol-level Monte Carlo SINR estimate.
//!
//! Draws QPSK symbols for every UE, Gaussian repeater and receiver noise, forms
//! the received sample from the signal model, and estimates the desired
//! amplitude by correlating with the known symbol. The residual power after
//! removing the desired component is the interference-plus-noise estimate.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::beamforming::{inner, BeamformingSolution};
use crate::channel::{ChannelRealization, RepeaterWeights, C64};
use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;

pub const MIN_EMPIRICAL_SAMPLES: usize = 10_000;
const BATCHES: usize = 20;
/// Residual power below this fraction of the signal power counts as noiseless.
const CAP_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkTarget {
    Dl(usize),
    Ul(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalSinr {
    pub sinr: f64,
    /// Batch-means standard error of `sinr`.
    pub std_error: f64,
    /// True when the residual vanished and `sinr` is the finite cap.
    pub capped: bool,
    pub num_samples: usize,
}

fn qpsk<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let b: u8 = rng.random();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    C64::new(if b & 1 == 0 { s } else { -s }, if b & 2 == 0 { s } else { -s })
}

fn gaussian<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

/// Scalar observation model `y = a·s + Σ b_i u_i + Σ c_j n_j + z`, where
/// `u_i` are interfering unit-power symbols, `n_j` are unit-power Gaussian
/// repeater noise sources and `z` is receiver noise.
struct Observation {
    desired: C64,
    interferers: Vec<C64>,
    noise: Vec<C64>,
}

#[derive(Default, Clone, Copy)]
struct Accum {
    ys: C64,
    ss: f64,
    yy: f64,
}

impl Accum {
    fn add(&mut self, y: C64, s: C64) {
        self.ys += y * s.conj();
        self.ss += s.norm_sqr();
        self.yy += y.norm_sqr();
    }

    fn merge(&mut self, o: &Accum) {
        self.ys += o.ys;
        self.ss += o.ss;
        self.yy += o.yy;
    }

    /// (signal power, residual power)
    fn powers(&self) -> (f64, f64) {
        let a = self.ys / self.ss;
        let n = self.ss;
        let resid = (self.yy - self.ys.norm_sqr() / self.ss).max(0.0) / n;
        (a.norm_sqr(), resid)
    }
}

/// Empirical SINR of one link. Needs at least [`MIN_EMPIRICAL_SAMPLES`] samples.
pub fn empirical_sinr<R: Rng + ?Sized>(
    target: LinkTarget,
    real: &ChannelRealization,
    weights: &RepeaterWeights,
    bf: &BeamformingSolution,
    config: &ScenarioConfig,
    num_samples: usize,
    rng: &mut R,
) -> Result<EmpiricalSinr> {
    if num_samples < MIN_EMPIRICAL_SAMPLES {
        return Err(Error::InvalidConfig(format!(
            "empirical SINR needs at least {MIN_EMPIRICAL_SAMPLES} samples, got {num_samples}"
        )));
    }
    if weights.len() != real.num_repeaters() {
        return Err(Error::DimensionMismatch(format!(
            "{} repeater weights for {} repeaters",
            weights.len(),
            real.num_repeaters()
        )));
    }
    let (obs, combiner) = match target {
        LinkTarget::Dl(k) => (dl_observation(k, real, weights, bf, config)?, None),
        LinkTarget::Ul(q) => {
            let o = ul_observation(q, real, weights, bf, config)?;
            (o, Some(&bf.w[q]))
        }
    };
    let sigma = config.noise_power.sqrt();
    let mr = real.num_rx_antennas();

    let per_batch = num_samples / BATCHES;
    let mut batches = vec![Accum::default(); BATCHES];
    let mut z = crate::channel::CVector::zeros(mr);
    for (b, acc) in batches.iter_mut().enumerate() {
        let n = if b + 1 == BATCHES {
            num_samples - per_batch * (BATCHES - 1)
        } else {
            per_batch
        };
        for _ in 0..n {
            let s = qpsk(rng);
            let mut y = obs.desired * s;
            for g in &obs.interferers {
                y += g * qpsk(rng);
            }
            for g in &obs.noise {
                y += g * gaussian(1.0, rng);
            }
            match combiner {
                // UL receiver noise is a full Mr-dimensional vector seen through w^H.
                Some(w) => {
                    for zi in z.iter_mut() {
                        *zi = gaussian(1.0, rng) * sigma;
                    }
                    y += inner(w, &z);
                }
                None => y += gaussian(1.0, rng) * sigma,
            }
            acc.add(y, s);
        }
    }

    let mut total = Accum::default();
    for b in &batches {
        total.merge(b);
    }
    let (sig, resid) = total.powers();
    if resid <= CAP_RATIO * sig {
        return Ok(EmpiricalSinr {
            sinr: 1.0 / CAP_RATIO,
            std_error: 0.0,
            capped: true,
            num_samples,
        });
    }
    let sinr = sig / resid;
    let est: Vec<f64> = batches
        .iter()
        .map(|b| {
            let (s, r) = b.powers();
            s / r
        })
        .collect();
    let mean = est.iter().sum::<f64>() / BATCHES as f64;
    let var = est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    Ok(EmpiricalSinr {
        sinr,
        std_error: (var / BATCHES as f64).sqrt(),
        capped: false,
        num_samples,
    })
}

fn dl_observation(
    k: usize,
    real: &ChannelRealization,
    weights: &RepeaterWeights,
    bf: &BeamformingSolution,
    config: &ScenarioConfig,
) -> Result<Observation> {
    let h = real.compound_dl(weights, k)?;
    let amp = |kp: usize| (config.eta(kp) * config.dl_power).sqrt() * inner(&h, &bf.v[kp]);
    let mut interferers: Vec<C64> = (0..real.num_dl()).filter(|&kp| kp != k).map(amp).collect();
    let ul = config.ul_power.sqrt();
    for q in 0..real.num_ul() {
        // Direct UE-UE path plus every relayed copy.
        let mut g = real.h_uu[q][k];
        for l in 0..real.num_repeaters() {
            g += real.h_ur[q][l] * weights.0[l] * real.h_rd[l][k];
        }
        interferers.push(g * ul);
    }
    let sigma = config.noise_power.sqrt();
    let noise = weights
        .as_slice()
        .iter()
        .enumerate()
        .map(|(l, &a)| real.h_rd[l][k] * (a * sigma))
        .collect();
    Ok(Observation {
        desired: amp(k),
        interferers,
        noise,
    })
}

fn ul_observation(
    q: usize,
    real: &ChannelRealization,
    weights: &RepeaterWeights,
    bf: &BeamformingSolution,
    config: &ScenarioConfig,
) -> Result<Observation> {
    let w = &bf.w[q];
    let ul = config.ul_power.sqrt();
    let mut desired = C64::new(0.0, 0.0);
    let mut interferers = Vec::new();
    for qp in 0..real.num_ul() {
        let g = inner(w, &real.compound_ul(weights, qp)?) * ul;
        if qp == q {
            desired = g;
        } else {
            interferers.push(g);
        }
    }
    for k in 0..real.num_dl() {
        // Received Mr-vector of DL stream k: residual SI plus each repeater's
        // re-radiated copy of what it picked up from the BS.
        let amp = (config.eta(k) * config.dl_power).sqrt();
        let mut rx = &real.h_si * &bf.v[k] * C64::from(config.si_attenuation);
        for l in 0..real.num_repeaters() {
            let picked_up: C64 = real.h_br[l].iter().zip(bf.v[k].iter()).map(|(h, v)| h * v).sum();
            rx += &real.h_rb[l] * (picked_up * weights.0[l]);
        }
        interferers.push(inner(w, &rx) * amp);
    }
    let sigma = config.noise_power.sqrt();
    let noise = weights
        .as_slice()
        .iter()
        .enumerate()
        .map(|(l, &a)| inner(w, &real.h_rb[l]) * (a * sigma))
        .collect();
    Ok(Observation {
        desired,
        interferers,
        noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_realization;
    use crate::performance::{dl_sinr, evaluate_weights, ul_sinr, Duplex};
    use crate::scenario::{derive_fading, sample_geometry, LargeScaleFading, PathLossModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(cfg: &ScenarioConfig, seed: u64) -> (LargeScaleFading, ChannelRealization) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = sample_geometry(cfg, &mut rng);
        let f = derive_fading(&g, &PathLossModel::default()).unwrap();
        let r = sample_realization(&f, cfg, &mut rng).unwrap();
        (f, r)
    }

    #[test]
    fn rejects_short_runs() {
        let cfg = ScenarioConfig {
            num_repeaters: 1,
            ..Default::default()
        };
        let (f, r) = setup(&cfg, 1);
        let w = RepeaterWeights::zeros(1);
        let (_, bf) = evaluate_weights(&r, &f, &w, &cfg, Duplex::Full).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = empirical_sinr(LinkTarget::Dl(0), &r, &w, &bf, &cfg, 100, &mut rng);
        assert!(matches!(e, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn agrees_with_analytic_on_both_sides() {
        let cfg = ScenarioConfig {
            num_tx_antennas: 8,
            num_rx_antennas: 8,
            num_dl_ues: 2,
            num_ul_ues: 2,
            num_repeaters: 3,
            ..Default::default()
        };
        let (f, r) = setup(&cfg, 2);
        // Gains large enough that repeater noise and loopback matter.
        let w = RepeaterWeights(vec![30.0, 80.0, 10.0]);
        let (_, bf) = evaluate_weights(&r, &f, &w, &cfg, Duplex::Full).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 0..2 {
            let a = dl_sinr(k, &r, &w, &bf, &cfg).unwrap().sinr;
            let e = empirical_sinr(LinkTarget::Dl(k), &r, &w, &bf, &cfg, 200_000, &mut rng).unwrap();
            assert!(
                (e.sinr - a).abs() <= 4.0 * e.std_error.max(1e-3 * a),
                "dl {k}: {} vs {a}",
                e.sinr
            );
        }
        for q in 0..2 {
            let a = ul_sinr(q, &r, &w, &bf, &cfg).unwrap().sinr;
            let e = empirical_sinr(LinkTarget::Ul(q), &r, &w, &bf, &cfg, 200_000, &mut rng).unwrap();
            assert!(
                (e.sinr - a).abs() <= 4.0 * e.std_error.max(1e-3 * a),
                "ul {q}: {} vs {a}",
                e.sinr
            );
        }
    }

    #[test]
    fn noiseless_single_user_is_capped() {
        let mut cfg = ScenarioConfig {
            num_dl_ues: 1,
            num_ul_ues: 0,
            num_repeaters: 1,
            ..Default::default()
        };
        let (f, r) = setup(&cfg, 4);
        cfg.noise_power = 0.0;
        let w = RepeaterWeights::zeros(1);
        let (_, bf) = evaluate_weights(&r, &f, &w, &cfg, Duplex::Full).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = empirical_sinr(LinkTarget::Dl(0), &r, &w, &bf, &cfg, 10_000, &mut rng).unwrap();
        assert!(e.capped);
        assert!(e.sinr.is_finite());
    }
}
