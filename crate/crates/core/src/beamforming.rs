//! Zero-forcing precoders and combiners built on the normalized compound channels.
//!
//! With `H̄` the matrix of normalized channels, the unnormalized beamformer for
//! user `k` is `v̄_k = H̄ (H̄^H H̄)^{-1} e_k`, scaled to unit norm. The Gram
//! system is solved directly instead of forming a pseudo-inverse.

use nalgebra::SymmetricEigen;

use crate::channel::{CMatrix, CVector, ChannelRealization, RepeaterWeights, C64};
use crate::error::{Error, Result};
use crate::scenario::LargeScaleFading;

/// Drops whose Gram matrix exceeds this condition number are redrawn.
pub const MAX_GRAM_CONDITION: f64 = 1e10;

/// Normalization gains per UE: `γ_k^dl = β_k^BD + Σ_ℓ α_ℓ² β_ℓk^RD β_ℓ^BR` and
/// `γ_q^ul = β_q^UB + Σ_ℓ α_ℓ² β_qℓ^UR β_ℓ^RB`.
pub fn gammas(fading: &LargeScaleFading, weights: &RepeaterWeights) -> (Vec<f64>, Vec<f64>) {
    let a = weights.as_slice();
    let dl = (0..fading.num_dl())
        .map(|k| {
            fading.beta_bd[k]
                + a.iter()
                    .enumerate()
                    .map(|(l, &al)| al * al * fading.beta_rd[l][k] * fading.beta_br[l])
                    .sum::<f64>()
        })
        .collect();
    let ul = (0..fading.num_ul())
        .map(|q| {
            fading.beta_ub[q]
                + a.iter()
                    .enumerate()
                    .map(|(l, &al)| al * al * fading.beta_ur[q][l] * fading.beta_rb[l])
                    .sum::<f64>()
        })
        .collect();
    (dl, ul)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedChannels {
    pub hbar_dl: Vec<CVector>,
    pub hbar_ul: Vec<CVector>,
    pub gamma_dl: Vec<f64>,
    pub gamma_ul: Vec<f64>,
}

/// Divides each compound channel by `sqrt(γ)` so its entries have unit variance.
pub fn normalize_channels(
    real: &ChannelRealization,
    weights: &RepeaterWeights,
    fading: &LargeScaleFading,
) -> Result<NormalizedChannels> {
    let (gamma_dl, gamma_ul) = gammas(fading, weights);
    let scale = |h: CVector, g: f64, side: &'static str, index: usize| {
        if !(g > 0.0) {
            return Err(Error::DegenerateChannel { side, index });
        }
        Ok(h.unscale(g.sqrt()))
    };
    let hbar_dl = real
        .compound_dl_all(weights)?
        .into_iter()
        .enumerate()
        .map(|(k, h)| scale(h, gamma_dl[k], "DL", k))
        .collect::<Result<_>>()?;
    let hbar_ul = real
        .compound_ul_all(weights)?
        .into_iter()
        .enumerate()
        .map(|(q, h)| scale(h, gamma_ul[q], "UL", q))
        .collect::<Result<_>>()?;
    Ok(NormalizedChannels {
        hbar_dl,
        hbar_ul,
        gamma_dl,
        gamma_ul,
    })
}

/// Zero-forcing beamformers for one link direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfBeams {
    /// Unnormalized `H̄ (H̄^H H̄)^{-1} e_k`.
    pub raw: Vec<CVector>,
    /// Unit-norm beamformers.
    pub unit: Vec<CVector>,
    pub raw_norm: Vec<f64>,
    pub gram_condition: f64,
}

/// ZF on the columns `channels`, each of length `antennas`.
pub fn zero_forcing(channels: &[CVector], antennas: usize, side: &'static str) -> Result<ZfBeams> {
    let k = channels.len();
    if k == 0 {
        return Ok(ZfBeams {
            raw: Vec::new(),
            unit: Vec::new(),
            raw_norm: Vec::new(),
            gram_condition: 1.0,
        });
    }
    if channels.iter().any(|h| h.len() != antennas) {
        return Err(Error::DimensionMismatch(format!("{side} channel length")));
    }
    if antennas < k {
        return Err(Error::DimensionMismatch(format!(
            "{side}: {k} users on {antennas} antennas"
        )));
    }
    let h = CMatrix::from_columns(channels);
    let gram = h.adjoint() * &h;

    let eig = SymmetricEigen::new(gram.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_GRAM_CONDITION) {
        return Err(Error::IllConditioned { side, condition });
    }

    let chol = gram.cholesky().ok_or(Error::IllConditioned {
        side,
        condition: f64::INFINITY,
    })?;
    let identity = CMatrix::identity(k, k);
    let raw_mat = &h * chol.solve(&identity);

    let raw: Vec<CVector> = (0..k).map(|i| raw_mat.column(i).into_owned()).collect();
    let raw_norm: Vec<f64> = raw.iter().map(|v| v.norm()).collect();
    let unit = raw.iter().zip(&raw_norm).map(|(v, &n)| v.unscale(n)).collect();
    Ok(ZfBeams {
        raw,
        unit,
        raw_norm,
        gram_condition: condition,
    })
}

pub fn zf_precoders(nc: &NormalizedChannels) -> Result<ZfBeams> {
    let m = nc.hbar_dl.first().map_or(0, |h| h.len());
    zero_forcing(&nc.hbar_dl, m, "DL")
}

pub fn zf_combiners(nc: &NormalizedChannels) -> Result<ZfBeams> {
    let m = nc.hbar_ul.first().map_or(0, |h| h.len());
    zero_forcing(&nc.hbar_ul, m, "UL")
}

/// Precoders `v_k`, combiners `w_q` and their normalization bookkeeping
/// for one weight vector α.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingSolution {
    pub v: Vec<CVector>,
    pub w: Vec<CVector>,
    pub vbar: Vec<CVector>,
    pub wbar: Vec<CVector>,
    pub vbar_norm: Vec<f64>,
    pub wbar_norm: Vec<f64>,
    /// `c_k^dl = sqrt(γ_k^dl) / ‖v̄_k‖`.
    pub c_dl: Vec<f64>,
    pub c_ul: Vec<f64>,
    pub gamma_dl: Vec<f64>,
    pub gamma_ul: Vec<f64>,
}

impl BeamformingSolution {
    pub fn from_parts(nc: &NormalizedChannels, pre: ZfBeams, comb: ZfBeams) -> Self {
        let c_dl = nc
            .gamma_dl
            .iter()
            .zip(&pre.raw_norm)
            .map(|(g, n)| g.sqrt() / n)
            .collect();
        let c_ul = nc
            .gamma_ul
            .iter()
            .zip(&comb.raw_norm)
            .map(|(g, n)| g.sqrt() / n)
            .collect();
        Self {
            v: pre.unit,
            w: comb.unit,
            vbar: pre.raw,
            wbar: comb.raw,
            vbar_norm: pre.raw_norm,
            wbar_norm: comb.raw_norm,
            c_dl,
            c_ul,
            gamma_dl: nc.gamma_dl.clone(),
            gamma_ul: nc.gamma_ul.clone(),
        }
    }
}

/// Builds both precoders and combiners for the compound channels at `weights`.
pub fn build_beamformers(
    real: &ChannelRealization,
    weights: &RepeaterWeights,
    fading: &LargeScaleFading,
) -> Result<BeamformingSolution> {
    let nc = normalize_channels(real, weights, fading)?;
    let pre = zf_precoders(&nc)?;
    let comb = zf_combiners(&nc)?;
    Ok(BeamformingSolution::from_parts(&nc, pre, comb))
}

/// `a^H b`.
#[inline]
pub fn inner(a: &CVector, b: &CVector) -> C64 {
    a.dotc(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_realization;
    use crate::scenario::{derive_fading, sample_geometry, PathLossModel, ScenarioConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(cfg: &ScenarioConfig, seed: u64) -> (LargeScaleFading, ChannelRealization) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = sample_geometry(cfg, &mut rng);
        let f = derive_fading(&g, &PathLossModel::default()).unwrap();
        let r = sample_realization(&f, cfg, &mut rng).unwrap();
        (f, r)
    }

    fn default_cfg() -> ScenarioConfig {
        ScenarioConfig::default()
    }

    fn random_weights(l: usize, seed: u64) -> RepeaterWeights {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RepeaterWeights((0..l).map(|_| rng.random::<f64>() * 300.0).collect())
    }

    #[test]
    fn inner_conjugates_left_operand() {
        let a = CVector::from_vec(vec![C64::new(0.0, 1.0)]);
        let b = CVector::from_vec(vec![C64::new(1.0, 0.0)]);
        assert_eq!(inner(&a, &b), C64::new(0.0, -1.0));
    }

    #[test]
    fn direct_only_normalization() {
        let cfg = default_cfg();
        let (f, r) = setup(&cfg, 1);
        let w = RepeaterWeights::zeros(cfg.num_repeaters);
        let nc = normalize_channels(&r, &w, &f).unwrap();
        for k in 0..cfg.num_dl_ues {
            let expected = r.h_bd[k].unscale(f.beta_bd[k].sqrt());
            assert!((&nc.hbar_dl[k] - expected).norm() < 1e-12 * nc.hbar_dl[k].norm());
        }
    }

    #[test]
    fn normalization_round_trip() {
        let cfg = default_cfg();
        let (f, r) = setup(&cfg, 2);
        let w = random_weights(cfg.num_repeaters, 3);
        let nc = normalize_channels(&r, &w, &f).unwrap();
        for k in 0..cfg.num_dl_ues {
            let back = nc.hbar_dl[k].scale(nc.gamma_dl[k].sqrt());
            let h = r.compound_dl(&w, k).unwrap();
            assert!((back - &h).norm() <= 1e-12 * h.norm());
        }
        for q in 0..cfg.num_ul_ues {
            let back = nc.hbar_ul[q].scale(nc.gamma_ul[q].sqrt());
            let h = r.compound_ul(&w, q).unwrap();
            assert!((back - &h).norm() <= 1e-12 * h.norm());
        }
    }

    #[test]
    fn zero_gamma_is_degenerate() {
        let cfg = ScenarioConfig {
            num_repeaters: 0,
            ..default_cfg()
        };
        let (mut f, r) = setup(&cfg, 4);
        f.beta_ub[2] = 0.0;
        let err = normalize_channels(&r, &RepeaterWeights::zeros(0), &f);
        assert!(matches!(err, Err(Error::DegenerateChannel { side: "UL", index: 2 })));
    }

    #[test]
    fn single_user_zf_is_matched_filter() {
        let cfg = ScenarioConfig {
            num_dl_ues: 1,
            num_ul_ues: 1,
            ..default_cfg()
        };
        let (f, r) = setup(&cfg, 5);
        let w = random_weights(cfg.num_repeaters, 6);
        let nc = normalize_channels(&r, &w, &f).unwrap();
        let pre = zf_precoders(&nc).unwrap();
        let mf = nc.hbar_dl[0].unscale(nc.hbar_dl[0].norm());
        assert!((&pre.unit[0] - mf).norm() < 1e-12);
        let comb = zf_combiners(&nc).unwrap();
        let mf = nc.hbar_ul[0].unscale(nc.hbar_ul[0].norm());
        assert!((&comb.unit[0] - mf).norm() < 1e-12);
    }

    #[test]
    fn orthonormal_columns_are_returned_unchanged() {
        let mut cols = Vec::new();
        for i in 0..3 {
            let mut v = CVector::zeros(5);
            v[i] = C64::new(1.0, 0.0);
            cols.push(v);
        }
        let zf = zero_forcing(&cols, 5, "DL").unwrap();
        for i in 0..3 {
            assert_eq!(zf.raw[i], cols[i]);
        }
    }

    #[test]
    fn multiuser_nulling_and_unit_norm() {
        let cfg = default_cfg();
        for seed in 0..5 {
            let (f, r) = setup(&cfg, 10 + seed);
            let w = random_weights(cfg.num_repeaters, seed);
            let nc = normalize_channels(&r, &w, &f).unwrap();
            let bf = build_beamformers(&r, &w, &f).unwrap();
            for k in 0..5 {
                assert!((bf.v[k].norm() - 1.0).abs() <= 1e-10);
                assert!((bf.w[k].norm() - 1.0).abs() <= 1e-10);
                assert!((bf.c_dl[k] * bf.vbar_norm[k] - bf.gamma_dl[k].sqrt()).abs() <= 1e-12 * bf.gamma_dl[k].sqrt());
                for kp in 0..5 {
                    let cross = inner(&nc.hbar_dl[kp], &bf.v[k]).norm();
                    let cross_ul = inner(&bf.w[k], &nc.hbar_ul[kp]).norm();
                    if kp != k {
                        assert!(cross <= 1e-9 * nc.hbar_dl[kp].norm(), "DL cross {cross}");
                        assert!(cross_ul <= 1e-9 * nc.hbar_ul[kp].norm(), "UL cross {cross_ul}");
                    }
                }
            }
        }
    }

    #[test]
    fn rank_deficient_channels_are_rejected() {
        let h = CVector::from_vec(vec![C64::new(1.0, 0.5), C64::new(-0.3, 2.0), C64::new(0.1, 0.1)]);
        let err = zero_forcing(&[h.clone(), h.scale(2.0)], 3, "DL");
        assert!(matches!(err, Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn zf_is_pure() {
        let cfg = default_cfg();
        let (f, r) = setup(&cfg, 20);
        let w = random_weights(cfg.num_repeaters, 21);
        assert_eq!(
            build_beamformers(&r, &w, &f).unwrap(),
            build_beamformers(&r, &w, &f).unwrap()
        );
    }
}
