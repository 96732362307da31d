//! Per-iteration coefficients of the DL and UL SINR constraints with the
//! beamformers frozen at the expansion point.
//!
//! With ZF the desired power is `ρ γ(α) / ‖v̄‖²`, so `SINR ≥ T` becomes
//!
//! ```text
//! (direct + Σ_ℓ gain_ℓ α_ℓ²) / T  ≥  αᵀ A α + b·α + c
//! ```
//!
//! where the right-hand side is the interference-plus-noise power, a convex
//! quadratic in α. [`SinrSurrogate`] holds this form normalized to noise units.

use nalgebra::DMatrix;

use crate::beamforming::{inner, BeamformingSolution};
use crate::channel::{CMatrix, ChannelRealization, C64};
use crate::error::{Error, Result};
use crate::performance::Duplex;
use crate::scenario::{LargeScaleFading, ScenarioConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct DlCoefficients {
    /// `η_k ρ_dl β_k^BD / ‖v̄_k‖²`.
    pub direct_signal: Vec<f64>,
    /// `[k][ℓ]`: `η_k ρ_dl β_ℓk^RD β_ℓ^BR / ‖v̄_k‖²`.
    pub xi1: Vec<Vec<f64>>,
    /// `[k][q]`: L×L Hermitian `(ρ_ul/4) h_ℓk^RD h_ℓ'k^RD* h_qℓ^UR h_qℓ'^UR*`.
    pub xi2: Vec<Vec<CMatrix>>,
    /// `[k][ℓ]`: `σ² |h_ℓk^RD|²`.
    pub xi3: Vec<Vec<f64>>,
    /// `[k][q][ℓ]`: `2 ρ_ul Re{h_qk* h_ℓk^RD h_qℓ^UR}`.
    pub xi4: Vec<Vec<Vec<f64>>>,
    /// `σ² + ρ_ul Σ_q |h_qk|²`.
    pub xi5: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UlCoefficients {
    /// `β_q^UB`.
    pub direct_gain: Vec<f64>,
    /// `[q][ℓ]`: `β_qℓ^UR β_ℓ^RB`.
    pub lhs_gain: Vec<Vec<f64>>,
    /// `‖w̄_q‖²`.
    pub wbar_norm_sq: Vec<f64>,
    /// `[q][ℓ]`: `(‖w̄_q‖²/ρ_ul)(ρ_dl Σ_k η_k |w_qᴴ h_ℓ^RB h_ℓ^BRᵀ v_k|² + σ² |w_qᴴ h_ℓ^RB|²)`.
    pub mu1: Vec<Vec<f64>>,
    /// `(‖w̄_q‖²/ρ_ul)(ρ_dl α_SI² Σ_k η_k |w_qᴴ H_SI v_k|² + σ² ‖w_q‖²)`.
    pub mu2: Vec<f64>,
    /// Thermal part of `mu2`, `(‖w̄_q‖²/ρ_ul) σ² ‖w_q‖²`.
    pub thermal: Vec<f64>,
    /// `[q]`: off-diagonal coupling between loopback copies through different
    /// repeaters, same scaling as `mu1`; zero diagonal.
    pub mu_cross: Vec<DMatrix<f64>>,
    /// `[q][ℓ]`: linear coupling between each repeater loopback and residual SI.
    pub mu_lin: Vec<Vec<f64>>,
}

pub fn compute_dl_coefficients(
    real: &ChannelRealization,
    fading: &LargeScaleFading,
    bf: &BeamformingSolution,
    config: &ScenarioConfig,
    duplex: Duplex,
) -> DlCoefficients {
    let l = real.num_repeaters();
    let kdl = real.num_dl();
    let kul = if duplex == Duplex::Full { real.num_ul() } else { 0 };
    let (rho, rho_ul, sigma2) = (config.dl_power, config.ul_power, config.noise_power);
    let mut c = DlCoefficients {
        direct_signal: Vec::with_capacity(kdl),
        xi1: Vec::with_capacity(kdl),
        xi2: Vec::with_capacity(kdl),
        xi3: Vec::with_capacity(kdl),
        xi4: Vec::with_capacity(kdl),
        xi5: Vec::with_capacity(kdl),
    };
    for k in 0..kdl {
        let s = config.eta(k) * rho / (bf.vbar_norm[k] * bf.vbar_norm[k]);
        c.direct_signal.push(s * fading.beta_bd[k]);
        c.xi1
            .push((0..l).map(|r| s * fading.beta_rd[r][k] * fading.beta_br[r]).collect());
        c.xi3
            .push((0..l).map(|r| sigma2 * real.h_rd[r][k].norm_sqr()).collect());
        let mut xi2 = Vec::with_capacity(kul);
        let mut xi4 = Vec::with_capacity(kul);
        let mut xi5 = sigma2;
        for q in 0..kul {
            let b: Vec<C64> = (0..l).map(|r| real.h_rd[r][k] * real.h_ur[q][r]).collect();
            xi2.push(CMatrix::from_fn(l, l, |i, j| b[i] * b[j].conj() * (rho_ul / 4.0)));
            let h = real.h_uu[q][k];
            xi4.push(b.iter().map(|bi| 2.0 * rho_ul * (h.conj() * bi).re).collect());
            xi5 += rho_ul * h.norm_sqr();
        }
        c.xi2.push(xi2);
        c.xi4.push(xi4);
        c.xi5.push(xi5);
    }
    c
}

pub fn compute_ul_coefficients(
    real: &ChannelRealization,
    fading: &LargeScaleFading,
    bf: &BeamformingSolution,
    config: &ScenarioConfig,
    duplex: Duplex,
) -> UlCoefficients {
    let l = real.num_repeaters();
    let kul = real.num_ul();
    let kdl = if duplex == Duplex::Full { real.num_dl() } else { 0 };
    let (rho, rho_ul, sigma2) = (config.dl_power, config.ul_power, config.noise_power);
    let mut c = UlCoefficients {
        direct_gain: fading.beta_ub.clone(),
        lhs_gain: (0..kul)
            .map(|q| (0..l).map(|r| fading.beta_ur[q][r] * fading.beta_rb[r]).collect())
            .collect(),
        wbar_norm_sq: bf.wbar_norm.iter().map(|n| n * n).collect(),
        mu1: Vec::with_capacity(kul),
        mu2: Vec::with_capacity(kul),
        thermal: Vec::with_capacity(kul),
        mu_cross: Vec::with_capacity(kul),
        mu_lin: Vec::with_capacity(kul),
    };
    for q in 0..kul {
        let w = &bf.w[q];
        let scale = c.wbar_norm_sq[q] / rho_ul;
        let wrb: Vec<C64> = (0..l).map(|r| inner(w, &real.h_rb[r])).collect();
        // a[k][0] is the SI amplitude, a[k][1 + ℓ] the loopback through repeater ℓ.
        let a: Vec<Vec<C64>> = (0..kdl)
            .map(|k| {
                let v = &bf.v[k];
                let mut row = Vec::with_capacity(l + 1);
                row.push(inner(w, &(&real.h_si * v)) * config.si_attenuation);
                row.extend((0..l).map(|r| wrb[r] * real.h_br[r].dot(v)));
                row
            })
            .collect();
        let eta: Vec<f64> = (0..kdl).map(|k| config.eta(k) * rho).collect();
        c.mu1.push(
            (0..l)
                .map(|r| {
                    let lb: f64 = (0..kdl).map(|k| eta[k] * a[k][1 + r].norm_sqr()).sum();
                    scale * (lb + sigma2 * wrb[r].norm_sqr())
                })
                .collect(),
        );
        let si: f64 = (0..kdl).map(|k| eta[k] * a[k][0].norm_sqr()).sum();
        c.mu2.push(scale * (si + sigma2 * w.norm_squared()));
        c.thermal.push(scale * sigma2 * w.norm_squared());
        c.mu_cross.push(DMatrix::from_fn(l, l, |i, j| {
            if i == j {
                0.0
            } else {
                scale
                    * (0..kdl)
                        .map(|k| eta[k] * (a[k][1 + i] * a[k][1 + j].conj()).re)
                        .sum::<f64>()
            }
        }));
        c.mu_lin.push(
            (0..l)
                .map(|r| {
                    scale
                        * 2.0
                        * (0..kdl)
                            .map(|k| eta[k] * (a[k][0].conj() * a[k][1 + r]).re)
                            .sum::<f64>()
                })
                .collect(),
        );
    }
    c
}

/// `(direct + Σ gains_ℓ α_ℓ²) / T ≥ αᵀ quad α + lin·α + constant`, in noise units.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrSurrogate {
    pub direct: f64,
    pub gains: Vec<f64>,
    pub quad: DMatrix<f64>,
    pub lin: Vec<f64>,
    pub constant: f64,
    /// Thermal noise, a lower bound on the interference at any α.
    pub floor: f64,
}

impl SinrSurrogate {
    pub fn dl(c: &DlCoefficients, k: usize, config: &ScenarioConfig) -> Self {
        let l = c.xi1[k].len();
        let inv = 1.0 / config.noise_power;
        let mut quad = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(c.xi3[k].clone()));
        for x in &c.xi2[k] {
            quad += x.map(|z| 4.0 * z.re);
        }
        let mut lin = vec![0.0; l];
        for row in &c.xi4[k] {
            for (a, b) in lin.iter_mut().zip(row) {
                *a += b;
            }
        }
        Self {
            direct: c.direct_signal[k] * inv,
            gains: c.xi1[k].iter().map(|g| g * inv).collect(),
            quad: quad * inv,
            lin: lin.iter().map(|v| v * inv).collect(),
            constant: c.xi5[k] * inv,
            floor: 1.0,
        }
    }

    pub fn ul(c: &UlCoefficients, q: usize, config: &ScenarioConfig) -> Self {
        let f = config.ul_power / (config.noise_power * c.wbar_norm_sq[q]);
        let l = c.mu1[q].len();
        let mut quad = c.mu_cross[q].clone();
        for r in 0..l {
            quad[(r, r)] += c.mu1[q][r];
        }
        Self {
            direct: f * c.direct_gain[q],
            gains: c.lhs_gain[q].iter().map(|g| g * f).collect(),
            quad: quad * f,
            lin: c.mu_lin[q].iter().map(|v| v * f).collect(),
            constant: c.mu2[q] * f,
            floor: c.thermal[q] * f,
        }
    }

    pub fn num_repeaters(&self) -> usize {
        self.gains.len()
    }

    /// Desired power `direct + Σ gains α²`.
    pub fn signal(&self, alpha: &[f64]) -> f64 {
        self.direct + self.gains.iter().zip(alpha).map(|(g, a)| g * a * a).sum::<f64>()
    }

    /// Interference plus noise `αᵀ quad α + lin·α + constant`.
    pub fn interference(&self, alpha: &[f64]) -> f64 {
        let l = alpha.len();
        let mut v = self.constant;
        for i in 0..l {
            v += self.lin[i] * alpha[i];
            for j in 0..l {
                v += alpha[i] * self.quad[(i, j)] * alpha[j];
            }
        }
        v
    }

    pub fn sinr(&self, alpha: &[f64]) -> f64 {
        self.signal(alpha) / self.interference(alpha)
    }

    /// `signal/T − interference`; non-negative iff `SINR ≥ T`.
    pub fn margin(&self, alpha: &[f64], target: f64) -> f64 {
        self.signal(alpha) / target - self.interference(alpha)
    }

    /// Concave minorant of `signal/T` built from the tangent planes of
    /// `α²/T` and `1/T` at `(α_n, T_n)`. Returns `(coef_alpha, coef_T, constant)`.
    pub fn linearized_signal(&self, alpha_n: &[f64], target_n: f64) -> Result<(Vec<f64>, f64, f64)> {
        if !(target_n > 0.0) || !target_n.is_finite() {
            return Err(Error::InvalidState(format!(
                "expansion target {target_n} must be positive"
            )));
        }
        if alpha_n.len() != self.gains.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} repeaters",
                alpha_n.len(),
                self.gains.len()
            )));
        }
        let mut coef_alpha = Vec::with_capacity(alpha_n.len());
        let mut coef_t = -self.direct / (target_n * target_n);
        for (g, a) in self.gains.iter().zip(alpha_n) {
            let r = a / target_n;
            coef_alpha.push(2.0 * g * r);
            coef_t -= g * r * r;
        }
        Ok((coef_alpha, coef_t, 2.0 * self.direct / target_n))
    }

    /// Value of the linearized margin; equals [`Self::margin`] at the expansion point.
    pub fn linearized_margin(&self, alpha: &[f64], target: f64, alpha_n: &[f64], target_n: f64) -> Result<f64> {
        let (ca, ct, c0) = self.linearized_signal(alpha_n, target_n)?;
        let lhs = c0 + ct * target + ca.iter().zip(alpha).map(|(c, a)| c * a).sum::<f64>();
        Ok(lhs - self.interference(alpha))
    }
}
