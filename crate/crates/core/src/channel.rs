//! Small-scale Rayleigh channels and compound (direct + through-repeater) channels.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{LargeScaleFading, ScenarioConfig};

pub type C64 = Complex64;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

/// Per-repeater amplitude gains α_ℓ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeaterWeights(pub Vec<f64>);

impl RepeaterWeights {
    pub fn zeros(num_repeaters: usize) -> Self {
        Self(vec![0.0; num_repeaters])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for RepeaterWeights {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// One drop's small-scale channels. Repeater-indexed tables follow
/// `h_rd[ℓ][k]`, `h_ur[q][ℓ]`; `h_uu[q][k]` couples UL UE q to DL UE k.
///
/// `h_si` holds unit-variance entries; the residual amplitude α_SI is applied
/// wherever the SI channel is used.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h_bd: Vec<CVector>,
    pub h_rd: Vec<Vec<C64>>,
    pub h_br: Vec<CVector>,
    pub h_ub: Vec<CVector>,
    pub h_ur: Vec<Vec<C64>>,
    pub h_rb: Vec<CVector>,
    pub h_si: CMatrix,
    pub h_uu: Vec<Vec<C64>>,
}

/// Circularly-symmetric complex Gaussian draw with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

fn gaussian_vector<R: Rng + ?Sized>(len: usize, variance: f64, rng: &mut R) -> CVector {
    CVector::from_iterator(len, (0..len).map(|_| complex_gaussian(variance, rng)))
}

fn check_fading(fading: &LargeScaleFading, config: &ScenarioConfig) -> Result<()> {
    fading.check(config)
}

/// Draws the links that never traverse a repeater: BS↔UE vectors, the SI
/// matrix and UE↔UE scalars.
pub fn sample_direct_links<R: Rng + ?Sized>(
    fading: &LargeScaleFading,
    config: &ScenarioConfig,
    rng: &mut R,
) -> (Vec<CVector>, Vec<CVector>, CMatrix, Vec<Vec<C64>>) {
    let (mt, mr) = (config.num_tx_antennas, config.num_rx_antennas);
    let h_bd = fading.beta_bd.iter().map(|&b| gaussian_vector(mt, b, rng)).collect();
    let h_ub = fading.beta_ub.iter().map(|&b| gaussian_vector(mr, b, rng)).collect();
    let h_si = CMatrix::from_fn(mr, mt, |_, _| complex_gaussian(1.0, rng));
    let h_uu = fading
        .beta_uu
        .iter()
        .map(|row| row.iter().map(|&b| complex_gaussian(b, rng)).collect())
        .collect();
    (h_bd, h_ub, h_si, h_uu)
}

#[allow(clippy::type_complexity)]
pub fn sample_repeater_links<R: Rng + ?Sized>(
    fading: &LargeScaleFading,
    config: &ScenarioConfig,
    rng: &mut R,
) -> (Vec<Vec<C64>>, Vec<CVector>, Vec<Vec<C64>>, Vec<CVector>) {
    let (mt, mr) = (config.num_tx_antennas, config.num_rx_antennas);
    let h_br = fading.beta_br.iter().map(|&b| gaussian_vector(mt, b, rng)).collect();
    let h_rb = fading.beta_rb.iter().map(|&b| gaussian_vector(mr, b, rng)).collect();
    let h_rd = fading
        .beta_rd
        .iter()
        .map(|row| row.iter().map(|&b| complex_gaussian(b, rng)).collect())
        .collect();
    let h_ur = fading
        .beta_ur
        .iter()
        .map(|row| row.iter().map(|&b| complex_gaussian(b, rng)).collect())
        .collect();
    (h_rd, h_br, h_ur, h_rb)
}

/// Draws direct links from `direct_rng` and repeater links from
/// `repeater_rng`, so the direct channels do not depend on the repeater count.
pub fn sample_realization_split<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    fading: &LargeScaleFading,
    config: &ScenarioConfig,
    direct_rng: &mut R1,
    repeater_rng: &mut R2,
) -> Result<ChannelRealization> {
    check_fading(fading, config)?;
    let (h_bd, h_ub, h_si, h_uu) = sample_direct_links(fading, config, direct_rng);
    let (h_rd, h_br, h_ur, h_rb) = sample_repeater_links(fading, config, repeater_rng);
    Ok(ChannelRealization {
        h_bd,
        h_rd,
        h_br,
        h_ub,
        h_ur,
        h_rb,
        h_si,
        h_uu,
    })
}

/// Draws a full realization from a single RNG stream (direct links first).
pub fn sample_realization<R: Rng + ?Sized>(
    fading: &LargeScaleFading,
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<ChannelRealization> {
    check_fading(fading, config)?;
    let (h_bd, h_ub, h_si, h_uu) = sample_direct_links(fading, config, rng);
    let (h_rd, h_br, h_ur, h_rb) = sample_repeater_links(fading, config, rng);
    Ok(ChannelRealization {
        h_bd,
        h_rd,
        h_br,
        h_ub,
        h_ur,
        h_rb,
        h_si,
        h_uu,
    })
}

impl ChannelRealization {
    pub fn num_tx_antennas(&self) -> usize {
        self.h_si.ncols()
    }

    pub fn num_rx_antennas(&self) -> usize {
        self.h_si.nrows()
    }

    pub fn num_dl(&self) -> usize {
        self.h_bd.len()
    }

    pub fn num_ul(&self) -> usize {
        self.h_ub.len()
    }

    pub fn num_repeaters(&self) -> usize {
        self.h_br.len()
    }

    fn check_weights(&self, w: &RepeaterWeights) -> Result<()> {
        if w.len() != self.num_repeaters() {
            return Err(Error::DimensionMismatch(format!(
                "{} repeater weights for {} repeaters",
                w.len(),
                self.num_repeaters()
            )));
        }
        Ok(())
    }

    /// Keeps only the first `num_repeaters` repeaters.
    pub fn truncate_repeaters(&self, num_repeaters: usize) -> Self {
        let l = num_repeaters.min(self.num_repeaters());
        Self {
            h_bd: self.h_bd.clone(),
            h_rd: self.h_rd[..l].to_vec(),
            h_br: self.h_br[..l].to_vec(),
            h_ub: self.h_ub.clone(),
            h_ur: self.h_ur.iter().map(|r| r[..l].to_vec()).collect(),
            h_rb: self.h_rb[..l].to_vec(),
            h_si: self.h_si.clone(),
            h_uu: self.h_uu.clone(),
        }
    }

    /// `h_k^dl = h_bd[k] + Σ_ℓ α_ℓ h_rd[ℓ][k] h_br[ℓ]`.
    pub fn compound_dl(&self, w: &RepeaterWeights, k: usize) -> Result<CVector> {
        if k >= self.num_dl() {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.num_dl(),
            });
        }
        self.check_weights(w)?;
        let mut h = self.h_bd[k].clone();
        for (l, &a) in w.0.iter().enumerate() {
            h.axpy(self.h_rd[l][k] * a, &self.h_br[l], C64::new(1.0, 0.0));
        }
        Ok(h)
    }

    /// `h_q^ul = h_ub[q] + Σ_ℓ α_ℓ h_ur[q][ℓ] h_rb[ℓ]`.
    pub fn compound_ul(&self, w: &RepeaterWeights, q: usize) -> Result<CVector> {
        if q >= self.num_ul() {
            return Err(Error::IndexOutOfRange {
                index: q,
                len: self.num_ul(),
            });
        }
        self.check_weights(w)?;
        let mut h = self.h_ub[q].clone();
        for (l, &a) in w.0.iter().enumerate() {
            h.axpy(self.h_ur[q][l] * a, &self.h_rb[l], C64::new(1.0, 0.0));
        }
        Ok(h)
    }

    pub fn compound_dl_all(&self, w: &RepeaterWeights) -> Result<Vec<CVector>> {
        (0..self.num_dl()).map(|k| self.compound_dl(w, k)).collect()
    }

    pub fn compound_ul_all(&self, w: &RepeaterWeights) -> Result<Vec<CVector>> {
        (0..self.num_ul()).map(|q| self.compound_ul(w, q)).collect()
    }
}

const DUMP_MAGIC: &[u8; 8] = b"RFDCHAN1";

/// Writes the realization in the fixture layout:
///
/// ```text
/// magic     8 bytes  "RFDCHAN1"
/// dims      5 × u64  Mt, Mr, K_dl, K_ul, L
/// h_bd      K_dl × Mt
/// h_rd      L × K_dl
/// h_br      L × Mt
/// h_ub      K_ul × Mr
/// h_ur      K_ul × L
/// h_rb      L × Mr
/// h_si      Mr × Mt   (row-major)
/// h_uu      K_ul × K_dl
/// ```
///
/// Every integer and float is little-endian; each complex entry is stored as
/// `re: f64` followed by `im: f64`.
pub fn write_realization<W: Write>(real: &ChannelRealization, mut out: W) -> Result<()> {
    out.write_all(DUMP_MAGIC)?;
    let dims = [
        real.num_tx_antennas(),
        real.num_rx_antennas(),
        real.num_dl(),
        real.num_ul(),
        real.num_repeaters(),
    ];
    for d in dims {
        out.write_all(&(d as u64).to_le_bytes())?;
    }
    let mut put = |z: &C64| -> Result<()> {
        out.write_all(&z.re.to_le_bytes())?;
        out.write_all(&z.im.to_le_bytes())?;
        Ok(())
    };
    for v in &real.h_bd {
        v.iter().try_for_each(&mut put)?;
    }
    real.h_rd.iter().flatten().try_for_each(&mut put)?;
    for v in &real.h_br {
        v.iter().try_for_each(&mut put)?;
    }
    for v in &real.h_ub {
        v.iter().try_for_each(&mut put)?;
    }
    real.h_ur.iter().flatten().try_for_each(&mut put)?;
    for v in &real.h_rb {
        v.iter().try_for_each(&mut put)?;
    }
    for r in 0..real.h_si.nrows() {
        for c in 0..real.h_si.ncols() {
            put(&real.h_si[(r, c)])?;
        }
    }
    real.h_uu.iter().flatten().try_for_each(&mut put)?;
    Ok(())
}

/// Reads a realization written by [`write_realization`].
pub fn read_realization<R: Read>(mut input: R) -> Result<ChannelRealization> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::Parse("bad channel dump magic".into()));
    }
    let mut dims = [0usize; 5];
    for d in dims.iter_mut() {
        let mut b = [0u8; 8];
        input.read_exact(&mut b)?;
        *d = usize::try_from(u64::from_le_bytes(b)).map_err(|_| Error::Parse("dimension overflow".into()))?;
    }
    let [mt, mr, kd, ku, l] = dims;
    if [mt, mr, kd, ku, l].iter().any(|&d| d > 1 << 20) {
        return Err(Error::Parse("implausible dimensions in channel dump".into()));
    }
    let mut get = || -> Result<C64> {
        let mut b = [0u8; 16];
        input.read_exact(&mut b)?;
        let re = f64::from_le_bytes(b[..8].try_into().unwrap());
        let im = f64::from_le_bytes(b[8..].try_into().unwrap());
        Ok(C64::new(re, im))
    };
    let vectors = |n: usize, len: usize, get: &mut dyn FnMut() -> Result<C64>| {
        (0..n)
            .map(|_| {
                let v: Result<Vec<C64>> = (0..len).map(|_| get()).collect();
                v.map(CVector::from_vec)
            })
            .collect::<Result<Vec<_>>>()
    };
    let h_bd = vectors(kd, mt, &mut get)?;
    let h_rd = table(l, kd, &mut get)?;
    let h_br = vectors(l, mt, &mut get)?;
    let h_ub = vectors(ku, mr, &mut get)?;
    let h_ur = table(ku, l, &mut get)?;
    let h_rb = vectors(l, mr, &mut get)?;
    let mut si = Vec::with_capacity(mr * mt);
    for _ in 0..mr * mt {
        si.push(get()?);
    }
    let h_si = CMatrix::from_row_slice(mr, mt, &si);
    let h_uu = table(ku, kd, &mut get)?;
    Ok(ChannelRealization {
        h_bd,
        h_rd,
        h_br,
        h_ub,
        h_ur,
        h_rb,
        h_si,
        h_uu,
    })
}

fn table(rows: usize, cols: usize, get: &mut dyn FnMut() -> Result<C64>) -> Result<Vec<Vec<C64>>> {
    (0..rows).map(|_| (0..cols).map(|_| get()).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{derive_fading, sample_geometry, PathLossModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn drop(cfg: &ScenarioConfig, seed: u64) -> (LargeScaleFading, ChannelRealization) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = sample_geometry(cfg, &mut rng);
        let f = derive_fading(&g, &PathLossModel::default()).unwrap();
        let r = sample_realization(&f, cfg, &mut rng).unwrap();
        (f, r)
    }

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            num_tx_antennas: 6,
            num_rx_antennas: 5,
            num_dl_ues: 2,
            num_ul_ues: 3,
            num_repeaters: 4,
            ..Default::default()
        }
    }

    #[test]
    fn dimensions_follow_config() {
        let cfg = ScenarioConfig::default();
        let (_, r) = drop(&cfg, 1);
        assert_eq!(r.h_bd.len(), 5);
        assert!(r.h_bd.iter().all(|v| v.len() == 32));
        assert_eq!((r.h_si.nrows(), r.h_si.ncols()), (32, 32));
        assert_eq!(r.h_rd.len(), 32);
        assert_eq!(r.h_uu.len(), 5);
    }

    #[test]
    fn zero_variance_gives_zero_channel() {
        let cfg = small();
        let (mut f, _) = drop(&cfg, 2);
        f.beta_bd[1] = 0.0;
        f.beta_ur[2][3] = 0.0;
        let r = sample_realization(&f, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert!(r.h_bd[1].iter().all(|z| *z == C64::new(0.0, 0.0)));
        assert_eq!(r.h_ur[2][3], C64::new(0.0, 0.0));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let cfg = small();
        let (f, _) = drop(&cfg, 2);
        let other = ScenarioConfig {
            num_dl_ues: 1,
            ..small()
        };
        let err = sample_realization(&f, &other, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn sample_variance_matches_beta() {
        // 1e5 draws of CN(0, 2): the sample variance has std ≈ 2/sqrt(1e5)
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 100_000;
        let var = (0..n).map(|_| complex_gaussian(2.0, &mut rng).norm_sqr()).sum::<f64>() / n as f64;
        assert!((1.96..=2.04).contains(&var), "sample variance {var}");
    }

    #[test]
    fn silent_repeaters_leave_direct_channel() {
        let cfg = small();
        let (_, r) = drop(&cfg, 3);
        let w = RepeaterWeights::zeros(4);
        assert_eq!(r.compound_dl(&w, 1).unwrap(), r.h_bd[1]);
        assert_eq!(r.compound_ul(&w, 2).unwrap(), r.h_ub[2]);
    }

    #[test]
    fn single_repeater_path() {
        let cfg = ScenarioConfig {
            num_repeaters: 1,
            ..small()
        };
        let (_, mut r) = drop(&cfg, 5);
        r.h_bd[0].fill(C64::new(0.0, 0.0));
        r.h_ub[0].fill(C64::new(0.0, 0.0));
        let w = RepeaterWeights(vec![2.0]);
        let dl = r.compound_dl(&w, 0).unwrap();
        let expected = &r.h_br[0] * (r.h_rd[0][0] * 2.0);
        assert!((dl - expected).norm() < 1e-15);
        let ul = r.compound_ul(&w, 0).unwrap();
        let expected = &r.h_rb[0] * (r.h_ur[0][0] * 2.0);
        assert!((ul - expected).norm() < 1e-15);
    }

    #[test]
    fn compound_matches_naive_summation() {
        let cfg = small();
        let (_, r) = drop(&cfg, 6);
        let w = RepeaterWeights(vec![3.0, 0.5, 10.0, 1.25]);
        for k in 0..2 {
            let h = r.compound_dl(&w, k).unwrap();
            for m in 0..6 {
                let mut acc = r.h_bd[k][m];
                for l in 0..4 {
                    acc += r.h_rd[l][k] * r.h_br[l][m] * w.0[l];
                }
                assert!((h[m] - acc).norm() <= 1e-12 * acc.norm().max(1e-300));
            }
        }
        for q in 0..3 {
            let h = r.compound_ul(&w, q).unwrap();
            for m in 0..5 {
                let mut acc = r.h_ub[q][m];
                for l in 0..4 {
                    acc += r.h_ur[q][l] * r.h_rb[l][m] * w.0[l];
                }
                assert!((h[m] - acc).norm() <= 1e-12 * acc.norm().max(1e-300));
            }
        }
    }

    #[test]
    fn compound_is_linear_in_weights() {
        let cfg = small();
        let (_, r) = drop(&cfg, 8);
        let a = RepeaterWeights(vec![1.0, 2.0, 3.0, 4.0]);
        let b = RepeaterWeights(vec![0.5, 7.0, 0.0, 2.0]);
        let diff = r.compound_dl(&b, 0).unwrap() - r.compound_dl(&a, 0).unwrap();
        let mut expected = CVector::zeros(6);
        for l in 0..4 {
            expected += &r.h_br[l] * (r.h_rd[l][0] * (b.0[l] - a.0[l]));
        }
        assert!((diff - &expected).norm() <= 1e-12 * expected.norm());
    }

    #[test]
    fn index_errors() {
        let cfg = small();
        let (_, r) = drop(&cfg, 9);
        let w = RepeaterWeights::zeros(4);
        assert!(matches!(r.compound_dl(&w, 2), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(
            r.compound_ul(&RepeaterWeights::zeros(3), 0),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn dump_round_trip() {
        let cfg = small();
        let (_, r) = drop(&cfg, 10);
        let mut buf = Vec::new();
        write_realization(&r, &mut buf).unwrap();
        assert_eq!(
            buf.len(),
            8 + 40 + 16 * (2 * 6 + 4 * 2 + 4 * 6 + 3 * 5 + 3 * 4 + 4 * 5 + 5 * 6 + 3 * 2)
        );
        let back = read_realization(buf.as_slice()).unwrap();
        assert_eq!(back, r);
        assert!(read_realization(&buf[..20]).is_err());
    }
}
