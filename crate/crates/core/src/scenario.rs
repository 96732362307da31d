//! Experiment configuration, node placement and large-scale fading.
//!
//! A drop places the base station at the centre of a square deployment area
//! and scatters repeaters and UEs uniformly over it. Link gains follow a
//! log-distance model with one parameter set per link class.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Converts a power ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a power level in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// System parameters shared by every drop.
///
/// Powers are in watts, amplitudes (`si_attenuation`, `repeater_max_gain`)
/// are linear, spectral-efficiency targets are in bits/s/Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub num_tx_antennas: usize,
    pub num_rx_antennas: usize,
    pub num_dl_ues: usize,
    pub num_ul_ues: usize,
    pub num_repeaters: usize,
    /// Side of the square deployment area in meters.
    pub area_side: f64,
    /// Total BS transmit power.
    pub dl_power: f64,
    /// Per-UE uplink transmit power.
    pub ul_power: f64,
    /// Per-DL-UE power fractions; `None` splits `dl_power` evenly.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dl_power_coeffs: Option<Vec<f64>>,
    pub noise_power: f64,
    /// Residual self-interference amplitude after cancellation, in [0, 1].
    pub si_attenuation: f64,
    /// Hardware cap on the repeater amplitude gain.
    pub repeater_max_gain: f64,
    /// Cap on each repeater's output power.
    pub repeater_max_power: f64,
    pub qos_dl: f64,
    pub qos_ul: f64,
    pub weight_dl: f64,
    pub weight_ul: f64,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_tx_antennas: 32,
            num_rx_antennas: 32,
            num_dl_ues: 5,
            num_ul_ues: 5,
            num_repeaters: 32,
            area_side: 20.0,
            dl_power: 1.0,
            ul_power: 0.1,
            dl_power_coeffs: None,
            noise_power: dbm_to_watts(-96.0),
            si_attenuation: 1e-3,
            repeater_max_gain: 1e3,
            repeater_max_power: 0.1,
            qos_dl: 0.0,
            qos_ul: 0.0,
            weight_dl: 1.0,
            weight_ul: 1.0,
            rng_seed: 1,
        }
    }
}

impl ScenarioConfig {
    /// Power fraction η_k of DL UE `k`.
    pub fn eta(&self, k: usize) -> f64 {
        match &self.dl_power_coeffs {
            Some(c) => c[k],
            None => 1.0 / self.num_dl_ues as f64,
        }
    }

    pub fn etas(&self) -> Vec<f64> {
        (0..self.num_dl_ues).map(|k| self.eta(k)).collect()
    }

    /// Total BS antenna count, used by the antenna-preserved half-duplex baseline.
    pub fn total_antennas(&self) -> usize {
        self.num_tx_antennas + self.num_rx_antennas
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_tx_antennas == 0 || self.num_rx_antennas == 0 {
            return bad("antenna counts must be positive".into());
        }
        if self.num_tx_antennas < self.num_dl_ues {
            return bad(format!(
                "zero-forcing needs num_tx_antennas ({}) >= num_dl_ues ({})",
                self.num_tx_antennas, self.num_dl_ues
            ));
        }
        if self.num_rx_antennas < self.num_ul_ues {
            return bad(format!(
                "zero-forcing needs num_rx_antennas ({}) >= num_ul_ues ({})",
                self.num_rx_antennas, self.num_ul_ues
            ));
        }
        if !(self.area_side.is_finite() && self.area_side > 0.0) {
            return bad("area_side must be positive".into());
        }
        for (name, v) in [
            ("dl_power", self.dl_power),
            ("ul_power", self.ul_power),
            ("noise_power", self.noise_power),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive and finite"));
            }
        }
        if !(self.repeater_max_power > 0.0) {
            return bad("repeater_max_power must be positive".into());
        }
        if !(self.repeater_max_gain >= 0.0) || self.repeater_max_gain.is_infinite() {
            return bad("repeater_max_gain must be finite and non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.si_attenuation) {
            return bad("si_attenuation must lie in [0, 1]".into());
        }
        for (name, v) in [
            ("qos_dl", self.qos_dl),
            ("qos_ul", self.qos_ul),
            ("weight_dl", self.weight_dl),
            ("weight_ul", self.weight_ul),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative"));
            }
        }
        if let Some(c) = &self.dl_power_coeffs {
            if c.len() != self.num_dl_ues {
                return bad(format!(
                    "dl_power_coeffs has {} entries, expected {}",
                    c.len(),
                    self.num_dl_ues
                ));
            }
            if c.iter().any(|&e| !(0.0..=1.0).contains(&e)) {
                return bad("each dl_power_coeff must lie in [0, 1]".into());
            }
            if c.iter().sum::<f64>() > 1.0 + 1e-12 {
                return bad("dl_power_coeffs must sum to at most 1".into());
            }
        }
        Ok(())
    }
}

/// A point in the deployment plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub bs_position: Position,
    pub repeater_positions: Vec<Position>,
    pub dl_ue_positions: Vec<Position>,
    pub ul_ue_positions: Vec<Position>,
}

fn uniform_point<R: Rng + ?Sized>(side: f64, rng: &mut R) -> Position {
    Position::new(rng.random::<f64>() * side, rng.random::<f64>() * side)
}

/// Draws DL then UL UE positions, i.i.d. uniform over the square.
pub fn sample_ue_positions<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> (Vec<Position>, Vec<Position>) {
    let side = config.area_side;
    let dl = (0..config.num_dl_ues).map(|_| uniform_point(side, rng)).collect();
    let ul = (0..config.num_ul_ues).map(|_| uniform_point(side, rng)).collect();
    (dl, ul)
}

pub fn sample_repeater_positions<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Vec<Position> {
    (0..config.num_repeaters)
        .map(|_| uniform_point(config.area_side, rng))
        .collect()
}

/// Places the BS at the area centre and draws UEs, then repeaters, from `rng`.
pub fn sample_geometry<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Geometry {
    let (dl_ue_positions, ul_ue_positions) = sample_ue_positions(config, rng);
    let repeater_positions = sample_repeater_positions(config, rng);
    Geometry {
        bs_position: Position::new(config.area_side / 2.0, config.area_side / 2.0),
        repeater_positions,
        dl_ue_positions,
        ul_ue_positions,
    }
}

/// Log-distance path loss `β(d) = PL₀ · (max(d, d₀)/d₀)^(−n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogDistance {
    /// PL₀ in dB (gain at the reference distance).
    pub reference_gain_db: f64,
    /// d₀ in meters; also the distance floor.
    pub reference_distance: f64,
    pub exponent: f64,
}

impl Default for LogDistance {
    fn default() -> Self {
        Self {
            reference_gain_db: -30.0,
            reference_distance: 1.0,
            exponent: 3.67,
        }
    }
}

impl LogDistance {
    pub fn validate(&self) -> Result<()> {
        if !(self.reference_distance.is_finite() && self.reference_distance > 0.0) {
            return Err(Error::InvalidConfig(
                "path-loss reference distance must be positive".into(),
            ));
        }
        if !(self.exponent.is_finite() && self.exponent >= 0.0) {
            return Err(Error::InvalidConfig(
                "path-loss exponent must be finite and non-negative".into(),
            ));
        }
        if self.reference_gain_db.is_nan() || self.reference_gain_db == f64::INFINITY {
            return Err(Error::InvalidConfig(
                "path-loss reference gain must be below +inf dB".into(),
            ));
        }
        Ok(())
    }

    /// Linear power gain at distance `d` meters.
    pub fn gain(&self, d: f64) -> f64 {
        let ratio = d.max(self.reference_distance) / self.reference_distance;
        db_to_linear(self.reference_gain_db) * ratio.powf(-self.exponent)
    }
}

/// One log-distance parameter set per link class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathLossModel {
    pub bs_ue: LogDistance,
    pub bs_repeater: LogDistance,
    pub repeater_ue: LogDistance,
    pub ue_ue: LogDistance,
}

impl PathLossModel {
    pub fn validate(&self) -> Result<()> {
        self.bs_ue.validate()?;
        self.bs_repeater.validate()?;
        self.repeater_ue.validate()?;
        self.ue_ue.validate()
    }
}

/// Variances of every small-scale channel coefficient in a drop.
///
/// Indexing follows the channel names: `beta_rd[ℓ][k]`, `beta_ur[q][ℓ]`,
/// `beta_uu[q][k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeScaleFading {
    pub beta_bd: Vec<f64>,
    pub beta_rd: Vec<Vec<f64>>,
    pub beta_br: Vec<f64>,
    pub beta_ub: Vec<f64>,
    pub beta_ur: Vec<Vec<f64>>,
    pub beta_rb: Vec<f64>,
    pub beta_uu: Vec<Vec<f64>>,
}

impl LargeScaleFading {
    pub fn num_dl(&self) -> usize {
        self.beta_bd.len()
    }

    pub fn num_ul(&self) -> usize {
        self.beta_ub.len()
    }

    pub fn num_repeaters(&self) -> usize {
        self.beta_br.len()
    }

    /// Checks the dimensions against `config` and that all gains are non-negative.
    pub fn check(&self, config: &ScenarioConfig) -> Result<()> {
        let (k, q, l) = (config.num_dl_ues, config.num_ul_ues, config.num_repeaters);
        let mismatch = |what: &str| Err(Error::DimensionMismatch(format!("fading {what}")));
        if self.beta_bd.len() != k || self.beta_ub.len() != q || self.beta_br.len() != l {
            return mismatch("vector lengths");
        }
        if self.beta_rb.len() != l || self.beta_rd.len() != l || self.beta_rd.iter().any(|r| r.len() != k) {
            return mismatch("repeater tables");
        }
        if self.beta_ur.len() != q || self.beta_ur.iter().any(|r| r.len() != l) {
            return mismatch("beta_ur");
        }
        if self.beta_uu.len() != q || self.beta_uu.iter().any(|r| r.len() != k) {
            return mismatch("beta_uu");
        }
        let all = self
            .beta_bd
            .iter()
            .chain(&self.beta_br)
            .chain(&self.beta_ub)
            .chain(&self.beta_rb)
            .chain(self.beta_rd.iter().flatten())
            .chain(self.beta_ur.iter().flatten())
            .chain(self.beta_uu.iter().flatten());
        for &b in all {
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::InvalidConfig(format!("invalid fading gain {b}")));
            }
        }
        Ok(())
    }

    /// Keeps only the first `num_repeaters` repeaters.
    pub fn truncate_repeaters(&self, num_repeaters: usize) -> Self {
        let l = num_repeaters.min(self.num_repeaters());
        Self {
            beta_bd: self.beta_bd.clone(),
            beta_rd: self.beta_rd[..l].to_vec(),
            beta_br: self.beta_br[..l].to_vec(),
            beta_ub: self.beta_ub.clone(),
            beta_ur: self.beta_ur.iter().map(|r| r[..l].to_vec()).collect(),
            beta_rb: self.beta_rb[..l].to_vec(),
            beta_uu: self.beta_uu.clone(),
        }
    }
}

/// Evaluates the path-loss model on every link of `geometry`.
///
/// The repeater→BS gain mirrors BS→repeater (reciprocity).
pub fn derive_fading(geometry: &Geometry, model: &PathLossModel) -> Result<LargeScaleFading> {
    model.validate()?;
    let bs = geometry.bs_position;
    let reps = &geometry.repeater_positions;
    let dl = &geometry.dl_ue_positions;
    let ul = &geometry.ul_ue_positions;

    let beta_bd = dl.iter().map(|p| model.bs_ue.gain(bs.distance(p))).collect();
    let beta_br: Vec<f64> = reps.iter().map(|r| model.bs_repeater.gain(bs.distance(r))).collect();
    let beta_rd = reps
        .iter()
        .map(|r| dl.iter().map(|p| model.repeater_ue.gain(r.distance(p))).collect())
        .collect();
    let beta_ub = ul.iter().map(|p| model.bs_ue.gain(p.distance(&bs))).collect();
    let beta_ur = ul
        .iter()
        .map(|p| reps.iter().map(|r| model.repeater_ue.gain(p.distance(r))).collect())
        .collect();
    let beta_uu = ul
        .iter()
        .map(|p| dl.iter().map(|d| model.ue_ue.gain(p.distance(d))).collect())
        .collect();

    Ok(LargeScaleFading {
        beta_bd,
        beta_rd,
        beta_rb: beta_br.clone(),
        beta_br,
        beta_ub,
        beta_ur,
        beta_uu,
    })
}
