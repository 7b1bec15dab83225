//! Analytic predictions of the selected statistics under the assumption that
//! detections and probe follow the same (fully correlated) log-normal fade.
//!
//! With `P(T)` the fade survival and `W(T)` its intensity-weighted survival:
//!
//! ```text
//! N_P(T) = N_P(0) P(T)
//! N_S(T) = N_b N_P(T) + (N_S(0) - N_b N_P(0)) W(T)
//! Q(T)   = <Q> (1 - N_b/s(T)) + N_b / (2 s(T)),   s(T) = N_S(T)/N_P(T)
//! R(T)   = N_S(T)/N_S(0) [1 - 2 h2(Q(T))]
//! ```

use serde::{Deserialize, Serialize};

use super::keyrate::key_rate;
use super::search::{golden_section_max, scan_max};
use crate::error::{Error, Result};
use crate::fading::LognormalFade;

// relative slack on the s(T) >= N_b check, for rounding in the erfc terms
const FLOOR_SLACK: f64 = 1e-9;

/// Calibration of the analytic model: the fade plus measured totals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelInputs {
    pub fade: LognormalFade,
    /// `N_b`, background counts per packet.
    pub background_per_packet: f64,
    /// `<Q>`, error rate of the signal detections alone.
    pub intrinsic_qber: f64,
    /// `N_S(0)`, sifted bits without selection.
    pub sifted_total: f64,
    /// `N_P(0)`, packets without selection.
    pub packets_total: f64,
}

impl ModelInputs {
    pub fn new(
        fade: LognormalFade,
        background_per_packet: f64,
        intrinsic_qber: f64,
        sifted_total: f64,
        packets_total: f64,
    ) -> Result<Self> {
        let inputs = Self {
            fade,
            background_per_packet,
            intrinsic_qber,
            sifted_total,
            packets_total,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    /// Calibrates `N_S(0)` from the unselected QBER by inverting the QBER
    /// model at `T = 0`: `s(0) = N_b (1/2 - <Q>) / (Q(0) - <Q>)`.
    pub fn from_initial_qber(
        fade: LognormalFade,
        background_per_packet: f64,
        intrinsic_qber: f64,
        initial_qber: f64,
        packets_total: f64,
    ) -> Result<Self> {
        if !(intrinsic_qber..=0.5).contains(&initial_qber) {
            return Err(Error::Domain(format!(
                "initial qber must lie in [<Q>, 0.5] = [{intrinsic_qber}, 0.5], got {initial_qber}"
            )));
        }
        let excess = initial_qber - intrinsic_qber;
        if excess == 0.0 {
            return Err(Error::Domain(
                "initial qber equal to <Q> does not determine the counts per packet".into(),
            ));
        }
        let counts_per_packet = background_per_packet * (0.5 - intrinsic_qber) / excess;
        Self::new(
            fade,
            background_per_packet,
            intrinsic_qber,
            counts_per_packet * packets_total,
            packets_total,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.background_per_packet >= 0.0) || !self.background_per_packet.is_finite() {
            return Err(Error::Domain(format!(
                "background per packet must be non-negative, got {}",
                self.background_per_packet
            )));
        }
        if !(0.0..=0.5).contains(&self.intrinsic_qber) {
            return Err(Error::Domain(format!(
                "intrinsic qber must lie in [0, 0.5], got {}",
                self.intrinsic_qber
            )));
        }
        if !(self.packets_total > 0.0) || !self.packets_total.is_finite() {
            return Err(Error::Domain(format!(
                "N_P(0) must be positive, got {}",
                self.packets_total
            )));
        }
        if !(self.sifted_total > 0.0) || !self.sifted_total.is_finite() {
            return Err(Error::Domain(format!(
                "N_S(0) must be positive, got {}",
                self.sifted_total
            )));
        }
        let background_total = self.background_per_packet * self.packets_total;
        if self.sifted_total < background_total * (1.0 - FLOOR_SLACK) {
            return Err(Error::InconsistentCalibration {
                sifted_total: self.sifted_total,
                background_total,
            });
        }
        Ok(())
    }

    fn signal_total(&self) -> f64 {
        (self.sifted_total - self.background_per_packet * self.packets_total).max(0.0)
    }

    /// Predicted `N_P(T)`.
    pub fn predict_packets(&self, threshold: f64) -> f64 {
        self.packets_total * self.fade.survival_fraction(threshold)
    }

    /// Predicted `N_S(T)`.
    pub fn predict_sifted(&self, threshold: f64) -> Result<f64> {
        self.validate()?;
        if threshold <= 0.0 {
            return Ok(self.sifted_total);
        }
        Ok(self.background_per_packet * self.predict_packets(threshold)
            + self.signal_total() * self.fade.intensity_weighted_survival(threshold))
    }

    /// Predicted `s(T) = N_S(T)/N_P(T)`; `None` once no packet is predicted
    /// to survive.
    pub fn predict_counts_per_packet(&self, threshold: f64) -> Result<Option<f64>> {
        let packets = self.predict_packets(threshold);
        if packets <= 0.0 {
            return Ok(None);
        }
        Ok(Some(self.predict_sifted(threshold)? / packets))
    }

    /// Predicted QBER of the selected bits. Past the last surviving packet
    /// this is the `T -> inf` limit `<Q>`.
    pub fn predict_qber(&self, threshold: f64) -> Result<f64> {
        let nb = self.background_per_packet;
        let Some(s) = self.predict_counts_per_packet(threshold)? else {
            return Ok(self.intrinsic_qber);
        };
        if s < nb * (1.0 - FLOOR_SLACK) {
            return Err(Error::ModelInconsistency {
                threshold,
                counts_per_packet: s,
                background: nb,
            });
        }
        let background_share = if nb == 0.0 { 0.0 } else { (nb / s).min(1.0) };
        Ok(self.intrinsic_qber * (1.0 - background_share) + 0.5 * background_share)
    }

    /// Predicted secret key rate per unselected sifted bit.
    pub fn predict_rate(&self, threshold: f64) -> Result<f64> {
        let fraction = (self.predict_sifted(threshold)? / self.sifted_total).clamp(0.0, 1.0);
        let qber = self.predict_qber(threshold)?.clamp(0.0, 0.5);
        key_rate(fraction, qber)
    }

    /// Evaluates every prediction on a strictly increasing threshold grid.
    pub fn curve(&self, thresholds: &[f64]) -> Result<PredictionCurve> {
        self.validate()?;
        check_grid(thresholds)?;
        let mut curve = PredictionCurve {
            inputs: *self,
            thresholds: thresholds.to_vec(),
            packets: Vec::with_capacity(thresholds.len()),
            sifted: Vec::with_capacity(thresholds.len()),
            counts_per_packet: Vec::with_capacity(thresholds.len()),
            qber: Vec::with_capacity(thresholds.len()),
            rate: Vec::with_capacity(thresholds.len()),
        };
        for &t in thresholds {
            curve.packets.push(self.predict_packets(t));
            curve.sifted.push(self.predict_sifted(t)?);
            curve.counts_per_packet.push(self.predict_counts_per_packet(t)?);
            curve.qber.push(self.predict_qber(t)?);
            curve.rate.push(self.predict_rate(t)?);
        }
        Ok(curve)
    }

    /// Global maximizer of the predicted rate over `[0, range.t_max]`.
    pub fn optimize_threshold(&self, range: &SearchRange) -> Result<OptimalThreshold> {
        self.validate()?;
        let grid = range.grid(&self.fade)?;
        let rate = |t: f64| self.predict_rate(t);
        let (i, best_rate) = scan_max(&grid, rate)?;
        let mut best = (grid[i], best_rate);
        if best_rate > 0.0 {
            let lo = if i == 0 { grid[0] } else { grid[i - 1] };
            let hi = grid[(i + 1).min(grid.len() - 1)];
            let refined = golden_section_max(lo, hi, range.tolerance(), rate)?;
            if refined.1 > best.1 {
                best = refined;
            }
        }
        if best.1 <= 0.0 {
            return Ok(OptimalThreshold {
                threshold: 0.0,
                rate: 0.0,
                qber: self.predict_qber(0.0)?,
                has_key: false,
            });
        }
        Ok(OptimalThreshold {
            threshold: best.0,
            rate: best.1,
            qber: self.predict_qber(best.0)?,
            has_key: true,
        })
    }
}

fn check_grid(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::Domain("threshold grid is empty".into()));
    }
    if let Some(t) = thresholds.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
        return Err(Error::Domain(format!(
            "thresholds must be finite and non-negative, got {t}"
        )));
    }
    if thresholds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("thresholds must be strictly increasing".into()));
    }
    Ok(())
}

/// Model predictions sampled on a threshold grid, with the inputs that
/// produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionCurve {
    pub inputs: ModelInputs,
    pub thresholds: Vec<f64>,
    pub packets: Vec<f64>,
    pub sifted: Vec<f64>,
    pub counts_per_packet: Vec<Option<f64>>,
    pub qber: Vec<f64>,
    pub rate: Vec<f64>,
}

impl PredictionCurve {
    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        self.inputs.validate()?;
        check_grid(&self.thresholds)?;
        let n = self.len();
        let lens = [
            self.packets.len(),
            self.sifted.len(),
            self.counts_per_packet.len(),
            self.qber.len(),
            self.rate.len(),
        ];
        if lens.iter().any(|l| *l != n) {
            return Err(Error::Domain(format!(
                "prediction arrays have unequal lengths: thresholds {n}, others {lens:?}"
            )));
        }
        Ok(())
    }
}

/// Threshold search settings: dense scan of `[0, t_max]` followed by a
/// golden-section refinement around the best grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchRange {
    /// Upper end of the scan; defaults to the fade's 99.99th percentile.
    pub t_max: Option<f64>,
    /// Number of log-spaced grid points above the fade's 1st percentile.
    pub points: usize,
}

impl Default for SearchRange {
    fn default() -> Self {
        Self {
            t_max: None,
            points: 2000,
        }
    }
}

impl SearchRange {
    const MIN_POINTS: usize = 1000;

    fn tolerance(&self) -> f64 {
        1e-12
    }

    /// `0`, a linear ramp up to the 1st percentile, then log-spaced points up
    /// to `t_max`.
    pub fn grid(&self, fade: &LognormalFade) -> Result<Vec<f64>> {
        let points = self.points.max(Self::MIN_POINTS);
        let low = fade.quantile(0.01);
        let t_max = self.t_max.unwrap_or_else(|| fade.quantile(0.9999));
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::Domain(format!("t_max must be positive, got {t_max}")));
        }
        let mut grid = vec![0.0];
        if fade.is_degenerate() || t_max <= low {
            // constant fade: the only decision is keep-all vs keep-none
            let n = points;
            grid.extend((1..=n).map(|k| t_max * k as f64 / n as f64));
            return Ok(grid);
        }
        const RAMP: usize = 20;
        grid.extend((1..RAMP).map(|k| low * k as f64 / RAMP as f64));
        let (a, b) = (low.ln(), t_max.ln());
        grid.extend((0..points).map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp()));
        grid.dedup_by(|x, y| *x <= *y);
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalThreshold {
    pub threshold: f64,
    pub rate: f64,
    /// Predicted QBER at `threshold`.
    pub qber: f64,
    /// False when the rate is zero everywhere in the range.
    pub has_key: bool,
}
