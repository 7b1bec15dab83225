//! Log-normal scintillation model.
//!
//! The fade is parameterized by its first moment `mean_intensity` and the
//! log-variance `sigma_sq`, so that `ln V ~ N(ln <V> - sigma_sq/2, sigma_sq)`
//! and `E[V] = <V>` exactly. A zero `sigma_sq` is a constant channel: it has
//! no density but survival and sampling are well defined.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf_inv, erfc};

use crate::error::{Error, Result};

/// `ln(1 + variance / mean^2)`: the log-variance of a log-normal with the
/// given first two moments.
pub fn sigma_sq_from_moments(mean: f64, variance: f64) -> Result<f64> {
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(Error::Domain(format!("mean must be positive, got {mean}")));
    }
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::Domain(format!(
            "variance must be non-negative, got {variance}"
        )));
    }
    Ok((variance / (mean * mean)).ln_1p())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFade")]
pub struct LognormalFade {
    mean_intensity: f64,
    sigma_sq: f64,
}

#[derive(Deserialize)]
struct RawFade {
    mean_intensity: f64,
    sigma_sq: f64,
}

impl TryFrom<RawFade> for LognormalFade {
    type Error = Error;

    fn try_from(raw: RawFade) -> Result<Self> {
        LognormalFade::new(raw.mean_intensity, raw.sigma_sq)
    }
}

impl LognormalFade {
    pub fn new(mean_intensity: f64, sigma_sq: f64) -> Result<Self> {
        if !(mean_intensity > 0.0) || !mean_intensity.is_finite() {
            return Err(Error::Domain(format!(
                "mean_intensity must be positive and finite, got {mean_intensity}"
            )));
        }
        if !(sigma_sq >= 0.0) || !sigma_sq.is_finite() {
            return Err(Error::Domain(format!(
                "sigma_sq must be non-negative and finite, got {sigma_sq}"
            )));
        }
        Ok(Self {
            mean_intensity,
            sigma_sq,
        })
    }

    /// Unit-mean fade, as used for normalized channel transmissivity.
    pub fn normalized(sigma_sq: f64) -> Result<Self> {
        Self::new(1.0, sigma_sq)
    }

    pub fn mean_intensity(&self) -> f64 {
        self.mean_intensity
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_sq.sqrt()
    }

    /// Mean of `ln V`.
    pub fn log_location(&self) -> f64 {
        self.mean_intensity.ln() - 0.5 * self.sigma_sq
    }

    pub fn is_degenerate(&self) -> bool {
        self.sigma_sq == 0.0
    }

    /// Median of the fade, `<V> exp(-sigma_sq/2)`.
    pub fn median(&self) -> f64 {
        self.log_location().exp()
    }

    pub fn pdf(&self, v: f64) -> Result<f64> {
        if !(v > 0.0) {
            return Err(Error::Domain(format!("pdf needs v > 0, got {v}")));
        }
        if self.is_degenerate() {
            return Err(Error::DegenerateDistribution);
        }
        let sigma = self.sigma();
        let z = (v / self.mean_intensity).ln() + 0.5 * self.sigma_sq;
        let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * sigma * v);
        Ok(norm * (-z * z / (2.0 * self.sigma_sq)).exp())
    }

    /// `P(V > threshold)`.
    pub fn survival_fraction(&self, threshold: f64) -> f64 {
        self.upper_tail(threshold, 0.5)
    }

    /// `E[V/<V> ; V > threshold]`: share of the transmitted intensity carried
    /// by fades above the threshold.
    pub fn intensity_weighted_survival(&self, threshold: f64) -> f64 {
        self.upper_tail(threshold, -0.5)
    }

    // 1/2 erfc((ln(T/<V>) + shift*sigma_sq) / sqrt(2 sigma_sq))
    fn upper_tail(&self, threshold: f64, shift: f64) -> f64 {
        if threshold <= 0.0 {
            return 1.0;
        }
        if threshold == f64::INFINITY {
            return 0.0;
        }
        if self.is_degenerate() {
            return if self.mean_intensity > threshold { 1.0 } else { 0.0 };
        }
        let arg = ((threshold / self.mean_intensity).ln() + shift * self.sigma_sq)
            / (2.0 * self.sigma_sq).sqrt();
        0.5 * erfc(arg)
    }

    /// Inverse CDF. `p` is clamped to `[0, 1]`.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        if p == 0.0 {
            return 0.0;
        }
        if p == 1.0 {
            return f64::INFINITY;
        }
        if self.is_degenerate() {
            return self.mean_intensity;
        }
        let z = std::f64::consts::SQRT_2 * erf_inv(2.0 * p - 1.0);
        (self.log_location() + self.sigma() * z).exp()
    }

    /// One draw from `rng`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        (self.log_location() + self.sigma() * z).exp()
    }

    /// `n` i.i.d. draws from a ChaCha8 stream seeded with `seed`.
    pub fn sample(&self, seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.draw(&mut rng)).collect()
    }

    /// Maximum-likelihood fit: population variance of the logs, and the mean
    /// recovered from the log-location.
    pub fn fit_mle(samples: &[f64]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: samples.len(),
            });
        }
        if let Some((i, v)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
        {
            return Err(Error::Domain(format!(
                "sample {i} must be positive and finite, got {v}"
            )));
        }
        let n = samples.len() as f64;
        let mean_log = samples.iter().map(|v| v.ln()).sum::<f64>() / n;
        let var_log = samples
            .iter()
            .map(|v| {
                let d = v.ln() - mean_log;
                d * d
            })
            .sum::<f64>()
            / n;
        // rounding can leave a tiny residue for constant samples
        let sigma_sq = if samples.iter().all(|v| *v == samples[0]) {
            0.0
        } else {
            var_log
        };
        Self::new((mean_log + 0.5 * sigma_sq).exp(), sigma_sq)
    }
}

#[cfg(test)]
#[path = "../tests/common/quadrature.rs"]
mod quadrature;
