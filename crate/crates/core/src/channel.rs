//! Monte Carlo generator of correlated probe / quantum traces.
//!
//! Each packet draws one transmissivity `eta` from the fade. The probe reads
//! `eta` exactly, signal detections are `Poisson(mu * eta)`, background
//! detections are `Poisson(N_b)`. Signal bits are wrong with probability
//! `<Q>`, background bits with probability 1/2.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::arts::{PacketRecord, Trace, DEFAULT_PACKET_DURATION};
use crate::error::{Error, Result};
use crate::fading::LognormalFade;

/// How the probe relates to the quantum channel transmissivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correlation {
    /// Probe amplitude equals the transmissivity.
    #[default]
    Perfect,
}

impl std::fmt::Display for Correlation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Correlation::Perfect => f.write_str("perfect"),
        }
    }
}

impl std::str::FromStr for Correlation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perfect" => Ok(Correlation::Perfect),
            other => Err(Error::InvalidSpec(format!("unknown correlation mode `{other}`"))),
        }
    }
}

/// Ground truth of a simulated link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct ChannelSpec {
    /// `mu`: expected signal sifted counts per packet at unit transmissivity.
    pub mean_signal_per_packet: f64,
    /// `N_b`
    pub background_per_packet: f64,
    /// `<Q>`
    pub intrinsic_qber: f64,
    /// Unit-mean fade.
    pub fade: LognormalFade,
    #[serde(default)]
    pub correlation: Correlation,
}

#[derive(Deserialize)]
struct RawSpec {
    mean_signal_per_packet: f64,
    background_per_packet: f64,
    intrinsic_qber: f64,
    fade: LognormalFade,
    #[serde(default)]
    correlation: Correlation,
}

impl TryFrom<RawSpec> for ChannelSpec {
    type Error = Error;

    fn try_from(r: RawSpec) -> Result<Self> {
        let spec = ChannelSpec {
            mean_signal_per_packet: r.mean_signal_per_packet,
            background_per_packet: r.background_per_packet,
            intrinsic_qber: r.intrinsic_qber,
            fade: r.fade,
            correlation: r.correlation,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl ChannelSpec {
    pub fn new(
        mean_signal_per_packet: f64,
        background_per_packet: f64,
        intrinsic_qber: f64,
        sigma_sq: f64,
    ) -> Result<Self> {
        let spec = Self {
            mean_signal_per_packet,
            background_per_packet,
            intrinsic_qber,
            fade: LognormalFade::normalized(sigma_sq)?,
            correlation: Correlation::Perfect,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds the spec from an SNR, defined as (signal + background) over
    /// background per packet, i.e. `N_b = mu / (snr - 1)`.
    pub fn from_snr(mean_signal_per_packet: f64, snr: f64, intrinsic_qber: f64, sigma_sq: f64) -> Result<Self> {
        if !(snr > 1.0) {
            return Err(Error::InvalidSpec(format!(
                "SNR must exceed 1 for a finite background, got {snr}"
            )));
        }
        let background = if snr.is_infinite() {
            0.0
        } else {
            mean_signal_per_packet / (snr - 1.0)
        };
        Self::new(mean_signal_per_packet, background, intrinsic_qber, sigma_sq)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_signal_per_packet > 0.0) || !self.mean_signal_per_packet.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "mean signal per packet must be positive, got {}",
                self.mean_signal_per_packet
            )));
        }
        if !(self.background_per_packet >= 0.0) || !self.background_per_packet.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "background per packet must be non-negative, got {}",
                self.background_per_packet
            )));
        }
        if !(0.0..=0.5).contains(&self.intrinsic_qber) {
            return Err(Error::InvalidSpec(format!(
                "intrinsic qber must lie in [0, 0.5], got {}",
                self.intrinsic_qber
            )));
        }
        if self.fade.mean_intensity() != 1.0 {
            return Err(Error::InvalidSpec(format!(
                "channel fade must have unit mean, got {}",
                self.fade.mean_intensity()
            )));
        }
        Ok(())
    }

    /// `(mu + N_b) / N_b`; infinite without background.
    pub fn snr(&self) -> f64 {
        (self.mean_signal_per_packet + self.background_per_packet) / self.background_per_packet
    }

    /// Expected QBER of the whole acquisition.
    pub fn expected_qber(&self) -> f64 {
        let total = self.mean_signal_per_packet + self.background_per_packet;
        (self.intrinsic_qber * self.mean_signal_per_packet + 0.5 * self.background_per_packet) / total
    }

    /// Simulates `n_packets` packets; a pure function of `(self, n_packets, seed)`.
    pub fn generate(&self, n_packets: usize, seed: u64) -> Result<Trace> {
        self.validate()?;
        if n_packets == 0 {
            return Err(Error::InvalidTrace("cannot simulate zero packets".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = self.mean_signal_per_packet;
        let nb = self.background_per_packet;
        let background = if nb > 0.0 {
            Some(Poisson::new(nb).map_err(|e| Error::InvalidSpec(e.to_string()))?)
        } else {
            None
        };
        let mut packets = Vec::with_capacity(n_packets);
        for i in 0..n_packets {
            let eta = self.fade.draw(&mut rng);
            let signal = poisson_count(mu * eta, &mut rng);
            let noise = background.map_or(0, |d| d.sample(&mut rng) as u64);
            let errors = binomial_count(signal, self.intrinsic_qber, &mut rng)
                + binomial_count(noise, 0.5, &mut rng);
            packets.push(PacketRecord::new(i as u64, eta, signal + noise, errors));
        }
        Trace::new(packets, DEFAULT_PACKET_DURATION)
    }
}

fn poisson_count(lambda: f64, rng: &mut ChaCha8Rng) -> u64 {
    if !(lambda > 0.0) {
        return 0;
    }
    match Poisson::new(lambda) {
        Ok(d) => d.sample(rng) as u64,
        // only reachable for absurdly large fades
        Err(_) => lambda.round() as u64,
    }
}

fn binomial_count(n: u64, p: f64, rng: &mut ChaCha8Rng) -> u64 {
    if n == 0 || p == 0.0 {
        return 0;
    }
    Binomial::new(n, p).expect("p validated to [0, 0.5]").sample(rng)
}
