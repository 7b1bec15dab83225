use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Packet duration used when an acquisition does not state one, in seconds.
pub const DEFAULT_PACKET_DURATION: f64 = 1e-3;

/// One acquisition packet: the probe amplitude seen during the packet and the
/// sifted detections (and errors among them) it carried.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub index: u64,
    pub probe_voltage: f64,
    pub sifted_count: u64,
    pub error_count: u64,
}

impl PacketRecord {
    pub fn new(index: u64, probe_voltage: f64, sifted_count: u64, error_count: u64) -> Self {
        Self {
            index,
            probe_voltage,
            sifted_count,
            error_count,
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        if !(self.probe_voltage >= 0.0) || !self.probe_voltage.is_finite() {
            return Err(format!(
                "packet {}: probe_voltage must be finite and non-negative, got {}",
                self.index, self.probe_voltage
            ));
        }
        if self.error_count > self.sifted_count {
            return Err(format!(
                "packet {}: error_count {} exceeds sifted_count {}",
                self.index, self.error_count, self.sifted_count
            ));
        }
        Ok(())
    }
}

/// An ordered acquisition of packets. Always non-empty with strictly
/// increasing packet indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    packets: Vec<PacketRecord>,
    packet_duration: f64,
}

impl Trace {
    pub fn new(packets: Vec<PacketRecord>, packet_duration: f64) -> Result<Self> {
        if packets.is_empty() {
            return Err(Error::InvalidTrace("a trace needs at least one packet".into()));
        }
        if !(packet_duration > 0.0) || !packet_duration.is_finite() {
            return Err(Error::InvalidTrace(format!(
                "packet duration must be positive, got {packet_duration}"
            )));
        }
        for p in &packets {
            p.check().map_err(Error::InvalidTrace)?;
        }
        if let Some(w) = packets.windows(2).find(|w| w[1].index <= w[0].index) {
            return Err(Error::InvalidTrace(format!(
                "packet indices must be strictly increasing ({} then {})",
                w[0].index, w[1].index
            )));
        }
        Ok(Self {
            packets,
            packet_duration,
        })
    }

    /// Trace with consecutive indices from 0 and the default packet duration.
    pub fn from_counts<I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, u64, u64)>,
    {
        let packets = rows
            .into_iter()
            .enumerate()
            .map(|(i, (v, s, e))| PacketRecord::new(i as u64, v, s, e))
            .collect();
        Self::new(packets, DEFAULT_PACKET_DURATION)
    }

    pub fn packets(&self) -> &[PacketRecord] {
        &self.packets
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn packet_duration(&self) -> f64 {
        self.packet_duration
    }

    pub fn total_sifted(&self) -> u64 {
        self.packets.iter().map(|p| p.sifted_count).sum()
    }

    pub fn total_errors(&self) -> u64 {
        self.packets.iter().map(|p| p.error_count).sum()
    }

    pub fn probe_voltages(&self) -> impl Iterator<Item = f64> + '_ {
        self.packets.iter().map(|p| p.probe_voltage)
    }
}
