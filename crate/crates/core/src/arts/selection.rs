//! Empirical probe-threshold selection over recorded traces.

use serde::{Deserialize, Serialize};

use super::keyrate::key_rate;
use super::trace::Trace;
use crate::error::{Error, Result};

/// Statistics of the packets kept by a selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub threshold: f64,
    /// `N_P`
    pub selected_packets: u64,
    /// `N_S`
    pub sifted_total: u64,
    /// `E`
    pub error_total: u64,
    /// `N_S / N_P`, or 0 for an empty selection.
    pub counts_per_packet: f64,
    /// `E / N_S`; `None` when no sifted bit survived.
    pub qber: Option<f64>,
    pub rate: f64,
}

impl SelectionOutcome {
    /// Builds the outcome from selected totals. The rate is measured against
    /// `reference_sifted`, the sifted total of the unselected acquisition.
    pub fn from_totals(
        threshold: f64,
        selected_packets: u64,
        sifted_total: u64,
        error_total: u64,
        reference_sifted: u64,
    ) -> Self {
        debug_assert!(error_total <= sifted_total);
        debug_assert!(sifted_total <= reference_sifted);
        let counts_per_packet = if selected_packets > 0 {
            sifted_total as f64 / selected_packets as f64
        } else {
            0.0
        };
        let qber = (sifted_total > 0).then(|| error_total as f64 / sifted_total as f64);
        let rate = match qber {
            Some(q) if q <= 0.5 && reference_sifted > 0 => {
                let fraction = sifted_total as f64 / reference_sifted as f64;
                key_rate(fraction, q).unwrap_or(0.0)
            }
            _ => 0.0,
        };
        Self {
            threshold,
            selected_packets,
            sifted_total,
            error_total,
            counts_per_packet,
            qber,
            rate,
        }
    }
}

impl Trace {
    /// Keeps packets with `probe_voltage > threshold`.
    pub fn select(&self, threshold: f64) -> SelectionOutcome {
        let (mut n_p, mut n_s, mut e) = (0u64, 0u64, 0u64);
        let mut reference = 0u64;
        for p in self.packets() {
            if p.probe_voltage > 0.0 {
                reference += p.sifted_count;
            }
            if p.probe_voltage > threshold {
                n_p += 1;
                n_s += p.sifted_count;
                e += p.error_count;
            }
        }
        SelectionOutcome::from_totals(threshold, n_p, n_s, e, reference)
    }

    /// One [`Trace::select`] per threshold. Thresholds must be ascending.
    pub fn empirical_curve(&self, thresholds: &[f64]) -> Result<Vec<SelectionOutcome>> {
        if let Some(t) = thresholds.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return Err(Error::Domain(format!(
                "thresholds must be finite and non-negative, got {t}"
            )));
        }
        if thresholds.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Domain("thresholds must be sorted ascending".into()));
        }
        let index = ProbeIndex::new(self);
        Ok(thresholds.iter().map(|&t| index.select(t)).collect())
    }

    /// Exhaustive search over every distinct probe level for the threshold
    /// with the highest empirical rate. Ties go to the smallest threshold.
    pub fn best_probe_threshold(&self) -> SelectionOutcome {
        let index = ProbeIndex::new(self);
        let mut best = index.select(0.0);
        for t in index.levels() {
            let candidate = index.select(t);
            if candidate.rate > best.rate {
                best = candidate;
            }
        }
        best
    }
}

/// Packets sorted by probe voltage with suffix sums, so each threshold costs
/// one binary search.
struct ProbeIndex {
    probes: Vec<f64>,
    // suffix sums: [i] covers sorted packets i..n
    sifted: Vec<u64>,
    errors: Vec<u64>,
    reference: u64,
}

impl ProbeIndex {
    fn new(trace: &Trace) -> Self {
        let mut rows: Vec<(f64, u64, u64)> = trace
            .packets()
            .iter()
            .map(|p| (p.probe_voltage, p.sifted_count, p.error_count))
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = rows.len();
        let mut sifted = vec![0u64; n + 1];
        let mut errors = vec![0u64; n + 1];
        for i in (0..n).rev() {
            sifted[i] = sifted[i + 1] + rows[i].1;
            errors[i] = errors[i + 1] + rows[i].2;
        }
        let probes: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let first_positive = probes.partition_point(|v| *v <= 0.0);
        Self {
            reference: sifted[first_positive],
            probes,
            sifted,
            errors,
        }
    }

    fn select(&self, threshold: f64) -> SelectionOutcome {
        let start = self.probes.partition_point(|v| *v <= threshold);
        SelectionOutcome::from_totals(
            threshold,
            (self.probes.len() - start) as u64,
            self.sifted[start],
            self.errors[start],
            self.reference,
        )
    }

    /// Distinct positive probe levels, ascending.
    fn levels(&self) -> impl Iterator<Item = f64> + '_ {
        let mut last = 0.0;
        self.probes.iter().copied().filter(move |v| {
            let fresh = *v > last;
            if fresh {
                last = *v;
            }
            fresh
        })
    }
}
