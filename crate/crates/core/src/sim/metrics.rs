//! Per-flow results and their CSV form.

use std::io;

use crate::phy::Direction;
use crate::transport::FlowKind;

/// Why bits never reached the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropCause {
    Misalignment,
    Bler,
    RetxExhausted,
    Queue,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Drops {
    pub misalignment_bits: u64,
    pub bler_bits: u64,
    pub retx_bits: u64,
    pub queue_bits: u64,
}

impl Drops {
    pub fn add(&mut self, cause: DropCause, bits: u64) {
        match cause {
            DropCause::Misalignment => self.misalignment_bits += bits,
            DropCause::Bler => self.bler_bits += bits,
            DropCause::RetxExhausted => self.retx_bits += bits,
            DropCause::Queue => self.queue_bits += bits,
        }
    }

    pub fn total(&self) -> u64 {
        self.misalignment_bits + self.bler_bits + self.retx_bits + self.queue_bits
    }
}

/// Scenario parameters echoed on every row.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamEcho {
    pub altitude_km: f64,
    pub gnss: bool,
    /// `None` when HARQ is disabled.
    pub harq_n: Option<u32>,
    /// `None` for FDD.
    pub m_dl: Option<u32>,
    pub n_gp: Option<u32>,
    pub numerology: u8,
    pub payload: String,
    pub placement: String,
    pub rate_mbps: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencySummary {
    pub mean_s: f64,
    pub p50_s: f64,
    pub p95_s: f64,
    pub p99_s: f64,
}

impl LatencySummary {
    /// Nearest-rank percentiles; `None` for an empty sample.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut v = samples.to_vec();
        v.sort_by(f64::total_cmp);
        let rank = |p: f64| v[((p * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Some(Self {
            mean_s: v.iter().sum::<f64>() / v.len() as f64,
            p50_s: rank(0.50),
            p95_s: rank(0.95),
            p99_s: rank(0.99),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowReport {
    pub flow_id: usize,
    pub ue_id: usize,
    pub kind: FlowKind,
    pub direction: Direction,
    pub offered_bits: u64,
    pub delivered_bits: u64,
    pub drops: Drops,
    /// Bits of packets still queued or in flight when the run ended.
    pub residual_bits: u64,
    pub latency: Option<LatencySummary>,
    pub throughput_bps: f64,
    /// Aggregate delivered rate of all flows sharing this flow's direction.
    pub cell_throughput_bps: f64,
    pub max_doppler_hz: f64,
    /// Link-layer packets lost and recovered end to end (TCP only).
    pub link_drops: u64,
    pub tcp_timeouts: u64,
    pub harq_inflight_violations: u64,
}

impl FlowReport {
    pub fn conserved(&self) -> bool {
        self.offered_bits == self.delivered_bits + self.drops.total() + self.residual_bits
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub scenario_id: String,
    pub duration_s: f64,
    pub params: ParamEcho,
    pub flows: Vec<FlowReport>,
}

/// Frozen CSV column order: identifiers, then parameters, then metrics, each
/// group alphabetical.
pub const CSV_COLUMNS: [&str; 32] = [
    "direction",
    "flow_id",
    "kind",
    "scenario_id",
    "ue_id",
    "altitude_km",
    "gnss",
    "harq_n",
    "m_dl",
    "n_gp",
    "numerology",
    "payload",
    "placement",
    "rate_mbps",
    "seed",
    "cell_throughput_bps",
    "delivered_bits",
    "drop_bler_bits",
    "drop_misalignment_bits",
    "drop_queue_bits",
    "drop_retx_bits",
    "harq_inflight_violations",
    "latency_mean_s",
    "latency_p50_s",
    "latency_p95_s",
    "latency_p99_s",
    "link_drops",
    "max_doppler_hz",
    "offered_bits",
    "residual_bits",
    "tcp_timeouts",
    "throughput_bps",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsReport {
    pub fn rows(&self) -> Vec<Vec<String>> {
        let p = &self.params;
        self.flows
            .iter()
            .map(|f| {
                let lat = |g: fn(&LatencySummary) -> f64| opt(f.latency.as_ref().map(g));
                vec![
                    f.direction.as_str().to_string(),
                    f.flow_id.to_string(),
                    f.kind.as_str().to_string(),
                    self.scenario_id.clone(),
                    f.ue_id.to_string(),
                    p.altitude_km.to_string(),
                    if p.gnss { "on" } else { "off" }.to_string(),
                    p.harq_n.map_or("off".to_string(), |n| n.to_string()),
                    opt(p.m_dl),
                    opt(p.n_gp),
                    p.numerology.to_string(),
                    p.payload.clone(),
                    p.placement.clone(),
                    p.rate_mbps.to_string(),
                    p.seed.to_string(),
                    f.cell_throughput_bps.to_string(),
                    f.delivered_bits.to_string(),
                    f.drops.bler_bits.to_string(),
                    f.drops.misalignment_bits.to_string(),
                    f.drops.queue_bits.to_string(),
                    f.drops.retx_bits.to_string(),
                    f.harq_inflight_violations.to_string(),
                    lat(|l| l.mean_s),
                    lat(|l| l.p50_s),
                    lat(|l| l.p95_s),
                    lat(|l| l.p99_s),
                    f.link_drops.to_string(),
                    f.max_doppler_hz.to_string(),
                    f.offered_bits.to_string(),
                    f.residual_bits.to_string(),
                    f.tcp_timeouts.to_string(),
                    f.throughput_bps.to_string(),
                ]
            })
            .collect()
    }
}

/// Writes the header and every report's rows, in order.
pub fn write_csv<W: io::Write>(out: W, reports: &[MetricsReport]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in reports {
        for row in r.rows() {
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(reports: &[MetricsReport]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, reports).expect("writing CSV to memory");
    String::from_utf8(buf).expect("CSV is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_sorted_within_groups() {
        for group in [&CSV_COLUMNS[..5], &CSV_COLUMNS[5..15], &CSV_COLUMNS[15..]] {
            let mut sorted = group.to_vec();
            sorted.sort();
            assert_eq!(sorted, group);
        }
    }

    #[test]
    fn percentiles_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let s = LatencySummary::from_samples(&v).unwrap();
        assert_eq!((s.p50_s, s.p95_s, s.p99_s), (50.0, 95.0, 99.0));
        assert_eq!(s.mean_s, 50.5);
        assert!(LatencySummary::from_samples(&[]).is_none());
    }
}
