//! NR frame timing, TDD/FDD duplexing, hybrid timing advance and the
//! round-robin slot scheduler.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhyError {
    #[error("numerology must be in [0, 4], got {0}")]
    BadNumerology(u8),
    #[error("TDD pattern needs at least one DL slot (M >= 1), got {0}")]
    NoDownlinkSlots(i64),
    #[error("guard period slot count must be >= 0, got {0}")]
    NegativeGuard(i64),
    #[error("alignment window must be positive, got {0} s")]
    NonPositiveWindow(f64),
}

/// NR numerology index; the slot lasts `1 / 2^mu` ms and carries 14 symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Numerology(u8);

impl Numerology {
    pub const SYMBOLS_PER_SLOT: u32 = 14;

    pub fn new(mu: u8) -> Result<Self, PhyError> {
        if mu <= 4 {
            Ok(Self(mu))
        } else {
            Err(PhyError::BadNumerology(mu))
        }
    }

    pub fn mu(self) -> u8 {
        self.0
    }

    pub fn slot_duration_ns(self) -> u64 {
        1_000_000 >> self.0
    }

    pub fn slot_duration_s(self) -> f64 {
        self.slot_duration_ns() as f64 * 1e-9
    }

    pub fn subcarrier_spacing_khz(self) -> u32 {
        15 << self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotKind {
    Downlink,
    Guard,
    Uplink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Dl,
    Ul,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Dl => "dl",
            Direction::Ul => "ul",
        }
    }
}

/// `[DL x M][GP x N][UL x 1]`, repeated forever.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TddPattern {
    m_dl_slots: u32,
    n_gp_slots: u32,
}

impl TddPattern {
    pub fn cycle_len(&self) -> u64 {
        u64::from(self.m_dl_slots) + u64::from(self.n_gp_slots) + 1
    }

    pub fn m_dl_slots(&self) -> u32 {
        self.m_dl_slots
    }

    pub fn n_gp_slots(&self) -> u32 {
        self.n_gp_slots
    }

    pub fn slot_kind(&self, slot_index: u64) -> SlotKind {
        let pos = slot_index % self.cycle_len();
        if pos < u64::from(self.m_dl_slots) {
            SlotKind::Downlink
        } else if pos < u64::from(self.m_dl_slots) + u64::from(self.n_gp_slots) {
            SlotKind::Guard
        } else {
            SlotKind::Uplink
        }
    }

    pub fn dl_duty_cycle(&self) -> f64 {
        f64::from(self.m_dl_slots) / self.cycle_len() as f64
    }

    pub fn ul_duty_cycle(&self) -> f64 {
        1.0 / self.cycle_len() as f64
    }
}

pub fn build_tdd_pattern(m: i64, n: i64) -> Result<TddPattern, PhyError> {
    if m < 1 {
        return Err(PhyError::NoDownlinkSlots(m));
    }
    if n < 0 {
        return Err(PhyError::NegativeGuard(n));
    }
    Ok(TddPattern { m_dl_slots: m as u32, n_gp_slots: n as u32 })
}

/// Duplexing scheme. FDD runs independent DL and UL slot streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Duplex {
    Tdd(TddPattern),
    Fdd,
}

impl Duplex {
    pub fn allows(&self, slot_index: u64, dir: Direction) -> bool {
        match self {
            Duplex::Fdd => true,
            Duplex::Tdd(p) => matches!(
                (p.slot_kind(slot_index), dir),
                (SlotKind::Downlink, Direction::Dl) | (SlotKind::Uplink, Direction::Ul)
            ),
        }
    }
}

/// Guard slots needed to absorb a round trip of `rtt_max_s`.
pub fn gp_slots_required(rtt_max_s: f64, numerology: Numerology) -> u64 {
    if rtt_max_s <= 0.0 {
        return 0;
    }
    // Nanosecond rounding so that exact multiples of the slot do not pick up
    // an extra slot from floating-point noise.
    let rtt_ns = (rtt_max_s * 1e9).round() as u64;
    rtt_ns.div_ceil(numerology.slot_duration_ns())
}

/// Hybrid timing advance: a cell-wide common part plus a position-derived
/// part that is only known when GNSS is available. The UE-specific part is
/// signed because the serving satellite drifts away from the reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingAdvance {
    pub common_ta_s: f64,
    pub ue_specific_ta_s: f64,
    pub gnss_available: bool,
}

pub fn compute_applied_ta(ta: &TimingAdvance) -> f64 {
    if ta.gnss_available {
        ta.common_ta_s + ta.ue_specific_ta_s
    } else {
        ta.common_ta_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentTolerance {
    window_s: f64,
}

impl AlignmentTolerance {
    pub fn new(window_s: f64) -> Result<Self, PhyError> {
        if window_s > 0.0 {
            Ok(Self { window_s })
        } else {
            Err(PhyError::NonPositiveWindow(window_s))
        }
    }

    pub fn window_s(&self) -> f64 {
        self.window_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alignment {
    Aligned,
    Misaligned { offset_s: f64 },
}

pub fn ul_alignment_check(true_delay_s: f64, applied_ta_s: f64, tol: AlignmentTolerance) -> Alignment {
    let offset = true_delay_s - applied_ta_s;
    if offset.abs() <= tol.window_s {
        Alignment::Aligned
    } else {
        Alignment::Misaligned { offset_s: offset }
    }
}

/// Access delay paid by an uplink flow before its first transmission:
/// scheduling request plus grant, two round trips.
pub fn ul_grant_delay_model(rtt_s: f64) -> f64 {
    2.0 * rtt_s.max(0.0)
}

/// What one flow asks of the scheduler in a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowDemand {
    pub flow: usize,
    pub backlog_bits: u64,
    /// Size of a transport block waiting for retransmission, if any.
    pub retx_bits: Option<u64>,
    pub harq_free: bool,
    /// Largest new-data transport block this flow may receive in one slot.
    pub cap_bits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grant {
    pub flow: usize,
    pub bits: u64,
    pub retransmission: bool,
}

/// Round-robin scheduler for one direction. Retransmissions are served
/// before new data; each flow receives at most one grant per slot.
#[derive(Debug, Clone, Default)]
pub struct RoundRobinScheduler {
    next_flow: usize,
}

impl RoundRobinScheduler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn schedule_slot(
        &mut self,
        slot_usable: bool,
        demands: &[FlowDemand],
        budget_bits: u64,
    ) -> Vec<Grant> {
        let mut grants = Vec::new();
        if !slot_usable || demands.is_empty() {
            return grants;
        }
        let start = demands.iter().position(|d| d.flow >= self.next_flow).unwrap_or(0);
        let order = || (0..demands.len()).map(|i| &demands[(start + i) % demands.len()]);
        let mut remaining = budget_bits;
        let mut served = vec![false; demands.len()];
        let mut last = None;

        for (k, d) in order().enumerate() {
            if let Some(bits) = d.retx_bits {
                if bits <= remaining {
                    remaining -= bits;
                    served[(start + k) % demands.len()] = true;
                    grants.push(Grant { flow: d.flow, bits, retransmission: true });
                    last = Some(d.flow);
                }
            }
        }
        for (k, d) in order().enumerate() {
            let idx = (start + k) % demands.len();
            if served[idx] || !d.harq_free || d.backlog_bits == 0 || remaining == 0 {
                continue;
            }
            let bits = d.backlog_bits.min(d.cap_bits).min(remaining);
            if bits == 0 {
                continue;
            }
            remaining -= bits;
            grants.push(Grant { flow: d.flow, bits, retransmission: false });
            last = Some(d.flow);
        }
        if let Some(flow) = last {
            self.next_flow = flow + 1;
        }
        grants
    }
}
