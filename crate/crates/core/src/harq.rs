//! Multi-process stop-and-wait HARQ.

use thiserror::Error;

use crate::phy::Numerology;

/// `max_retx` value meaning "retransmit until success".
pub const UNLIMITED_RETX: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarqError {
    #[error("process {0} does not exist")]
    NoSuchProcess(usize),
    #[error("feedback for process {0}, which is not waiting for feedback")]
    UnexpectedFeedback(usize),
    #[error("process {0} has no pending retransmission")]
    NoPendingRetx(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcessState {
    Idle,
    /// In flight. `deadline_s` is `None` between acquisition and transmission.
    WaitingFeedback { deadline_s: Option<f64> },
    PendingRetx,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarqProcess<T> {
    pub id: usize,
    pub state: ProcessState,
    pub tb: Option<T>,
    pub retx_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Acquire {
    Granted(usize),
    /// Every process is waiting: the HARQ stall.
    Blocked,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeedbackOutcome<T> {
    Released(Option<T>),
    Retransmit(usize),
    Dropped(Option<T>),
}

/// Per-UE, per-direction HARQ entity holding `n` stop-and-wait processes.
#[derive(Debug, Clone)]
pub struct HarqEntity<T = u64> {
    processes: Vec<HarqProcess<T>>,
    feedback_enabled: bool,
    max_retx: u32,
    processing_delay_s: f64,
}

impl<T> HarqEntity<T> {
    pub fn new(n_processes: usize, feedback_enabled: bool, max_retx: u32, processing_delay_s: f64) -> Self {
        assert!(n_processes >= 1, "HARQ entity needs at least one process");
        let processes = (0..n_processes)
            .map(|id| HarqProcess { id, state: ProcessState::Idle, tb: None, retx_count: 0 })
            .collect();
        Self { processes, feedback_enabled, max_retx, processing_delay_s: processing_delay_s.max(0.0) }
    }

    pub fn n_processes(&self) -> usize {
        self.processes.len()
    }

    pub fn feedback_enabled(&self) -> bool {
        self.feedback_enabled
    }

    pub fn processing_delay_s(&self) -> f64 {
        self.processing_delay_s
    }

    pub fn process(&self, id: usize) -> Option<&HarqProcess<T>> {
        self.processes.get(id)
    }

    pub fn in_flight(&self) -> usize {
        self.processes.iter().filter(|p| p.state != ProcessState::Idle).count()
    }

    pub fn has_free(&self) -> bool {
        !self.feedback_enabled || self.processes.iter().any(|p| p.state == ProcessState::Idle)
    }

    pub fn try_acquire(&mut self) -> Acquire {
        if !self.feedback_enabled {
            return Acquire::Granted(0);
        }
        match self.processes.iter_mut().find(|p| p.state == ProcessState::Idle) {
            Some(p) => {
                p.state = ProcessState::WaitingFeedback { deadline_s: None };
                p.retx_count = 0;
                Acquire::Granted(p.id)
            }
            None => Acquire::Blocked,
        }
    }

    /// Attach the transport block carried by an acquired process.
    pub fn attach(&mut self, id: usize, tb: T) {
        if self.feedback_enabled {
            self.processes[id].tb = Some(tb);
        }
    }

    pub fn payload(&self, id: usize) -> Option<&T> {
        self.processes.get(id).and_then(|p| p.tb.as_ref())
    }

    /// Records a transmission and returns when its feedback is due, or `None`
    /// when feedback is disabled (the process is released at once).
    ///
    /// Transmitting on an idle process is a caller bug.
    pub fn on_transmit(&mut self, id: usize, t_now_s: f64, rtt_s: f64) -> Option<f64> {
        if !self.feedback_enabled {
            return None;
        }
        let deadline = t_now_s + rtt_s + self.processing_delay_s;
        let p = &mut self.processes[id];
        assert!(
            matches!(p.state, ProcessState::WaitingFeedback { deadline_s: None }),
            "transmit on process {id} in state {:?}",
            p.state
        );
        p.state = ProcessState::WaitingFeedback { deadline_s: Some(deadline) };
        Some(deadline)
    }

    pub fn on_feedback(&mut self, id: usize, ack: bool) -> Result<FeedbackOutcome<T>, HarqError> {
        let max_retx = self.max_retx;
        let p = self.processes.get_mut(id).ok_or(HarqError::NoSuchProcess(id))?;
        if !matches!(p.state, ProcessState::WaitingFeedback { deadline_s: Some(_) }) {
            return Err(HarqError::UnexpectedFeedback(id));
        }
        if ack {
            p.state = ProcessState::Idle;
            return Ok(FeedbackOutcome::Released(p.tb.take()));
        }
        if p.retx_count < max_retx {
            p.retx_count += 1;
            p.state = ProcessState::PendingRetx;
            Ok(FeedbackOutcome::Retransmit(id))
        } else {
            p.state = ProcessState::Idle;
            Ok(FeedbackOutcome::Dropped(p.tb.take()))
        }
    }

    /// Releases a process whose block is known to be unrecoverable.
    pub fn abandon(&mut self, id: usize) -> Result<Option<T>, HarqError> {
        let p = self.processes.get_mut(id).ok_or(HarqError::NoSuchProcess(id))?;
        if p.state == ProcessState::Idle {
            return Err(HarqError::UnexpectedFeedback(id));
        }
        p.state = ProcessState::Idle;
        Ok(p.tb.take())
    }

    /// Lowest-numbered process waiting to retransmit.
    pub fn pending_retx(&self) -> Option<usize> {
        self.processes.iter().find(|p| p.state == ProcessState::PendingRetx).map(|p| p.id)
    }

    pub fn start_retx(&mut self, id: usize) -> Result<(), HarqError> {
        let p = self.processes.get_mut(id).ok_or(HarqError::NoSuchProcess(id))?;
        if p.state != ProcessState::PendingRetx {
            return Err(HarqError::NoPendingRetx(id));
        }
        p.state = ProcessState::WaitingFeedback { deadline_s: None };
        Ok(())
    }
}

/// Analytic HARQ dimensioning for one saturated flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Saturation {
    /// Smallest process count that keeps the link busy.
    pub n_star: u64,
    cycle_s: f64,
    slot_s: f64,
}

impl Saturation {
    /// Fraction of slots a single flow can fill with `n` processes.
    pub fn duty(&self, n: u64) -> f64 {
        (n as f64 * self.slot_s / self.cycle_s).min(1.0)
    }
}

pub fn predict_saturation(rtt_s: f64, processing_s: f64, numerology: Numerology) -> Saturation {
    let slot_s = numerology.slot_duration_s();
    let cycle_s = (rtt_s.max(0.0) + processing_s.max(0.0)).max(f64::MIN_POSITIVE);
    let cycle_ns = (cycle_s * 1e9).round() as u64;
    let n_star = cycle_ns.div_ceil(numerology.slot_duration_ns()).max(1);
    Saturation { n_star, cycle_s: cycle_s.max(slot_s * 1e-12), slot_s }
}
