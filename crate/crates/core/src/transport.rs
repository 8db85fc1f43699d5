//! Application flows: constant-rate UDP and a CUBIC-style TCP.
//!
//! The TCP model counts in whole packets. Sequence numbers are packet
//! indices; ACKs are cumulative (next expected packet) and one ACK is sent per
//! received packet.

use std::collections::BTreeSet;
use std::ops::Range;

use crate::phy::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowKind {
    Udp,
    Tcp,
}

impl FlowKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FlowKind::Udp => "udp",
            FlowKind::Tcp => "tcp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flow {
    pub kind: FlowKind,
    pub source_rate_bps: f64,
    pub packet_size_bits: u64,
    pub direction: Direction,
    pub start_s: f64,
    pub duration_s: f64,
}

impl Flow {
    pub fn packet_interval_s(&self) -> f64 {
        self.packet_size_bits as f64 / self.source_rate_bps
    }

    pub fn packet_interval_ns(&self) -> u64 {
        (self.packet_interval_s() * 1e9).round().max(1.0) as u64
    }

    pub fn is_active(&self, t_s: f64) -> bool {
        t_s >= self.start_s && t_s < self.start_s + self.duration_s
    }
}

/// Emission instants of a constant-rate flow in `[from_s, to_s)`.
pub fn udp_tick(flow: &Flow, from_s: f64, to_s: f64) -> Vec<f64> {
    let interval = flow.packet_interval_s();
    let end = to_s.min(flow.start_s + flow.duration_s);
    let first = ((from_s - flow.start_s) / interval).ceil().max(0.0) as u64;
    (first..)
        .map(|k| flow.start_s + k as f64 * interval)
        .take_while(|&t| t < end)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcpConfig {
    /// Base retransmission timeout, s. Fixed unless `rto_adaptive`.
    pub rto_s: f64,
    pub rto_adaptive: bool,
    pub cubic_c: f64,
    pub cubic_beta: f64,
    pub rto_cap_s: f64,
}

impl Default for TcpConfig {
    fn default() -> Self {
        Self { rto_s: 0.200, rto_adaptive: false, cubic_c: 0.4, cubic_beta: 0.3, rto_cap_s: 60.0 }
    }
}

impl TcpConfig {
    /// Lower RTO bound: the configured value when fixed, clock granularity
    /// when adaptive.
    pub fn rto_min_s(&self) -> f64 {
        if self.rto_adaptive {
            CLOCK_GRANULARITY_S
        } else {
            self.rto_s
        }
    }
}

const CLOCK_GRANULARITY_S: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TcpPhase {
    Closed,
    Handshake,
    SlowStart,
    CongAvoid,
    Recovery,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossCause {
    Timeout,
    TripleDupAck,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TcpAction {
    SendSyn,
    SendSegment { seq: u64, retransmission: bool },
    /// (Re)arm the retransmission timer; older generations are stale.
    ArmTimer { at_s: f64, generation: u64 },
    Established,
}

#[derive(Debug, Clone)]
pub struct TcpSender {
    cfg: TcpConfig,
    pub phase: TcpPhase,
    pub cwnd: f64,
    pub ssthresh: f64,
    pub rto_s: f64,
    pub srtt_s: Option<f64>,
    pub rttvar_s: f64,
    pub w_max: f64,
    pub epoch_start_s: Option<f64>,
    cubic_k: f64,
    pub dupack_count: u32,
    snd_una: u64,
    snd_nxt: u64,
    app_limit: u64,
    recover: u64,
    sent_at: Vec<f64>,
    retransmitted: Vec<bool>,
    syn_retransmitted: bool,
    syn_sent_at: f64,
    timer_generation: u64,
    timer_armed: bool,
    pub timeouts: u64,
    pub fast_retransmits: u64,
    pub syn_transmissions: Vec<f64>,
}

impl TcpSender {
    pub fn new(cfg: TcpConfig) -> Self {
        Self {
            cfg,
            phase: TcpPhase::Closed,
            cwnd: 1.0,
            ssthresh: f64::INFINITY,
            rto_s: cfg.rto_s,
            srtt_s: None,
            rttvar_s: 0.0,
            w_max: 0.0,
            epoch_start_s: None,
            cubic_k: 0.0,
            dupack_count: 0,
            snd_una: 0,
            snd_nxt: 0,
            app_limit: 0,
            recover: 0,
            sent_at: Vec::new(),
            retransmitted: Vec::new(),
            syn_retransmitted: false,
            syn_sent_at: 0.0,
            timer_generation: 0,
            timer_armed: false,
            timeouts: 0,
            fast_retransmits: 0,
            syn_transmissions: Vec::new(),
        }
    }

    pub fn config(&self) -> &TcpConfig {
        &self.cfg
    }

    pub fn snd_una(&self) -> u64 {
        self.snd_una
    }

    pub fn snd_nxt(&self) -> u64 {
        self.snd_nxt
    }

    pub fn in_flight(&self) -> u64 {
        self.snd_nxt - self.snd_una
    }

    pub fn is_established(&self) -> bool {
        !matches!(self.phase, TcpPhase::Closed | TcpPhase::Handshake)
    }

    fn arm(&mut self, t: f64, out: &mut Vec<TcpAction>) {
        self.timer_generation += 1;
        self.timer_armed = true;
        out.push(TcpAction::ArmTimer { at_s: t + self.rto_s, generation: self.timer_generation });
    }

    fn disarm(&mut self) {
        self.timer_generation += 1;
        self.timer_armed = false;
    }

    fn back_off(&mut self) {
        self.rto_s = (self.rto_s * 2.0).min(self.cfg.rto_cap_s);
    }

    /// Active open: send SYN at `t`.
    pub fn open(&mut self, t: f64) -> Vec<TcpAction> {
        assert_eq!(self.phase, TcpPhase::Closed, "open on a used connection");
        self.phase = TcpPhase::Handshake;
        self.syn_sent_at = t;
        self.syn_transmissions.push(t);
        let mut out = vec![TcpAction::SendSyn];
        self.arm(t, &mut out);
        out
    }

    pub fn on_syn_ack(&mut self, t: f64) -> Vec<TcpAction> {
        let mut out = Vec::new();
        if self.phase != TcpPhase::Handshake {
            return out;
        }
        if !self.syn_retransmitted {
            self.rtt_sample(t - self.syn_sent_at);
        }
        self.reset_rto();
        self.disarm();
        self.phase = TcpPhase::SlowStart;
        out.push(TcpAction::Established);
        self.try_send(t, &mut out);
        out
    }

    /// The application hands `packets` more packets to the connection.
    pub fn app_write(&mut self, packets: u64, t: f64) -> Vec<TcpAction> {
        self.app_limit += packets;
        let mut out = Vec::new();
        if self.is_established() {
            self.try_send(t, &mut out);
        }
        out
    }

    fn try_send(&mut self, t: f64, out: &mut Vec<TcpAction>) {
        let window = self.cwnd.floor().max(1.0) as u64;
        while self.snd_nxt < self.app_limit && self.snd_nxt - self.snd_una < window {
            let seq = self.snd_nxt;
            let retransmission = (seq as usize) < self.sent_at.len();
            if retransmission {
                self.retransmitted[seq as usize] = true;
            } else {
                self.sent_at.push(t);
                self.retransmitted.push(false);
            }
            out.push(TcpAction::SendSegment { seq, retransmission });
            self.snd_nxt += 1;
        }
        if self.in_flight() > 0 && !self.timer_armed {
            self.arm(t, out);
        }
    }

    fn rtt_sample(&mut self, rtt: f64) {
        match self.srtt_s {
            None => {
                self.srtt_s = Some(rtt);
                self.rttvar_s = rtt / 2.0;
            }
            Some(srtt) => {
                self.rttvar_s = 0.75 * self.rttvar_s + 0.25 * (srtt - rtt).abs();
                self.srtt_s = Some(0.875 * srtt + 0.125 * rtt);
            }
        }
    }

    fn reset_rto(&mut self) {
        self.rto_s = if self.cfg.rto_adaptive {
            match self.srtt_s {
                Some(srtt) => (srtt + (4.0 * self.rttvar_s).max(CLOCK_GRANULARITY_S))
                    .clamp(self.cfg.rto_min_s(), self.cfg.rto_cap_s),
                None => self.cfg.rto_s,
            }
        } else {
            self.cfg.rto_s
        };
    }

    pub fn on_timer(&mut self, generation: u64, t: f64) -> Vec<TcpAction> {
        let mut out = Vec::new();
        if generation != self.timer_generation || !self.timer_armed {
            return out;
        }
        self.timer_armed = false;
        match self.phase {
            TcpPhase::Closed => {}
            TcpPhase::Handshake => {
                self.back_off();
                self.syn_retransmitted = true;
                self.syn_transmissions.push(t);
                out.push(TcpAction::SendSyn);
                self.arm(t, &mut out);
            }
            _ => {
                if self.in_flight() == 0 {
                    return out;
                }
                self.on_loss(LossCause::Timeout, t);
                self.snd_nxt = self.snd_una;
                self.try_send(t, &mut out);
                if !self.timer_armed {
                    self.arm(t, &mut out);
                }
            }
        }
        out
    }

    /// Congestion response to a loss signal.
    pub fn on_loss(&mut self, cause: LossCause, t: f64) {
        match cause {
            LossCause::Timeout => {
                self.timeouts += 1;
                self.w_max = self.cwnd;
                self.ssthresh = (self.cwnd / 2.0).max(2.0);
                self.cwnd = 1.0;
                self.phase = TcpPhase::SlowStart;
                self.epoch_start_s = None;
                self.dupack_count = 0;
                self.recover = self.snd_nxt;
                self.back_off();
            }
            LossCause::TripleDupAck => {
                self.fast_retransmits += 1;
                self.w_max = self.cwnd;
                self.cwnd = (self.cwnd * (1.0 - self.cfg.cubic_beta)).max(1.0);
                self.ssthresh = self.cwnd;
                self.start_epoch(t);
                self.phase = TcpPhase::Recovery;
                self.recover = self.snd_nxt;
            }
        }
    }

    fn start_epoch(&mut self, t: f64) {
        self.epoch_start_s = Some(t);
        self.cubic_k = if self.w_max > self.cwnd {
            ((self.w_max - self.cwnd) / self.cfg.cubic_c).cbrt()
        } else {
            0.0
        };
        if self.w_max < self.cwnd {
            self.w_max = self.cwnd;
        }
    }

    /// CUBIC window `elapsed_s` into the current epoch.
    pub fn cubic_window(&self, elapsed_s: f64) -> f64 {
        self.cfg.cubic_c * (elapsed_s - self.cubic_k).powi(3) + self.w_max
    }

    pub fn cubic_k(&self) -> f64 {
        self.cubic_k
    }

    /// Window growth for `acked` newly acknowledged packets.
    pub fn on_ack_cwnd(&mut self, acked: u64, t: f64) -> f64 {
        let acked_f = acked as f64;
        match self.phase {
            TcpPhase::SlowStart => {
                self.cwnd += acked_f;
                if self.cwnd >= self.ssthresh {
                    self.cwnd = self.cwnd.max(self.ssthresh);
                    self.phase = TcpPhase::CongAvoid;
                    self.w_max = self.w_max.max(self.cwnd);
                    self.start_epoch(t);
                }
            }
            TcpPhase::CongAvoid => {
                let epoch = *self.epoch_start_s.get_or_insert(t);
                let target = self.cubic_window(t - epoch);
                if target > self.cwnd {
                    self.cwnd = (self.cwnd + (target - self.cwnd) / self.cwnd * acked_f).min(target);
                } else {
                    self.cwnd += 0.01 * acked_f / self.cwnd;
                }
            }
            _ => {}
        }
        self.cwnd = self.cwnd.max(1.0);
        self.cwnd
    }

    /// Cumulative ACK meaning "next expected packet is `ack`".
    pub fn on_ack(&mut self, ack: u64, t: f64) -> Vec<TcpAction> {
        let mut out = Vec::new();
        if !self.is_established() {
            return out;
        }
        if ack > self.snd_una {
            let acked = ack - self.snd_una;
            let last = (ack - 1) as usize;
            if last < self.sent_at.len() && !self.retransmitted[last] {
                self.rtt_sample(t - self.sent_at[last]);
                self.reset_rto();
            }
            self.snd_una = ack;
            if self.snd_nxt < self.snd_una {
                self.snd_nxt = self.snd_una;
            }
            self.dupack_count = 0;
            if self.phase == TcpPhase::Recovery {
                if ack >= self.recover {
                    self.phase = TcpPhase::CongAvoid;
                } else {
                    self.retransmit_head(&mut out);
                }
            } else {
                self.on_ack_cwnd(acked, t);
            }
            self.disarm();
            self.try_send(t, &mut out);
        } else if ack == self.snd_una && self.in_flight() > 0 {
            self.dupack_count += 1;
            if self.dupack_count == 3
                && self.phase != TcpPhase::Recovery
                && self.snd_una >= self.recover
            {
                self.on_loss(LossCause::TripleDupAck, t);
                self.retransmit_head(&mut out);
            }
        }
        out
    }

    fn retransmit_head(&mut self, out: &mut Vec<TcpAction>) {
        let seq = self.snd_una;
        if (seq as usize) < self.retransmitted.len() {
            self.retransmitted[seq as usize] = true;
            out.push(TcpAction::SendSegment { seq, retransmission: true });
        }
    }
}

/// Cumulative-ACK receiver with an out-of-order buffer.
#[derive(Debug, Clone, Default)]
pub struct TcpReceiver {
    rcv_next: u64,
    out_of_order: BTreeSet<u64>,
}

impl TcpReceiver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rcv_next(&self) -> u64 {
        self.rcv_next
    }

    /// Returns the packets newly delivered in order and the ACK to send.
    pub fn on_segment(&mut self, seq: u64) -> (Range<u64>, u64) {
        let before = self.rcv_next;
        if seq == self.rcv_next {
            self.rcv_next += 1;
            while self.out_of_order.remove(&self.rcv_next) {
                self.rcv_next += 1;
            }
        } else if seq > self.rcv_next {
            self.out_of_order.insert(seq);
        }
        (before..self.rcv_next, self.rcv_next)
    }
}

/// Outcome of a handshake over a path with fixed round-trip time.
#[derive(Debug, Clone, PartialEq)]
pub struct Handshake {
    pub established_s: f64,
    pub syn_times_s: Vec<f64>,
    pub rto_sequence_s: Vec<f64>,
}

impl Handshake {
    pub fn syn_retransmissions(&self) -> usize {
        self.syn_times_s.len() - 1
    }
}

/// Three-way handshake starting at t = 0 over a path of round-trip `rtt_s`.
/// The first SYN-ACK back (answering the first SYN) establishes the
/// connection.
pub fn tcp_handshake(cfg: TcpConfig, rtt_s: f64) -> Handshake {
    let mut s = TcpSender::new(cfg);
    let mut rtos = Vec::new();
    let mut timer: Option<(f64, u64)> = None;
    let record = |actions: Vec<TcpAction>, rtos: &mut Vec<f64>, timer: &mut Option<(f64, u64)>, t: f64| {
        for a in actions {
            if let TcpAction::ArmTimer { at_s, generation } = a {
                rtos.push(at_s - t);
                *timer = Some((at_s, generation));
            }
        }
    };
    let a = s.open(0.0);
    record(a, &mut rtos, &mut timer, 0.0);
    let syn_ack_at = rtt_s;
    while let Some((at, gen)) = timer {
        if at >= syn_ack_at {
            break;
        }
        timer = None;
        let a = s.on_timer(gen, at);
        record(a, &mut rtos, &mut timer, at);
    }
    s.on_syn_ack(syn_ack_at);
    Handshake { established_s: syn_ack_at, syn_times_s: s.syn_transmissions.clone(), rto_sequence_s: rtos }
}
