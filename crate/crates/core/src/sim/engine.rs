//! Slot-driven simulation of one satellite cell.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use super::event::{ns_to_secs, secs_to_ns, EventQueue, SimTime};
use super::metrics::{DropCause, Drops, FlowReport, LatencySummary, MetricsReport, ParamEcho};
use super::placement::{beam_center, orbit_for, place_ues};
use super::rng::{rng_stream, SimRng};
use crate::channel::{self, LinkBudgetConfig, RateTable};
use crate::config::{Arrivals, DuplexMode, PayloadMode, ScenarioConfig};
use crate::geometry::{self, GeometryError, GroundPosition, Orbit, SatelliteState};
use crate::harq::{FeedbackOutcome, HarqEntity};
use crate::phy::{
    build_tdd_pattern, compute_applied_ta, ul_alignment_check, ul_grant_delay_model, Alignment,
    AlignmentTolerance, Direction, Duplex, FlowDemand, Numerology, RoundRobinScheduler, TimingAdvance,
};
use crate::transport::{Flow, FlowKind, TcpAction, TcpReceiver, TcpSender};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Ground-fixed ends of the radio path: beam center and feeder gateway.
#[derive(Debug, Clone)]
pub struct CellGeometry {
    pub orbit: Orbit,
    pub center: GroundPosition,
    /// Present for transparent payloads only.
    pub gateway: Option<GroundPosition>,
}

impl CellGeometry {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, GeometryError> {
        let orbit = orbit_for(cfg)?;
        let center = beam_center(cfg)?;
        let gateway = match cfg.satellite.payload {
            PayloadMode::Regenerative => None,
            PayloadMode::Transparent => {
                let angle = geometry::central_angle_for_elevation(
                    cfg.satellite.altitude_km,
                    cfg.satellite.gateway_elevation_deg,
                )?;
                Some(center.destination(angle, 0.0))
            }
        };
        Ok(Self { orbit, center, gateway })
    }

    fn leg_s(sat: &SatelliteState, ground: &GroundPosition) -> Result<f64, GeometryError> {
        let el = geometry::elevation_deg(&sat.position_ecef_km, ground);
        if el < 0.0 {
            return Err(GeometryError::BelowHorizon { elevation_deg: el });
        }
        Ok(geometry::propagation_delay(geometry::range_km(&sat.position_ecef_km, ground)))
    }

    /// Feeder leg delay (zero for regenerative payloads).
    pub fn feeder_s(&self, sat: &SatelliteState) -> Result<f64, GeometryError> {
        self.gateway.as_ref().map_or(Ok(0.0), |g| Self::leg_s(sat, g))
    }

    /// One-way delay between `ue` and the gNB.
    pub fn one_way_s(&self, sat: &SatelliteState, ue: &GroundPosition) -> Result<f64, GeometryError> {
        Ok(Self::leg_s(sat, ue)? + self.feeder_s(sat)?)
    }
}

/// Round-trip time between `ue` and the gNB at time `t_s`.
pub fn rtt_for(cfg: &ScenarioConfig, ue: &GroundPosition, t_s: f64) -> Result<f64, GeometryError> {
    let cell = CellGeometry::new(cfg)?;
    let sat = geometry::propagate(&cell.orbit, t_s);
    Ok(2.0 * cell.one_way_s(&sat, ue)?)
}

#[derive(Debug, Clone, Copy)]
struct Seg {
    sdu: usize,
    bits: u64,
}

#[derive(Debug, Clone)]
struct Tb {
    segs: Vec<Seg>,
    bits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SduState {
    Pending,
    Delivered,
    Dropped,
}

#[derive(Debug, Clone, Copy)]
enum SduPayload {
    App,
    TcpSegment(u64),
}

#[derive(Debug, Clone)]
struct LinkSdu {
    flow: usize,
    bits: u64,
    delivered: u64,
    created: SimTime,
    state: SduState,
    payload: SduPayload,
}

#[derive(Debug, Clone, Copy)]
struct QueueItem {
    sdu: usize,
    remaining: u64,
}

#[derive(Debug, Clone, Copy)]
enum Feedback {
    Ack,
    Nack,
    Abandon,
}

#[derive(Debug)]
enum Ev {
    Slot(u64),
    Generate { flow: usize, k: u64 },
    Arrive { flow: usize, tb: Tb, lost: Option<DropCause> },
    Feedback { flow: usize, pid: usize, fb: Feedback },
    TcpTimer { flow: usize, generation: u64 },
    TcpSynAck { flow: usize },
    TcpAck { flow: usize, ack: u64 },
}

struct TcpState {
    sender: TcpSender,
    receiver: TcpReceiver,
    written_at: Vec<SimTime>,
}

struct FlowRt {
    spec: Flow,
    ue: usize,
    queue: VecDeque<QueueItem>,
    queue_bits: u64,
    harq: Option<HarqEntity<Tb>>,
    activated: bool,
    eligible_at: SimTime,
    tcp: Option<TcpState>,
    /// Inter-arrival sampler for Poisson sources.
    arrivals: Option<(Exp<f64>, SimRng)>,
    offered: u64,
    delivered: u64,
    drops: Drops,
    latencies: Vec<f64>,
    link_drops: u64,
    max_doppler_hz: f64,
    inflight_violations: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct UeLink {
    visible: bool,
    one_way_s: f64,
    aligned: bool,
    rate_bps: f64,
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    q: EventQueue<Ev>,
    cell: CellGeometry,
    ues: Vec<GroundPosition>,
    links: Vec<UeLink>,
    flows: Vec<FlowRt>,
    sdus: Vec<LinkSdu>,
    duplex: Duplex,
    schedulers: [RoundRobinScheduler; 2],
    flows_per_dir: [usize; 2],
    bler_rng: SimRng,
    link_budget: LinkBudgetConfig,
    table: RateTable,
    tolerance: AlignmentTolerance,
    carrier_hz: f64,
    bandwidth_hz: f64,
    slot_ns: SimTime,
    stack_ns: SimTime,
    processing_ns: SimTime,
    end_ns: SimTime,
}

fn dir_index(d: Direction) -> usize {
    match d {
        Direction::Dl => 0,
        Direction::Ul => 1,
    }
}

fn opposite(d: Direction) -> Direction {
    match d {
        Direction::Dl => Direction::Ul,
        Direction::Ul => Direction::Dl,
    }
}

/// Flows in id order: for each UE its main flow, then its feedback flow.
fn build_flows(cfg: &ScenarioConfig) -> Vec<(usize, Flow)> {
    let t = &cfg.transport;
    let mut out = Vec::new();
    for ue in 0..cfg.ues.count as usize {
        if t.rate_mbps > 0.0 {
            out.push((
                ue,
                Flow {
                    kind: t.kind,
                    source_rate_bps: t.rate_mbps * 1e6,
                    packet_size_bits: u64::from(t.packet_bytes) * 8,
                    direction: t.direction,
                    start_s: 0.0,
                    duration_s: cfg.sim.duration_s,
                },
            ));
        }
        if t.feedback_kbps > 0.0 {
            out.push((
                ue,
                Flow {
                    kind: FlowKind::Udp,
                    source_rate_bps: t.feedback_kbps * 1e3,
                    packet_size_bits: u64::from(t.feedback_bytes) * 8,
                    direction: opposite(t.direction),
                    start_s: 0.0,
                    duration_s: cfg.sim.duration_s,
                },
            ));
        }
    }
    out
}

/// Runs one scenario to completion.
pub fn run(cfg: &ScenarioConfig) -> Result<MetricsReport, RunError> {
    let problems = cfg.cross_check();
    if !problems.is_empty() {
        let text: Vec<String> = problems.iter().map(|(k, m)| format!("{k}: {m}")).collect();
        return Err(RunError::Config(text.join("; ")));
    }
    let numerology = Numerology::new(cfg.phy.numerology).map_err(|e| RunError::Config(e.to_string()))?;
    let duplex = match cfg.duplex.mode {
        DuplexMode::Fdd => Duplex::Fdd,
        DuplexMode::Tdd => Duplex::Tdd(
            build_tdd_pattern(i64::from(cfg.duplex.m_dl), i64::from(cfg.duplex.n_gp))
                .map_err(|e| RunError::Config(e.to_string()))?,
        ),
    };
    let slot_ns = numerology.slot_duration_ns();
    let tolerance = AlignmentTolerance::new(cfg.ta.tolerance_slots * numerology.slot_duration_s())
        .map_err(|e| RunError::Config(e.to_string()))?;
    let cell = CellGeometry::new(cfg)?;
    let ues = place_ues(cfg)?;
    let specs = build_flows(cfg);
    let mut flows_per_dir = [0usize; 2];
    for (_, f) in &specs {
        flows_per_dir[dir_index(f.direction)] += 1;
    }
    let processing_ns = u64::from(cfg.harq.processing_slots) * slot_ns;
    let flows = specs
        .into_iter()
        .enumerate()
        .map(|(id, (ue, spec))| FlowRt {
            spec,
            ue,
            queue: VecDeque::new(),
            queue_bits: 0,
            harq: cfg.harq.enabled.then(|| {
                HarqEntity::new(cfg.harq.n as usize, true, cfg.harq.max_retx, ns_to_secs(processing_ns))
            }),
            activated: false,
            eligible_at: 0,
            tcp: (spec.kind == FlowKind::Tcp).then(|| TcpState {
                sender: TcpSender::new(cfg.tcp_config()),
                receiver: TcpReceiver::new(),
                written_at: Vec::new(),
            }),
            arrivals: (cfg.transport.arrivals == Arrivals::Poisson).then(|| {
                let rate = 1.0 / spec.packet_interval_s();
                (Exp::new(rate).expect("positive rate"), rng_stream(cfg.sim.seed, &format!("arrivals/{id}")))
            }),
            offered: 0,
            delivered: 0,
            drops: Drops::default(),
            latencies: Vec::new(),
            link_drops: 0,
            max_doppler_hz: 0.0,
            inflight_violations: 0,
        })
        .collect();

    let mut sim = Sim {
        cfg,
        q: EventQueue::new(),
        cell,
        links: vec![UeLink::default(); ues.len()],
        ues,
        flows,
        sdus: Vec::new(),
        duplex,
        schedulers: [RoundRobinScheduler::new(), RoundRobinScheduler::new()],
        flows_per_dir,
        bler_rng: rng_stream(cfg.sim.seed, "bler"),
        link_budget: cfg.link_budget(),
        table: cfg.channel.rate_table.clone(),
        tolerance,
        carrier_hz: cfg.band.f_c_ghz * 1e9,
        bandwidth_hz: cfg.band.bandwidth_mhz * 1e6,
        slot_ns,
        stack_ns: secs_to_ns(cfg.sim.stack_delay_ms * 1e-3),
        processing_ns,
        end_ns: secs_to_ns(cfg.sim.duration_s),
    };
    sim.start();
    sim.event_loop();
    Ok(sim.report())
}

impl Sim<'_> {
    fn start(&mut self) {
        self.update_geometry(0);
        self.q.push(0, Ev::Slot(0));
        for f in 0..self.flows.len() {
            let start = secs_to_ns(self.flows[f].spec.start_s);
            if self.flows[f].tcp.is_some() {
                let actions = self.tcp(f).sender.open(ns_to_secs(start));
                self.apply_tcp(f, actions, start);
            }
            self.q.push(start, Ev::Generate { flow: f, k: 0 });
        }
    }

    fn event_loop(&mut self) {
        while let Some((t, ev)) = self.q.pop() {
            if t >= self.end_ns {
                break;
            }
            match ev {
                Ev::Slot(k) => self.on_slot(k, t),
                Ev::Generate { flow, k } => self.on_generate(flow, k, t),
                Ev::Arrive { flow, tb, lost } => self.on_arrive(flow, tb, lost, t),
                Ev::Feedback { flow, pid, fb } => self.on_feedback(flow, pid, fb),
                Ev::TcpTimer { flow, generation } => {
                    let actions = self.tcp(flow).sender.on_timer(generation, ns_to_secs(t));
                    self.apply_tcp(flow, actions, t);
                }
                Ev::TcpSynAck { flow } => {
                    let actions = self.tcp(flow).sender.on_syn_ack(ns_to_secs(t));
                    self.apply_tcp(flow, actions, t);
                }
                Ev::TcpAck { flow, ack } => {
                    let actions = self.tcp(flow).sender.on_ack(ack, ns_to_secs(t));
                    self.apply_tcp(flow, actions, t);
                }
            }
            for f in &mut self.flows {
                if let Some(h) = &f.harq {
                    if h.in_flight() > h.n_processes() {
                        f.inflight_violations += 1;
                    }
                }
            }
        }
    }

    fn tcp(&mut self, flow: usize) -> &mut TcpState {
        self.flows[flow].tcp.as_mut().expect("TCP event on a UDP flow")
    }

    fn update_geometry(&mut self, t: SimTime) {
        let sat = geometry::propagate(&self.cell.orbit, ns_to_secs(t));
        let feeder = self.cell.feeder_s(&sat).ok();
        let center = self.cell.one_way_s(&sat, &self.cell.center).ok();
        for (i, ue) in self.ues.iter().enumerate() {
            let service_km = geometry::range_km(&sat.position_ecef_km, ue);
            let visible = geometry::elevation_deg(&sat.position_ecef_km, ue) >= 0.0;
            let link = match (visible, feeder) {
                (true, Some(feeder_s)) => {
                    let one_way_s = geometry::propagation_delay(service_km) + feeder_s;
                    let common = center.map_or(2.0 * one_way_s, |c| 2.0 * c);
                    let ta = TimingAdvance {
                        common_ta_s: common,
                        ue_specific_ta_s: 2.0 * one_way_s - common,
                        gnss_available: self.cfg.ta.gnss,
                    };
                    let aligned = ul_alignment_check(2.0 * one_way_s, compute_applied_ta(&ta), self.tolerance)
                        == Alignment::Aligned;
                    let snr = channel::snr(&self.link_budget, service_km, self.carrier_hz, self.bandwidth_hz)
                        .unwrap_or(f64::NEG_INFINITY);
                    UeLink {
                        visible: true,
                        one_way_s,
                        aligned,
                        rate_bps: channel::snr_to_rate(&self.table, snr, self.bandwidth_hz),
                    }
                }
                _ => UeLink::default(),
            };
            self.links[i] = link;
            if let Ok(d) = geometry::doppler_shift(&sat, ue, self.carrier_hz) {
                for f in self.flows.iter_mut().filter(|f| f.ue == i) {
                    f.max_doppler_hz = f.max_doppler_hz.max(d.abs());
                }
            }
        }
    }

    fn one_way_ns(&self, ue: usize) -> SimTime {
        secs_to_ns(self.links[ue].one_way_s)
    }

    fn on_slot(&mut self, k: u64, t: SimTime) {
        self.update_geometry(t);
        let slot_s = ns_to_secs(self.slot_ns);
        for dir in [Direction::Dl, Direction::Ul] {
            if !self.duplex.allows(k, dir) {
                continue;
            }
            let di = dir_index(dir);
            let share = self.flows_per_dir[di].max(1) as f64;
            let mut demands = Vec::new();
            for (id, f) in self.flows.iter().enumerate() {
                let link = self.links[f.ue];
                if f.spec.direction != dir || !link.visible || t < f.eligible_at {
                    continue;
                }
                let retx_bits = f
                    .harq
                    .as_ref()
                    .and_then(|h| h.pending_retx().and_then(|pid| h.payload(pid)).map(|tb| tb.bits));
                if f.queue_bits == 0 && retx_bits.is_none() {
                    continue;
                }
                demands.push(FlowDemand {
                    flow: id,
                    backlog_bits: f.queue_bits,
                    retx_bits,
                    harq_free: f.harq.as_ref().is_none_or(|h| h.has_free()),
                    cap_bits: (link.rate_bps * slot_s / share).floor() as u64,
                });
            }
            let grants = self.schedulers[di].schedule_slot(true, &demands, u64::MAX);
            for g in grants {
                if g.retransmission {
                    let h = self.flows[g.flow].harq.as_mut().expect("retransmission without HARQ");
                    let pid = h.pending_retx().expect("granted retransmission");
                    h.start_retx(pid).expect("pending process");
                    let tb = h.payload(pid).expect("retained block").clone();
                    self.transmit(g.flow, tb, Some(pid), t);
                } else {
                    let tb = self.take_bits(g.flow, g.bits);
                    let pid = match self.flows[g.flow].harq.as_mut() {
                        Some(h) => match h.try_acquire() {
                            crate::harq::Acquire::Granted(pid) => {
                                h.attach(pid, tb.clone());
                                Some(pid)
                            }
                            crate::harq::Acquire::Blocked => unreachable!("scheduler checked for a free process"),
                        },
                        None => None,
                    };
                    self.transmit(g.flow, tb, pid, t);
                }
            }
        }
        let next = t + self.slot_ns;
        if next < self.end_ns {
            self.q.push(next, Ev::Slot(k + 1));
        }
    }

    fn take_bits(&mut self, flow: usize, bits: u64) -> Tb {
        let f = &mut self.flows[flow];
        let mut segs = Vec::new();
        let mut left = bits;
        while left > 0 {
            let Some(front) = f.queue.front_mut() else { break };
            let take = front.remaining.min(left);
            segs.push(Seg { sdu: front.sdu, bits: take });
            front.remaining -= take;
            left -= take;
            if front.remaining == 0 {
                f.queue.pop_front();
            }
        }
        let total = bits - left;
        f.queue_bits -= total;
        Tb { segs, bits: total }
    }

    fn transmit(&mut self, flow: usize, tb: Tb, pid: Option<usize>, t: SimTime) {
        let ue = self.flows[flow].ue;
        let link = self.links[ue];
        let one_way = self.one_way_ns(ue);
        let errored = self.bler_rng.gen::<f64>() < self.cfg.channel.bler;
        let misaligned = self.flows[flow].spec.direction == Direction::Ul && !link.aligned;
        let arrive_at = t + self.slot_ns + one_way + self.stack_ns;
        match pid {
            Some(pid) => {
                let h = self.flows[flow].harq.as_mut().expect("process without HARQ");
                h.on_transmit(pid, ns_to_secs(t), 2.0 * link.one_way_s);
                let fb_at = t + 2 * one_way + self.processing_ns;
                let fb = if misaligned {
                    self.q.push(arrive_at, Ev::Arrive { flow, tb, lost: Some(DropCause::Misalignment) });
                    Feedback::Abandon
                } else if errored {
                    Feedback::Nack
                } else {
                    self.q.push(arrive_at, Ev::Arrive { flow, tb, lost: None });
                    Feedback::Ack
                };
                self.q.push(fb_at, Ev::Feedback { flow, pid, fb });
            }
            None => {
                let lost = if misaligned {
                    Some(DropCause::Misalignment)
                } else if errored {
                    Some(DropCause::Bler)
                } else {
                    None
                };
                self.q.push(arrive_at, Ev::Arrive { flow, tb, lost });
            }
        }
    }

    fn on_feedback(&mut self, flow: usize, pid: usize, fb: Feedback) {
        let h = self.flows[flow].harq.as_mut().expect("feedback without HARQ");
        let dropped = match fb {
            Feedback::Ack => {
                h.on_feedback(pid, true).expect("ack for a waiting process");
                None
            }
            Feedback::Nack => match h.on_feedback(pid, false).expect("nack for a waiting process") {
                FeedbackOutcome::Dropped(tb) => tb,
                _ => None,
            },
            Feedback::Abandon => {
                h.abandon(pid).expect("abandon a busy process");
                None
            }
        };
        if let Some(tb) = dropped {
            for seg in tb.segs {
                self.drop_seg(seg, DropCause::RetxExhausted);
            }
        }
    }

    fn on_generate(&mut self, flow: usize, k: u64, t: SimTime) {
        let spec = self.flows[flow].spec;
        let bits = spec.packet_size_bits;
        self.flows[flow].offered += bits;
        if let Some(tcp) = self.flows[flow].tcp.as_mut() {
            tcp.written_at.push(t);
            let actions = tcp.sender.app_write(1, ns_to_secs(t));
            self.apply_tcp(flow, actions, t);
        } else {
            let sdu = self.new_sdu(flow, bits, t, SduPayload::App);
            self.enqueue(flow, sdu, t);
        }
        let start = secs_to_ns(spec.start_s);
        let end = secs_to_ns(spec.start_s + spec.duration_s).min(self.end_ns);
        let next = match self.flows[flow].arrivals.as_mut() {
            Some((exp, rng)) => t + secs_to_ns(exp.sample(rng)),
            None => start + (k + 1) * spec.packet_interval_ns(),
        };
        if next < end {
            self.q.push(next, Ev::Generate { flow, k: k + 1 });
        }
    }

    fn new_sdu(&mut self, flow: usize, bits: u64, t: SimTime, payload: SduPayload) -> usize {
        self.sdus.push(LinkSdu { flow, bits, delivered: 0, created: t, state: SduState::Pending, payload });
        self.sdus.len() - 1
    }

    fn enqueue(&mut self, flow: usize, sdu: usize, t: SimTime) {
        let ue = self.flows[flow].ue;
        let rtt = 2.0 * self.links[ue].one_way_s;
        let f = &mut self.flows[flow];
        if !f.activated {
            f.activated = true;
            if f.spec.direction == Direction::Ul {
                f.eligible_at = t + secs_to_ns(ul_grant_delay_model(rtt));
            }
        }
        let bits = self.sdus[sdu].bits;
        f.queue.push_back(QueueItem { sdu, remaining: bits });
        f.queue_bits += bits;
    }

    fn apply_tcp(&mut self, flow: usize, actions: Vec<TcpAction>, t: SimTime) {
        let ue = self.flows[flow].ue;
        let control_ns = self.one_way_ns(ue) + self.stack_ns;
        for a in actions {
            match a {
                TcpAction::SendSyn => {
                    if self.links[ue].visible {
                        self.q.push(t + 2 * control_ns, Ev::TcpSynAck { flow });
                    }
                }
                TcpAction::SendSegment { seq, .. } => {
                    let bits = self.flows[flow].spec.packet_size_bits;
                    let sdu = self.new_sdu(flow, bits, t, SduPayload::TcpSegment(seq));
                    self.enqueue(flow, sdu, t);
                }
                TcpAction::ArmTimer { at_s, generation } => {
                    self.q.push(secs_to_ns(at_s).max(t), Ev::TcpTimer { flow, generation });
                }
                TcpAction::Established => {}
            }
        }
    }

    fn on_arrive(&mut self, _flow: usize, tb: Tb, lost: Option<DropCause>, t: SimTime) {
        for seg in tb.segs {
            match lost {
                Some(cause) => self.drop_seg(seg, cause),
                None => self.deliver_seg(seg, t),
            }
        }
    }

    fn deliver_seg(&mut self, seg: Seg, t: SimTime) {
        let sdu = &mut self.sdus[seg.sdu];
        if sdu.state != SduState::Pending {
            return;
        }
        sdu.delivered += seg.bits;
        if sdu.delivered < sdu.bits {
            return;
        }
        sdu.state = SduState::Delivered;
        let (flow, bits, created, payload) = (sdu.flow, sdu.bits, sdu.created, sdu.payload);
        match payload {
            SduPayload::App => {
                let f = &mut self.flows[flow];
                f.delivered += bits;
                f.latencies.push(ns_to_secs(t - created));
            }
            SduPayload::TcpSegment(seq) => {
                let control_ns = self.one_way_ns(self.flows[flow].ue) + self.stack_ns;
                let f = &mut self.flows[flow];
                let tcp = f.tcp.as_mut().expect("TCP segment on a UDP flow");
                let (in_order, ack) = tcp.receiver.on_segment(seq);
                for s in in_order {
                    f.delivered += bits;
                    f.latencies.push(ns_to_secs(t - tcp.written_at[s as usize]));
                }
                self.q.push(t + control_ns, Ev::TcpAck { flow, ack });
            }
        }
    }

    fn drop_seg(&mut self, seg: Seg, cause: DropCause) {
        let sdu = &mut self.sdus[seg.sdu];
        if sdu.state != SduState::Pending {
            return;
        }
        sdu.state = SduState::Dropped;
        let f = &mut self.flows[sdu.flow];
        match sdu.payload {
            SduPayload::App => f.drops.add(cause, sdu.bits),
            SduPayload::TcpSegment(_) => f.link_drops += 1,
        }
    }

    fn report(self) -> MetricsReport {
        let cfg = self.cfg;
        let duration = cfg.sim.duration_s;
        let mut residual = vec![0u64; self.flows.len()];
        for s in &self.sdus {
            if s.state == SduState::Pending && matches!(s.payload, SduPayload::App) {
                residual[s.flow] += s.bits;
            }
        }
        for (i, f) in self.flows.iter().enumerate() {
            if let Some(tcp) = &f.tcp {
                let undelivered = tcp.written_at.len() as u64 - tcp.receiver.rcv_next();
                residual[i] += undelivered * f.spec.packet_size_bits;
            }
        }
        let mut cell = [0u64; 2];
        for f in &self.flows {
            cell[dir_index(f.spec.direction)] += f.delivered;
        }
        let flows = self
            .flows
            .iter()
            .enumerate()
            .map(|(i, f)| FlowReport {
                flow_id: i,
                ue_id: f.ue,
                kind: f.spec.kind,
                direction: f.spec.direction,
                offered_bits: f.offered,
                delivered_bits: f.delivered,
                drops: f.drops.clone(),
                residual_bits: residual[i],
                latency: LatencySummary::from_samples(&f.latencies),
                throughput_bps: f.delivered as f64 / duration,
                cell_throughput_bps: cell[dir_index(f.spec.direction)] as f64 / duration,
                max_doppler_hz: f.max_doppler_hz,
                link_drops: f.link_drops,
                tcp_timeouts: f.tcp.as_ref().map_or(0, |t| t.sender.timeouts),
                harq_inflight_violations: f.inflight_violations,
            })
            .collect();
        let tdd = cfg.duplex.mode == DuplexMode::Tdd;
        MetricsReport {
            scenario_id: cfg.sim.id.clone(),
            duration_s: duration,
            params: ParamEcho {
                altitude_km: cfg.satellite.altitude_km,
                gnss: cfg.ta.gnss,
                harq_n: cfg.harq.enabled.then_some(cfg.harq.n),
                m_dl: tdd.then_some(cfg.duplex.m_dl),
                n_gp: tdd.then_some(cfg.duplex.n_gp),
                numerology: cfg.phy.numerology,
                payload: cfg.satellite.payload.to_string(),
                placement: cfg.ues.placement.to_string(),
                rate_mbps: cfg.transport.rate_mbps,
                seed: cfg.sim.seed,
            },
            flows,
        }
    }
}
