use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adversary::{anonymity_report, Observation, ObservationLog};
use crate::error::Result;
use crate::geometry::{random_position_in, Position};
use crate::hpar::{
    confirm_and_retransmit, cover_transmission, dest_zone_delivery, forward, gpsr_forward, hold_release_multicast,
    initiate_session, leaks_position, notify_and_go, random_delay, receive_zone_broadcast, ConfirmDecision, Forwarding,
    HolderSlot, Packet, PacketKind, Phase, ProtocolParams, SessionRequest, SessionState, ZoneReceipt, BEACON_SIZE,
};
use crate::identity::{group_of, hello_beacon, make_pseudonym, process_hello, NodeId, Pseudonym};

use super::config::{Mobility, Protocol, ScenarioConfig};
use super::metrics::{
    collect_metrics, DropReason, GroundTruth, InstanceOutcome, MetricsRecord, PacketRecord, RunRecords, SourceWindow,
};
use super::node::{initial_motion, mobility_step, NodeState};
use super::radio::{frame_lost, propagation_delay};
use super::trace::TraceEvent;

/// Stream index of the radio-loss generator; node streams are `1..=n`.
const RADIO_STREAM: u64 = 1 << 40;
const REPORT_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub trace: bool,
    /// Scan every transmitted frame for node identifiers and destination
    /// coordinates.
    pub audit: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            trace: true,
            audit: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub frames_scanned: u64,
    pub mac_leaks: u64,
    pub position_leaks: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: MetricsRecord,
    pub observations: ObservationLog,
    pub trace: Vec<TraceEvent>,
    pub truth: GroundTruth,
    pub audit: Option<AuditReport>,
    pub initial_positions: Vec<Position>,
    pub node_ids: Vec<NodeId>,
}

pub fn run(config: &ScenarioConfig) -> Result<RunOutput> {
    run_with(config, RunOptions::default())
}

pub fn run_with(config: &ScenarioConfig, options: RunOptions) -> Result<RunOutput> {
    config.validate()?;
    let mut sim = Sim::new(config, options);
    while let Some(s) = sim.queue.pop() {
        if s.time > config.duration {
            break;
        }
        sim.now = s.time;
        sim.handle(s.event)?;
    }
    Ok(sim.finish())
}

/// Places nodes the same way [`run`] does, without running anything.
pub fn initial_layout(config: &ScenarioConfig) -> Result<Vec<Position>> {
    config.validate()?;
    let mut global = ChaCha8Rng::seed_from_u64(config.seed);
    Ok(place_nodes(config, &mut global))
}

fn place_nodes(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Vec<Position> {
    if config.positions.is_empty() {
        (0..config.node_count)
            .map(|_| random_position_in(&config.area, rng))
            .collect()
    } else {
        config.positions.clone()
    }
}

#[derive(Debug)]
enum Event {
    Beacon(usize),
    Rotate(usize),
    MobilityTick,
    AppSend {
        flow: usize,
        seq: u32,
    },
    Originate {
        node: usize,
        flow: usize,
        seq: u32,
        attempt: u8,
        kind: PacketKind,
    },
    SourceSend {
        node: usize,
        packet: Box<Packet>,
    },
    Transmit {
        node: usize,
        packet: Arc<Packet>,
    },
    Receive {
        node: usize,
        from_pos: Position,
        packet: Arc<Packet>,
    },
    ConfirmCheck {
        flow: usize,
        seq: u32,
    },
}

struct Scheduled {
    time: f64,
    order: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // reversed: BinaryHeap is a max-heap and we pop the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.order.cmp(&self.order))
    }
}

struct FlowState {
    src: usize,
    dst: usize,
    start: f64,
    period: f64,
    size: u32,
    count: u32,
    session_id: u64,
    setup_done: bool,
    payload: Arc<[u8]>,
    timers: BTreeMap<u32, SessionState>,
}

type ZoneKey = (usize, PacketKind, u64, u32, u8);

struct Audit {
    macs: HashSet<[u8; 6]>,
    report: AuditReport,
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    params: ProtocolParams,
    opts: RunOptions,
    nodes: Vec<NodeState>,
    rngs: Vec<ChaCha8Rng>,
    radio_rng: ChaCha8Rng,
    queue: BinaryHeap<Scheduled>,
    order: u64,
    now: f64,
    flows: Vec<FlowState>,
    session_flow: BTreeMap<u64, usize>,
    records: RunRecords,
    packet_index: BTreeMap<(usize, u32), usize>,
    holds: BTreeMap<u64, Vec<Pseudonym>>,
    slots: Vec<BTreeMap<u64, HolderSlot>>,
    seen_zone: BTreeSet<ZoneKey>,
    log: ObservationLog,
    trace: Vec<TraceEvent>,
    windows: Vec<SourceWindow>,
    audit: Option<Audit>,
    initial_positions: Vec<Position>,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a ScenarioConfig, opts: RunOptions) -> Self {
        let mut global = ChaCha8Rng::seed_from_u64(cfg.seed);
        let positions = place_nodes(cfg, &mut global);
        let mut used = BTreeSet::new();
        let mut ids = Vec::with_capacity(cfg.node_count);
        while ids.len() < cfg.node_count {
            let id = NodeId::new(global.gen());
            if used.insert(id.value()) {
                ids.push(id);
            }
        }
        let mut rngs: Vec<ChaCha8Rng> = (0..cfg.node_count)
            .map(|i| {
                let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
                r.set_stream(i as u64 + 1);
                r
            })
            .collect();
        let mut radio_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        radio_rng.set_stream(RADIO_STREAM);

        let mut sim = Sim {
            cfg,
            params: cfg.protocol_params(),
            opts,
            nodes: Vec::with_capacity(cfg.node_count),
            rngs: Vec::new(),
            radio_rng,
            queue: BinaryHeap::new(),
            order: 0,
            now: 0.0,
            flows: Vec::new(),
            session_flow: BTreeMap::new(),
            records: RunRecords::default(),
            packet_index: BTreeMap::new(),
            holds: BTreeMap::new(),
            slots: vec![BTreeMap::new(); cfg.node_count],
            seen_zone: BTreeSet::new(),
            log: ObservationLog::new(cfg.observer),
            trace: Vec::new(),
            windows: Vec::new(),
            audit: opts.audit.then(|| Audit {
                macs: ids.iter().map(|id| id.mac_bytes()).collect(),
                report: AuditReport::default(),
            }),
            initial_positions: positions.clone(),
        };
        for (i, (pos, id)) in positions.iter().zip(&ids).enumerate() {
            let rng = &mut rngs[i];
            let motion = initial_motion(&cfg.mobility, &cfg.area, rng);
            sim.nodes.push(NodeState {
                index: i,
                id: *id,
                position: *pos,
                pseudonym: make_pseudonym(*id, 0.0),
                prev_pseudonym: None,
                neighbors: Default::default(),
                group: group_of(&cfg.area, pos, cfg.radio_range),
                motion,
            });
            let beacon_phase = rng.gen_range(0.0..cfg.hello_interval);
            let rotate_phase = rng.gen_range(0.0..cfg.pseudonym_period);
            sim.schedule(beacon_phase, Event::Beacon(i));
            sim.schedule(rotate_phase, Event::Rotate(i));
        }
        sim.rngs = rngs;
        for (i, f) in cfg.traffic.iter().enumerate() {
            let session_id = global.gen();
            let payload: Vec<u8> = (0..f.size.min(64)).map(|_| global.gen()).collect();
            sim.session_flow.insert(session_id, i);
            sim.flows.push(FlowState {
                src: f.src,
                dst: f.dst,
                start: f.start,
                period: f.period,
                size: f.size,
                count: f.count,
                session_id,
                setup_done: false,
                payload: Arc::from(payload),
                timers: BTreeMap::new(),
            });
            if f.count > 0 {
                sim.schedule(f.start, Event::AppSend { flow: i, seq: 0 });
            }
        }
        if !matches!(cfg.mobility, Mobility::Static) {
            sim.schedule(cfg.mobility_step, Event::MobilityTick);
        }
        sim
    }

    fn schedule(&mut self, time: f64, event: Event) {
        self.order += 1;
        self.queue.push(Scheduled {
            time,
            order: self.order,
            event,
        });
    }

    fn note<F: FnOnce() -> String>(
        &mut self,
        kind: &'static str,
        node: Option<usize>,
        packet: Option<&Packet>,
        detail: F,
    ) {
        if !self.opts.trace {
            return;
        }
        let pos = node.map(|i| self.nodes[i].position);
        self.trace.push(TraceEvent {
            t: self.now,
            kind,
            node,
            packet_session: packet.map(|p| p.session_id),
            packet_kind: packet.map(|p| p.kind.as_str()),
            pos_x: pos.map(|p| p.x),
            pos_y: pos.map(|p| p.y),
            detail: detail(),
        });
    }

    fn handle(&mut self, event: Event) -> Result<()> {
        match event {
            Event::Beacon(i) => {
                let ttl = self.cfg.neighbor_ttl();
                self.nodes[i].neighbors.evict_stale(self.now, ttl);
                let n = &self.nodes[i];
                let hello = hello_beacon(n.pseudonym, n.position, n.group);
                self.transmit(i, Arc::new(hello));
                self.schedule(self.now + self.cfg.hello_interval, Event::Beacon(i));
            }
            Event::Rotate(i) => {
                let next = make_pseudonym(self.nodes[i].id, self.now);
                let old = self.nodes[i].pseudonym;
                self.nodes[i].rotate(next);
                // a holder re-registers under its new pseudonym
                for holders in self.holds.values_mut() {
                    for h in holders.iter_mut().filter(|h| **h == old) {
                        *h = next;
                    }
                }
                self.note("rotate", Some(i), None, String::new);
                self.schedule(self.now + self.cfg.pseudonym_period, Event::Rotate(i));
            }
            Event::MobilityTick => {
                for i in 0..self.nodes.len() {
                    mobility_step(
                        &mut self.nodes[i],
                        &self.cfg.area,
                        &self.cfg.mobility,
                        self.cfg.mobility_step,
                        self.now,
                        &mut self.rngs[i],
                    );
                    self.nodes[i].group = group_of(&self.cfg.area, &self.nodes[i].position, self.cfg.radio_range);
                }
                self.note("mobility", None, None, String::new);
                self.schedule(self.now + self.cfg.mobility_step, Event::MobilityTick);
            }
            Event::AppSend { flow, seq } => self.app_send(flow, seq),
            Event::Originate {
                node,
                flow,
                seq,
                attempt,
                kind,
            } => self.originate(node, flow, seq, attempt, kind)?,
            Event::SourceSend { node, packet } => self.route(node, *packet, None, 0.0)?,
            Event::Transmit { node, packet } => self.transmit(node, packet),
            Event::Receive { node, from_pos, packet } => self.receive(node, from_pos, packet)?,
            Event::ConfirmCheck { flow, seq } => self.confirm_check(flow, seq),
        }
        Ok(())
    }

    fn flow_of(&self, p: &Packet) -> Option<usize> {
        self.session_flow.get(&p.session_id).copied()
    }

    /// The node that consumes `p`.
    fn recipient(&self, p: &Packet) -> Option<usize> {
        let f = &self.flows[self.flow_of(p)?];
        match p.kind {
            PacketKind::Data | PacketKind::Release => Some(f.dst),
            PacketKind::Confirm => Some(f.src),
            _ => None,
        }
    }

    fn data_record(&self, p: &Packet) -> Option<usize> {
        if p.kind != PacketKind::Data {
            return None;
        }
        self.packet_index.get(&(self.flow_of(p)?, p.seq)).copied()
    }

    fn add_to_anonymity_set(&mut self, node: usize, p: &Packet) {
        if let Some(pid) = self.data_record(p) {
            self.records.packets[pid].anonymity_set.insert(node);
        }
    }

    fn set_instance(&mut self, p: &Packet, outcome: InstanceOutcome) {
        if p.kind != PacketKind::Data {
            return;
        }
        if let Some(o) = self.records.instances.get_mut(&(p.session_id, p.seq, p.attempt)) {
            if !matches!(o, InstanceOutcome::Consumed | InstanceOutcome::Dropped(_)) {
                *o = outcome;
            }
        }
    }

    fn app_send(&mut self, flow: usize, seq: u32) {
        let (src, dst, start, period, count) = {
            let f = &self.flows[flow];
            (f.src, f.dst, f.start, f.period, f.count)
        };
        let pid = self.records.packets.len();
        self.records.packets.push(PacketRecord {
            flow,
            seq,
            source: src,
            destination: dst,
            app_time: self.now,
            consumed_at: None,
            confirmed_at: None,
            attempts: 0,
            failed: false,
            forwarders: BTreeSet::new(),
            anonymity_set: BTreeSet::new(),
        });
        self.packet_index.insert((flow, seq), pid);
        let hpar = self.cfg.protocol == Protocol::Hpar;
        let mut delay = 0.0;
        if hpar && !self.flows[flow].setup_done {
            self.flows[flow].setup_done = true;
            delay = self.cfg.crypto_setup_cost;
        }
        self.schedule(
            self.now + delay,
            Event::Originate {
                node: src,
                flow,
                seq,
                attempt: 0,
                kind: PacketKind::Data,
            },
        );
        if seq + 1 < count {
            self.schedule(start + (seq + 1) as f64 * period, Event::AppSend { flow, seq: seq + 1 });
        } else if hpar && self.cfg.hold_release {
            self.schedule(
                self.now + period,
                Event::Originate {
                    node: src,
                    flow,
                    seq: count,
                    attempt: 0,
                    kind: PacketKind::Release,
                },
            );
        }
    }

    fn originate(&mut self, node: usize, flow: usize, seq: u32, attempt: u8, kind: PacketKind) -> Result<()> {
        let (src, dst, size, session_id, payload) = {
            let f = &self.flows[flow];
            (f.src, f.dst, f.size, f.session_id, f.payload.clone())
        };
        let dest_pos = match kind {
            PacketKind::Confirm => self.nodes[src].position,
            _ => self.nodes[dst].position,
        };
        let ttl = self.cfg.neighbor_ttl();
        self.nodes[node].neighbors.evict_stale(self.now, ttl);
        let (packet, session) = match self.cfg.protocol {
            Protocol::Hpar => {
                let request = SessionRequest {
                    kind,
                    session_id,
                    seq,
                    attempt,
                    dest_pos,
                    m: self.cfg.m,
                    size,
                    payload,
                };
                let init = initiate_session(
                    &self.nodes[node],
                    &request,
                    &self.params,
                    self.now,
                    &mut self.rngs[node],
                )?;
                (init.packet, init.session)
            }
            Protocol::GpsrBaseline => {
                let mut p = Packet::routed(kind, session_id, seq, dest_pos, payload, size, self.params.ttl);
                p.attempt = attempt;
                p.sender_group = self.nodes[node].group;
                let session = SessionState {
                    session_id,
                    seq,
                    source: self.nodes[node].id,
                    dest_zone: self.cfg.area,
                    k: self.cfg.k,
                    m: 0,
                    sent_at: self.now,
                    confirm_deadline: self.now + self.params.confirm_timeout,
                    confirm_timeout: self.params.confirm_timeout,
                    retries: 0,
                    max_retries: self.params.max_retries,
                };
                (p, session)
            }
        };
        if kind == PacketKind::Data {
            self.records
                .instances
                .insert((session_id, seq, attempt), InstanceOutcome::InFlight);
            if let Some(&pid) = self.packet_index.get(&(flow, seq)) {
                self.records.packets[pid].attempts += 1;
            }
            if attempt == 0 {
                let deadline = session.confirm_deadline;
                self.flows[flow].timers.insert(seq, session);
                self.schedule(deadline, Event::ConfirmCheck { flow, seq });
            }
        }
        let window = self.cfg.notify_window;
        let (send_at, covers) = if self.cfg.protocol == Protocol::Hpar && self.cfg.notify_and_go {
            let neighbors = self.nodes[node].neighbors.to_vec();
            let plan = notify_and_go(
                &self.nodes[node],
                &neighbors,
                self.cfg.c,
                window,
                size,
                &mut self.rngs[node],
            );
            if plan.bare {
                self.records.bare_sends += 1;
            }
            let base = self.now + self.cfg.tx_time(BEACON_SIZE);
            self.schedule(
                self.now,
                Event::Transmit {
                    node,
                    packet: Arc::new(plan.notify),
                },
            );
            (base + plan.source_offset, plan.covers.len())
        } else {
            (self.now, 0)
        };
        if kind == PacketKind::Data {
            let window_start = if self.cfg.protocol == Protocol::Hpar && self.cfg.notify_and_go {
                self.now + self.cfg.tx_time(BEACON_SIZE)
            } else {
                self.now
            };
            self.windows.push(SourceWindow {
                flow,
                seq,
                attempt,
                kind,
                start: window_start,
                length: window,
                source: node,
                source_pseudonym: self.nodes[node].pseudonym,
                covers,
            });
        }
        self.note("originate", Some(node), Some(&packet), || {
            format!("seq={seq} attempt={attempt}")
        });
        self.schedule(
            send_at,
            Event::SourceSend {
                node,
                packet: Box::new(packet),
            },
        );
        Ok(())
    }

    fn route(&mut self, node: usize, packet: Packet, incoming: Option<Position>, delay: f64) -> Result<()> {
        let ttl = self.cfg.neighbor_ttl();
        self.nodes[node].neighbors.evict_stale(self.now, ttl);
        let key = packet.clone();
        let decision = match self.cfg.protocol {
            Protocol::Hpar => forward(&self.nodes[node], packet, incoming, &self.params, &mut self.rngs[node])?,
            Protocol::GpsrBaseline => gpsr_forward(&self.nodes[node], packet, incoming),
        };
        match decision {
            Forwarding::Unicast { packet, .. } => {
                self.schedule(
                    self.now + delay,
                    Event::Transmit {
                        node,
                        packet: Arc::new(packet),
                    },
                );
            }
            Forwarding::ZoneDelivery(p) => self.zone_start(node, p, delay),
            Forwarding::Arrived(p) => {
                if self.recipient(&p) == Some(node) {
                    self.add_to_anonymity_set(node, &p);
                    self.consume(node, &p);
                } else {
                    self.drop_routed(node, &p, DropReason::Unreachable);
                }
            }
            Forwarding::Drop(reason) => self.drop_routed(node, &key, reason),
        }
        Ok(())
    }

    fn drop_routed(&mut self, node: usize, p: &Packet, reason: DropReason) {
        match p.kind {
            PacketKind::Data => self.set_instance(p, InstanceOutcome::Dropped(reason)),
            PacketKind::Confirm | PacketKind::Release => {
                *self.records.control_drops.entry(reason).or_insert(0) += 1;
            }
            _ => return,
        }
        self.note("drop", Some(node), Some(p), || reason.as_str().to_string());
    }

    fn zone_start(&mut self, node: usize, p: Packet, delay: f64) {
        let session = p.session_id;
        if p.kind == PacketKind::Release {
            let Some(holders) = self.holds.get(&session).cloned() else {
                return;
            };
            let (mine, others): (Vec<Pseudonym>, Vec<Pseudonym>) =
                holders.into_iter().partition(|h| self.nodes[node].answers_to(h));
            if !mine.is_empty() {
                let out = self.slots[node].entry(session).or_default().accept(&p);
                if let Some(rel) = out.release {
                    self.release(node, rel);
                }
            }
            if !others.is_empty() {
                let mut m = p;
                m.phase = Phase::Hold;
                m.next_hops = others;
                m.sender_group = self.nodes[node].group;
                m.clear_route_state();
                self.schedule(
                    self.now + delay,
                    Event::Transmit {
                        node,
                        packet: Arc::new(m),
                    },
                );
            }
            return;
        }
        self.set_instance(&p, InstanceOutcome::InZone);
        self.add_to_anonymity_set(node, &p);
        if self.cfg.hold_release && p.kind == PacketKind::Data {
            let prev = self.holds.get(&session).cloned().unwrap_or_default();
            let self_holder = prev.iter().any(|h| self.nodes[node].answers_to(h));
            let others: Vec<Pseudonym> = prev
                .iter()
                .filter(|h| !self.nodes[node].answers_to(h))
                .copied()
                .collect();
            let want = if self_holder {
                self.cfg.m.saturating_sub(1)
            } else {
                self.cfg.m
            };
            let hs = hold_release_multicast(&self.nodes[node], p.clone(), want, &others, &mut self.rngs[node]);
            let mut registry = hs.holders.clone();
            if self_holder {
                let out = self.slots[node].entry(session).or_default().accept(&p);
                if let Some(rel) = out.release {
                    self.release(node, rel);
                }
                registry.push(self.nodes[node].pseudonym);
            }
            if !registry.is_empty() {
                self.holds.insert(session, registry);
                self.set_instance(&p, InstanceOutcome::Held);
                if !hs.holders.is_empty() {
                    self.schedule(
                        self.now + delay,
                        Event::Transmit {
                            node,
                            packet: Arc::new(hs.held_packet),
                        },
                    );
                }
                return;
            }
        }
        self.seen_zone.insert((node, p.kind, session, p.seq, p.attempt));
        if self.recipient(&p) == Some(node) {
            self.consume(node, &p);
        }
        let b = dest_zone_delivery(&self.nodes[node], p);
        self.schedule(
            self.now + delay,
            Event::Transmit {
                node,
                packet: Arc::new(b),
            },
        );
    }

    /// A holder broadcasts a packet it was holding.
    fn release(&mut self, node: usize, mut p: Packet) {
        self.set_instance(&p, InstanceOutcome::InZone);
        self.add_to_anonymity_set(node, &p);
        self.seen_zone.insert((node, p.kind, p.session_id, p.seq, p.attempt));
        if self.recipient(&p) == Some(node) {
            self.consume(node, &p);
        }
        p.sender_group = self.nodes[node].group;
        let d = random_delay(&mut self.rngs[node], self.cfg.jitter_max);
        self.schedule(
            self.now + d,
            Event::Transmit {
                node,
                packet: Arc::new(p),
            },
        );
    }

    fn consume(&mut self, node: usize, p: &Packet) {
        let Some(flow) = self.flow_of(p) else {
            return;
        };
        match p.kind {
            PacketKind::Data => {
                self.set_instance(p, InstanceOutcome::Consumed);
                if let Some(pid) = self.data_record(p) {
                    let rec = &mut self.records.packets[pid];
                    if rec.consumed_at.is_none() {
                        rec.consumed_at = Some(self.now);
                    }
                }
                self.note("deliver", Some(node), Some(p), || {
                    format!("seq={} attempt={}", p.seq, p.attempt)
                });
                self.schedule(
                    self.now,
                    Event::Originate {
                        node,
                        flow,
                        seq: p.seq,
                        attempt: p.attempt,
                        kind: PacketKind::Confirm,
                    },
                );
            }
            PacketKind::Confirm => {
                if let Some(&pid) = self.packet_index.get(&(flow, p.seq)) {
                    let rec = &mut self.records.packets[pid];
                    if rec.confirmed_at.is_none() {
                        rec.confirmed_at = Some(self.now);
                    }
                }
                self.note("confirm", Some(node), Some(p), || format!("seq={}", p.seq));
            }
            _ => {}
        }
    }

    fn confirm_check(&mut self, flow: usize, seq: u32) {
        let Some(&pid) = self.packet_index.get(&(flow, seq)) else {
            return;
        };
        let confirmed = self.records.packets[pid].confirmed_at.is_some();
        let now = self.now;
        let Some(session) = self.flows[flow].timers.get_mut(&seq) else {
            return;
        };
        match confirm_and_retransmit(session, now, confirmed) {
            ConfirmDecision::Closed | ConfirmDecision::Pending => {}
            ConfirmDecision::Resend => {
                let attempt = session.retries as u8;
                let deadline = session.confirm_deadline;
                let src = self.flows[flow].src;
                self.note("retransmit", Some(src), None, || {
                    format!("flow={flow} seq={seq} attempt={attempt}")
                });
                self.schedule(
                    now,
                    Event::Originate {
                        node: src,
                        flow,
                        seq,
                        attempt,
                        kind: PacketKind::Data,
                    },
                );
                self.schedule(deadline, Event::ConfirmCheck { flow, seq });
            }
            ConfirmDecision::Failed => {
                self.records.packets[pid].failed = true;
                let src = self.flows[flow].src;
                self.note("failed", Some(src), None, || format!("flow={flow} seq={seq}"));
            }
        }
    }

    fn transmit(&mut self, node: usize, packet: Arc<Packet>) {
        let pos = self.nodes[node].position;
        if packet.kind == PacketKind::Hello {
            self.records.hello_transmissions += 1;
        } else {
            self.records.transmissions += 1;
        }
        if let Some(pid) = self.data_record(&packet) {
            let rec = &mut self.records.packets[pid];
            if rec.destination != node {
                rec.forwarders.insert(node);
            }
        }
        self.log.observe(Observation {
            time: self.now,
            transmitter_pseudonym: self.nodes[node].pseudonym,
            transmitter_group: self.nodes[node].group,
            position: pos,
            packet_size: packet.size,
            addressees: packet.next_hops.clone(),
        });
        self.audit_frame(&packet);
        if self.opts.trace {
            let kind = if packet.kind == PacketKind::Hello {
                "beacon"
            } else {
                "transmit"
            };
            let hops = packet.next_hops.len();
            self.note(kind, Some(node), Some(&packet), || {
                format!("size={} addressees={hops}", packet.size)
            });
        }

        let range_sq = self.cfg.radio_range * self.cfg.radio_range;
        let addressed = !packet.is_broadcast();
        let air_time = self.cfg.tx_time(packet.size);
        let mut delivered = false;
        for j in 0..self.nodes.len() {
            if j == node {
                continue;
            }
            let d2 = pos.distance_sq(&self.nodes[j].position);
            if d2 >= range_sq {
                continue;
            }
            if frame_lost(self.cfg.loss, &mut self.radio_rng) {
                continue;
            }
            if addressed && !packet.next_hops.iter().any(|p| self.nodes[j].answers_to(p)) {
                continue;
            }
            if packet.kind == PacketKind::Cover {
                delivered = true;
                continue;
            }
            delivered = true;
            let at = self.now + air_time + propagation_delay(d2.sqrt());
            self.schedule(
                at,
                Event::Receive {
                    node: j,
                    from_pos: pos,
                    packet: packet.clone(),
                },
            );
        }
        let routed = matches!(
            packet.kind,
            PacketKind::Data | PacketKind::Confirm | PacketKind::Release
        );
        if addressed && !delivered && routed && packet.phase != Phase::ZoneBroadcast {
            let in_range = self.nodes.iter().any(|n| {
                n.index != node
                    && pos.distance_sq(&n.position) < range_sq
                    && packet.next_hops.iter().any(|p| n.answers_to(p))
            });
            let reason = if in_range {
                DropReason::Loss
            } else {
                DropReason::LinkBreak
            };
            self.drop_routed(node, &packet, reason);
        }
    }

    fn audit_frame(&mut self, packet: &Packet) {
        let Some(audit) = &mut self.audit else {
            return;
        };
        let bytes = packet.encode();
        audit.report.frames_scanned += 1;
        if bytes
            .windows(6)
            .any(|w| audit.macs.contains(<&[u8; 6]>::try_from(w).expect("window of six")))
        {
            audit.report.mac_leaks += 1;
        }
        if self.cfg.protocol == Protocol::Hpar {
            let recipient = self
                .session_flow
                .get(&packet.session_id)
                .map(|&f| &self.flows[f])
                .and_then(|f| match packet.kind {
                    PacketKind::Data | PacketKind::Release => Some(f.dst),
                    PacketKind::Confirm => Some(f.src),
                    _ => None,
                });
            if let Some(r) = recipient {
                if leaks_position(&bytes, &self.nodes[r].position) {
                    audit.report.position_leaks += 1;
                }
            }
        }
    }

    fn receive(&mut self, node: usize, from_pos: Position, packet: Arc<Packet>) -> Result<()> {
        match packet.kind {
            PacketKind::Hello => {
                if process_hello(&mut self.nodes[node].neighbors, &packet, self.now).is_err() {
                    self.records.malformed_hellos += 1;
                }
            }
            PacketKind::Notify => {
                if let Some((offset, dummy)) = cover_transmission(&self.nodes[node], &packet, &mut self.rngs[node]) {
                    self.schedule(
                        self.now + offset,
                        Event::Transmit {
                            node,
                            packet: Arc::new(dummy),
                        },
                    );
                }
            }
            PacketKind::Cover => {}
            PacketKind::Data | PacketKind::Confirm | PacketKind::Release => match packet.phase {
                Phase::Route => {
                    let d = random_delay(&mut self.rngs[node], self.cfg.jitter_max);
                    self.route(node, (*packet).clone(), Some(from_pos), d)?;
                }
                Phase::ZoneBroadcast => self.zone_receive(node, &packet, from_pos),
                Phase::Hold => {
                    self.add_to_anonymity_set(node, &packet);
                    let out = self.slots[node].entry(packet.session_id).or_default().accept(&packet);
                    if let Some(rel) = out.release {
                        self.release(node, rel);
                    }
                }
            },
        }
        Ok(())
    }

    fn zone_receive(&mut self, node: usize, p: &Packet, from_pos: Position) {
        let key = (node, p.kind, p.session_id, p.seq, p.attempt);
        let is_dest = self.recipient(p) == Some(node);
        let receipt = receive_zone_broadcast(
            &self.nodes[node].position,
            p,
            &from_pos,
            is_dest,
            self.seen_zone.contains(&key),
            self.cfg.radio_range,
        );
        let ZoneReceipt::Accept { consume, rebroadcast } = receipt else {
            return;
        };
        self.seen_zone.insert(key);
        self.add_to_anonymity_set(node, p);
        if consume {
            self.consume(node, p);
        }
        if rebroadcast {
            let mut b = p.clone();
            b.sender_group = self.nodes[node].group;
            let d = random_delay(&mut self.rngs[node], self.cfg.jitter_max);
            self.schedule(
                self.now + d,
                Event::Transmit {
                    node,
                    packet: Arc::new(b),
                },
            );
        }
    }

    fn finish(mut self) -> RunOutput {
        for o in self.records.instances.values_mut() {
            if *o == InstanceOutcome::InZone {
                *o = InstanceOutcome::Dropped(DropReason::ZoneMiss);
            }
        }
        let truth = GroundTruth {
            windows: self.windows,
            packets: self.records.packets.clone(),
            beacon_size: BEACON_SIZE,
        };
        let anonymity = anonymity_report(&self.log, &truth, self.cfg.k, self.cfg.seed ^ REPORT_SALT);
        let metrics = collect_metrics(self.cfg.seed, self.cfg.protocol, &self.records, anonymity);
        RunOutput {
            metrics,
            observations: self.log,
            trace: self.trace,
            truth,
            audit: self.audit.map(|a| a.report),
            initial_positions: self.initial_positions,
            node_ids: self.nodes.iter().map(|n| n.id).collect(),
        }
    }
}
