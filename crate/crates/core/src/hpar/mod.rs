//! The anonymous routing protocol: session initiation, temporary-destination
//! legs through random forwarders, destination-zone delivery with k-anonymity,
//! notify-and-go source cover, hold-and-release against intersection attacks,
//! confirmation/retransmission and per-hop timing jitter.
//!
//! Functions here make decisions for one node at a time; the event loop in
//! [`crate::simcore`] executes them.

mod packet;

use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;

pub use packet::{contains_bytes, leaks_position, Packet, PacketKind, Phase, BEACON_SIZE};

use crate::error::Result;
use crate::geometry::{compute_dest_zone, compute_h, random_position_in, separate, Axis, Position, Separation, Zone};
use crate::gpsr::{route_step, DeliveryRule, GpsrPacketState, RouteDecision};
use crate::identity::{NeighborEntry, NodeId, Pseudonym};
use crate::simcore::{DropReason, NodeState};

/// Protocol knobs shared by every node in a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolParams {
    pub area: Zone,
    pub first_axis: Axis,
    /// Nodes per square meter.
    pub density: f64,
    pub k: u32,
    pub radio_range: f64,
    pub ttl: u16,
    pub confirm_timeout: f64,
    pub max_retries: u32,
}

/// Per-packet bookkeeping at the source.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub session_id: u64,
    pub seq: u32,
    pub source: NodeId,
    pub dest_zone: Zone,
    pub k: u32,
    pub m: u32,
    pub sent_at: f64,
    pub confirm_deadline: f64,
    pub confirm_timeout: f64,
    pub retries: u32,
    pub max_retries: u32,
}

/// Packets buffered in the destination zone until the session's next packet.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldState {
    pub held_packet: Packet,
    pub holders: Vec<Pseudonym>,
}

/// What the source wants to send.
#[derive(Debug, Clone)]
pub struct SessionRequest {
    pub kind: PacketKind,
    pub session_id: u64,
    pub seq: u32,
    pub attempt: u8,
    pub dest_pos: Position,
    pub m: u32,
    pub size: u32,
    pub payload: Arc<[u8]>,
}

#[derive(Debug, Clone)]
pub struct Initiation {
    pub session: SessionState,
    pub packet: Packet,
    /// The source already sits in the destination zone.
    pub inside_zone: bool,
}

/// Builds the first packet of a session: destination zone from the partition
/// count, separation from the full area, and a temporary destination drawn in
/// the other zone.
pub fn initiate_session<R: Rng + ?Sized>(
    src: &NodeState,
    request: &SessionRequest,
    params: &ProtocolParams,
    now: f64,
    rng: &mut R,
) -> Result<Initiation> {
    let h = compute_h(params.density, params.area.area(), params.k)?;
    let dest_zone = compute_dest_zone(&params.area, &request.dest_pos, h, params.first_axis)?;
    let mut packet = Packet::routed(
        request.kind,
        request.session_id,
        request.seq,
        dest_zone.center(),
        request.payload.clone(),
        request.size,
        params.ttl,
    );
    packet.attempt = request.attempt;
    packet.dest_zone = Some(dest_zone);
    packet.sender_group = src.group;
    let inside_zone = match separate(&params.area, &src.position, &dest_zone, params.first_axis)? {
        Separation::InsideDestination => true,
        Separation::Other { zone, .. } => {
            let td = random_position_in(&zone, rng);
            packet.temp_dest = Some(td);
            packet.gpsr = GpsrPacketState::greedy(td);
            false
        }
    };
    let session = SessionState {
        session_id: request.session_id,
        seq: request.seq,
        source: src.id,
        dest_zone,
        k: params.k,
        m: request.m,
        sent_at: now,
        confirm_deadline: now + params.confirm_timeout,
        confirm_timeout: params.confirm_timeout,
        retries: 0,
        max_retries: params.max_retries,
    };
    Ok(Initiation {
        session,
        packet,
        inside_zone,
    })
}

/// Notification plus the timing of the source's own transmission.
#[derive(Debug, Clone)]
pub struct NotifyPlan {
    pub notify: Packet,
    pub covers: Vec<Pseudonym>,
    /// Offset of the real transmission inside the shared window.
    pub source_offset: f64,
    /// No neighbor could provide cover.
    pub bare: bool,
}

/// Picks up to `c` neighbors to send same-sized dummies alongside the real
/// packet inside a shared window `[0, window)`.
pub fn notify_and_go<R: Rng + ?Sized>(
    src: &NodeState,
    neighbors: &[NeighborEntry],
    c: u32,
    window: f64,
    cover_size: u32,
    rng: &mut R,
) -> NotifyPlan {
    let take = (c as usize).min(neighbors.len());
    let mut covers: Vec<Pseudonym> = sample(rng, neighbors.len(), take)
        .into_iter()
        .map(|i| neighbors[i].pseudonym)
        .collect();
    covers.sort();
    let mut notify = Packet::routed(
        PacketKind::Notify,
        0,
        0,
        Position::new(0.0, 0.0),
        Arc::from(cover_size.to_be_bytes().to_vec()),
        BEACON_SIZE,
        1,
    );
    notify.sender_group = src.group;
    notify.next_hops = covers.clone();
    notify.notify_window = Some(window);
    NotifyPlan {
        notify,
        bare: covers.is_empty(),
        covers,
        source_offset: window_offset(window, rng),
    }
}

fn window_offset<R: Rng + ?Sized>(window: f64, rng: &mut R) -> f64 {
    if window > 0.0 {
        rng.gen_range(0.0..window)
    } else {
        0.0
    }
}

/// A cover node's answer to a notification: when to send, and the dummy.
pub fn cover_transmission<R: Rng + ?Sized>(node: &NodeState, notify: &Packet, rng: &mut R) -> Option<(f64, Packet)> {
    let window = notify.notify_window?;
    let size = notify
        .payload
        .get(..4)
        .and_then(|b| b.try_into().ok())
        .map(u32::from_be_bytes)?;
    let neighbors = node.neighbors.to_vec();
    let mut dummy = Packet::routed(
        PacketKind::Cover,
        0,
        0,
        Position::new(0.0, 0.0),
        Arc::from(vec![0u8; 16]),
        size,
        1,
    );
    dummy.sender_group = node.group;
    if !neighbors.is_empty() {
        dummy.next_hops = vec![neighbors[rng.gen_range(0..neighbors.len())].pseudonym];
    }
    Some((window_offset(window, rng), dummy))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Promotion {
    NewLeg(Packet),
    InsideZone(Packet),
}

/// The node closest to the current temporary destination re-partitions from the
/// full area and draws a fresh temporary destination in the other zone.
pub fn rf_promote<R: Rng + ?Sized>(
    rf: &NodeState,
    mut packet: Packet,
    params: &ProtocolParams,
    rng: &mut R,
) -> Result<Promotion> {
    let Some(dest_zone) = packet.dest_zone else {
        return Ok(Promotion::InsideZone(packet));
    };
    match separate(&params.area, &rf.position, &dest_zone, params.first_axis)? {
        Separation::InsideDestination => Ok(Promotion::InsideZone(packet)),
        Separation::Other { zone, .. } => {
            let td = random_position_in(&zone, rng);
            packet.temp_dest = Some(td);
            packet.gpsr = GpsrPacketState::greedy(td);
            packet.rf_count = packet.rf_count.saturating_add(1);
            Ok(Promotion::NewLeg(packet))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Forwarding {
    Unicast {
        next_hop: NeighborEntry,
        packet: Packet,
    },
    /// This node is inside the destination zone and starts local delivery.
    ZoneDelivery(Packet),
    /// Plain GPSR reached the node at the target position.
    Arrived(Packet),
    Drop(DropReason),
}

/// Consecutive self-promotions tolerated before a packet is routed straight at
/// the destination zone with full perimeter recovery.
pub const MAX_LOCAL_PROMOTIONS: u32 = 3;

/// Handles a routed packet held by `node`.
pub fn forward<R: Rng + ?Sized>(
    node: &NodeState,
    mut packet: Packet,
    incoming: Option<Position>,
    params: &ProtocolParams,
    rng: &mut R,
) -> Result<Forwarding> {
    let Some(dest_zone) = packet.dest_zone else {
        return Ok(gpsr_forward(node, packet, incoming));
    };
    if dest_zone.contains(&node.position) {
        return Ok(Forwarding::ZoneDelivery(packet));
    }
    let neighbors = node.neighbors.to_vec();
    let mut incoming = incoming;
    let mut promotions = 0;
    loop {
        let rule = if packet.direct {
            DeliveryRule::AtTarget
        } else {
            DeliveryRule::ClosestNode
        };
        match route_step(&node.position, &neighbors, &packet.gpsr, incoming, rule, packet.ttl) {
            RouteDecision::Forward { next, state } => {
                packet.gpsr = state;
                packet.ttl -= 1;
                packet.sender_group = node.group;
                packet.next_hops = vec![next.pseudonym];
                return Ok(Forwarding::Unicast { next_hop: next, packet });
            }
            RouteDecision::Drop(reason) => return Ok(Forwarding::Drop(reason)),
            RouteDecision::Deliver if packet.direct => {
                // only reachable if a node sits exactly on the zone center,
                // which would be inside the zone
                return Ok(Forwarding::ZoneDelivery(packet));
            }
            RouteDecision::Deliver => {
                if promotions >= MAX_LOCAL_PROMOTIONS {
                    packet.direct = true;
                    packet.gpsr = GpsrPacketState::greedy(dest_zone.center());
                    incoming = None;
                    continue;
                }
                match rf_promote(node, packet, params, rng)? {
                    Promotion::InsideZone(p) => return Ok(Forwarding::ZoneDelivery(p)),
                    Promotion::NewLeg(p) => {
                        packet = p;
                        incoming = None;
                        promotions += 1;
                    }
                }
            }
        }
    }
}

/// Plain GPSR towards the packet's target position.
pub fn gpsr_forward(node: &NodeState, mut packet: Packet, incoming: Option<Position>) -> Forwarding {
    let neighbors = node.neighbors.to_vec();
    match route_step(
        &node.position,
        &neighbors,
        &packet.gpsr,
        incoming,
        DeliveryRule::AtTarget,
        packet.ttl,
    ) {
        RouteDecision::Deliver => Forwarding::Arrived(packet),
        RouteDecision::Drop(reason) => Forwarding::Drop(reason),
        RouteDecision::Forward { next, state } => {
            packet.gpsr = state;
            packet.ttl -= 1;
            packet.sender_group = node.group;
            packet.next_hops = vec![next.pseudonym];
            Forwarding::Unicast { next_hop: next, packet }
        }
    }
}

/// Local broadcast of `packet` by the last random forwarder.
pub fn dest_zone_delivery(last_rf: &NodeState, mut packet: Packet) -> Packet {
    packet.phase = Phase::ZoneBroadcast;
    packet.next_hops.clear();
    packet.sender_group = last_rf.group;
    packet.clear_route_state();
    packet
}

/// True when a broadcast from `sender` fails to cover every corner of `zone`,
/// so receivers must repeat it once.
pub fn zone_needs_rebroadcast(sender: &Position, zone: &Zone, range: f64) -> bool {
    zone.corners().iter().any(|c| sender.distance(c) >= range)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZoneReceipt {
    Ignore,
    Accept { consume: bool, rebroadcast: bool },
}

/// A node hearing a zone broadcast: members accept it once; only the
/// destination consumes it.
pub fn receive_zone_broadcast(
    node_pos: &Position,
    packet: &Packet,
    sender_pos: &Position,
    is_destination: bool,
    already_seen: bool,
    range: f64,
) -> ZoneReceipt {
    let Some(zone) = packet.dest_zone else {
        return ZoneReceipt::Ignore;
    };
    if already_seen || !zone.contains(node_pos) {
        return ZoneReceipt::Ignore;
    }
    ZoneReceipt::Accept {
        consume: is_destination,
        rebroadcast: zone_needs_rebroadcast(sender_pos, &zone, range),
    }
}

/// The last random forwarder multicasts `packet` to `m` zone members who hold
/// it. Previous holders that are still neighbors are kept so the session's
/// next packet reaches the nodes buffering the previous one.
pub fn hold_release_multicast<R: Rng + ?Sized>(
    last_rf: &NodeState,
    packet: Packet,
    m: u32,
    previous_holders: &[Pseudonym],
    rng: &mut R,
) -> HoldState {
    let zone = packet.dest_zone;
    let candidates: Vec<Pseudonym> = last_rf
        .neighbors
        .entries()
        .filter(|e| zone.is_some_and(|z| z.contains(&e.position)))
        .map(|e| e.pseudonym)
        .collect();
    let m = m as usize;
    let mut holders: Vec<Pseudonym> = previous_holders
        .iter()
        .filter(|p| candidates.contains(p))
        .take(m)
        .copied()
        .collect();
    let fresh: Vec<Pseudonym> = candidates.iter().filter(|p| !holders.contains(p)).copied().collect();
    let need = m.saturating_sub(holders.len()).min(fresh.len());
    holders.extend(sample(rng, fresh.len(), need).into_iter().map(|i| fresh[i]));
    holders.sort();
    let mut held_packet = packet;
    held_packet.phase = Phase::Hold;
    held_packet.sender_group = last_rf.group;
    held_packet.next_hops = holders.clone();
    held_packet.clear_route_state();
    HoldState { held_packet, holders }
}

/// What a holder does with a packet it was asked to hold.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderOutcome {
    /// Packet to broadcast in the zone now.
    pub release: Option<Packet>,
}

/// Hold slot of one node for one session.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HolderSlot {
    pub held: Option<Packet>,
}

impl HolderSlot {
    /// Applies an incoming hold-phase packet. A newer DATA packet releases the
    /// held one; RELEASE flushes without holding anything.
    pub fn accept(&mut self, packet: &Packet) -> HolderOutcome {
        let to_broadcast = |p: &Packet| {
            let mut b = p.clone();
            b.phase = Phase::ZoneBroadcast;
            b.next_hops.clear();
            b
        };
        if packet.kind == PacketKind::Release {
            return HolderOutcome {
                release: self.held.take().map(|p| to_broadcast(&p)),
            };
        }
        match &self.held {
            None => {
                self.held = Some(packet.clone());
                HolderOutcome { release: None }
            }
            Some(old) if old.seq < packet.seq => {
                let released = to_broadcast(old);
                self.held = Some(packet.clone());
                HolderOutcome {
                    release: Some(released),
                }
            }
            Some(old) if old.seq == packet.seq => HolderOutcome { release: None },
            // a retransmission of an already released packet
            Some(_) => HolderOutcome {
                release: Some(to_broadcast(packet)),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfirmDecision {
    Closed,
    Pending,
    Resend,
    Failed,
}

/// Source-side timer logic for one packet.
pub fn confirm_and_retransmit(session: &mut SessionState, now: f64, confirmed: bool) -> ConfirmDecision {
    if confirmed {
        return ConfirmDecision::Closed;
    }
    if now < session.confirm_deadline {
        return ConfirmDecision::Pending;
    }
    if session.retries < session.max_retries {
        session.retries += 1;
        session.confirm_deadline = now + session.confirm_timeout;
        ConfirmDecision::Resend
    } else {
        ConfirmDecision::Failed
    }
}

/// Per-hop forwarding delay, uniform in `[0, jitter_max]`.
pub fn random_delay<R: Rng + ?Sized>(rng: &mut R, jitter_max: f64) -> f64 {
    if jitter_max > 0.0 {
        rng.gen_range(0.0..=jitter_max)
    } else {
        0.0
    }
}
