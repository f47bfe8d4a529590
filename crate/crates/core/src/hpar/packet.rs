use std::sync::Arc;

use serde::Serialize;

use crate::geometry::{Position, Zone};
use crate::gpsr::{ForwardMode, GpsrPacketState};
use crate::identity::{Beacon, GroupId, Pseudonym};

/// Wire size of beacons and notifications, in bytes.
pub const BEACON_SIZE: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum PacketKind {
    Data,
    Hello,
    Confirm,
    Notify,
    Release,
    /// Same-sized dummy sent by a notify-and-go cover node.
    Cover,
}

impl PacketKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PacketKind::Data => "DATA",
            PacketKind::Hello => "HELLO",
            PacketKind::Confirm => "CONFIRM",
            PacketKind::Notify => "NOTIFY",
            PacketKind::Release => "RELEASE",
            PacketKind::Cover => "COVER",
        }
    }

    fn code(self) -> u8 {
        match self {
            PacketKind::Data => 1,
            PacketKind::Hello => 2,
            PacketKind::Confirm => 3,
            PacketKind::Notify => 4,
            PacketKind::Release => 5,
            PacketKind::Cover => 6,
        }
    }
}

/// How a routed packet is currently being carried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Phase {
    /// Hop-by-hop towards a temporary destination (or the target, for GPSR).
    Route,
    /// Local broadcast inside the destination zone.
    ZoneBroadcast,
    /// Multicast to the zone nodes that hold it until the next packet arrives.
    Hold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub kind: PacketKind,
    pub phase: Phase,
    pub session_id: u64,
    pub seq: u32,
    pub attempt: u8,
    pub temp_dest: Option<Position>,
    pub dest_zone: Option<Zone>,
    pub sender_group: GroupId,
    /// Link-layer receivers; empty means broadcast.
    pub next_hops: Vec<Pseudonym>,
    pub gpsr: GpsrPacketState,
    pub ttl: u16,
    /// Random forwarders visited so far.
    pub rf_count: u16,
    /// Set once random-forwarder legs stall and the packet is routed straight
    /// at the destination zone.
    pub direct: bool,
    pub beacon: Option<Beacon>,
    pub notify_window: Option<f64>,
    pub payload: Arc<[u8]>,
    pub size: u32,
}

impl Packet {
    pub fn hello(beacon: Beacon, group: GroupId) -> Packet {
        Packet {
            kind: PacketKind::Hello,
            phase: Phase::Route,
            session_id: 0,
            seq: 0,
            attempt: 0,
            temp_dest: None,
            dest_zone: None,
            sender_group: group,
            next_hops: Vec::new(),
            gpsr: GpsrPacketState::greedy(beacon.position),
            ttl: 0,
            rf_count: 0,
            direct: false,
            beacon: Some(beacon),
            notify_window: None,
            payload: Arc::from(Vec::new()),
            size: BEACON_SIZE,
        }
    }

    /// A routed packet (DATA, CONFIRM, RELEASE) aimed at `target`.
    pub fn routed(
        kind: PacketKind,
        session_id: u64,
        seq: u32,
        target: Position,
        payload: Arc<[u8]>,
        size: u32,
        ttl: u16,
    ) -> Packet {
        Packet {
            kind,
            phase: Phase::Route,
            session_id,
            seq,
            attempt: 0,
            temp_dest: None,
            dest_zone: None,
            sender_group: GroupId(0),
            next_hops: Vec::new(),
            gpsr: GpsrPacketState::greedy(target),
            ttl,
            rf_count: 0,
            direct: false,
            beacon: None,
            notify_window: None,
            payload,
            size,
        }
    }

    pub fn is_broadcast(&self) -> bool {
        self.next_hops.is_empty()
    }

    /// Forgets per-hop geographic state before the packet is handed around
    /// inside the destination zone.
    pub fn clear_route_state(&mut self) {
        let target = self
            .temp_dest
            .or_else(|| self.dest_zone.map(|z| z.center()))
            .unwrap_or(self.gpsr.target);
        self.gpsr = GpsrPacketState::greedy(target);
    }

    /// Canonical big-endian byte encoding of every header field and the payload.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(128 + self.payload.len());
        out.push(self.kind.code());
        if let Some(b) = &self.beacon {
            out.extend_from_slice(b.pseudonym.as_bytes());
            put_pos(&mut out, &b.position);
            out.extend_from_slice(&self.sender_group.0.to_be_bytes());
            return out;
        }
        out.push(match self.phase {
            Phase::Route => 0,
            Phase::ZoneBroadcast => 1,
            Phase::Hold => 2,
        });
        out.extend_from_slice(&self.session_id.to_be_bytes());
        out.extend_from_slice(&self.seq.to_be_bytes());
        out.push(self.attempt);
        put_opt_pos(&mut out, self.temp_dest.as_ref());
        match &self.dest_zone {
            Some(z) => {
                out.push(1);
                put_pos(&mut out, &z.min_corner());
                put_pos(&mut out, &z.max_corner());
            }
            None => out.push(0),
        }
        out.extend_from_slice(&self.sender_group.0.to_be_bytes());
        out.extend_from_slice(&(self.next_hops.len() as u16).to_be_bytes());
        for p in &self.next_hops {
            out.extend_from_slice(p.as_bytes());
        }
        out.push(match self.gpsr.mode {
            ForwardMode::Greedy => 0,
            ForwardMode::Perimeter => 1,
        });
        put_pos(&mut out, &self.gpsr.target);
        put_opt_pos(&mut out, self.gpsr.entry_point.as_ref());
        put_opt_pos(&mut out, self.gpsr.face_point.as_ref());
        match &self.gpsr.first_edge {
            Some((a, b)) => {
                out.push(1);
                put_pos(&mut out, a);
                put_pos(&mut out, b);
            }
            None => out.push(0),
        }
        out.extend_from_slice(&self.ttl.to_be_bytes());
        out.extend_from_slice(&self.rf_count.to_be_bytes());
        out.push(u8::from(self.direct));
        out.extend_from_slice(&self.notify_window.unwrap_or(0.0).to_be_bytes());
        out.extend_from_slice(&self.size.to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }
}

fn put_pos(out: &mut Vec<u8>, p: &Position) {
    out.extend_from_slice(&p.x.to_be_bytes());
    out.extend_from_slice(&p.y.to_be_bytes());
}

fn put_opt_pos(out: &mut Vec<u8>, p: Option<&Position>) {
    match p {
        Some(p) => {
            out.push(1);
            put_pos(out, p);
        }
        None => out.push(0),
    }
}

/// True when `haystack` contains `needle` as a contiguous byte run.
pub fn contains_bytes(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// True when the encoding carries either coordinate of `p` as a raw f64.
pub fn leaks_position(encoded: &[u8], p: &Position) -> bool {
    contains_bytes(encoded, &p.x.to_be_bytes()) || contains_bytes(encoded, &p.y.to_be_bytes())
}
