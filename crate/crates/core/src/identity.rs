//! Node identities, rotating pseudonyms, hello beaconing and neighbor tables.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};
use sha1::{Digest, Sha1};

use crate::geometry::{Position, Zone};
use crate::hpar::{Packet, PacketKind};

/// 48-bit hardware address. Never placed in a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(u64);

impl NodeId {
    pub const MASK: u64 = (1 << 48) - 1;

    pub fn new(mac: u64) -> Self {
        NodeId(mac & Self::MASK)
    }

    pub fn value(&self) -> u64 {
        self.0
    }

    /// Big-endian 6-byte encoding.
    pub fn mac_bytes(&self) -> [u8; 6] {
        let b = self.0.to_be_bytes();
        [b[2], b[3], b[4], b[5], b[6], b[7]]
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.mac_bytes();
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[0], b[1], b[2], b[3], b[4], b[5]
        )
    }
}

/// 160-bit pseudonym, the SHA-1 digest of MAC and timestamp.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pseudonym([u8; 20]);

impl Pseudonym {
    pub fn from_bytes(bytes: [u8; 20]) -> Self {
        Pseudonym(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for Pseudonym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pseudonym({}..)", &self.to_hex()[..8])
    }
}

impl fmt::Display for Pseudonym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Pseudonym {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

/// Timestamp in whole milliseconds, as used in the pseudonym preimage.
pub fn timestamp_millis(seconds: f64) -> u64 {
    (seconds * 1000.0).round().max(0.0) as u64
}

/// SHA-1 over `mac (6 bytes BE) || timestamp in ms (8 bytes BE)`.
pub fn make_pseudonym(id: NodeId, timestamp: f64) -> Pseudonym {
    let mut hasher = Sha1::new();
    hasher.update(id.mac_bytes());
    hasher.update(timestamp_millis(timestamp).to_be_bytes());
    Pseudonym(hasher.finalize().into())
}

/// Cluster identifier carried in packet headers in place of the sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GroupId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborEntry {
    pub pseudonym: Pseudonym,
    pub position: Position,
    pub last_heard: f64,
}

/// Body of a HELLO beacon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beacon {
    pub pseudonym: Pseudonym,
    pub position: Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum HelloError {
    #[error("packet is not a hello beacon")]
    WrongKind,
    #[error("hello beacon carries no body")]
    MissingBody,
    #[error("hello beacon position is not finite")]
    BadPosition,
}

/// Neighbor pseudonyms and their last advertised positions.
#[derive(Debug, Clone, Default)]
pub struct NeighborTable {
    entries: BTreeMap<Pseudonym, NeighborEntry>,
}

impl NeighborTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, p: &Pseudonym) -> Option<&NeighborEntry> {
        self.entries.get(p)
    }

    pub fn upsert(&mut self, pseudonym: Pseudonym, position: Position, now: f64) {
        self.entries.insert(
            pseudonym,
            NeighborEntry {
                pseudonym,
                position,
                last_heard: now,
            },
        );
    }

    /// Drops entries not heard within `ttl` seconds. Returns how many were removed.
    pub fn evict_stale(&mut self, now: f64, ttl: f64) -> usize {
        let before = self.entries.len();
        self.entries.retain(|_, e| now - e.last_heard <= ttl);
        before - self.entries.len()
    }

    /// Entries in pseudonym order.
    pub fn entries(&self) -> impl Iterator<Item = &NeighborEntry> {
        self.entries.values()
    }

    pub fn to_vec(&self) -> Vec<NeighborEntry> {
        self.entries.values().copied().collect()
    }
}

/// Builds the HELLO beacon advertising `pseudonym` at `position`.
pub fn hello_beacon(pseudonym: Pseudonym, position: Position, group: GroupId) -> Packet {
    Packet::hello(Beacon { pseudonym, position }, group)
}

/// Applies a received HELLO to `table`.
pub fn process_hello(table: &mut NeighborTable, hello: &Packet, now: f64) -> Result<(), HelloError> {
    if hello.kind != PacketKind::Hello {
        return Err(HelloError::WrongKind);
    }
    let beacon = hello.beacon.ok_or(HelloError::MissingBody)?;
    if !beacon.position.is_finite() {
        return Err(HelloError::BadPosition);
    }
    table.upsert(beacon.pseudonym, beacon.position, now);
    Ok(())
}

/// Periodic beacon times `phase + n * interval`.
#[derive(Debug, Clone, Copy)]
pub struct BeaconSchedule {
    pub interval: f64,
    pub phase: f64,
}

impl BeaconSchedule {
    pub fn emission(&self, n: u64) -> f64 {
        self.phase + n as f64 * self.interval
    }

    pub fn next_after(&self, t: f64) -> f64 {
        t + self.interval
    }
}

/// Grid clustering: the area is tiled by `range x range` cells and every node
/// in a cell shares the cell's group id.
pub fn group_of(area: &Zone, position: &Position, range: f64) -> GroupId {
    let cols = (area.width() / range).ceil().max(1.0) as u32;
    let rows = (area.height() / range).ceil().max(1.0) as u32;
    let cell = |rel: f64, n: u32| ((rel / range).floor().max(0.0) as u32).min(n - 1);
    let c = cell(position.x - area.min_corner().x, cols);
    let r = cell(position.y - area.min_corner().y, rows);
    GroupId(r * cols + c)
}

pub fn assign_groups<'a, I>(nodes: I, area: &Zone, range: f64) -> BTreeMap<NodeId, GroupId>
where
    I: IntoIterator<Item = (NodeId, &'a Position)>,
{
    nodes
        .into_iter()
        .map(|(id, p)| (id, group_of(area, p, range)))
        .collect()
}
