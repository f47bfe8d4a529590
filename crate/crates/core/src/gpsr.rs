//! Greedy Perimeter Stateless Routing.
//!
//! Greedy forwarding to the neighbor closest to the target, with right-hand-rule
//! face traversal over the Gabriel subgraph when greedy forwarding reaches a
//! local minimum. The per-packet state lives in [`GpsrPacketState`].

use std::cmp::Ordering;
use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::TAU;

use serde::Serialize;

use crate::geometry::Position;
use crate::identity::{make_pseudonym, NeighborEntry, NodeId, Pseudonym};
use crate::simcore::DropReason;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ForwardMode {
    Greedy,
    Perimeter,
}

/// Directed edge, identified by endpoint positions.
pub type Edge = (Position, Position);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsrPacketState {
    pub mode: ForwardMode,
    pub target: Position,
    /// Where perimeter mode was entered (Lp). Set iff mode is perimeter.
    pub entry_point: Option<Position>,
    /// Point on the segment entry -> target where the current face was entered (Lf).
    pub face_point: Option<Position>,
    /// First edge traversed on the current face (e0).
    pub first_edge: Option<Edge>,
}

impl GpsrPacketState {
    pub fn greedy(target: Position) -> Self {
        GpsrPacketState {
            mode: ForwardMode::Greedy,
            target,
            entry_point: None,
            face_point: None,
            first_edge: None,
        }
    }
}

/// When a node may keep the packet instead of forwarding it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryRule {
    /// Only a node located at the target accepts; perimeter mode recovers from voids.
    AtTarget,
    /// The node with no neighbor strictly closer to the target accepts.
    ClosestNode,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RouteDecision {
    Forward {
        next: NeighborEntry,
        state: GpsrPacketState,
    },
    Deliver,
    Drop(DropReason),
}

fn by_distance_then_pseudonym(target: &Position) -> impl Fn(&&NeighborEntry, &&NeighborEntry) -> Ordering + '_ {
    move |a, b| {
        a.position
            .distance_sq(target)
            .total_cmp(&b.position.distance_sq(target))
            .then_with(|| a.pseudonym.cmp(&b.pseudonym))
    }
}

/// Neighbor closest to `target`, provided it is strictly closer than `self_pos`.
pub fn greedy_next_hop(self_pos: &Position, neighbors: &[NeighborEntry], target: &Position) -> Option<NeighborEntry> {
    let own = self_pos.distance_sq(target);
    neighbors
        .iter()
        .min_by(by_distance_then_pseudonym(target))
        .filter(|n| n.position.distance_sq(target) < own)
        .copied()
}

/// Gabriel-graph filter: `v` survives iff no other neighbor lies inside or on
/// the circle whose diameter is the segment `self_pos`-`v`. Witnesses on the
/// circle count so that co-circular points (square corners) do not keep two
/// crossing diagonals.
const GABRIEL_SLACK: f64 = 1e-9;

pub fn planarize(self_pos: &Position, neighbors: &[NeighborEntry]) -> Vec<NeighborEntry> {
    neighbors
        .iter()
        .filter(|v| {
            let mid = Position::new((self_pos.x + v.position.x) / 2.0, (self_pos.y + v.position.y) / 2.0);
            let r2 = self_pos.distance_sq(&v.position) / 4.0;
            !neighbors.iter().any(|w| {
                w.pseudonym != v.pseudonym
                    && w.position != v.position
                    && w.position.distance_sq(&mid) <= r2 * (1.0 + GABRIEL_SLACK)
            })
        })
        .copied()
        .collect()
}

/// Counter-clockwise angle from `reference` to `bearing`, in (0, 2pi].
fn ccw_delta(reference: f64, bearing: f64) -> f64 {
    let d = (bearing - reference).rem_euclid(TAU);
    if d <= 1e-12 {
        TAU
    } else {
        d
    }
}

/// First planar neighbor counter-clockwise about `self_pos` from the ray at `reference`.
fn first_ccw(self_pos: &Position, planar: &[NeighborEntry], reference: f64) -> Option<NeighborEntry> {
    planar
        .iter()
        .min_by(|a, b| {
            ccw_delta(reference, self_pos.bearing_to(&a.position))
                .total_cmp(&ccw_delta(reference, self_pos.bearing_to(&b.position)))
                .then_with(|| a.pseudonym.cmp(&b.pseudonym))
        })
        .copied()
}

/// Intersection point of segments p1-p2 and q1-q2, if they cross.
fn segment_intersection(p1: &Position, p2: &Position, q1: &Position, q2: &Position) -> Option<Position> {
    let r = (p2.x - p1.x, p2.y - p1.y);
    let s = (q2.x - q1.x, q2.y - q1.y);
    let denom = r.0 * s.1 - r.1 * s.0;
    if denom.abs() < 1e-15 {
        return None;
    }
    let qp = (q1.x - p1.x, q1.y - p1.y);
    let t = (qp.0 * s.1 - qp.1 * s.0) / denom;
    let u = (qp.0 * r.1 - qp.1 * r.0) / denom;
    if (-EPS..=1.0 + EPS).contains(&t) && (-EPS..=1.0 + EPS).contains(&u) {
        Some(Position::new(p1.x + t * r.0, p1.y + t * r.1))
    } else {
        None
    }
}

/// Switches faces while the candidate edge crosses the entry->target segment
/// closer to the target than the current face entry point.
fn face_change(
    self_pos: &Position,
    planar: &[NeighborEntry],
    state: &mut GpsrPacketState,
    mut edge: NeighborEntry,
) -> NeighborEntry {
    let (Some(lp), Some(mut lf)) = (state.entry_point, state.face_point) else {
        return edge;
    };
    for _ in 0..=planar.len() {
        let Some(cross) = segment_intersection(self_pos, &edge.position, &lp, &state.target) else {
            break;
        };
        if cross.distance(&state.target) + EPS >= lf.distance(&state.target) {
            break;
        }
        lf = cross;
        state.face_point = Some(cross);
        let Some(next) = first_ccw(self_pos, planar, self_pos.bearing_to(&edge.position)) else {
            break;
        };
        edge = next;
        state.first_edge = Some((*self_pos, edge.position));
    }
    edge
}

/// Right-hand-rule step for a packet already in perimeter mode.
pub fn perimeter_next_hop(
    self_pos: &Position,
    planar_neighbors: &[NeighborEntry],
    state: &GpsrPacketState,
    incoming: Option<Position>,
) -> Result<(NeighborEntry, GpsrPacketState), DropReason> {
    let mut st = *state;
    let reference = match incoming {
        Some(prev) => self_pos.bearing_to(&prev),
        None => self_pos.bearing_to(&st.target),
    };
    let edge = first_ccw(self_pos, planar_neighbors, reference).ok_or(DropReason::Unreachable)?;
    if st.first_edge == Some((*self_pos, edge.position)) {
        return Err(DropReason::Unreachable);
    }
    let edge = face_change(self_pos, planar_neighbors, &mut st, edge);
    Ok((edge, st))
}

fn enter_perimeter(
    self_pos: &Position,
    neighbors: &[NeighborEntry],
    target: Position,
) -> Result<(NeighborEntry, GpsrPacketState), DropReason> {
    let planar = planarize(self_pos, neighbors);
    let mut st = GpsrPacketState {
        mode: ForwardMode::Perimeter,
        target,
        entry_point: Some(*self_pos),
        face_point: Some(*self_pos),
        first_edge: None,
    };
    let edge = first_ccw(self_pos, &planar, self_pos.bearing_to(&target)).ok_or(DropReason::Unreachable)?;
    st.first_edge = Some((*self_pos, edge.position));
    let edge = face_change(self_pos, &planar, &mut st, edge);
    Ok((edge, st))
}

/// One forwarding decision at the node at `self_pos`.
///
/// `incoming` is the position of the node the packet arrived from, needed for
/// the right-hand rule.
pub fn route_step(
    self_pos: &Position,
    neighbors: &[NeighborEntry],
    state: &GpsrPacketState,
    incoming: Option<Position>,
    rule: DeliveryRule,
    ttl: u16,
) -> RouteDecision {
    let target = state.target;
    if rule == DeliveryRule::AtTarget && self_pos.distance(&target) <= EPS {
        return RouteDecision::Deliver;
    }
    if ttl == 0 {
        return RouteDecision::Drop(DropReason::Ttl);
    }
    let mut st = *state;
    if st.mode == ForwardMode::Perimeter {
        let lp = st.entry_point.unwrap_or(*self_pos);
        if self_pos.distance(&target) < lp.distance(&target) {
            st = GpsrPacketState::greedy(target);
        }
    }
    let outcome = match st.mode {
        ForwardMode::Greedy => {
            if let Some(next) = greedy_next_hop(self_pos, neighbors, &target) {
                return RouteDecision::Forward { next, state: st };
            }
            match rule {
                DeliveryRule::ClosestNode => return RouteDecision::Deliver,
                DeliveryRule::AtTarget => enter_perimeter(self_pos, neighbors, target),
            }
        }
        ForwardMode::Perimeter => {
            let planar = planarize(self_pos, neighbors);
            perimeter_next_hop(self_pos, &planar, &st, incoming)
        }
    };
    match outcome {
        Ok((next, state)) => RouteDecision::Forward { next, state },
        Err(reason) => RouteDecision::Drop(reason),
    }
}

/// Outcome of routing a packet hop by hop over a static unit-disk graph.
#[derive(Debug, Clone, PartialEq)]
pub enum PathOutcome {
    Delivered(Vec<usize>),
    Dropped(DropReason, Vec<usize>),
}

/// Unit-disk adjacency: `u` and `v` are linked iff their distance is below `range`.
pub fn unit_disk_neighbors(positions: &[Position], range: f64) -> Vec<Vec<usize>> {
    (0..positions.len())
        .map(|u| {
            (0..positions.len())
                .filter(|&v| v != u && positions[u].distance(&positions[v]) < range)
                .collect()
        })
        .collect()
}

/// A static unit-disk graph with perfect neighbor knowledge, for routing
/// many packets over the same topology.
pub struct UnitDiskGraph {
    positions: Vec<Position>,
    adjacency: Vec<Vec<usize>>,
    names: Vec<Pseudonym>,
    index: BTreeMap<Pseudonym, usize>,
}

impl UnitDiskGraph {
    pub fn new(positions: &[Position], range: f64) -> Self {
        let adjacency = unit_disk_neighbors(positions, range);
        let names: Vec<Pseudonym> = (0..positions.len())
            .map(|i| make_pseudonym(NodeId::new(i as u64 + 1), 0.0))
            .collect();
        let index = names.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        UnitDiskGraph {
            positions: positions.to_vec(),
            adjacency,
            names,
            index,
        }
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn route(&self, src: usize, dst: usize, ttl: u16) -> PathOutcome {
        self.trace(src, dst, ttl).0
    }

    /// Routes one packet, also returning the forwarding mode of each hop.
    pub fn trace(&self, src: usize, dst: usize, ttl: u16) -> (PathOutcome, Vec<ForwardMode>) {
        let positions = &self.positions;
        let mut state = GpsrPacketState::greedy(positions[dst]);
        let mut current = src;
        let mut incoming = None;
        let mut path = vec![src];
        let mut ttl = ttl;
        let mut modes = Vec::new();
        loop {
            let neighbors: Vec<NeighborEntry> = self.adjacency[current]
                .iter()
                .map(|&v| NeighborEntry {
                    pseudonym: self.names[v],
                    position: positions[v],
                    last_heard: 0.0,
                })
                .collect();
            match route_step(
                &positions[current],
                &neighbors,
                &state,
                incoming,
                DeliveryRule::AtTarget,
                ttl,
            ) {
                RouteDecision::Deliver => return (PathOutcome::Delivered(path), modes),
                RouteDecision::Drop(r) => return (PathOutcome::Dropped(r, path), modes),
                RouteDecision::Forward { next, state: s } => {
                    modes.push(s.mode);
                    incoming = Some(positions[current]);
                    current = self.index[&next.pseudonym];
                    state = s;
                    ttl -= 1;
                    path.push(current);
                }
            }
        }
    }
}

/// Runs [`route_step`] from `src` towards the position of `dst` on a static
/// unit-disk graph with perfect neighbor knowledge.
pub fn route_on_graph(positions: &[Position], range: f64, src: usize, dst: usize, ttl: u16) -> PathOutcome {
    UnitDiskGraph::new(positions, range).route(src, dst, ttl)
}

/// Like [`route_on_graph`], also returning the forwarding mode of each hop.
pub fn trace_on_graph(
    positions: &[Position],
    range: f64,
    src: usize,
    dst: usize,
    ttl: u16,
) -> (PathOutcome, Vec<ForwardMode>) {
    UnitDiskGraph::new(positions, range).trace(src, dst, ttl)
}

/// Breadth-first reachability from `src`.
pub fn reachable(adjacency: &[Vec<usize>], src: usize) -> Vec<bool> {
    let mut seen = vec![false; adjacency.len()];
    let mut queue = VecDeque::from([src]);
    seen[src] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adjacency[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}
