use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::adversary::AnonymityReport;
use crate::hpar::PacketKind;
use crate::identity::Pseudonym;

use super::config::Protocol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum DropReason {
    Ttl,
    Unreachable,
    Loss,
    LinkBreak,
    /// Broadcast in the destination zone but never reached the destination.
    ZoneMiss,
    RetriesExhausted,
    MalformedHello,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::Ttl => "ttl",
            DropReason::Unreachable => "unreachable",
            DropReason::Loss => "loss",
            DropReason::LinkBreak => "link_break",
            DropReason::ZoneMiss => "zone_miss",
            DropReason::RetriesExhausted => "retries_exhausted",
            DropReason::MalformedHello => "malformed_hello",
        }
    }
}

/// Lifecycle of one transmission attempt of one DATA packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InstanceOutcome {
    InFlight,
    InZone,
    Held,
    Consumed,
    Dropped(DropReason),
}

/// One application packet (a sequence number within a flow).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PacketRecord {
    pub flow: usize,
    pub seq: u32,
    pub source: usize,
    pub destination: usize,
    pub app_time: f64,
    pub consumed_at: Option<f64>,
    pub confirmed_at: Option<f64>,
    pub attempts: u32,
    pub failed: bool,
    /// Nodes other than the destination that transmitted this packet.
    pub forwarders: BTreeSet<usize>,
    /// Nodes that received the packet in the destination zone, plus the last
    /// random forwarder.
    pub anonymity_set: BTreeSet<usize>,
}

/// The window in which a source's real transmission is hidden among covers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceWindow {
    pub flow: usize,
    pub seq: u32,
    pub attempt: u8,
    pub kind: PacketKind,
    pub start: f64,
    pub length: f64,
    pub source: usize,
    pub source_pseudonym: Pseudonym,
    pub covers: usize,
}

/// Facts known only to the simulator, used to score attacks.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GroundTruth {
    pub windows: Vec<SourceWindow>,
    pub packets: Vec<PacketRecord>,
    /// Wire size shared by beacons and notifications.
    pub beacon_size: u32,
}

/// Counters accumulated by the engine.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunRecords {
    pub packets: Vec<PacketRecord>,
    pub instances: BTreeMap<(u64, u32, u8), InstanceOutcome>,
    pub transmissions: u64,
    pub hello_transmissions: u64,
    pub control_drops: BTreeMap<DropReason, u64>,
    pub malformed_hellos: u64,
    pub bare_sends: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub seed: u64,
    pub protocol: Protocol,
    pub packets_sent: usize,
    pub packets_delivered: usize,
    pub packets_failed: usize,
    pub delivery_rate: Option<f64>,
    pub mean_latency: Option<f64>,
    /// Every non-beacon transmission.
    pub transmissions_total: u64,
    pub hello_transmissions: u64,
    pub participating_nodes: usize,
    pub anonymity: AnonymityReport,
    /// Fate of DATA transmission attempts that did not reach the destination.
    pub drops_by_reason: BTreeMap<DropReason, u64>,
    /// Drops of CONFIRM and RELEASE packets.
    pub control_drops: BTreeMap<DropReason, u64>,
    pub instances_initiated: u64,
    pub instances_consumed: u64,
    pub instances_dropped: u64,
    pub instances_alive: u64,
    pub bare_sends: u64,
}

impl MetricsRecord {
    pub fn drops(&self, reason: DropReason) -> u64 {
        self.drops_by_reason.get(&reason).copied().unwrap_or(0)
    }
}

/// Aggregates run records into the metrics row for one repetition.
pub fn collect_metrics(
    seed: u64,
    protocol: Protocol,
    records: &RunRecords,
    anonymity: AnonymityReport,
) -> MetricsRecord {
    let sent = records.packets.len();
    let delivered: Vec<&PacketRecord> = records.packets.iter().filter(|p| p.consumed_at.is_some()).collect();
    let latencies: Vec<f64> = delivered
        .iter()
        .map(|p| p.consumed_at.unwrap_or(p.app_time) - p.app_time)
        .collect();
    let participating: BTreeSet<usize> = records
        .packets
        .iter()
        .flat_map(|p| p.forwarders.iter().copied())
        .collect();
    let mut drops_by_reason = BTreeMap::new();
    let (mut consumed, mut dropped, mut alive) = (0, 0, 0);
    for outcome in records.instances.values() {
        match outcome {
            InstanceOutcome::Consumed => consumed += 1,
            InstanceOutcome::Dropped(r) => {
                dropped += 1;
                *drops_by_reason.entry(*r).or_insert(0) += 1;
            }
            _ => alive += 1,
        }
    }
    MetricsRecord {
        seed,
        protocol,
        packets_sent: sent,
        packets_delivered: delivered.len(),
        packets_failed: records.packets.iter().filter(|p| p.failed).count(),
        delivery_rate: (sent > 0).then(|| delivered.len() as f64 / sent as f64),
        mean_latency: (!latencies.is_empty()).then(|| latencies.iter().sum::<f64>() / latencies.len() as f64),
        transmissions_total: records.transmissions,
        hello_transmissions: records.hello_transmissions,
        participating_nodes: participating.len(),
        anonymity,
        drops_by_reason,
        control_drops: records.control_drops.clone(),
        instances_initiated: records.instances.len() as u64,
        instances_consumed: consumed,
        instances_dropped: dropped,
        instances_alive: alive,
        bare_sends: records.bare_sends,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(consumed: Option<f64>, forwarders: &[usize]) -> PacketRecord {
        PacketRecord {
            flow: 0,
            seq: 0,
            source: 0,
            destination: 9,
            app_time: 1.0,
            consumed_at: consumed,
            confirmed_at: None,
            attempts: 1,
            failed: false,
            forwarders: forwarders.iter().copied().collect(),
            anonymity_set: BTreeSet::new(),
        }
    }

    #[test]
    fn five_hop_session_counts_five_participants() {
        let mut r = RunRecords::default();
        r.packets.push(record(Some(1.25), &[0, 1, 2, 3, 4]));
        r.instances.insert((7, 0, 0), InstanceOutcome::Consumed);
        let m = collect_metrics(1, Protocol::Hpar, &r, AnonymityReport::default());
        assert_eq!(m.participating_nodes, 5);
        assert_eq!(m.delivery_rate, Some(1.0));
        assert!((m.mean_latency.unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn no_traffic_reports_no_rate() {
        let m = collect_metrics(1, Protocol::Hpar, &RunRecords::default(), AnonymityReport::default());
        assert_eq!(m.delivery_rate, None);
        assert_eq!(m.mean_latency, None);
    }

    #[test]
    fn instances_are_conserved() {
        let mut r = RunRecords::default();
        r.packets.push(record(None, &[]));
        r.instances.insert((1, 0, 0), InstanceOutcome::Dropped(DropReason::Ttl));
        r.instances
            .insert((1, 0, 1), InstanceOutcome::Dropped(DropReason::Loss));
        r.instances.insert((1, 0, 2), InstanceOutcome::Held);
        r.instances.insert((1, 0, 3), InstanceOutcome::Consumed);
        let m = collect_metrics(1, Protocol::Hpar, &r, AnonymityReport::default());
        assert_eq!(
            m.instances_initiated,
            m.instances_consumed + m.instances_dropped + m.instances_alive
        );
        assert_eq!(m.drops(DropReason::Ttl), 1);
        assert_eq!(m.drops(DropReason::Unreachable), 0);
    }
}
