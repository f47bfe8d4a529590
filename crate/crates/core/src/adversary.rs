//! Passive eavesdroppers: what they record, and the attacks they can mount on
//! the recorded traffic.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::geometry::{Position, Zone};
use crate::identity::{GroupId, Pseudonym};
use crate::simcore::{Coverage, GroundTruth};

/// One radio transmission as seen over the air.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub time: f64,
    pub transmitter_pseudonym: Pseudonym,
    pub transmitter_group: GroupId,
    pub position: Position,
    pub packet_size: u32,
    /// Link-layer receiver pseudonyms; empty for broadcasts.
    pub addressees: Vec<Pseudonym>,
}

#[derive(Serialize)]
struct ObservationRow<'a> {
    t: f64,
    pseudonym: &'a Pseudonym,
    group: u32,
    x: f64,
    y: f64,
    size: u32,
    addressees: &'a [Pseudonym],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationLog {
    coverage: Coverage,
    observations: Vec<Observation>,
}

impl ObservationLog {
    pub fn new(coverage: Coverage) -> Self {
        ObservationLog {
            coverage,
            observations: Vec::new(),
        }
    }

    pub fn coverage(&self) -> Coverage {
        self.coverage
    }

    /// Records `obs` if its transmitter lies within coverage. Returns whether
    /// it was recorded.
    pub fn observe(&mut self, obs: Observation) -> bool {
        if let Coverage::Region(zone) = &self.coverage {
            if !zone.contains(&obs.position) {
                return false;
            }
        }
        debug_assert!(self.observations.last().is_none_or(|o| o.time <= obs.time));
        self.observations.push(obs);
        true
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for o in &self.observations {
            let row = ObservationRow {
                t: o.time,
                pseudonym: &o.transmitter_pseudonym,
                group: o.transmitter_group.0,
                x: o.position.x,
                y: o.position.y,
                size: o.packet_size,
                addressees: &o.addressees,
            };
            serde_json::to_writer(&mut out, &row)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingParams {
    pub bin_width: f64,
    pub max_offset: f64,
    /// Frames of this size (beacons) are ignored.
    pub ignore_size: Option<u32>,
}

impl Default for TimingParams {
    fn default() -> Self {
        TimingParams {
            bin_width: 0.1,
            max_offset: 30.0,
            ignore_size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingMatch {
    pub a: Pseudonym,
    pub b: Pseudonym,
    pub offset: f64,
    pub matches: usize,
}

pub fn timing_correlate(log: &ObservationLog, tolerance: f64, min_matches: usize) -> Vec<TimingMatch> {
    timing_correlate_with(log.observations(), tolerance, min_matches, &TimingParams::default())
}

/// For every ordered pseudonym pair, finds the modal positive offset between
/// A's and B's transmissions and reports the pair when at least `min_matches`
/// of A's transmissions are followed by one of B's within `tolerance` of it.
pub fn timing_correlate_with(
    observations: &[Observation],
    tolerance: f64,
    min_matches: usize,
    params: &TimingParams,
) -> Vec<TimingMatch> {
    let mut times: BTreeMap<Pseudonym, Vec<f64>> = BTreeMap::new();
    for o in observations {
        if params.ignore_size == Some(o.packet_size) {
            continue;
        }
        times.entry(o.transmitter_pseudonym).or_default().push(o.time);
    }
    for v in times.values_mut() {
        v.sort_by(f64::total_cmp);
    }
    let mut out = Vec::new();
    for (a, ta) in &times {
        if ta.len() < min_matches {
            continue;
        }
        for (b, tb) in &times {
            if a == b {
                continue;
            }
            let Some(offset) = modal_offset(ta, tb, params) else {
                continue;
            };
            let matches = ta.iter().filter(|&&t| has_within(tb, t + offset, tolerance)).count();
            if matches >= min_matches {
                out.push(TimingMatch {
                    a: *a,
                    b: *b,
                    offset,
                    matches,
                });
            }
        }
    }
    out
}

fn modal_offset(ta: &[f64], tb: &[f64], params: &TimingParams) -> Option<f64> {
    let mut bins: BTreeMap<i64, (usize, f64)> = BTreeMap::new();
    let mut lo = 0;
    for &a in ta {
        while lo < tb.len() && tb[lo] <= a {
            lo += 1;
        }
        for &b in &tb[lo..] {
            let d = b - a;
            if d > params.max_offset {
                break;
            }
            let e = bins.entry((d / params.bin_width).floor() as i64).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += d;
        }
    }
    // BTreeMap iterates bins in ascending order, so ties keep the smallest
    let mut best: Option<(usize, f64)> = None;
    for &(n, sum) in bins.values() {
        if best.is_none_or(|(bn, _)| n > bn) {
            best = Some((n, sum / n as f64));
        }
    }
    best.map(|(_, mean)| mean)
}

fn has_within(sorted: &[f64], t: f64, tolerance: f64) -> bool {
    let i = sorted.partition_point(|&x| x < t - tolerance);
    i < sorted.len() && sorted[i] <= t + tolerance
}

/// Running intersection of per-round candidate sets. Empty input or an empty
/// intersection yields an empty set.
pub fn intersection_attack<T: Ord + Clone>(rounds: &[BTreeSet<T>]) -> BTreeSet<T> {
    let mut it = rounds.iter();
    let Some(first) = it.next() else {
        return BTreeSet::new();
    };
    it.fold(first.clone(), |acc, s| acc.intersection(s).cloned().collect())
}

/// Candidate-set size after each round.
pub fn intersection_progress<T: Ord + Clone>(rounds: &[BTreeSet<T>]) -> Vec<usize> {
    (1..=rounds.len())
        .map(|n| intersection_attack(&rounds[..n]).len())
        .collect()
}

pub type Bucket = (i64, i64);

pub fn bucket_of(p: &Position, side: f64) -> Bucket {
    ((p.x / side).floor() as i64, (p.y / side).floor() as i64)
}

/// Pseudonyms active in `region` during `[start, end)`: transmitters of frames
/// other than beacons located in the region, and addressees last seen there.
pub fn round_participants(
    observations: &[Observation],
    region: &Zone,
    start: f64,
    end: f64,
    ignore_size: Option<u32>,
) -> BTreeMap<Pseudonym, Position> {
    let mut last_seen: BTreeMap<Pseudonym, Position> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for o in observations {
        if o.time >= end {
            break;
        }
        last_seen.insert(o.transmitter_pseudonym, o.position);
        if o.time < start || ignore_size == Some(o.packet_size) {
            continue;
        }
        if region.contains(&o.position) {
            out.insert(o.transmitter_pseudonym, o.position);
        }
        for a in &o.addressees {
            if let Some(p) = last_seen.get(a) {
                if region.contains(p) {
                    out.insert(*a, *p);
                }
            }
        }
    }
    out
}

/// Per-round participant sets mapped to position buckets, so pseudonym
/// rotation does not break the intersection.
pub fn bucketed_rounds(
    observations: &[Observation],
    region: &Zone,
    windows: &[(f64, f64)],
    bucket_side: f64,
    ignore_size: Option<u32>,
) -> Vec<BTreeSet<Bucket>> {
    windows
        .iter()
        .map(|&(s, e)| {
            round_participants(observations, region, s, e, ignore_size)
                .values()
                .map(|p| bucket_of(p, bucket_side))
                .collect()
        })
        .collect()
}

/// Guesses the transmitter of the earliest non-beacon frame in
/// `[start, start + length]`.
pub fn source_rank_guess(
    observations: &[Observation],
    start: f64,
    length: f64,
    ignore_size: Option<u32>,
) -> Option<Pseudonym> {
    let i = observations.partition_point(|o| o.time < start);
    observations[i..]
        .iter()
        .take_while(|o| o.time <= start + length)
        .find(|o| ignore_size != Some(o.packet_size))
        .map(|o| o.transmitter_pseudonym)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AnonymityReport {
    pub anonymity_set_mean: Option<f64>,
    pub anonymity_set_min: Option<usize>,
    pub src_trials: usize,
    pub src_ident_rate: Option<f64>,
    pub dst_trials: usize,
    pub dst_ident_rate: Option<f64>,
    /// Delivered packets whose anonymity set was smaller than k.
    pub k_shortfalls: usize,
}

/// Scores the rank-based source guesser and the uniform destination guesser
/// against ground truth.
pub fn anonymity_report(log: &ObservationLog, truth: &GroundTruth, k: u32, seed: u64) -> AnonymityReport {
    let ignore = Some(truth.beacon_size);
    let mut src_hits = 0;
    let mut src_trials = 0;
    for w in truth.windows.iter().filter(|w| w.kind == crate::hpar::PacketKind::Data) {
        src_trials += 1;
        // the tiny slack admits covers whose window opens one propagation delay later
        if source_rank_guess(log.observations(), w.start, w.length + 1e-5, ignore) == Some(w.source_pseudonym) {
            src_hits += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dst_hits = 0;
    let mut sizes = Vec::new();
    for p in truth
        .packets
        .iter()
        .filter(|p| p.consumed_at.is_some() && !p.anonymity_set.is_empty())
    {
        let set: Vec<usize> = p.anonymity_set.iter().copied().collect();
        sizes.push(set.len());
        if set[rng.gen_range(0..set.len())] == p.destination {
            dst_hits += 1;
        }
    }
    let rate = |hits: usize, n: usize| (n > 0).then(|| hits as f64 / n as f64);
    AnonymityReport {
        anonymity_set_mean: (!sizes.is_empty()).then(|| sizes.iter().sum::<usize>() as f64 / sizes.len() as f64),
        anonymity_set_min: sizes.iter().min().copied(),
        src_trials,
        src_ident_rate: rate(src_hits, src_trials),
        dst_trials: sizes.len(),
        dst_ident_rate: rate(dst_hits, sizes.len()),
        k_shortfalls: sizes.iter().filter(|&&s| s < k as usize).count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::{make_pseudonym, NodeId};

    fn ps(i: u64) -> Pseudonym {
        make_pseudonym(NodeId::new(i), 0.0)
    }

    fn obs(t: f64, who: u64, pos: Position, size: u32) -> Observation {
        Observation {
            time: t,
            transmitter_pseudonym: ps(who),
            transmitter_group: GroupId(0),
            position: pos,
            packet_size: size,
            addressees: Vec::new(),
        }
    }

    #[test]
    fn fixed_five_second_offset_is_found() {
        let p = Position::new(0.0, 0.0);
        let mut v = Vec::new();
        for t in [0.0, 5.0, 10.0] {
            v.push(obs(t, 1, p, 512));
        }
        for t in [5.0, 10.0, 15.0] {
            v.push(obs(t, 2, p, 512));
        }
        v.sort_by(|a, b| a.time.total_cmp(&b.time));
        let found = timing_correlate_with(&v, 0.25, 3, &TimingParams::default());
        let hit = found
            .iter()
            .find(|m| m.a == ps(1) && m.b == ps(2))
            .expect("pair reported");
        assert!((hit.offset - 5.0).abs() < 1e-9);
        assert_eq!(hit.matches, 3);
    }

    #[test]
    fn region_observer_ignores_outside() {
        let zone = Zone::with_size(10.0, 10.0).unwrap();
        let mut log = ObservationLog::new(Coverage::Region(zone));
        assert!(!log.observe(obs(0.0, 1, Position::new(20.0, 5.0), 64)));
        assert!(log.observe(obs(0.0, 1, Position::new(5.0, 5.0), 64)));
        assert_eq!(log.len(), 1);
    }

    #[test]
    fn intersection_examples() {
        let s = |v: &[char]| v.iter().copied().collect::<BTreeSet<char>>();
        let rounds = vec![s(&['a', 'b', 'c']), s(&['b', 'c', 'd']), s(&['b', 'e'])];
        assert_eq!(intersection_attack(&rounds), s(&['b']));
        assert_eq!(intersection_progress(&rounds), vec![3, 2, 1]);
        let same = vec![s(&['x', 'y']); 4];
        assert_eq!(intersection_attack(&same), s(&['x', 'y']));
        assert!(intersection_attack::<char>(&[]).is_empty());
    }

    #[test]
    fn rank_guess_skips_beacons() {
        let p = Position::new(0.0, 0.0);
        let v = vec![obs(1.0, 1, p, 64), obs(1.01, 2, p, 512), obs(1.02, 3, p, 512)];
        assert_eq!(source_rank_guess(&v, 1.0, 0.1, Some(64)), Some(ps(2)));
        assert_eq!(source_rank_guess(&v, 2.0, 0.1, Some(64)), None);
    }

    #[test]
    fn addressees_count_as_participants() {
        let zone = Zone::new(Position::new(0.0, 0.0), Position::new(10.0, 10.0)).unwrap();
        let mut v = vec![
            obs(0.0, 7, Position::new(5.0, 5.0), 64),
            obs(1.0, 1, Position::new(50.0, 5.0), 512),
        ];
        v[1].addressees = vec![ps(7)];
        let r = round_participants(&v, &zone, 0.5, 2.0, Some(64));
        assert_eq!(r.keys().copied().collect::<Vec<_>>(), vec![ps(7)]);
    }
}
