use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Axis, Position, Zone};
use crate::hpar::ProtocolParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Protocol {
    Hpar,
    GpsrBaseline,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Hpar => "hpar",
            Protocol::GpsrBaseline => "gpsr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Mobility {
    Static,
    RandomWaypoint { speed_min: f64, speed_max: f64, pause: f64 },
}

/// Where the passive observer can hear transmissions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Coverage {
    Global,
    Region(Zone),
}

/// One application flow: `count` packets from `src` to `dst`, the first at
/// `start`, then every `period` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrafficFlow {
    pub src: usize,
    pub dst: usize,
    pub start: f64,
    pub period: f64,
    pub size: u32,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub area: Zone,
    pub node_count: usize,
    pub radio_range: f64,
    /// Explicit node placement; random uniform when empty.
    pub positions: Vec<Position>,
    pub protocol: Protocol,
    pub k: u32,
    pub m: u32,
    pub c: u32,
    pub notify_window: f64,
    pub jitter_max: f64,
    pub notify_and_go: bool,
    pub hold_release: bool,
    pub hello_interval: f64,
    pub pseudonym_period: f64,
    pub mobility: Mobility,
    pub mobility_step: f64,
    pub seed: u64,
    pub duration: f64,
    pub traffic: Vec<TrafficFlow>,
    /// Link rate in bits per second.
    pub bitrate: f64,
    /// Independent per-receiver frame loss probability.
    pub loss: f64,
    pub max_retries: u32,
    /// Seconds; derived from the topology when `None`.
    pub confirm_timeout: Option<f64>,
    pub ttl: Option<u16>,
    pub crypto_setup_cost: f64,
    pub observer: Coverage,
    pub first_axis: Axis,
}

impl ScenarioConfig {
    /// A config with every optional field at its default.
    pub fn new(area: Zone, node_count: usize, radio_range: f64, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            area,
            node_count,
            radio_range,
            positions: Vec::new(),
            protocol: Protocol::Hpar,
            k: 4,
            m: 3,
            c: 3,
            notify_window: 0.1,
            jitter_max: 0.0,
            notify_and_go: true,
            hold_release: false,
            hello_interval: 1.0,
            pseudonym_period: 30.0,
            mobility: Mobility::Static,
            mobility_step: 1.0,
            seed,
            duration: 100.0,
            traffic: Vec::new(),
            bitrate: 2.0e6,
            loss: 0.0,
            max_retries: 3,
            confirm_timeout: None,
            ttl: None,
            crypto_setup_cost: 0.005,
            observer: Coverage::Global,
            first_axis: Axis::Vertical,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive, got {v}")))
            }
        };
        let non_negative = |name: &'static str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be non-negative, got {v}")))
            }
        };
        if self.node_count == 0 {
            return Err(Error::param("nodes", "must be at least 1"));
        }
        positive("range", self.radio_range)?;
        positive("hello_interval", self.hello_interval)?;
        positive("pseudonym_period", self.pseudonym_period)?;
        positive("mobility_step", self.mobility_step)?;
        positive("bitrate", self.bitrate)?;
        non_negative("duration", self.duration)?;
        non_negative("notify_window", self.notify_window)?;
        non_negative("jitter_max", self.jitter_max)?;
        non_negative("crypto_setup_cost", self.crypto_setup_cost)?;
        if self.k == 0 {
            return Err(Error::param("k", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.loss) {
            return Err(Error::param("loss", format!("must lie in [0, 1], got {}", self.loss)));
        }
        if let Some(t) = self.confirm_timeout {
            positive("confirm_timeout", t)?;
        }
        if self.ttl == Some(0) {
            return Err(Error::param("ttl", "must be at least 1"));
        }
        if let Mobility::RandomWaypoint {
            speed_min,
            speed_max,
            pause,
        } = self.mobility
        {
            positive("speed_min", speed_min)?;
            non_negative("pause", pause)?;
            if speed_max < speed_min || !speed_max.is_finite() {
                return Err(Error::param("speed_max", "must be at least speed_min"));
            }
        }
        if !self.positions.is_empty() {
            if self.positions.len() != self.node_count {
                return Err(Error::param(
                    "node",
                    format!("{} positions given for {} nodes", self.positions.len(), self.node_count),
                ));
            }
            if let Some(p) = self.positions.iter().find(|p| !self.area.contains(p)) {
                return Err(Error::param(
                    "node",
                    format!("({}, {}) lies outside the area", p.x, p.y),
                ));
            }
        }
        for (i, f) in self.traffic.iter().enumerate() {
            if f.src >= self.node_count || f.dst >= self.node_count {
                return Err(Error::param(
                    "traffic",
                    format!("flow {i} names a node outside 0..{}", self.node_count),
                ));
            }
            if f.src == f.dst {
                return Err(Error::param("traffic", format!("flow {i} sends to itself")));
            }
            non_negative("traffic", f.start)?;
            if f.count > 1 {
                positive("traffic", f.period)?;
            }
            if f.size == 0 {
                return Err(Error::param("traffic", format!("flow {i} has zero size")));
            }
        }
        Ok(())
    }

    pub fn density(&self) -> f64 {
        self.node_count as f64 / self.area.area()
    }

    /// Hop count across the area diagonal.
    pub fn hop_diameter(&self) -> u32 {
        (self.area.diagonal() / self.radio_range).ceil().max(1.0) as u32
    }

    pub fn effective_ttl(&self) -> u16 {
        self.ttl.unwrap_or_else(|| {
            let t = (4 * self.hop_diameter() as usize).max(6 * self.node_count);
            t.min(u16::MAX as usize) as u16
        })
    }

    fn max_flow_size(&self) -> u32 {
        self.traffic.iter().map(|f| f.size).max().unwrap_or(512)
    }

    /// Seconds to put `size` bytes on the air.
    pub fn tx_time(&self, size: u32) -> f64 {
        size as f64 * 8.0 / self.bitrate
    }

    pub fn effective_confirm_timeout(&self) -> f64 {
        self.confirm_timeout.unwrap_or_else(|| {
            let hops = 2.0 * self.hop_diameter() as f64 + 4.0;
            let per_hop = self.jitter_max + self.tx_time(self.max_flow_size()) + 0.01;
            let one_way = hops * per_hop + self.notify_window + self.crypto_setup_cost;
            let mut t = 4.0 * one_way;
            if self.hold_release {
                t += self.traffic.iter().map(|f| f.period).fold(0.0, f64::max);
            }
            t
        })
    }

    pub fn neighbor_ttl(&self) -> f64 {
        3.0 * self.hello_interval
    }

    pub fn protocol_params(&self) -> ProtocolParams {
        ProtocolParams {
            area: self.area,
            first_axis: self.first_axis,
            density: self.density(),
            k: self.k,
            radio_range: self.radio_range,
            ttl: self.effective_ttl(),
            confirm_timeout: self.effective_confirm_timeout(),
            max_retries: self.max_retries,
        }
    }
}
