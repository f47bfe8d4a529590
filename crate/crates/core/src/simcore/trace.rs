use std::io::{self, Write};

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEvent {
    pub t: f64,
    pub kind: &'static str,
    pub node: Option<usize>,
    pub packet_session: Option<u64>,
    pub packet_kind: Option<&'static str>,
    pub pos_x: Option<f64>,
    pub pos_y: Option<f64>,
    pub detail: String,
}

pub fn write_trace_jsonl<W: Write>(events: &[TraceEvent], mut out: W) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
