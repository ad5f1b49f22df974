//! Trace records: the totally ordered account of everything a run did.
//! Records are serialized as one JSON object per line with a fixed field
//! order, so identical runs produce byte-identical trace files.

use serde::{Deserialize, Serialize};

use crate::{Pid, Time, View};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceKind {
    Start,
    WishSent { view: View, to: Pid },
    ViewEntered { view: View },
    TimerSet { timer: String, local_dur: Time, expiry: Time },
    TimerStopped { timer: String },
    TimerExpired { timer: String },
    Send { env: u64, to: Pid, msg: String, view: View, value: Option<u64>, valid: Option<bool> },
    Deliver { env: u64, from: Pid, msg: String, view: View, send_time: Time },
    Drop { env: u64, to: Pid, msg: String, view: View },
    Proposed { view: View, value: u64, valid: bool },
    Voted { view: View, hash: u64 },
    PreparedQuorum { view: View, hash: u64 },
    Locked { view: View, hash: u64 },
    Decided { view: View, value: u64, valid: bool, path: String },
    Warning { msg: String },
}

/// One trace line. `pid` is 0 for engine-level records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: Time,
    pub seq: u64,
    pub pid: Pid,
    #[serde(flatten)]
    pub kind: TraceKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn push(&mut self, rec: TraceRecord) {
        self.records.push(rec);
    }

    /// Line-delimited JSON, one record per line, stable field order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in &self.records {
            out.push_str(&serde_json::to_string(rec).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let mut records = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(line)?);
        }
        Ok(Trace { records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let mut tr = Trace::default();
        tr.push(TraceRecord { t: 1.5, seq: 0, pid: 1, kind: TraceKind::Start });
        tr.push(TraceRecord {
            t: 2.0,
            seq: 1,
            pid: 2,
            kind: TraceKind::ViewEntered { view: 1 },
        });
        let text = tr.to_jsonl();
        assert_eq!(Trace::from_jsonl(&text).unwrap(), tr);
        assert_eq!(text.lines().count(), 2);
    }
}
