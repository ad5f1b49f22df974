//! Per-process local clocks. Before GST a clock may run at an arbitrary
//! positive rate (piecewise linear, adversary-chosen); from GST onward it
//! runs at rate exactly 1. Timers are measured in local time, so the
//! engine needs both the forward map and its inverse.

use serde::{Deserialize, Serialize};

use crate::Time;

/// One pre-GST segment: the clock runs at `rate` up to real time `until`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockSegment {
    pub until: Time,
    pub rate: f64,
}

/// Piecewise-linear map from real time to local time. Segments cover the
/// prefix of real time before `gst` (the last one is truncated there); any
/// uncovered pre-GST suffix and everything from `gst` on runs at rate 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockSchedule {
    pub offset: Time,
    pub segments: Vec<ClockSegment>,
    pub gst: Time,
}

impl ClockSchedule {
    pub fn identity(gst: Time) -> Self {
        ClockSchedule { offset: 0.0, segments: Vec::new(), gst }
    }

    /// A single pre-GST rate, rate 1 thereafter.
    pub fn uniform_rate(rate: f64, gst: Time) -> Self {
        ClockSchedule { offset: 0.0, segments: vec![ClockSegment { until: gst, rate }], gst }
    }

    fn pieces(&self) -> Vec<(Time, Time, f64)> {
        // (start, end, rate) covering [0, inf); validated to be increasing.
        let mut out = Vec::new();
        let mut cursor = 0.0;
        for seg in &self.segments {
            let end = seg.until.min(self.gst);
            if end > cursor {
                out.push((cursor, end, seg.rate));
                cursor = end;
            }
        }
        if cursor < self.gst {
            out.push((cursor, self.gst, 1.0));
            cursor = self.gst;
        }
        out.push((cursor, f64::INFINITY, 1.0));
        out
    }

    /// Local time at real time `t`. Total and strictly increasing.
    pub fn local(&self, t: Time) -> Time {
        let mut acc = self.offset;
        for (start, end, rate) in self.pieces() {
            if t <= end {
                return acc + (t - start) * rate;
            }
            acc += (end - start) * rate;
        }
        unreachable!("pieces cover all of real time")
    }

    /// The unique real time `t` with `local(t) = l`. Requires `l >= local(0)`.
    pub fn real(&self, l: Time) -> Time {
        let mut acc = self.offset;
        for (start, end, rate) in self.pieces() {
            let seg_local = (end - start) * rate;
            if l <= acc + seg_local || end.is_infinite() {
                return start + (l - acc) / rate;
            }
            acc += seg_local;
        }
        unreachable!("pieces cover all of real time")
    }

    pub fn validate(&self) -> Result<(), String> {
        let mut prev = 0.0;
        for seg in &self.segments {
            if seg.rate <= 0.0 {
                return Err(format!("clock rate must be positive, got {}", seg.rate));
            }
            if seg.until <= prev {
                return Err("clock segment boundaries must be strictly increasing".into());
            }
            prev = seg.until;
        }
        Ok(())
    }
}
