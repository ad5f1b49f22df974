//! Message delivery policy: what the adversary does to each envelope.
//!
//! Scenarios script delivery with an ordered rule list; the first matching
//! rule wins, and envelopes matching no rule fall back to phase defaults
//! (lossy with arbitrary delay before the global stabilization time,
//! uniform delay within the bound after it). The engine separately clamps
//! whatever the policy returns so the timing model's guarantees can never
//! be violated, warning when a rule had to be overridden.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::Pid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RulePhase {
    Pre,
    Post,
    #[default]
    Any,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeliveryRule {
    #[serde(default)]
    pub phase: RulePhase,
    /// Payload kind: wish, newleader, propose, prepared, precommitted,
    /// committed. Absent = any.
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub from: Option<Pid>,
    #[serde(default)]
    pub to: Option<Pid>,
    #[serde(default)]
    pub drop: bool,
    /// Fixed delay; mutually exclusive with `delay_range`.
    #[serde(default)]
    pub delay: Option<f64>,
    /// Uniform delay range `[a, b]`.
    #[serde(default)]
    pub delay_range: Option<[f64; 2]>,
}

impl DeliveryRule {
    pub fn matches(&self, pre_gst: bool, kind: &str, from: Pid, to: Pid) -> bool {
        (match self.phase {
            RulePhase::Pre => pre_gst,
            RulePhase::Post => !pre_gst,
            RulePhase::Any => true,
        }) && self.kind.as_deref().is_none_or(|k| k == kind)
            && self.from.is_none_or(|f| f == from)
            && self.to.is_none_or(|t| t == to)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.drop && (self.delay.is_some() || self.delay_range.is_some()) {
            return Err("rule sets both drop and delay".into());
        }
        if self.delay.is_some() && self.delay_range.is_some() {
            return Err("rule sets both delay and delay_range".into());
        }
        if let Some([a, b]) = self.delay_range {
            if a > b || a < 0.0 {
                return Err(format!("bad delay_range [{a}, {b}]"));
            }
        }
        if self.delay.is_some_and(|d| d < 0.0) {
            return Err("negative delay".into());
        }
        if let Some(k) = &self.kind {
            const KINDS: [&str; 6] =
                ["wish", "newleader", "propose", "prepared", "precommitted", "committed"];
            if !KINDS.contains(&k.as_str()) {
                return Err(format!("unknown message kind {k:?}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    Drop,
    Deliver { delay: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeliveryPolicy {
    /// Default drop probability before stabilization.
    pub pre_drop_prob: f64,
    /// Default delay before stabilization: uniform in `[0, pre_delay_max]`.
    pub pre_delay_max: f64,
    /// Default delay after stabilization: uniform in `[0, post_delay_max]`;
    /// `None` means the full bound δ.
    pub post_delay_max: Option<f64>,
    pub rules: Vec<DeliveryRule>,
}

impl Default for DeliveryPolicy {
    fn default() -> Self {
        DeliveryPolicy {
            pre_drop_prob: 0.0,
            pre_delay_max: 0.0,
            post_delay_max: None,
            rules: Vec::new(),
        }
    }
}

impl DeliveryPolicy {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(0.0..=1.0).contains(&self.pre_drop_prob) {
            errs.push(format!("pre_drop_prob {} outside [0, 1]", self.pre_drop_prob));
        }
        if self.pre_delay_max < 0.0 {
            errs.push("negative pre_delay_max".into());
        }
        if self.post_delay_max.is_some_and(|d| d < 0.0) {
            errs.push("negative post_delay_max".into());
        }
        for (i, r) in self.rules.iter().enumerate() {
            if let Err(e) = r.validate() {
                errs.push(format!("rule {i}: {e}"));
            }
        }
        errs
    }

    /// Raw adversary decision for one envelope; the engine clamps it
    /// afterwards. The RNG is always advanced the same way for the same
    /// envelope so rule edits do not reshuffle unrelated randomness.
    pub fn decide(
        &self,
        rng: &mut ChaCha8Rng,
        pre_gst: bool,
        kind: &str,
        from: Pid,
        to: Pid,
        delta: f64,
    ) -> Decision {
        let draw: f64 = rng.gen();
        let unit: f64 = rng.gen();
        if let Some(rule) = self.rules.iter().find(|r| r.matches(pre_gst, kind, from, to)) {
            if rule.drop {
                return Decision::Drop;
            }
            if let Some(d) = rule.delay {
                return Decision::Deliver { delay: d };
            }
            if let Some([a, b]) = rule.delay_range {
                return Decision::Deliver { delay: a + unit * (b - a) };
            }
        }
        if pre_gst {
            if draw < self.pre_drop_prob {
                Decision::Drop
            } else {
                Decision::Deliver { delay: unit * self.pre_delay_max }
            }
        } else {
            Decision::Deliver { delay: unit * self.post_delay_max.unwrap_or(delta) }
        }
    }
}
