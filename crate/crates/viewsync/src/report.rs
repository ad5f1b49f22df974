//! Human-readable and JSON run reports.

use serde::Serialize;

use crate::checker::{Metrics, Status, Verdict};
use crate::sim::ProtocolKind;
use crate::{Time, View};

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub protocol: String,
    pub seed: u64,
    pub fault: Option<String>,
    pub sync_view: Option<View>,
    pub last_entry_sync_view: Option<Time>,
    pub decided: usize,
    pub correct: usize,
    pub decision_time: Option<Time>,
    pub decision_view: Option<View>,
    pub fast_path: Option<bool>,
    pub max_mailbox: usize,
    pub warnings: usize,
    pub checks: Vec<CheckLine>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub status: String,
    pub detail: String,
}

pub fn status_str(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::Fail => "FAIL",
        Status::Vacuous => "vacuous",
    }
}

impl RunReport {
    pub fn new(
        scenario: &str,
        protocol: ProtocolKind,
        seed: u64,
        fault: Option<String>,
        max_mailbox: usize,
        m: &Metrics,
        verdicts: &[Verdict],
    ) -> RunReport {
        let sync_view = m.sync_view();
        let decisions: Vec<_> = m.decisions.values().collect();
        RunReport {
            scenario: scenario.to_string(),
            protocol: protocol.name().to_string(),
            seed,
            fault,
            sync_view,
            last_entry_sync_view: sync_view.and_then(|v| m.e_last(v)),
            decided: decisions.len(),
            correct: m.correct.len(),
            decision_time: m.latest_decision(),
            decision_view: decisions.iter().map(|d| d.view).max(),
            fast_path: (!decisions.is_empty()).then(|| decisions.iter().all(|d| d.fast_path)),
            max_mailbox,
            warnings: m.warnings,
            checks: verdicts
                .iter()
                .map(|v| CheckLine {
                    name: v.name.clone(),
                    status: status_str(v.status).to_string(),
                    detail: v.detail.clone(),
                })
                .collect(),
        }
    }

    pub fn ok(&self) -> bool {
        self.fault.is_none() && self.checks.iter().all(|c| c.status != "FAIL")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "scenario {} protocol {} seed {}\n",
            self.scenario, self.protocol, self.seed
        ));
        if let Some(f) = &self.fault {
            out.push_str(&format!("  FAULT: {f}\n"));
        }
        out.push_str(&format!(
            "  sync view: {}   decided: {}/{}{}\n",
            self.sync_view.map_or("-".into(), |v| v.to_string()),
            self.decided,
            self.correct,
            match (self.decision_time, self.decision_view) {
                (Some(t), Some(v)) => format!("   last decision t={t} view={v}"),
                _ => String::new(),
            }
        ));
        out.push_str(&format!(
            "  max mailbox: {}   warnings: {}\n",
            self.max_mailbox, self.warnings
        ));
        for c in &self.checks {
            out.push_str(&format!("  [{:>7}] {} - {}\n", c.status, c.name, c.detail));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// One line per run, for multi-seed sweeps.
pub fn summary_line(r: &RunReport) -> String {
    format!(
        "{} seed={:<6} {}  sync_view={}  decided={}/{}",
        if r.ok() { "ok  " } else { "FAIL" },
        r.seed,
        r.protocol,
        r.sync_view.map_or("-".into(), |v| v.to_string()),
        r.decided,
        r.correct,
    )
}
