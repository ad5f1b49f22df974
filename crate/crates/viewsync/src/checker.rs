//! Post-hoc trace checking: synchronizer properties, consensus safety,
//! and the latency bounds. Everything works off the recorded trace plus
//! the run description; nothing here touches live engine state, so checks
//! can be replayed against a serialized trace file.

use std::collections::{BTreeMap, BTreeSet};

use crate::sim::{Build, ProtocolKind};
use crate::timefn::TimeoutFn;
use crate::trace::{Trace, TraceKind};
use crate::{Pid, Time, View};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// The property's premise does not hold in this run.
    Vacuous,
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl Verdict {
    fn pass(name: &str, detail: String) -> Self {
        Verdict { name: name.into(), status: Status::Pass, detail }
    }
    fn fail(name: &str, detail: String) -> Self {
        Verdict { name: name.into(), status: Status::Fail, detail }
    }
    fn vacuous(name: &str, detail: String) -> Self {
        Verdict { name: name.into(), status: Status::Vacuous, detail }
    }
    fn check(name: &str, ok: bool, detail: String) -> Self {
        if ok {
            Verdict::pass(name, detail)
        } else {
            Verdict::fail(name, detail)
        }
    }
}

/// Everything the checks need, extracted from a trace in one pass.
#[derive(Debug, Clone)]
pub struct Metrics {
    pub n: usize,
    pub f: usize,
    pub gst: Time,
    pub delta: Time,
    pub rho: Time,
    pub timeout: TimeoutFn,
    pub correct: BTreeSet<Pid>,
    pub starts: BTreeMap<Pid, Time>,
    /// First entry time per (correct) process and view.
    pub entries: BTreeMap<Pid, BTreeMap<View, Time>>,
    /// Per-process entry sequence in trace order, for Property 1.
    pub entry_seqs: BTreeMap<Pid, Vec<View>>,
    pub decisions: BTreeMap<Pid, Decision>,
    pub locked: BTreeMap<View, BTreeSet<u64>>,
    pub prepared_quorums: BTreeMap<View, BTreeSet<u64>>,
    pub warnings: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Decision {
    pub t: Time,
    pub view: View,
    pub value: u64,
    pub valid: bool,
    pub fast_path: bool,
}

impl Metrics {
    pub fn from_trace(trace: &Trace, build: &Build) -> Metrics {
        let correct: BTreeSet<Pid> =
            (1..=build.n).filter(|p| !build.behaviors.contains_key(p)).collect();
        let mut m = Metrics {
            n: build.n,
            f: build.f,
            gst: build.gst,
            delta: build.delta,
            rho: build.rho,
            timeout: build.timeout.clone(),
            correct: correct.clone(),
            starts: BTreeMap::new(),
            entries: BTreeMap::new(),
            entry_seqs: BTreeMap::new(),
            decisions: BTreeMap::new(),
            locked: BTreeMap::new(),
            prepared_quorums: BTreeMap::new(),
            warnings: 0,
        };
        for rec in &trace.records {
            let from_correct = correct.contains(&rec.pid);
            match &rec.kind {
                TraceKind::Start if from_correct => {
                    m.starts.entry(rec.pid).or_insert(rec.t);
                }
                TraceKind::ViewEntered { view } if from_correct => {
                    m.entries.entry(rec.pid).or_default().entry(*view).or_insert(rec.t);
                    m.entry_seqs.entry(rec.pid).or_default().push(*view);
                }
                TraceKind::Decided { view, value, valid, path } if from_correct => {
                    m.decisions.entry(rec.pid).or_insert(Decision {
                        t: rec.t,
                        view: *view,
                        value: *value,
                        valid: *valid,
                        fast_path: path == "fast",
                    });
                }
                TraceKind::Locked { view, hash } if from_correct => {
                    m.locked.entry(*view).or_default().insert(*hash);
                }
                TraceKind::PreparedQuorum { view, hash } if from_correct => {
                    m.prepared_quorums.entry(*view).or_default().insert(*hash);
                }
                TraceKind::Warning { .. } => m.warnings += 1,
                _ => {}
            }
        }
        m
    }

    pub fn e_first(&self, v: View) -> Option<Time> {
        self.entries
            .values()
            .filter_map(|per| per.get(&v))
            .copied()
            .min_by(|a, b| a.total_cmp(b))
    }

    /// Last entry into `v`; only meaningful when all correct entered `v`.
    pub fn e_last(&self, v: View) -> Option<Time> {
        let times: Vec<Time> = self
            .correct
            .iter()
            .filter_map(|p| self.entries.get(p).and_then(|per| per.get(&v)))
            .copied()
            .collect();
        if times.len() == self.correct.len() {
            times.into_iter().max_by(|a, b| a.total_cmp(b))
        } else {
            None
        }
    }

    pub fn s_first(&self) -> Option<Time> {
        self.starts.values().copied().min_by(|a, b| a.total_cmp(b))
    }

    pub fn s_last(&self) -> Option<Time> {
        if self.starts.len() == self.correct.len() {
            self.starts.values().copied().max_by(|a, b| a.total_cmp(b))
        } else {
            None
        }
    }

    /// Time by which `k` correct processes have started, if they did.
    pub fn start_kth(&self, k: usize) -> Option<Time> {
        let mut times: Vec<Time> = self.starts.values().copied().collect();
        times.sort_by(|a, b| a.total_cmp(b));
        times.get(k - 1).copied()
    }

    /// Highest view any correct process has entered by time `t`.
    pub fn global_view_at(&self, t: Time) -> View {
        self.entries
            .values()
            .flat_map(|per| per.iter())
            .filter(|(_, &et)| et <= t)
            .map(|(&v, _)| v)
            .max()
            .unwrap_or(0)
    }

    /// Highest view all correct processes have entered (checkable window top).
    pub fn v_hi(&self) -> View {
        self.correct
            .iter()
            .map(|p| {
                self.entries.get(p).and_then(|per| per.keys().max().copied()).unwrap_or(0)
            })
            .min()
            .unwrap_or(0)
    }

    /// The first synchronization view: the smallest `v` entered at or
    /// after GST from which every correct process enters every view up to
    /// the checkable horizon.
    pub fn sync_view(&self) -> Option<View> {
        let v_hi = self.v_hi();
        let candidates: BTreeSet<View> = self
            .entries
            .values()
            .flat_map(|per| per.keys().copied())
            .filter(|&v| self.e_first(v).is_some_and(|t| t >= self.gst))
            .collect();
        candidates
            .into_iter()
            .find(|&v| v <= v_hi && (v..=v_hi).all(|u| self.e_last(u).is_some()))
    }

    pub fn latest_decision(&self) -> Option<Time> {
        if self.decisions.len() == self.correct.len() {
            self.decisions.values().map(|d| d.t).max_by(|a, b| a.total_cmp(b))
        } else {
            None
        }
    }
}

const TOL: f64 = 1e-9;

/// Synchronizer Properties 1-5, the inter-view overlap bound, the
/// last-entry pacing bound, and the two premise-gated latency properties.
pub fn check_synchronizer(m: &Metrics) -> Vec<Verdict> {
    let mut out = Vec::new();
    let ff = |v: View| m.timeout.eval(v);

    // Property 1: each process's entry sequence is strictly increasing.
    let mono = m
        .entry_seqs
        .iter()
        .find(|(_, seq)| seq.windows(2).any(|w| w[1] <= w[0]));
    out.push(Verdict::check(
        "prop1-monotone-entries",
        mono.is_none(),
        match mono {
            Some((p, seq)) => format!("p{p} entry sequence not increasing: {seq:?}"),
            None => "every process's entries strictly increase".into(),
        },
    ));

    let Some(v_sync) = m.sync_view() else {
        out.push(Verdict::vacuous(
            "prop2-sync-after-gst",
            "no synchronization view within the horizon".into(),
        ));
        return out;
    };
    let v_hi = m.v_hi();

    // Property 2: the synchronization view starts at or after GST.
    out.push(Verdict::check(
        "prop2-sync-after-gst",
        m.e_first(v_sync).is_some_and(|t| t >= m.gst - TOL),
        format!("V={v_sync}, E_first(V)={:?}, GST={}", m.e_first(v_sync), m.gst),
    ));

    // Property 3: all correct processes enter every view in [V, v_hi].
    let missing: Vec<View> = (v_sync..=v_hi).filter(|&v| m.e_last(v).is_none()).collect();
    out.push(Verdict::check(
        "prop3-all-enter",
        missing.is_empty(),
        if missing.is_empty() {
            format!("all correct enter views {v_sync}..={v_hi}")
        } else {
            format!("views missing entries: {missing:?}")
        },
    ));

    // Property 4: entries into a view span at most d = 2 delta.
    for v in v_sync..=v_hi {
        if let (Some(ef), Some(el)) = (m.e_first(v), m.e_last(v)) {
            if el > ef + 2.0 * m.delta + TOL {
                out.push(Verdict::fail(
                    "prop4-entry-span",
                    format!("view {v}: E_last - E_first = {} > 2 delta", el - ef),
                ));
            }
        }
    }
    if !out.iter().any(|v| v.name == "prop4-entry-span") {
        out.push(Verdict::pass(
            "prop4-entry-span",
            format!("entry span <= 2 delta for views {v_sync}..={v_hi}"),
        ));
    }

    // Property 5: views last long enough: E_first(v+1) >= E_first(v) + F(v).
    // Overlap corollary: E_first(v+1) - E_last(v) >= F(v) - 2 delta.
    let mut p5_ok = true;
    let mut overlap_ok = true;
    let mut pace_ok = true;
    for v in v_sync..v_hi {
        let (Some(ef), Some(ef_next)) = (m.e_first(v), m.e_first(v + 1)) else { continue };
        if ef_next < ef + ff(v) - TOL {
            p5_ok = false;
            out.push(Verdict::fail(
                "prop5-min-duration",
                format!("view {v}: E_first(v+1)={ef_next} < E_first(v)+F(v)={}", ef + ff(v)),
            ));
        }
        if let Some(el) = m.e_last(v) {
            if ef_next - el < ff(v) - 2.0 * m.delta - TOL {
                overlap_ok = false;
                out.push(Verdict::fail(
                    "overlap",
                    format!("view {v}: E_first(v+1)-E_last(v)={} < F(v)-2 delta", ef_next - el),
                ));
            }
        }
        if let (Some(el), Some(el_next)) = (m.e_last(v), m.e_last(v + 1)) {
            if el_next > el + ff(v) + m.delta + TOL {
                pace_ok = false;
                out.push(Verdict::fail(
                    "propA-pacing",
                    format!("view {v}: E_last(v+1)={el_next} > E_last(v)+F(v)+delta={}", el + ff(v) + m.delta),
                ));
            }
        }
    }
    if p5_ok {
        out.push(Verdict::pass("prop5-min-duration", "E_first(v+1) >= E_first(v)+F(v)".into()));
    }
    if overlap_ok {
        out.push(Verdict::pass("overlap", "E_first(v+1)-E_last(v) >= F(v)-2 delta".into()));
    }
    if pace_ok {
        out.push(Verdict::pass("propA-pacing", "E_last(v+1) <= E_last(v)+F(v)+delta".into()));
    }

    // Property A, cumulative form: E_last(v) <= E_last(V) + sum of F(k)+delta.
    let mut cum_ok = true;
    if let Some(el_sync) = m.e_last(v_sync) {
        let mut bound = el_sync;
        for v in v_sync + 1..=v_hi {
            bound += ff(v - 1) + m.delta;
            if let Some(el) = m.e_last(v) {
                if el > bound + TOL {
                    cum_ok = false;
                    out.push(Verdict::fail(
                        "propA-cumulative",
                        format!("view {v}: E_last={el} exceeds cumulative bound {bound}"),
                    ));
                }
            }
        }
    }
    if cum_ok {
        out.push(Verdict::pass("propA-cumulative", "cumulative last-entry bound holds".into()));
    }

    // Property B: if every correct process starts at or after GST and
    // F(1) > 2 delta, then V = 1 and E_last(1) <= S_last + delta.
    match (m.s_first(), m.s_last()) {
        (Some(sf), Some(sl)) if sf >= m.gst && ff(1) > 2.0 * m.delta => {
            let ok = v_sync == 1 && m.e_last(1).is_some_and(|el| el <= sl + m.delta + TOL);
            out.push(Verdict::check(
                "propB-prompt-start",
                ok,
                format!("V={v_sync}, E_last(1)={:?}, S_last+delta={}", m.e_last(1), sl + m.delta),
            ));
        }
        _ => out.push(Verdict::vacuous("propB-prompt-start", "premise not met".into())),
    }

    // Property C: if F(GV(GST+rho)+1) > 2 delta and f+1 correct processes
    // started by GST+rho, then V = GV(GST+rho)+1 and
    // E_last(V) <= GST + rho + F(V-1) + 3 delta.
    let v_c = m.global_view_at(m.gst + m.rho) + 1;
    let premise =
        ff(v_c) > 2.0 * m.delta && m.start_kth(m.f + 1).is_some_and(|t| t <= m.gst + m.rho);
    if premise {
        if v_c > v_hi {
            out.push(Verdict::vacuous(
                "propC-gst-latency",
                format!("view {v_c} beyond the checkable horizon"),
            ));
        } else {
            // Synchronization holds from v_c on: entries at or after GST,
            // every correct process enters every view, and the first
            // post-GST view is entered promptly.
            let bound = m.gst + m.rho + ff(v_c - 1) + 3.0 * m.delta;
            let ok = m.e_first(v_c).is_some_and(|t| t >= m.gst - TOL)
                && (v_c..=v_hi).all(|u| m.e_last(u).is_some())
                && m.e_last(v_c).is_some_and(|el| el <= bound + TOL);
            out.push(Verdict::check(
                "propC-gst-latency",
                ok,
                format!("V_C={v_c}, E_last={:?}, bound={bound}", m.e_last(v_c)),
            ));
        }
    } else {
        out.push(Verdict::vacuous("propC-gst-latency", "premise not met".into()));
    }

    out
}

/// Consensus safety: agreement, validity, at most one value prepared or
/// locked per view among correct processes.
pub fn check_safety(m: &Metrics) -> Vec<Verdict> {
    let mut out = Vec::new();

    let values: BTreeSet<u64> = m.decisions.values().map(|d| d.value).collect();
    out.push(Verdict::check(
        "agreement",
        values.len() <= 1,
        format!("decided values: {values:?}"),
    ));

    let invalid: Vec<Pid> =
        m.decisions.iter().filter(|(_, d)| !d.valid).map(|(&p, _)| p).collect();
    out.push(Verdict::check(
        "validity",
        invalid.is_empty(),
        if invalid.is_empty() {
            "all decided values valid".into()
        } else {
            format!("invalid decisions at {invalid:?}")
        },
    ));

    let conflicting_prepared: Vec<View> = m
        .prepared_quorums
        .iter()
        .filter(|(_, hs)| hs.len() > 1)
        .map(|(&v, _)| v)
        .collect();
    out.push(Verdict::check(
        "prepared-uniqueness",
        conflicting_prepared.is_empty(),
        format!("views with conflicting prepared quorums: {conflicting_prepared:?}"),
    ));

    let conflicting_locked: Vec<View> =
        m.locked.iter().filter(|(_, hs)| hs.len() > 1).map(|(&v, _)| v).collect();
    out.push(Verdict::check(
        "lock-uniqueness",
        conflicting_locked.is_empty(),
        format!("views with conflicting locks: {conflicting_locked:?}"),
    ));

    out
}

pub fn check_all(trace: &Trace, build: &Build) -> (Metrics, Vec<Verdict>) {
    let m = Metrics::from_trace(trace, build);
    let mut verdicts = check_synchronizer(&m);
    if build.protocol != ProtocolKind::None {
        verdicts.extend(check_safety(&m));
    }
    (m, verdicts)
}

pub fn all_pass(verdicts: &[Verdict]) -> bool {
    verdicts.iter().all(|v| v.status != Status::Fail)
}
