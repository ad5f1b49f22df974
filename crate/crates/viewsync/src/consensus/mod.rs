//! Shared consensus infrastructure: leader rotation, quorums, prepared
//! certificates, the bounded per-(type, sender) mailbox, and the replica
//! state common to all five protocols.

pub mod hotstuff;
pub mod pbft;
pub mod sbft;
pub mod tendermint;

use std::collections::{BTreeMap, BTreeSet};

use crate::msg::{hash, Cert, ConsensusMsg, MsgKind, NewLeaderRecord, Value};
use crate::sim::{Action, TimerId};
use crate::trace::TraceKind;
use crate::{Pid, View};

/// Round-robin leader: `leader(v) = p_((v-1) mod n)+1`. Rejects `v = 0`.
pub fn leader(v: View, n: usize) -> Pid {
    assert!(v >= 1, "view 0 has no leader");
    ((v - 1) as usize % n) + 1
}

pub fn quorum_size(f: usize) -> usize {
    2 * f + 1
}

pub fn is_quorum(members: &BTreeSet<Pid>, f: usize) -> bool {
    members.len() >= quorum_size(f)
}

/// `prepared(C, v, h)`: a well-formed certificate is a quorum of distinct
/// signers over exactly `(v, h)`. Adding a conflicting record can only
/// invalidate, never validate.
pub fn check_prepared(cert: &Cert, v: View, h: u64, n: usize, f: usize) -> bool {
    let signers: BTreeSet<Pid> = cert.signers.iter().copied().collect();
    cert.view == v
        && cert.hash == h
        && signers.len() == cert.signers.len()
        && signers.len() >= quorum_size(f)
        && signers.iter().all(|&p| p >= 1 && p <= n)
}

/// Bounded message store: at most one message per (type, sender), keeping
/// the one with the highest view.
#[derive(Debug, Clone, Default)]
pub struct Mailbox {
    slots: BTreeMap<(MsgKind, Pid), ConsensusMsg>,
}

impl Mailbox {
    /// Inserts `msg`; returns whether it was stored. A message replaces
    /// the stored one only if its view is strictly higher.
    pub fn insert(&mut self, sender: Pid, msg: ConsensusMsg) -> bool {
        let key = (msg.kind(), sender);
        match self.slots.get(&key) {
            Some(old) if old.view() >= msg.view() => false,
            _ => {
                self.slots.insert(key, msg);
                true
            }
        }
    }

    pub fn get(&self, kind: MsgKind, sender: Pid) -> Option<&ConsensusMsg> {
        self.slots.get(&(kind, sender))
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Senders whose stored message of `kind` satisfies `pred`, ascending.
    pub fn senders_where<F: Fn(&ConsensusMsg) -> bool>(&self, kind: MsgKind, pred: F) -> Vec<Pid> {
        self.slots
            .iter()
            .filter(|((k, _), m)| *k == kind && pred(m))
            .map(|((_, p), _)| *p)
            .collect()
    }
}

/// Handler phases tracked by the fired-set: each level-triggered quorum
/// handler fires at most once per (view, phase).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    LeaderPropose,
    PreparedQuorum,
    PrecommitQuorum,
    CommitQuorum,
    FastDecide,
}

/// Replica state common to all protocols. Individual protocols ignore the
/// fields they do not use; views are initially 0 and values unset.
#[derive(Debug, Clone)]
pub struct Core {
    pub pid: Pid,
    pub n: usize,
    pub f: usize,
    pub curr_view: View,
    pub voted: bool,
    pub curr_val: Option<Value>,
    pub prepared_val: Option<Value>,
    pub prepared_view: View,
    pub locked_view: View,
    pub locked_val: Option<Value>,
    pub pre_view: View,
    pub cert: Option<Cert>,
    pub decided: Option<(View, Value)>,
    pub mailbox: Mailbox,
    pub myval: Value,
    fired: BTreeSet<(View, Phase)>,
    // High-water marks for the monotonicity instrumentation.
    prev_views: (View, View, View, View),
}

impl Core {
    pub fn new(pid: Pid, n: usize, f: usize, myval: Value) -> Self {
        Core {
            pid,
            n,
            f,
            curr_view: 0,
            voted: false,
            curr_val: None,
            prepared_val: None,
            prepared_view: 0,
            locked_view: 0,
            locked_val: None,
            pre_view: 0,
            cert: None,
            decided: None,
            mailbox: Mailbox::default(),
            myval,
            fired: BTreeSet::new(),
            prev_views: (0, 0, 0, 0),
        }
    }

    pub fn leader_of(&self, v: View) -> Pid {
        leader(v, self.n)
    }

    pub fn is_leader(&self) -> bool {
        self.curr_view >= 1 && self.leader_of(self.curr_view) == self.pid
    }

    pub fn fire_once(&mut self, phase: Phase) -> bool {
        self.fired.insert((self.curr_view, phase))
    }

    /// Senders with a stored `PREPARED(v, h)`.
    pub fn prepared_senders(&self, v: View, h: u64) -> Vec<Pid> {
        self.mailbox.senders_where(MsgKind::Prepared, |m| {
            matches!(m, ConsensusMsg::Prepared { view, hash } if *view == v && *hash == h)
        })
    }

    pub fn committed_senders(&self, v: View, h: u64) -> Vec<Pid> {
        self.mailbox.senders_where(MsgKind::Committed, |m| {
            matches!(m, ConsensusMsg::Committed { view, hash } if *view == v && *hash == h)
        })
    }

    pub fn precommitted_senders(&self, v: View, h: u64) -> Vec<Pid> {
        self.mailbox.senders_where(MsgKind::Precommitted, |m| {
            matches!(m, ConsensusMsg::Precommitted { view, hash } if *view == v && *hash == h)
        })
    }

    /// Builds the prepared certificate from the mailbox slots matching
    /// `(v, h)`; deterministic (signers ascending).
    pub fn collect_cert(&self, v: View, h: u64) -> Cert {
        Cert { view: v, hash: h, signers: self.prepared_senders(v, h) }
    }

    pub fn decide(&mut self, value: Value, path: &str) -> Vec<Action> {
        self.decided = Some((self.curr_view, value));
        vec![Action::Note(TraceKind::Decided {
            view: self.curr_view,
            value: value.id,
            valid: value.valid,
            path: path.to_string(),
        })]
    }

    /// Ordering and monotonicity instrumentation, checked by the engine
    /// after every handler: locked ≤ prepared ≤ curr (and pre_view for
    /// SBFT sits between locked and curr), all non-decreasing.
    pub fn check_invariants(&mut self) -> Result<(), String> {
        if !(self.locked_view <= self.curr_view
            && self.prepared_view <= self.curr_view
            && self.locked_view <= self.prepared_view.max(self.pre_view).max(self.locked_view))
        {
            return Err(format!(
                "p{}: view ordering violated: locked={} prepared={} pre={} curr={}",
                self.pid, self.locked_view, self.prepared_view, self.pre_view, self.curr_view
            ));
        }
        let now = (self.locked_view, self.prepared_view, self.pre_view, self.curr_view);
        let prev = self.prev_views;
        if now.0 < prev.0 || now.1 < prev.1 || now.2 < prev.2 || now.3 < prev.3 {
            return Err(format!(
                "p{}: view variable decreased: {:?} -> {:?}",
                self.pid, prev, now
            ));
        }
        self.prev_views = now;
        Ok(())
    }
}

/// `ValidNewLeader` for HotStuff/PBFT: `prev_view < v` and, when nonzero,
/// the embedded certificate prepares the embedded value at `prev_view`.
pub fn valid_newleader(r: &NewLeaderRecord, v: View, n: usize, f: usize) -> bool {
    if r.view != v || r.prev_view >= v {
        return false;
    }
    if r.prev_view == 0 {
        return true;
    }
    match (&r.prev_val, &r.cert) {
        (Some(val), Some(cert)) => check_prepared(cert, r.prev_view, hash(*val), n, f),
        _ => false,
    }
}

/// SBFT additionally requires `prev_view <= pre_view < v`.
pub fn valid_newleader_sbft(r: &NewLeaderRecord, v: View, n: usize, f: usize) -> bool {
    valid_newleader(r, v, n, f) && r.prev_view <= r.pre_view && r.pre_view < v
}

/// All valid `NEWLEADER` records for view `v` currently in the mailbox.
pub fn valid_newleaders(
    core: &Core,
    v: View,
    validator: fn(&NewLeaderRecord, View, usize, usize) -> bool,
) -> Vec<NewLeaderRecord> {
    let mut out = Vec::new();
    for sender in 1..=core.n {
        if let Some(ConsensusMsg::NewLeader(r)) = core.mailbox.get(MsgKind::NewLeader, sender) {
            if r.signer == sender && validator(r, v, core.n, core.f) {
                out.push(r.clone());
            }
        }
    }
    out
}

/// HotStuff/PBFT proposal selection: the value prepared (PBFT: locked) in
/// the highest nonzero view among the records, or the leader's own value.
pub fn select_highest(records: &[NewLeaderRecord], myval: Value) -> (Value, Option<Cert>) {
    let best = records.iter().filter(|r| r.prev_view != 0).max_by_key(|r| r.prev_view);
    match best {
        Some(r) => (r.prev_val.expect("nonzero prev_view carries a value"), r.cert.clone()),
        None => (myval, None),
    }
}

/// Timer bookkeeping protocols keep in lieu of querying the engine: the
/// replica started the timer itself, so mirroring expiry events is exact.
#[derive(Debug, Clone, Copy, Default)]
pub struct TimerMirror {
    pub armed_for: Option<View>,
    pub expired_for: Option<View>,
}

impl TimerMirror {
    pub fn arm(&mut self, v: View) {
        self.armed_for = Some(v);
        self.expired_for = None;
    }

    pub fn expire(&mut self) {
        self.expired_for = self.armed_for.take();
    }

    pub fn expired_in(&self, v: View) -> bool {
        self.expired_for == Some(v)
    }

    pub fn armed_in(&self, v: View) -> bool {
        self.armed_for == Some(v)
    }
}

/// A replica running one of the five protocol variants.
#[derive(Debug, Clone)]
pub enum Replica {
    Hs3(hotstuff::Hs3),
    Hs2(hotstuff::Hs2),
    Pbft(pbft::Pbft),
    Sbft(sbft::Sbft),
    Tm(tendermint::Tm),
}

impl Replica {
    pub fn core(&self) -> &Core {
        match self {
            Replica::Hs3(r) => &r.core,
            Replica::Hs2(r) => &r.core,
            Replica::Pbft(r) => &r.core,
            Replica::Sbft(r) => &r.core,
            Replica::Tm(r) => &r.core,
        }
    }

    pub fn core_mut(&mut self) -> &mut Core {
        match self {
            Replica::Hs3(r) => &mut r.core,
            Replica::Hs2(r) => &mut r.core,
            Replica::Pbft(r) => &mut r.core,
            Replica::Sbft(r) => &mut r.core,
            Replica::Tm(r) => &mut r.core,
        }
    }

    pub fn on_new_view(&mut self, v: View) -> Vec<Action> {
        match self {
            Replica::Hs3(r) => r.on_new_view(v),
            Replica::Hs2(r) => r.on_new_view(v),
            Replica::Pbft(r) => r.on_new_view(v),
            Replica::Sbft(r) => r.on_new_view(v),
            Replica::Tm(r) => r.on_new_view(v),
        }
    }

    pub fn on_deliver(&mut self, sender: Pid, msg: ConsensusMsg) -> Vec<Action> {
        if self.core().decided.is_some() {
            return Vec::new();
        }
        self.core_mut().mailbox.insert(sender, msg);
        self.poll()
    }

    pub fn on_timer(&mut self, id: TimerId) -> Vec<Action> {
        if self.core().decided.is_some() {
            return Vec::new();
        }
        match (self, id) {
            (Replica::Hs2(r), TimerId::NewLeader) => r.on_newleader_timer(),
            (Replica::Sbft(r), TimerId::FastPath) => r.on_fastpath_timer(),
            (Replica::Tm(r), TimerId::Lock) => r.on_lock_timer(),
            _ => Vec::new(),
        }
    }

    pub fn poll(&mut self) -> Vec<Action> {
        if self.core().decided.is_some() {
            return Vec::new();
        }
        match self {
            Replica::Hs3(r) => r.poll(),
            Replica::Hs2(r) => r.poll(),
            Replica::Pbft(r) => r.poll(),
            Replica::Sbft(r) => r.poll(),
            Replica::Tm(r) => r.poll(),
        }
    }
}
