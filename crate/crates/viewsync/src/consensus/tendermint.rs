//! Tendermint-style single-shot consensus over Θ-reliable broadcast.
//!
//! There is no NEWLEADER round: the leader proposes immediately on entering
//! its view, carrying its own prepared value, and receivers judge proposals
//! against their lock using locally gathered PREPARED evidence. Locking is
//! only allowed while the per-view lock timer is running, which bounds how
//! stale a lock another replica may hold.

use crate::msg::{hash, ConsensusMsg, Justification, MsgKind, Value};
use crate::sim::{Action, TimerId};
use crate::timefn::TimeoutFn;
use crate::trace::TraceKind;
use crate::View;

use super::{Core, Phase, TimerMirror};

fn rbc(msg: ConsensusMsg) -> Action {
    Action::Rbc { msg }
}

#[derive(Debug, Clone)]
pub struct Tm {
    pub core: Core,
    /// Lock-window timer F_l, armed on view entry.
    pub f_l: TimeoutFn,
    timer: TimerMirror,
}

impl Tm {
    pub fn new(core: Core, f_l: TimeoutFn) -> Self {
        Tm { core, f_l, timer: TimerMirror::default() }
    }

    /// PREPARED evidence in the mailbox: does some view v' in
    /// (locked_view, v) hold a quorum for hash `h`? The mailbox keeps one
    /// PREPARED per sender (highest view), which suffices: evidence only
    /// needs to cover views later than the lock it overrides.
    fn prepared_evidence(&self, v: View, h: u64) -> bool {
        let mut counts: std::collections::BTreeMap<View, usize> = Default::default();
        for sender in 1..=self.core.n {
            if let Some(ConsensusMsg::Prepared { view, hash: mh }) =
                self.core.mailbox.get(MsgKind::Prepared, sender)
            {
                if *mh == h && *view > self.core.locked_view && *view < v {
                    *counts.entry(*view).or_default() += 1;
                }
            }
        }
        counts.values().any(|&c| c >= 2 * self.core.f + 1)
    }

    fn safe_proposal(&self, v: View, value: Value) -> bool {
        value.valid
            && (self.core.locked_view == 0
                || Some(value) == self.core.locked_val
                || self.prepared_evidence(v, hash(value)))
    }

    pub fn on_new_view(&mut self, v: View) -> Vec<Action> {
        self.core.curr_view = v;
        self.core.voted = false;
        self.core.curr_val = None;
        let mut actions = Vec::new();
        if self.timer.armed_for.is_some() {
            actions.push(Action::StopTimer { id: TimerId::Lock });
        }
        self.timer.arm(v);
        actions.push(Action::StartTimer { id: TimerId::Lock, local_dur: self.f_l.eval(v) });
        if self.core.is_leader() && self.core.fire_once(Phase::LeaderPropose) {
            let (value, pv) = match self.core.prepared_val {
                Some(x) => (x, self.core.prepared_view),
                None => (self.core.myval, 0),
            };
            actions.push(Action::Note(TraceKind::Proposed {
                view: v,
                value: value.id,
                valid: value.valid,
            }));
            actions.push(rbc(ConsensusMsg::Propose {
                view: v,
                value,
                justif: Justification::PreparedView(pv),
            }));
        }
        actions.extend(self.poll());
        actions
    }

    pub fn on_lock_timer(&mut self) -> Vec<Action> {
        self.timer.expire();
        // Expiry closes the lock window; nothing becomes enabled by it.
        Vec::new()
    }

    pub fn poll(&mut self) -> Vec<Action> {
        let mut actions = Vec::new();
        let v = self.core.curr_view;
        if v == 0 {
            return actions;
        }

        if !self.core.voted {
            let lead = self.core.leader_of(v);
            if let Some(ConsensusMsg::Propose { view, value, .. }) =
                self.core.mailbox.get(MsgKind::Propose, lead).cloned()
            {
                if view == v && self.safe_proposal(v, value) {
                    self.core.voted = true;
                    self.core.curr_val = Some(value);
                    actions.push(Action::Note(TraceKind::Voted { view: v, hash: hash(value) }));
                    actions.push(rbc(ConsensusMsg::Prepared { view: v, hash: hash(value) }));
                }
            }
        }

        if let Some(x) = self.core.curr_val {
            let h = hash(x);
            if self.core.prepared_senders(v, h).len() >= 2 * self.core.f + 1
                && self.core.fire_once(Phase::PreparedQuorum)
            {
                self.core.prepared_val = Some(x);
                self.core.prepared_view = v;
                actions.push(Action::Note(TraceKind::PreparedQuorum { view: v, hash: h }));
                if self.timer.armed_in(v) {
                    self.core.locked_view = v;
                    self.core.locked_val = Some(x);
                    actions.push(Action::Note(TraceKind::Locked { view: v, hash: h }));
                    actions.push(rbc(ConsensusMsg::Committed { view: v, hash: h }));
                }
            }
            if self.core.committed_senders(v, h).len() >= 2 * self.core.f + 1
                && self.core.fire_once(Phase::CommitQuorum)
            {
                actions.extend(self.core.decide(x, "commit"));
            }
        }
        actions
    }
}
