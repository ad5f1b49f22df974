//! Three-phase and two-phase HotStuff-style single-shot consensus.
//!
//! Three-phase: PROPOSE -> PREPARED -> PRECOMMITTED -> COMMITTED. Voting on
//! a proposal requires SafeProposal; locking happens on a PRECOMMITTED
//! quorum; deciding on a COMMITTED quorum in the locked view.
//!
//! Two-phase drops the precommit round: a PREPARED quorum both prepares and
//! locks, and the leader waits out a dedicated proposal timer before
//! choosing a value, so that it is guaranteed to hear from every correct
//! replica that prepared earlier.

use crate::msg::{hash, Cert, ConsensusMsg, Justification, MsgKind, NewLeaderRecord, Payload, Value};
use crate::sim::{Action, Target, TimerId};
use crate::timefn::TimeoutFn;
use crate::trace::TraceKind;
use crate::{Pid, View};

use super::{check_prepared, select_highest, valid_newleader, valid_newleaders, Core, Phase, TimerMirror};

fn newleader_record(core: &Core, v: View) -> NewLeaderRecord {
    NewLeaderRecord {
        signer: core.pid,
        view: v,
        prev_view: core.prepared_view,
        prev_val: core.prepared_val,
        cert: core.cert.clone(),
        pre_view: 0,
        curr_val: None,
    }
}

fn send_all(msg: ConsensusMsg) -> Action {
    Action::Send { to: Target::All, payload: Payload::Consensus(msg) }
}

fn send_one(to: Pid, msg: ConsensusMsg) -> Action {
    Action::Send { to: Target::One(to), payload: Payload::Consensus(msg) }
}

/// SafeProposal shared by both HotStuff variants: the value is valid and
/// either nothing is locked, the proposal re-proposes the locked value, or
/// the justification proves a preparation after the lock.
fn hs_safe_proposal(core: &Core, value: Value, justif: &Justification) -> bool {
    if !value.valid {
        return false;
    }
    if core.locked_view == 0 || Some(value) == core.locked_val {
        return true;
    }
    match justif {
        Justification::Cert(c) => {
            core.curr_view > c.view
                && c.view > core.locked_view
                && check_prepared(c, c.view, hash(value), core.n, core.f)
        }
        _ => false,
    }
}

/// Vote step shared by both variants: on the leader's safe proposal for
/// the current view, adopt the value and broadcast PREPARED.
fn try_vote(core: &mut Core, actions: &mut Vec<Action>) {
    if core.voted || core.curr_view == 0 {
        return;
    }
    let lead = core.leader_of(core.curr_view);
    let Some(ConsensusMsg::Propose { view, value, justif }) =
        core.mailbox.get(MsgKind::Propose, lead).cloned()
    else {
        return;
    };
    if view != core.curr_view || !hs_safe_proposal(core, value, &justif) {
        return;
    }
    core.voted = true;
    core.curr_val = Some(value);
    actions.push(Action::Note(TraceKind::Voted { view, hash: hash(value) }));
    actions.push(send_all(ConsensusMsg::Prepared { view, hash: hash(value) }));
}

fn propose_actions(core: &Core, value: Value, justif: Justification) -> Vec<Action> {
    vec![
        Action::Note(TraceKind::Proposed {
            view: core.curr_view,
            value: value.id,
            valid: value.valid,
        }),
        send_all(ConsensusMsg::Propose { view: core.curr_view, value, justif }),
    ]
}

fn justif_for(cert: Option<Cert>) -> Justification {
    match cert {
        Some(c) => Justification::Cert(c),
        None => Justification::None,
    }
}

#[derive(Debug, Clone)]
pub struct Hs3 {
    pub core: Core,
}

impl Hs3 {
    pub fn new(core: Core) -> Self {
        Hs3 { core }
    }

    pub fn on_new_view(&mut self, v: View) -> Vec<Action> {
        self.core.curr_view = v;
        self.core.voted = false;
        self.core.curr_val = None;
        let mut actions = Vec::new();
        if v == 1 {
            // First view: everyone already knows leader(1) proposes its own
            // value, so the NEWLEADER round is skipped.
            if self.core.is_leader() && self.core.fire_once(Phase::LeaderPropose) {
                actions.extend(propose_actions(&self.core, self.core.myval, Justification::None));
            }
        } else {
            actions.push(send_one(
                self.core.leader_of(v),
                ConsensusMsg::NewLeader(newleader_record(&self.core, v)),
            ));
        }
        actions.extend(self.poll());
        actions
    }

    pub fn poll(&mut self) -> Vec<Action> {
        let mut actions = Vec::new();
        let core = &mut self.core;
        let v = core.curr_view;
        if v == 0 {
            return actions;
        }

        if core.is_leader() && v > 1 {
            let records = valid_newleaders(core, v, valid_newleader);
            if records.len() >= 2 * core.f + 1 && core.fire_once(Phase::LeaderPropose) {
                let (value, cert) = select_highest(&records, core.myval);
                actions.extend(propose_actions(core, value, justif_for(cert)));
            }
        }

        try_vote(core, &mut actions);

        if let Some(x) = core.curr_val {
            let h = hash(x);
            if core.prepared_senders(v, h).len() >= 2 * core.f + 1
                && core.fire_once(Phase::PreparedQuorum)
            {
                core.prepared_val = Some(x);
                core.prepared_view = v;
                core.cert = Some(core.collect_cert(v, h));
                actions.push(Action::Note(TraceKind::PreparedQuorum { view: v, hash: h }));
                actions.push(send_all(ConsensusMsg::Precommitted { view: v, hash: h }));
            }
            if core.prepared_view == v
                && core.precommitted_senders(v, h).len() >= 2 * core.f + 1
                && core.fire_once(Phase::PrecommitQuorum)
            {
                core.locked_view = v;
                core.locked_val = Some(x);
                actions.push(Action::Note(TraceKind::Locked { view: v, hash: h }));
                actions.push(send_all(ConsensusMsg::Committed { view: v, hash: h }));
            }
            if core.locked_view == v
                && core.committed_senders(v, h).len() >= 2 * core.f + 1
                && core.fire_once(Phase::CommitQuorum)
            {
                actions.extend(core.decide(x, "commit"));
            }
        }
        actions
    }
}

#[derive(Debug, Clone)]
pub struct Hs2 {
    pub core: Core,
    /// Leader-side proposal timer F_p; the leader only proposes once it
    /// has expired, so every correct replica's NEWLEADER has arrived.
    pub f_p: TimeoutFn,
    timer: TimerMirror,
}

impl Hs2 {
    pub fn new(core: Core, f_p: TimeoutFn) -> Self {
        Hs2 { core, f_p, timer: TimerMirror::default() }
    }

    pub fn on_new_view(&mut self, v: View) -> Vec<Action> {
        self.core.curr_view = v;
        self.core.voted = false;
        self.core.curr_val = None;
        let mut actions = Vec::new();
        if v == 1 {
            if self.core.is_leader() && self.core.fire_once(Phase::LeaderPropose) {
                actions.extend(propose_actions(&self.core, self.core.myval, Justification::None));
            }
        } else {
            actions.push(send_one(
                self.core.leader_of(v),
                ConsensusMsg::NewLeader(newleader_record(&self.core, v)),
            ));
            if self.core.leader_of(v) == self.core.pid {
                self.timer.arm(v);
                actions.push(Action::StartTimer {
                    id: TimerId::NewLeader,
                    local_dur: self.f_p.eval(v),
                });
            }
        }
        actions.extend(self.poll());
        actions
    }

    pub fn on_newleader_timer(&mut self) -> Vec<Action> {
        self.timer.expire();
        self.poll()
    }

    pub fn poll(&mut self) -> Vec<Action> {
        let mut actions = Vec::new();
        let core = &mut self.core;
        let v = core.curr_view;
        if v == 0 {
            return actions;
        }

        if core.is_leader() && v > 1 && self.timer.expired_in(v) {
            let records = valid_newleaders(core, v, valid_newleader);
            if records.len() >= 2 * core.f + 1 && core.fire_once(Phase::LeaderPropose) {
                let (value, cert) = select_highest(&records, core.myval);
                actions.extend(propose_actions(core, value, justif_for(cert)));
            }
        }

        try_vote(core, &mut actions);

        if let Some(x) = core.curr_val {
            let h = hash(x);
            if core.prepared_senders(v, h).len() >= 2 * core.f + 1
                && core.fire_once(Phase::PreparedQuorum)
            {
                // Two-phase: preparing is locking.
                core.prepared_val = Some(x);
                core.prepared_view = v;
                core.cert = Some(core.collect_cert(v, h));
                core.locked_view = v;
                core.locked_val = Some(x);
                actions.push(Action::Note(TraceKind::PreparedQuorum { view: v, hash: h }));
                actions.push(Action::Note(TraceKind::Locked { view: v, hash: h }));
                actions.push(send_all(ConsensusMsg::Committed { view: v, hash: h }));
            }
            if core.locked_view == v
                && core.committed_senders(v, h).len() >= 2 * core.f + 1
                && core.fire_once(Phase::CommitQuorum)
            {
                actions.extend(core.decide(x, "commit"));
            }
        }
        actions
    }
}
