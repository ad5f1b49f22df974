//! PBFT-style single-shot consensus. Two voting rounds; replicas lock on a
//! PREPARED quorum. Instead of justifying proposals against local locks,
//! the leader embeds the full set of NEWLEADER records it acted on, and
//! every receiver recomputes the leader's choice from that set.

use crate::msg::{hash, ConsensusMsg, Justification, MsgKind, NewLeaderRecord, Payload, Value};
use crate::sim::{Action, Target};
use crate::trace::TraceKind;
use crate::View;

use super::{select_highest, valid_newleader, valid_newleaders, Core, Phase};

fn send_all(msg: ConsensusMsg) -> Action {
    Action::Send { to: Target::All, payload: Payload::Consensus(msg) }
}

/// Receiver-side proposal check: the embedded record set must itself be a
/// quorum of valid NEWLEADERs for this view, and the proposed value must
/// match what the selection rule yields on that set. When every record is
/// unlocked the leader was free to pick its own value, so any valid value
/// passes.
fn pbft_safe_proposal(core: &Core, v: View, value: Value, justif: &Justification) -> bool {
    if !value.valid {
        return false;
    }
    if v == 1 {
        return true;
    }
    let Justification::NewLeaderSet(records) = justif else {
        return false;
    };
    let mut signers: Vec<_> = records.iter().map(|r| r.signer).collect();
    signers.sort_unstable();
    signers.dedup();
    if signers.len() != records.len() || records.len() < 2 * core.f + 1 {
        return false;
    }
    if !records.iter().all(|r| valid_newleader(r, v, core.n, core.f)) {
        return false;
    }
    match records.iter().filter(|r| r.prev_view != 0).max_by_key(|r| r.prev_view) {
        Some(best) => best.prev_val == Some(value),
        None => true,
    }
}

#[derive(Debug, Clone)]
pub struct Pbft {
    pub core: Core,
}

impl Pbft {
    pub fn new(core: Core) -> Self {
        Pbft { core }
    }

    fn newleader_record(&self, v: View) -> NewLeaderRecord {
        NewLeaderRecord {
            signer: self.core.pid,
            view: v,
            prev_view: self.core.locked_view,
            prev_val: self.core.locked_val,
            cert: self.core.cert.clone(),
            pre_view: 0,
            curr_val: None,
        }
    }

    pub fn on_new_view(&mut self, v: View) -> Vec<Action> {
        self.core.curr_view = v;
        self.core.voted = false;
        self.core.curr_val = None;
        let mut actions = Vec::new();
        if v == 1 {
            if self.core.is_leader() && self.core.fire_once(Phase::LeaderPropose) {
                actions.push(Action::Note(TraceKind::Proposed {
                    view: 1,
                    value: self.core.myval.id,
                    valid: self.core.myval.valid,
                }));
                actions.push(send_all(ConsensusMsg::Propose {
                    view: 1,
                    value: self.core.myval,
                    justif: Justification::None,
                }));
            }
        } else {
            actions.push(Action::Send {
                to: Target::One(self.core.leader_of(v)),
                payload: Payload::Consensus(ConsensusMsg::NewLeader(self.newleader_record(v))),
            });
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
                let (value, _) = select_highest(&records, core.myval);
                actions.push(Action::Note(TraceKind::Proposed {
                    view: v,
                    value: value.id,
                    valid: value.valid,
                }));
                actions.push(send_all(ConsensusMsg::Propose {
                    view: v,
                    value,
                    justif: Justification::NewLeaderSet(records),
                }));
            }
        }

        if !core.voted {
            let lead = core.leader_of(v);
            if let Some(ConsensusMsg::Propose { view, value, justif }) =
                core.mailbox.get(MsgKind::Propose, lead).cloned()
            {
                if view == v && pbft_safe_proposal(core, v, value, &justif) {
                    core.voted = true;
                    core.curr_val = Some(value);
                    actions.push(Action::Note(TraceKind::Voted { view: v, hash: hash(value) }));
                    actions.push(send_all(ConsensusMsg::Prepared { view: v, hash: hash(value) }));
                }
            }
        }

        if let Some(x) = core.curr_val {
            let h = hash(x);
            if core.prepared_senders(v, h).len() >= 2 * core.f + 1
                && core.fire_once(Phase::PreparedQuorum)
            {
                core.prepared_val = Some(x);
                core.prepared_view = v;
                core.locked_view = v;
                core.locked_val = Some(x);
                core.cert = Some(core.collect_cert(v, h));
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
