//! SBFT-style single-shot consensus with a fast path.
//!
//! Replicas vote PREPARED on the leader's proposal; a vote from *all* n
//! replicas decides immediately (fast path), while a 2f+1 quorum falls back
//! to the usual lock-then-commit slow path. Because a fast decision leaves
//! no certificate behind, NEWLEADER records carry both the lock state and
//! the last vote (`pre_view`, `curr_val`), and new leaders reconcile the
//! two candidate kinds.

use crate::msg::{hash, ConsensusMsg, Justification, MsgKind, NewLeaderRecord, Payload, Value};
use crate::sim::{Action, Target, TimerId};
use crate::timefn::TimeoutFn;
use crate::trace::TraceKind;
use crate::View;

use super::{valid_newleader_sbft, valid_newleaders, Core, Phase, TimerMirror};

fn send_all(msg: ConsensusMsg) -> Action {
    Action::Send { to: Target::All, payload: Payload::Consensus(msg) }
}

/// What the selection rule yields on a NEWLEADER record set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    /// A locked value that must be re-proposed.
    Slow(Value),
    /// A value that may have been fast-decided and must be re-proposed.
    Fast(Value),
    /// No constraint; the leader proposes its own value.
    Free,
}

/// Slow candidate: the value locked in the highest nonzero view, if any.
pub fn slow_candidate(records: &[NewLeaderRecord]) -> (Option<Value>, View) {
    match records.iter().filter(|r| r.prev_view != 0).max_by_key(|r| r.prev_view) {
        Some(r) => (r.prev_val, r.prev_view),
        None => (None, 0),
    }
}

/// Fast candidate: for each value x voted for by at least f+1 records, the
/// best provable vote view is the (f+1)-th largest `pre_view` among its
/// supporters (any f+1 of them must intersect every fast quorum). The
/// candidate is the x maximizing that view; a tie between distinct values
/// at the maximum clears the candidate.
pub fn fast_candidate(records: &[NewLeaderRecord], f: usize) -> (Option<Value>, View) {
    let mut per_value: Vec<(Value, View)> = Vec::new();
    let mut values: Vec<Value> = records.iter().filter_map(|r| r.curr_val).collect();
    values.sort_by_key(|v| v.id);
    values.dedup();
    for x in values {
        let mut pvs: Vec<View> = records
            .iter()
            .filter(|r| r.curr_val == Some(x))
            .map(|r| r.pre_view)
            .collect();
        if pvs.len() < f + 1 {
            continue;
        }
        pvs.sort_unstable_by(|a, b| b.cmp(a));
        per_value.push((x, pvs[f]));
    }
    let v_fast = per_value.iter().map(|&(_, v)| v).max().unwrap_or(0);
    if v_fast == 0 {
        return (None, 0);
    }
    let winners: Vec<Value> =
        per_value.iter().filter(|&&(_, v)| v == v_fast).map(|&(x, _)| x).collect();
    if winners.len() == 1 {
        (Some(winners[0]), v_fast)
    } else {
        (None, 0)
    }
}

pub fn select(records: &[NewLeaderRecord], f: usize) -> Selection {
    let (x_slow, v_slow) = slow_candidate(records);
    let (x_fast, v_fast) = fast_candidate(records, f);
    if v_slow > 0 && v_slow >= v_fast {
        Selection::Slow(x_slow.expect("nonzero v_slow carries a value"))
    } else if v_fast > v_slow {
        Selection::Fast(x_fast.expect("nonzero v_fast carries a value"))
    } else {
        Selection::Free
    }
}

fn sbft_safe_proposal(core: &Core, v: View, value: Value, justif: &Justification) -> bool {
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
    if !records.iter().all(|r| valid_newleader_sbft(r, v, core.n, core.f)) {
        return false;
    }
    match select(records, core.f) {
        Selection::Slow(x) | Selection::Fast(x) => x == value,
        Selection::Free => true,
    }
}

#[derive(Debug, Clone)]
pub struct Sbft {
    pub core: Core,
    /// Fast-path grace timer F_f; a replica holding a slow quorum waits it
    /// out before committing, giving the fast path time to complete.
    pub f_f: TimeoutFn,
    /// The no-timer variant runs the slow path concurrently with the fast
    /// path instead of waiting.
    pub no_timer: bool,
    timer: TimerMirror,
}

impl Sbft {
    pub fn new(core: Core, f_f: TimeoutFn, no_timer: bool) -> Self {
        Sbft { core, f_f, no_timer, timer: TimerMirror::default() }
    }

    fn newleader_record(&self, v: View) -> NewLeaderRecord {
        NewLeaderRecord {
            signer: self.core.pid,
            view: v,
            prev_view: self.core.locked_view,
            prev_val: self.core.locked_val,
            cert: self.core.cert.clone(),
            pre_view: self.core.pre_view,
            curr_val: self.core.curr_val,
        }
    }

    pub fn on_new_view(&mut self, v: View) -> Vec<Action> {
        let mut actions = Vec::new();
        if self.timer.armed_in(self.core.curr_view) {
            actions.push(Action::StopTimer { id: TimerId::FastPath });
            self.timer.expired_for = None;
            self.timer.armed_for = None;
        }
        // (pre_view, curr_val) is the last vote and persists across views
        // until the next vote overwrites it; a fast decision in an old view
        // is only recoverable through these pairs.
        let record = self.newleader_record(v);
        self.core.curr_view = v;
        self.core.voted = false;
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
                payload: Payload::Consensus(ConsensusMsg::NewLeader(record)),
            });
        }
        actions.extend(self.poll());
        actions
    }

    pub fn on_fastpath_timer(&mut self) -> Vec<Action> {
        self.timer.expire();
        self.poll()
    }

    pub fn poll(&mut self) -> Vec<Action> {
        let mut actions = Vec::new();
        let v = self.core.curr_view;
        if v == 0 {
            return actions;
        }

        if self.core.is_leader() && v > 1 {
            let records = valid_newleaders(&self.core, v, valid_newleader_sbft);
            if records.len() >= 2 * self.core.f + 1 && self.core.fire_once(Phase::LeaderPropose) {
                let value = match select(&records, self.core.f) {
                    Selection::Slow(x) | Selection::Fast(x) => x,
                    Selection::Free => self.core.myval,
                };
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

        if !self.core.voted {
            let lead = self.core.leader_of(v);
            if let Some(ConsensusMsg::Propose { view, value, justif }) =
                self.core.mailbox.get(MsgKind::Propose, lead).cloned()
            {
                if view == v && sbft_safe_proposal(&self.core, v, value, &justif) {
                    self.core.voted = true;
                    self.core.curr_val = Some(value);
                    self.core.pre_view = v;
                    actions.push(Action::Note(TraceKind::Voted { view: v, hash: hash(value) }));
                    if !self.no_timer {
                        self.timer.arm(v);
                        actions.push(Action::StartTimer {
                            id: TimerId::FastPath,
                            local_dur: self.f_f.eval(v),
                        });
                    }
                    actions.push(send_all(ConsensusMsg::Prepared { view: v, hash: hash(value) }));
                }
            }
        }

        if let (true, Some(x)) = (self.core.voted, self.core.curr_val) {
            let h = hash(x);
            let prepared = self.core.prepared_senders(v, h);
            if prepared.len() == self.core.n && self.core.fire_once(Phase::FastDecide) {
                actions.extend(self.core.decide(x, "fast"));
                return actions;
            }
            let slow_open = self.no_timer || self.timer.expired_in(v);
            if slow_open
                && prepared.len() >= 2 * self.core.f + 1
                && self.core.fire_once(Phase::PreparedQuorum)
            {
                self.core.prepared_val = Some(x);
                self.core.prepared_view = v;
                self.core.locked_view = v;
                self.core.locked_val = Some(x);
                self.core.cert = Some(self.core.collect_cert(v, h));
                actions.push(Action::Note(TraceKind::PreparedQuorum { view: v, hash: h }));
                actions.push(Action::Note(TraceKind::Locked { view: v, hash: h }));
                actions.push(send_all(ConsensusMsg::Committed { view: v, hash: h }));
            }
            if self.core.locked_view == v
                && self.core.committed_senders(v, h).len() >= 2 * self.core.f + 1
                && self.core.fire_once(Phase::CommitQuorum)
            {
                actions.extend(self.core.decide(x, "slow"));
            }
        }
        actions
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msg::Cert;
    use crate::Pid;

    fn core(pid: Pid) -> Core {
        Core::new(pid, 4, 1, Value::new(100 + pid as u64))
    }

    fn rec(signer: Pid, v: View, lock: View, lock_val: u64, pre: View, cur: Option<u64>) -> NewLeaderRecord {
        NewLeaderRecord {
            signer,
            view: v,
            prev_view: lock,
            prev_val: (lock != 0).then(|| Value::new(lock_val)),
            cert: (lock != 0)
                .then(|| Cert { view: lock, hash: lock_val, signers: vec![1, 2, 3] }),
            pre_view: pre,
            curr_val: cur.map(Value::new),
        }
    }

    #[test]
    fn fast_candidate_needs_f_plus_1_supporters() {
        let rs = vec![rec(1, 2, 0, 0, 1, Some(9)), rec(2, 2, 0, 0, 0, None), rec(3, 2, 0, 0, 0, None)];
        assert_eq!(fast_candidate(&rs, 1), (None, 0));
        let rs = vec![rec(1, 2, 0, 0, 1, Some(9)), rec(2, 2, 0, 0, 1, Some(9)), rec(3, 2, 0, 0, 0, None)];
        assert_eq!(fast_candidate(&rs, 1), (Some(Value::new(9)), 1));
    }

    #[test]
    fn fast_candidate_takes_second_largest_pre_view() {
        // Supporters voted in views 3 and 1: only view 1 is provable.
        let rs = vec![rec(1, 4, 0, 0, 3, Some(9)), rec(2, 4, 0, 0, 1, Some(9)), rec(3, 4, 0, 0, 0, None)];
        assert_eq!(fast_candidate(&rs, 1), (Some(Value::new(9)), 1));
    }

    #[test]
    fn fast_tie_clears_candidate() {
        let rs = vec![
            rec(1, 4, 0, 0, 2, Some(8)),
            rec(2, 4, 0, 0, 2, Some(8)),
            rec(3, 4, 0, 0, 2, Some(9)),
            rec(4, 4, 0, 0, 2, Some(9)),
        ];
        assert_eq!(fast_candidate(&rs, 1), (None, 0));
        assert_eq!(select(&rs, 1), Selection::Free);
    }

    #[test]
    fn slow_beats_equal_fast_and_loses_to_higher_fast() {
        let rs = vec![rec(1, 4, 2, 7, 2, Some(7)), rec(2, 4, 0, 0, 2, Some(9)), rec(3, 4, 0, 0, 2, Some(9))];
        // v_slow = 2, v_fast = 2: slow wins ties.
        assert_eq!(select(&rs, 1), Selection::Slow(Value::new(7)));
        let rs = vec![rec(1, 4, 2, 7, 2, Some(7)), rec(2, 4, 0, 0, 3, Some(9)), rec(3, 4, 0, 0, 3, Some(9))];
        assert_eq!(select(&rs, 1), Selection::Fast(Value::new(9)));
    }

    #[test]
    fn fast_decides_on_all_n() {
        let mut r = Sbft::new(core(2), TimeoutFn::Constant { c: 30.0 }, false);
        r.on_new_view(1);
        let v = Value::new(101);
        r.core.mailbox.insert(
            1,
            ConsensusMsg::Propose { view: 1, value: v, justif: Justification::None },
        );
        r.poll();
        assert_eq!(r.core.pre_view, 1);
        for p in [1, 2, 3] {
            r.core.mailbox.insert(p, ConsensusMsg::Prepared { view: 1, hash: hash(v) });
        }
        // 3 of 4: no fast decision, and the timer has not expired.
        assert!(r.poll().is_empty());
        assert!(r.core.decided.is_none());
        r.core.mailbox.insert(4, ConsensusMsg::Prepared { view: 1, hash: hash(v) });
        let acts = r.poll();
        assert!(acts.iter().any(
            |a| matches!(a, Action::Note(TraceKind::Decided { path, .. }) if path == "fast")
        ));
    }

    #[test]
    fn slow_path_waits_for_timer() {
        let mut r = Sbft::new(core(2), TimeoutFn::Constant { c: 30.0 }, false);
        r.on_new_view(1);
        let v = Value::new(101);
        r.core.mailbox.insert(
            1,
            ConsensusMsg::Propose { view: 1, value: v, justif: Justification::None },
        );
        r.poll();
        for p in [1, 2, 3] {
            r.core.mailbox.insert(p, ConsensusMsg::Prepared { view: 1, hash: hash(v) });
        }
        assert!(r.poll().is_empty());
        let acts = r.on_fastpath_timer();
        assert_eq!(r.core.locked_view, 1);
        assert!(acts.iter().any(|a| matches!(
            a,
            Action::Send { payload: Payload::Consensus(ConsensusMsg::Committed { .. }), .. }
        )));
    }

    #[test]
    fn no_timer_variant_commits_immediately() {
        let mut r = Sbft::new(core(2), TimeoutFn::Constant { c: 30.0 }, true);
        r.on_new_view(1);
        let v = Value::new(101);
        r.core.mailbox.insert(
            1,
            ConsensusMsg::Propose { view: 1, value: v, justif: Justification::None },
        );
        r.poll();
        for p in [1, 2, 3] {
            r.core.mailbox.insert(p, ConsensusMsg::Prepared { view: 1, hash: hash(v) });
        }
        r.poll();
        assert_eq!(r.core.locked_view, 1);
        for p in [1, 2, 3] {
            r.core.mailbox.insert(p, ConsensusMsg::Committed { view: 1, hash: hash(v) });
        }
        r.poll();
        assert!(matches!(r.core.decided, Some((1, x)) if x == v));
    }
}
