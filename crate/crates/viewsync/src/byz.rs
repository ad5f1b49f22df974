//! Byzantine behaviors, expressed as filters over the actions a node
//! would take if it were correct. A Byzantine node runs the ordinary
//! protocol logic internally; its behavior rewrites what actually leaves
//! the node. Sender identity is unforgeable (the engine stamps it), and
//! embedded records attributed to correct processes are audited by the
//! engine, so behaviors here can only lie about the node's own state.

use serde::{Deserialize, Serialize};

use crate::msg::{ConsensusMsg, Payload, Value};
use crate::sim::{Action, Target};
use crate::{Pid, Time};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Behavior {
    /// Never sends anything.
    Silent,
    /// Behaves correctly until `t`, then goes silent.
    CrashAt { t: Time },
    /// Sends its WISHes only to the favored subset, splitting the correct
    /// processes' views of its `max_views` entry.
    WishEquivocator { favored: Vec<Pid> },
    /// As leader, proposes one value to the first half of the processes
    /// and a different one to the rest.
    ConflictingProposer,
    /// As leader, keeps the justification it gathered but swaps in a value
    /// the justification does not cover.
    StaleCertProposer,
    /// Proposes a value failing the application `valid()` predicate. The
    /// substitution happens at construction time (the node's own value is
    /// born invalid); at runtime the node otherwise follows the protocol.
    InvalidValueProposer,
}

impl Behavior {
    /// Rewrites the actions a node is about to take at time `now`.
    pub fn filter(&self, n: usize, now: Time, actions: Vec<Action>) -> Vec<Action> {
        match self {
            Behavior::Silent => actions.into_iter().filter(|a| !is_send(a)).collect(),
            Behavior::CrashAt { t } => {
                if now >= *t {
                    Vec::new()
                } else {
                    actions
                }
            }
            Behavior::WishEquivocator { favored } => actions
                .into_iter()
                .flat_map(|a| match a {
                    Action::Send { to: Target::All, payload: p @ Payload::Wish { .. } } => favored
                        .iter()
                        .map(|&j| Action::Send { to: Target::One(j), payload: p.clone() })
                        .collect(),
                    other => vec![other],
                })
                .collect(),
            Behavior::ConflictingProposer => actions
                .into_iter()
                .flat_map(|a| match a {
                    Action::Send {
                        to: Target::All,
                        payload: Payload::Consensus(ConsensusMsg::Propose { view, value, justif }),
                    } => {
                        let alt = conflicting(value);
                        (1..=n)
                            .map(|j| {
                                let v = if j <= n / 2 { value } else { alt };
                                Action::Send {
                                    to: Target::One(j),
                                    payload: Payload::Consensus(ConsensusMsg::Propose {
                                        view,
                                        value: v,
                                        justif: justif.clone(),
                                    }),
                                }
                            })
                            .collect()
                    }
                    Action::Rbc { msg: ConsensusMsg::Propose { view, value, justif } } => {
                        // Under reliable broadcast equivocation means two
                        // competing broadcasts; safety must survive both.
                        vec![
                            Action::Rbc {
                                msg: ConsensusMsg::Propose { view, value, justif: justif.clone() },
                            },
                            Action::Rbc {
                                msg: ConsensusMsg::Propose { view, value: conflicting(value), justif },
                            },
                        ]
                    }
                    other => vec![other],
                })
                .collect(),
            Behavior::StaleCertProposer => actions
                .into_iter()
                .map(|a| match a {
                    Action::Send {
                        to,
                        payload: Payload::Consensus(ConsensusMsg::Propose { view, value, justif }),
                    } => Action::Send {
                        to,
                        payload: Payload::Consensus(ConsensusMsg::Propose {
                            view,
                            value: conflicting(value),
                            justif,
                        }),
                    },
                    Action::Rbc { msg: ConsensusMsg::Propose { view, value, justif } } => {
                        Action::Rbc {
                            msg: ConsensusMsg::Propose { view, value: conflicting(value), justif },
                        }
                    }
                    other => other,
                })
                .collect(),
            Behavior::InvalidValueProposer => actions,
        }
    }
}

fn is_send(a: &Action) -> bool {
    matches!(a, Action::Send { .. } | Action::Rbc { .. })
}

fn conflicting(v: Value) -> Value {
    Value { id: v.id + 1000, valid: v.valid }
}
