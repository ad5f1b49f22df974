//! Message and value types shared by the synchronizer and the consensus
//! protocols. Signatures are simulated: the engine stamps every envelope
//! with the true sender, and embedded records attributed to correct
//! processes are audited against what those processes actually sent.

use serde::{Deserialize, Serialize};

use crate::{Pid, View};

/// An opaque consensus value. The `valid` flag stands in for the
/// application-specific `valid()` predicate; correct processes only
/// propose values with `valid = true`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Value {
    pub id: u64,
    pub valid: bool,
}

impl Value {
    pub fn new(id: u64) -> Self {
        Value { id, valid: true }
    }
}

/// Idealized collision-resistant hash: injective on simulated values.
pub type HashDigest = u64;

pub fn hash(v: Value) -> HashDigest {
    v.id
}

/// A prepared certificate: a quorum of `PREPARED(view, hash)` records.
/// Signer identities are engine-verified at collection time and audited
/// against the emission registry whenever a Byzantine process embeds one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cert {
    pub view: View,
    pub hash: HashDigest,
    pub signers: Vec<Pid>,
}

/// One `NEWLEADER` record as embedded in PBFT/SBFT `PROPOSE` messages.
/// `prev_view` is `prepared_view` for HotStuff and `locked_view` for
/// PBFT/SBFT; `pre_view`/`curr_val` are only meaningful for SBFT.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NewLeaderRecord {
    pub signer: Pid,
    pub view: View,
    pub prev_view: View,
    pub prev_val: Option<Value>,
    pub cert: Option<Cert>,
    pub pre_view: View,
    pub curr_val: Option<Value>,
}

/// Evidence the leader ships alongside a proposal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Justification {
    /// View 1, or a HotStuff proposal of the leader's own value.
    None,
    /// HotStuff: the prepared certificate backing the chosen value.
    Cert(Cert),
    /// PBFT/SBFT: the full `NEWLEADER` set, re-validated by receivers.
    NewLeaderSet(Vec<NewLeaderRecord>),
    /// Tendermint: the view in which the value was prepared.
    PreparedView(View),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConsensusMsg {
    NewLeader(NewLeaderRecord),
    Propose { view: View, value: Value, justif: Justification },
    Prepared { view: View, hash: HashDigest },
    Precommitted { view: View, hash: HashDigest },
    Committed { view: View, hash: HashDigest },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MsgKind {
    NewLeader,
    Propose,
    Prepared,
    Precommitted,
    Committed,
}

impl ConsensusMsg {
    pub fn kind(&self) -> MsgKind {
        match self {
            ConsensusMsg::NewLeader(_) => MsgKind::NewLeader,
            ConsensusMsg::Propose { .. } => MsgKind::Propose,
            ConsensusMsg::Prepared { .. } => MsgKind::Prepared,
            ConsensusMsg::Precommitted { .. } => MsgKind::Precommitted,
            ConsensusMsg::Committed { .. } => MsgKind::Committed,
        }
    }

    pub fn view(&self) -> View {
        match self {
            ConsensusMsg::NewLeader(r) => r.view,
            ConsensusMsg::Propose { view, .. }
            | ConsensusMsg::Prepared { view, .. }
            | ConsensusMsg::Precommitted { view, .. }
            | ConsensusMsg::Committed { view, .. } => *view,
        }
    }
}

/// What travels inside an envelope.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Payload {
    Wish { view: View },
    Consensus(ConsensusMsg),
}

impl Payload {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Payload::Wish { .. } => "wish",
            Payload::Consensus(m) => match m.kind() {
                MsgKind::NewLeader => "newleader",
                MsgKind::Propose => "propose",
                MsgKind::Prepared => "prepared",
                MsgKind::Precommitted => "precommitted",
                MsgKind::Committed => "committed",
            },
        }
    }

    pub fn view(&self) -> View {
        match self {
            Payload::Wish { view } => *view,
            Payload::Consensus(m) => m.view(),
        }
    }
}
