//! Deterministic discrete-event simulator for view synchronization and
//! single-shot Byzantine consensus, plus an offline trace checker.
//!
//! The simulator runs `n = 3f+1` processes under a scriptable adversary
//! (message loss and arbitrary delays before GST, clock drift, Byzantine
//! behaviors) and records everything that happens in a totally ordered
//! trace. The checker consumes traces and verifies synchronization
//! properties, consensus safety invariants and latency deadlines.

pub mod byz;
pub mod checker;
pub mod clock;
pub mod consensus;
pub mod msg;
pub mod net;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod sync;
pub mod timefn;
pub mod trace;

/// Process identifier, 1-based like `p_1 .. p_n`.
pub type Pid = usize;
/// View number; 0 denotes "no view".
pub type View = u64;
/// Simulated real time.
pub type Time = f64;
