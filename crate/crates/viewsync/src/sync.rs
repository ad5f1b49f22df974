//! The FastSync view synchronizer: WISH exchange over the bounded
//! `max_views` array, derived `view`/`view⁺`, view entry, view timer and
//! periodic retransmission. State is O(n) regardless of run length.

use crate::msg::Payload;
use crate::sim::{Action, Target, TimerId};
use crate::timefn::TimeoutFn;
use crate::{Pid, View};

#[derive(Debug, Clone)]
pub struct SyncState {
    pub pid: Pid,
    pub n: usize,
    pub f: usize,
    pub max_views: Vec<View>,
    pub view: View,
    pub view_plus: View,
    pub started: bool,
    pub last_entered: View,
    timeout: TimeoutFn,
}

/// `view` (threshold `2f+1`) and `view⁺` (threshold `f+1`) derived from a
/// `max_views` array: the maximal `v` present in the array such that at
/// least the threshold of entries are `>= v`; 0 if only `v = 0` qualifies.
pub fn derive_views(max_views: &[View], f: usize) -> (View, View) {
    let pick = |threshold: usize| -> View {
        max_views
            .iter()
            .copied()
            .filter(|&v| v > 0)
            .filter(|&v| max_views.iter().filter(|&&m| m >= v).count() >= threshold)
            .max()
            .unwrap_or(0)
    };
    (pick(2 * f + 1), pick(f + 1))
}

impl SyncState {
    pub fn new(pid: Pid, n: usize, f: usize, timeout: TimeoutFn) -> Self {
        SyncState {
            pid,
            n,
            f,
            max_views: vec![0; n],
            view: 0,
            view_plus: 0,
            started: false,
            last_entered: 0,
            timeout,
        }
    }

    fn wish_all(&self, v: View) -> Action {
        Action::Send { to: Target::All, payload: Payload::Wish { view: v } }
    }

    pub fn start(&mut self) -> Vec<Action> {
        if self.started {
            return Vec::new();
        }
        self.started = true;
        if self.view_plus == 0 {
            vec![self.wish_all(1)]
        } else {
            Vec::new()
        }
    }

    /// WISH receipt. Returns the view entered (if any) and the outgoing
    /// actions, in handler order: timer reset precedes the relay send.
    pub fn handle_wish(&mut self, sender: Pid, v: View) -> (Option<View>, Vec<Action>) {
        debug_assert!(v >= 1);
        let (prev_v, prev_v_plus) = (self.view, self.view_plus);
        if v > self.max_views[sender - 1] {
            self.max_views[sender - 1] = v;
        }
        let (view, view_plus) = derive_views(&self.max_views, self.f);
        self.view = view;
        self.view_plus = view_plus;

        let mut entered = None;
        let mut actions = Vec::new();
        if self.view_plus == self.view && self.view > prev_v {
            actions.push(Action::StopTimer { id: TimerId::View });
            actions.push(Action::StartTimer {
                id: TimerId::View,
                local_dur: self.timeout.eval(self.view),
            });
            self.last_entered = self.view;
            entered = Some(self.view);
        }
        if self.view_plus > prev_v_plus {
            actions.push(self.wish_all(self.view_plus));
        }
        (entered, actions)
    }

    /// `timer_view` expiry: announce the intention to move on.
    pub fn handle_timer_expiry(&mut self) -> Vec<Action> {
        vec![self.wish_all((self.view + 1).max(self.view_plus))]
    }

    /// Retransmission every ρ local-time units.
    pub fn handle_periodic(&mut self, timer_view_armed: bool) -> Vec<Action> {
        if timer_view_armed {
            vec![self.wish_all(self.view_plus)]
        } else if self.max_views[self.pid - 1] > 0 {
            vec![self.wish_all((self.view + 1).max(self.view_plus))]
        } else {
            Vec::new()
        }
    }
}
