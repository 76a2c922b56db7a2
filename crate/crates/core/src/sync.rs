//! View synchronizer state machine.
//!
//! Each process keeps `views[j]`, the highest view it knows process `j`
//! wished for, merges incoming WISH arrays pointwise, and enters the highest
//! view that a strict majority of processes wish for. WISH arrays are
//! rebroadcast periodically so wishes survive message loss.

use serde::{Deserialize, Serialize};

use crate::topology::ProcessId;
use crate::View;

/// Snapshot of the sender's `views` array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WishMsg {
    pub views: Vec<View>,
}

/// Deliberate protocol mutations, used only to validate that the offline
/// checkers catch real bugs. All off in normal operation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SyncMutation {
    /// Skip the WISH broadcast that normally follows entering a view.
    pub suppress_entry_broadcast: bool,
    /// Enter on `⌊n/2⌋` wishes instead of a strict majority.
    pub weak_majority: bool,
}

/// Outputs of a synchronizer transition, in emission order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SyncOutput {
    /// The process entered a new view; notify upper layers before the
    /// broadcast below goes out.
    Entered(View),
    Broadcast(WishMsg),
}

#[derive(Debug, Clone)]
pub struct Synchronizer {
    me: ProcessId,
    pub curr_view: View,
    pub views: Vec<View>,
    mutation: SyncMutation,
}

impl Synchronizer {
    pub fn new(me: ProcessId, n: usize, mutation: SyncMutation) -> Self {
        Synchronizer {
            me,
            curr_view: 0,
            views: vec![0; n],
            mutation,
        }
    }

    /// Wish to move past the current view. Callers are expected to advance at
    /// most once per entered view; repeated calls are harmless (the wish is
    /// unchanged) and only rebroadcast it. A wish never decreases, so
    /// snapshots stay pointwise monotone.
    pub fn advance(&mut self) -> Vec<SyncOutput> {
        let i = self.me.index();
        self.views[i] = self.views[i].max(self.curr_view + 1);
        vec![SyncOutput::Broadcast(self.snapshot())]
    }

    /// Periodic WISH retransmission.
    pub fn snapshot(&self) -> WishMsg {
        WishMsg {
            views: self.views.clone(),
        }
    }

    /// Merge an incoming WISH and enter the majority view if it moved past
    /// the current one. Output order is enter notification first, then the
    /// follow-up broadcast.
    pub fn on_wish(&mut self, msg: &WishMsg) -> Vec<SyncOutput> {
        for (mine, theirs) in self.views.iter_mut().zip(&msg.views) {
            *mine = (*mine).max(*theirs);
        }
        let target = majority_view(&self.views, self.mutation.weak_majority);
        if target <= self.curr_view {
            return Vec::new();
        }
        self.curr_view = target;
        let mut out = vec![SyncOutput::Entered(target)];
        if !self.mutation.suppress_entry_broadcast {
            out.push(SyncOutput::Broadcast(self.snapshot()));
        }
        out
    }
}

/// Highest view wished for by a strict majority: the maximal `v` such that
/// some entry equals `v` and more than `n/2` entries are at least `v`.
/// Equivalently, the `⌊n/2⌋`-th entry (0-based) of the array sorted
/// descending.
pub fn majority_view(views: &[View], weak: bool) -> View {
    let mut sorted = views.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let idx = if weak {
        (views.len() / 2).saturating_sub(1)
    } else {
        views.len() / 2
    };
    sorted[idx]
}
