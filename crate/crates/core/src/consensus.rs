//! Single-decree consensus over the view synchronizer.
//!
//! Per view there is a fixed round-robin leader. Processes gossip three
//! arrays in one STATE message: M1B (per-process view entry reports), M2A
//! (leader proposals), M2B (acceptances). The "when" clauses of the protocol
//! are level-triggered; [`Consensus::run_rules`] re-evaluates them to a
//! fixpoint in a fixed order (decide, accept, propose) after every mutation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::topology::ProcessId;
use crate::{SimTime, View};

/// Operation kind for register-style workloads decided through consensus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Read,
    Write,
}

/// A client operation. Identity is the `(invoker, seq)` pair, so identical
/// writes by different clients stay distinguishable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpDesc {
    pub invoker: ProcessId,
    pub seq: u64,
    pub kind: OpKind,
    pub arg: Option<u64>,
}

/// Consensus value: a plain integer for direct workloads, or an operation
/// when consensus instances back a register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(u64),
    Op(OpDesc),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Before the first view entry.
    Idle,
    Entered,
    Proposed,
    Accepted,
    Decided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct M1bEntry {
    pub view: View,
    pub cview: View,
    pub val: Option<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct M2aEntry {
    pub view: View,
    pub val: Option<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct M2bEntry {
    pub view: View,
    pub val: Option<Value>,
}

/// Atomic snapshot of the three arrays, gossiped every `rho`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateMsg {
    pub v1b: Vec<M1bEntry>,
    pub v2a: Vec<M2aEntry>,
    pub v2b: Vec<M2bEntry>,
}

/// Round-robin leader of view `v` among `1..=n`.
pub fn leader(v: View, n: usize) -> ProcessId {
    assert!(v >= 1, "view 0 has no leader");
    ProcessId(((v - 1) % n as u64) as u32 + 1)
}

/// Side effects requested by a transition, in emission order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConsensusOutput {
    /// (Re)arm the decision timer with the given timeout.
    ArmTimer(SimTime),
    CancelTimer,
    /// Ask the synchronizer to advance past the current view.
    RequestAdvance,
    Decided(Value),
}

#[derive(Debug, Clone)]
pub struct Consensus {
    me: ProcessId,
    n: usize,
    pub view: View,
    pub phase: Phase,
    pub cview: View,
    pub val: Option<Value>,
    pub my_proposal: Option<Value>,
    pub timeout: SimTime,
    gamma: SimTime,
    pub m1b: Vec<M1bEntry>,
    pub m2a: Vec<M2aEntry>,
    pub m2b: Vec<M2bEntry>,
}

impl Consensus {
    pub fn new(me: ProcessId, n: usize, initial_timeout: SimTime, gamma: SimTime) -> Self {
        Consensus {
            me,
            n,
            view: 0,
            phase: Phase::Idle,
            cview: 0,
            val: None,
            my_proposal: None,
            timeout: initial_timeout,
            gamma,
            m1b: vec![
                M1bEntry {
                    view: 0,
                    cview: 0,
                    val: None
                };
                n
            ],
            m2a: vec![M2aEntry { view: 0, val: None }; n],
            m2b: vec![M2bEntry { view: 0, val: None }; n],
        }
    }

    pub fn decided(&self) -> bool {
        self.phase == Phase::Decided
    }

    /// The decided value while phase is Decided, None otherwise.
    pub fn decided_value(&self) -> Option<Value> {
        if self.decided() {
            self.val
        } else {
            None
        }
    }

    /// Submit the value this process wants decided. At most once per process.
    pub fn propose(&mut self, x: Value) -> Vec<ConsensusOutput> {
        assert!(self.my_proposal.is_none(), "propose invoked twice at {}", self.me);
        self.my_proposal = Some(x);
        let mut out = Vec::new();
        self.run_rules(&mut out);
        out
    }

    /// Entry notification from the synchronizer.
    pub fn on_new_view(&mut self, v: View) -> Vec<ConsensusOutput> {
        assert!(v > self.view, "view notifications must be monotone");
        self.view = v;
        let mut out = vec![ConsensusOutput::ArmTimer(self.timeout)];
        self.m1b[self.me.index()] = M1bEntry {
            view: self.view,
            cview: self.cview,
            val: self.val,
        };
        self.phase = Phase::Entered;
        self.run_rules(&mut out);
        out
    }

    /// Decision timer expiry: escalate the timeout and wish to move on.
    pub fn on_timer_expire(&mut self) -> Vec<ConsensusOutput> {
        self.timeout += self.gamma;
        vec![ConsensusOutput::RequestAdvance]
    }

    /// Fixed-width size of the message arrays, in bytes. Depends only on `n`,
    /// so it stays constant over a run.
    pub fn footprint_bytes(&self) -> usize {
        use std::mem::size_of;
        self.m1b.len() * size_of::<M1bEntry>()
            + self.m2a.len() * size_of::<M2aEntry>()
            + self.m2b.len() * size_of::<M2bEntry>()
    }

    /// Snapshot for the periodic STATE broadcast.
    pub fn state_snapshot(&self) -> StateMsg {
        StateMsg {
            v1b: self.m1b.clone(),
            v2a: self.m2a.clone(),
            v2b: self.m2b.clone(),
        }
    }

    /// Keep-highest-view merge, per slot, across the three arrays.
    pub fn on_state(&mut self, m: &StateMsg) -> Vec<ConsensusOutput> {
        debug_assert_eq!(m.v1b.len(), self.n);
        for j in 0..self.n {
            if m.v1b[j].view > self.m1b[j].view {
                self.m1b[j] = m.v1b[j];
            }
            if m.v2a[j].view > self.m2a[j].view {
                self.m2a[j] = m.v2a[j];
            }
            if m.v2b[j].view > self.m2b[j].view {
                self.m2b[j] = m.v2b[j];
            }
        }
        let mut out = Vec::new();
        self.run_rules(&mut out);
        out
    }

    /// Re-evaluate the guarded rules until none fires. Rule order is fixed
    /// (decide, accept, propose); each firing strictly advances `phase`, so
    /// the loop terminates after at most three firings.
    fn run_rules(&mut self, out: &mut Vec<ConsensusOutput>) {
        loop {
            if self.try_decide(out) {
                continue;
            }
            if self.try_accept() {
                continue;
            }
            if self.try_propose() {
                continue;
            }
            break;
        }
    }

    /// A strict majority of M2B entries agree on `(v, x)` with `v` at least
    /// the current view.
    fn try_decide(&mut self, out: &mut Vec<ConsensusOutput>) -> bool {
        if self.phase == Phase::Decided {
            return false;
        }
        let mut groups: BTreeMap<(View, Value), usize> = BTreeMap::new();
        for e in &self.m2b {
            if e.view >= self.view {
                if let Some(x) = e.val {
                    *groups.entry((e.view, x)).or_insert(0) += 1;
                }
            }
        }
        let Some(((_, x), _)) = groups
            .into_iter()
            .find(|&(_, count)| crate::is_majority(count, self.n))
        else {
            return false;
        };
        self.val = Some(x);
        out.push(ConsensusOutput::CancelTimer);
        self.phase = Phase::Decided;
        out.push(ConsensusOutput::Decided(x));
        true
    }

    /// Adopt the current leader's proposal for this view.
    fn try_accept(&mut self) -> bool {
        if !matches!(self.phase, Phase::Entered | Phase::Proposed) {
            return false;
        }
        let l = leader(self.view, self.n);
        let e = self.m2a[l.index()];
        if e.view != self.view {
            return false;
        }
        self.cview = e.view;
        self.val = e.val;
        self.m2b[self.me.index()] = M2bEntry {
            view: self.cview,
            val: self.val,
        };
        self.phase = Phase::Accepted;
        true
    }

    /// Leader rule: with an M1B quorum at the current view, propose either
    /// the accepted value with maximal cview or, if the quorum is clean, the
    /// leader's own pending proposal. A leader with nothing to propose skips
    /// its turn without a state change.
    fn try_propose(&mut self) -> bool {
        if self.phase != Phase::Entered {
            return false;
        }
        if leader(self.view, self.n) != self.me {
            return false;
        }
        let quorum: Vec<&M1bEntry> = self.m1b.iter().filter(|e| e.view == self.view).collect();
        if !crate::is_majority(quorum.len(), self.n) {
            return false;
        }
        let chosen = if quorum.iter().all(|e| e.val.is_none()) {
            match self.my_proposal {
                Some(x) => x,
                None => return false,
            }
        } else {
            let max_cview = quorum.iter().map(|e| e.cview).max().unwrap();
            let pick = quorum
                .iter()
                .find(|e| e.val.is_some() && e.cview == max_cview)
                .expect("an entry with maximal cview always carries a value");
            pick.val.unwrap()
        };
        self.m2a[self.me.index()] = M2aEntry {
            view: self.view,
            val: Some(chosen),
        };
        self.phase = Phase::Proposed;
        true
    }
}
