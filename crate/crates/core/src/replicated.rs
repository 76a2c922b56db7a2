//! Register built from a log of consensus instances.
//!
//! Processes agree on a sequence of operations, one consensus instance per
//! slot. A process proposes its pending operation in the slot it currently
//! sits at; when that slot decides someone else's operation it applies the
//! decision and re-proposes in the next slot. Decisions are applied in slot
//! order, so every process walks the same operation log. The result is a
//! safe register: reads return the last write decided before them.

use std::collections::BTreeMap;

use crate::consensus::{Consensus, ConsensusOutput, OpDesc, OpKind, StateMsg, Value};
use crate::topology::ProcessId;
use crate::{SimTime, View};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplicatedOutput {
    /// (Re)arm the shared decision timer for the active slot.
    ArmTimer(SimTime),
    CancelTimer,
    /// Ask the synchronizer to move to the next view.
    RequestAdvance,
    /// A proposal was submitted to a slot's consensus instance.
    Propose { slot: u64, value: Value },
    /// A slot's instance reported a decision at this process.
    Decide { slot: u64, view: View, value: Value },
    /// The pending operation completed. Reads carry the register value.
    Respond { op: OpDesc, value: Option<u64> },
    /// The slot cap was hit with an operation still pending.
    SlotsExhausted,
}

#[derive(Debug, Clone)]
pub struct Replicated {
    me: ProcessId,
    n: usize,
    max_slots: u64,
    initial_timeout: SimTime,
    gamma: SimTime,
    curr_view: View,
    /// Next undecided slot at this process.
    pub idx: u64,
    /// Register contents after applying the log up to idx.
    pub val: Option<u64>,
    pending: Option<OpDesc>,
    slots: Vec<Consensus>,
    /// Decisions reported for slots ahead of idx, held until their turn.
    buffered: BTreeMap<u64, (View, Value)>,
    /// Applied decisions, position = slot.
    log: Vec<(View, Value)>,
    exhausted: bool,
}

impl Replicated {
    pub fn new(
        me: ProcessId,
        n: usize,
        max_slots: u64,
        initial_timeout: SimTime,
        gamma: SimTime,
    ) -> Self {
        assert!(max_slots >= 1);
        Replicated {
            me,
            n,
            max_slots,
            initial_timeout,
            gamma,
            curr_view: 0,
            idx: 0,
            val: None,
            pending: None,
            slots: Vec::new(),
            buffered: BTreeMap::new(),
            log: Vec::new(),
            exhausted: false,
        }
    }

    pub fn pending(&self) -> Option<OpDesc> {
        self.pending
    }

    /// Applied prefix of the operation log, position = slot.
    pub fn log(&self) -> &[(View, Value)] {
        &self.log
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// Starts an operation. The caller must wait for the matching Respond
    /// before invoking again.
    pub fn invoke(&mut self, op: OpDesc) -> Vec<ReplicatedOutput> {
        assert!(self.pending.is_none(), "operation already pending");
        assert_eq!(op.invoker, self.me);
        self.pending = Some(op);
        let mut out = Vec::new();
        self.propose_pending(&mut out);
        out
    }

    pub fn on_new_view(&mut self, v: View) -> Vec<ReplicatedOutput> {
        assert!(v > self.curr_view);
        self.curr_view = v;
        let mut out = Vec::new();
        for slot in 0..self.slots.len() {
            let res = self.slots[slot].on_new_view(v);
            self.absorb(slot as u64, res, &mut out);
        }
        out
    }

    pub fn on_timer_expire(&mut self) -> Vec<ReplicatedOutput> {
        let slot = self.idx;
        let mut out = Vec::new();
        if (slot as usize) < self.slots.len() {
            let res = self.slots[slot as usize].on_timer_expire();
            self.absorb(slot, res, &mut out);
        }
        out
    }

    pub fn on_state(&mut self, slot: u64, m: &StateMsg) -> Vec<ReplicatedOutput> {
        let mut out = Vec::new();
        if slot >= self.max_slots {
            return out;
        }
        self.ensure_slot(slot, &mut out);
        let res = self.slots[slot as usize].on_state(m);
        self.absorb(slot, res, &mut out);
        out
    }

    /// Bytes across all constructed slots plus the decided log. Grows with
    /// the slot count, which the cap bounds.
    pub fn footprint_bytes(&self) -> usize {
        use std::mem::size_of;
        self.slots.iter().map(|c| c.footprint_bytes()).sum::<usize>()
            + self.log.len() * size_of::<(View, Value)>()
            + self.buffered.len() * size_of::<(u64, (View, Value))>()
    }

    /// One snapshot per constructed slot, for the periodic broadcast.
    pub fn state_snapshots(&self) -> Vec<(u64, StateMsg)> {
        self.slots
            .iter()
            .enumerate()
            .map(|(i, c)| (i as u64, c.state_snapshot()))
            .collect()
    }

    fn ensure_slot(&mut self, slot: u64, out: &mut Vec<ReplicatedOutput>) {
        while (self.slots.len() as u64) <= slot {
            let mut c = Consensus::new(self.me, self.n, self.initial_timeout, self.gamma);
            let s = self.slots.len() as u64;
            if self.curr_view >= 1 {
                let res = c.on_new_view(self.curr_view);
                self.slots.push(c);
                self.absorb(s, res, out);
            } else {
                self.slots.push(c);
            }
        }
    }

    fn propose_pending(&mut self, out: &mut Vec<ReplicatedOutput>) {
        let op = match self.pending {
            Some(op) => op,
            None => return,
        };
        if self.idx >= self.max_slots {
            if !self.exhausted {
                self.exhausted = true;
                out.push(ReplicatedOutput::SlotsExhausted);
            }
            return;
        }
        let slot = self.idx;
        self.ensure_slot(slot, out);
        out.push(ReplicatedOutput::Propose {
            slot,
            value: Value::Op(op),
        });
        let res = self.slots[slot as usize].propose(Value::Op(op));
        self.absorb(slot, res, out);
    }

    /// Routes one slot's consensus outputs. Timer requests are honored only
    /// for the active slot; decisions are buffered and applied in order.
    fn absorb(&mut self, slot: u64, res: Vec<ConsensusOutput>, out: &mut Vec<ReplicatedOutput>) {
        for o in res {
            match o {
                ConsensusOutput::ArmTimer(d) => {
                    if slot == self.idx {
                        out.push(ReplicatedOutput::ArmTimer(d));
                    }
                }
                ConsensusOutput::CancelTimer => {
                    if slot == self.idx {
                        out.push(ReplicatedOutput::CancelTimer);
                    }
                }
                ConsensusOutput::RequestAdvance => {
                    if slot == self.idx {
                        out.push(ReplicatedOutput::RequestAdvance);
                    }
                }
                ConsensusOutput::Decided(x) => {
                    let view = self.slots[slot as usize].view;
                    out.push(ReplicatedOutput::Decide {
                        slot,
                        view,
                        value: x.clone(),
                    });
                    if slot >= self.idx {
                        self.buffered.entry(slot).or_insert((view, x));
                    }
                }
            }
        }
        self.drain(out);
    }

    fn drain(&mut self, out: &mut Vec<ReplicatedOutput>) {
        while let Some((view, value)) = self.buffered.remove(&self.idx) {
            self.log.push((view, value.clone()));
            self.idx += 1;
            if let Value::Op(desc) = value {
                if desc.kind == OpKind::Write {
                    self.val = desc.arg;
                }
                if let Some(p) = self.pending {
                    if desc == p {
                        let ret = match p.kind {
                            OpKind::Read => self.val,
                            OpKind::Write => None,
                        };
                        out.push(ReplicatedOutput::Respond { op: p, value: ret });
                        self.pending = None;
                    }
                }
            }
            // The next slot owns the shared timer now. Its instance may
            // already be running from gossip; rearm on its behalf.
            if self.pending.is_some() || self.idx < self.max_slots {
                let next = self.idx as usize;
                if next < self.slots.len()
                    && self.slots[next].view >= 1
                    && !self.slots[next].decided()
                {
                    out.push(ReplicatedOutput::ArmTimer(self.slots[next].timeout));
                }
            }
            if self.pending.is_some() {
                self.propose_pending(out);
            }
        }
    }
}
