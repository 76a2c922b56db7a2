//! Process shell: wires a synchronizer and an application state machine
//! into the actions the simulator understands.
//!
//! The node owns protocol state and emits actions; the simulator owns time,
//! the network, timers, and the workload schedule. Trace records for
//! protocol-level events (view entries, proposals, decisions, operation
//! boundaries) are produced here; transport records are produced by the
//! simulator.

use crate::consensus::{Consensus, ConsensusOutput, OpDesc, OpKind, Value};
use crate::register::{Register, RegisterOutput};
use crate::replicated::{Replicated, ReplicatedOutput};
use crate::sync::{SyncMutation, SyncOutput, Synchronizer};
use crate::topology::ProcessId;
use crate::trace::{EventBody, Payload};
use crate::{SimTime, View};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeAction {
    /// Send a message to every process, self included.
    Broadcast(Payload),
    /// (Re)arm the view timer for `duration` local ticks.
    ArmTimer { duration: SimTime, view: Option<View> },
    CancelTimer,
    /// Protocol-level trace event at this process.
    Record(EventBody),
}

#[derive(Debug, Clone)]
enum App {
    Consensus {
        sync: Synchronizer,
        cons: Consensus,
    },
    Register {
        reg: Register,
        current_op: Option<(u64, OpKind)>,
    },
    Replicated {
        sync: Synchronizer,
        rep: Replicated,
    },
}

#[derive(Debug, Clone)]
pub struct Node {
    pub me: ProcessId,
    app: App,
    exhausted: bool,
}

impl Node {
    pub fn new_consensus(
        me: ProcessId,
        n: usize,
        initial_timeout: SimTime,
        gamma: SimTime,
        mutation: SyncMutation,
    ) -> Self {
        Node {
            me,
            app: App::Consensus {
                sync: Synchronizer::new(me, n, mutation),
                cons: Consensus::new(me, n, initial_timeout, gamma),
            },
            exhausted: false,
        }
    }

    pub fn new_register(me: ProcessId, n: usize) -> Self {
        Node {
            me,
            app: App::Register {
                reg: Register::new(me, n),
                current_op: None,
            },
            exhausted: false,
        }
    }

    pub fn new_replicated(
        me: ProcessId,
        n: usize,
        max_slots: u64,
        initial_timeout: SimTime,
        gamma: SimTime,
        mutation: SyncMutation,
    ) -> Self {
        Node {
            me,
            app: App::Replicated {
                sync: Synchronizer::new(me, n, mutation),
                rep: Replicated::new(me, n, max_slots, initial_timeout, gamma),
            },
            exhausted: false,
        }
    }

    /// View-based apps ask to leave view 0 immediately on startup.
    pub fn startup(&mut self) -> Vec<NodeAction> {
        match &self.app {
            App::Consensus { .. } | App::Replicated { .. } => self.advance_now(),
            App::Register { .. } => Vec::new(),
        }
    }

    /// An advance() call outside any protocol rule. Used by the spam attack.
    pub fn force_advance(&mut self) -> Vec<NodeAction> {
        match &self.app {
            App::Register { .. } => Vec::new(),
            _ => self.advance_now(),
        }
    }

    /// Consensus workload: submit this process's proposal.
    pub fn propose(&mut self, value: u64) -> Vec<NodeAction> {
        let App::Consensus { cons, .. } = &mut self.app else {
            panic!("propose on a non-consensus node");
        };
        let value = Value::Int(value);
        let mut out = vec![NodeAction::Record(EventBody::Propose {
            slot: 0,
            value: value.clone(),
        })];
        let res = cons.propose(value);
        self.map_consensus(res, &mut out);
        out
    }

    /// Register and replicated workloads: start one operation. `seq`
    /// numbers this process's operations from 1.
    pub fn invoke_op(&mut self, seq: u64, kind: OpKind, arg: Option<u64>) -> Vec<NodeAction> {
        let mut out = vec![NodeAction::Record(EventBody::Invoke { op: seq, kind, arg })];
        match &mut self.app {
            App::Register { reg, current_op } => {
                assert!(current_op.is_none(), "operation already running");
                *current_op = Some((seq, kind));
                let res = match kind {
                    OpKind::Read => reg.read(),
                    OpKind::Write => reg.write(arg.expect("write needs an arg")),
                };
                self.map_register(res, &mut out);
            }
            App::Replicated { .. } => {
                let desc = OpDesc {
                    invoker: self.me,
                    seq,
                    kind,
                    arg,
                };
                let App::Replicated { rep, .. } = &mut self.app else {
                    unreachable!();
                };
                let res = rep.invoke(desc);
                self.map_replicated(res, &mut out);
            }
            App::Consensus { .. } => panic!("invoke_op on a consensus node"),
        }
        out
    }

    /// True while an operation is outstanding at this process.
    pub fn op_pending(&self) -> bool {
        match &self.app {
            App::Register { current_op, .. } => current_op.is_some(),
            App::Replicated { rep, .. } => rep.pending().is_some(),
            App::Consensus { .. } => false,
        }
    }

    /// Consensus decision at this process, if reached.
    pub fn decided_value(&self) -> Option<Value> {
        match &self.app {
            App::Consensus { cons, .. } => cons.decided_value(),
            _ => None,
        }
    }

    /// The replicated app hit its slot cap with an operation pending.
    pub fn slots_exhausted(&self) -> bool {
        self.exhausted
    }

    /// Bytes of protocol state held right now. Constant over a run for the
    /// consensus and register apps; bounded by the slot cap for replicated.
    pub fn footprint_bytes(&self) -> usize {
        use std::mem::size_of;
        match &self.app {
            App::Consensus { sync, cons } => {
                sync.views.len() * size_of::<View>() + cons.footprint_bytes()
            }
            App::Register { reg, .. } => reg.footprint_bytes(),
            App::Replicated { sync, rep } => {
                sync.views.len() * size_of::<View>() + rep.footprint_bytes()
            }
        }
    }

    pub fn on_payload(&mut self, payload: &Payload) -> Vec<NodeAction> {
        let mut out = Vec::new();
        match (payload, &mut self.app) {
            (Payload::Wish(w), App::Consensus { sync, .. }) => {
                let res = sync.on_wish(w);
                self.map_sync(res, &mut out);
            }
            (Payload::Wish(w), App::Replicated { sync, .. }) => {
                let res = sync.on_wish(w);
                self.map_sync(res, &mut out);
            }
            (Payload::ConsensusState { slot, state }, App::Consensus { cons, .. }) => {
                if *slot == 0 {
                    let res = cons.on_state(state);
                    self.map_consensus(res, &mut out);
                }
            }
            (Payload::ConsensusState { slot, state }, App::Replicated { rep, .. }) => {
                let res = rep.on_state(*slot, state);
                self.map_replicated(res, &mut out);
            }
            (Payload::RegisterState(m), App::Register { reg, .. }) => {
                let res = reg.on_state(m);
                self.map_register(res, &mut out);
            }
            // Cross-application payloads cannot arise from these nodes;
            // drop them rather than crash on a malformed trace replay.
            _ => {}
        }
        out
    }

    /// Periodic state rebroadcast, one payload per message kind the app
    /// maintains.
    pub fn gossip(&self) -> Vec<NodeAction> {
        match &self.app {
            App::Consensus { sync, cons } => vec![
                NodeAction::Broadcast(Payload::Wish(sync.snapshot())),
                NodeAction::Broadcast(Payload::ConsensusState {
                    slot: 0,
                    state: cons.state_snapshot(),
                }),
            ],
            App::Register { reg, .. } => vec![NodeAction::Broadcast(Payload::RegisterState(
                reg.state_snapshot(),
            ))],
            App::Replicated { sync, rep } => {
                let mut out = vec![NodeAction::Broadcast(Payload::Wish(sync.snapshot()))];
                for (slot, state) in rep.state_snapshots() {
                    out.push(NodeAction::Broadcast(Payload::ConsensusState {
                        slot,
                        state,
                    }));
                }
                out
            }
        }
    }

    pub fn on_view_timer_fire(&mut self) -> Vec<NodeAction> {
        let mut out = Vec::new();
        match &mut self.app {
            App::Consensus { cons, .. } => {
                let res = cons.on_timer_expire();
                self.map_consensus(res, &mut out);
            }
            App::Replicated { rep, .. } => {
                let res = rep.on_timer_expire();
                self.map_replicated(res, &mut out);
            }
            App::Register { .. } => {}
        }
        out
    }

    fn advance_now(&mut self) -> Vec<NodeAction> {
        let mut out = Vec::new();
        let sync = match &mut self.app {
            App::Consensus { sync, .. } => sync,
            App::Replicated { sync, .. } => sync,
            App::Register { .. } => unreachable!("registers run no synchronizer"),
        };
        out.push(NodeAction::Record(EventBody::Advance {
            view: sync.curr_view,
        }));
        let res = sync.advance();
        self.map_sync(res, &mut out);
        out
    }

    fn map_sync(&mut self, res: Vec<SyncOutput>, out: &mut Vec<NodeAction>) {
        for o in res {
            match o {
                SyncOutput::Entered(v) => {
                    out.push(NodeAction::Record(EventBody::EnterView { view: v }));
                    match &mut self.app {
                        App::Consensus { cons, .. } => {
                            let res = cons.on_new_view(v);
                            self.map_consensus(res, out);
                        }
                        App::Replicated { rep, .. } => {
                            let res = rep.on_new_view(v);
                            self.map_replicated(res, out);
                        }
                        App::Register { .. } => unreachable!(),
                    }
                }
                SyncOutput::Broadcast(w) => {
                    out.push(NodeAction::Broadcast(Payload::Wish(w)));
                }
            }
        }
    }

    fn map_consensus(&mut self, res: Vec<ConsensusOutput>, out: &mut Vec<NodeAction>) {
        for o in res {
            match o {
                ConsensusOutput::ArmTimer(d) => {
                    let view = match &self.app {
                        App::Consensus { cons, .. } => Some(cons.view),
                        _ => None,
                    };
                    out.push(NodeAction::ArmTimer { duration: d, view });
                }
                ConsensusOutput::CancelTimer => out.push(NodeAction::CancelTimer),
                ConsensusOutput::RequestAdvance => {
                    let chained = self.advance_now();
                    out.extend(chained);
                }
                ConsensusOutput::Decided(value) => {
                    let view = match &self.app {
                        App::Consensus { cons, .. } => cons.view,
                        _ => 0,
                    };
                    out.push(NodeAction::Record(EventBody::Decide {
                        slot: 0,
                        view,
                        value,
                    }));
                }
            }
        }
    }

    fn map_replicated(&mut self, res: Vec<ReplicatedOutput>, out: &mut Vec<NodeAction>) {
        for o in res {
            match o {
                ReplicatedOutput::ArmTimer(d) => {
                    let view = match &self.app {
                        App::Replicated { sync, .. } => Some(sync.curr_view),
                        _ => None,
                    };
                    out.push(NodeAction::ArmTimer { duration: d, view });
                }
                ReplicatedOutput::CancelTimer => out.push(NodeAction::CancelTimer),
                ReplicatedOutput::RequestAdvance => {
                    let chained = self.advance_now();
                    out.extend(chained);
                }
                ReplicatedOutput::Propose { slot, value } => {
                    out.push(NodeAction::Record(EventBody::Propose { slot, value }));
                }
                ReplicatedOutput::Decide { slot, view, value } => {
                    out.push(NodeAction::Record(EventBody::Decide { slot, view, value }));
                }
                ReplicatedOutput::Respond { op, value } => {
                    out.push(NodeAction::Record(EventBody::Respond {
                        op: op.seq,
                        kind: op.kind,
                        value,
                        tag: None,
                    }));
                }
                ReplicatedOutput::SlotsExhausted => {
                    self.exhausted = true;
                }
            }
        }
    }

    fn map_register(&mut self, res: Vec<RegisterOutput>, out: &mut Vec<NodeAction>) {
        for o in res {
            let App::Register { reg, current_op } = &mut self.app else {
                unreachable!();
            };
            let (seq, kind) = current_op.take().expect("completion without an operation");
            let (value, tag) = match o {
                RegisterOutput::ReadDone { val, tag } => {
                    assert_eq!(kind, OpKind::Read);
                    (Some(val), tag)
                }
                RegisterOutput::WriteDone { tag } => {
                    assert_eq!(kind, OpKind::Write);
                    (None, tag)
                }
            };
            reg.finish_op();
            out.push(NodeAction::Record(EventBody::Respond {
                op: seq,
                kind,
                value,
                tag: Some(tag),
            }));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sync::WishMsg;

    fn p(i: u32) -> ProcessId {
        ProcessId(i)
    }

    fn records(actions: &[NodeAction]) -> Vec<&EventBody> {
        actions
            .iter()
            .filter_map(|a| match a {
                NodeAction::Record(e) => Some(e),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn startup_advances_out_of_view_zero() {
        let mut n = Node::new_consensus(p(1), 3, 50, 10, SyncMutation::default());
        let actions = n.startup();
        assert_eq!(
            records(&actions),
            vec![&EventBody::Advance { view: 0 }]
        );
        assert!(matches!(
            &actions[1],
            NodeAction::Broadcast(Payload::Wish(w)) if w.views == vec![1, 0, 0]
        ));
    }

    #[test]
    fn majority_wish_enters_view_and_arms_the_timer() {
        let mut n = Node::new_consensus(p(1), 3, 50, 10, SyncMutation::default());
        n.startup();
        let actions = n.on_payload(&Payload::Wish(WishMsg {
            views: vec![0, 1, 1],
        }));
        assert_eq!(
            actions[0],
            NodeAction::Record(EventBody::EnterView { view: 1 })
        );
        assert!(actions.contains(&NodeAction::ArmTimer {
            duration: 50,
            view: Some(1)
        }));
        // The entry rebroadcast follows the timer setup.
        assert!(matches!(
            actions.last().unwrap(),
            NodeAction::Broadcast(Payload::Wish(_))
        ));
    }

    #[test]
    fn timer_expiry_records_an_advance_and_rebroadcasts() {
        let mut n = Node::new_consensus(p(2), 3, 50, 10, SyncMutation::default());
        n.startup();
        n.on_payload(&Payload::Wish(WishMsg {
            views: vec![1, 1, 0],
        }));
        let actions = n.on_view_timer_fire();
        assert_eq!(
            records(&actions),
            vec![&EventBody::Advance { view: 1 }]
        );
        assert!(matches!(
            &actions[1],
            NodeAction::Broadcast(Payload::Wish(w)) if w.views[1] == 2
        ));
    }

    #[test]
    fn force_advance_is_idempotent_without_entry() {
        let mut n = Node::new_consensus(p(2), 3, 50, 10, SyncMutation::default());
        n.startup();
        for _ in 0..3 {
            let actions = n.force_advance();
            assert!(matches!(
                &actions[1],
                NodeAction::Broadcast(Payload::Wish(w)) if w.views == vec![0, 1, 0]
            ));
        }
    }

    #[test]
    fn solo_register_op_responds_immediately() {
        let mut n = Node::new_register(p(1), 1);
        assert!(n.startup().is_empty());
        let actions = n.invoke_op(1, OpKind::Write, Some(9));
        let recs = records(&actions);
        assert_eq!(recs.len(), 2);
        assert!(matches!(recs[0], EventBody::Invoke { op: 1, .. }));
        assert!(matches!(
            recs[1],
            EventBody::Respond {
                op: 1,
                value: None,
                tag: Some(crate::register::Tag(1, 1)),
                ..
            }
        ));
        assert!(!n.op_pending());
    }

    #[test]
    fn replicated_invoke_records_invoke_then_proposal() {
        let mut n = Node::new_replicated(p(1), 3, 8, 50, 10, SyncMutation::default());
        n.startup();
        let actions = n.invoke_op(1, OpKind::Write, Some(3));
        let recs = records(&actions);
        assert!(matches!(recs[0], EventBody::Invoke { op: 1, .. }));
        assert!(matches!(recs[1], EventBody::Propose { slot: 0, .. }));
        assert!(n.op_pending());
    }

    #[test]
    fn register_node_ignores_view_payloads() {
        let mut n = Node::new_register(p(1), 3);
        let actions = n.on_payload(&Payload::Wish(WishMsg {
            views: vec![5, 5, 5],
        }));
        assert!(actions.is_empty());
    }

    #[test]
    fn gossip_covers_every_app_message_kind() {
        let mut c = Node::new_consensus(p(1), 3, 50, 10, SyncMutation::default());
        c.startup();
        assert_eq!(c.gossip().len(), 2);

        let r = Node::new_register(p(1), 3);
        assert_eq!(r.gossip().len(), 1);

        let mut rep = Node::new_replicated(p(1), 3, 8, 50, 10, SyncMutation::default());
        rep.startup();
        rep.invoke_op(1, OpKind::Write, Some(1));
        // Wish plus one state per constructed slot.
        assert_eq!(rep.gossip().len(), 2);
    }
}
