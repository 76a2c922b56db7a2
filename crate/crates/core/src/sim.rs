//! Discrete-event network simulator.
//!
//! Drives one node per process over a faulty network and records every
//! externally visible event into a trace. All nondeterminism (delays, drops,
//! clock drift, seeded crash times, seeded workloads) is derived from the
//! scenario seed through stateless hashing, so a (scenario, seed) pair
//! replays to a byte-identical trace.
//!
//! Time is a single global integer clock. Each process additionally has a
//! local clock that runs slow by an integer stretch factor until GST and at
//! full rate afterwards; timers and the periodic state broadcast are
//! measured on the local clock.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::consensus::{OpKind, Value};
use crate::node::{Node, NodeAction};
use crate::scenario::{
    CorrectClass, FaultyChannelSpec, FaultyClass, PreGstMode, Scenario, ScriptAction, StopRule,
    WorkloadKind,
};
use crate::sync::SyncMutation;
use crate::topology::{ProcessId, TopologyGraph};
use crate::trace::{DropReason, EventBody, MsgKind, Payload, TimerKind, Trace, TraceRecord};
use crate::{hash_coords, hash_fraction, hash_in, Result, SimTime};

const SALT_DRIFT: u64 = 0x01;
const SALT_DROP: u64 = 0x02;
const SALT_DELAY: u64 = 0x03;
const SALT_CRASH: u64 = 0x04;
const SALT_WORKLOAD: u64 = 0x05;
const SALT_OPGAP: u64 = 0x06;

/// Per-process protocol state size at one sampling point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FootprintSample {
    pub time: SimTime,
    pub per_process: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub trace: Trace,
    /// Samples at 1/4, 1/2 and 3/4 of the horizon.
    pub footprints: Vec<FootprintSample>,
    /// Slot-0 decision per process, for consensus workloads.
    pub decided: Vec<Option<Value>>,
    /// The stop rule fired before the horizon.
    pub stopped_early: bool,
}

/// Runs the scenario under the given seed. The seed in `sc.run` is only a
/// default for callers; this function uses the one passed in.
pub fn run(sc: &Scenario, seed: u64) -> Result<RunResult> {
    sc.validate()?;
    let mut sim = Sim::new(sc, seed)?;
    sim.init();
    sim.drive();
    Ok(sim.finish())
}

#[derive(Debug, Clone)]
struct PlannedOp {
    kind: OpKind,
    arg: Option<u64>,
    at: SimTime,
}

#[derive(Debug, Clone)]
enum EventKind {
    Start {
        p: usize,
    },
    CrashAt {
        p: usize,
    },
    Deliver {
        to: usize,
        from: usize,
        msg_id: u64,
        payload: Payload,
    },
    Timer {
        p: usize,
        gen: u64,
    },
    Gossip {
        p: usize,
    },
    Work {
        p: usize,
    },
    Spam {
        p: usize,
    },
}

/// Heap entry. Ties in time break by insertion order, which makes the event
/// order a pure function of the schedule history.
#[derive(Debug, Clone)]
struct QueuedEvent {
    time: SimTime,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}

impl Eq for QueuedEvent {}

impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

enum Fate {
    Drop(DropReason),
    Deliver(SimTime),
}

struct Sim<'a> {
    sc: &'a Scenario,
    seed: u64,
    n: usize,
    graph: TopologyGraph,
    gst: Option<SimTime>,
    delta: SimTime,
    pre_max: SimTime,
    er_at: SimTime,
    /// Local clock stretch per process, 1..=10.
    sigma: Vec<u64>,
    faulty: BTreeMap<(u32, u32), FaultyChannelSpec>,
    overrides: BTreeMap<(u32, u32), CorrectClass>,
    core: Vec<usize>,
    nodes: Vec<Node>,
    crashed: Vec<bool>,
    /// Arming or cancelling bumps the generation; a fire event with a stale
    /// generation is a cancelled timer.
    timer_gen: Vec<u64>,
    gossip_count: Vec<u64>,
    heap: BinaryHeap<Reverse<QueuedEvent>>,
    event_seq: u64,
    msg_seq: u64,
    now: SimTime,
    trace: Trace,
    plans: Vec<VecDeque<PlannedOp>>,
    proposal: Vec<Option<u64>>,
    op_seq: Vec<u64>,
    ops_done: Vec<u64>,
    random_workload: bool,
    decided0: Vec<bool>,
    stop_deadline: Option<SimTime>,
    checkpoints: [SimTime; 3],
    cp_idx: usize,
    footprints: Vec<FootprintSample>,
}

impl<'a> Sim<'a> {
    fn new(sc: &'a Scenario, seed: u64) -> Result<Sim<'a>> {
        let n = sc.n;
        let mutation = SyncMutation {
            suppress_entry_broadcast: sc.mutations.suppress_entry_broadcast,
            weak_majority: sc.mutations.weak_majority,
        };
        let nodes = (0..n)
            .map(|p| {
                let me = ProcessId::from_index(p);
                match sc.workload.kind {
                    WorkloadKind::Consensus => Node::new_consensus(
                        me,
                        n,
                        sc.timing.initial_timeout,
                        sc.timing.gamma,
                        mutation,
                    ),
                    WorkloadKind::Register => Node::new_register(me, n),
                    WorkloadKind::Replicated => Node::new_replicated(
                        me,
                        n,
                        sc.max_slots(),
                        sc.timing.initial_timeout,
                        sc.timing.gamma,
                        mutation,
                    ),
                }
            })
            .collect();
        let sigma = (0..n)
            .map(|p| 1 + hash_in(hash_coords(seed, SALT_DRIFT, &[p as u64 + 1]), 9))
            .collect();
        let core = sc
            .core_params()?
            .map(|params| params.core.iter().map(|p| p.index()).collect())
            .unwrap_or_default();
        let horizon = sc.run.horizon;
        Ok(Sim {
            sc,
            seed,
            n,
            graph: sc.graph()?,
            gst: sc.effective_gst(),
            delta: sc.synchrony.delta,
            pre_max: sc.pre_gst_max_delay(),
            er_at: sc.er_stabilize_at(),
            sigma,
            faulty: sc
                .channels
                .faulty
                .iter()
                .map(|f| ((f.from, f.to), f.clone()))
                .collect(),
            overrides: sc
                .channels
                .overrides
                .iter()
                .map(|o| ((o.from, o.to), o.class))
                .collect(),
            core,
            nodes,
            crashed: vec![false; n],
            timer_gen: vec![0; n],
            gossip_count: vec![1; n],
            heap: BinaryHeap::new(),
            event_seq: 0,
            msg_seq: 0,
            now: 0,
            trace: Trace::new(&sc.name, seed, n),
            plans: vec![VecDeque::new(); n],
            proposal: vec![None; n],
            op_seq: vec![0; n],
            ops_done: vec![0; n],
            random_workload: sc.workload.random_ops > 0,
            decided0: vec![false; n],
            stop_deadline: None,
            checkpoints: [horizon / 4, horizon / 2, 3 * (horizon / 4)],
            cp_idx: 0,
            footprints: Vec::new(),
        })
    }

    fn init(&mut self) {
        // Crashes go in before the start events so a crash at time zero
        // silences the process completely.
        let crash_cap = self.gst.unwrap_or(self.sc.run.horizon / 4);
        for spec in &self.sc.failures.crashed {
            let p = ProcessId(spec.process).index();
            let at = spec.at.unwrap_or_else(|| {
                hash_in(
                    hash_coords(self.seed, SALT_CRASH, &[spec.process as u64]),
                    crash_cap,
                )
            });
            self.schedule(at, EventKind::CrashAt { p });
        }
        for p in 0..self.n {
            self.schedule(0, EventKind::Start { p });
        }
        for p in 0..self.n {
            let t = self.global_of_local(p, self.sc.timing.rho);
            self.schedule(t, EventKind::Gossip { p });
        }
        self.init_workload();
        if let Some(spam) = &self.sc.attack.advance_spam {
            let p = ProcessId(spam.process).index();
            self.schedule(spam.from, EventKind::Spam { p });
        }
    }

    fn init_workload(&mut self) {
        match self.sc.workload.kind {
            WorkloadKind::Consensus => {
                for pr in &self.sc.workload.proposals {
                    let p = ProcessId(pr.process).index();
                    self.proposal[p] = Some(pr.value);
                    self.schedule(pr.at, EventKind::Work { p });
                }
            }
            WorkloadKind::Register | WorkloadKind::Replicated => {
                if self.random_workload {
                    let crashed: Vec<usize> = self
                        .sc
                        .failures
                        .crashed
                        .iter()
                        .map(|c| ProcessId(c.process).index())
                        .collect();
                    for p in 0..self.n {
                        if crashed.contains(&p) {
                            continue;
                        }
                        let mut rng = ChaCha8Rng::seed_from_u64(hash_coords(
                            self.seed,
                            SALT_WORKLOAD,
                            &[p as u64 + 1],
                        ));
                        for _ in 0..self.sc.workload.random_ops {
                            let write = rng.gen_bool(0.5);
                            self.plans[p].push_back(PlannedOp {
                                kind: if write { OpKind::Write } else { OpKind::Read },
                                arg: write.then(|| rng.gen_range(1..=100u64)),
                                at: 0,
                            });
                        }
                    }
                } else {
                    for op in &self.sc.workload.ops {
                        let p = ProcessId(op.process).index();
                        self.plans[p].push_back(PlannedOp {
                            kind: op.kind,
                            arg: op.arg,
                            at: op.at,
                        });
                    }
                }
                for p in 0..self.n {
                    if let Some(first) = self.plans[p].front() {
                        let at = if self.random_workload {
                            self.op_gap(p, 0)
                        } else {
                            first.at
                        };
                        self.schedule(at, EventKind::Work { p });
                    }
                }
            }
        }
    }

    fn drive(&mut self) {
        while let Some(Reverse(ev)) = self.heap.pop() {
            let end = self
                .stop_deadline
                .map_or(self.sc.run.horizon, |d| d.min(self.sc.run.horizon));
            if ev.time > end {
                break;
            }
            while self.cp_idx < self.checkpoints.len() && self.checkpoints[self.cp_idx] < ev.time
            {
                self.sample_footprint(self.checkpoints[self.cp_idx]);
                self.cp_idx += 1;
            }
            self.now = ev.time;
            self.handle(ev.kind);
        }
        while self.cp_idx < self.checkpoints.len() {
            self.sample_footprint(self.checkpoints[self.cp_idx]);
            self.cp_idx += 1;
        }
    }

    fn finish(self) -> RunResult {
        RunResult {
            decided: self.nodes.iter().map(|n| n.decided_value()).collect(),
            trace: self.trace,
            footprints: self.footprints,
            stopped_early: self.stop_deadline.is_some(),
        }
    }

    fn handle(&mut self, kind: EventKind) {
        match kind {
            EventKind::Start { p } => {
                if !self.crashed[p] {
                    let actions = self.nodes[p].startup();
                    self.apply(p, actions);
                }
            }
            EventKind::CrashAt { p } => {
                if !self.crashed[p] {
                    self.crashed[p] = true;
                    self.record(p, EventBody::Crash);
                    self.check_workload_stop();
                }
            }
            EventKind::Deliver {
                to,
                from,
                msg_id,
                payload,
            } => {
                if self.crashed[to] {
                    return;
                }
                self.record(
                    to,
                    EventBody::Deliver {
                        from: ProcessId::from_index(from),
                        msg_id,
                    },
                );
                let actions = self.nodes[to].on_payload(&payload);
                self.apply(to, actions);
            }
            EventKind::Timer { p, gen } => {
                if self.crashed[p] || gen != self.timer_gen[p] {
                    return;
                }
                self.record(
                    p,
                    EventBody::TimerFire {
                        timer: TimerKind::ViewTimeout,
                    },
                );
                let actions = self.nodes[p].on_view_timer_fire();
                self.apply(p, actions);
            }
            EventKind::Gossip { p } => {
                if self.crashed[p] {
                    return;
                }
                let actions = self.nodes[p].gossip();
                self.apply(p, actions);
                self.gossip_count[p] += 1;
                let t = self.global_of_local(p, self.gossip_count[p] * self.sc.timing.rho);
                if t <= self.sc.run.horizon {
                    self.schedule(t, EventKind::Gossip { p });
                }
            }
            EventKind::Work { p } => {
                if self.crashed[p] {
                    return;
                }
                match self.sc.workload.kind {
                    WorkloadKind::Consensus => {
                        if let Some(v) = self.proposal[p].take() {
                            let actions = self.nodes[p].propose(v);
                            self.apply(p, actions);
                            self.check_workload_stop();
                        }
                    }
                    WorkloadKind::Register | WorkloadKind::Replicated => {
                        if self.nodes[p].op_pending() || self.nodes[p].slots_exhausted() {
                            return;
                        }
                        let Some(op) = self.plans[p].pop_front() else {
                            return;
                        };
                        self.op_seq[p] += 1;
                        let actions = self.nodes[p].invoke_op(self.op_seq[p], op.kind, op.arg);
                        self.apply(p, actions);
                    }
                }
            }
            EventKind::Spam { p } => {
                if self.crashed[p] {
                    return;
                }
                let actions = self.nodes[p].force_advance();
                self.apply(p, actions);
                let period = self.sc.attack.advance_spam.as_ref().unwrap().period;
                let t = self.now + period;
                if t <= self.sc.run.horizon {
                    self.schedule(t, EventKind::Spam { p });
                }
            }
        }
    }

    /// Runs the node's actions, then drains self-deliveries to quiescence.
    /// A process's broadcast reaches itself at send time.
    fn apply(&mut self, p: usize, actions: Vec<NodeAction>) {
        let mut selfq: VecDeque<(u64, Payload)> = VecDeque::new();
        self.do_actions(p, actions, &mut selfq);
        while let Some((msg_id, payload)) = selfq.pop_front() {
            self.record(
                p,
                EventBody::Deliver {
                    from: ProcessId::from_index(p),
                    msg_id,
                },
            );
            let actions = self.nodes[p].on_payload(&payload);
            self.do_actions(p, actions, &mut selfq);
        }
    }

    fn do_actions(
        &mut self,
        p: usize,
        actions: Vec<NodeAction>,
        selfq: &mut VecDeque<(u64, Payload)>,
    ) {
        for act in actions {
            match act {
                NodeAction::Broadcast(payload) => self.broadcast(p, payload, selfq),
                NodeAction::ArmTimer { duration, view } => {
                    self.timer_gen[p] += 1;
                    self.record(
                        p,
                        EventBody::TimerSet {
                            timer: TimerKind::ViewTimeout,
                            duration,
                            view,
                        },
                    );
                    let fire = self.global_of_local(p, self.local_now(p) + duration);
                    self.schedule(
                        fire,
                        EventKind::Timer {
                            p,
                            gen: self.timer_gen[p],
                        },
                    );
                }
                NodeAction::CancelTimer => {
                    self.timer_gen[p] += 1;
                }
                NodeAction::Record(body) => {
                    let decided_slot0 = matches!(body, EventBody::Decide { slot: 0, .. });
                    let responded = matches!(body, EventBody::Respond { .. });
                    self.record(p, body);
                    if decided_slot0 {
                        self.decided0[p] = true;
                        self.check_core_stop();
                    }
                    if responded {
                        self.ops_done[p] += 1;
                        self.schedule_next_op(p);
                        self.check_workload_stop();
                    }
                }
            }
        }
    }

    fn schedule_next_op(&mut self, p: usize) {
        let Some(next) = self.plans[p].front() else {
            return;
        };
        let at = if self.random_workload {
            self.now + self.op_gap(p, self.ops_done[p])
        } else {
            self.now.max(next.at)
        };
        self.schedule(at, EventKind::Work { p });
    }

    /// Seeded pause before a process's next random operation, in [0, 2δ].
    fn op_gap(&self, p: usize, k: u64) -> SimTime {
        hash_in(
            hash_coords(self.seed, SALT_OPGAP, &[p as u64 + 1, k]),
            2 * self.delta,
        )
    }

    fn broadcast(&mut self, from: usize, payload: Payload, selfq: &mut VecDeque<(u64, Payload)>) {
        let kind = payload.kind();
        for to in 0..self.n {
            let msg_id = self.msg_seq;
            self.msg_seq += 1;
            self.record(
                from,
                EventBody::Send {
                    to: ProcessId::from_index(to),
                    msg_id,
                    payload: payload.clone(),
                },
            );
            if to == from {
                selfq.push_back((msg_id, payload.clone()));
                continue;
            }
            match self.fate(from, to, msg_id, kind) {
                Fate::Drop(reason) => self.record(
                    from,
                    EventBody::Drop {
                        to: ProcessId::from_index(to),
                        msg_id,
                        reason,
                    },
                ),
                Fate::Deliver(at) => self.schedule(
                    at,
                    EventKind::Deliver {
                        to,
                        from,
                        msg_id,
                        payload: payload.clone(),
                    },
                ),
            }
        }
    }

    /// Drop decision for one message, made at send time.
    fn fate(&self, from: usize, to: usize, msg_id: u64, kind: MsgKind) -> Fate {
        let f = ProcessId::from_index(from);
        let t = ProcessId::from_index(to);
        if !self.graph.has_edge(f, t) {
            return Fate::Drop(DropReason::Disconnected);
        }
        if let Some(spec) = self.faulty.get(&(f.0, t.0)) {
            match spec.class {
                FaultyClass::Disconnected => return Fate::Drop(DropReason::Disconnected),
                FaultyClass::Flaky => {
                    if let Some(rate) = spec.rate {
                        if hash_fraction(self.drop_word(f, t, msg_id)) < rate {
                            return Fate::Drop(DropReason::Flaky);
                        }
                    } else if let Some(rules) = &spec.rules {
                        if let Some(rule) = rules.iter().find(|r| r.matches(kind, self.now)) {
                            if rule.action == ScriptAction::Drop {
                                return Fate::Drop(DropReason::Flaky);
                            }
                        }
                    }
                    return Fate::Deliver(self.arrival(from, to, msg_id));
                }
            }
        }
        let class = self
            .overrides
            .get(&(f.0, t.0))
            .copied()
            .unwrap_or(self.sc.channels.default);
        if class == CorrectClass::EventuallyReliable
            && self.now < self.er_at
            && hash_fraction(self.drop_word(f, t, msg_id)) < self.sc.channels.er_pre_drop_rate
        {
            return Fate::Drop(DropReason::PreStabilize);
        }
        Fate::Deliver(self.arrival(from, to, msg_id))
    }

    fn drop_word(&self, f: ProcessId, t: ProcessId, msg_id: u64) -> u64 {
        hash_coords(self.seed, SALT_DROP, &[f.0 as u64, t.0 as u64, msg_id])
    }

    /// Delivery time for a message that will not be dropped. Post-GST the
    /// delay is in [1, δ]; before GST it is adversarial but every correct
    /// channel still delivers by GST + δ.
    fn arrival(&self, from: usize, to: usize, msg_id: u64) -> SimTime {
        let h = hash_coords(
            self.seed,
            SALT_DELAY,
            &[from as u64 + 1, to as u64 + 1, msg_id],
        );
        match self.gst {
            None => self.now + 1 + hash_in(h, self.pre_max.saturating_sub(1)),
            Some(g) if self.now >= g => self.now + 1 + hash_in(h, self.delta - 1),
            Some(g) => {
                let cap = g + self.delta;
                let f = ProcessId::from_index(from);
                let t = ProcessId::from_index(to);
                if let Some(rule) = self
                    .sc
                    .synchrony
                    .scripted_delays
                    .iter()
                    .find(|r| r.matches(f, t, self.now))
                {
                    return (self.now + rule.delay).min(cap);
                }
                match self.sc.synchrony.pre_gst_mode {
                    PreGstMode::Bounded => (self.now + hash_in(h, self.pre_max)).min(cap),
                    PreGstMode::Park => g + 1 + hash_in(h, self.delta - 1),
                }
            }
        }
    }

    /// Local clock reading at the current global time.
    fn local_now(&self, p: usize) -> u64 {
        let s = self.sigma[p];
        match self.gst {
            None => self.now / s,
            Some(g) => {
                if self.now <= g {
                    self.now / s
                } else {
                    g / s + (self.now - g)
                }
            }
        }
    }

    /// First global time at which the process's local clock reads `local`.
    fn global_of_local(&self, p: usize, local: u64) -> SimTime {
        let s = self.sigma[p];
        match self.gst {
            None => local * s,
            Some(g) => {
                if local <= g / s {
                    local * s
                } else {
                    g + (local - g / s)
                }
            }
        }
    }

    fn check_core_stop(&mut self) {
        if self.sc.run.stop != StopRule::CoreDecided || self.stop_deadline.is_some() {
            return;
        }
        if !self.core.is_empty() && self.core.iter().all(|&p| self.decided0[p]) {
            self.stop_deadline = Some(self.now + self.sc.run.grace);
        }
    }

    fn check_workload_stop(&mut self) {
        if self.sc.run.stop != StopRule::WorkloadDone || self.stop_deadline.is_some() {
            return;
        }
        let done = (0..self.n).all(|p| {
            self.crashed[p]
                || (self.proposal[p].is_none()
                    && self.plans[p].is_empty()
                    && !self.nodes[p].op_pending())
        });
        if done {
            self.stop_deadline = Some(self.now + self.sc.run.grace);
        }
    }

    fn sample_footprint(&mut self, time: SimTime) {
        self.footprints.push(FootprintSample {
            time,
            per_process: self.nodes.iter().map(|n| n.footprint_bytes()).collect(),
        });
    }

    fn schedule(&mut self, time: SimTime, kind: EventKind) {
        let seq = self.event_seq;
        self.event_seq += 1;
        self.heap.push(Reverse(QueuedEvent { time, seq, kind }));
    }

    fn record(&mut self, p: usize, body: EventBody) {
        let seq = self.trace.records.len() as u64;
        self.trace.records.push(TraceRecord {
            seq,
            time: self.now,
            process: ProcessId::from_index(p),
            body,
        });
    }
}
