//! Offline trace checkers.
//!
//! Each checker replays a finished trace against one contract: the view
//! synchronizer's interface properties, consensus safety and liveness, the
//! decision latency bound in stable views, the replicated register's read
//! semantics, or the network fault model itself. Checkers never look at
//! protocol internals; they judge the trace records alone, so they catch
//! bugs in the simulator as readily as bugs in the protocols.
//!
//! Liveness-flavored checks self-guard against truncation: a property whose
//! deadline lies beyond the end of the trace is reported inconclusive, never
//! violated. A violation therefore always points at real evidence inside the
//! trace.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::consensus::{leader, OpKind, Value};
use crate::linearize::{self, RegOp};
use crate::scenario::{CheckName, FaultyClass, Scenario, SynchronyMode, WorkloadKind};
use crate::topology::{ProcessId, TopologyGraph};
use crate::trace::{DropReason, EventBody, TimerKind, Trace};
use crate::{is_majority, Result, SimTime, View};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Outcome {
    Pass,
    Violation,
    /// The trace ended before the property's deadline, or the property's
    /// premise never arose. Not a pass, but not evidence of a bug.
    Inconclusive,
}

impl Outcome {
    pub fn is_violation(self) -> bool {
        self == Outcome::Violation
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Outcome::Pass => "PASS",
            Outcome::Violation => "VIOLATION",
            Outcome::Inconclusive => "INCONCLUSIVE",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub check: CheckName,
    pub outcome: Outcome,
    /// Witness for a violation, margin note for an inconclusive result, or
    /// a short account of what was covered for a pass.
    pub detail: String,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ({})", self.check, self.outcome, self.detail)
    }
}

pub fn any_violation(verdicts: &[Verdict]) -> bool {
    verdicts.iter().any(|v| v.outcome.is_violation())
}

/// Runs every check the scenario enables, in the order listed.
pub fn run_enabled(sc: &Scenario, trace: &Trace) -> Result<Vec<Verdict>> {
    let ctx = Ctx::new(sc, trace)?;
    sc.checks
        .enabled
        .iter()
        .map(|&c| ctx.run(c))
        .collect()
}

pub fn run_check(sc: &Scenario, trace: &Trace, check: CheckName) -> Result<Verdict> {
    Ctx::new(sc, trace)?.run(check)
}

/// Trace position: records share integer timestamps, so strict "before"
/// comparisons fall back to the global record sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Stamp {
    time: SimTime,
    seq: u64,
}

struct Ctx<'a> {
    sc: &'a Scenario,
    trace: &'a Trace,
    graph: TopologyGraph,
    core: BTreeSet<ProcessId>,
    d: SimTime,
    big_delta: SimTime,
    /// None in asynchronous mode.
    gst: Option<SimTime>,
    /// First EnterView per (process, view).
    entries: BTreeMap<(ProcessId, View), Stamp>,
    /// First Advance per (process, view left).
    advances: BTreeMap<(ProcessId, View), Stamp>,
    end: SimTime,
}

impl<'a> Ctx<'a> {
    fn new(sc: &'a Scenario, trace: &'a Trace) -> Result<Ctx<'a>> {
        let graph = sc.graph()?;
        let (core, d, big_delta) = match sc.core_params()? {
            Some(p) => (p.core.into_iter().collect(), p.d, p.big_delta),
            None => (BTreeSet::new(), 0, 0),
        };
        let mut entries = BTreeMap::new();
        let mut advances = BTreeMap::new();
        for r in &trace.records {
            let at = Stamp {
                time: r.time,
                seq: r.seq,
            };
            match r.body {
                EventBody::EnterView { view } => {
                    entries.entry((r.process, view)).or_insert(at);
                }
                EventBody::Advance { view } => {
                    advances.entry((r.process, view)).or_insert(at);
                }
                _ => {}
            }
        }
        Ok(Ctx {
            sc,
            trace,
            graph,
            core,
            d,
            big_delta,
            gst: sc.effective_gst(),
            entries,
            advances,
            end: trace.end_time(),
        })
    }

    fn run(&self, check: CheckName) -> Result<Verdict> {
        let v = match check {
            CheckName::Synchronizer => self.check_synchronizer(),
            CheckName::ConsensusSafety => self.check_consensus_safety(),
            CheckName::ConsensusLiveness => self.check_consensus_liveness()?,
            CheckName::DecisionTiming => self.check_decision_timing(),
            CheckName::RegisterLinearizable => self.check_register_linearizable(),
            CheckName::ReplicatedSafeRegister => self.check_replicated_safe_register(),
            CheckName::NetworkContract => self.check_network_contract(),
        };
        Ok(v)
    }

    fn verdict(&self, check: CheckName, outcome: Outcome, detail: String) -> Verdict {
        Verdict {
            check,
            outcome,
            detail,
        }
    }

    /// Earliest entry into `v` among core members.
    fn ef(&self, v: View) -> Option<Stamp> {
        self.core
            .iter()
            .filter_map(|&p| self.entries.get(&(p, v)))
            .min()
            .copied()
    }

    /// Earliest advance out of `v` among core members.
    fn af(&self, v: View) -> Option<Stamp> {
        self.core
            .iter()
            .filter_map(|&p| self.advances.get(&(p, v)))
            .min()
            .copied()
    }

    fn core_entered_views(&self) -> BTreeSet<View> {
        self.entries
            .keys()
            .filter(|(p, _)| self.core.contains(p))
            .map(|&(_, v)| v)
            .collect()
    }

    /// First view whose earliest core entry is at or after GST. Views below
    /// it straddle the unstable period and are exempt from timing bounds.
    fn first_clean_view(&self, gst: SimTime) -> View {
        self.core_entered_views()
            .into_iter()
            .filter(|&v| self.ef(v).is_some_and(|s| s.time < gst))
            .max()
            .unwrap_or(0)
            + 1
    }

    /// Slack granted to eventual properties before a missing consequence
    /// counts as a violation. Generous on purpose: relays ride the gossip
    /// period as a backstop and pre-GST clocks run up to 10x slow.
    fn settle_margin(&self) -> SimTime {
        10 * (self.d + self.sc.timing.rho + self.sc.synchrony.delta)
    }

    // ----- synchronizer interface properties -----

    fn check_synchronizer(&self) -> Verdict {
        let check = CheckName::Synchronizer;
        if self.core.is_empty() {
            return self.verdict(
                check,
                Outcome::Inconclusive,
                "failure pattern leaves no connected core".into(),
            );
        }
        let subs = [
            self.sync_monotonicity(),
            self.sync_validity(),
            self.sync_bounded_entry(),
            self.sync_startup(),
            self.sync_progress(),
        ];
        for sub in &subs {
            if let Err(witness) = sub {
                return self.verdict(check, Outcome::Violation, witness.clone());
            }
        }
        let detail: Vec<String> = subs.into_iter().map(|s| s.unwrap()).collect();
        self.verdict(check, Outcome::Pass, detail.join("; "))
    }

    /// Entries at one process are strictly ordered by view.
    fn sync_monotonicity(&self) -> std::result::Result<String, String> {
        let mut count = 0usize;
        let mut last: BTreeMap<ProcessId, (View, Stamp)> = BTreeMap::new();
        for (&(p, v), &at) in &self.entries {
            count += 1;
            if let Some(&(pv, pat)) = last.get(&p) {
                if at <= pat {
                    return Err(format!(
                        "monotonicity: {p} entered view {v} at t={} no later than view {pv} at t={}",
                        at.time, pat.time
                    ));
                }
            }
            last.insert(p, (v, at));
        }
        Ok(format!("monotonicity ok over {count} entries"))
    }

    /// Every entry into v+1 is preceded by a core advance out of v.
    fn sync_validity(&self) -> std::result::Result<String, String> {
        for (&(p, v), &at) in &self.entries {
            if v == 0 {
                return Err(format!("validity: {p} entered view 0, which does not exist"));
            }
            let prev = v - 1;
            match self.af(prev) {
                Some(adv) if adv < at => {}
                Some(adv) => {
                    return Err(format!(
                        "validity: {p} entered view {v} at t={} but the first core advance \
                         out of view {prev} came later, at t={}",
                        at.time, adv.time
                    ));
                }
                None => {
                    return Err(format!(
                        "validity: {p} entered view {v} at t={} with no core advance \
                         out of view {prev}",
                        at.time
                    ));
                }
            }
        }
        Ok(format!("validity ok over {} entries", self.entries.len()))
    }

    /// Once past GST, a view nobody abandons quickly is entered by the whole
    /// core within the relay bound d.
    fn sync_bounded_entry(&self) -> std::result::Result<String, String> {
        let Some(gst) = self.gst else {
            return Ok("bounded entry skipped (asynchronous)".into());
        };
        let clean = self.first_clean_view(gst);
        let mut checked = 0usize;
        let mut beyond = 0usize;
        for v in self.core_entered_views() {
            if v < clean {
                continue;
            }
            let ef = self.ef(v).unwrap();
            let deadline = ef.time + self.d;
            if self.end < deadline {
                beyond += 1;
                continue;
            }
            // Premise: no core process left v within the relay window.
            if self.af(v).is_some_and(|a| a.time < deadline) {
                continue;
            }
            checked += 1;
            for &p in &self.core {
                match self.entries.get(&(p, v)) {
                    Some(at) if at.time <= deadline => {}
                    Some(at) => {
                        return Err(format!(
                            "bounded entry: {p} entered view {v} at t={}, after the \
                             first core entry at t={} plus d={}",
                            at.time, ef.time, self.d
                        ));
                    }
                    None => {
                        return Err(format!(
                            "bounded entry: {p} never entered view {v}, first core \
                             entry at t={} and d={}",
                            ef.time, self.d
                        ));
                    }
                }
            }
        }
        Ok(format!(
            "bounded entry ok over {checked} views from {clean} ({beyond} past the horizon)"
        ))
    }

    /// A majority of core startup advances forces the first view.
    fn sync_startup(&self) -> std::result::Result<String, String> {
        let Some(gst) = self.gst else {
            return Ok("startup skipped (asynchronous)".into());
        };
        let mut starts: Vec<Stamp> = self
            .core
            .iter()
            .filter_map(|&p| self.advances.get(&(p, 0)))
            .copied()
            .collect();
        if !is_majority(starts.len(), self.sc.n) {
            return Ok("startup premise unmet (no core majority advanced at view 0)".into());
        }
        if self.ef(1).is_some() {
            return Ok("startup ok".into());
        }
        starts.sort();
        let quorum = self.sc.n / 2 + 1;
        let settled = starts[quorum - 1].time.max(gst);
        if self.end >= settled + self.settle_margin() {
            Err(format!(
                "startup: a core majority advanced at view 0 by t={} yet no core \
                 process entered view 1 by t={}",
                settled, self.end
            ))
        } else {
            Ok("startup pending at the horizon".into())
        }
    }

    /// A view the core entered, where a majority either stayed out or
    /// advanced, leads to the next view.
    fn sync_progress(&self) -> std::result::Result<String, String> {
        let Some(gst) = self.gst else {
            return Ok("progress skipped (asynchronous)".into());
        };
        let mut checked = 0usize;
        let mut pending = 0usize;
        for v in self.core_entered_views() {
            let ef = self.ef(v).unwrap();
            // Largest premise set: members that never entered v plus members
            // that entered and advanced.
            let mut willing = 0usize;
            let mut settled = ef.time;
            for &p in &self.core {
                match (self.entries.get(&(p, v)), self.advances.get(&(p, v))) {
                    (None, _) => willing += 1,
                    (Some(_), Some(adv)) => {
                        willing += 1;
                        settled = settled.max(adv.time);
                    }
                    (Some(_), None) => {}
                }
            }
            if !is_majority(willing, self.sc.n) {
                continue;
            }
            if self.ef(v + 1).is_some() {
                checked += 1;
                continue;
            }
            if self.end >= settled.max(gst) + self.settle_margin() {
                return Err(format!(
                    "progress: view {v} had a willing core majority by t={settled} yet \
                     view {} was never entered by t={}",
                    v + 1,
                    self.end
                ));
            }
            pending += 1;
        }
        Ok(format!(
            "progress ok over {checked} views ({pending} pending at the horizon)"
        ))
    }

    // ----- consensus -----

    /// Per-slot agreement and validity across every decision in the trace.
    fn check_consensus_safety(&self) -> Verdict {
        let check = CheckName::ConsensusSafety;
        let mut proposed: BTreeMap<u64, BTreeSet<Value>> = BTreeMap::new();
        let mut decided: BTreeMap<u64, (ProcessId, Value)> = BTreeMap::new();
        // Re-announcing a decision in a later view is allowed; revoking one
        // is not.
        let mut first: BTreeMap<(ProcessId, u64), Value> = BTreeMap::new();
        let mut count = 0usize;
        for r in &self.trace.records {
            match r.body {
                EventBody::Propose { slot, value } => {
                    proposed.entry(slot).or_default().insert(value);
                }
                EventBody::Decide { slot, value, .. } => {
                    count += 1;
                    if *first.entry((r.process, slot)).or_insert(value) != value {
                        return self.verdict(
                            check,
                            Outcome::Violation,
                            format!("{} revoked its decision for slot {slot}", r.process),
                        );
                    }
                    match proposed.get(&slot) {
                        Some(vals) if vals.contains(&value) => {}
                        _ => {
                            return self.verdict(
                                check,
                                Outcome::Violation,
                                format!(
                                    "{} decided {value:?} in slot {slot}, which nobody proposed",
                                    r.process
                                ),
                            );
                        }
                    }
                    match decided.get(&slot) {
                        None => {
                            decided.insert(slot, (r.process, value));
                        }
                        Some(&(q, other)) if other != value => {
                            return self.verdict(
                                check,
                                Outcome::Violation,
                                format!(
                                    "slot {slot} decided {other:?} at {q} but {value:?} at {}",
                                    r.process
                                ),
                            );
                        }
                        Some(_) => {}
                    }
                }
                _ => {}
            }
        }
        self.verdict(
            check,
            Outcome::Pass,
            format!("{count} decisions over {} slots agree", decided.len()),
        )
    }

    /// Every core member decides slot 0 within the sufficiency bound.
    fn check_consensus_liveness(&self) -> Result<Verdict> {
        let check = CheckName::ConsensusLiveness;
        if self.sc.workload.kind != WorkloadKind::Consensus {
            return Ok(self.verdict(
                check,
                Outcome::Inconclusive,
                "applies to the consensus workload".into(),
            ));
        }
        let Some(bound) = self.sc.liveness_bound()? else {
            return Ok(self.verdict(
                check,
                Outcome::Inconclusive,
                "no bound without partial synchrony and a connected core".into(),
            ));
        };
        let proposers: BTreeSet<ProcessId> = self
            .trace
            .records
            .iter()
            .filter(|r| matches!(r.body, EventBody::Propose { slot: 0, .. }))
            .map(|r| r.process)
            .collect();
        if !self.core.iter().all(|p| proposers.contains(p)) {
            return Ok(self.verdict(
                check,
                Outcome::Inconclusive,
                "not every core member proposed".into(),
            ));
        }
        let mut decided: BTreeMap<ProcessId, SimTime> = BTreeMap::new();
        for r in &self.trace.records {
            if let EventBody::Decide { slot: 0, .. } = r.body {
                decided.entry(r.process).or_insert(r.time);
            }
        }
        let missing: Vec<String> = self
            .core
            .iter()
            .filter(|p| !decided.get(p).is_some_and(|&t| t <= bound))
            .map(|p| p.to_string())
            .collect();
        if missing.is_empty() {
            let last = self.core.iter().map(|p| decided[p]).max().unwrap_or(0);
            return Ok(self.verdict(
                check,
                Outcome::Pass,
                format!("all core members decided by t={last} (bound {bound})"),
            ));
        }
        if self.end < bound {
            return Ok(self.verdict(
                check,
                Outcome::Inconclusive,
                format!("trace ends at t={} before the bound {bound}", self.end),
            ));
        }
        Ok(self.verdict(
            check,
            Outcome::Violation,
            format!(
                "core members [{}] did not decide by the bound t={bound}",
                missing.join(", ")
            ),
        ))
    }

    /// In a stable view (core leader, post-GST entry, prompt proposal, and
    /// every entrant's timeout above d + 3 * big_delta) nobody advances and
    /// the whole core decides within d + 3 * big_delta of the first entry.
    fn check_decision_timing(&self) -> Verdict {
        let check = CheckName::DecisionTiming;
        if self.sc.workload.kind != WorkloadKind::Consensus {
            return self.verdict(
                check,
                Outcome::Inconclusive,
                "applies to the consensus workload".into(),
            );
        }
        let Some(gst) = self.gst else {
            return self.verdict(
                check,
                Outcome::Inconclusive,
                "no timing bound without partial synchrony".into(),
            );
        };
        if self.core.is_empty() {
            return self.verdict(
                check,
                Outcome::Inconclusive,
                "failure pattern leaves no connected core".into(),
            );
        }

        // First proposal time and per-(process, view) timeout durations.
        let mut proposed_at: BTreeMap<ProcessId, SimTime> = BTreeMap::new();
        let mut timeouts: BTreeMap<(ProcessId, View), u64> = BTreeMap::new();
        let mut decided_at: BTreeMap<ProcessId, SimTime> = BTreeMap::new();
        for r in &self.trace.records {
            match r.body {
                EventBody::Propose { slot: 0, .. } => {
                    proposed_at.entry(r.process).or_insert(r.time);
                }
                EventBody::TimerSet {
                    timer: TimerKind::ViewTimeout,
                    duration,
                    view: Some(v),
                } => {
                    timeouts.entry((r.process, v)).or_insert(duration);
                }
                EventBody::Decide { slot: 0, .. } => {
                    decided_at.entry(r.process).or_insert(r.time);
                }
                _ => {}
            }
        }

        let window = self.d + 3 * self.big_delta;
        let clean = self.first_clean_view(gst);
        let mut stable = 0usize;
        for v in self.core_entered_views() {
            if v < clean || !self.core.contains(&leader(v, self.sc.n)) {
                continue;
            }
            let ef = self.ef(v).unwrap();
            if ef.time < gst {
                continue;
            }
            let prompt = proposed_at
                .get(&leader(v, self.sc.n))
                .is_some_and(|&t| t <= ef.time);
            if !prompt {
                continue;
            }
            let entrants: Vec<ProcessId> = self
                .core
                .iter()
                .copied()
                .filter(|&p| self.entries.contains_key(&(p, v)))
                .collect();
            let slow = entrants
                .iter()
                .all(|&p| timeouts.get(&(p, v)).is_some_and(|&t| t > window));
            if !slow {
                continue;
            }
            // Stable view: the premises of the latency bound hold.
            if let Some(adv) = self
                .core
                .iter()
                .find(|&&p| self.advances.contains_key(&(p, v)))
            {
                return self.verdict(
                    check,
                    Outcome::Violation,
                    format!("{adv} advanced out of stable view {v}"),
                );
            }
            let deadline = ef.time + window;
            let late = self
                .core
                .iter()
                .find(|&&p| !decided_at.get(&p).is_some_and(|&t| t <= deadline));
            match late {
                None => stable += 1,
                // A missing decision is a violation only once the window
                // has fully elapsed inside the trace.
                Some(_) if self.end < deadline => continue,
                Some(p) => {
                    return self.verdict(
                        check,
                        Outcome::Violation,
                        format!(
                            "{p} had not decided by t={deadline} despite stable view {v} \
                             entered at t={}",
                            ef.time
                        ),
                    );
                }
            }
        }
        if stable == 0 {
            return self.verdict(
                check,
                Outcome::Inconclusive,
                "no stable view materialized in the trace".into(),
            );
        }
        self.verdict(
            check,
            Outcome::Pass,
            format!("{stable} stable views decided within d + 3 * big_delta = {window}"),
        )
    }

    // ----- replicated register -----

    /// Reads served by the replicated log return the latest write decided in
    /// an earlier slot.
    fn check_replicated_safe_register(&self) -> Verdict {
        let check = CheckName::ReplicatedSafeRegister;
        if self.sc.workload.kind != WorkloadKind::Replicated {
            return self.verdict(
                check,
                Outcome::Inconclusive,
                "applies to the replicated workload".into(),
            );
        }
        let mut log: BTreeMap<u64, Value> = BTreeMap::new();
        for r in &self.trace.records {
            if let EventBody::Decide { slot, value, .. } = r.body {
                match log.get(&slot) {
                    None => {
                        log.insert(slot, value);
                    }
                    Some(&other) if other != value => {
                        return self.verdict(
                            check,
                            Outcome::Violation,
                            format!("slot {slot} decided both {other:?} and {value:?}"),
                        );
                    }
                    Some(_) => {}
                }
            }
        }
        let slot_of = |p: ProcessId, seq: u64| {
            log.iter().find_map(|(&s, &val)| match val {
                Value::Op(desc) if desc.invoker == p && desc.seq == seq => Some((s, desc)),
                _ => None,
            })
        };
        let mut reads = 0usize;
        for r in &self.trace.records {
            let EventBody::Respond {
                op, kind, value, ..
            } = r.body
            else {
                continue;
            };
            let Some((slot, desc)) = slot_of(r.process, op) else {
                return self.verdict(
                    check,
                    Outcome::Violation,
                    format!("{} op {op} responded without a decided slot", r.process),
                );
            };
            if desc.kind != kind {
                return self.verdict(
                    check,
                    Outcome::Violation,
                    format!("{} op {op} decided as {:?} but responded as {kind:?}", r.process, desc.kind),
                );
            }
            if kind == OpKind::Write {
                continue;
            }
            reads += 1;
            let expect = log
                .range(..slot)
                .rev()
                .find_map(|(_, &val)| match val {
                    Value::Op(d) if d.kind == OpKind::Write => Some(d.arg),
                    _ => None,
                })
                .unwrap_or(None);
            if value != expect {
                return self.verdict(
                    check,
                    Outcome::Violation,
                    format!(
                        "{} read (op {op}, slot {slot}) returned {value:?}, log says {expect:?}",
                        r.process
                    ),
                );
            }
        }
        self.verdict(
            check,
            Outcome::Pass,
            format!("{reads} reads consistent with a {}-slot log", log.len()),
        )
    }

    // ----- shared-memory register -----

    fn check_register_linearizable(&self) -> Verdict {
        let check = CheckName::RegisterLinearizable;
        if self.sc.workload.kind != WorkloadKind::Register {
            return self.verdict(
                check,
                Outcome::Inconclusive,
                "applies to the register workload".into(),
            );
        }
        let ops = match collect_register_ops(self.trace) {
            Ok(ops) => ops,
            Err(e) => return self.verdict(check, Outcome::Violation, e),
        };
        let count = ops.len();
        match linearize::check_register(&ops) {
            Ok(()) => self.verdict(
                check,
                Outcome::Pass,
                format!("{count} operations linearizable"),
            ),
            Err(e) => self.verdict(check, Outcome::Violation, e),
        }
    }

    // ----- network fault model -----

    /// The trace obeys the channel model: every delivery matches one send,
    /// nothing is delivered twice, drops carry a legal reason, post-GST
    /// correct-channel latency stays within delta, and crashed processes
    /// fall silent.
    fn check_network_contract(&self) -> Verdict {
        let check = CheckName::NetworkContract;
        let sc = self.sc;
        let faulty: BTreeMap<(u32, u32), FaultyClass> = sc
            .channels
            .faulty
            .iter()
            .map(|f| ((f.from, f.to), f.class))
            .collect();
        let er_default = sc.channels.default == crate::scenario::CorrectClass::EventuallyReliable;
        let er_at = sc.er_stabilize_at();

        struct Sent {
            from: ProcessId,
            to: ProcessId,
            at: Stamp,
            settled: bool,
        }
        let mut sends: BTreeMap<u64, Sent> = BTreeMap::new();
        let mut crashed: BTreeMap<ProcessId, Stamp> = BTreeMap::new();
        let mut delivers = 0usize;
        let mut drops = 0usize;
        let fail = |msg: String| self.verdict(check, Outcome::Violation, msg);

        for r in &self.trace.records {
            let at = Stamp {
                time: r.time,
                seq: r.seq,
            };
            if let Some(&c) = crashed.get(&r.process) {
                if at > c {
                    return fail(format!(
                        "{} crashed at t={} yet acted at t={}",
                        r.process, c.time, r.time
                    ));
                }
            }
            match &r.body {
                EventBody::Crash => {
                    if crashed.insert(r.process, at).is_some() {
                        return fail(format!("{} crashed twice", r.process));
                    }
                }
                EventBody::Send { to, msg_id, .. } => {
                    let prev = sends.insert(
                        *msg_id,
                        Sent {
                            from: r.process,
                            to: *to,
                            at,
                            settled: false,
                        },
                    );
                    if prev.is_some() {
                        return fail(format!("msg {msg_id} sent twice"));
                    }
                }
                EventBody::Deliver { from, msg_id } => {
                    delivers += 1;
                    let Some(sent) = sends.get_mut(msg_id) else {
                        return fail(format!(
                            "{} delivered msg {msg_id} that was never sent",
                            r.process
                        ));
                    };
                    if sent.from != *from || sent.to != r.process || !(sent.at < at) {
                        return fail(format!(
                            "msg {msg_id} delivered at {} from {from} without a matching \
                             earlier send",
                            r.process
                        ));
                    }
                    if sent.settled {
                        return fail(format!("msg {msg_id} delivered or dropped twice"));
                    }
                    sent.settled = true;
                    if sent.from != sent.to
                        && faulty.get(&(sent.from.0, sent.to.0))
                            == Some(&FaultyClass::Disconnected)
                    {
                        return fail(format!(
                            "msg {msg_id} delivered over disconnected channel ({}, {})",
                            sent.from, sent.to
                        ));
                    }
                    let limit = match sc.synchrony.mode {
                        SynchronyMode::Partial => {
                            sent.at.time.max(sc.synchrony.gst) + sc.synchrony.delta
                        }
                        SynchronyMode::Asynchronous => sent.at.time + sc.pre_gst_max_delay(),
                    };
                    if r.time > limit {
                        return fail(format!(
                            "msg {msg_id} sent at t={} delivered at t={}, past the limit t={limit}",
                            sent.at.time, r.time
                        ));
                    }
                }
                EventBody::Drop { to, msg_id, reason } => {
                    drops += 1;
                    let Some(sent) = sends.get_mut(msg_id) else {
                        return fail(format!("drop of msg {msg_id} that was never sent"));
                    };
                    if sent.from != r.process || sent.to != *to {
                        return fail(format!("drop of msg {msg_id} names the wrong channel"));
                    }
                    if sent.settled {
                        return fail(format!("msg {msg_id} delivered or dropped twice"));
                    }
                    sent.settled = true;
                    let chan = (r.process.0, to.0);
                    let legal = match reason {
                        DropReason::Disconnected => {
                            !self.graph.has_edge(r.process, *to)
                                || faulty.get(&chan) == Some(&FaultyClass::Disconnected)
                        }
                        DropReason::Flaky => faulty.get(&chan) == Some(&FaultyClass::Flaky),
                        DropReason::PreStabilize => {
                            er_default && !faulty.contains_key(&chan) && r.time < er_at
                        }
                    };
                    if !legal {
                        return fail(format!(
                            "msg {msg_id} dropped on ({}, {to}) with reason {reason:?}, which \
                             that channel cannot produce",
                            r.process
                        ));
                    }
                }
                _ => {}
            }
        }
        self.verdict(
            check,
            Outcome::Pass,
            format!(
                "{} sends, {delivers} deliveries, {drops} drops all within contract",
                sends.len()
            ),
        )
    }
}

/// Builds the operation history for the linearizability checker from
/// invoke/respond records. Fails on malformed pairings.
pub fn collect_register_ops(trace: &Trace) -> std::result::Result<Vec<RegOp>, String> {
    let mut ops: BTreeMap<(ProcessId, u64), RegOp> = BTreeMap::new();
    for r in &trace.records {
        match r.body {
            EventBody::Invoke { op, kind, arg } => {
                let prev = ops.insert(
                    (r.process, op),
                    RegOp {
                        invoker: r.process,
                        seq: op,
                        kind,
                        arg,
                        invoked: (r.time, r.seq),
                        responded: None,
                        value: None,
                        tag: None,
                    },
                );
                if prev.is_some() {
                    return Err(format!("{} invoked op {op} twice", r.process));
                }
            }
            EventBody::Respond {
                op,
                kind,
                value,
                tag,
            } => {
                let Some(rec) = ops.get_mut(&(r.process, op)) else {
                    return Err(format!("{} responded to op {op} never invoked", r.process));
                };
                if rec.responded.is_some() {
                    return Err(format!("{} op {op} responded twice", r.process));
                }
                if rec.kind != kind {
                    return Err(format!("{} op {op} changed kind between records", r.process));
                }
                let Some(tag) = tag else {
                    return Err(format!("{} op {op} responded without a tag", r.process));
                };
                rec.responded = Some((r.time, r.seq));
                rec.value = value;
                rec.tag = Some(tag);
            }
            _ => {}
        }
    }
    Ok(ops.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::OpDesc;
    use crate::register::Tag;
    use crate::sync::WishMsg;
    use crate::trace::{Payload, TraceRecord};

    fn scenario(kind: &str) -> Scenario {
        let text = format!(
            r#"
version = 1
name = "t"
n = 3
[topology]
kind = "complete"
[synchrony]
mode = "partial"
gst = 0
delta = 10
[timing]
rho = 10
gamma = 50
initial_timeout = 200
[workload]
kind = "{kind}"
[run]
horizon = 100000
seed = 1
"#
        );
        Scenario::from_toml_str(&text).unwrap()
    }

    fn add(tr: &mut Trace, time: SimTime, p: u32, body: EventBody) {
        let seq = tr.records.len() as u64;
        tr.records.push(TraceRecord {
            seq,
            time,
            process: ProcessId(p),
            body,
        });
    }

    fn trace() -> Trace {
        Trace::new("t", 1, 3)
    }

    fn starts(tr: &mut Trace) {
        for p in 1..=3 {
            add(tr, 0, p, EventBody::Advance { view: 0 });
        }
    }

    fn enters(tr: &mut Trace, view: View, at: [SimTime; 3]) {
        for (i, &t) in at.iter().enumerate() {
            add(tr, t, i as u32 + 1, EventBody::EnterView { view });
        }
    }

    fn check(sc: &Scenario, tr: &Trace, name: CheckName) -> Verdict {
        run_check(sc, tr, name).unwrap()
    }

    #[test]
    fn clean_view_changes_satisfy_the_synchronizer_contract() {
        let sc = scenario("consensus");
        let mut tr = trace();
        starts(&mut tr);
        enters(&mut tr, 1, [1, 2, 3]);
        let v = check(&sc, &tr, CheckName::Synchronizer);
        assert_eq!(v.outcome, Outcome::Pass, "{v}");
    }

    #[test]
    fn entries_out_of_view_order_violate_monotonicity() {
        let sc = scenario("consensus");
        let mut tr = trace();
        starts(&mut tr);
        add(&mut tr, 5, 1, EventBody::EnterView { view: 2 });
        add(&mut tr, 9, 1, EventBody::EnterView { view: 1 });
        let v = check(&sc, &tr, CheckName::Synchronizer);
        assert_eq!(v.outcome, Outcome::Violation);
        assert!(v.detail.contains("monotonicity"), "{v}");
    }

    #[test]
    fn entry_without_a_core_advance_violates_validity() {
        let sc = scenario("consensus");
        let mut tr = trace();
        starts(&mut tr);
        enters(&mut tr, 1, [1, 2, 3]);
        add(&mut tr, 50, 1, EventBody::EnterView { view: 2 });
        let v = check(&sc, &tr, CheckName::Synchronizer);
        assert_eq!(v.outcome, Outcome::Violation);
        assert!(v.detail.contains("validity"), "{v}");
    }

    #[test]
    fn a_straggler_entry_violates_bounded_entry() {
        let sc = scenario("consensus");
        let mut tr = trace();
        starts(&mut tr);
        // d = diameter * delta = 10; p3 misses the t=20 deadline.
        enters(&mut tr, 1, [10, 15, 100]);
        let v = check(&sc, &tr, CheckName::Synchronizer);
        assert_eq!(v.outcome, Outcome::Violation);
        assert!(v.detail.contains("bounded entry"), "{v}");
    }

    #[test]
    fn an_early_advance_lifts_the_bounded_entry_obligation() {
        let sc = scenario("consensus");
        let mut tr = trace();
        starts(&mut tr);
        enters(&mut tr, 1, [10, 15, 100]);
        add(&mut tr, 12, 1, EventBody::Advance { view: 1 });
        let v = check(&sc, &tr, CheckName::Synchronizer);
        assert_eq!(v.outcome, Outcome::Pass, "{v}");
    }

    #[test]
    fn a_missing_first_view_violates_startup() {
        let sc = scenario("consensus");
        let mut tr = trace();
        starts(&mut tr);
        add(
            &mut tr,
            5000,
            1,
            EventBody::TimerFire {
                timer: TimerKind::ViewTimeout,
            },
        );
        let v = check(&sc, &tr, CheckName::Synchronizer);
        assert_eq!(v.outcome, Outcome::Violation);
        assert!(v.detail.contains("startup"), "{v}");
    }

    #[test]
    fn a_stuck_willing_majority_violates_progress() {
        let sc = scenario("consensus");
        let mut tr = trace();
        starts(&mut tr);
        enters(&mut tr, 1, [1, 2, 3]);
        add(&mut tr, 300, 1, EventBody::Advance { view: 1 });
        add(&mut tr, 310, 2, EventBody::Advance { view: 1 });
        add(
            &mut tr,
            5000,
            1,
            EventBody::TimerFire {
                timer: TimerKind::ViewTimeout,
            },
        );
        let v = check(&sc, &tr, CheckName::Synchronizer);
        assert_eq!(v.outcome, Outcome::Violation);
        assert!(v.detail.contains("progress"), "{v}");
    }

    #[test]
    fn a_followed_advance_satisfies_progress() {
        let sc = scenario("consensus");
        let mut tr = trace();
        starts(&mut tr);
        enters(&mut tr, 1, [1, 2, 3]);
        add(&mut tr, 300, 1, EventBody::Advance { view: 1 });
        add(&mut tr, 310, 2, EventBody::Advance { view: 1 });
        enters(&mut tr, 2, [320, 321, 322]);
        add(&mut tr, 330, 3, EventBody::Advance { view: 1 });
        let v = check(&sc, &tr, CheckName::Synchronizer);
        assert_eq!(v.outcome, Outcome::Pass, "{v}");
    }

    #[test]
    fn conflicting_decisions_violate_agreement() {
        let sc = scenario("consensus");
        let mut tr = trace();
        add(
            &mut tr,
            0,
            1,
            EventBody::Propose {
                slot: 0,
                value: Value::Int(1),
            },
        );
        add(
            &mut tr,
            0,
            2,
            EventBody::Propose {
                slot: 0,
                value: Value::Int(2),
            },
        );
        add(
            &mut tr,
            10,
            1,
            EventBody::Decide {
                slot: 0,
                view: 1,
                value: Value::Int(1),
            },
        );
        add(
            &mut tr,
            12,
            2,
            EventBody::Decide {
                slot: 0,
                view: 1,
                value: Value::Int(2),
            },
        );
        let v = check(&sc, &tr, CheckName::ConsensusSafety);
        assert_eq!(v.outcome, Outcome::Violation, "{v}");
    }

    #[test]
    fn deciding_an_unproposed_value_violates_safety() {
        let sc = scenario("consensus");
        let mut tr = trace();
        add(
            &mut tr,
            10,
            1,
            EventBody::Decide {
                slot: 0,
                view: 1,
                value: Value::Int(9),
            },
        );
        let v = check(&sc, &tr, CheckName::ConsensusSafety);
        assert_eq!(v.outcome, Outcome::Violation, "{v}");
    }

    #[test]
    fn re_announcing_the_same_decision_is_allowed() {
        let sc = scenario("consensus");
        let mut tr = trace();
        add(
            &mut tr,
            0,
            1,
            EventBody::Propose {
                slot: 0,
                value: Value::Int(1),
            },
        );
        for t in [10, 20] {
            add(
                &mut tr,
                t,
                1,
                EventBody::Decide {
                    slot: 0,
                    view: 1,
                    value: Value::Int(1),
                },
            );
        }
        let v = check(&sc, &tr, CheckName::ConsensusSafety);
        assert_eq!(v.outcome, Outcome::Pass, "{v}");
        let mut revoked = tr.clone();
        add(
            &mut revoked,
            30,
            1,
            EventBody::Decide {
                slot: 0,
                view: 2,
                value: Value::Int(2),
            },
        );
        let v = check(&sc, &revoked, CheckName::ConsensusSafety);
        assert_eq!(v.outcome, Outcome::Violation, "{v}");
    }

    fn stable_view_trace() -> Trace {
        let mut tr = trace();
        add(
            &mut tr,
            0,
            1,
            EventBody::Propose {
                slot: 0,
                value: Value::Int(7),
            },
        );
        starts(&mut tr);
        enters(&mut tr, 1, [0, 3, 5]);
        for (p, t) in [(1u32, 0u64), (2, 3), (3, 5)] {
            add(
                &mut tr,
                t,
                p,
                EventBody::TimerSet {
                    timer: TimerKind::ViewTimeout,
                    duration: 200,
                    view: Some(1),
                },
            );
        }
        tr
    }

    fn decide_at(tr: &mut Trace, p: u32, t: SimTime) {
        add(
            tr,
            t,
            p,
            EventBody::Decide {
                slot: 0,
                view: 1,
                value: Value::Int(7),
            },
        );
    }

    #[test]
    fn a_stable_view_deciding_inside_the_window_passes_timing() {
        // d + 3 * big_delta = 10 + 3 * 20 = 70 for this scenario.
        let sc = scenario("consensus");
        let mut tr = stable_view_trace();
        decide_at(&mut tr, 1, 40);
        decide_at(&mut tr, 2, 50);
        decide_at(&mut tr, 3, 60);
        let v = check(&sc, &tr, CheckName::DecisionTiming);
        assert_eq!(v.outcome, Outcome::Pass, "{v}");
    }

    #[test]
    fn a_late_decision_in_a_stable_view_violates_timing() {
        let sc = scenario("consensus");
        let mut tr = stable_view_trace();
        decide_at(&mut tr, 1, 40);
        decide_at(&mut tr, 2, 50);
        decide_at(&mut tr, 3, 100);
        let v = check(&sc, &tr, CheckName::DecisionTiming);
        assert_eq!(v.outcome, Outcome::Violation, "{v}");
    }

    #[test]
    fn an_advance_out_of_a_stable_view_violates_timing() {
        let sc = scenario("consensus");
        let mut tr = stable_view_trace();
        decide_at(&mut tr, 1, 40);
        decide_at(&mut tr, 2, 50);
        decide_at(&mut tr, 3, 60);
        add(&mut tr, 65, 2, EventBody::Advance { view: 1 });
        let v = check(&sc, &tr, CheckName::DecisionTiming);
        assert_eq!(v.outcome, Outcome::Violation, "{v}");
    }

    #[test]
    fn liveness_passes_inconcludes_and_violates_by_horizon() {
        let sc = scenario("consensus");
        let bound = sc.liveness_bound().unwrap().unwrap();
        let mut tr = trace();
        for p in 1..=3 {
            add(
                &mut tr,
                0,
                p,
                EventBody::Propose {
                    slot: 0,
                    value: Value::Int(7),
                },
            );
        }
        let one = {
            let mut t = trace();
            add(
                &mut t,
                0,
                1,
                EventBody::Propose {
                    slot: 0,
                    value: Value::Int(7),
                },
            );
            add(
                &mut t,
                bound + 10,
                1,
                EventBody::TimerFire {
                    timer: TimerKind::ViewTimeout,
                },
            );
            check(&sc, &t, CheckName::ConsensusLiveness)
        };
        assert_eq!(one.outcome, Outcome::Inconclusive, "{one}");
        decide_at(&mut tr, 1, 100);
        decide_at(&mut tr, 2, 110);
        let short = check(&sc, &tr, CheckName::ConsensusLiveness);
        assert_eq!(short.outcome, Outcome::Inconclusive, "{short}");
        let mut late = tr.clone();
        add(
            &mut late,
            bound + 10,
            1,
            EventBody::TimerFire {
                timer: TimerKind::ViewTimeout,
            },
        );
        let v = check(&sc, &late, CheckName::ConsensusLiveness);
        assert_eq!(v.outcome, Outcome::Violation, "{v}");
        decide_at(&mut tr, 3, 120);
        let v = check(&sc, &tr, CheckName::ConsensusLiveness);
        assert_eq!(v.outcome, Outcome::Pass, "{v}");
    }

    #[test]
    fn network_contract_accepts_a_clean_exchange() {
        let sc = scenario("consensus");
        let mut tr = trace();
        let wish = Payload::Wish(WishMsg {
            views: vec![0, 0, 0],
        });
        add(
            &mut tr,
            10,
            1,
            EventBody::Send {
                to: ProcessId(2),
                msg_id: 1,
                payload: wish,
            },
        );
        add(
            &mut tr,
            15,
            2,
            EventBody::Deliver {
                from: ProcessId(1),
                msg_id: 1,
            },
        );
        let v = check(&sc, &tr, CheckName::NetworkContract);
        assert_eq!(v.outcome, Outcome::Pass, "{v}");
    }

    #[test]
    fn network_contract_flags_model_breaches() {
        let sc = scenario("consensus");
        let wish = || {
            Payload::Wish(WishMsg {
                views: vec![0, 0, 0],
            })
        };
        // Delivery past max(send, gst) + delta.
        let mut late = trace();
        add(
            &mut late,
            10,
            1,
            EventBody::Send {
                to: ProcessId(2),
                msg_id: 1,
                payload: wish(),
            },
        );
        add(
            &mut late,
            25,
            2,
            EventBody::Deliver {
                from: ProcessId(1),
                msg_id: 1,
            },
        );
        assert_eq!(
            check(&sc, &late, CheckName::NetworkContract).outcome,
            Outcome::Violation
        );
        // Delivery with no matching send.
        let mut ghost = trace();
        add(
            &mut ghost,
            5,
            2,
            EventBody::Deliver {
                from: ProcessId(1),
                msg_id: 99,
            },
        );
        assert_eq!(
            check(&sc, &ghost, CheckName::NetworkContract).outcome,
            Outcome::Violation
        );
        // Activity after a crash.
        let mut zombie = trace();
        add(&mut zombie, 5, 1, EventBody::Crash);
        add(
            &mut zombie,
            10,
            1,
            EventBody::Send {
                to: ProcessId(2),
                msg_id: 1,
                payload: wish(),
            },
        );
        assert_eq!(
            check(&sc, &zombie, CheckName::NetworkContract).outcome,
            Outcome::Violation
        );
        // A drop reason the channel cannot produce.
        let mut flaky = trace();
        add(
            &mut flaky,
            10,
            1,
            EventBody::Send {
                to: ProcessId(2),
                msg_id: 1,
                payload: wish(),
            },
        );
        add(
            &mut flaky,
            10,
            1,
            EventBody::Drop {
                to: ProcessId(2),
                msg_id: 1,
                reason: DropReason::Flaky,
            },
        );
        assert_eq!(
            check(&sc, &flaky, CheckName::NetworkContract).outcome,
            Outcome::Violation
        );
        // The same message delivered twice.
        let mut dup = trace();
        add(
            &mut dup,
            10,
            1,
            EventBody::Send {
                to: ProcessId(2),
                msg_id: 1,
                payload: wish(),
            },
        );
        for t in [12, 14] {
            add(
                &mut dup,
                t,
                2,
                EventBody::Deliver {
                    from: ProcessId(1),
                    msg_id: 1,
                },
            );
        }
        assert_eq!(
            check(&sc, &dup, CheckName::NetworkContract).outcome,
            Outcome::Violation
        );
    }

    #[test]
    fn replicated_reads_must_match_the_decided_log() {
        let sc = scenario("replicated");
        let w = OpDesc {
            invoker: ProcessId(1),
            seq: 0,
            kind: OpKind::Write,
            arg: Some(5),
        };
        let r = OpDesc {
            invoker: ProcessId(2),
            seq: 0,
            kind: OpKind::Read,
            arg: None,
        };
        let mut tr = trace();
        add(
            &mut tr,
            10,
            1,
            EventBody::Decide {
                slot: 0,
                view: 1,
                value: Value::Op(w),
            },
        );
        add(
            &mut tr,
            12,
            1,
            EventBody::Respond {
                op: 0,
                kind: OpKind::Write,
                value: None,
                tag: None,
            },
        );
        add(
            &mut tr,
            20,
            2,
            EventBody::Decide {
                slot: 1,
                view: 1,
                value: Value::Op(r),
            },
        );
        let mut good = tr.clone();
        add(
            &mut good,
            22,
            2,
            EventBody::Respond {
                op: 0,
                kind: OpKind::Read,
                value: Some(5),
                tag: None,
            },
        );
        let v = check(&sc, &good, CheckName::ReplicatedSafeRegister);
        assert_eq!(v.outcome, Outcome::Pass, "{v}");
        let mut bad = tr;
        add(
            &mut bad,
            22,
            2,
            EventBody::Respond {
                op: 0,
                kind: OpKind::Read,
                value: Some(9),
                tag: None,
            },
        );
        let v = check(&sc, &bad, CheckName::ReplicatedSafeRegister);
        assert_eq!(v.outcome, Outcome::Violation, "{v}");
    }

    #[test]
    fn register_histories_check_through_the_linearizer() {
        let sc = scenario("register");
        let mut tr = trace();
        add(
            &mut tr,
            10,
            1,
            EventBody::Invoke {
                op: 0,
                kind: OpKind::Write,
                arg: Some(5),
            },
        );
        add(
            &mut tr,
            50,
            1,
            EventBody::Respond {
                op: 0,
                kind: OpKind::Write,
                value: None,
                tag: Some(Tag(1, 1)),
            },
        );
        add(
            &mut tr,
            60,
            2,
            EventBody::Invoke {
                op: 0,
                kind: OpKind::Read,
                arg: None,
            },
        );
        let mut good = tr.clone();
        add(
            &mut good,
            90,
            2,
            EventBody::Respond {
                op: 0,
                kind: OpKind::Read,
                value: Some(5),
                tag: Some(Tag(1, 1)),
            },
        );
        let v = check(&sc, &good, CheckName::RegisterLinearizable);
        assert_eq!(v.outcome, Outcome::Pass, "{v}");
        // A read returning a tag nobody wrote.
        let mut bad = tr;
        add(
            &mut bad,
            90,
            2,
            EventBody::Respond {
                op: 0,
                kind: OpKind::Read,
                value: Some(9),
                tag: Some(Tag(3, 3)),
            },
        );
        let v = check(&sc, &bad, CheckName::RegisterLinearizable);
        assert_eq!(v.outcome, Outcome::Violation, "{v}");
    }
}
