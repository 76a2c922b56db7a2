//! Scenario files: the complete description of one simulated run.
//!
//! A scenario fixes the process count, topology, failure pattern, synchrony
//! parameters, timers, workload, and checker selection. Together with a seed
//! it determines a run bit-exactly. Files are TOML with a version field;
//! unknown fields are rejected so typos fail loudly.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::consensus::OpKind;
use crate::topology::{
    connected_core, diameter, residual_graph, FailurePattern, ProcessId, TopologyGraph,
};
use crate::trace::MsgKind;
use crate::{Error, Result, SimTime};

pub const SCENARIO_VERSION: u32 = 1;

/// Largest supported process count. Keeps pigeonhole enumeration and the
/// O(n^2) state matrices at desk scale.
pub const MAX_N: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    pub n: usize,
    pub topology: TopologySection,
    pub synchrony: SynchronySection,
    pub timing: TimingSection,
    #[serde(default)]
    pub channels: ChannelsSection,
    #[serde(default)]
    pub failures: FailuresSection,
    pub workload: WorkloadSection,
    #[serde(default)]
    pub attack: AttackSection,
    pub run: RunSection,
    #[serde(default)]
    pub checks: ChecksSection,
    #[serde(default)]
    pub fuzz: FuzzSection,
    #[serde(default)]
    pub mutations: MutationsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub kind: TopologyKind,
    #[serde(default)]
    pub edges: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Complete,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynchronySection {
    pub mode: SynchronyMode,
    /// Global stabilization time. Ignored in asynchronous mode.
    #[serde(default)]
    pub gst: SimTime,
    /// Post-GST delay bound on correct channels.
    pub delta: SimTime,
    /// Cap on seeded pre-GST delays. Defaults to 10 * delta.
    #[serde(default)]
    pub pre_gst_max_delay: Option<SimTime>,
    #[serde(default)]
    pub pre_gst_mode: PreGstMode,
    /// Adversarial delay overrides, matched in order at send time. They
    /// apply only before GST and only to messages that are not dropped.
    #[serde(default)]
    pub scripted_delays: Vec<DelayRule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynchronyMode {
    Partial,
    Asynchronous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PreGstMode {
    /// Seeded delay in [0, pre_gst_max_delay], clamped to arrive by GST + delta.
    #[default]
    Bounded,
    /// Hold every pre-GST send until GST, then deliver within delta.
    Park,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayRule {
    #[serde(default)]
    pub from: Option<u32>,
    #[serde(default)]
    pub to: Option<u32>,
    #[serde(default)]
    pub after: Option<SimTime>,
    #[serde(default)]
    pub until: Option<SimTime>,
    pub delay: SimTime,
}

impl DelayRule {
    pub fn matches(&self, from: ProcessId, to: ProcessId, now: SimTime) -> bool {
        self.from.map_or(true, |f| f == from.0)
            && self.to.map_or(true, |t| t == to.0)
            && self.after.map_or(true, |a| now >= a)
            && self.until.map_or(true, |u| now < u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingSection {
    /// Periodic state-broadcast interval, in local clock ticks.
    pub rho: SimTime,
    /// Timeout increment applied on every expiry.
    pub gamma: u64,
    /// First decision-timer duration, in local clock ticks.
    pub initial_timeout: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelsSection {
    /// Class of every correct channel not listed in `overrides`.
    #[serde(default)]
    pub default: CorrectClass,
    /// Drop rate on eventually-reliable channels before they stabilize.
    #[serde(default = "default_er_rate")]
    pub er_pre_drop_rate: f64,
    /// When eventually-reliable channels stop dropping. Defaults to GST.
    #[serde(default)]
    pub er_stabilize_at: Option<SimTime>,
    #[serde(default)]
    pub overrides: Vec<ChannelOverride>,
    #[serde(default)]
    pub faulty: Vec<FaultyChannelSpec>,
}

impl Default for ChannelsSection {
    fn default() -> Self {
        ChannelsSection {
            default: CorrectClass::default(),
            er_pre_drop_rate: default_er_rate(),
            er_stabilize_at: None,
            overrides: Vec::new(),
            faulty: Vec::new(),
        }
    }
}

fn default_er_rate() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CorrectClass {
    #[default]
    Reliable,
    EventuallyReliable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelOverride {
    pub from: u32,
    pub to: u32,
    pub class: CorrectClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultyChannelSpec {
    pub from: u32,
    pub to: u32,
    pub class: FaultyClass,
    /// Seeded drop probability; flaky channels only.
    #[serde(default)]
    pub rate: Option<f64>,
    /// Scripted drop rules, first match wins; flaky channels only.
    #[serde(default)]
    pub rules: Option<Vec<ScriptRule>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultyClass {
    Disconnected,
    Flaky,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptRule {
    #[serde(default)]
    pub msg: MsgMatch,
    pub action: ScriptAction,
    #[serde(default)]
    pub after: Option<SimTime>,
    #[serde(default)]
    pub until: Option<SimTime>,
}

impl ScriptRule {
    pub fn matches(&self, kind: MsgKind, now: SimTime) -> bool {
        self.msg.matches(kind)
            && self.after.map_or(true, |a| now >= a)
            && self.until.map_or(true, |u| now < u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MsgMatch {
    #[default]
    Any,
    Wish,
    ConsensusState,
    RegisterState,
}

impl MsgMatch {
    pub fn matches(self, kind: MsgKind) -> bool {
        match self {
            MsgMatch::Any => true,
            MsgMatch::Wish => kind == MsgKind::Wish,
            MsgMatch::ConsensusState => kind == MsgKind::ConsensusState,
            MsgMatch::RegisterState => kind == MsgKind::RegisterState,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptAction {
    Drop,
    Deliver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FailuresSection {
    #[serde(default)]
    pub crashed: Vec<CrashSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrashSpec {
    pub process: u32,
    /// Crash time; seeded in [0, gst] when omitted.
    #[serde(default)]
    pub at: Option<SimTime>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSection {
    pub kind: WorkloadKind,
    /// Consensus workloads: one proposal per listed process.
    #[serde(default)]
    pub proposals: Vec<ProposalSpec>,
    /// Register and replicated workloads: scripted operations, serial per
    /// process in list order.
    #[serde(default)]
    pub ops: Vec<OpSpec>,
    /// Seeded operations per non-crashed process, exclusive with `ops`.
    #[serde(default)]
    pub random_ops: u64,
    /// Slot cap for replicated workloads. Defaults to 8.
    #[serde(default)]
    pub max_slots: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadKind {
    Consensus,
    Register,
    Replicated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalSpec {
    pub process: u32,
    pub value: u64,
    #[serde(default)]
    pub at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpSpec {
    pub process: u32,
    pub kind: OpKind,
    #[serde(default)]
    pub arg: Option<u64>,
    /// Earliest invocation time; the op starts once the process's previous
    /// op has responded and this time has passed.
    #[serde(default)]
    pub at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    /// A process that calls advance() on a fixed period regardless of its
    /// protocol state.
    #[serde(default)]
    pub advance_spam: Option<SpamSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpamSpec {
    pub process: u32,
    pub period: SimTime,
    #[serde(default)]
    pub from: SimTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub horizon: SimTime,
    pub seed: u64,
    #[serde(default)]
    pub stop: StopRule,
    /// Extra time simulated after the stop rule triggers.
    #[serde(default)]
    pub grace: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    #[default]
    Horizon,
    /// Stop once every connected-core member has decided slot 0.
    CoreDecided,
    /// Stop once every scripted or seeded operation has responded.
    WorkloadDone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ChecksSection {
    #[serde(default)]
    pub enabled: Vec<CheckName>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Synchronizer,
    ConsensusSafety,
    ConsensusLiveness,
    DecisionTiming,
    RegisterLinearizable,
    ReplicatedSafeRegister,
    NetworkContract,
}

impl CheckName {
    pub const ALL: [CheckName; 7] = [
        CheckName::Synchronizer,
        CheckName::ConsensusSafety,
        CheckName::ConsensusLiveness,
        CheckName::DecisionTiming,
        CheckName::RegisterLinearizable,
        CheckName::ReplicatedSafeRegister,
        CheckName::NetworkContract,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Synchronizer => "synchronizer",
            CheckName::ConsensusSafety => "consensus_safety",
            CheckName::ConsensusLiveness => "consensus_liveness",
            CheckName::DecisionTiming => "decision_timing",
            CheckName::RegisterLinearizable => "register_linearizable",
            CheckName::ReplicatedSafeRegister => "replicated_safe_register",
            CheckName::NetworkContract => "network_contract",
        }
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckName {
    type Err = Error;

    fn from_str(s: &str) -> Result<CheckName> {
        CheckName::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Scenario(format!("unknown check {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FuzzSection {
    #[serde(default)]
    pub family: FuzzFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FuzzFamily {
    /// Vary only the seed.
    #[default]
    SeedOnly,
    /// Also vary which minority subset crashes, and when.
    MinorityCrash,
    /// Also inject seeded flaky channels at drop rates in [0.1, 0.9].
    FlakyFringe,
    /// Also split the processes in two blocks and drop across the cut for
    /// a seeded prefix of the run.
    ScriptedPartition,
}

/// Synchronizer behavior switches used to validate the checkers. Both are
/// deliberate spec breaks; production scenarios leave them off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MutationsSection {
    #[serde(default)]
    pub suppress_entry_broadcast: bool,
    #[serde(default)]
    pub weak_majority: bool,
}

/// Connected-core facts derived from the scenario, shared by the checkers
/// and the liveness bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreParams {
    pub core: Vec<ProcessId>,
    pub diameter: u64,
    /// Relay bound: diameter * delta.
    pub d: SimTime,
    /// Propagation round bound: (delta + rho) * diameter.
    pub big_delta: SimTime,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Scenario> {
        let sc: Scenario =
            toml::from_str(text).map_err(|e| Error::Scenario(format!("parse: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        Scenario::from_toml_str(&text)
    }

    /// Resolves a bundled scenario name first, then a filesystem path.
    pub fn load_named(name_or_path: &str) -> Result<Scenario> {
        if let Some(text) = builtin(name_or_path) {
            return Scenario::from_toml_str(text);
        }
        Scenario::load(Path::new(name_or_path))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Scenario(format!("serialize: {e}")))
    }

    pub fn graph(&self) -> Result<TopologyGraph> {
        match self.topology.kind {
            TopologyKind::Complete => Ok(TopologyGraph::complete(self.n)),
            TopologyKind::Explicit => TopologyGraph::from_edges(self.n, &self.topology.edges),
        }
    }

    pub fn failure_pattern(&self) -> Result<FailurePattern> {
        let crashed: Vec<u32> = self.failures.crashed.iter().map(|c| c.process).collect();
        let faulty: Vec<(u32, u32)> = self
            .channels
            .faulty
            .iter()
            .map(|f| (f.from, f.to))
            .collect();
        let pattern = FailurePattern::new(&crashed, &faulty);
        pattern.validate(self.n)?;
        Ok(pattern)
    }

    pub fn core_params(&self) -> Result<Option<CoreParams>> {
        let g = self.graph()?;
        let f = self.failure_pattern()?;
        let core = match connected_core(&g, &f)? {
            Some(core) => core,
            None => return Ok(None),
        };
        let residual = residual_graph(&g, &f)?;
        let diam = diameter(&residual, &core)?;
        let delta = self.synchrony.delta;
        let rho = self.timing.rho;
        Ok(Some(CoreParams {
            core,
            diameter: diam,
            d: diam * delta,
            big_delta: (delta + rho) * diam,
        }))
    }

    /// GST in partial mode; None when the run is fully asynchronous.
    pub fn effective_gst(&self) -> Option<SimTime> {
        match self.synchrony.mode {
            SynchronyMode::Partial => Some(self.synchrony.gst),
            SynchronyMode::Asynchronous => None,
        }
    }

    pub fn pre_gst_max_delay(&self) -> SimTime {
        self.synchrony
            .pre_gst_max_delay
            .unwrap_or(10 * self.synchrony.delta)
    }

    pub fn er_stabilize_at(&self) -> SimTime {
        self.channels.er_stabilize_at.unwrap_or(self.synchrony.gst)
    }

    pub fn max_slots(&self) -> u64 {
        self.workload.max_slots.unwrap_or(8)
    }

    pub fn check_enabled(&self, check: CheckName) -> bool {
        self.checks.enabled.contains(&check)
    }

    /// Horizon that provably suffices for every core member to decide:
    /// after GST, each view lasts at most its largest timeout plus entry
    /// skew, timeouts escalate by gamma until they clear d + 3 * big_delta,
    /// and at most n views pass before a core leader's view sticks.
    pub fn liveness_bound(&self) -> Result<Option<SimTime>> {
        let gst = match self.effective_gst() {
            Some(gst) => gst,
            None => return Ok(None),
        };
        let params = match self.core_params()? {
            Some(p) => p,
            None => return Ok(None),
        };
        let big = params.d + 3 * params.big_delta;
        let t0 = self.timing.initial_timeout;
        let gamma = self.timing.gamma.max(1);
        let escalations = if t0 > big {
            0
        } else {
            (big - t0).div_ceil(gamma)
        } + 1;
        let max_timeout = t0 + (escalations + 1) * gamma;
        let view_allowance =
            (escalations + 2) * (t0 + max_timeout + big + self.timing.rho + self.synchrony.delta);
        Ok(Some(
            gst + 20 * big + (self.n as u64) * view_allowance,
        ))
    }

    fn needs_liveness_horizon(&self) -> bool {
        self.check_enabled(CheckName::ConsensusLiveness)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Scenario(msg));
        if self.version != SCENARIO_VERSION {
            return fail(format!(
                "scenario version {} unsupported (expected {SCENARIO_VERSION})",
                self.version
            ));
        }
        if self.n == 0 || self.n > MAX_N {
            return fail(format!("n = {} out of range 1..={MAX_N}", self.n));
        }
        if self.topology.kind == TopologyKind::Complete && !self.topology.edges.is_empty() {
            return fail("complete topology must not list edges".into());
        }
        let graph = self.graph()?;
        if self.synchrony.delta == 0 {
            return fail("delta must be positive".into());
        }
        if self.timing.rho == 0 {
            return fail("rho must be positive".into());
        }
        if self.timing.initial_timeout == 0 {
            return fail("initial_timeout must be positive".into());
        }
        if self.timing.gamma == 0 {
            return fail("gamma must be positive".into());
        }

        if !(0.0..=1.0).contains(&self.channels.er_pre_drop_rate) {
            return fail("er_pre_drop_rate must lie in [0, 1]".into());
        }
        let valid_pid = |p: u32| p >= 1 && (p as usize) <= self.n;
        for ov in &self.channels.overrides {
            if !valid_pid(ov.from) || !valid_pid(ov.to) {
                return fail(format!("override ({}, {}) names an unknown process", ov.from, ov.to));
            }
            if !graph.has_edge(ProcessId(ov.from), ProcessId(ov.to)) {
                return fail(format!("override ({}, {}) is not a channel", ov.from, ov.to));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for f in &self.channels.faulty {
            if !valid_pid(f.from) || !valid_pid(f.to) {
                return fail(format!("faulty ({}, {}) names an unknown process", f.from, f.to));
            }
            if !graph.has_edge(ProcessId(f.from), ProcessId(f.to)) {
                return fail(format!("faulty ({}, {}) is not a channel", f.from, f.to));
            }
            if !seen.insert((f.from, f.to)) {
                return fail(format!("faulty ({}, {}) listed twice", f.from, f.to));
            }
            match f.class {
                FaultyClass::Disconnected => {
                    if f.rate.is_some() || f.rules.is_some() {
                        return fail("disconnected channels take no policy".into());
                    }
                }
                FaultyClass::Flaky => match (&f.rate, &f.rules) {
                    (Some(r), None) => {
                        if !(0.0..=1.0).contains(r) {
                            return fail("flaky rate must lie in [0, 1]".into());
                        }
                    }
                    (None, Some(_)) => {}
                    _ => {
                        return fail(
                            "flaky channels need exactly one of rate or rules".into(),
                        )
                    }
                },
            }
        }

        let mut crashed = std::collections::BTreeSet::new();
        for c in &self.failures.crashed {
            if !valid_pid(c.process) {
                return fail(format!("crash spec names unknown process {}", c.process));
            }
            if !crashed.insert(c.process) {
                return fail(format!("process {} crashed twice", c.process));
            }
        }
        self.failure_pattern()?;

        match self.workload.kind {
            WorkloadKind::Consensus => {
                if !self.workload.ops.is_empty() || self.workload.random_ops > 0 {
                    return fail("consensus workloads take proposals, not ops".into());
                }
                let mut proposers = std::collections::BTreeSet::new();
                for p in &self.workload.proposals {
                    if !valid_pid(p.process) {
                        return fail(format!("proposal names unknown process {}", p.process));
                    }
                    if !proposers.insert(p.process) {
                        return fail(format!("process {} proposes twice", p.process));
                    }
                }
            }
            WorkloadKind::Register | WorkloadKind::Replicated => {
                if !self.workload.proposals.is_empty() {
                    return fail("register workloads take ops, not proposals".into());
                }
                if !self.workload.ops.is_empty() && self.workload.random_ops > 0 {
                    return fail("use either scripted ops or random_ops, not both".into());
                }
                for op in &self.workload.ops {
                    if !valid_pid(op.process) {
                        return fail(format!("op names unknown process {}", op.process));
                    }
                    match op.kind {
                        OpKind::Write if op.arg.is_none() => {
                            return fail("write ops need an arg".into())
                        }
                        OpKind::Read if op.arg.is_some() => {
                            return fail("read ops take no arg".into())
                        }
                        _ => {}
                    }
                }
                if self.workload.kind == WorkloadKind::Register
                    && self.workload.max_slots.is_some()
                {
                    return fail("max_slots applies to replicated workloads only".into());
                }
                if self.max_slots() == 0 {
                    return fail("max_slots must be positive".into());
                }
            }
        }
        if self.workload.kind == WorkloadKind::Consensus && self.workload.max_slots.is_some() {
            return fail("max_slots applies to replicated workloads only".into());
        }

        if let Some(spam) = &self.attack.advance_spam {
            if !valid_pid(spam.process) {
                return fail(format!("spam names unknown process {}", spam.process));
            }
            if spam.period == 0 {
                return fail("spam period must be positive".into());
            }
            if self.workload.kind == WorkloadKind::Register {
                return fail("advance_spam needs a view-based workload".into());
            }
        }

        let timing_checks = [CheckName::ConsensusLiveness, CheckName::DecisionTiming];
        if self.synchrony.mode == SynchronyMode::Asynchronous
            && timing_checks.iter().any(|c| self.check_enabled(*c))
        {
            return fail("liveness and timing checks need the partial synchrony mode".into());
        }
        if self.needs_liveness_horizon() {
            match self.liveness_bound()? {
                None => {
                    return fail(
                        "consensus_liveness needs a connected core in the failure pattern".into(),
                    )
                }
                Some(bound) => {
                    if self.run.horizon < bound {
                        return fail(format!(
                            "horizon {} is below the liveness sufficiency bound {bound}",
                            self.run.horizon
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Bundled scenario corpus, compiled in so the CLI works with no data files.
pub fn builtin(name: &str) -> Option<&'static str> {
    let text = match name {
        "fig1a" => include_str!("../scenarios/fig1a.toml"),
        "fig1b" => include_str!("../scenarios/fig1b.toml"),
        "fig1c" => include_str!("../scenarios/fig1c.toml"),
        "attack_flaky_leader" => include_str!("../scenarios/attack_flaky_leader.toml"),
        "stable_view_timing" => include_str!("../scenarios/stable_view_timing.toml"),
        "startup_all" => include_str!("../scenarios/startup_all.toml"),
        "relay_entry" => include_str!("../scenarios/relay_entry.toml"),
        "register_mixed" => include_str!("../scenarios/register_mixed.toml"),
        "replicated_basic" => include_str!("../scenarios/replicated_basic.toml"),
        "fuzz_minority_crash" => include_str!("../scenarios/fuzz_minority_crash.toml"),
        "fuzz_flaky" => include_str!("../scenarios/fuzz_flaky.toml"),
        "fuzz_partition" => include_str!("../scenarios/fuzz_partition.toml"),
        _ => return None,
    };
    Some(text)
}

pub fn builtin_names() -> &'static [&'static str] {
    &[
        "fig1a",
        "fig1b",
        "fig1c",
        "attack_flaky_leader",
        "stable_view_timing",
        "startup_all",
        "relay_entry",
        "register_mixed",
        "replicated_basic",
        "fuzz_minority_crash",
        "fuzz_flaky",
        "fuzz_partition",
    ]
}
