//! Acceptance suite. Runs every criterion in order and prints one verdict
//! line per criterion; exits nonzero if any fail. The heavyweight fuzz
//! corpora are built once up front and shared.
//!
//! Run directly with `cargo test --test acceptance` (the target has no
//! libtest harness, so the lines always print).

use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;
use viewsim::checkers::{self, any_violation, Outcome, Verdict};
use viewsim::fuzz::{self, FuzzReport};
use viewsim::linearize::{brute_force_register, check_register, RegOp};
use viewsim::scenario::{CheckName, Scenario};
use viewsim::sim;
use viewsim::topology::ProcessId;
use viewsim::trace::{EventBody, Payload};

const FUZZ_RUNS: u64 = 1000;
const REGISTER_RUNS: u64 = 500;

fn main() {
    eprintln!("building corpora ({FUZZ_RUNS} runs per fuzz family, {REGISTER_RUNS} register runs)");
    let corpus = Corpus::build();
    eprintln!("corpora ready");

    let criteria: [(u32, &str, fn(&Corpus)); 11] = [
        (1, "connected_core_fixtures", c01_connected_core_fixtures),
        (2, "consensus_safety_fuzz", c02_consensus_safety_fuzz),
        (3, "consensus_liveness_bound", c03_consensus_liveness_bound),
        (4, "stable_view_timing", c04_stable_view_timing),
        (5, "synchronizer_suite_and_mutations", c05_synchronizer_suite_and_mutations),
        (6, "validity_attack", c06_validity_attack),
        (7, "register_linearizability", c07_register_linearizability),
        (8, "register_liveness", c08_register_liveness),
        (9, "bounded_space", c09_bounded_space),
        (10, "reg_from_consensus", c10_reg_from_consensus),
        (11, "byte_identical_replays", c11_byte_identical_replays),
    ];

    let mut failed = 0;
    for (num, name, run) in criteria {
        match catch_unwind(AssertUnwindSafe(|| run(&corpus))) {
            Ok(()) => println!("ACCEPTANCE {num} {name}: PASS"),
            Err(panic) => {
                failed += 1;
                let msg = panic
                    .downcast_ref::<String>()
                    .map(String::as_str)
                    .or_else(|| panic.downcast_ref::<&str>().copied())
                    .unwrap_or("panic");
                println!("ACCEPTANCE {num} {name}: FAIL ({msg})");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

/// One register_mixed run's distilled evidence.
struct RegRun {
    seed: u64,
    verdicts: Vec<Verdict>,
    core: Vec<ProcessId>,
    ops: Vec<RegOp>,
}

struct Corpus {
    minority: FuzzReport,
    flaky: FuzzReport,
    partition: FuzzReport,
    register: Vec<RegRun>,
}

impl Corpus {
    fn build() -> Corpus {
        let sweep = |name: &str| {
            let template = Scenario::load_named(name).expect(name);
            let report = fuzz::sweep(&template, 0, FUZZ_RUNS).expect(name);
            eprintln!("  {report}");
            report
        };
        let minority = sweep("fuzz_minority_crash");
        let flaky = sweep("fuzz_flaky");
        let partition = sweep("fuzz_partition");

        let template = Scenario::load_named("register_mixed").unwrap();
        let register: Vec<RegRun> = (0..REGISTER_RUNS)
            .into_par_iter()
            .map(|seed| {
                let sc = fuzz::derive(&template, seed).unwrap();
                let res = sim::run(&sc, seed).unwrap();
                let verdicts = checkers::run_enabled(&sc, &res.trace).unwrap();
                let ops = checkers::collect_register_ops(&res.trace)
                    .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
                let core = sc.core_params().unwrap().expect("core exists").core;
                RegRun {
                    seed,
                    verdicts,
                    core,
                    ops,
                }
            })
            .collect();
        eprintln!("  register_mixed: {} runs", register.len());

        Corpus {
            minority,
            flaky,
            partition,
            register,
        }
    }

    fn fuzz_reports(&self) -> [(&str, &FuzzReport); 3] {
        [
            ("fuzz_minority_crash", &self.minority),
            ("fuzz_flaky", &self.flaky),
            ("fuzz_partition", &self.partition),
        ]
    }
}

fn p(i: u32) -> ProcessId {
    ProcessId(i)
}

fn run_scenario(sc: &Scenario, seed: u64) -> viewsim::sim::RunResult {
    sim::run(sc, seed).expect("simulation runs")
}

fn check_all(sc: &Scenario, trace: &viewsim::trace::Trace) -> Vec<Verdict> {
    checkers::run_enabled(sc, trace).expect("checkers run")
}

// Criterion 1: the figure topologies yield their published cores, exactly.
fn c01_connected_core_fixtures(_: &Corpus) {
    let expect = [
        ("fig1a", vec![p(1), p(2), p(3)]),
        ("fig1b", vec![p(1), p(3)]),
        ("fig1c", vec![p(1), p(3)]),
    ];
    for (name, want) in expect {
        let sc = Scenario::load_named(name).unwrap();
        let params = sc.core_params().unwrap().expect("core exists");
        assert_eq!(params.core, want, "{name}");
    }
}

// Criterion 2: zero agreement or validity violations across every fuzz
// family, 1000 seeds each.
fn c02_consensus_safety_fuzz(corpus: &Corpus) {
    for (name, report) in corpus.fuzz_reports() {
        assert_eq!(report.runs, FUZZ_RUNS, "{name}");
        assert_eq!(
            report.count(CheckName::ConsensusSafety, Outcome::Violation),
            0,
            "{name}"
        );
        assert_eq!(
            report.count(CheckName::ConsensusSafety, Outcome::Pass),
            FUZZ_RUNS,
            "{name}"
        );
    }
}

// Criterion 3: under partial synchrony every core member decides within the
// derived bound whenever every core member proposed. The two partial-mode
// families enable the liveness check; a core exists and every process
// proposes in each derived run, so every verdict must be conclusive.
fn c03_consensus_liveness_bound(corpus: &Corpus) {
    for (name, report) in [
        ("fuzz_flaky", &corpus.flaky),
        ("fuzz_partition", &corpus.partition),
    ] {
        assert_eq!(
            report.count(CheckName::ConsensusLiveness, Outcome::Violation),
            0,
            "{name}"
        );
        assert_eq!(
            report.count(CheckName::ConsensusLiveness, Outcome::Pass),
            FUZZ_RUNS,
            "{name}"
        );
    }
}

// Criterion 4: in the stable view scenario nobody in the core advances and
// every core decision lands within d + 3 * big_delta of the first entry.
fn c04_stable_view_timing(_: &Corpus) {
    let sc = Scenario::load_named("stable_view_timing").unwrap();
    let res = run_scenario(&sc, sc.run.seed);
    let v = checkers::run_check(&sc, &res.trace, CheckName::DecisionTiming).unwrap();
    assert_eq!(v.outcome, Outcome::Pass, "{v}");

    for seed in 1..=20 {
        let res = run_scenario(&sc, seed);
        let verdicts = check_all(&sc, &res.trace);
        assert!(!any_violation(&verdicts), "seed {seed}: {verdicts:?}");
    }
}

// Criterion 5: the synchronizer interface checks pass on every fuzz trace,
// and each deliberate synchronizer break is caught.
fn c05_synchronizer_suite_and_mutations(corpus: &Corpus) {
    for (name, report) in corpus.fuzz_reports() {
        assert_eq!(
            report.count(CheckName::Synchronizer, Outcome::Violation),
            0,
            "{name}"
        );
        assert_eq!(
            report.count(CheckName::Synchronizer, Outcome::Pass),
            FUZZ_RUNS,
            "{name}"
        );
    }

    let detected = |sc: &Scenario| {
        (1..=10).any(|seed| {
            let res = run_scenario(sc, seed);
            any_violation(&check_all(sc, &res.trace))
        })
    };
    let mut suppress = Scenario::load_named("relay_entry").unwrap();
    suppress.mutations.suppress_entry_broadcast = true;
    assert!(detected(&suppress), "suppressed entry rebroadcast undetected");

    let mut weak = Scenario::load_named("attack_flaky_leader").unwrap();
    weak.mutations.weak_majority = true;
    assert!(detected(&weak), "weak majority threshold undetected");
}

// Criterion 6: a lone spammer whose wishes reach the core never drags core
// members past the view they decided in.
fn c06_validity_attack(_: &Corpus) {
    let sc = Scenario::load_named("attack_flaky_leader").unwrap();
    let core = sc.core_params().unwrap().unwrap().core;
    assert_eq!(core, vec![p(1), p(3)]);
    let spammer = p(2);

    for seed in 1..=5 {
        let res = run_scenario(&sc, seed);
        let records = &res.trace.records;
        let first_decide = records
            .iter()
            .find(|r| core.contains(&r.process) && matches!(r.body, EventBody::Decide { .. }))
            .unwrap_or_else(|| panic!("seed {seed}: core never decided"));
        let decided_view = match first_decide.body {
            EventBody::Decide { view, .. } => view,
            _ => unreachable!(),
        };

        for r in records.iter().filter(|r| core.contains(&r.process)) {
            if let EventBody::EnterView { view } = r.body {
                assert!(
                    view <= decided_view,
                    "seed {seed}: {} entered view {view} past the decided view {decided_view}",
                    r.process
                );
            }
        }

        // The attack premises: the spammer kept advancing after the
        // decision and its wishes still reached the core.
        let spam_after = records.iter().any(|r| {
            r.process == spammer
                && r.seq > first_decide.seq
                && matches!(r.body, EventBody::Advance { .. })
        });
        assert!(spam_after, "seed {seed}: spammer went quiet");
        let late_wish_ids: Vec<u64> = records
            .iter()
            .filter(|r| r.process == spammer && r.seq > first_decide.seq)
            .filter_map(|r| match &r.body {
                EventBody::Send {
                    to,
                    msg_id,
                    payload: Payload::Wish(_),
                } if core.contains(to) => Some(*msg_id),
                _ => None,
            })
            .collect();
        let delivered = records.iter().any(|r| {
            core.contains(&r.process)
                && matches!(&r.body, EventBody::Deliver { from, msg_id }
                    if *from == spammer && late_wish_ids.contains(msg_id))
        });
        assert!(delivered, "seed {seed}: no spam wish reached the core");
    }
}

// Criterion 7: every register_mixed history is linearizable, and on small
// histories the tag-based checker agrees with exhaustive search.
fn c07_register_linearizability(corpus: &Corpus) {
    assert_eq!(corpus.register.len(), REGISTER_RUNS as usize);
    for run in &corpus.register {
        assert!(
            !any_violation(&run.verdicts),
            "seed {}: {:?}",
            run.seed,
            run.verdicts
        );
        let lin = run
            .verdicts
            .iter()
            .find(|v| v.check == CheckName::RegisterLinearizable)
            .expect("check enabled");
        assert_eq!(lin.outcome, Outcome::Pass, "seed {}: {lin}", run.seed);
    }

    // Small-history agreement: one op per surviving process keeps every
    // history within exhaustive range.
    let mut small = Scenario::load_named("register_mixed").unwrap();
    small.workload.random_ops = 1;
    small.validate().unwrap();
    let mut checked = 0;
    for seed in 0..100 {
        let res = run_scenario(&small, seed);
        let ops = checkers::collect_register_ops(&res.trace).unwrap();
        assert!(ops.len() <= 6, "seed {seed}: {} ops", ops.len());
        let tag_based = check_register(&ops).is_ok();
        let exhaustive = brute_force_register(&ops);
        assert_eq!(tag_based, exhaustive, "seed {seed}: checkers disagree");
        assert!(tag_based, "seed {seed}: history not linearizable");
        checked += 1;
    }
    assert_eq!(checked, 100);
}

// Criterion 8: every operation a core member invokes completes.
fn c08_register_liveness(corpus: &Corpus) {
    let mut completed = 0usize;
    for run in &corpus.register {
        for op in &run.ops {
            if run.core.contains(&op.invoker) {
                assert!(
                    op.responded.is_some(),
                    "seed {}: {} op {} never responded",
                    run.seed,
                    op.invoker,
                    op.seq
                );
                completed += 1;
            }
        }
    }
    // 4 core members, 4 ops each, every run.
    assert_eq!(completed, corpus.register.len() * 16);
}

// Criterion 9: protocol state footprints are flat across the run for all
// three machine kinds.
fn c09_bounded_space(_: &Corpus) {
    for name in ["relay_entry", "fig1a", "register_mixed"] {
        let sc = Scenario::load_named(name).unwrap();
        let res = run_scenario(&sc, sc.run.seed);
        assert_eq!(res.footprints.len(), 3, "{name}");
        let first = &res.footprints[0].per_process;
        for sample in &res.footprints[1..] {
            assert_eq!(&sample.per_process, first, "{name}");
        }
    }
}

// Criterion 10: the consensus-backed register stays a safe register under
// both a two-writer race and a fully sequential schedule, 100 seeds each.
fn c10_reg_from_consensus(_: &Corpus) {
    let race = Scenario::load_named("replicated_basic").unwrap();

    let mut sequential = race.clone();
    for (k, op) in sequential.workload.ops.iter_mut().enumerate() {
        op.at = 400 + 1200 * k as u64;
    }
    sequential.name = "replicated_sequential".into();
    sequential.validate().unwrap();

    for (label, sc) in [("race", &race), ("sequential", &sequential)] {
        let report = fuzz::sweep(sc, 0, 100).expect(label);
        assert!(report.ok(), "{label}: {report}");
        assert_eq!(
            report.count(CheckName::ReplicatedSafeRegister, Outcome::Pass),
            100,
            "{label}"
        );
        assert_eq!(
            report.count(CheckName::ConsensusSafety, Outcome::Pass),
            100,
            "{label}"
        );
    }
}

// Criterion 11: a (scenario, seed) pair replays to the same bytes on disk.
fn c11_byte_identical_replays(_: &Corpus) {
    let dir = tempfile::tempdir().unwrap();
    let mut subjects: Vec<(String, Scenario)> = ["fig1a", "attack_flaky_leader", "register_mixed", "replicated_basic"]
        .iter()
        .map(|&n| (n.to_string(), Scenario::load_named(n).unwrap()))
        .collect();
    for (template, seed) in [("fuzz_flaky", 17), ("fuzz_partition", 23)] {
        let t = Scenario::load_named(template).unwrap();
        subjects.push((format!("{template}@{seed}"), fuzz::derive(&t, seed).unwrap()));
    }

    for (label, sc) in &subjects {
        let mut bytes = Vec::new();
        for pass in 0..2 {
            let res = run_scenario(sc, sc.run.seed);
            let path = dir.path().join(format!("{label}-{pass}.trace"));
            res.trace.write_to(&path).unwrap();
            bytes.push(std::fs::read(&path).unwrap());
        }
        assert_eq!(bytes[0], bytes[1], "{label}: replay diverged");
    }
}
