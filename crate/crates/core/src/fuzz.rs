//! Multi-seed sweeps over a scenario template.
//!
//! A template fixes the network, timing, and workload; its `[fuzz]` family
//! says which part of the failure pattern the driver fills in per seed.
//! [`derive`] instantiates one seed, [`sweep`] runs a seed range in parallel
//! and runs every enabled checker on each trace. Derivation is a pure
//! function of (template, seed), so a failing seed replays exactly.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use crate::checkers::{self, any_violation, Outcome, Verdict};
use crate::scenario::{
    CheckName, CrashSpec, FaultyChannelSpec, FaultyClass, FuzzFamily, MsgMatch, Scenario,
    ScriptAction, ScriptRule,
};
use crate::sim;
use crate::{hash_coords, hash_fraction, hash_in, Error, Result};

/// Domain separator; keeps fuzz choices independent of the simulator's
/// per-seed delay, drift, and workload streams.
const SALT_FUZZ: u64 = 0x20;

fn word(seed: u64, coords: &[u64]) -> u64 {
    hash_coords(seed, SALT_FUZZ, coords)
}

/// Instantiates the template's fuzz family for one seed and revalidates,
/// so a derived scenario obeys every rule a hand-written one does.
pub fn derive(template: &Scenario, seed: u64) -> Result<Scenario> {
    let mut sc = template.clone();
    sc.run.seed = seed;
    let n = sc.n as u64;
    match sc.fuzz.family {
        FuzzFamily::SeedOnly => {}
        FuzzFamily::MinorityCrash => {
            if !sc.failures.crashed.is_empty() {
                return Err(Error::Scenario(
                    "minority_crash templates must leave failures.crashed empty".into(),
                ));
            }
            let count = hash_in(word(seed, &[1]), (n - 1) / 2);
            let mut pool: Vec<u32> = (1..=sc.n as u32).collect();
            for k in 0..count {
                let idx = hash_in(word(seed, &[2, k]), pool.len() as u64 - 1);
                let process = pool.swap_remove(idx as usize);
                let at = hash_in(word(seed, &[3, process as u64]), sc.run.horizon / 2);
                sc.failures.crashed.push(CrashSpec {
                    process,
                    at: Some(at),
                });
            }
        }
        FuzzFamily::FlakyFringe => {
            if !sc.channels.faulty.is_empty() {
                return Err(Error::Scenario(
                    "flaky_fringe templates must leave channels.faulty empty".into(),
                ));
            }
            let victim = 1 + hash_in(word(seed, &[4]), n - 1) as u32;
            for p in 1..=sc.n as u32 {
                if p == victim {
                    continue;
                }
                for (from, to) in [(victim, p), (p, victim)] {
                    let rate =
                        0.1 + 0.8 * hash_fraction(word(seed, &[5, from as u64, to as u64]));
                    sc.channels.faulty.push(FaultyChannelSpec {
                        from,
                        to,
                        class: FaultyClass::Flaky,
                        rate: Some(rate),
                        rules: None,
                    });
                }
            }
        }
        FuzzFamily::ScriptedPartition => {
            if !sc.channels.faulty.is_empty() {
                return Err(Error::Scenario(
                    "scripted_partition templates must leave channels.faulty empty".into(),
                ));
            }
            if sc.n < 2 {
                return Err(Error::Scenario(
                    "scripted_partition needs at least two processes".into(),
                ));
            }
            // Proper nonempty subset: both blocks get at least one process.
            let mask = 1 + hash_in(word(seed, &[6]), (1u64 << n) - 3);
            let heal = hash_in(word(seed, &[7]), sc.synchrony.gst);
            let side = |p: u32| mask >> (p - 1) & 1;
            for from in 1..=sc.n as u32 {
                for to in 1..=sc.n as u32 {
                    if from == to || side(from) == side(to) {
                        continue;
                    }
                    sc.channels.faulty.push(FaultyChannelSpec {
                        from,
                        to,
                        class: FaultyClass::Flaky,
                        rate: None,
                        rules: Some(vec![ScriptRule {
                            msg: MsgMatch::Any,
                            action: ScriptAction::Drop,
                            after: None,
                            until: Some(heal),
                        }]),
                    });
                }
            }
        }
    }
    sc.validate()?;
    Ok(sc)
}

/// One failing seed, with the concrete scenario it ran so the failure can
/// be replayed from a file.
#[derive(Debug, Clone)]
pub struct FuzzFailure {
    pub seed: u64,
    pub verdicts: Vec<Verdict>,
    pub scenario_toml: String,
}

#[derive(Debug, Clone)]
pub struct FuzzReport {
    pub template: String,
    pub start_seed: u64,
    pub runs: u64,
    /// Verdict counts per (check, outcome) over every run.
    pub tally: BTreeMap<(CheckName, Outcome), u64>,
    pub failures: Vec<FuzzFailure>,
}

impl FuzzReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn count(&self, check: CheckName, outcome: Outcome) -> u64 {
        self.tally.get(&(check, outcome)).copied().unwrap_or(0)
    }
}

impl fmt::Display for FuzzReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}: {} runs from seed {}, {} failing",
            self.template,
            self.runs,
            self.start_seed,
            self.failures.len()
        )?;
        for (&(check, outcome), &count) in &self.tally {
            writeln!(f, "  {check} {outcome}: {count}")?;
        }
        for fail in &self.failures {
            for v in fail.verdicts.iter().filter(|v| v.outcome.is_violation()) {
                writeln!(f, "  seed {}: {v}", fail.seed)?;
            }
        }
        Ok(())
    }
}

/// Runs `count` seeds starting at `start_seed`, in parallel. Every enabled
/// checker runs on every trace; a run fails when any checker reports a
/// violation. Errors (schema, simulation) abort the sweep, they are bugs in
/// the template or the harness rather than findings.
pub fn sweep(template: &Scenario, start_seed: u64, count: u64) -> Result<FuzzReport> {
    let per_run: Vec<(u64, Vec<Verdict>, Option<String>)> = (0..count)
        .into_par_iter()
        .map(|k| {
            let seed = start_seed + k;
            let sc = derive(template, seed)?;
            let res = sim::run(&sc, seed)?;
            let verdicts = checkers::run_enabled(&sc, &res.trace)?;
            let toml = if any_violation(&verdicts) {
                Some(sc.to_toml_string()?)
            } else {
                None
            };
            Ok((seed, verdicts, toml))
        })
        .collect::<Result<_>>()?;

    let mut report = FuzzReport {
        template: template.name.clone(),
        start_seed,
        runs: count,
        tally: BTreeMap::new(),
        failures: Vec::new(),
    };
    for (seed, verdicts, toml) in per_run {
        for v in &verdicts {
            *report.tally.entry((v.check, v.outcome)).or_insert(0) += 1;
        }
        if let Some(scenario_toml) = toml {
            report.failures.push(FuzzFailure {
                seed,
                verdicts,
                scenario_toml,
            });
        }
    }
    Ok(report)
}
