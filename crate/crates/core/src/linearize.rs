//! Linearizability checking for register operation histories.
//!
//! Completed writes carry globally unique tags and every read reports the
//! tag it adopted, so the trace pins each read to the write it observed.
//! That reduces linearizability to a scheduling question: a write plus the
//! reads that observed it must form one contiguous block of the
//! linearization, reads of the initial value come before every write, and
//! blocks inherit real-time precedence from their members. The history is
//! linearizable exactly when those block constraints are acyclic.
//!
//! [`brute_force_register`] answers the same question by enumerating every
//! real-time-consistent permutation. It exists as an independent oracle for
//! small histories; the block checker must agree with it.

use std::collections::{BTreeMap, BTreeSet};

use crate::consensus::OpKind;
use crate::register::Tag;
use crate::topology::ProcessId;
use crate::SimTime;

/// Trace position of an invocation or response: records share integer
/// timestamps, so ties break on the global record sequence.
pub type Pos = (SimTime, u64);

/// One register operation as reconstructed from a trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegOp {
    pub invoker: ProcessId,
    pub seq: u64,
    pub kind: OpKind,
    /// Written value; writes only.
    pub arg: Option<u64>,
    pub invoked: Pos,
    /// None while still pending when the trace ends.
    pub responded: Option<Pos>,
    /// Value returned; completed reads only.
    pub value: Option<u64>,
    /// Tag the operation settled on; completed ops only.
    pub tag: Option<Tag>,
}

impl RegOp {
    fn precedes(&self, other: &RegOp) -> bool {
        self.responded.is_some_and(|r| r < other.invoked)
    }
}

/// An operation admitted to the linearization: a completed op, or a pending
/// write some read observed. Reads carry the tag of the write they matched.
#[derive(Debug, Clone, Copy)]
struct Lin {
    write: bool,
    tag: Tag,
    invoked: Pos,
    responded: Option<Pos>,
}

impl Lin {
    fn precedes(&self, other: &Lin) -> bool {
        self.responded.is_some_and(|r| r < other.invoked)
    }
}

/// Resolves every read against the write it observed and settles which
/// pending writes took effect. Errors are outright violations: a value that
/// disagrees with its write, or a tag no write can account for.
fn match_history(ops: &[RegOp]) -> std::result::Result<Vec<Lin>, String> {
    let mut writes_by_tag: BTreeMap<Tag, usize> = BTreeMap::new();
    let mut pending_write: BTreeMap<u32, usize> = BTreeMap::new();
    for (i, op) in ops.iter().enumerate() {
        if op.kind != OpKind::Write {
            continue;
        }
        let who = op.invoker;
        if op.responded.is_none() {
            if pending_write.insert(who.0, i).is_some() {
                return Err(format!("{who} has two pending writes; ops are serial"));
            }
            continue;
        }
        let Some(tag) = op.tag else {
            return Err(format!("completed write {who}/{} has no tag", op.seq));
        };
        if tag.1 != who.0 {
            return Err(format!(
                "write {who}/{} settled on tag {tag:?} minted by another process",
                op.seq
            ));
        }
        if let Some(&j) = writes_by_tag.get(&tag) {
            return Err(format!(
                "writes {}/{} and {who}/{} share tag {tag:?}",
                ops[j].invoker, ops[j].seq, op.seq
            ));
        }
        writes_by_tag.insert(tag, i);
    }

    // Tags adopted by reads that no completed write minted must belong to
    // the (single) pending write of the minting process.
    let mut adopted_pending: BTreeMap<usize, Tag> = BTreeMap::new();
    for op in ops {
        if op.kind != OpKind::Read || op.responded.is_none() {
            continue;
        }
        let who = op.invoker;
        let Some(tag) = op.tag else {
            return Err(format!("completed read {who}/{} has no tag", op.seq));
        };
        let wrote = if tag == Tag::zero() {
            if op.value != Some(0) {
                return Err(format!(
                    "read {who}/{} returned {:?} for the initial tag; the register starts at 0",
                    op.seq, op.value
                ));
            }
            continue;
        } else if let Some(&i) = writes_by_tag.get(&tag) {
            i
        } else if let Some(&i) = pending_write.get(&tag.1) {
            match adopted_pending.insert(i, tag) {
                Some(prev) if prev != tag => {
                    return Err(format!(
                        "reads attribute both {prev:?} and {tag:?} to the single \
                         pending write of p{}",
                        tag.1
                    ));
                }
                _ => i,
            }
        } else {
            return Err(format!(
                "read {who}/{} returned tag {tag:?}, which no write produced",
                op.seq
            ));
        };
        if op.value != ops[wrote].arg {
            return Err(format!(
                "read {who}/{} returned {:?} under tag {tag:?}, but that write put {:?}",
                op.seq, op.value, ops[wrote].arg
            ));
        }
        // A read cannot finish before the write it observed began.
        if op.precedes(&ops[wrote]) {
            return Err(format!(
                "read {who}/{} observed tag {tag:?} before that write was invoked",
                op.seq
            ));
        }
    }

    let mut lins = Vec::new();
    for (i, op) in ops.iter().enumerate() {
        let lin = match (op.kind, op.responded) {
            (OpKind::Write, Some(_)) => Lin {
                write: true,
                tag: op.tag.unwrap(),
                invoked: op.invoked,
                responded: op.responded,
            },
            // Unobserved pending writes may be deemed never to have taken
            // effect; observed ones are part of the history.
            (OpKind::Write, None) => match adopted_pending.get(&i) {
                Some(&tag) => Lin {
                    write: true,
                    tag,
                    invoked: op.invoked,
                    responded: None,
                },
                None => continue,
            },
            (OpKind::Read, Some(_)) => Lin {
                write: false,
                tag: op.tag.unwrap(),
                invoked: op.invoked,
                responded: op.responded,
            },
            (OpKind::Read, None) => continue,
        };
        lins.push(lin);
    }
    Ok(lins)
}

/// Checks that the history is linearizable as a single atomic register
/// initialized to 0. Errors carry the violation witness.
pub fn check_register(ops: &[RegOp]) -> std::result::Result<(), String> {
    let lins = match_history(ops)?;
    // One block per write tag; reads of the initial value form the zero
    // block, which must come before everything else.
    let blocks: BTreeSet<Tag> = lins.iter().map(|l| l.tag).collect();
    let zero = Tag::zero();
    let mut edges: BTreeMap<Tag, BTreeSet<Tag>> = BTreeMap::new();
    if blocks.contains(&zero) {
        for &b in &blocks {
            if b != zero {
                edges.entry(zero).or_default().insert(b);
            }
        }
    }
    for a in &lins {
        for b in &lins {
            if a.tag != b.tag && a.precedes(b) {
                edges.entry(a.tag).or_default().insert(b.tag);
            }
        }
    }

    // The blocks must admit a topological order.
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    let mut mark: BTreeMap<Tag, Mark> = blocks.iter().map(|&b| (b, Mark::New)).collect();
    fn visit(
        t: Tag,
        edges: &BTreeMap<Tag, BTreeSet<Tag>>,
        mark: &mut BTreeMap<Tag, Mark>,
    ) -> std::result::Result<(), Tag> {
        mark.insert(t, Mark::Open);
        for &next in edges.get(&t).into_iter().flatten() {
            match mark[&next] {
                Mark::Open => return Err(next),
                Mark::New => visit(next, edges, mark)?,
                Mark::Done => {}
            }
        }
        mark.insert(t, Mark::Done);
        Ok(())
    }
    for &b in &blocks {
        if mark[&b] == Mark::New {
            if let Err(t) = visit(b, &edges, &mut mark) {
                return Err(format!(
                    "no linearization: real-time order forces a cycle through \
                     the write block of tag {t:?}"
                ));
            }
        }
    }
    Ok(())
}

/// Exhaustive oracle: true iff some real-time-consistent permutation of the
/// matched history reads every tag from its latest preceding write. Only for
/// small histories; the search is factorial.
pub fn brute_force_register(ops: &[RegOp]) -> bool {
    let Ok(lins) = match_history(ops) else {
        return false;
    };
    assert!(lins.len() <= 12, "brute force is for small histories");
    fn search(lins: &[Lin], placed: &mut Vec<bool>, cur: Tag) -> bool {
        if placed.iter().all(|&p| p) {
            return true;
        }
        for i in 0..lins.len() {
            if placed[i] {
                continue;
            }
            // Real-time: an op may go next only once every op that finished
            // before it began has been placed.
            let blocked = (0..lins.len())
                .any(|j| !placed[j] && j != i && lins[j].precedes(&lins[i]));
            if blocked {
                continue;
            }
            if !lins[i].write && lins[i].tag != cur {
                continue;
            }
            placed[i] = true;
            let next = if lins[i].write { lins[i].tag } else { cur };
            if search(lins, placed, next) {
                return true;
            }
            placed[i] = false;
        }
        false
    }
    let mut placed = vec![false; lins.len()];
    search(&lins, &mut placed, Tag::zero())
}
