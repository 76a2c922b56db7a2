//! Replicated single-writer-per-op atomic register, gossip-style ABD variant.
//!
//! Both read and write run a query phase (collect value/tag from a majority)
//! and a propagate phase (push the chosen value/tag to a majority). State is
//! four bounded arrays gossiped whole in periodic STATE messages; per-request
//! sequence numbers make every merge a strict keep-highest comparison.

use serde::{Deserialize, Serialize};

use crate::topology::ProcessId;

/// Write tag: `(counter, proposer)`, compared lexicographically. The initial
/// register value carries `(0, 0)`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Tag(pub u64, pub u32);

impl Tag {
    pub fn zero() -> Self {
        Tag(0, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegStatus {
    Idle,
    RdQuery,
    WrQuery,
    RdPropagate,
    WrPropagate,
    RdDone,
    WrDone,
}

/// One query acknowledgement: the acker's value and tag, bound to the
/// requester's sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryAck {
    pub val: u64,
    pub tag: Tag,
    pub seq: u64,
}

/// A propagate request: value and tag to adopt, bound to the requester's
/// sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WriteEntry {
    pub val: u64,
    pub tag: Tag,
    pub seq: u64,
}

/// Whole-state gossip message. Matrices are indexed `[acker][requester]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegStateMsg {
    pub query: Vec<u64>,
    pub query_ack: Vec<Vec<QueryAck>>,
    pub write: Vec<WriteEntry>,
    pub write_ack: Vec<Vec<u64>>,
}

/// Completion of the pending operation, with the tag the operation took
/// effect at (the linearization witness).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegisterOutput {
    ReadDone { val: u64, tag: Tag },
    WriteDone { tag: Tag },
}

#[derive(Debug, Clone)]
pub struct Register {
    me: ProcessId,
    n: usize,
    pub val: u64,
    pub tag: Tag,
    pub seq: u64,
    pub status: RegStatus,
    pub wr_val: u64,
    /// Latest query sequence number per requester.
    pub query: Vec<u64>,
    /// `query_ack[j][k]`: j's acknowledgement of k's query.
    pub query_ack: Vec<Vec<QueryAck>>,
    /// Latest propagate request per requester.
    pub write: Vec<WriteEntry>,
    /// `write_ack[j][k]`: j's acknowledgement of k's propagate request.
    pub write_ack: Vec<Vec<u64>>,
}

impl Register {
    pub fn new(me: ProcessId, n: usize) -> Self {
        let ack = QueryAck {
            val: 0,
            tag: Tag::zero(),
            seq: 0,
        };
        let wr = WriteEntry {
            val: 0,
            tag: Tag::zero(),
            seq: 0,
        };
        Register {
            me,
            n,
            val: 0,
            tag: Tag::zero(),
            seq: 0,
            status: RegStatus::Idle,
            wr_val: 0,
            query: vec![0; n],
            query_ack: vec![vec![ack; n]; n],
            write: vec![wr; n],
            write_ack: vec![vec![0; n]; n],
        }
    }

    /// Start a read. One outstanding operation per process.
    pub fn read(&mut self) -> Vec<RegisterOutput> {
        assert_eq!(self.status, RegStatus::Idle, "operation already outstanding");
        self.seq += 1;
        self.query[self.me.index()] = self.seq;
        self.status = RegStatus::RdQuery;
        self.run_rules()
    }

    /// Start a write of `v`.
    pub fn write(&mut self, v: u64) -> Vec<RegisterOutput> {
        assert_eq!(self.status, RegStatus::Idle, "operation already outstanding");
        self.wr_val = v;
        self.seq += 1;
        self.query[self.me.index()] = self.seq;
        self.status = RegStatus::WrQuery;
        self.run_rules()
    }

    /// Acknowledge a completed operation, releasing the slot for the next.
    pub fn finish_op(&mut self) {
        assert!(matches!(self.status, RegStatus::RdDone | RegStatus::WrDone));
        self.status = RegStatus::Idle;
    }

    pub fn state_snapshot(&self) -> RegStateMsg {
        RegStateMsg {
            query: self.query.clone(),
            query_ack: self.query_ack.clone(),
            write: self.write.clone(),
            write_ack: self.write_ack.clone(),
        }
    }

    /// Strict keep-highest-seq merge over all four structures, then the local
    /// rules run to fixpoint.
    pub fn on_state(&mut self, m: &RegStateMsg) -> Vec<RegisterOutput> {
        debug_assert_eq!(m.query.len(), self.n);
        for j in 0..self.n {
            if m.query[j] > self.query[j] {
                self.query[j] = m.query[j];
            }
            if m.write[j].seq > self.write[j].seq {
                self.write[j] = m.write[j];
            }
            for k in 0..self.n {
                if m.query_ack[j][k].seq > self.query_ack[j][k].seq {
                    self.query_ack[j][k] = m.query_ack[j][k];
                }
                if m.write_ack[j][k] > self.write_ack[j][k] {
                    self.write_ack[j][k] = m.write_ack[j][k];
                }
            }
        }
        self.run_rules()
    }

    fn run_rules(&mut self) -> Vec<RegisterOutput> {
        let mut out = Vec::new();
        loop {
            let fired = self.ack_queries()
                || self.apply_writes()
                || self.read_quorum()
                || self.write_quorum()
                || self.complete(&mut out);
            if !fired {
                break;
            }
        }
        out
    }

    /// Answer outstanding queries with the local value and tag.
    fn ack_queries(&mut self) -> bool {
        let i = self.me.index();
        let mut fired = false;
        for j in 0..self.n {
            if self.query[j] > self.query_ack[i][j].seq {
                self.query_ack[i][j] = QueryAck {
                    val: self.val,
                    tag: self.tag,
                    seq: self.query[j],
                };
                fired = true;
            }
        }
        fired
    }

    /// Adopt propagated values with a newer tag and acknowledge the request
    /// either way.
    fn apply_writes(&mut self) -> bool {
        let i = self.me.index();
        let mut fired = false;
        for j in 0..self.n {
            if self.write[j].seq > self.write_ack[i][j] {
                if self.write[j].tag > self.tag {
                    self.val = self.write[j].val;
                    self.tag = self.write[j].tag;
                }
                self.write_ack[i][j] = self.write[j].seq;
                fired = true;
            }
        }
        fired
    }

    fn query_quorum(&self) -> Option<Vec<usize>> {
        let i = self.me.index();
        let q: Vec<usize> = (0..self.n)
            .filter(|&j| self.query_ack[j][i].seq == self.seq)
            .collect();
        crate::is_majority(q.len(), self.n).then_some(q)
    }

    /// Read query phase done: adopt the maximal acknowledged tag and start
    /// propagating it.
    fn read_quorum(&mut self) -> bool {
        if self.status != RegStatus::RdQuery {
            return false;
        }
        let Some(q) = self.query_quorum() else {
            return false;
        };
        let i = self.me.index();
        let j = *q
            .iter()
            .max_by_key(|&&j| self.query_ack[j][i].tag)
            .unwrap();
        let ack = self.query_ack[j][i];
        self.val = ack.val;
        self.tag = ack.tag;
        self.status = RegStatus::RdPropagate;
        self.write[i] = WriteEntry {
            val: self.val,
            tag: self.tag,
            seq: self.seq,
        };
        true
    }

    /// Write query phase done: mint a tag above everything acknowledged and
    /// start propagating the new value.
    fn write_quorum(&mut self) -> bool {
        if self.status != RegStatus::WrQuery {
            return false;
        }
        let Some(q) = self.query_quorum() else {
            return false;
        };
        let i = self.me.index();
        let Tag(t, _) = q.iter().map(|&j| self.query_ack[j][i].tag).max().unwrap();
        self.val = self.wr_val;
        self.tag = Tag(t + 1, self.me.0);
        self.status = RegStatus::WrPropagate;
        self.write[i] = WriteEntry {
            val: self.val,
            tag: self.tag,
            seq: self.seq,
        };
        true
    }

    /// Propagate phase done once a majority acknowledged the write entry.
    /// The completion witness is the entry this operation propagated; the
    /// register's own tag may already have moved past it under a concurrent
    /// higher-tagged write.
    fn complete(&mut self, out: &mut Vec<RegisterOutput>) -> bool {
        let i = self.me.index();
        let acks = (0..self.n)
            .filter(|&j| self.write_ack[j][i] == self.seq)
            .count();
        if !crate::is_majority(acks, self.n) {
            return false;
        }
        let entry = self.write[i];
        match self.status {
            RegStatus::RdPropagate => {
                self.status = RegStatus::RdDone;
                out.push(RegisterOutput::ReadDone {
                    val: entry.val,
                    tag: entry.tag,
                });
                true
            }
            RegStatus::WrPropagate => {
                self.status = RegStatus::WrDone;
                out.push(RegisterOutput::WriteDone { tag: entry.tag });
                true
            }
            _ => false,
        }
    }

    /// Fixed-width serialized size of the protocol state, in bytes. Every
    /// field is counted at its reserved width, so the result depends only on
    /// `n` and must stay constant over a run.
    pub fn footprint_bytes(&self) -> usize {
        let tag = 12;
        let ack = 8 + tag + 8;
        let wr = 8 + tag + 8;
        8 + tag + 8 + 1 + 8
            + self.query.len() * 8
            + self.query_ack.len() * self.query_ack[0].len() * ack
            + self.write.len() * wr
            + self.write_ack.len() * self.write_ack[0].len() * 8
    }
}
