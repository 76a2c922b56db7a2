//! Trace format: the simulator's observable output.
//!
//! A trace is a header line followed by one JSON record per line. Records
//! are totally ordered by `seq`, which breaks ties among events that share
//! a timestamp. Every record names the process it happened at; message
//! payloads appear only on `send` records and deliveries refer back to the
//! send by `msg_id`, so a trace is replayable without duplicating state.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::consensus::{OpKind, StateMsg, Value};
use crate::register::{RegStateMsg, Tag};
use crate::sync::WishMsg;
use crate::topology::ProcessId;
use crate::{Error, Result, SimTime, View};

/// Bumped whenever the record schema changes shape.
pub const TRACE_VERSION: u32 = 1;

/// First line of a trace file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub version: u32,
    pub scenario: String,
    pub seed: u64,
    pub n: usize,
}

/// One observable event. No `deny_unknown_fields` here: serde cannot
/// combine it with the flattened body, so stray record fields pass through.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Global sequence number; unique and monotone across the whole trace.
    pub seq: u64,
    pub time: SimTime,
    /// Process the event happened at.
    pub process: ProcessId,
    #[serde(flatten)]
    pub body: EventBody,
}

/// Message payloads carried on `send` records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "msg", rename_all = "snake_case")]
pub enum Payload {
    Wish(WishMsg),
    ConsensusState { slot: u64, state: StateMsg },
    RegisterState(RegStateMsg),
}

impl Payload {
    pub fn kind(&self) -> MsgKind {
        match self {
            Payload::Wish(_) => MsgKind::Wish,
            Payload::ConsensusState { .. } => MsgKind::ConsensusState,
            Payload::RegisterState(_) => MsgKind::RegisterState,
        }
    }
}

/// Payload class, used by scripted channel policies to match messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MsgKind {
    Wish,
    ConsensusState,
    RegisterState,
}

/// Why a message was dropped. Decided at send time, attributed to the sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Disconnected,
    Flaky,
    PreStabilize,
}

/// Timers a process can arm. Only the view timeout exists today.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimerKind {
    ViewTimeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(deny_unknown_fields)]
pub enum EventBody {
    /// Message handed to the network.
    Send {
        to: ProcessId,
        msg_id: u64,
        payload: Payload,
    },
    /// Message arrived; `msg_id` refers to the matching send.
    Deliver { from: ProcessId, msg_id: u64 },
    /// Message discarded by the channel.
    Drop {
        to: ProcessId,
        msg_id: u64,
        reason: DropReason,
    },
    /// Process halted; nothing from it may appear later.
    Crash,
    /// Timer armed for `duration` local ticks. `view` is the view whose
    /// timeout this is, when the timer guards one.
    TimerSet {
        timer: TimerKind,
        duration: u64,
        view: Option<View>,
    },
    TimerFire { timer: TimerKind },
    /// Synchronizer moved the process into `view`.
    EnterView { view: View },
    /// Process asked the synchronizer to leave `view` (its current view at
    /// the time of the call; 0 on startup).
    Advance { view: View },
    /// Consensus proposal submitted at this process.
    Propose { slot: u64, value: Value },
    /// Consensus decided `value` for `slot`; `view` is the process's view at
    /// the moment of decision.
    Decide { slot: u64, view: View, value: Value },
    /// Client operation started. `op` numbers operations per process.
    Invoke {
        op: u64,
        #[serde(rename = "op_kind")]
        kind: OpKind,
        arg: Option<u64>,
    },
    /// Client operation finished. Reads carry the value they returned;
    /// register ops carry the tag they settled on.
    Respond {
        op: u64,
        #[serde(rename = "op_kind")]
        kind: OpKind,
        value: Option<u64>,
        tag: Option<Tag>,
    },
}

/// A full trace held in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new(scenario: &str, seed: u64, n: usize) -> Self {
        Trace {
            header: TraceHeader {
                version: TRACE_VERSION,
                scenario: scenario.to_string(),
                seed,
                n,
            },
            records: Vec::new(),
        }
    }

    /// Timestamp of the last record, or 0 for an empty trace. Checkers use
    /// this as the effective horizon.
    pub fn end_time(&self) -> SimTime {
        self.records.last().map(|r| r.time).unwrap_or(0)
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, &self.header).map_err(io_err)?;
        w.write_all(b"\n")?;
        for rec in &self.records {
            serde_json::to_writer(&mut w, rec).map_err(io_err)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Trace> {
        let file = File::open(path)?;
        let mut lines = BufReader::new(file).lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::Trace("empty trace file".into()))??;
        let header: TraceHeader = serde_json::from_str(&first)
            .map_err(|e| Error::Trace(format!("bad header: {e}")))?;
        if header.version != TRACE_VERSION {
            return Err(Error::Trace(format!(
                "trace version {} unsupported (expected {})",
                header.version, TRACE_VERSION
            )));
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TraceRecord = serde_json::from_str(&line)
                .map_err(|e| Error::Trace(format!("record {}: {e}", i + 2)))?;
            records.push(rec);
        }
        Ok(Trace { header, records })
    }
}

fn io_err(e: serde_json::Error) -> Error {
    Error::Trace(format!("serialize: {e}"))
}
