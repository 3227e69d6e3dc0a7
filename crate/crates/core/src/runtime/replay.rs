//! Re-executes a recorded run from its header and checks every line of the
//! recording against the re-execution.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use super::trace::{self, EndStatus, TraceRecord};
use super::Machine;
use crate::cognition::RuleEngine;
use crate::messaging::LayerId;
use crate::predicate::Facts;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("trace corrupt at line {line} (last good seq {last_good_seq}): {detail}")]
    Corrupt {
        line: usize,
        last_good_seq: u64,
        detail: String,
    },
    #[error("only rule cognition can be replayed; the trace used `{0}`")]
    Unsupported(String),
    #[error("trace header is invalid: {0}")]
    Config(String),
}

/// Layer states reconstructed from a trace.
#[derive(Default)]
pub struct Replayed {
    pub status: Option<EndStatus>,
    pub snapshots: BTreeMap<LayerId, serde_json::Value>,
    pub world: Facts,
    pub lines: usize,
    pub machine: Option<Machine>,
}

fn audit_seq(line: &str) -> Option<u64> {
    match TraceRecord::parse(line).ok()? {
        TraceRecord::Audit { seq, .. } => Some(seq),
        _ => None,
    }
}

pub fn replay(text: &str) -> Result<Replayed, ReplayError> {
    let recorded = trace::lines(text);
    let Some(first) = recorded.first() else {
        return Ok(Replayed::default());
    };
    let header = match TraceRecord::parse(first) {
        Ok(TraceRecord::Header(h)) => *h,
        Ok(_) => {
            return Err(ReplayError::Corrupt {
                line: 1,
                last_good_seq: 0,
                detail: "first record is not a header".into(),
            })
        }
        Err(e) => {
            return Err(ReplayError::Corrupt {
                line: 1,
                last_good_seq: 0,
                detail: e.to_string(),
            })
        }
    };
    if header.cognition != "rule" {
        return Err(ReplayError::Unsupported(header.cognition));
    }
    let mut machine =
        Machine::new(header, Arc::new(RuleEngine::new())).map_err(|e| ReplayError::Config(e.to_string()))?;
    let status = machine.run();

    let produced = machine.lines();
    let mut last_good_seq = 0;
    for i in 0..recorded.len().max(produced.len()) {
        let line = i + 1;
        match (recorded.get(i), produced.get(i)) {
            (Some(r), Some(p)) if *r == p.as_str() => {
                if let Some(seq) = audit_seq(r) {
                    last_good_seq = seq;
                }
            }
            (Some(_), Some(_)) => {
                return Err(ReplayError::Corrupt {
                    line,
                    last_good_seq,
                    detail: "recorded line differs from re-execution".into(),
                })
            }
            (None, Some(_)) => {
                return Err(ReplayError::Corrupt {
                    line,
                    last_good_seq,
                    detail: "trace is truncated".into(),
                })
            }
            (Some(_), None) => {
                return Err(ReplayError::Corrupt {
                    line,
                    last_good_seq,
                    detail: "trace continues past the end of the run".into(),
                })
            }
            (None, None) => unreachable!("loop bound"),
        }
    }
    Ok(Replayed {
        status: Some(status),
        snapshots: machine.layers().snapshots(),
        world: machine.house().oracle_snapshot(),
        lines: recorded.len(),
        machine: Some(machine),
    })
}

/// The final snapshot record of a trace, if the run reached one.
pub fn final_snapshot(text: &str) -> Option<(BTreeMap<LayerId, serde_json::Value>, Facts)> {
    trace::lines(text).into_iter().rev().find_map(|l| match TraceRecord::parse(l).ok()? {
        TraceRecord::Snapshot { layers, world, .. } => Some((layers, world)),
        _ => None,
    })
}
