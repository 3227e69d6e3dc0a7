//! The bus: one ordered append point, per-layer inboxes, a control plane for
//! interventions, a read-only tap for monitors, and the audit trail.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::envelope::Envelope;
use super::layer::{Direction, LayerId, MessageKind};
use super::rules::{authorize, Decision, DenyReason};
use crate::docs::Payload;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditVerdict {
    Delivered,
    Rejected,
    Censored,
}

/// One record per publish attempt. `seq` equals the attempt's sequence
/// number, so record `n` lives at index `n - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub seq: u64,
    pub verdict: AuditVerdict,
    pub reason: String,
    pub envelope: Envelope,
    /// For a censor, the full envelope that was censored.
    pub subject: Option<Envelope>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Receipt {
    pub seq: u64,
    /// Held envelopes sit in the inbox until a monitor releases them.
    pub held: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PublishError {
    #[error("envelope {seq} is malformed: {reason}")]
    Validation { seq: u64, reason: &'static str },
    #[error("envelope {seq} rejected: {reason}")]
    Rejected { seq: u64, reason: DenyReason },
}

impl PublishError {
    pub fn seq(&self) -> u64 {
        match self {
            PublishError::Validation { seq, .. } | PublishError::Rejected { seq, .. } => *seq,
        }
    }
}

/// Identity presented when requesting a tap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Caller {
    Layer(LayerId),
    Environment,
    TraceRecorder,
}

impl fmt::Display for Caller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Caller::Layer(l) => l.fmt(f),
            Caller::Environment => f.write_str("Environment"),
            Caller::TraceRecorder => f.write_str("TraceRecorder"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{caller} is not registered as a monitor")]
pub struct PrivilegeError {
    pub caller: String,
}

/// Read cursor over delivered envelopes. Only monitors can obtain one.
#[derive(Debug, Clone)]
pub struct Tap {
    cursor: usize,
    caller: Caller,
}

impl Tap {
    pub fn caller(&self) -> Caller {
        self.caller
    }

    pub fn position(&self) -> usize {
        self.cursor
    }
}

#[derive(Debug, Clone, PartialEq)]
struct InboxEntry {
    envelope: Envelope,
    held: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CensorOutcome {
    Removed,
    Late,
}

#[derive(Debug, Clone)]
pub struct Bus {
    next_seq: u64,
    inboxes: [VecDeque<InboxEntry>; 6],
    control: [VecDeque<Envelope>; 6],
    audit: Vec<AuditRecord>,
    delivered: Vec<u64>,
    gated: BTreeSet<MessageKind>,
    processed: BTreeSet<u64>,
    drained: usize,
}

impl Default for Bus {
    fn default() -> Self {
        Bus::new()
    }
}

impl Bus {
    pub fn new() -> Self {
        Bus {
            next_seq: 1,
            inboxes: Default::default(),
            control: Default::default(),
            audit: Vec::new(),
            delivered: Vec::new(),
            gated: BTreeSet::new(),
            processed: BTreeSet::new(),
            drained: 0,
        }
    }

    /// Kinds held for monitor review before their target may process them.
    pub fn with_gate(mut self, kinds: impl IntoIterator<Item = MessageKind>) -> Self {
        self.gated = kinds.into_iter().collect();
        self
    }

    pub fn gated_kinds(&self) -> &BTreeSet<MessageKind> {
        &self.gated
    }

    fn validate(envelope: &Envelope) -> Result<(), &'static str> {
        if !envelope.salience.is_finite() || !(0.0..=1.0).contains(&envelope.salience) {
            return Err("salience-out-of-range");
        }
        if envelope.direction != Direction::between(envelope.source, envelope.target) {
            return Err("direction-mismatch");
        }
        if envelope.kind != envelope.payload.kind() {
            return Err("payload-kind-mismatch");
        }
        Ok(())
    }

    fn record(
        &mut self,
        verdict: AuditVerdict,
        reason: String,
        envelope: Envelope,
        subject: Option<Envelope>,
    ) {
        self.audit.push(AuditRecord {
            seq: envelope.seq,
            verdict,
            reason,
            envelope,
            subject,
        });
    }

    pub fn publish(&mut self, mut envelope: Envelope) -> Result<Receipt, PublishError> {
        let seq = self.next_seq;
        self.next_seq += 1;
        envelope.seq = seq;

        if let Err(reason) = Bus::validate(&envelope) {
            self.record(AuditVerdict::Rejected, format!("invalid:{reason}"), envelope, None);
            return Err(PublishError::Validation { seq, reason });
        }
        if let Decision::Deny(reason) = authorize(envelope.source, envelope.target, envelope.kind)
        {
            self.record(AuditVerdict::Rejected, reason.to_string(), envelope, None);
            return Err(PublishError::Rejected { seq, reason });
        }

        let slot = envelope.target.index();
        match envelope.kind {
            MessageKind::Censor => {
                let Payload::Censor(doc) = &envelope.payload else {
                    unreachable!("validated kind")
                };
                let subject_seq = doc.subject;
                let outcome = self.remove_from_inbox(envelope.target, subject_seq);
                let subject = self.lookup(subject_seq).cloned();
                let reason = match outcome {
                    CensorOutcome::Removed => "censored",
                    CensorOutcome::Late => "late-censor",
                };
                self.record(AuditVerdict::Censored, reason.into(), envelope, subject);
                Ok(Receipt { seq, held: false })
            }
            MessageKind::Halt | MessageKind::Reboot => {
                self.control[slot].push_back(envelope.clone());
                self.record(AuditVerdict::Delivered, "control-plane".into(), envelope, None);
                self.delivered.push(seq);
                Ok(Receipt { seq, held: false })
            }
            kind => {
                let held = self.gated.contains(&kind);
                self.inboxes[slot].push_back(InboxEntry {
                    envelope: envelope.clone(),
                    held,
                });
                let reason = if held { "held-for-review" } else { "ok" };
                self.record(AuditVerdict::Delivered, reason.into(), envelope, None);
                self.delivered.push(seq);
                Ok(Receipt { seq, held })
            }
        }
    }

    fn remove_from_inbox(&mut self, target: LayerId, seq: u64) -> CensorOutcome {
        let inbox = &mut self.inboxes[target.index()];
        match inbox.iter().position(|e| e.envelope.seq == seq) {
            Some(pos) => {
                inbox.remove(pos);
                CensorOutcome::Removed
            }
            None => CensorOutcome::Late,
        }
    }

    /// The envelope published with `seq`, whatever its verdict.
    pub fn lookup(&self, seq: u64) -> Option<&Envelope> {
        let idx = usize::try_from(seq).ok()?.checked_sub(1)?;
        self.audit.get(idx).map(|r| &r.envelope)
    }

    pub fn tap(&self, caller: Caller) -> Result<Tap, PrivilegeError> {
        match caller {
            Caller::Layer(LayerId::Aspirational) | Caller::TraceRecorder => {
                Ok(Tap { cursor: 0, caller })
            }
            other => Err(PrivilegeError {
                caller: other.to_string(),
            }),
        }
    }

    /// Delivered envelopes not yet seen through this tap, in seq order.
    pub fn read_tap(&self, tap: &mut Tap) -> Vec<Envelope> {
        let out = self.delivered[tap.cursor..]
            .iter()
            .filter_map(|&s| self.lookup(s).cloned())
            .collect();
        tap.cursor = self.delivered.len();
        out
    }

    /// Lets a held envelope through to its target's handler.
    pub fn release(&mut self, _tap: &Tap, seq: u64) -> bool {
        for inbox in &mut self.inboxes {
            if let Some(entry) = inbox.iter_mut().find(|e| e.envelope.seq == seq) {
                let was = entry.held;
                entry.held = false;
                return was;
            }
        }
        false
    }

    pub fn is_held(&self, seq: u64) -> bool {
        self.inboxes
            .iter()
            .flatten()
            .any(|e| e.envelope.seq == seq && e.held)
    }

    /// First envelope in the inbox that is not held for review.
    pub fn next_ready(&self, layer: LayerId) -> Option<u64> {
        self.inboxes[layer.index()]
            .iter()
            .find(|e| !e.held)
            .map(|e| e.envelope.seq)
    }

    /// Removes an envelope from the inbox for handling.
    pub fn take(&mut self, layer: LayerId, seq: u64) -> Option<Envelope> {
        let inbox = &mut self.inboxes[layer.index()];
        let pos = inbox.iter().position(|e| e.envelope.seq == seq)?;
        let entry = inbox.remove(pos)?;
        self.processed.insert(seq);
        Some(entry.envelope)
    }

    pub fn take_control(&mut self, layer: LayerId) -> Option<Envelope> {
        self.control[layer.index()].pop_front()
    }

    pub fn inbox(&self, layer: LayerId) -> impl Iterator<Item = &Envelope> {
        self.inboxes[layer.index()].iter().map(|e| &e.envelope)
    }

    pub fn inbox_len(&self, layer: LayerId) -> usize {
        self.inboxes[layer.index()].len()
    }

    pub fn control_len(&self, layer: LayerId) -> usize {
        self.control[layer.index()].len()
    }

    pub fn was_processed(&self, seq: u64) -> bool {
        self.processed.contains(&seq)
    }

    /// No envelope waiting anywhere, held or not.
    pub fn is_quiet(&self) -> bool {
        self.inboxes.iter().all(VecDeque::is_empty) && self.control.iter().all(VecDeque::is_empty)
    }

    pub fn audit(&self) -> &[AuditRecord] {
        &self.audit
    }

    /// Audit records appended since the previous call.
    pub fn drain_new_audit(&mut self) -> Vec<AuditRecord> {
        let out = self.audit[self.drained..].to_vec();
        self.drained = self.audit.len();
        out
    }

    /// Number of envelopes delivered so far, control plane included.
    pub fn delivered_len(&self) -> usize {
        self.delivered.len()
    }

    pub fn attempts(&self) -> u64 {
        self.next_seq - 1
    }
}
