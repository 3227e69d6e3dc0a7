//! Filtered, human-readable views over a trace.

use thiserror::Error;

use super::trace::{self, TraceRecord};
use crate::docs::{OutcomeStatus, Payload, TelemetryDoc};
use crate::messaging::{Endpoint, Envelope, LayerId, MessageKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    Interventions,
    Roadmaps,
    Decisions,
    Outcomes,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Filters {
    pub layer: Option<LayerId>,
    pub kind: Option<MessageKind>,
    pub from: Option<u64>,
    pub to: Option<u64>,
    pub view: Option<View>,
}

impl Filters {
    fn envelope_only(&self) -> bool {
        self.layer.is_some() || self.kind.is_some() || self.view.is_some()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InspectError {
    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },
}

fn is_intervention(e: &Envelope) -> bool {
    e.source == Endpoint::Layer(LayerId::Aspirational)
        && matches!(
            e.kind,
            MessageKind::Censor
                | MessageKind::Directive
                | MessageKind::Halt
                | MessageKind::Reboot
                | MessageKind::MoralJudgment
        )
}

fn in_view(view: View, e: &Envelope) -> bool {
    match view {
        View::Interventions => is_intervention(e),
        View::Roadmaps => e.kind == MessageKind::Roadmap && e.source == Endpoint::Layer(LayerId::ExecutiveFunction),
        View::Decisions => {
            e.source == Endpoint::Layer(LayerId::CognitiveControl)
                && matches!(
                    e.payload,
                    Payload::Telemetry(TelemetryDoc::Decision { .. } | TelemetryDoc::Deliberation { .. })
                )
        }
        View::Outcomes => {
            e.kind == MessageKind::OutcomeSignal && e.source == Endpoint::Layer(LayerId::TaskProsecution)
        }
    }
}

fn detail(e: &Envelope) -> String {
    match &e.payload {
        Payload::Censor(c) => format!("subject #{}: {}", c.subject, c.rationale),
        Payload::Directive(d) => format!("exclude [{}]: {}", d.exclude.join(", "), d.rationale),
        Payload::Halt(h) => h.rationale.clone(),
        Payload::Reboot(r) => r.rationale.clone(),
        Payload::MoralJudgment(m) => format!(
            "{:?} for {}{}",
            m.judgment.verdict,
            m.for_layer,
            m.judgment
                .preferred_option
                .as_ref()
                .map(|p| format!(", prefer {p}"))
                .unwrap_or_default()
        ),
        Payload::Roadmap(r) => {
            let tasks: Vec<&str> = r.tasks.iter().map(|t| t.id.as_str()).collect();
            let deferred: Vec<String> = r.deferred.iter().map(|d| format!("{}({})", d.task_id, d.reason)).collect();
            format!("v{} tasks [{}] deferred [{}]", r.version, tasks.join(", "), deferred.join(", "))
        }
        Payload::OutcomeSignal(o) => {
            let status = match o.status {
                OutcomeStatus::Success => "success".to_string(),
                OutcomeStatus::Failure => format!("failure({})", o.reason.as_deref().unwrap_or("")),
            };
            format!(
                "{} {} commands {} energy {}",
                o.task_id, status, o.commands, o.resources_spent.energy
            )
        }
        Payload::Telemetry(TelemetryDoc::Decision {
            decision,
            task_id,
            detail,
        }) => format!("{decision} {} {detail}", task_id.as_deref().unwrap_or("-")),
        Payload::Telemetry(TelemetryDoc::Deliberation { deliberation }) => deliberation.record.clone(),
        _ => String::new(),
    }
}

fn render_audit(tick: u64, seq: u64, verdict: &str, reason: &str, e: &Envelope) -> String {
    let d = detail(e);
    let mut out = format!("#{seq} t={tick} {verdict} {} -> {} {} ({reason})", e.source, e.target, e.kind);
    if !d.is_empty() {
        out.push_str(": ");
        out.push_str(&d);
    }
    out
}

/// One output line per selected record. Without envelope filters or a view
/// the raw lines are returned; with them, only audit records, rendered.
pub fn inspect(text: &str, f: &Filters) -> Result<Vec<String>, InspectError> {
    let mut out = Vec::new();
    for (i, line) in trace::lines(text).into_iter().enumerate() {
        let record = TraceRecord::parse(line).map_err(|e| InspectError::Parse {
            line: i + 1,
            detail: e.to_string(),
        })?;
        let tick = record.tick();
        if f.from.is_some() || f.to.is_some() {
            let Some(t) = tick else { continue };
            if f.from.is_some_and(|from| t < from) || f.to.is_some_and(|to| t > to) {
                continue;
            }
        }
        match &record {
            TraceRecord::Audit {
                tick,
                seq,
                verdict,
                reason,
                envelope,
                ..
            } if f.envelope_only() => {
                if let Some(l) = f.layer {
                    if envelope.source != Endpoint::Layer(l) && envelope.target != l {
                        continue;
                    }
                }
                if f.kind.is_some_and(|k| k != envelope.kind) {
                    continue;
                }
                if f.view.is_some_and(|v| !in_view(v, envelope)) {
                    continue;
                }
                let verdict = serde_json::to_value(verdict).expect("verdict serializes");
                out.push(render_audit(*tick, *seq, verdict.as_str().unwrap_or(""), reason, envelope));
            }
            _ if f.envelope_only() => {}
            _ => out.push(line.to_string()),
        }
    }
    Ok(out)
}
