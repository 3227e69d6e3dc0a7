//! Task selection and switching. Keeps exactly one task dispatched, tracks
//! frustration over a window of outcomes and deliberates between options
//! that are not dominated.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{from_snapshot, salience, Ctx, Layer, to_snapshot};
use crate::cognition::{CognitionResponse, RequestKind};
use crate::config::Settings;
use crate::docs::{
    Deliberation, DeliberationOption, DilemmaDoc, DilemmaOption, EscalationReason, OutcomeSignal,
    Payload, Roadmap, TaskInstruction, TaskSpec, TelemetryDoc, ThenAction,
};
use crate::messaging::{Envelope, LayerId};

/// Tags that make a choice between tasks a moral question.
pub const MORAL_TAGS: &[&str] = &["prevents-suffering", "harm"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub urgency: f64,
    pub importance: f64,
    pub cost: f64,
}

impl Weights {
    pub fn from_settings(s: &Settings) -> Self {
        Weights {
            urgency: s.weight_urgency,
            importance: s.weight_importance,
            cost: s.weight_cost,
        }
    }
}

impl Default for Weights {
    fn default() -> Self {
        Weights::from_settings(&Settings::default())
    }
}

/// What the selector knows beyond the roadmap itself.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionView {
    pub completed: BTreeSet<String>,
    pub abandoned: BTreeSet<String>,
    /// Contingency tasks that a failure has switched on.
    pub activated: BTreeSet<String>,
    /// Prerequisites inserted at runtime, per task.
    pub extra_prereqs: BTreeMap<String, Vec<String>>,
    pub exclude: Option<String>,
}

/// Tasks that may be dispatched now, in id order.
pub fn eligible<'a>(roadmap: &'a Roadmap, view: &SelectionView) -> Vec<&'a TaskSpec> {
    let done = |id: &str| view.completed.contains(id) || roadmap.completed.iter().any(|c| c == id);
    let dropped = |id: &str| {
        view.abandoned.contains(id) || roadmap.abandoned.iter().any(|d| d.task_id == id)
    };
    let mut out: Vec<&TaskSpec> = roadmap
        .tasks
        .iter()
        .filter(|t| roadmap.allocation.contains_key(&t.id))
        .filter(|t| !done(&t.id) && !dropped(&t.id))
        .filter(|t| t.contingency_for.is_none() || view.activated.contains(&t.id))
        .filter(|t| view.exclude.as_deref() != Some(t.id.as_str()))
        .filter(|t| {
            t.prerequisites
                .iter()
                .chain(view.extra_prereqs.get(&t.id).into_iter().flatten())
                .all(|p| done(p))
        })
        .collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

pub fn score(t: &TaskSpec, max_energy: u32, w: &Weights) -> f64 {
    let norm = if max_energy == 0 {
        0.0
    } else {
        f64::from(t.cost.energy) / f64::from(max_energy)
    };
    w.urgency * t.urgency + w.importance * t.importance - w.cost * norm
}

/// Highest score among `candidates`, ties to the smallest id.
pub fn argmax<'a>(candidates: &[&'a TaskSpec], w: &Weights) -> Option<&'a TaskSpec> {
    let max_energy = candidates.iter().map(|t| t.cost.energy).max().unwrap_or(0);
    let mut best: Option<(&TaskSpec, f64)> = None;
    for &t in candidates {
        let s = score(t, max_energy, w);
        best = match best {
            Some((b, bs)) if bs > s || (bs == s && b.id <= t.id) => Some((b, bs)),
            _ => Some((t, s)),
        };
    }
    best.map(|(t, _)| t)
}

pub fn select_task<'a>(roadmap: &'a Roadmap, view: &SelectionView, w: &Weights) -> Option<&'a TaskSpec> {
    argmax(&eligible(roadmap, view), w)
}

/// Candidates no other candidate beats on urgency, importance and energy.
pub fn non_dominated<'a>(candidates: &[&'a TaskSpec]) -> Vec<&'a TaskSpec> {
    let dominates = |a: &TaskSpec, b: &TaskSpec| {
        a.urgency >= b.urgency
            && a.importance >= b.importance
            && a.cost.energy <= b.cost.energy
            && (a.urgency > b.urgency || a.importance > b.importance || a.cost.energy < b.cost.energy)
    };
    candidates
        .iter()
        .filter(|&&b| !candidates.iter().any(|&a| dominates(a, b)))
        .copied()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrustrationState {
    /// `true` marks a failure; oldest first.
    pub window: VecDeque<bool>,
    pub capacity: usize,
    pub threshold: f64,
    pub failure_ratio: f64,
    pub frustrated: bool,
}

impl FrustrationState {
    pub fn new(capacity: usize, threshold: f64) -> Self {
        FrustrationState {
            window: VecDeque::with_capacity(capacity),
            capacity,
            threshold,
            failure_ratio: 0.0,
            frustrated: false,
        }
    }

    pub fn update(&self, failed: bool) -> FrustrationState {
        let mut next = self.clone();
        next.window.push_back(failed);
        while next.window.len() > next.capacity {
            next.window.pop_front();
        }
        let failures = next.window.iter().filter(|&&f| f).count();
        next.failure_ratio = if next.window.is_empty() {
            0.0
        } else {
            failures as f64 / next.window.len() as f64
        };
        next.frustrated = next.window.len() == next.capacity && next.failure_ratio >= next.threshold;
        next
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("damping needs at least two options, got {0}")]
pub struct DampError(pub usize);

/// Scores each option as pros minus cons plus an adjustment clamped to
/// [-0.5, 0.5]; the best score wins, ties to the smallest id.
pub fn damp(
    options: Vec<(String, Vec<String>, Vec<String>)>,
    adjustments: &BTreeMap<String, f64>,
) -> Result<Deliberation, DampError> {
    if options.len() < 2 {
        return Err(DampError(options.len()));
    }
    let mut scored: Vec<DeliberationOption> = options
        .into_iter()
        .map(|(id, pros, cons)| {
            let adj = adjustments.get(&id).copied().unwrap_or(0.0).clamp(-0.5, 0.5);
            DeliberationOption {
                score: pros.len() as f64 - cons.len() as f64 + adj,
                id,
                pros,
                cons,
            }
        })
        .collect();
    scored.sort_by(|a, b| a.id.cmp(&b.id));
    let mut chosen = &scored[0];
    for o in &scored[1..] {
        if o.score > chosen.score {
            chosen = o;
        }
    }
    let chosen = chosen.id.clone();
    let parts: Vec<String> = scored
        .iter()
        .map(|o| {
            format!(
                "{} {:+.2} (pros: {}; cons: {})",
                o.id,
                o.score,
                if o.pros.is_empty() { "none".into() } else { o.pros.join(", ") },
                if o.cons.is_empty() { "none".into() } else { o.cons.join(", ") },
            )
        })
        .collect();
    Ok(Deliberation {
        record: format!("chose {chosen}: {}", parts.join(" | ")),
        options: scored,
        chosen,
    })
}

/// Pros and cons of one candidate relative to the others.
pub fn weigh(t: &TaskSpec, max_energy: u32, recently_failed: Option<&str>) -> (Vec<String>, Vec<String>) {
    let mut pros = Vec::new();
    let mut cons = Vec::new();
    let e = f64::from(t.cost.energy);
    let m = f64::from(max_energy);
    if t.essential {
        pros.push("essential".into());
    }
    if t.urgency >= 0.5 {
        pros.push("urgent".into());
    }
    if t.importance >= 0.5 {
        pros.push("important".into());
    }
    if e <= 0.5 * m {
        pros.push("cheap".into());
    }
    if t.has_tag("prevents-suffering") {
        pros.push("prevents-suffering".into());
    }
    if m > 0.0 && e >= 0.75 * m {
        cons.push("costly".into());
    }
    if recently_failed == Some(t.id.as_str()) {
        cons.push("recently-failed".into());
    }
    if t.has_tag("harm") {
        cons.push("harm".into());
    }
    (pros, cons)
}

fn is_moral(t: &TaskSpec) -> bool {
    MORAL_TAGS.iter().any(|m| t.has_tag(m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Dispatch {
    task_id: String,
    attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct State {
    roadmap: Option<Roadmap>,
    view: SelectionView,
    frustration: FrustrationState,
    escalated: bool,
    current: Option<Dispatch>,
    retries: BTreeMap<String, u32>,
    last_failed: Option<String>,
    preempted: BTreeSet<String>,
    dilemmas: BTreeSet<String>,
    dilemma_count: u64,
    preferred: Option<String>,
    idle: bool,
}

pub struct CognitiveControl {
    state: State,
}

impl CognitiveControl {
    pub fn new(settings: &Settings) -> Self {
        CognitiveControl {
            state: State {
                roadmap: None,
                view: SelectionView::default(),
                frustration: FrustrationState::new(
                    settings.frustration_window,
                    settings.frustration_threshold,
                ),
                escalated: false,
                current: None,
                retries: BTreeMap::new(),
                last_failed: None,
                preempted: BTreeSet::new(),
                dilemmas: BTreeSet::new(),
                dilemma_count: 0,
                preferred: None,
                idle: false,
            },
        }
    }

    pub fn frustration(&self) -> &FrustrationState {
        &self.state.frustration
    }

    pub fn current(&self) -> Option<&str> {
        self.state.current.as_ref().map(|d| d.task_id.as_str())
    }

    fn view(&self) -> SelectionView {
        let mut v = self.state.view.clone();
        if self.state.frustration.frustrated {
            v.exclude = self.state.last_failed.clone();
        }
        v
    }

    fn decision(&self, ctx: &mut Ctx<'_>, decision: &str, task: Option<&str>, detail: String) {
        ctx.publish(
            LayerId::ExecutiveFunction,
            Payload::Telemetry(TelemetryDoc::Decision {
                decision: decision.into(),
                task_id: task.map(str::to_string),
                detail,
            }),
        )
        .salience = salience::DECISION;
    }

    fn dispatch(&mut self, task: &TaskSpec, preempts: Option<String>, ctx: &mut Ctx<'_>) {
        let attempt = self.state.retries.get(&task.id).copied().unwrap_or(0) + 1;
        let version = self.state.roadmap.as_ref().map_or(0, |r| r.version);
        if let Some(p) = &preempts {
            self.state.preempted.insert(p.clone());
        }
        ctx.publish(
            LayerId::TaskProsecution,
            Payload::TaskInstruction(TaskInstruction {
                task: task.clone(),
                roadmap_version: version,
                attempt,
                preempts,
            }),
        )
        .correlation = Some(task.id.clone());
        self.state.current = Some(Dispatch {
            task_id: task.id.clone(),
            attempt,
        });
        self.state.idle = false;
    }

    /// Picks and dispatches the next task. `avoid` is passed over unless it
    /// is the only candidate.
    fn dispatch_next(&mut self, avoid: Option<&str>, ctx: &mut Ctx<'_>) {
        let Some(roadmap) = self.state.roadmap.clone() else {
            return;
        };
        let view = self.view();
        let mut cands = eligible(&roadmap, &view);
        if let Some(a) = avoid {
            if cands.iter().any(|t| t.id != a) {
                cands.retain(|t| t.id != a);
            }
        }
        if cands.is_empty() {
            if !self.state.idle {
                self.state.idle = true;
                ctx.publish(
                    LayerId::ExecutiveFunction,
                    Payload::Telemetry(TelemetryDoc::Status {
                        message: "idle".into(),
                    }),
                )
                .salience = salience::STATUS;
            }
            return;
        }
        let w = Weights::from_settings(ctx.settings);
        let preferred = self
            .state
            .preferred
            .take()
            .and_then(|p| cands.iter().find(|t| t.id == p).copied());
        let chosen = match preferred {
            Some(t) => t,
            None => {
                let front = non_dominated(&cands);
                if front.len() >= 2 {
                    self.deliberate(&front, ctx)
                } else {
                    argmax(&cands, &w).expect("non-empty")
                }
            }
        };
        self.check_dilemma(chosen, &cands, ctx);
        let chosen = chosen.clone();
        self.decision(ctx, "dispatch", Some(&chosen.id), format!("attempt {}", self.state.retries.get(&chosen.id).copied().unwrap_or(0) + 1));
        self.dispatch(&chosen, None, ctx);
    }

    fn deliberate<'a>(&self, front: &[&'a TaskSpec], ctx: &mut Ctx<'_>) -> &'a TaskSpec {
        let max_energy = front.iter().map(|t| t.cost.energy).max().unwrap_or(0);
        let options: Vec<(String, Vec<String>, Vec<String>)> = front
            .iter()
            .map(|t| {
                let (p, c) = weigh(t, max_energy, self.state.last_failed.as_deref());
                (t.id.clone(), p, c)
            })
            .collect();
        let plain: Vec<DeliberationOption> = options
            .iter()
            .map(|(id, p, c)| DeliberationOption {
                id: id.clone(),
                pros: p.clone(),
                cons: c.clone(),
                score: p.len() as f64 - c.len() as f64,
            })
            .collect();
        let request = ctx.request(RequestKind::Deliberate).with("options", &plain);
        let adjustments = match ctx.evaluate(&request) {
            Ok(CognitionResponse::Deliberate(a)) => a.adjustments,
            _ => BTreeMap::new(),
        };
        let deliberation = damp(options, &adjustments).expect("front has two or more options");
        let chosen = front
            .iter()
            .find(|t| t.id == deliberation.chosen)
            .copied()
            .expect("chosen among options");
        ctx.publish(
            LayerId::ExecutiveFunction,
            Payload::Telemetry(TelemetryDoc::Deliberation { deliberation }),
        )
        .salience = salience::DELIBERATION;
        chosen
    }

    /// Escalates when a morally tagged candidate competes with a mundane
    /// choice. Each task is escalated at most once.
    fn check_dilemma(&mut self, chosen: &TaskSpec, cands: &[&TaskSpec], ctx: &mut Ctx<'_>) {
        if is_moral(chosen) {
            return;
        }
        let moral: Vec<&TaskSpec> = cands
            .iter()
            .filter(|t| is_moral(t) && !self.state.dilemmas.contains(&t.id))
            .copied()
            .collect();
        if moral.is_empty() {
            return;
        }
        self.state.dilemma_count += 1;
        let id = format!("dilemma-{}", self.state.dilemma_count);
        let option = |t: &TaskSpec| DilemmaOption {
            id: t.id.clone(),
            summary: t.title.clone(),
            tags: t.tags.clone(),
        };
        let mut options = vec![option(chosen)];
        for t in &moral {
            self.state.dilemmas.insert(t.id.clone());
            options.push(option(t));
        }
        ctx.publish(
            LayerId::ExecutiveFunction,
            Payload::DilemmaEscalation(DilemmaDoc {
                dilemma_id: id.clone(),
                origin: LayerId::CognitiveControl,
                current: Some(chosen.id.clone()),
                options,
            }),
        )
        .with_salience_mut(salience::DILEMMA)
        .correlation = Some(id.clone());
    }

    fn on_outcome(&mut self, o: &OutcomeSignal, ctx: &mut Ctx<'_>) {
        let current = self.state.current.as_ref().map(|d| d.task_id.clone());
        if current.as_deref() != Some(o.task_id.as_str()) {
            if self.state.preempted.remove(&o.task_id) {
                return;
            }
            ctx.publish(
                LayerId::ExecutiveFunction,
                Payload::Telemetry(TelemetryDoc::Escalation {
                    reason: EscalationReason::Protocol,
                    task_id: Some(o.task_id.clone()),
                    detail: format!("outcome for undispatched task `{}`", o.task_id),
                }),
            )
            .salience = salience::ESCALATION;
            return;
        }
        self.state.current = None;
        let task = o.task_id.clone();
        let failed = !o.is_success();
        self.state.frustration = self.state.frustration.update(failed);
        if !self.state.frustration.frustrated {
            self.state.escalated = false;
        }
        if failed {
            self.state.last_failed = Some(task.clone());
        } else {
            self.state.view.completed.insert(task.clone());
            self.state.retries.remove(&task);
            self.checkpoints(o, ctx);
        }

        if self.state.frustration.frustrated && !self.state.escalated {
            self.state.escalated = true;
            let culprit = self.state.last_failed.clone();
            ctx.publish(
                LayerId::ExecutiveFunction,
                Payload::Telemetry(TelemetryDoc::Escalation {
                    reason: EscalationReason::Frustration,
                    task_id: culprit.clone(),
                    detail: format!(
                        "failure ratio {:.2} over the last {} outcomes",
                        self.state.frustration.failure_ratio,
                        self.state.frustration.window.len()
                    ),
                }),
            )
            .salience = salience::ESCALATION;
            self.decision(ctx, "escalate", culprit.as_deref(), "frustration".into());
            self.dispatch_next(culprit.as_deref(), ctx);
            return;
        }
        if !failed {
            self.decision(ctx, "switch", Some(&task), "success".into());
            self.dispatch_next(None, ctx);
            return;
        }
        let reason = o.reason.clone().unwrap_or_default();
        if self.handle_failure(&task, &reason, ctx) {
            return;
        }
        let retries = self.state.retries.get(&task).copied().unwrap_or(0);
        let still_eligible = self.state.roadmap.as_ref().is_some_and(|r| {
            eligible(r, &self.view()).iter().any(|t| t.id == task)
        });
        if !self.state.frustration.frustrated && retries < ctx.settings.retry_cap && still_eligible {
            self.state.retries.insert(task.clone(), retries + 1);
            self.decision(ctx, "retry", Some(&task), reason);
            let spec = self
                .state
                .roadmap
                .as_ref()
                .and_then(|r| r.task(&task))
                .cloned()
                .expect("eligible task is in the roadmap");
            self.dispatch(&spec, None, ctx);
            return;
        }
        self.decision(ctx, "switch", Some(&task), reason);
        self.dispatch_next(Some(&task), ctx);
    }

    /// Activates a matching contingency as a prerequisite of the failed
    /// task and dispatches it. Returns whether one matched.
    fn handle_failure(&mut self, task: &str, reason: &str, ctx: &mut Ctx<'_>) -> bool {
        let Some(roadmap) = self.state.roadmap.clone() else {
            return false;
        };
        let Some(risk) = roadmap.risks.iter().find(|r| {
            r.task_id == task
                && (r.failure_reason == "*" || r.failure_reason == reason)
                && r.contingency.iter().any(|c| !self.state.view.activated.contains(c))
        }) else {
            return false;
        };
        for c in &risk.contingency {
            self.state.view.activated.insert(c.clone());
            let extra = self.state.view.extra_prereqs.entry(task.to_string()).or_default();
            if !extra.contains(c) {
                extra.push(c.clone());
            }
        }
        if risk.then == ThenAction::Skip {
            self.state.view.abandoned.insert(task.to_string());
        }
        self.decision(
            ctx,
            "insert-prerequisite",
            Some(task),
            risk.contingency.join(","),
        );
        let first = risk
            .contingency
            .iter()
            .find_map(|c| eligible(&roadmap, &self.view()).into_iter().find(|t| &t.id == c).cloned());
        match first {
            Some(t) => self.dispatch(&t, None, ctx),
            None => self.dispatch_next(None, ctx),
        }
        true
    }

    fn checkpoints(&self, o: &OutcomeSignal, ctx: &mut Ctx<'_>) {
        let Some(r) = &self.state.roadmap else {
            return;
        };
        for c in r.checkpoints.iter().filter(|c| c.after.contains(&o.task_id)) {
            if c.after.iter().all(|a| self.state.view.completed.contains(a)) {
                ctx.publish(
                    LayerId::ExecutiveFunction,
                    Payload::Telemetry(TelemetryDoc::Checkpoint {
                        id: c.id.clone(),
                        passed: c.test.eval(&o.observed),
                    }),
                )
                .salience = salience::DECISION;
            }
        }
    }

    fn on_roadmap(&mut self, r: &Roadmap, ctx: &mut Ctx<'_>) {
        if let Some(old) = &self.state.roadmap {
            if old.mission_ref == r.mission_ref && old.version >= r.version {
                return;
            }
        }
        let before: BTreeSet<String> = self
            .state
            .roadmap
            .as_ref()
            .map(|old| eligible(old, &self.view()).into_iter().map(|t| t.id.clone()).collect())
            .unwrap_or_default();
        self.state.view.completed.extend(r.completed.iter().cloned());
        self.state.view.abandoned.extend(r.abandoned.iter().map(|d| d.task_id.clone()));
        self.state.roadmap = Some(r.clone());
        self.reconsider(&before, ctx);
    }

    /// After new information: dispatch if idle, otherwise preempt for a
    /// newly eligible task that outscores the current one.
    fn reconsider(&mut self, before: &BTreeSet<String>, ctx: &mut Ctx<'_>) {
        let Some(cur) = self.state.current.clone() else {
            self.dispatch_next(None, ctx);
            return;
        };
        let Some(roadmap) = self.state.roadmap.clone() else {
            return;
        };
        let view = self.view();
        let cands = eligible(&roadmap, &view);
        let Some(current) = roadmap.task(&cur.task_id).cloned() else {
            return;
        };
        let fresh: Vec<&TaskSpec> = cands
            .iter()
            .filter(|t| !before.contains(&t.id) && t.id != cur.task_id)
            .copied()
            .collect();
        if fresh.is_empty() {
            return;
        }
        let w = Weights::from_settings(ctx.settings);
        let mut pool = fresh.clone();
        pool.push(&current);
        let max_energy = pool.iter().map(|t| t.cost.energy).max().unwrap_or(0);
        let best = argmax(&fresh, &w).expect("non-empty");
        if score(best, max_energy, &w) <= score(&current, max_energy, &w) {
            return;
        }
        if is_moral(best) && !is_moral(&current) {
            self.check_dilemma(&current, &[best], ctx);
            return;
        }
        let best = best.clone();
        self.decision(ctx, "preempt", Some(&best.id), format!("supersedes {}", cur.task_id));
        self.dispatch(&best, Some(cur.task_id), ctx);
    }

    fn on_judgment(&mut self, preferred: Option<&str>, ctx: &mut Ctx<'_>) {
        let Some(p) = preferred else {
            return;
        };
        let Some(roadmap) = self.state.roadmap.clone() else {
            return;
        };
        let cands = eligible(&roadmap, &self.view());
        let Some(t) = cands.iter().find(|t| t.id == p).map(|t| (*t).clone()) else {
            self.state.preferred = Some(p.to_string());
            return;
        };
        match self.state.current.clone() {
            Some(cur) if cur.task_id == t.id => {}
            Some(cur) => {
                self.decision(ctx, "preempt", Some(&t.id), format!("moral judgment supersedes {}", cur.task_id));
                self.dispatch(&t, Some(cur.task_id), ctx);
            }
            None => {
                self.decision(ctx, "dispatch", Some(&t.id), "moral judgment".into());
                self.dispatch(&t, None, ctx);
            }
        }
    }
}

trait SalienceExt {
    fn with_salience_mut(&mut self, s: f64) -> &mut Self;
}

impl SalienceExt for Envelope {
    fn with_salience_mut(&mut self, s: f64) -> &mut Self {
        self.salience = s;
        self
    }
}

impl Layer for CognitiveControl {
    fn id(&self) -> LayerId {
        LayerId::CognitiveControl
    }

    fn handle(&mut self, env: &Envelope, ctx: &mut Ctx<'_>) {
        match &env.payload {
            Payload::Roadmap(r) => self.on_roadmap(r, ctx),
            Payload::OutcomeSignal(o) => {
                self.on_outcome(o, ctx);
                ctx.percolate(env);
            }
            Payload::MoralJudgment(mj) if mj.for_layer == LayerId::CognitiveControl => {
                self.on_judgment(mj.judgment.preferred_option.as_deref(), ctx);
            }
            Payload::WorldEvent(_) => {
                if self.state.current.is_none() {
                    self.dispatch_next(None, ctx);
                }
                ctx.percolate(env);
            }
            _ => {
                ctx.percolate(env);
            }
        }
    }

    fn snapshot(&self) -> serde_json::Value {
        to_snapshot(&self.state)
    }

    fn restore(&mut self, snapshot: &serde_json::Value) -> Result<(), String> {
        self.state = from_snapshot(snapshot)?;
        Ok(())
    }
}
