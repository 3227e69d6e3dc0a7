//! Planning: mission parameters become a roadmap with allocated resources,
//! risks, contingencies and checkpoints. Replans on material change.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{from_snapshot, salience, to_snapshot, Ctx, Layer};
use crate::cognition::{CognitionResponse, RequestKind};
use crate::docs::{
    ApproachStep, Checkpoint, Deferral, EscalationReason, Layout, MissionParams, Objective,
    Payload, ResourceState, Risk, Roadmap, StepTemplate, TaskSpec, TelemetryDoc, ThenAction,
};
use crate::messaging::{Envelope, LayerId};
use crate::predicate::{Cmp, Facts, Predicate, Vocabulary};
use crate::sim::vocabulary;

/// Hazard class whose contingency asks the owner to move the object.
pub const MAYBE_UNGRASPABLE: &str = "maybe-ungraspable";
/// Hazard class whose contingency reports to maintenance and skips.
pub const SWITCH_MALFUNCTION: &str = "switch-malfunction";
pub const MAINTENANCE_ENDPOINT: &str = "maintenance/report";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub allocation: BTreeMap<String, ResourceState>,
    pub deferred: Vec<Deferral>,
}

/// Greedy order: essential first, then urgency x importance descending,
/// then id.
pub fn priority_order(a: &TaskSpec, b: &TaskSpec) -> Ordering {
    b.essential
        .cmp(&a.essential)
        .then_with(|| (b.urgency * b.importance).total_cmp(&(a.urgency * a.importance)))
        .then_with(|| a.id.cmp(&b.id))
}

/// Reserves each task's estimated cost in priority order. Once an
/// essential task is deferred for a resource, non-essential tasks that
/// need that resource are deferred as well.
pub fn allocate(tasks: &[TaskSpec], budget: &ResourceState) -> Allocation {
    let mut order: Vec<&TaskSpec> = tasks.iter().collect();
    order.sort_by(|a, b| priority_order(a, b));
    let mut remaining = *budget;
    let mut blocked: BTreeSet<&'static str> = BTreeSet::new();
    let mut out = Allocation::default();
    for t in order {
        let reserved_for_essential = ["energy", "time", "money"]
            .into_iter()
            .find(|r| !t.essential && blocked.contains(r) && t.cost.get(r) > 0);
        let short = reserved_for_essential.or_else(|| remaining.shortfall(&t.cost));
        match short {
            Some(r) => {
                if t.essential {
                    blocked.insert(r);
                }
                out.deferred.push(Deferral {
                    task_id: t.id.clone(),
                    reason: format!("insufficient-{r}"),
                });
            }
            None => {
                remaining = remaining.saturating_sub(&t.cost);
                out.allocation.insert(t.id.clone(), t.cost);
            }
        }
    }
    out
}

/// Checks the task contract against the house vocabulary.
pub fn validate_task(task: &TaskSpec, vocab: &Vocabulary) -> Result<(), String> {
    for key in task
        .success_def
        .referenced_facts()
        .into_iter()
        .chain(task.failure_def.referenced_facts())
    {
        if !vocab.contains(&key) {
            return Err(format!("unknown-fact:{key}"));
        }
    }
    if task.success_def.jointly_satisfiable(&task.failure_def, vocab) {
        return Err("contradictory-definitions".into());
    }
    Ok(())
}

/// Ids of tasks that sit on or behind a prerequisite cycle.
pub fn cyclic_tasks(tasks: &[TaskSpec]) -> BTreeSet<String> {
    let ids: BTreeSet<&str> = tasks.iter().map(|t| t.id.as_str()).collect();
    let mut indegree: BTreeMap<&str, usize> = ids.iter().map(|&i| (i, 0)).collect();
    let mut dependents: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for t in tasks {
        for p in t.prerequisites.iter().filter(|p| ids.contains(p.as_str())) {
            *indegree.get_mut(t.id.as_str()).expect("known id") += 1;
            dependents.entry(p.as_str()).or_default().push(t.id.as_str());
        }
    }
    let mut ready: Vec<&str> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&i, _)| i).collect();
    let mut seen = BTreeSet::new();
    while let Some(i) = ready.pop() {
        seen.insert(i);
        for &d in dependents.get(i).into_iter().flatten() {
            let n = indegree.get_mut(d).expect("known id");
            *n -= 1;
            if *n == 0 {
                ready.push(d);
            }
        }
    }
    ids.into_iter()
        .filter(|i| !seen.contains(i))
        .map(str::to_string)
        .collect()
}

fn ask_owner_task(parent: &TaskSpec, object: &str, layout: &Layout) -> TaskSpec {
    let present = format!("object.{object}.present");
    TaskSpec {
        id: format!("ask-owner-move-{object}"),
        objective_ref: parent.objective_ref.clone(),
        title: format!("ask the owner to move the {object}"),
        methodology: format!("the {object} may not be graspable; ask the owner to move it and wait"),
        approach: vec![ApproachStep::required(StepTemplate::AskOwner {
            object: object.to_string(),
        })],
        success_def: Predicate::eq(present.clone(), 0),
        failure_def: Predicate::atom("robot.battery", Cmp::Lt, 1).and(Predicate::eq(present, 1)),
        failure_reason: "owner-unavailable".into(),
        cost: ResourceState::new(layout.costs.ask_owner, 6, 0),
        prerequisites: Vec::new(),
        essential: parent.essential,
        urgency: parent.urgency,
        importance: parent.importance,
        tags: vec!["contingency".into()],
        capabilities: vec!["dialogue".into()],
        settle_ticks: 5,
        contingency_for: Some(parent.id.clone()),
    }
}

fn report_task(parent: &TaskSpec, layout: &Layout) -> TaskSpec {
    let calls = format!("api.{MAINTENANCE_ENDPOINT}.calls");
    TaskSpec {
        id: format!("report-{}", parent.id),
        objective_ref: parent.objective_ref.clone(),
        title: format!("report the malfunction behind `{}`", parent.title),
        methodology: "file a maintenance report and move on".into(),
        approach: vec![ApproachStep::required(StepTemplate::ApiCall {
            endpoint: MAINTENANCE_ENDPOINT.into(),
        })],
        success_def: Predicate::atom(calls.clone(), Cmp::Ge, 1),
        failure_def: Predicate::atom("robot.battery", Cmp::Lt, 1).and(Predicate::eq(calls, 0)),
        failure_reason: "battery-exhausted".into(),
        cost: ResourceState::new(layout.costs.api_call, 1, 0),
        prerequisites: Vec::new(),
        essential: false,
        urgency: parent.urgency,
        importance: parent.importance,
        tags: vec!["contingency".into()],
        capabilities: vec!["api".into()],
        settle_ticks: 0,
        contingency_for: Some(parent.id.clone()),
    }
}

/// One risk per (task, hazard) with its contingency tasks. Hazards come
/// from task tags and from objects the task grasps.
pub fn assess_risks(tasks: &[TaskSpec], layout: &Layout) -> (Vec<Risk>, Vec<TaskSpec>) {
    let mut risks = Vec::new();
    let mut contingencies: Vec<TaskSpec> = Vec::new();
    for t in tasks.iter().filter(|t| t.contingency_for.is_none()) {
        for step in &t.approach {
            let StepTemplate::Grasp { object } = &step.template else {
                continue;
            };
            let Some(obj) = layout.objects.iter().find(|o| &o.id == object) else {
                continue;
            };
            if !obj.hazards.iter().any(|h| h == MAYBE_UNGRASPABLE) {
                continue;
            }
            let c = ask_owner_task(t, object, layout);
            risks.push(Risk {
                id: format!("risk-{}-{object}", t.id),
                task_id: t.id.clone(),
                hazard: MAYBE_UNGRASPABLE.into(),
                condition: Predicate::eq(format!("object.{object}.present"), 1),
                failure_reason: "cannot-grasp".into(),
                contingency: vec![c.id.clone()],
                then: ThenAction::Retry,
            });
            if !contingencies.iter().any(|x| x.id == c.id) {
                contingencies.push(c);
            }
        }
        if t.has_tag(SWITCH_MALFUNCTION) {
            let c = report_task(t, layout);
            risks.push(Risk {
                id: format!("risk-{}-switch", t.id),
                task_id: t.id.clone(),
                hazard: SWITCH_MALFUNCTION.into(),
                condition: Predicate::Const(true),
                failure_reason: "*".into(),
                contingency: vec![c.id.clone()],
                then: ThenAction::Skip,
            });
            contingencies.push(c);
        }
    }
    (risks, contingencies)
}

fn fact_value(v: &serde_json::Value) -> Option<i64> {
    v.as_i64()
        .or_else(|| v.as_bool().map(i64::from))
        .or_else(|| v.as_f64().map(|f| f as i64))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct State {
    layout: Option<Layout>,
    facts: Facts,
    battery: Option<u32>,
    params: Option<MissionParams>,
    roadmap: Option<Roadmap>,
    completed: Vec<TaskSpec>,
    abandoned: Vec<Deferral>,
    promoted: Vec<TaskSpec>,
    excluded: BTreeSet<String>,
    /// Tasks postponed for energy, with the battery level at the time.
    postponed: BTreeMap<String, u32>,
    spent: u32,
    pending: bool,
}

pub struct ExecutiveFunction {
    budget: ResourceState,
    endpoints: Vec<String>,
    state: State,
}

impl ExecutiveFunction {
    pub fn new(budget: ResourceState, endpoints: Vec<String>) -> Self {
        ExecutiveFunction {
            budget,
            endpoints,
            state: State::default(),
        }
    }

    pub fn roadmap(&self) -> Option<&Roadmap> {
        self.state.roadmap.as_ref()
    }

    fn is_completed(&self, id: &str) -> bool {
        self.state.completed.iter().any(|t| t.id == id)
    }

    fn is_abandoned(&self, id: &str) -> bool {
        self.state.abandoned.iter().any(|d| d.task_id == id)
    }

    fn available(&self, tick: u64) -> ResourceState {
        let energy = self.budget.energy.saturating_sub(self.state.spent);
        let energy = self.state.battery.map_or(energy, |b| b.min(energy));
        ResourceState::new(
            energy,
            self.budget.time.saturating_sub(tick.min(u64::from(u32::MAX)) as u32),
            self.budget.money,
        )
    }

    fn status(&self, ctx: &mut Ctx<'_>, message: String) {
        ctx.publish(
            LayerId::AgentModel,
            Payload::Telemetry(TelemetryDoc::Status { message }),
        )
        .salience = salience::TASK_RESULT;
    }

    /// Derives a roadmap from the current parameters and world view and
    /// publishes it if its content changed.
    pub fn rebuild(&mut self, ctx: &mut Ctx<'_>) {
        let (Some(params), Some(layout)) = (self.state.params.clone(), self.state.layout.clone()) else {
            return;
        };
        let objectives: Vec<Objective> = params
            .feasible_objectives
            .iter()
            .map(|f| f.objective.clone())
            .filter(|o| !self.state.excluded.contains(&o.id))
            .collect();
        if objectives.is_empty() {
            self.status(ctx, "nothing plannable".into());
            return;
        }
        let request = ctx
            .request(RequestKind::Plan)
            .with("objectives", &objectives)
            .with("layout", &layout)
            .with("facts", &self.state.facts);
        let proposal = match ctx.evaluate(&request) {
            Ok(CognitionResponse::Plan(p)) => p,
            _ => {
                self.state.pending = true;
                return;
            }
        };
        self.state.pending = false;

        let mut fresh: Vec<TaskSpec> = proposal
            .tasks
            .into_iter()
            .chain(self.state.promoted.iter().cloned())
            .filter(|t| {
                !self.is_completed(&t.id)
                    && !self.is_abandoned(&t.id)
                    && !self.state.excluded.contains(&t.id)
                    && !self.state.excluded.contains(&t.objective_ref)
            })
            .collect();
        let mut seen = BTreeSet::new();
        fresh.retain(|t| seen.insert(t.id.clone()));

        let vocab = vocabulary(&layout, self.endpoints.iter().map(String::as_str));
        let mut deferred = Vec::new();
        fresh.retain(|t| match validate_task(t, &vocab) {
            Ok(()) => true,
            Err(reason) => {
                deferred.push(Deferral {
                    task_id: t.id.clone(),
                    reason,
                });
                false
            }
        });
        let cyclic = cyclic_tasks(&fresh);
        fresh.retain(|t| {
            let bad = cyclic.contains(&t.id);
            if bad {
                deferred.push(Deferral {
                    task_id: t.id.clone(),
                    reason: "cyclic-prerequisites".into(),
                });
            }
            !bad
        });

        let (mut risks, contingencies) = assess_risks(&fresh, &layout);
        let contingencies: Vec<TaskSpec> = contingencies
            .into_iter()
            .filter(|c| !self.is_completed(&c.id) && validate_task(c, &vocab).is_ok())
            .collect();
        risks.retain(|r| r.contingency.iter().all(|id| contingencies.iter().any(|c| &c.id == id)));

        let battery = self.state.battery.unwrap_or(layout.capacity);
        let mut open: Vec<TaskSpec> = Vec::new();
        for t in fresh.iter().chain(&contingencies) {
            match self.state.postponed.get(&t.id) {
                Some(&at) if battery <= at && !t.essential => deferred.push(Deferral {
                    task_id: t.id.clone(),
                    reason: "insufficient-energy".into(),
                }),
                _ => open.push(t.clone()),
            }
        }
        let alloc = allocate(&open, &self.available(ctx.tick));
        for d in &alloc.deferred {
            if d.reason == "insufficient-energy" {
                self.state.postponed.entry(d.task_id.clone()).or_insert(battery);
            }
        }
        deferred.extend(alloc.deferred);

        let mut tasks: Vec<TaskSpec> = self.state.completed.clone();
        tasks.extend(fresh);
        tasks.extend(contingencies);
        let checkpoints = tasks
            .iter()
            .filter(|t| t.contingency_for.is_none())
            .map(|t| Checkpoint {
                id: format!("check-{}", t.id),
                after: vec![t.id.clone()],
                test: t.success_def.clone(),
            })
            .collect();

        let version = self.state.roadmap.as_ref().map_or(1, |r| r.version + 1);
        let roadmap = Roadmap {
            mission_ref: params.strategic_ref.clone(),
            version,
            tasks,
            allocation: alloc.allocation,
            deferred,
            checkpoints,
            risks,
            budget: self.available(ctx.tick),
            completed: self.state.completed.iter().map(|t| t.id.clone()).collect(),
            abandoned: self.state.abandoned.clone(),
        };
        if self
            .state
            .roadmap
            .as_ref()
            .is_some_and(|old| old.same_content(&roadmap))
        {
            return;
        }
        if !roadmap.deferred.is_empty() {
            let summary: Vec<String> = roadmap
                .deferred
                .iter()
                .map(|d| format!("{} ({})", d.task_id, d.reason))
                .collect();
            self.status(ctx, format!("deferred: {}", summary.join(", ")));
        }
        ctx.publish(LayerId::CognitiveControl, Payload::Roadmap(roadmap.clone()))
            .correlation = Some(roadmap.mission_ref.clone());
        self.state.roadmap = Some(roadmap);
    }

    fn open_predicate_keys(&self) -> BTreeSet<String> {
        self.state
            .roadmap
            .iter()
            .flat_map(|r| &r.tasks)
            .filter(|t| !self.is_completed(&t.id) && !self.is_abandoned(&t.id))
            .flat_map(|t| {
                let mut k = t.success_def.referenced_facts();
                k.extend(t.failure_def.referenced_facts());
                k
            })
            .collect()
    }

    fn merge_facts<'a>(&mut self, facts: impl IntoIterator<Item = (&'a String, i64)>) -> Vec<String> {
        let mut changed = Vec::new();
        for (k, v) in facts {
            if self.state.facts.get(k) != Some(&v) {
                self.state.facts.insert(k.clone(), v);
                changed.push(k.clone());
            }
        }
        if let Some(&b) = self.state.facts.get("robot.battery") {
            self.state.battery = Some(b.max(0) as u32);
        }
        changed
    }

    /// Replaces a repeatedly failing task with its contingency chain, or
    /// abandons it when there is none.
    fn escalated(&mut self, task_id: &str, ctx: &mut Ctx<'_>) {
        if self.is_abandoned(task_id) || self.is_completed(task_id) {
            return;
        }
        let chain: Vec<TaskSpec> = self
            .state
            .roadmap
            .iter()
            .flat_map(|r| &r.tasks)
            .filter(|t| t.contingency_for.as_deref() == Some(task_id) && !self.is_completed(&t.id))
            .cloned()
            .collect();
        let reason = if chain.is_empty() {
            "frustration".to_string()
        } else {
            for mut c in chain {
                c.contingency_for = None;
                self.state.promoted.push(c);
            }
            "replaced-by-contingency".to_string()
        };
        self.state.abandoned.push(Deferral {
            task_id: task_id.to_string(),
            reason,
        });
        self.rebuild(ctx);
    }
}

impl Layer for ExecutiveFunction {
    fn id(&self) -> LayerId {
        LayerId::ExecutiveFunction
    }

    fn handle(&mut self, env: &Envelope, ctx: &mut Ctx<'_>) {
        match &env.payload {
            Payload::MissionParams(p) => {
                self.state.params = Some(p.clone());
                self.rebuild(ctx);
            }
            Payload::WorldEvent(w) => {
                if let Some(layout) = &w.layout {
                    self.state.layout = Some(layout.clone());
                }
                let numeric: Vec<(&String, i64)> = w
                    .facts
                    .iter()
                    .filter_map(|(k, v)| fact_value(v).map(|x| (k, x)))
                    .collect();
                let open = self.open_predicate_keys();
                let changed = self.merge_facts(numeric);
                let material = w.layout.is_some()
                    || self.state.roadmap.is_none()
                    || changed.iter().any(|k| open.contains(k) || k.starts_with("threat."));
                if material {
                    self.rebuild(ctx);
                }
            }
            Payload::Directive(d) => {
                self.state.excluded.extend(d.exclude.iter().cloned());
                self.rebuild(ctx);
            }
            Payload::MoralJudgment(mj) => {
                if mj.for_layer == LayerId::ExecutiveFunction {
                    if mj.replan {
                        self.state.excluded.extend(mj.judgment.flagged.iter().cloned());
                        self.rebuild(ctx);
                    }
                } else {
                    let out = ctx.publish(LayerId::CognitiveControl, env.payload.clone());
                    out.correlation = env.correlation.clone();
                }
            }
            Payload::Telemetry(t) => {
                match t {
                    TelemetryDoc::Power { battery, .. } => self.state.battery = Some(*battery),
                    TelemetryDoc::TaskResult {
                        task_id,
                        success,
                        observed,
                        energy_spent,
                        ..
                    } => {
                        self.state.spent += energy_spent;
                        self.merge_facts(observed.iter().map(|(k, v)| (k, *v)));
                        if *success && !self.is_completed(task_id) {
                            if let Some(spec) = self
                                .state
                                .roadmap
                                .as_ref()
                                .and_then(|r| r.task(task_id))
                                .cloned()
                            {
                                self.state.completed.push(spec);
                            }
                        }
                    }
                    TelemetryDoc::Escalation {
                        reason: EscalationReason::Frustration,
                        task_id: Some(task),
                        ..
                    } => self.escalated(task, ctx),
                    _ => {}
                }
                ctx.percolate(env);
            }
            _ => {
                ctx.percolate(env);
            }
        }
    }

    fn has_pending_work(&self) -> bool {
        self.state.pending
    }

    fn on_pending(&mut self, ctx: &mut Ctx<'_>) {
        self.rebuild(ctx);
    }

    fn snapshot(&self) -> serde_json::Value {
        to_snapshot(&self.state)
    }

    fn restore(&mut self, snapshot: &serde_json::Value) -> Result<(), String> {
        self.state = from_snapshot(snapshot)?;
        Ok(())
    }
}
