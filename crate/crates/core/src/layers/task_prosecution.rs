//! Turns one dispatched task into effector commands, one command per tick,
//! and reports the outcome judged against the task's own definitions.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{from_snapshot, salience, to_snapshot, Ctx, Layer};
use crate::docs::{
    ApproachStep, OutcomeSignal, OutcomeStatus, Payload, ResourceState, StepTemplate, TaskSpec,
    TelemetryDoc,
};
use crate::messaging::{Envelope, LayerId};
use crate::predicate::Facts;
use crate::sim::{Cell, Command, EffectorCommand, EffectorToken, HouseState, StepResult};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("outcome emitted with no task dispatched")]
    NoDispatch,
}

/// Everything that happened while prosecuting one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub task_id: String,
    pub status: OutcomeStatus,
    pub reason: Option<String>,
    pub commands: Vec<EffectorCommand>,
    pub energy: u32,
}

/// What one environment step did.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnvStep {
    pub command: Option<EffectorCommand>,
    pub result: Option<StepResult>,
    pub waited: bool,
    pub finished: Option<ExecutionReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Active {
    task: TaskSpec,
    templates: VecDeque<ApproachStep>,
    queue: VecDeque<(Command, bool)>,
    started: bool,
    settle_left: u32,
    commands: Vec<EffectorCommand>,
    energy: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct State {
    active: Option<Active>,
    observed: Facts,
    battery: u32,
    capacity: u32,
    cell: Option<Cell>,
    reports: u64,
    last_report: Option<ExecutionReport>,
}

pub struct TaskProsecution {
    state: State,
}

impl Default for TaskProsecution {
    fn default() -> Self {
        Self::new()
    }
}

impl TaskProsecution {
    pub fn new() -> Self {
        TaskProsecution {
            state: State {
                active: None,
                observed: Facts::new(),
                battery: 0,
                capacity: 0,
                cell: None,
                reports: 0,
                last_report: None,
            },
        }
    }

    pub fn is_idle(&self) -> bool {
        self.state.active.is_none()
    }

    pub fn current(&self) -> Option<&str> {
        self.state.active.as_ref().map(|a| a.task.id.as_str())
    }

    pub fn last_report(&self) -> Option<&ExecutionReport> {
        self.state.last_report.as_ref()
    }

    pub fn reports(&self) -> u64 {
        self.state.reports
    }

    fn observe(&mut self, house: &HouseState) -> Facts {
        let facts = house.oracle_snapshot();
        self.state.observed = facts.clone();
        self.state.battery = house.robot.battery;
        self.state.capacity = house.robot.capacity;
        self.state.cell = Some(house.robot.cell);
        facts
    }

    /// Advances the current task by one command or one settle tick.
    pub fn advance(&mut self, house: &mut HouseState, token: &EffectorToken, ctx: &mut Ctx<'_>) -> EnvStep {
        let mut step = EnvStep::default();
        if self.state.active.is_none() {
            return step;
        }
        let facts = self.observe(house);
        if let Some((status, reason)) = self.judge(&facts) {
            step.finished = Some(self.finish(status, reason, ctx).expect("task is active"));
            return step;
        }

        let next = match self.next_command(house) {
            Ok(next) => next,
            Err(reason) => {
                step.finished = Some(self.finish(OutcomeStatus::Failure, Some(reason), ctx).expect("task is active"));
                return step;
            }
        };
        let Some((command, required)) = next else {
            let active = self.state.active.as_mut().expect("task is active");
            if active.settle_left > 0 {
                active.settle_left -= 1;
                step.waited = true;
                return step;
            }
            step.finished = Some(
                self.finish(OutcomeStatus::Failure, Some("success-not-achieved".into()), ctx)
                    .expect("task is active"),
            );
            return step;
        };

        let result = house.step(token, &command);
        let stamped = EffectorCommand {
            command,
            tick: ctx.tick,
        };
        {
            let active = self.state.active.as_mut().expect("task is active");
            active.commands.push(stamped.clone());
            active.energy += result.energy;
        }
        step.command = Some(stamped);
        step.result = Some(result.clone());
        let facts = self.observe(house);
        if !result.accepted && required {
            step.finished = Some(self.finish(OutcomeStatus::Failure, result.reason, ctx).expect("task is active"));
            return step;
        }
        if let Some((status, reason)) = self.judge(&facts) {
            step.finished = Some(self.finish(status, reason, ctx).expect("task is active"));
        }
        step
    }

    fn judge(&self, facts: &Facts) -> Option<(OutcomeStatus, Option<String>)> {
        let task = &self.state.active.as_ref()?.task;
        let ok = task.success_def.eval(facts);
        let bad = task.failure_def.eval(facts);
        match (ok, bad) {
            (true, true) => {
                debug_assert!(false, "task `{}` satisfies both definitions", task.id);
                Some((OutcomeStatus::Failure, Some("contract-violation".into())))
            }
            (true, false) => Some((OutcomeStatus::Success, None)),
            (false, true) => Some((OutcomeStatus::Failure, Some(task.failure_reason.clone()))),
            (false, false) => None,
        }
    }

    /// Next queued command, expanding templates against the current house
    /// when the queue runs dry.
    fn next_command(&mut self, house: &HouseState) -> Result<Option<(Command, bool)>, String> {
        let active = self.state.active.as_mut().expect("task is active");
        active.started = true;
        loop {
            if let Some(c) = active.queue.pop_front() {
                return Ok(Some(c));
            }
            let Some(step) = active.templates.pop_front() else {
                return Ok(None);
            };
            let commands = expand(&step.template, house)?;
            for c in &commands {
                if !house.registered(c.verb()) {
                    return Err("unsupported-effector".into());
                }
            }
            active.queue.extend(commands.into_iter().map(|c| (c, step.required)));
        }
    }

    /// Reports the current task's outcome to Cognitive Control.
    pub fn emit(
        &mut self,
        status: OutcomeStatus,
        reason: Option<String>,
        ctx: &mut Ctx<'_>,
    ) -> Result<ExecutionReport, ProtocolError> {
        self.finish(status, reason, ctx)
    }

    fn finish(
        &mut self,
        status: OutcomeStatus,
        reason: Option<String>,
        ctx: &mut Ctx<'_>,
    ) -> Result<ExecutionReport, ProtocolError> {
        let active = self.state.active.take().ok_or(ProtocolError::NoDispatch)?;
        let success = status == OutcomeStatus::Success;
        let observed = self.state.observed.clone();
        ctx.publish(
            LayerId::CognitiveControl,
            Payload::OutcomeSignal(OutcomeSignal {
                task_id: active.task.id.clone(),
                status,
                reason: reason.clone(),
                observed: observed.clone(),
                resources_spent: ResourceState::new(active.energy, 0, 0),
                commands: active.commands.len() as u32,
            }),
        )
        .with_correlation_mut(&active.task.id)
        .salience = if success { salience::SUCCESS } else { salience::FAILURE };
        ctx.publish(
            LayerId::CognitiveControl,
            Payload::Telemetry(TelemetryDoc::TaskResult {
                task_id: active.task.id.clone(),
                success,
                capabilities: active.task.capabilities.clone(),
                observed,
                energy_spent: active.energy,
            }),
        )
        .salience = salience::TASK_RESULT;
        ctx.publish(
            LayerId::CognitiveControl,
            Payload::Telemetry(TelemetryDoc::Power {
                battery: self.state.battery,
                capacity: self.state.capacity,
            }),
        )
        .salience = salience::POWER;
        if let Some(cell) = self.state.cell {
            ctx.publish(
                LayerId::CognitiveControl,
                Payload::Telemetry(TelemetryDoc::Geospatial { cell }),
            )
            .salience = salience::GEOSPATIAL;
        }
        let report = ExecutionReport {
            task_id: active.task.id,
            status,
            reason,
            commands: active.commands,
            energy: active.energy,
        };
        self.state.reports += 1;
        self.state.last_report = Some(report.clone());
        Ok(report)
    }
}

trait CorrelationExt {
    fn with_correlation_mut(&mut self, c: &str) -> &mut Self;
}

impl CorrelationExt for Envelope {
    fn with_correlation_mut(&mut self, c: &str) -> &mut Self {
        self.correlation = Some(c.to_string());
        self
    }
}

fn goto(house: &HouseState, from: Cell, to: Cell) -> Result<Vec<Command>, String> {
    let path = house.route(from, to).ok_or_else(|| "no-route".to_string())?;
    Ok(path.into_iter().map(|c| Command::Move { to: c }).collect())
}

/// Commands for one approach step given the house as it is now.
pub fn expand(template: &StepTemplate, house: &HouseState) -> Result<Vec<Command>, String> {
    let here = house.robot.cell;
    match template {
        StepTemplate::Goto { cell } => goto(house, here, *cell),
        StepTemplate::CleanZone { zone } => {
            let mut out = Vec::new();
            let mut at = here;
            for c in house.zone_cells(zone) {
                let dirt = house.cells.get(&c).map_or(0, |s| s.dirt);
                if dirt == 0 {
                    continue;
                }
                out.extend(goto(house, at, c)?);
                at = c;
                out.extend(std::iter::repeat_n(Command::CleanCell, usize::from(dirt)));
            }
            Ok(out)
        }
        StepTemplate::Grasp { object } => {
            let Some(target) = house.objects.get(object).filter(|o| o.present).and_then(|o| o.cell) else {
                return Ok(Vec::new());
            };
            let mut out = Vec::new();
            if here.manhattan(target) > 1 {
                let stand = target
                    .neighbours()
                    .into_iter()
                    .filter(|n| house.is_floor(*n) && !house.is_blocked(*n))
                    .filter_map(|n| house.route(here, n).map(|p| (p.len(), n)))
                    .min()
                    .map(|(_, n)| n)
                    .ok_or_else(|| "no-route".to_string())?;
                out.extend(goto(house, here, stand)?);
            }
            out.push(Command::Grasp { object: object.clone() });
            Ok(out)
        }
        StepTemplate::Release { .. } => Ok(if house.robot.holding.is_some() {
            vec![Command::Release]
        } else {
            Vec::new()
        }),
        StepTemplate::AskOwner { object } => Ok(vec![Command::AskOwner { object: object.clone() }]),
        StepTemplate::Speak { text } => Ok(vec![Command::Speak { text: text.clone() }]),
        StepTemplate::ApiCall { endpoint } => Ok(vec![Command::ApiCall { endpoint: endpoint.clone() }]),
        StepTemplate::Recharge { ticks } => {
            let mut out = goto(house, here, house.station)?;
            out.extend(std::iter::repeat_n(Command::Recharge, *ticks as usize));
            Ok(out)
        }
        StepTemplate::Raw { command } => Ok(vec![command.clone()]),
    }
}

impl Layer for TaskProsecution {
    fn id(&self) -> LayerId {
        LayerId::TaskProsecution
    }

    fn handle(&mut self, env: &Envelope, ctx: &mut Ctx<'_>) {
        if let Payload::TaskInstruction(ti) = &env.payload {
            if self.state.active.is_some() {
                let _ = self.finish(OutcomeStatus::Failure, Some("preempted".into()), ctx);
            }
            self.state.active = Some(Active {
                templates: ti.task.approach.iter().cloned().collect(),
                settle_left: ti.task.settle_ticks,
                task: ti.task.clone(),
                queue: VecDeque::new(),
                started: false,
                commands: Vec::new(),
                energy: 0,
            });
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cognition::RuleEngine;
    use crate::config::Settings;
    use crate::docs::TaskInstruction;
    use crate::predicate::{Cmp, Predicate};
    use crate::sim::{Scenario, Verb};

    fn house(extra: &str) -> HouseState {
        let text = format!(
            r#"{{
                "name": "t", "width": 5, "height": 3,
                "station": [0,1],
                "robot": {{"cell": [0,1], "battery": 100}},
                "budget": {{"energy": 100, "time": 100, "money": 0}},
                "zones": [
                    {{"id": "counters", "room": "kitchen", "task": "clear counters",
                      "cells": [{{"cell": [1,0], "dirt": 1}}, {{"cell": [2,0], "dirt": 1}}],
                      "essential": true, "urgency": 0.7, "importance": 0.8}}
                ]{extra}
            }}"#
        );
        HouseState::from_scenario(&Scenario::from_json(&text).unwrap())
    }

    fn clean_task() -> TaskSpec {
        TaskSpec {
            id: "clear-counters".into(),
            objective_ref: "o".into(),
            title: "clear counters".into(),
            methodology: String::new(),
            approach: vec![ApproachStep::new(StepTemplate::CleanZone { zone: "counters".into() })],
            success_def: Predicate::atom("kitchen.counters.dirt", Cmp::Eq, 0),
            failure_def: Predicate::Const(false),
            failure_reason: "x".into(),
            cost: ResourceState::new(10, 0, 0),
            prerequisites: vec![],
            essential: true,
            urgency: 0.7,
            importance: 0.8,
            tags: vec![],
            capabilities: vec!["clean_cell".into()],
            settle_ticks: 0,
            contingency_for: None,
        }
    }

    fn dispatch(tp: &mut TaskProsecution, task: TaskSpec, s: &Settings, e: &RuleEngine) -> Vec<Envelope> {
        let env = Envelope::new(
            LayerId::CognitiveControl,
            LayerId::TaskProsecution,
            Payload::TaskInstruction(TaskInstruction {
                task,
                roadmap_version: 1,
                attempt: 1,
                preempts: None,
            }),
        );
        let mut ctx = Ctx::new(LayerId::TaskProsecution, 0, s, e, 1);
        tp.handle(&env, &mut ctx);
        ctx.into_outbox()
    }

    fn run_to_end(tp: &mut TaskProsecution, h: &mut HouseState) -> (ExecutionReport, Vec<Envelope>) {
        let s = Settings::default();
        let e = RuleEngine::new();
        let token = h.take_effector_token().unwrap();
        for t in 1..200 {
            h.tick = t;
            let mut ctx = Ctx::new(LayerId::TaskProsecution, t, &s, &e, 1);
            let step = tp.advance(h, &token, &mut ctx);
            if let Some(r) = step.finished {
                return (r, ctx.into_outbox());
            }
        }
        panic!("task never finished");
    }

    #[test]
    fn clean_zone_succeeds_and_reports_every_command() {
        let mut h = house("");
        let before = h.robot.battery;
        let mut tp = TaskProsecution::new();
        let s = Settings::default();
        let e = RuleEngine::new();
        dispatch(&mut tp, clean_task(), &s, &e);
        let (report, out) = run_to_end(&mut tp, &mut h);
        assert_eq!(report.status, OutcomeStatus::Success);
        // (0,1) -> (1,1) -> (1,0), clean, (2,0), clean
        let verbs: Vec<Verb> = report.commands.iter().map(|c| c.command.verb()).collect();
        assert_eq!(verbs, vec![Verb::Move, Verb::Move, Verb::CleanCell, Verb::Move, Verb::CleanCell]);
        let costs = h.costs;
        let expected: u32 = verbs.iter().map(|v| costs.cost(*v)).sum();
        assert_eq!(report.energy, expected);
        assert_eq!(before - h.robot.battery, expected);
        assert_eq!(out[0].kind, crate::messaging::MessageKind::OutcomeSignal);
        assert_eq!(out[0].salience, salience::SUCCESS);
        assert_eq!(out[0].correlation.as_deref(), Some("clear-counters"));
        assert!(tp.is_idle());
    }

    #[test]
    fn failure_reaches_executive_function_in_two_hops() {
        let mut h = house(r#", "faults": [{"verb": "clean_cell", "zone": "counters", "reason": "switch-stuck"}]"#);
        let mut tp = TaskProsecution::new();
        let s = Settings::default();
        let e = RuleEngine::new();
        let mut task = clean_task();
        task.approach = vec![ApproachStep::required(StepTemplate::CleanZone { zone: "counters".into() })];
        dispatch(&mut tp, task, &s, &e);
        let (report, out) = run_to_end(&mut tp, &mut h);
        assert_eq!(report.reason.as_deref(), Some("switch-stuck"));
        let outcome = &out[0];
        assert_eq!(outcome.salience, salience::FAILURE);
        let mut cc = Ctx::new(LayerId::CognitiveControl, 1, &s, &e, 1);
        assert!(cc.percolate(outcome));
        let hop = cc.into_outbox().pop().unwrap();
        assert_eq!(hop.target, LayerId::ExecutiveFunction);
    }

    #[test]
    fn exhausted_approach_fails_with_success_not_achieved() {
        let mut h = house("");
        let mut tp = TaskProsecution::new();
        let s = Settings::default();
        let e = RuleEngine::new();
        let mut task = clean_task();
        task.approach = vec![ApproachStep::new(StepTemplate::Speak { text: "hello".into() })];
        task.settle_ticks = 2;
        dispatch(&mut tp, task, &s, &e);
        let (report, _) = run_to_end(&mut tp, &mut h);
        assert_eq!(report.reason.as_deref(), Some("success-not-achieved"));
        assert_eq!(report.commands.len(), 1);
    }

    #[test]
    fn unregistered_effector_fails_immediately() {
        let mut h = house(r#", "effectors": ["move", "speak"]"#);
        let mut tp = TaskProsecution::new();
        let s = Settings::default();
        let e = RuleEngine::new();
        dispatch(&mut tp, clean_task(), &s, &e);
        let (report, _) = run_to_end(&mut tp, &mut h);
        assert_eq!(report.reason.as_deref(), Some("unsupported-effector"));
        assert!(report.commands.is_empty());
    }

    #[test]
    fn emit_without_dispatch_is_a_protocol_error() {
        let mut tp = TaskProsecution::new();
        let s = Settings::default();
        let e = RuleEngine::new();
        let mut ctx = Ctx::new(LayerId::TaskProsecution, 0, &s, &e, 1);
        assert_eq!(
            tp.emit(OutcomeStatus::Success, None, &mut ctx).unwrap_err(),
            ProtocolError::NoDispatch
        );
        assert!(ctx.outbox().is_empty());
    }

    #[test]
    fn new_instruction_preempts_current_task() {
        let mut tp = TaskProsecution::new();
        let s = Settings::default();
        let e = RuleEngine::new();
        dispatch(&mut tp, clean_task(), &s, &e);
        let mut other = clean_task();
        other.id = "other".into();
        let out = dispatch(&mut tp, other, &s, &e);
        let Payload::OutcomeSignal(o) = &out[0].payload else { panic!() };
        assert_eq!(o.task_id, "clear-counters");
        assert_eq!(o.reason.as_deref(), Some("preempted"));
        assert_eq!(tp.current(), Some("other"));
    }
}
