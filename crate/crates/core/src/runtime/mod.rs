//! The scheduler. Each tick injects environment events, lets every layer
//! drain its inbox in rank order, advances the effectors by one command and
//! takes durable snapshots. Everything observable goes to the trace.

pub mod inspect;
pub mod replay;
pub mod trace;

use std::any::Any;
use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::cognition::CognitionEngine;
use crate::config::{ConfigError, Settings};
use crate::constitution::{Constitution, ConstitutionError};
use crate::docs::{Payload, TelemetryDoc};
use crate::layers::agent_model::DeclarativeStore;
use crate::layers::executive::MAINTENANCE_ENDPOINT;
use crate::layers::{
    salience, AgentModel, Aspirational, CognitiveControl, Ctx, ExecutiveFunction, GlobalStrategy,
    Layer, TaskProsecution,
};
use crate::messaging::{Bus, Caller, Endpoint, Envelope, LayerId, MessageKind, Tap};
use crate::sim::{due_events, EffectorToken, HouseState, Scenario};

pub use trace::{Activity, EndStatus, Header, TraceRecord};

#[derive(Debug, Error)]
pub enum RunConfigError {
    #[error("max_ticks must be greater than zero")]
    ZeroTicks,
    #[error("constitution: {0}")]
    Constitution(#[from] ConstitutionError),
    #[error("override: {0}")]
    Setting(#[from] ConfigError),
    #[error("trace version {0} is not supported")]
    Version(u32),
}

/// Inputs of a run.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub scenario: Scenario,
    pub constitution: String,
    pub seed: u64,
    pub max_ticks: u64,
    /// `key=value` pairs applied after the scenario's own configuration.
    pub overrides: Vec<String>,
    pub memory: DeclarativeStore,
    pub concurrent: bool,
}

impl RunSpec {
    pub fn new(scenario: Scenario, constitution: impl Into<String>, seed: u64) -> Self {
        RunSpec {
            scenario,
            constitution: constitution.into(),
            seed,
            max_ticks: 500,
            overrides: Vec::new(),
            memory: DeclarativeStore::default(),
            concurrent: false,
        }
    }

    /// Validates the spec and resolves the effective settings.
    pub fn header(&self, cognition: &str) -> Result<Header, RunConfigError> {
        if self.max_ticks == 0 {
            return Err(RunConfigError::ZeroTicks);
        }
        Constitution::parse(&self.constitution)?;
        let mut settings = Settings::default();
        for (k, v) in &self.scenario.config {
            let v = match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            settings.apply(k, &v)?;
        }
        for o in &self.overrides {
            settings.apply_str(o)?;
        }
        Ok(Header {
            version: trace::TRACE_VERSION,
            seed: self.seed,
            max_ticks: self.max_ticks,
            cognition: cognition.to_string(),
            concurrent: self.concurrent,
            settings,
            scenario: self.scenario.clone(),
            constitution: self.constitution.clone(),
            memory: self.memory.clone(),
        })
    }
}

/// The six layers, owned by the scheduler.
pub struct Layers {
    pub aspirational: Aspirational,
    pub global_strategy: GlobalStrategy,
    pub agent_model: AgentModel,
    pub executive: ExecutiveFunction,
    pub cognitive_control: CognitiveControl,
    pub task_prosecution: TaskProsecution,
}

impl Layers {
    pub fn get(&self, id: LayerId) -> &dyn Layer {
        match id {
            LayerId::Aspirational => &self.aspirational,
            LayerId::GlobalStrategy => &self.global_strategy,
            LayerId::AgentModel => &self.agent_model,
            LayerId::ExecutiveFunction => &self.executive,
            LayerId::CognitiveControl => &self.cognitive_control,
            LayerId::TaskProsecution => &self.task_prosecution,
        }
    }

    pub fn get_mut(&mut self, id: LayerId) -> &mut dyn Layer {
        match id {
            LayerId::Aspirational => &mut self.aspirational,
            LayerId::GlobalStrategy => &mut self.global_strategy,
            LayerId::AgentModel => &mut self.agent_model,
            LayerId::ExecutiveFunction => &mut self.executive,
            LayerId::CognitiveControl => &mut self.cognitive_control,
            LayerId::TaskProsecution => &mut self.task_prosecution,
        }
    }

    fn all_mut(&mut self) -> [&mut dyn Layer; 6] {
        [
            &mut self.aspirational,
            &mut self.global_strategy,
            &mut self.agent_model,
            &mut self.executive,
            &mut self.cognitive_control,
            &mut self.task_prosecution,
        ]
    }

    pub fn snapshots(&self) -> BTreeMap<LayerId, serde_json::Value> {
        LayerId::ALL.iter().map(|&id| (id, self.get(id).snapshot())).collect()
    }
}

/// A layer activity that panicked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub layer: LayerId,
    pub tick: u64,
    pub message: String,
}

struct World<'a> {
    layers: &'a mut Layers,
    house: &'a mut HouseState,
    token: &'a EffectorToken,
}

pub struct Machine {
    header: Header,
    settings: Arc<Settings>,
    engine: Arc<dyn CognitionEngine>,
    bus: Bus,
    house: HouseState,
    token: EffectorToken,
    tap: Tap,
    layers: Layers,
    halted: [bool; 6],
    durable: Vec<serde_json::Value>,
    tick: u64,
    lines: Vec<String>,
    status: Option<EndStatus>,
    failure: Option<Failure>,
}

fn panic_message(p: Box<dyn Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".to_string()
    }
}

impl Machine {
    pub fn new(header: Header, engine: Arc<dyn CognitionEngine>) -> Result<Machine, RunConfigError> {
        if header.version != trace::TRACE_VERSION {
            return Err(RunConfigError::Version(header.version));
        }
        if header.max_ticks == 0 {
            return Err(RunConfigError::ZeroTicks);
        }
        let constitution = Arc::new(Constitution::parse(&header.constitution)?);
        let settings = header.settings.clone();
        let scenario = &header.scenario;
        let mut house = HouseState::from_scenario(scenario);
        let token = house
            .take_effector_token()
            .expect("a fresh house issues its token");
        let bus = Bus::new().with_gate(settings.gated.iter().copied());
        let tap = bus
            .tap(Caller::Layer(LayerId::Aspirational))
            .expect("the aspirational layer is a monitor");
        let mut endpoints: Vec<String> = scenario.api_endpoints.iter().map(|e| e.name.clone()).collect();
        if !endpoints.iter().any(|e| e == MAINTENANCE_ENDPOINT) {
            endpoints.push(MAINTENANCE_ENDPOINT.to_string());
        }
        let layers = Layers {
            aspirational: Aspirational::new(constitution),
            global_strategy: GlobalStrategy::new(&scenario.strategy_rules),
            agent_model: AgentModel::new(settings.clone(), header.memory.clone()),
            executive: ExecutiveFunction::new(scenario.budget, endpoints),
            cognitive_control: CognitiveControl::new(&settings),
            task_prosecution: TaskProsecution::new(),
        };
        let durable = LayerId::ALL.iter().map(|&id| layers.get(id).snapshot()).collect();
        Ok(Machine {
            header,
            settings: Arc::new(settings),
            engine,
            bus,
            house,
            token,
            tap,
            layers,
            halted: [false; 6],
            durable,
            tick: 0,
            lines: Vec::new(),
            status: None,
            failure: None,
        })
    }

    /// Validates `spec` and builds a machine using `engine` for every layer.
    pub fn from_spec(spec: &RunSpec, engine: Arc<dyn CognitionEngine>) -> Result<Machine, RunConfigError> {
        let header = spec.header(engine.name())?;
        Machine::new(header, engine)
    }

    pub fn header(&self) -> &Header {
        &self.header
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    pub fn house(&self) -> &HouseState {
        &self.house
    }

    pub fn layers(&self) -> &Layers {
        &self.layers
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn trace_text(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }

    pub fn write_trace(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.trace_text())
    }

    pub fn status(&self) -> Option<EndStatus> {
        self.status
    }

    pub fn failure(&self) -> Option<&Failure> {
        self.failure.as_ref()
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn is_halted(&self, layer: LayerId) -> bool {
        self.halted[layer.index()]
    }

    fn push(&mut self, record: TraceRecord) {
        self.lines.push(record.to_line());
    }

    /// Runs until quiescence, `max_ticks` or a layer failure.
    pub fn run(&mut self) -> EndStatus {
        if let Some(s) = self.status {
            return s;
        }
        self.push(TraceRecord::Header(Box::new(self.header.clone())));
        for t in 0..self.header.max_ticks {
            self.tick = t;
            self.house.tick = t;
            if let Err(f) = self.step() {
                self.push(TraceRecord::End {
                    tick: t,
                    status: EndStatus::Failure,
                    layer: Some(f.layer),
                    detail: Some(f.message.clone()),
                });
                self.failure = Some(f);
                self.status = Some(EndStatus::Failure);
                return EndStatus::Failure;
            }
            self.durable = LayerId::ALL.iter().map(|&id| self.layers.get(id).snapshot()).collect();
            if self.quiescent() {
                return self.finish(EndStatus::Quiescent);
            }
        }
        self.finish(EndStatus::MaxTicks)
    }

    fn finish(&mut self, status: EndStatus) -> EndStatus {
        self.push(TraceRecord::Snapshot {
            tick: self.tick,
            layers: self.layers.snapshots(),
            world: self.house.oracle_snapshot(),
        });
        self.push(TraceRecord::End {
            tick: self.tick,
            status,
            layer: None,
            detail: None,
        });
        self.status = Some(status);
        status
    }

    fn step(&mut self) -> Result<(), Failure> {
        if self.tick == 0 {
            self.boot()?;
        }
        self.inject();
        if self.header.concurrent {
            self.layer_phase_concurrent()?;
        } else {
            for id in LayerId::ALL {
                self.layer_phase(id)?;
            }
        }
        self.env_phase()
    }

    fn boot(&mut self) -> Result<(), Failure> {
        let caps = self.header.scenario.capabilities.clone();
        let limits = self.header.scenario.limitations.clone();
        self.activity(LayerId::AgentModel, Activity::Boot, None, None, move |w, _| {
            w.layers.agent_model.boot(caps, limits);
            Vec::new()
        })?;
        self.activity(LayerId::Aspirational, Activity::Boot, None, None, |w, ctx| {
            w.layers.aspirational.issue_missions(ctx);
            Vec::new()
        })?;
        let survey = self.house.survey();
        self.push(TraceRecord::Inject {
            tick: 0,
            event: survey.event.clone(),
            targets: vec![LayerId::GlobalStrategy, LayerId::ExecutiveFunction],
        });
        let power = Payload::Telemetry(TelemetryDoc::Power {
            battery: self.house.robot.battery,
            capacity: self.house.robot.capacity,
        });
        self.publish_from_env(LayerId::GlobalStrategy, Payload::WorldEvent(survey.clone()), None);
        self.publish_from_env(LayerId::ExecutiveFunction, Payload::WorldEvent(survey), None);
        self.publish_from_env(LayerId::ExecutiveFunction, power, Some(salience::POWER));
        Ok(())
    }

    fn publish_from_env(&mut self, target: LayerId, payload: Payload, salience: Option<f64>) {
        let mut env = Envelope::new(Endpoint::Environment, target, payload).at_tick(self.tick);
        if let Some(s) = salience {
            env.salience = s;
        }
        self.publish_all(vec![env]);
    }

    fn inject(&mut self) {
        let t = self.tick;
        for ev in self.house.owner_responses(t) {
            self.push(TraceRecord::Owner {
                tick: t,
                event: ev.event.clone(),
            });
            self.publish_from_env(LayerId::CognitiveControl, Payload::WorldEvent(ev), None);
        }
        let due: Vec<_> = due_events(&self.header.scenario.schedule, t).cloned().collect();
        for ev in due {
            let doc = self.house.inject(&ev);
            self.push(TraceRecord::Inject {
                tick: t,
                event: doc.event.clone(),
                targets: ev.targets.clone(),
            });
            for target in &ev.targets {
                self.publish_from_env(*target, Payload::WorldEvent(doc.clone()), None);
            }
        }
    }

    fn publish_all(&mut self, outbox: Vec<Envelope>) {
        for env in outbox {
            // Rejections are recorded in the audit trail.
            let _ = self.bus.publish(env);
        }
        for a in self.bus.drain_new_audit() {
            self.push(TraceRecord::Audit {
                tick: self.tick,
                seq: a.seq,
                verdict: a.verdict,
                reason: a.reason,
                envelope: a.envelope,
                subject: a.subject,
            });
        }
    }

    fn panic_due(&self, layer: LayerId) -> bool {
        self.header
            .scenario
            .panic
            .as_ref()
            .is_some_and(|p| p.layer == layer && p.tick == self.tick)
    }

    /// Runs one handler invocation. Its trace lines are written only if it
    /// returns normally.
    fn activity<F>(
        &mut self,
        layer: LayerId,
        activity: Activity,
        seq: Option<u64>,
        kind: Option<MessageKind>,
        f: F,
    ) -> Result<(), Failure>
    where
        F: FnOnce(&mut World<'_>, &mut Ctx<'_>) -> Vec<TraceRecord>,
    {
        let settings = Arc::clone(&self.settings);
        let engine = Arc::clone(&self.engine);
        let mut ctx = Ctx::new(layer, self.tick, &settings, &*engine, self.header.seed);
        let mut world = World {
            layers: &mut self.layers,
            house: &mut self.house,
            token: &self.token,
        };
        let result = panic::catch_unwind(AssertUnwindSafe(|| f(&mut world, &mut ctx)));
        let extra = result.map_err(|p| Failure {
            layer,
            tick: self.tick,
            message: panic_message(p),
        })?;
        self.push(TraceRecord::Process {
            tick: self.tick,
            layer,
            activity,
            seq,
            kind,
        });
        for r in extra {
            self.push(r);
        }
        self.publish_all(ctx.into_outbox());
        Ok(())
    }

    fn inject_fault(&mut self, layer: LayerId) -> Result<(), Failure> {
        if !self.panic_due(layer) {
            return Ok(());
        }
        let tick = self.tick;
        self.activity(layer, Activity::Fault, None, None, move |_, _| {
            panic!("injected fault in {layer} at tick {tick}")
        })
    }

    fn control(&mut self, id: LayerId) -> Result<(), Failure> {
        while let Some(env) = self.bus.take_control(id) {
            let i = id.index();
            match env.kind {
                MessageKind::Halt => self.halted[i] = true,
                MessageKind::Reboot => {
                    let snapshot = self.durable[i].clone();
                    self.layers
                        .get_mut(id)
                        .restore(&snapshot)
                        .map_err(|e| Failure {
                            layer: id,
                            tick: self.tick,
                            message: format!("reboot failed: {e}"),
                        })?;
                    self.halted[i] = false;
                }
                _ => {}
            }
            self.push(TraceRecord::Process {
                tick: self.tick,
                layer: id,
                activity: Activity::Control,
                seq: Some(env.seq),
                kind: Some(env.kind),
            });
        }
        Ok(())
    }

    fn review(&mut self) -> Result<(), Failure> {
        let fresh = self.bus.read_tap(&mut self.tap);
        let items: Vec<(Envelope, bool)> = fresh
            .into_iter()
            .filter(|e| e.source != Endpoint::Layer(LayerId::Aspirational))
            .map(|e| {
                let held = self.bus.is_held(e.seq);
                (e, held)
            })
            .collect();
        if items.is_empty() {
            return Ok(());
        }
        self.activity(LayerId::Aspirational, Activity::Review, None, None, move |w, ctx| {
            for (env, held) in &items {
                w.layers.aspirational.review(env, *held, ctx);
            }
            Vec::new()
        })?;
        for seq in self.layers.aspirational.take_releases() {
            if self.bus.release(&self.tap, seq) {
                self.push(TraceRecord::Release { tick: self.tick, seq });
            }
        }
        Ok(())
    }

    fn layer_phase(&mut self, id: LayerId) -> Result<(), Failure> {
        self.inject_fault(id)?;
        self.control(id)?;
        if self.halted[id.index()] {
            return Ok(());
        }
        if id == LayerId::Aspirational {
            self.review()?;
        }
        while let Some(seq) = self.bus.next_ready(id) {
            let env = self.bus.take(id, seq).expect("ready envelope is in the inbox");
            let kind = env.kind;
            self.activity(id, Activity::Handle, Some(seq), Some(kind), move |w, ctx| {
                w.layers.get_mut(id).handle(&env, ctx);
                Vec::new()
            })?;
        }
        if self.layers.get(id).has_pending_work() {
            self.activity(id, Activity::Pending, None, None, move |w, ctx| {
                w.layers.get_mut(id).on_pending(ctx);
                Vec::new()
            })?;
        }
        Ok(())
    }

    /// One thread per layer. Each layer handles the envelopes that were
    /// ready at the start of the phase; outboxes are published in rank
    /// order once every thread has finished.
    fn layer_phase_concurrent(&mut self) -> Result<(), Failure> {
        for id in LayerId::ALL {
            self.inject_fault(id)?;
            self.control(id)?;
        }
        if !self.halted[LayerId::Aspirational.index()] {
            self.review()?;
        }
        let mut work: Vec<Vec<Envelope>> = Vec::with_capacity(6);
        for id in LayerId::ALL {
            let mut envs = Vec::new();
            if !self.halted[id.index()] {
                while let Some(seq) = self.bus.next_ready(id) {
                    envs.push(self.bus.take(id, seq).expect("ready envelope is in the inbox"));
                }
            }
            work.push(envs);
        }
        let halted = self.halted;
        let tick = self.tick;
        let seed = self.header.seed;
        let settings = Arc::clone(&self.settings);
        let engine = Arc::clone(&self.engine);
        type Done = Vec<(Activity, Option<u64>, Option<MessageKind>, Vec<Envelope>)>;
        let results: Vec<std::thread::Result<Done>> = std::thread::scope(|s| {
            let handles: Vec<_> = self
                .layers
                .all_mut()
                .into_iter()
                .zip(work)
                .enumerate()
                .map(|(i, (layer, envs))| {
                    let settings = &*settings;
                    let engine = &*engine;
                    s.spawn(move || {
                        let id = LayerId::ALL[i];
                        let mut done: Done = Vec::new();
                        for env in envs {
                            let mut ctx = Ctx::new(id, tick, settings, engine, seed);
                            layer.handle(&env, &mut ctx);
                            done.push((Activity::Handle, Some(env.seq), Some(env.kind), ctx.into_outbox()));
                        }
                        if !halted[i] && layer.has_pending_work() {
                            let mut ctx = Ctx::new(id, tick, settings, engine, seed);
                            layer.on_pending(&mut ctx);
                            done.push((Activity::Pending, None, None, ctx.into_outbox()));
                        }
                        done
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join()).collect()
        });
        for (i, r) in results.into_iter().enumerate() {
            let id = LayerId::ALL[i];
            let done = r.map_err(|p| Failure {
                layer: id,
                tick,
                message: panic_message(p),
            })?;
            for (activity, seq, kind, outbox) in done {
                self.push(TraceRecord::Process {
                    tick,
                    layer: id,
                    activity,
                    seq,
                    kind,
                });
                self.publish_all(outbox);
            }
        }
        Ok(())
    }

    fn env_phase(&mut self) -> Result<(), Failure> {
        if self.layers.task_prosecution.is_idle() || self.halted[LayerId::TaskProsecution.index()] {
            return Ok(());
        }
        let tick = self.tick;
        self.activity(LayerId::TaskProsecution, Activity::Env, None, None, move |w, ctx| {
            let task = w.layers.task_prosecution.current().map(str::to_string);
            let step = w.layers.task_prosecution.advance(w.house, w.token, ctx);
            vec![TraceRecord::Env {
                tick,
                task,
                command: step.command.map(|c| c.command),
                accepted: step.result.as_ref().map(|r| r.accepted),
                reason: step.result.as_ref().and_then(|r| r.reason.clone()),
                energy: step.result.as_ref().map_or(0, |r| r.energy),
                battery: w.house.robot.battery,
                waited: step.waited,
                finished: step.finished.map(|f| f.status),
            }]
        })
    }

    /// Nothing left to do: no envelopes, no dispatched task, no owner
    /// response or scheduled event still to come, nothing unreviewed.
    pub fn quiescent(&self) -> bool {
        for id in LayerId::ALL {
            if self.bus.control_len(id) > 0 {
                return false;
            }
            if self.halted[id.index()] {
                continue;
            }
            if self.bus.inbox_len(id) > 0 || self.layers.get(id).has_pending_work() {
                return false;
            }
        }
        self.layers.task_prosecution.is_idle()
            && self.house.owner.pending.is_empty()
            && !self.header.scenario.schedule.iter().any(|e| e.tick > self.tick)
            && self.bus.delivered_len() == self.tap.position()
    }
}
