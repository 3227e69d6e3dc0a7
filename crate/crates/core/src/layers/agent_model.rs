//! Self-model. State is event-sourced from an append-only episodic log so a
//! replay of the log reproduces it exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{from_snapshot, to_snapshot, Ctx, Layer};
use crate::cognition::{CognitionResponse, RequestKind, ShapingItem};
use crate::config::Settings;
use crate::docs::{
    DeferredObjective, FeasibleObjective, MissionParams, Payload, StrategicDocument, TelemetryDoc,
};
use crate::messaging::{Envelope, LayerId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Operational {
    pub value: f64,
    pub units: String,
    pub tick: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub components: Vec<String>,
    pub links: Vec<(String, String)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub operational: BTreeMap<String, Operational>,
    pub configuration: Configuration,
    pub capabilities: BTreeMap<String, f64>,
    pub limitations: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeKind {
    Event,
    Action,
    Observation,
    Decision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Episode {
    Boot {
        capabilities: BTreeMap<String, f64>,
        limitations: Vec<String>,
    },
    Operational {
        param: String,
        value: f64,
        units: String,
    },
    Outcome {
        task_id: String,
        success: bool,
        capabilities: Vec<String>,
    },
    CapabilityUpdate {
        name: String,
        confidence: f64,
        demoted: bool,
    },
    Shaped {
        strategic_version: u64,
        feasible: Vec<String>,
        deferred: Vec<String>,
    },
    Note {
        text: String,
    },
}

impl Episode {
    pub fn kind(&self) -> EpisodeKind {
        match self {
            Episode::Boot { .. } | Episode::Note { .. } => EpisodeKind::Event,
            Episode::Operational { .. } | Episode::Outcome { .. } => EpisodeKind::Observation,
            Episode::CapabilityUpdate { .. } | Episode::Shaped { .. } => EpisodeKind::Decision,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodicRecord {
    pub seq: u64,
    pub tick: u64,
    pub kind: EpisodeKind,
    pub payload: Episode,
    #[serde(default)]
    pub metadata: Metadata,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MemoryError {
    #[error("episodic log corrupt at record {index}: expected seq {expected}, found {found}")]
    Corrupt { index: usize, expected: u64, found: u64 },
    #[error("memory store: {0}")]
    Store(String),
}

/// The confidence update rule. Unknown names start at the prior;
/// limitations are left alone. Returns the new confidence, or `None` when
/// the name is (or becomes) a limitation.
pub fn update_capability(state: &mut AgentState, name: &str, success: bool, s: &Settings) -> Option<f64> {
    if state.limitations.contains(name) {
        return None;
    }
    let c = *state.capabilities.get(name).unwrap_or(&s.prior);
    let next = if success {
        c + s.alpha * (1.0 - c)
    } else {
        c * (1.0 - s.beta)
    }
    .clamp(0.0, 1.0);
    if next < s.demotion_floor {
        state.capabilities.remove(name);
        state.limitations.insert(name.to_string());
        return None;
    }
    state.capabilities.insert(name.to_string(), next);
    Some(next)
}

/// Applies one record to the state. Shared by the online path and replay.
pub fn apply(state: &mut AgentState, record: &EpisodicRecord, s: &Settings) {
    match &record.payload {
        Episode::Boot {
            capabilities,
            limitations,
        } => {
            state.capabilities = capabilities.clone();
            for l in limitations {
                state.capabilities.remove(l);
                state.limitations.insert(l.clone());
            }
            state.configuration = Configuration {
                components: LayerId::ALL.iter().map(|l| l.to_string()).collect(),
                links: LayerId::ALL
                    .windows(2)
                    .map(|w| (w[0].to_string(), w[1].to_string()))
                    .collect(),
            };
        }
        Episode::Operational { param, value, units } => {
            let newer = state
                .operational
                .get(param)
                .is_none_or(|o| record.tick >= o.tick);
            if newer {
                state.operational.insert(
                    param.clone(),
                    Operational {
                        value: *value,
                        units: units.clone(),
                        tick: record.tick,
                    },
                );
            }
        }
        Episode::Outcome {
            success,
            capabilities,
            ..
        } => {
            for name in capabilities {
                update_capability(state, name, *success, s);
            }
        }
        Episode::CapabilityUpdate { .. } | Episode::Shaped { .. } | Episode::Note { .. } => {}
    }
}

/// Rebuilds state from a log, checking that sequence numbers run 1, 2, ...
pub fn replay(log: &[EpisodicRecord], s: &Settings) -> Result<AgentState, MemoryError> {
    let mut state = AgentState::default();
    for (i, r) in log.iter().enumerate() {
        let expected = i as u64 + 1;
        if r.seq != expected {
            return Err(MemoryError::Corrupt {
                index: i,
                expected,
                found: r.seq,
            });
        }
        apply(&mut state, r, s);
    }
    Ok(state)
}

/// Why a capability requirement cannot be met, if it cannot. A qualified
/// name like `cooking:complex` falls back to its base `cooking`.
pub fn assess(state: &AgentState, requirement: &str, feasibility: f64) -> Result<String, String> {
    let known = |n: &str| state.capabilities.contains_key(n) || state.limitations.contains(n);
    let name = if known(requirement) {
        requirement
    } else {
        requirement.split(':').next().unwrap_or(requirement)
    };
    if state.limitations.contains(name) {
        return Err(format!("limitation:{name}"));
    }
    match state.capabilities.get(name) {
        None => Err(format!("unknown-capability:{name}")),
        Some(&c) if c < feasibility => Err(format!("low-confidence:{name}")),
        Some(_) => Ok(name.to_string()),
    }
}

/// Splits objectives into feasible and deferred by capability.
pub fn partition(doc: &StrategicDocument, state: &AgentState, feasibility: f64) -> (Vec<FeasibleObjective>, Vec<DeferredObjective>) {
    let mut feasible = Vec::new();
    let mut deferred = Vec::new();
    for o in &doc.objectives {
        let mut caps = Vec::new();
        let mut reasons = Vec::new();
        for req in &o.requires {
            match assess(state, req, feasibility) {
                Ok(c) => caps.push(c),
                Err(r) => reasons.push(r),
            }
        }
        if reasons.is_empty() {
            feasible.push(FeasibleObjective {
                objective: o.clone(),
                required_capabilities: caps,
                min_confidence_met: true,
                annotations: Vec::new(),
            });
        } else {
            deferred.push(DeferredObjective {
                objective: o.clone(),
                reasons,
                annotations: Vec::new(),
            });
        }
    }
    (feasible, deferred)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeclarativeDoc {
    pub id: String,
    pub title: String,
    pub body: String,
    pub tags: Vec<String>,
}

/// Read-only knowledge documents, persisted as JSON lines.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeclarativeStore {
    docs: BTreeMap<String, DeclarativeDoc>,
}

impl DeclarativeStore {
    pub fn load(path: &Path) -> Result<DeclarativeStore, MemoryError> {
        let mut store = DeclarativeStore::default();
        if !path.exists() {
            return Ok(store);
        }
        let text = std::fs::read_to_string(path).map_err(|e| MemoryError::Store(e.to_string()))?;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let doc: DeclarativeDoc = serde_json::from_str(line)
                .map_err(|e| MemoryError::Store(format!("line {}: {e}", i + 1)))?;
            store.docs.insert(doc.id.clone(), doc);
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<(), MemoryError> {
        let mut out = String::new();
        for d in self.docs.values() {
            out.push_str(&serde_json::to_string(d).expect("doc serializes"));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| MemoryError::Store(e.to_string()))
    }

    /// Parses a text document: first line is the title, an optional
    /// `tags:` line follows, the rest is the body.
    pub fn parse_text(id: &str, text: &str) -> DeclarativeDoc {
        let mut lines = text.lines();
        let title = lines.next().unwrap_or_default().trim().trim_start_matches('#').trim().to_string();
        let rest: Vec<&str> = lines.collect();
        let (tags, body) = match rest.first() {
            Some(l) if l.trim_start().to_lowercase().starts_with("tags:") => (
                l.trim_start()[5..]
                    .split(',')
                    .map(|t| t.trim().to_string())
                    .filter(|t| !t.is_empty())
                    .collect(),
                &rest[1..],
            ),
            _ => (Vec::new(), &rest[..]),
        };
        DeclarativeDoc {
            id: id.to_string(),
            title,
            body: body.join("\n").trim().to_string(),
            tags,
        }
    }

    /// Ingests every `.txt` and `.md` file of a directory. Re-ingesting a
    /// file with the same stem replaces the earlier document.
    pub fn ingest_dir(&mut self, dir: &Path) -> Result<usize, MemoryError> {
        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| MemoryError::Store(e.to_string()))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| matches!(p.extension().and_then(|x| x.to_str()), Some("txt" | "md")))
            .collect();
        entries.sort();
        for p in &entries {
            let text = std::fs::read_to_string(p).map_err(|e| MemoryError::Store(e.to_string()))?;
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("doc");
            let doc = DeclarativeStore::parse_text(&crate::cognition::slug(stem), &text);
            self.docs.insert(doc.id.clone(), doc);
        }
        Ok(entries.len())
    }

    pub fn insert(&mut self, doc: DeclarativeDoc) {
        self.docs.insert(doc.id.clone(), doc);
    }

    pub fn by_tag<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = &'a DeclarativeDoc> + 'a {
        self.docs.values().filter(move |d| d.tags.iter().any(|t| t == tag))
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct State {
    log: Vec<EpisodicRecord>,
    agent: AgentState,
    current: Option<StrategicDocument>,
    excluded: BTreeSet<String>,
}

pub struct AgentModel {
    settings: Settings,
    memory: DeclarativeStore,
    state: State,
}

impl AgentModel {
    pub fn new(settings: Settings, memory: DeclarativeStore) -> Self {
        AgentModel {
            settings,
            memory,
            state: State::default(),
        }
    }

    pub fn log(&self) -> &[EpisodicRecord] {
        &self.state.log
    }

    pub fn agent(&self) -> &AgentState {
        &self.state.agent
    }

    /// Appends and applies a record. The next seq is always last + 1.
    pub fn record(&mut self, tick: u64, payload: Episode, metadata: Metadata) -> u64 {
        let seq = self.state.log.len() as u64 + 1;
        let record = EpisodicRecord {
            seq,
            tick,
            kind: payload.kind(),
            payload,
            metadata,
        };
        apply(&mut self.state.agent, &record, &self.settings);
        self.state.log.push(record);
        seq
    }

    /// Seeds capabilities; recorded so that replay reproduces them.
    pub fn boot(&mut self, capabilities: BTreeMap<String, f64>, limitations: Vec<String>) {
        self.record(
            0,
            Episode::Boot {
                capabilities,
                limitations,
            },
            Metadata::default(),
        );
    }

    fn ingest_telemetry(&mut self, env: &Envelope, t: &TelemetryDoc) {
        let meta = Metadata {
            location: None,
            correlation: env.correlation.clone(),
        };
        let op = |me: &mut Self, param: &str, value: f64, units: &str| {
            me.record(
                env.tick,
                Episode::Operational {
                    param: param.into(),
                    value,
                    units: units.into(),
                },
                meta.clone(),
            );
        };
        match t {
            TelemetryDoc::Power { battery, capacity } => {
                op(self, "battery", f64::from(*battery), "energy");
                op(self, "capacity", f64::from(*capacity), "energy");
            }
            TelemetryDoc::Geospatial { cell } => {
                op(self, "x", f64::from(cell.0), "cell");
                op(self, "y", f64::from(cell.1), "cell");
            }
            TelemetryDoc::TaskResult {
                task_id,
                success,
                capabilities,
                ..
            } => {
                self.record(
                    env.tick,
                    Episode::Outcome {
                        task_id: task_id.clone(),
                        success: *success,
                        capabilities: capabilities.clone(),
                    },
                    meta.clone(),
                );
                for name in capabilities {
                    let demoted = self.state.agent.limitations.contains(name);
                    let confidence = self.state.agent.capabilities.get(name).copied().unwrap_or(0.0);
                    self.record(
                        env.tick,
                        Episode::CapabilityUpdate {
                            name: name.clone(),
                            confidence,
                            demoted,
                        },
                        meta.clone(),
                    );
                }
            }
            TelemetryDoc::Deliberation { deliberation } => {
                self.record(
                    env.tick,
                    Episode::Note {
                        text: deliberation.record.clone(),
                    },
                    meta,
                );
            }
            TelemetryDoc::Escalation { detail, .. } | TelemetryDoc::Status { message: detail } => {
                self.record(env.tick, Episode::Note { text: detail.clone() }, meta);
            }
            TelemetryDoc::Decision { .. } | TelemetryDoc::Checkpoint { .. } => {}
        }
    }

    /// Shapes the current strategic document into mission parameters.
    pub fn shape_mission(&mut self, ctx: &mut Ctx<'_>) {
        let Some(mut doc) = self.state.current.clone() else {
            return;
        };
        doc.objectives.retain(|o| !self.state.excluded.contains(&o.id));
        let (mut feasible, mut deferred) = partition(&doc, &self.state.agent, self.settings.feasibility);

        let items: Vec<ShapingItem> = feasible
            .iter()
            .map(|f| ShapingItem {
                objective: f.objective.clone(),
                deferred: None,
            })
            .chain(deferred.iter().map(|d| ShapingItem {
                objective: d.objective.clone(),
                deferred: Some(d.clone()),
            }))
            .collect();
        let request = ctx
            .request(RequestKind::ShapeMission)
            .with("objectives", &items)
            .with("agent_state", &self.state.agent);
        if let Ok(CognitionResponse::ShapeMission(notes)) = ctx.evaluate(&request) {
            for d in &mut deferred {
                if let Some(a) = notes.annotations.get(&d.objective.id) {
                    d.annotations.extend(a.iter().cloned());
                }
            }
            for f in &mut feasible {
                if let Some(a) = notes.annotations.get(&f.objective.id) {
                    f.annotations.extend(a.iter().cloned());
                }
            }
        }
        for f in &mut feasible {
            for tag in &f.objective.tags {
                for d in self.memory.by_tag(tag) {
                    f.annotations.push(format!("reference:{}", d.id));
                }
            }
        }

        let shaped = self.record(
            ctx.tick,
            Episode::Shaped {
                strategic_version: doc.version,
                feasible: feasible.iter().map(|f| f.objective.id.clone()).collect(),
                deferred: deferred.iter().map(|d| d.objective.id.clone()).collect(),
            },
            Metadata {
                location: None,
                correlation: Some(doc.mission_ref.clone()),
            },
        );
        let params = MissionParams {
            strategic_ref: doc.mission_ref.clone(),
            strategic_version: doc.version,
            feasible_objectives: feasible,
            deferred_objectives: deferred,
            state_snapshot_ref: shaped,
        };
        ctx.publish(LayerId::ExecutiveFunction, Payload::MissionParams(params))
            .correlation = Some(doc.mission_ref);
    }
}

impl Layer for AgentModel {
    fn id(&self) -> LayerId {
        LayerId::AgentModel
    }

    fn handle(&mut self, env: &Envelope, ctx: &mut Ctx<'_>) {
        match &env.payload {
            Payload::StrategicDocument(doc) => {
                let stale = self
                    .state
                    .current
                    .as_ref()
                    .is_some_and(|c| c.mission_ref == doc.mission_ref && c.version > doc.version);
                if !stale {
                    self.state.current = Some(doc.clone());
                    self.shape_mission(ctx);
                }
            }
            Payload::Directive(d) => {
                self.state.excluded.extend(d.exclude.iter().cloned());
                self.shape_mission(ctx);
            }
            Payload::MoralJudgment(mj) => {
                if mj.for_layer != LayerId::AgentModel {
                    let out = ctx.publish(LayerId::ExecutiveFunction, env.payload.clone());
                    out.correlation = env.correlation.clone();
                }
            }
            Payload::Telemetry(t) => {
                self.ingest_telemetry(env, t);
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docs::Objective;
    use proptest::prelude::*;

    fn objective(id: &str, requires: &[&str]) -> Objective {
        Objective {
            id: id.into(),
            text: id.into(),
            tags: vec![],
            priority: 1,
            grounds: vec![],
            requires: requires.iter().map(|s| s.to_string()).collect(),
            intrinsic: false,
            urgent: false,
            harm: false,
        }
    }

    fn doc(objectives: Vec<Objective>) -> StrategicDocument {
        StrategicDocument {
            mission_ref: "m".into(),
            version: 1,
            priorities: objectives.iter().map(|o| o.id.clone()).collect(),
            objectives,
            strategies: vec![],
            principles: vec![],
            world_version: 0,
        }
    }

    #[test]
    fn update_rule_arithmetic() {
        let s = Settings::default();
        let mut st = AgentState::default();
        st.capabilities.insert("c".into(), 0.5);
        let v = update_capability(&mut st, "c", true, &s).unwrap();
        assert!((v - 0.6).abs() < 1e-12);
        st.capabilities.insert("c".into(), 0.05);
        assert_eq!(update_capability(&mut st, "c", false, &s), None);
        assert!(st.limitations.contains("c"));
        assert!(!st.capabilities.contains_key("c"));
        // Limitations are not updated further.
        assert_eq!(update_capability(&mut st, "c", true, &s), None);
        // Unknown names start at the prior.
        let v = update_capability(&mut st, "new", false, &s).unwrap();
        assert!((v - 0.35).abs() < 1e-12);
    }

    #[test]
    fn alternating_outcomes_match_closed_form() {
        let s = Settings::default();
        let mut st = AgentState::default();
        st.capabilities.insert("c".into(), 0.5);
        let mut oracle = 0.5f64;
        for i in 0..10 {
            let success = i % 2 == 0;
            update_capability(&mut st, "c", success, &s);
            oracle = if success { 1.0 - 0.8 * (1.0 - oracle) } else { 0.7 * oracle };
        }
        assert!((st.capabilities["c"] - oracle).abs() < 1e-12);
    }

    #[test]
    fn shaping_defers_low_confidence_and_limitations() {
        let mut st = AgentState::default();
        st.capabilities.insert("cooking".into(), 0.1);
        st.limitations.insert("dialogue.romance".into());
        let d = doc(vec![
            objective("complex-recipe", &["cooking:complex"]),
            objective("romance", &["dialogue.romance"]),
            objective("chat", &[]),
        ]);
        let (f, def) = partition(&d, &st, 0.3);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].objective.id, "chat");
        assert_eq!(def[0].reasons, vec!["low-confidence:cooking"]);
        assert_eq!(def[1].reasons, vec!["limitation:dialogue.romance"]);
    }

    #[test]
    fn deferred_objective_gets_redirect_annotation() {
        let mut am = AgentModel::new(Settings::default(), DeclarativeStore::default());
        am.boot(BTreeMap::new(), vec!["dialogue.romance".into()]);
        let env = Envelope::new(
            LayerId::GlobalStrategy,
            LayerId::AgentModel,
            Payload::StrategicDocument(doc(vec![objective("romance", &["dialogue.romance"])])),
        );
        let out = super::super::testing::run(&mut am, &env, 1);
        let Payload::MissionParams(p) = &out[0].payload else { panic!() };
        assert!(p.feasible_objectives.is_empty());
        assert!(p.deferred_objectives[0].annotations[0].starts_with("redirect:"));
        assert_eq!(out[0].target, LayerId::ExecutiveFunction);
    }

    #[test]
    fn replay_checks_sequence() {
        let s = Settings::default();
        assert_eq!(replay(&[], &s).unwrap(), AgentState::default());
        let mut am = AgentModel::new(s.clone(), DeclarativeStore::default());
        am.boot([("cleaning".to_string(), 0.5)].into_iter().collect(), vec![]);
        am.record(1, Episode::Outcome { task_id: "t".into(), success: true, capabilities: vec!["cleaning".into()] }, Metadata::default());
        assert_eq!(&replay(am.log(), &s).unwrap(), am.agent());
        let mut log = am.log().to_vec();
        log[1].seq = 3;
        assert!(matches!(replay(&log, &s), Err(MemoryError::Corrupt { index: 1, .. })));
    }

    #[test]
    fn telemetry_is_monotone_by_tick() {
        let mut am = AgentModel::new(Settings::default(), DeclarativeStore::default());
        let tel = |tick: u64, battery: u32| {
            Envelope::new(
                LayerId::ExecutiveFunction,
                LayerId::AgentModel,
                Payload::Telemetry(TelemetryDoc::Power { battery, capacity: 100 }),
            )
            .at_tick(tick)
        };
        super::super::testing::run(&mut am, &tel(5, 12), 5);
        assert_eq!(am.agent().operational["battery"].value, 12.0);
        super::super::testing::run(&mut am, &tel(3, 40), 6);
        assert_eq!(am.agent().operational["battery"].value, 12.0);
    }

    #[test]
    fn declarative_text_parsing() {
        let d = DeclarativeStore::parse_text("r", "# Recipes\ntags: cooking, food\nBoil water.\n");
        assert_eq!(d.title, "Recipes");
        assert_eq!(d.tags, vec!["cooking", "food"]);
        assert_eq!(d.body, "Boil water.");
        let mut s = DeclarativeStore::default();
        s.insert(d);
        assert_eq!(s.by_tag("food").count(), 1);
        assert_eq!(s.by_tag("none").count(), 0);
    }

    proptest! {
        #[test]
        fn confidences_stay_bounded_and_monotone(start in 0.0f64..=1.0, outcomes in proptest::collection::vec(any::<bool>(), 0..60)) {
            let s = Settings::default();
            let mut st = AgentState::default();
            st.capabilities.insert("c".into(), start);
            for ok in outcomes {
                let before = st.capabilities.get("c").copied();
                let after = update_capability(&mut st, "c", ok, &s);
                if let (Some(b), Some(a)) = (before, after) {
                    prop_assert!((0.0..=1.0).contains(&a));
                    if ok { prop_assert!(a >= b) } else { prop_assert!(a <= b) }
                }
                prop_assert!(!(st.capabilities.contains_key("c") && st.limitations.contains("c")));
            }
        }

        #[test]
        fn partition_is_exact(reqs in proptest::collection::vec(proptest::collection::vec(0usize..4, 0..3), 0..8), confs in proptest::collection::vec(0.0f64..1.0, 4)) {
            let names = ["a", "b", "c:x", "d"];
            let mut st = AgentState::default();
            for (n, c) in ["a", "b", "c"].iter().zip(&confs) {
                st.capabilities.insert(n.to_string(), *c);
            }
            st.limitations.insert("d".into());
            let objectives: Vec<Objective> = reqs
                .iter()
                .enumerate()
                .map(|(i, r)| objective(&format!("o{i}"), &r.iter().map(|&j| names[j]).collect::<Vec<_>>()))
                .collect();
            let d = doc(objectives);
            let (f, def) = partition(&d, &st, 0.3);
            let mut ids: Vec<_> = f.iter().map(|x| x.objective.id.clone()).chain(def.iter().map(|x| x.objective.id.clone())).collect();
            ids.sort();
            let mut want: Vec<_> = d.objectives.iter().map(|o| o.id.clone()).collect();
            want.sort();
            prop_assert_eq!(ids, want);
        }
    }
}
