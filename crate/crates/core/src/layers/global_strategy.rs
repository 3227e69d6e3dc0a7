//! Turns the mission and the world model into a strategic document and
//! revises it when the world changes in ways that matter.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{from_snapshot, to_snapshot, Ctx, Layer};
use crate::cognition::{match_pattern, CognitionResponse, RequestKind};
use crate::docs::{MissionDoc, Payload, StrategicDocument, WorldEventDoc};
use crate::messaging::{Envelope, LayerId};
use crate::sim::{RuleTest, StrategyRuleSpec};

/// The built-in knowledge table.
pub fn default_rules() -> Vec<StrategyRuleSpec> {
    let rule = |pattern: &str, test, text: &str| StrategyRuleSpec {
        pattern: pattern.into(),
        test,
        text: text.into(),
        tags: Vec::new(),
        requires: Vec::new(),
        urgent: false,
        harm: false,
        weight: 1,
    };
    vec![
        StrategyRuleSpec {
            tags: vec!["cleaning".into()],
            requires: vec!["cleaning".into()],
            ..rule("*.dirt", RuleTest::Positive, "tidy {1}")
        },
        StrategyRuleSpec {
            urgent: true,
            ..rule(
                "pandemic",
                RuleTest::IsTrue,
                "prioritize infectious disease treatment and prevention",
            )
        },
        rule("invader.leader", RuleTest::Present, "defeat the {value}"),
        StrategyRuleSpec {
            tags: vec!["prevents-suffering".into()],
            urgent: true,
            ..rule("object.*.in_danger", RuleTest::IsTrue, "rescue {1}")
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactEntry {
    pub value: Value,
    pub tick: u64,
    pub seq: u64,
}

/// Last-writer-wins fact store ordered by (tick, seq).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    facts: BTreeMap<String, FactEntry>,
    version: u64,
}

impl WorldModel {
    /// Merges facts observed at (tick, seq) and returns the keys whose value
    /// changed. Older writes never overwrite newer ones.
    pub fn ingest(&mut self, facts: &BTreeMap<String, Value>, tick: u64, seq: u64) -> Vec<String> {
        let mut changed = Vec::new();
        for (k, v) in facts {
            match self.facts.get_mut(k) {
                Some(e) if (e.tick, e.seq) > (tick, seq) => {}
                Some(e) => {
                    if e.value != *v {
                        changed.push(k.clone());
                    }
                    *e = FactEntry { value: v.clone(), tick, seq };
                }
                None => {
                    changed.push(k.clone());
                    self.facts.insert(k.clone(), FactEntry { value: v.clone(), tick, seq });
                }
            }
        }
        if !changed.is_empty() {
            self.version += 1;
        }
        changed
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.facts.get(key).map(|e| &e.value)
    }

    pub fn values(&self) -> BTreeMap<String, Value> {
        self.facts.iter().map(|(k, e)| (k.clone(), e.value.clone())).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct State {
    world: WorldModel,
    mission: Option<MissionDoc>,
    mission_ref: Option<String>,
    current: Option<StrategicDocument>,
    excluded: BTreeSet<String>,
    pending: bool,
}

pub struct GlobalStrategy {
    rules: Vec<StrategyRuleSpec>,
    state: State,
}

impl GlobalStrategy {
    /// Default knowledge plus scenario-specific rules.
    pub fn new(extra_rules: &[StrategyRuleSpec]) -> Self {
        let mut rules = default_rules();
        rules.extend(extra_rules.iter().cloned());
        GlobalStrategy {
            rules,
            state: State::default(),
        }
    }

    pub fn world(&self) -> &WorldModel {
        &self.state.world
    }

    pub fn current(&self) -> Option<&StrategicDocument> {
        self.state.current.as_ref()
    }

    /// A delta is material when it touches the grounds of a current
    /// objective or a key some knowledge rule can match.
    pub fn is_material(&self, changed: &[String]) -> bool {
        let grounds: BTreeSet<&str> = self
            .state
            .current
            .iter()
            .flat_map(|d| &d.objectives)
            .flat_map(|o| o.grounds.iter().map(String::as_str))
            .collect();
        changed.iter().any(|k| {
            grounds.contains(k.as_str())
                || self.rules.iter().any(|r| match_pattern(&r.pattern, k).is_some())
        })
    }

    /// Builds and publishes a new strategic document.
    pub fn formulate(&mut self, ctx: &mut Ctx<'_>) {
        let Some(mission) = self.state.mission.clone() else {
            return;
        };
        let request = ctx
            .request(RequestKind::Strategize)
            .with("mission", &mission)
            .with("world", self.state.world.values())
            .with("rules", &self.rules);
        let proposal = match ctx.evaluate(&request) {
            Ok(CognitionResponse::Strategize(p)) => p,
            _ => {
                self.state.pending = true;
                return;
            }
        };
        self.state.pending = false;
        let objectives: Vec<_> = proposal
            .objectives
            .into_iter()
            .filter(|o| !self.state.excluded.contains(&o.id))
            .collect();
        let doc = StrategicDocument {
            mission_ref: self.state.mission_ref.clone().unwrap_or_default(),
            version: self.state.current.as_ref().map_or(1, |d| d.version + 1),
            priorities: objectives.iter().map(|o| o.id.clone()).collect(),
            objectives,
            strategies: proposal.strategies,
            principles: proposal.principles,
            world_version: self.state.world.version(),
        };
        ctx.publish(LayerId::AgentModel, Payload::StrategicDocument(doc.clone()))
            .correlation = Some(doc.mission_ref.clone());
        self.state.current = Some(doc);
    }

    fn on_world(&mut self, env: &Envelope, doc: &WorldEventDoc, ctx: &mut Ctx<'_>) {
        let changed = self.state.world.ingest(&doc.facts, env.tick, env.seq);
        if self.state.mission.is_none() {
            return;
        }
        if self.state.current.is_none() || self.is_material(&changed) {
            self.formulate(ctx);
        }
    }
}

impl Layer for GlobalStrategy {
    fn id(&self) -> LayerId {
        LayerId::GlobalStrategy
    }

    fn handle(&mut self, env: &Envelope, ctx: &mut Ctx<'_>) {
        match &env.payload {
            Payload::Mission(m) => {
                self.state.mission = Some(m.clone());
                self.state.mission_ref = Some(format!("mission-{}", env.seq));
                if self.state.world.version() > 0 {
                    self.formulate(ctx);
                }
            }
            Payload::WorldEvent(doc) => {
                self.on_world(env, doc, ctx);
                ctx.percolate(env);
            }
            Payload::Directive(d) => {
                self.state.excluded.extend(d.exclude.iter().cloned());
                self.formulate(ctx);
            }
            Payload::MoralJudgment(mj) => {
                if mj.for_layer == LayerId::GlobalStrategy {
                    if mj.replan {
                        self.state.excluded.extend(mj.judgment.flagged.iter().cloned());
                        self.formulate(ctx);
                    }
                } else {
                    let out = ctx.publish(LayerId::AgentModel, env.payload.clone());
                    out.correlation = env.correlation.clone();
                }
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
        self.formulate(ctx);
    }

    fn snapshot(&self) -> Value {
        to_snapshot(&self.state)
    }

    fn restore(&mut self, snapshot: &Value) -> Result<(), String> {
        self.state = from_snapshot(snapshot)?;
        Ok(())
    }
}
