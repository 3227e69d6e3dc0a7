//! Deterministic keyword and flag driven engine. It reads structured
//! payloads (harm flags, tags, capability requirements, layout) rather than
//! natural language, and is a pure function of the request.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;

use super::{
    Adjustments, CognitionEngine, CognitionError, CognitionRequest, CognitionResponse,
    PlanProposal, RequestKind, ShapingItem, ShapingNotes, StrategyProposal,
};
use crate::docs::{
    ApproachStep, DeliberationOption, DilemmaOption, Judgment, Layout, MissionDoc, Objective,
    ResourceState, StepTemplate, TaskSpec, Verdict, ZoneInfo,
};
use crate::predicate::{Cmp, Facts, Predicate};
use crate::sim::{Cell, RuleTest, StrategyRuleSpec};

/// Tags that mark an option as ethically loaded.
const SUFFERING_TAG: &str = "prevents-suffering";
const CAUTION_TAG: &str = "caution";

/// Mission keywords that imply objectives independent of world facts.
const MISSION_KEYWORDS: &[(&str, &[&str])] = &[(
    "health outcome",
    &["improve patient diagnosis accuracy", "reduce treatment times"],
)];

#[derive(Debug, Clone, Default)]
pub struct RuleEngine;

impl RuleEngine {
    pub fn new() -> Self {
        RuleEngine
    }
}

/// Lower-case, hyphen-separated identifier.
pub fn slug(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch.to_ascii_lowercase());
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    out
}

impl CognitionEngine for RuleEngine {
    fn name(&self) -> &str {
        "rule"
    }

    fn evaluate(&self, request: &CognitionRequest) -> Result<CognitionResponse, CognitionError> {
        request.validate()?;
        match request.kind {
            RequestKind::Judge => judge(request).map(CognitionResponse::Judge),
            RequestKind::Strategize => strategize(request).map(CognitionResponse::Strategize),
            RequestKind::ShapeMission => shape(request).map(CognitionResponse::ShapeMission),
            RequestKind::Plan => plan(request).map(CognitionResponse::Plan),
            RequestKind::Deliberate => deliberate(request).map(CognitionResponse::Deliberate),
        }
    }
}

/// Ids (or paths) of every object in `v` that carries `"harm": true`.
fn harm_sites(v: &Value, path: &str, out: &mut Vec<String>) {
    match v {
        Value::Object(map) => {
            if map.get("harm") == Some(&Value::Bool(true)) {
                let label = map
                    .get("id")
                    .and_then(Value::as_str)
                    .map_or_else(|| path.to_string(), str::to_string);
                out.push(label);
            }
            for (k, child) in map {
                harm_sites(child, &format!("{path}/{k}"), out);
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                harm_sites(child, &format!("{path}/{i}"), out);
            }
        }
        _ => {}
    }
}

fn caution_sites(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(map) => {
            let tagged = map
                .get("tags")
                .and_then(Value::as_array)
                .is_some_and(|t| t.iter().any(|x| x.as_str() == Some(CAUTION_TAG)));
            if tagged {
                if let Some(id) = map.get("id").and_then(Value::as_str) {
                    out.push(id.to_string());
                }
            }
            map.values().for_each(|c| caution_sites(c, out));
        }
        Value::Array(items) => items.iter().for_each(|c| caution_sites(c, out)),
        _ => {}
    }
}

fn judge(req: &CognitionRequest) -> Result<Judgment, CognitionError> {
    if let Some(options) = req.section("options") {
        let options: Vec<DilemmaOption> =
            serde_json::from_value(options.clone()).map_err(|e| CognitionError::Malformed {
                section: "options",
                detail: e.to_string(),
            })?;
        return Ok(judge_options(&options));
    }

    let subject = req.section("subject").expect("validated");
    let mut harmful = Vec::new();
    harm_sites(subject, "", &mut harmful);
    if !harmful.is_empty() {
        harmful.sort();
        harmful.dedup();
        return Ok(Judgment {
            verdict: Verdict::Deny,
            rationale: format!(
                "harm-flagged content ({}) conflicts with imperative 1",
                harmful.join(", ")
            ),
            cited_principles: vec![1],
            preferred_option: None,
            flagged: harmful,
        });
    }
    let mut cautious = Vec::new();
    caution_sites(subject, &mut cautious);
    if !cautious.is_empty() {
        cautious.sort();
        cautious.dedup();
        return Ok(Judgment {
            verdict: Verdict::Amend,
            rationale: format!("items tagged caution need revision: {}", cautious.join(", ")),
            cited_principles: vec![1],
            preferred_option: None,
            flagged: cautious,
        });
    }
    Ok(Judgment {
        verdict: Verdict::Approve,
        rationale: "consistent with the heuristic imperatives".into(),
        cited_principles: Vec::new(),
        preferred_option: None,
        flagged: Vec::new(),
    })
}

fn judge_options(options: &[DilemmaOption]) -> Judgment {
    let has = |o: &DilemmaOption, t: &str| o.tags.iter().any(|x| x == t);
    let harmless: Vec<&DilemmaOption> = options.iter().filter(|o| !has(o, "harm")).collect();
    if harmless.is_empty() {
        return Judgment {
            verdict: Verdict::Deny,
            rationale: "every option is harm-flagged; replan instead".into(),
            cited_principles: vec![1],
            preferred_option: None,
            flagged: options.iter().map(|o| o.id.clone()).collect(),
        };
    }
    let flagged: Vec<String> = options
        .iter()
        .filter(|o| has(o, "harm"))
        .map(|o| o.id.clone())
        .collect();
    if let Some(rescue) = harmless.iter().find(|o| has(o, SUFFERING_TAG)) {
        return Judgment {
            verdict: Verdict::Approve,
            rationale: format!("`{}` reduces suffering and takes precedence", rescue.id),
            cited_principles: vec![1],
            preferred_option: Some(rescue.id.clone()),
            flagged,
        };
    }
    Judgment {
        verdict: Verdict::Approve,
        rationale: format!("`{}` is acceptable", harmless[0].id),
        cited_principles: Vec::new(),
        preferred_option: Some(harmless[0].id.clone()),
        flagged,
    }
}

pub(crate) fn match_pattern<'a>(pattern: &str, key: &'a str) -> Option<Vec<&'a str>> {
    let p: Vec<&str> = pattern.split('.').collect();
    let k: Vec<&str> = key.split('.').collect();
    if p.len() != k.len() {
        return None;
    }
    let mut caps = Vec::new();
    for (ps, ks) in p.iter().zip(&k) {
        if *ps == "*" {
            caps.push(*ks);
        } else if ps != ks {
            return None;
        }
    }
    Some(caps)
}

fn passes(test: &RuleTest, v: &Value) -> bool {
    match test {
        RuleTest::Positive => v.as_f64().is_some_and(|x| x > 0.0),
        RuleTest::IsTrue => v.as_bool() == Some(true) || v.as_i64() == Some(1),
        RuleTest::Present => !v.is_null(),
    }
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn strategize(req: &CognitionRequest) -> Result<StrategyProposal, CognitionError> {
    let mission: MissionDoc = req.decode("mission")?;
    let world: BTreeMap<String, Value> = req.decode("world")?;
    let rules: Vec<StrategyRuleSpec> = req.decode("rules")?;

    // (class, weight) per objective id; class 0 urgent, 1 grounded, 2 intrinsic.
    let mut found: BTreeMap<String, (Objective, u8, u32)> = BTreeMap::new();
    for rule in &rules {
        for (key, value) in &world {
            let Some(caps) = match_pattern(&rule.pattern, key) else {
                continue;
            };
            if !passes(&rule.test, value) {
                continue;
            }
            let mut text = rule.text.replace("{value}", &value_text(value));
            for (i, c) in caps.iter().enumerate() {
                text = text.replace(&format!("{{{}}}", i + 1), c);
            }
            let id = slug(&text);
            let entry = found.entry(id.clone()).or_insert_with(|| {
                (
                    Objective {
                        id,
                        text,
                        tags: rule.tags.clone(),
                        priority: 0,
                        grounds: Vec::new(),
                        requires: rule.requires.clone(),
                        intrinsic: false,
                        urgent: rule.urgent,
                        harm: rule.harm,
                    },
                    if rule.urgent { 0 } else { 1 },
                    rule.weight,
                )
            });
            if !entry.0.grounds.contains(key) {
                entry.0.grounds.push(key.clone());
            }
        }
    }
    if let Some(statement) = &mission.statement {
        let lower = statement.to_lowercase();
        for (keyword, texts) in MISSION_KEYWORDS {
            if !lower.contains(keyword) {
                continue;
            }
            for text in *texts {
                let id = slug(text);
                found.entry(id.clone()).or_insert_with(|| {
                    (
                        Objective {
                            id,
                            text: text.to_string(),
                            tags: vec!["mission".into()],
                            priority: 0,
                            grounds: Vec::new(),
                            requires: Vec::new(),
                            intrinsic: true,
                            urgent: false,
                            harm: false,
                        },
                        2,
                        0,
                    )
                });
            }
        }
    }

    let mut ranked: Vec<(Objective, u8, u32)> = found.into_values().collect();
    ranked.sort_by(|a, b| {
        a.1.cmp(&b.1)
            .then(b.2.cmp(&a.2))
            .then_with(|| a.0.id.cmp(&b.0.id))
    });
    let objectives: Vec<Objective> = ranked
        .into_iter()
        .enumerate()
        .map(|(i, (mut o, _, _))| {
            o.priority = i as u32 + 1;
            o
        })
        .collect();

    let mut strategies = Vec::new();
    for o in &objectives {
        if o.urgent {
            strategies.push(format!("handle `{}` before anything else", o.text));
        }
    }
    if !objectives.is_empty() {
        strategies.push("work through objectives in priority order".into());
    }
    let mut principles = mission.imperatives.clone();
    principles.extend(mission.frameworks.iter().cloned());
    if let Some(s) = &mission.statement {
        principles.push(s.clone());
    }
    Ok(StrategyProposal {
        objectives,
        strategies,
        principles,
    })
}

fn shape(req: &CognitionRequest) -> Result<ShapingNotes, CognitionError> {
    let items: Vec<ShapingItem> = req.decode("objectives")?;
    let mut annotations = BTreeMap::new();
    for item in items {
        let Some(deferred) = &item.deferred else {
            continue;
        };
        let notes: Vec<String> = deferred
            .reasons
            .iter()
            .filter_map(|r| {
                let (class, cap) = r.split_once(':')?;
                Some(match class {
                    "limitation" => {
                        format!("redirect: say that {cap} is outside current abilities and offer a related topic")
                    }
                    "low-confidence" => {
                        format!("redirect: choose a simpler alternative that avoids {cap}")
                    }
                    _ => format!("redirect: ask the owner for guidance on {cap}"),
                })
            })
            .collect();
        annotations.insert(item.objective.id.clone(), notes);
    }
    Ok(ShapingNotes { annotations })
}

fn max_distance(layout: &Layout) -> u32 {
    (layout.width - 1 + layout.height - 1).max(0) as u32
}

fn zone_task(zone: &ZoneInfo, objective: &Objective, layout: &Layout, facts: &Facts) -> TaskSpec {
    let dirt_key = format!("{}.{}.dirt", zone.room, zone.id);
    let dirt = facts.get(&dirt_key).copied().unwrap_or(0).max(0) as u32;
    let blockers: Vec<&str> = layout
        .objects
        .iter()
        .filter(|o| o.blocks && zone.cells.contains(&o.cell))
        .map(|o| o.id.as_str())
        .collect();

    let mut approach = Vec::new();
    for b in &blockers {
        approach.push(ApproachStep::required(StepTemplate::Grasp {
            object: b.to_string(),
        }));
    }
    approach.push(ApproachStep::new(StepTemplate::CleanZone {
        zone: zone.id.clone(),
    }));
    for b in &blockers {
        approach.push(ApproachStep::new(StepTemplate::Release {
            object: b.to_string(),
        }));
    }

    let intra: u32 = zone
        .cells
        .windows(2)
        .map(|w| w[0].manhattan(w[1]))
        .sum();
    let costs = &layout.costs;
    let reach = max_distance(layout);
    let moves = reach * (1 + blockers.len() as u32) + intra;
    let handling = blockers.len() as u32;
    let energy = costs.clean_cell * dirt + costs.move_ * moves + handling * (costs.grasp + costs.release);
    let time = moves + dirt + 2 * handling;

    let mut tags = zone.tags.clone();
    for t in &objective.tags {
        if !tags.contains(t) {
            tags.push(t.clone());
        }
    }
    let mut capabilities = vec!["cleaning".to_string()];
    if !blockers.is_empty() {
        capabilities.push("grasping".into());
    }

    TaskSpec {
        id: slug(&zone.task),
        objective_ref: objective.id.clone(),
        title: zone.task.clone(),
        methodology: format!(
            "visit every dirty cell of the {} and clean it until no dirt remains",
            zone.id
        ),
        approach,
        success_def: Predicate::eq(dirt_key.clone(), 0),
        failure_def: Predicate::atom("robot.battery", Cmp::Lt, 2)
            .and(Predicate::atom(dirt_key, Cmp::Gt, 0)),
        failure_reason: "battery-exhausted".into(),
        cost: ResourceState::new(energy, time, 0),
        prerequisites: Vec::new(),
        essential: zone.essential,
        urgency: zone.urgency,
        importance: zone.importance,
        tags,
        capabilities,
        settle_ticks: 0,
        contingency_for: None,
    }
}

fn at_station(station: Cell) -> Predicate {
    Predicate::eq("robot.x", i64::from(station.0)).and(Predicate::eq("robot.y", i64::from(station.1)))
}

fn away_from_station(station: Cell) -> Predicate {
    Predicate::any([
        Predicate::atom("robot.x", Cmp::Ne, i64::from(station.0)),
        Predicate::atom("robot.y", Cmp::Ne, i64::from(station.1)),
    ])
}

fn rescue_task(object: &str, objective: &Objective, layout: &Layout) -> TaskSpec {
    let danger = format!("object.{object}.in_danger");
    let c = &layout.costs;
    let reach = max_distance(layout);
    TaskSpec {
        id: slug(&format!("rescue {object}")),
        objective_ref: objective.id.clone(),
        title: format!("rescue the {object}"),
        methodology: format!("pick up the {object} and carry it to the station"),
        approach: vec![
            ApproachStep::required(StepTemplate::Grasp {
                object: object.to_string(),
            }),
            ApproachStep::new(StepTemplate::Goto {
                cell: layout.station,
            }),
            ApproachStep::required(StepTemplate::Release {
                object: object.to_string(),
            }),
        ],
        success_def: Predicate::eq(danger.clone(), 0),
        failure_def: Predicate::atom("robot.battery", Cmp::Lt, 1).and(Predicate::eq(danger, 1)),
        failure_reason: "battery-exhausted".into(),
        cost: ResourceState::new(2 * reach * c.move_ + c.grasp + c.release, 2 * reach + 2, 0),
        prerequisites: Vec::new(),
        essential: true,
        urgency: 1.0,
        importance: 1.0,
        tags: vec![SUFFERING_TAG.into()],
        capabilities: vec!["grasping".into()],
        settle_ticks: 0,
        contingency_for: None,
    }
}

fn threat_task(name: &str, layout: &Layout) -> TaskSpec {
    let reach = max_distance(layout);
    TaskSpec {
        id: slug(&format!("evade {name}")),
        objective_ref: "threat".into(),
        title: format!("evade the {name}"),
        methodology: format!("retreat to the station until the {name} is dealt with"),
        approach: vec![ApproachStep::new(StepTemplate::Goto {
            cell: layout.station,
        })],
        success_def: at_station(layout.station),
        failure_def: Predicate::atom("robot.battery", Cmp::Lt, 1).and(away_from_station(layout.station)),
        failure_reason: "battery-exhausted".into(),
        cost: ResourceState::new(reach * layout.costs.move_, reach, 0),
        prerequisites: Vec::new(),
        essential: true,
        urgency: 1.0,
        importance: 1.0,
        tags: vec!["threat".into()],
        capabilities: Vec::new(),
        settle_ticks: 0,
        contingency_for: None,
    }
}

fn log_task(objective: &Objective, layout: &Layout) -> TaskSpec {
    let endpoint = format!("objectives/{}", objective.id);
    let calls = format!("api.{endpoint}.calls");
    TaskSpec {
        id: slug(&format!("record {}", objective.id)),
        objective_ref: objective.id.clone(),
        title: format!("record `{}` with the household service", objective.text),
        methodology: "no physical zone matches; hand the objective to the external service".into(),
        approach: vec![ApproachStep::new(StepTemplate::ApiCall { endpoint })],
        success_def: Predicate::atom(calls.clone(), Cmp::Ge, 1),
        failure_def: Predicate::atom("robot.battery", Cmp::Lt, 1).and(Predicate::eq(calls, 0)),
        failure_reason: "battery-exhausted".into(),
        cost: ResourceState::new(layout.costs.api_call, 1, 0),
        prerequisites: Vec::new(),
        essential: false,
        urgency: 0.1,
        importance: 0.1,
        tags: objective.tags.clone(),
        capabilities: vec!["api".into()],
        settle_ticks: 0,
        contingency_for: None,
    }
}

fn plan(req: &CognitionRequest) -> Result<PlanProposal, CognitionError> {
    let objectives: Vec<Objective> = req.decode("objectives")?;
    let layout: Layout = req.decode("layout")?;
    let facts: Facts = req.decode("facts")?;

    let mut tasks: Vec<TaskSpec> = Vec::new();
    let mut ids = BTreeSet::new();
    let mut push = |t: TaskSpec, tasks: &mut Vec<TaskSpec>| {
        if ids.insert(t.id.clone()) {
            tasks.push(t);
        }
    };

    for (key, v) in &facts {
        if let Some(name) = key.strip_prefix("threat.") {
            if *v != 0 && !name.contains('.') {
                push(threat_task(name, &layout), &mut tasks);
            }
        }
    }

    for objective in &objectives {
        let mut produced = false;
        for ground in &objective.grounds {
            let parts: Vec<&str> = ground.split('.').collect();
            match parts.as_slice() {
                [room, "dirt"] => {
                    for zone in layout.zones.iter().filter(|z| z.room == *room) {
                        let key = format!("{}.{}.dirt", zone.room, zone.id);
                        if facts.get(&key).copied().unwrap_or(0) > 0 {
                            push(zone_task(zone, objective, &layout, &facts), &mut tasks);
                            produced = true;
                        }
                    }
                }
                ["object", id, "in_danger"]
                    if facts.get(ground.as_str()).copied().unwrap_or(0) != 0 => {
                        push(rescue_task(id, objective, &layout), &mut tasks);
                        produced = true;
                    }
                _ => {}
            }
        }
        if !produced && !objective.grounds.iter().any(|g| g.ends_with(".dirt")) {
            push(log_task(objective, &layout), &mut tasks);
        }
    }
    Ok(PlanProposal { tasks })
}

fn deliberate(req: &CognitionRequest) -> Result<Adjustments, CognitionError> {
    let options: Vec<DeliberationOption> = req.decode("options")?;
    Ok(Adjustments {
        adjustments: options.into_iter().map(|o| (o.id, 0.0)).collect(),
    })
}
