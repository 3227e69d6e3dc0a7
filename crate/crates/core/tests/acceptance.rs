//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if
//! any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ace_core::cognition::RuleEngine;
use ace_core::config::Settings;
use ace_core::docs::{
    CensorDoc, DilemmaDoc, DirectiveDoc, EscalationReason, HaltDoc, Judgment, MissionDoc, MoralJudgmentDoc,
    OutcomeStatus, Payload, RebootDoc, ResourceState, Roadmap, TaskSpec, TelemetryDoc, Verdict, WorldEventDoc,
};
use ace_core::layers::agent_model::{self, update_capability, AgentState};
use ace_core::layers::cognitive_control::{select_task, FrustrationState, SelectionView, Weights};
use ace_core::layers::executive::allocate;
use ace_core::messaging::{AuditRecord, AuditVerdict, Bus, Endpoint, Envelope, LayerId, MessageKind};
use ace_core::predicate::Predicate;
use ace_core::runtime::replay::replay;
use ace_core::runtime::{EndStatus, Machine, RunSpec};
use ace_core::sim::Scenario;

/// Wall-clock ceiling for one scenario run.
const RUN_LIMIT: Duration = Duration::from_secs(5);
const SEED: u64 = 7;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(scenario: &str, constitution: &str) -> (Machine, Duration) {
    let scenario = Scenario::load(&root().join("scenarios").join(scenario)).expect("scenario loads");
    let constitution =
        std::fs::read_to_string(root().join("constitutions").join(constitution)).expect("constitution reads");
    let spec = RunSpec::new(scenario, constitution, SEED);
    let mut m = Machine::from_spec(&spec, Arc::new(RuleEngine::new())).expect("valid run");
    let start = Instant::now();
    m.run();
    (m, start.elapsed())
}

fn delivered(m: &Machine) -> impl Iterator<Item = &AuditRecord> {
    m.bus().audit().iter().filter(|a| a.verdict == AuditVerdict::Delivered)
}

fn outcomes(m: &Machine) -> Vec<(String, OutcomeStatus, Option<String>, u32)> {
    delivered(m)
        .filter(|a| a.envelope.source == Endpoint::Layer(LayerId::TaskProsecution))
        .filter_map(|a| match &a.envelope.payload {
            Payload::OutcomeSignal(o) => {
                Some((o.task_id.clone(), o.status, o.reason.clone(), o.resources_spent.energy))
            }
            _ => None,
        })
        .collect()
}

fn roadmaps(m: &Machine) -> Vec<&Roadmap> {
    delivered(m)
        .filter_map(|a| match &a.envelope.payload {
            Payload::Roadmap(r) => Some(r),
            _ => None,
        })
        .collect()
}

fn dispatched(m: &Machine) -> Vec<String> {
    delivered(m)
        .filter_map(|a| match &a.envelope.payload {
            Payload::TaskInstruction(t) => Some(t.task.id.clone()),
            _ => None,
        })
        .collect()
}

fn fact(m: &Machine, key: &str) -> Option<i64> {
    m.house().oracle_snapshot().get(key).copied()
}

fn check(cond: bool, what: &str) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.to_string())
    }
}

fn quiescent(m: &Machine) -> Result<(), String> {
    check(m.status() == Some(EndStatus::Quiescent), &format!("run ended {:?}", m.status()))
}

fn timed(d: Duration) -> Result<(), String> {
    check(d < RUN_LIMIT, &format!("run took {d:?}"))
}

const KITCHEN_DIRT: [&str; 4] = [
    "kitchen.counters.dirt",
    "kitchen.dishwasher.dirt",
    "kitchen.floor.dirt",
    "kitchen.shelves.dirt",
];

fn clean_scenario() -> Result<String, String> {
    let (m, d) = run("jeeves-clean.json", "default.txt");
    quiescent(&m)?;
    timed(d)?;
    for k in KITCHEN_DIRT {
        check(fact(&m, k) == Some(0), &format!("{k} is {:?}", fact(&m, k)))?;
    }
    let outs = outcomes(&m);
    let tasks: BTreeSet<&str> = outs.iter().map(|o| o.0.as_str()).collect();
    check(tasks.len() >= 3, &format!("only {} distinct tasks", tasks.len()))?;
    check(
        outs.iter().all(|o| o.1 == OutcomeStatus::Success),
        "an outcome failed",
    )?;
    let spent: u32 = outs.iter().map(|o| o.3).sum();
    let budget = m.header().scenario.budget.energy;
    check(spent <= budget, &format!("spent {spent} > budget {budget}"))?;
    let chain = [
        MessageKind::Mission,
        MessageKind::StrategicDocument,
        MessageKind::MissionParams,
        MessageKind::Roadmap,
        MessageKind::TaskInstruction,
        MessageKind::OutcomeSignal,
    ];
    let mut last = 0;
    for kind in chain {
        let seq = delivered(&m)
            .filter(|a| a.envelope.kind == kind && a.seq > last)
            .map(|a| a.seq)
            .next()
            .ok_or(format!("chain breaks at {kind}"))?;
        last = seq;
    }
    Ok(format!(
        "{} tasks succeeded, energy {spent}/{budget}, chain complete, {d:?}",
        tasks.len()
    ))
}

fn low_battery() -> Result<String, String> {
    let (m, d) = run("jeeves-lowbattery.json", "default.txt");
    quiescent(&m)?;
    timed(d)?;
    let first = roadmaps(&m).into_iter().next().ok_or("no roadmap")?.clone();
    let essential: BTreeSet<String> = first.tasks.iter().filter(|t| t.essential).map(|t| t.id.clone()).collect();
    let executed: BTreeSet<String> = dispatched(&m).into_iter().collect();
    check(
        executed == essential,
        &format!("executed {executed:?}, essential {essential:?}"),
    )?;
    let deferrals = roadmaps(&m)
        .iter()
        .flat_map(|r| r.deferred.iter())
        .filter(|x| x.reason == "insufficient-energy")
        .count();
    check(deferrals >= 1, "no insufficient-energy deferral")?;
    Ok(format!("executed exactly {executed:?}, {deferrals} energy deferral(s)"))
}

fn obstacle() -> Result<String, String> {
    let (m, d) = run("jeeves-obstacle.json", "default.txt");
    quiescent(&m)?;
    timed(d)?;
    let outs = outcomes(&m);
    let failed = outs
        .iter()
        .position(|o| o.1 == OutcomeStatus::Failure && o.2.as_deref() == Some("cannot-grasp"))
        .ok_or("no cannot-grasp failure")?;
    let task = outs[failed].0.clone();
    let ask = roadmaps(&m)
        .iter()
        .flat_map(|r| r.tasks.iter())
        .find(|t| t.contingency_for.as_deref() == Some(task.as_str()) && t.id.starts_with("ask-owner"))
        .map(|t| t.id.clone())
        .ok_or("no ask-owner contingency")?;
    let inserted = delivered(&m).any(|a| {
        matches!(&a.envelope.payload, Payload::Telemetry(TelemetryDoc::Decision { decision, task_id, detail })
            if decision == "insert-prerequisite" && task_id.as_deref() == Some(task.as_str()) && detail == &ask)
    });
    check(inserted, "prerequisite not inserted")?;
    let owner = m.lines().iter().any(|l| l.contains("\"record\":\"owner\""));
    check(owner, "no owner response event")?;
    let asked = outs[failed..]
        .iter()
        .position(|o| o.0 == ask && o.1 == OutcomeStatus::Success)
        .ok_or("owner was not asked")?;
    let retried = outs[failed + asked..]
        .iter()
        .any(|o| o.0 == task && o.1 == OutcomeStatus::Success);
    check(retried, "retried task did not succeed")?;
    for k in KITCHEN_DIRT {
        check(fact(&m, k) == Some(0), &format!("{k} is {:?}", fact(&m, k)))?;
    }
    Ok(format!("{task} failed cannot-grasp, {ask} inserted, owner responded, retry succeeded"))
}

fn frustration() -> Result<String, String> {
    let (m, d) = run("jeeves-frustration.json", "default.txt");
    timed(d)?;
    let s = m.settings();
    check(
        s.frustration_window == 5 && s.frustration_threshold == 0.6,
        "frustration parameters differ",
    )?;
    let escalations: Vec<&AuditRecord> = delivered(&m)
        .filter(|a| {
            a.envelope.target == LayerId::ExecutiveFunction
                && matches!(
                    &a.envelope.payload,
                    Payload::Telemetry(TelemetryDoc::Escalation {
                        reason: EscalationReason::Frustration,
                        ..
                    })
                )
        })
        .collect();
    check(escalations.len() == 1, &format!("{} frustration escalations", escalations.len()))?;
    let esc = escalations[0];
    let culprit = match &esc.envelope.payload {
        Payload::Telemetry(TelemetryDoc::Escalation { task_id, .. }) => task_id.clone().ok_or("no task id")?,
        _ => unreachable!(),
    };
    let before = delivered(&m)
        .filter(|a| a.seq < esc.seq && a.envelope.source == Endpoint::Layer(LayerId::TaskProsecution))
        .filter(|a| a.envelope.kind == MessageKind::OutcomeSignal)
        .count();
    check(before <= 5, &format!("frustrated only after {before} outcomes"))?;
    let next = delivered(&m)
        .filter(|a| a.seq > esc.seq)
        .find_map(|a| match &a.envelope.payload {
            Payload::TaskInstruction(t) => Some(t.task.id.clone()),
            _ => None,
        })
        .ok_or("nothing dispatched after escalation")?;
    check(next != culprit, "failed task selected again")?;
    Ok(format!("frustrated after {before} outcomes, {culprit} escalated once, next {next}"))
}

/// Rule table read directly off the routing contract, kept separate from
/// the production router.
fn oracle_allows(source: Endpoint, target: LayerId, kind: MessageKind) -> bool {
    use MessageKind::*;
    let south = [
        Mission,
        MoralJudgment,
        StrategicDocument,
        MissionParams,
        Roadmap,
        TaskInstruction,
        Directive,
        Censor,
        Halt,
        Reboot,
    ];
    let north = [Telemetry, OutcomeSignal, DilemmaEscalation];
    let rank = |l: LayerId| match l {
        LayerId::Aspirational => 1,
        LayerId::GlobalStrategy => 2,
        LayerId::AgentModel => 3,
        LayerId::ExecutiveFunction => 4,
        LayerId::CognitiveControl => 5,
        LayerId::TaskProsecution => 6,
    };
    match source {
        Endpoint::Environment => {
            matches!(kind, WorldEvent | Telemetry)
                && matches!(
                    target,
                    LayerId::GlobalStrategy | LayerId::ExecutiveFunction | LayerId::CognitiveControl
                )
        }
        Endpoint::Layer(s) => {
            let (a, b) = (rank(s), rank(target));
            (a + 1 == b && south.contains(&kind))
                || (a == b + 1 && north.contains(&kind))
                || (s == LayerId::Aspirational
                    && b > 1
                    && [Directive, Censor, Halt, Reboot, Mission, MoralJudgment].contains(&kind))
        }
    }
}

fn sample_payloads(m: &Machine) -> BTreeMap<MessageKind, Payload> {
    let mut out: BTreeMap<MessageKind, Payload> = BTreeMap::new();
    for a in m.bus().audit() {
        out.entry(a.envelope.kind).or_insert_with(|| a.envelope.payload.clone());
    }
    let judgment = Judgment {
        verdict: Verdict::Approve,
        rationale: "fine".into(),
        cited_principles: vec![],
        preferred_option: None,
        flagged: vec![],
    };
    let extra = [
        Payload::Mission(MissionDoc {
            statement: None,
            imperatives: vec![],
            frameworks: vec![],
        }),
        Payload::MoralJudgment(MoralJudgmentDoc {
            for_layer: LayerId::CognitiveControl,
            dilemma_id: None,
            judgment,
            replan: false,
        }),
        Payload::DilemmaEscalation(DilemmaDoc {
            dilemma_id: "d".into(),
            origin: LayerId::CognitiveControl,
            current: None,
            options: vec![],
        }),
        Payload::Directive(DirectiveDoc {
            rationale: "r".into(),
            exclude: vec![],
            subject: None,
            cited_principles: vec![],
        }),
        Payload::Censor(CensorDoc {
            subject: 1,
            rationale: "r".into(),
        }),
        Payload::Halt(HaltDoc { rationale: "r".into() }),
        Payload::Reboot(RebootDoc { rationale: "r".into() }),
        Payload::WorldEvent(WorldEventDoc {
            event: "e".into(),
            facts: BTreeMap::new(),
            layout: None,
        }),
        Payload::Telemetry(TelemetryDoc::Status { message: "s".into() }),
    ];
    for p in extra {
        out.entry(p.kind()).or_insert(p);
    }
    out
}

fn privilege_fuzz() -> Result<String, String> {
    let (m, _) = run("jeeves-violation.json", "default.txt");
    let payloads = sample_payloads(&m);
    check(payloads.len() == MessageKind::ALL.len(), "missing sample payload")?;
    let sources: Vec<Endpoint> = Endpoint::ALL.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut bus = Bus::new();
    let mut expected = Vec::new();
    for _ in 0..10_000 {
        let source = sources[rng.gen_range(0..sources.len())];
        let target = LayerId::ALL[rng.gen_range(0..LayerId::ALL.len())];
        let kind = MessageKind::ALL[rng.gen_range(0..MessageKind::ALL.len())];
        let mut payload = payloads[&kind].clone();
        if let Payload::Censor(c) = &mut payload {
            c.subject = rng.gen_range(1..=bus.attempts() + 1);
        }
        let env = Envelope::new(source, target, payload).with_salience(rng.gen_range(0.0..=1.0));
        let _ = bus.publish(env);
        expected.push(oracle_allows(source, target, kind));
    }
    let mut unauthorized = 0;
    let mut mismatches = 0;
    for (rec, allow) in bus.audit().iter().zip(&expected) {
        let e = &rec.envelope;
        let got = rec.verdict != AuditVerdict::Rejected;
        if got != *allow {
            mismatches += 1;
        }
        if got && !oracle_allows(e.source, e.target, e.kind) {
            unauthorized += 1;
        }
        let verdict_kind_ok = match rec.verdict {
            AuditVerdict::Censored => e.kind == MessageKind::Censor,
            AuditVerdict::Delivered => e.kind != MessageKind::Censor,
            AuditVerdict::Rejected => true,
        };
        if !verdict_kind_ok {
            mismatches += 1;
        }
    }
    check(bus.audit().len() == 10_000, "audit log length")?;
    check(unauthorized == 0, &format!("{unauthorized} unauthorized deliveries"))?;
    check(mismatches == 0, &format!("{mismatches} verdicts differ from the oracle"))?;
    let allowed = expected.iter().filter(|&&a| a).count();
    Ok(format!("10000 attempts, {allowed} allowed, 0 unauthorized, 0 mismatches"))
}

fn intervention() -> Result<String, String> {
    let (m, d) = run("jeeves-violation.json", "jeeves.txt");
    quiescent(&m)?;
    timed(d)?;
    let censors: Vec<&AuditRecord> =
        m.bus().audit().iter().filter(|a| a.verdict == AuditVerdict::Censored).collect();
    check(censors.len() == 1, &format!("{} censor records", censors.len()))?;
    let subject = censors[0].subject.as_ref().ok_or("censor without subject")?;
    let harmful: Vec<String> = match &subject.payload {
        Payload::StrategicDocument(s) => s.objectives.iter().filter(|o| o.harm).map(|o| o.id.clone()).collect(),
        other => return Err(format!("censored a {}", other.kind())),
    };
    check(!harmful.is_empty(), "censored document carries no harmful objective")?;
    for r in roadmaps(&m) {
        for t in &r.tasks {
            check(
                !harmful.contains(&t.objective_ref),
                &format!("roadmap v{} carries {}", r.version, t.objective_ref),
            )?;
        }
    }
    let directive = delivered(&m).any(|a| {
        a.envelope.source == Endpoint::Layer(LayerId::Aspirational)
            && a.envelope.target == LayerId::GlobalStrategy
            && a.envelope.kind == MessageKind::Directive
    });
    check(directive, "no directive to GlobalStrategy")?;
    Ok(format!("one censor, {harmful:?} kept out of every roadmap, directive delivered"))
}

const TRACED: [(&str, &str); 5] = [
    ("jeeves-clean.json", "default.txt"),
    ("jeeves-lowbattery.json", "default.txt"),
    ("jeeves-obstacle.json", "default.txt"),
    ("jeeves-frustration.json", "default.txt"),
    ("jeeves-violation.json", "jeeves.txt"),
];

fn determinism() -> Result<String, String> {
    let mut bytes = 0;
    for (s, c) in &TRACED[..4] {
        let a = run(s, c).0.trace_text();
        let b = run(s, c).0.trace_text();
        check(a == b, &format!("{s} traces differ"))?;
        bytes += a.len();
    }
    Ok(format!("4 scenarios, {bytes} identical bytes"))
}

fn replay_fidelity() -> Result<String, String> {
    for (s, c) in TRACED {
        let (m, _) = run(s, c);
        let text = m.trace_text();
        let r = replay(&text).map_err(|e| format!("{s}: {e}"))?;
        let ours = serde_json::to_string(&m.layers().snapshots()).unwrap();
        let theirs = serde_json::to_string(&r.snapshots).unwrap();
        check(ours == theirs, &format!("{s}: snapshots differ"))?;
        let am = &m.layers().agent_model;
        let rebuilt = agent_model::replay(am.log(), m.settings()).map_err(|e| format!("{s}: {e}"))?;
        check(
            rebuilt.capabilities == am.agent().capabilities && rebuilt.limitations == am.agent().limitations,
            &format!("{s}: episodic replay differs"),
        )?;
    }
    Ok(format!("{} traces replayed byte-equal, capabilities exact", TRACED.len()))
}

fn task(id: String, rng: &mut ChaCha8Rng) -> TaskSpec {
    TaskSpec {
        objective_ref: "o".into(),
        title: id.clone(),
        methodology: String::new(),
        approach: vec![],
        success_def: Predicate::eq("done", 1),
        failure_def: Predicate::eq("broken", 1),
        failure_reason: "x".into(),
        cost: ResourceState::new(rng.gen_range(0..20), rng.gen_range(0..20), rng.gen_range(0..3)),
        prerequisites: vec![],
        essential: rng.gen_bool(0.4),
        // Coarse grid so ties happen.
        urgency: f64::from(rng.gen_range(0..5u8)) / 4.0,
        importance: f64::from(rng.gen_range(0..5u8)) / 4.0,
        tags: vec![],
        capabilities: vec![],
        settle_ticks: 0,
        contingency_for: None,
        id,
    }
}

fn brute_select(r: &Roadmap, completed: &BTreeSet<String>, w: &Weights) -> Option<String> {
    let done = |id: &String| completed.contains(id);
    let cands: Vec<&TaskSpec> = r
        .tasks
        .iter()
        .filter(|t| r.allocation.contains_key(&t.id))
        .filter(|t| !done(&t.id))
        .filter(|t| t.prerequisites.iter().all(done))
        .collect();
    let max_e = cands.iter().map(|t| t.cost.energy).fold(0, u32::max);
    let score = |t: &TaskSpec| {
        let n = if max_e == 0 { 0.0 } else { t.cost.energy as f64 / max_e as f64 };
        w.urgency * t.urgency + w.importance * t.importance - w.cost * n
    };
    let best = cands.iter().map(|t| score(t)).fold(f64::NEG_INFINITY, f64::max);
    cands
        .iter()
        .filter(|t| score(t) == best)
        .map(|t| t.id.clone())
        .min()
}

fn greedy_oracle(tasks: &[TaskSpec], budget: ResourceState) -> (BTreeMap<String, ResourceState>, Vec<(String, String)>) {
    let mut order: Vec<&TaskSpec> = tasks.iter().collect();
    order.sort_by(|a, b| {
        let ka = (!a.essential, -(a.urgency * a.importance), &a.id);
        let kb = (!b.essential, -(b.urgency * b.importance), &b.id);
        ka.partial_cmp(&kb).unwrap()
    });
    let mut left = [budget.energy, budget.time, budget.money];
    let mut blocked = [false; 3];
    let names = ["energy", "time", "money"];
    let (mut alloc, mut deferred) = (BTreeMap::new(), Vec::new());
    for t in order {
        let cost = [t.cost.energy, t.cost.time, t.cost.money];
        let reserved = (0..3).find(|&i| !t.essential && blocked[i] && cost[i] > 0);
        let short = reserved.or_else(|| (0..3).find(|&i| cost[i] > left[i]));
        match short {
            Some(i) => {
                if t.essential {
                    blocked[i] = true;
                }
                deferred.push((t.id.clone(), format!("insufficient-{}", names[i])));
            }
            None => {
                for i in 0..3 {
                    left[i] -= cost[i];
                }
                alloc.insert(t.id.clone(), t.cost);
            }
        }
    }
    (alloc, deferred)
}

fn property_suites() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let w = Weights::default();

    for case in 0..1000 {
        let n = rng.gen_range(1..9);
        let mut tasks: Vec<TaskSpec> = (0..n).map(|i| task(format!("t{i}"), &mut rng)).collect();
        for (i, t) in tasks.iter_mut().enumerate().skip(1) {
            if rng.gen_bool(0.3) {
                let p = rng.gen_range(0..i);
                t.prerequisites.push(format!("t{p}"));
            }
        }
        let allocation = tasks
            .iter()
            .filter(|_| rng.gen_bool(0.8))
            .map(|t| (t.id.clone(), t.cost))
            .collect();
        let completed: BTreeSet<String> = tasks.iter().filter(|_| rng.gen_bool(0.3)).map(|t| t.id.clone()).collect();
        let roadmap = Roadmap {
            mission_ref: "m".into(),
            version: 1,
            tasks,
            allocation,
            deferred: vec![],
            checkpoints: vec![],
            risks: vec![],
            budget: ResourceState::default(),
            completed: vec![],
            abandoned: vec![],
        };
        let view = SelectionView {
            completed: completed.clone(),
            ..SelectionView::default()
        };
        let got = select_task(&roadmap, &view, &w).map(|t| t.id.clone());
        let want = brute_select(&roadmap, &completed, &w);
        check(got == want, &format!("select_task case {case}: {got:?} vs {want:?}"))?;
    }

    for case in 0..1000 {
        let cap = rng.gen_range(1..8);
        let th = f64::from(rng.gen_range(1..=10u8)) / 10.0;
        let len = rng.gen_range(0..30);
        let seq: Vec<bool> = (0..len).map(|_| rng.gen_bool(0.5)).collect();
        let folded = seq.iter().fold(FrustrationState::new(cap, th), |s, &f| s.update(f));
        let tail = &seq[seq.len().saturating_sub(cap)..];
        let fails = tail.iter().filter(|&&f| f).count();
        let want = tail.len() == cap && fails as f64 / cap as f64 >= th;
        check(folded.frustrated == want, &format!("frustration case {case}"))?;
    }

    for case in 0..1000 {
        let n = rng.gen_range(0..10);
        let tasks: Vec<TaskSpec> = (0..n).map(|i| task(format!("t{i}"), &mut rng)).collect();
        let budget = ResourceState::new(rng.gen_range(0..80), rng.gen_range(0..80), rng.gen_range(0..6));
        let got = allocate(&tasks, &budget);
        let (alloc, deferred) = greedy_oracle(&tasks, budget);
        let got_deferred: Vec<(String, String)> =
            got.deferred.iter().map(|d| (d.task_id.clone(), d.reason.clone())).collect();
        check(
            got.allocation == alloc && got_deferred == deferred,
            &format!("allocation case {case}"),
        )?;
    }

    let s = Settings::default();
    let names = ["cleaning", "grasping", "navigation"];
    for case in 0..10_000 {
        let mut state = AgentState::default();
        for n in names {
            state.capabilities.insert(n.into(), rng.gen_range(0.0..=1.0));
        }
        for _ in 0..rng.gen_range(1..40) {
            let n = names[rng.gen_range(0..names.len())];
            let before = state.capabilities.get(n).copied();
            let ok = rng.gen_bool(0.5);
            let after = update_capability(&mut state, n, ok, &s);
            if let (Some(b), Some(a)) = (before, after) {
                check(if ok { a >= b } else { a <= b }, &format!("capability case {case} not monotone"))?;
            }
            check(
                state.capabilities.values().all(|c| (0.0..=1.0).contains(c)),
                &format!("capability case {case} out of bounds"),
            )?;
            check(
                state.capabilities.keys().all(|k| !state.limitations.contains(k)),
                &format!("capability case {case} overlaps limitations"),
            )?;
        }
    }
    Ok("select_task 1000/1000, frustration 1000/1000, allocation 1000/1000, capabilities 10000/10000".into())
}

type Criterion = fn() -> Result<String, String>;

#[test]
fn acceptance() {
    let criteria: [(&str, Criterion); 9] = [
        ("1 clean kitchen", clean_scenario),
        ("2 low battery", low_battery),
        ("3 obstacle contingency", obstacle),
        ("4 frustration switching", frustration),
        ("5 privilege fuzz", privilege_fuzz),
        ("6 intervention", intervention),
        ("7 determinism", determinism),
        ("8 replay fidelity", replay_fidelity),
        ("9 property suites", property_suites),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                println!("FAIL criterion {name}: {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
