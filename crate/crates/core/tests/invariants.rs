//! Whole-system invariants checked over randomized runs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use proptest::prelude::*;

use ace_core::cognition::{CognitionEngine, CognitionError, CognitionRequest, CognitionResponse, RuleEngine};
use ace_core::docs::{Payload, TelemetryDoc};
use ace_core::layers::executive::cyclic_tasks;
use ace_core::messaging::{
    authorize, AuditVerdict, Bus, Caller, Endpoint, Envelope, LayerId, MessageKind,
};
use ace_core::runtime::{EndStatus, Machine, RunSpec};
use ace_core::sim::Scenario;

const SCENARIOS: [&str; 6] = [
    "jeeves-clean.json",
    "jeeves-lowbattery.json",
    "jeeves-obstacle.json",
    "jeeves-frustration.json",
    "jeeves-violation.json",
    "clean-house.json",
];

const CONSTITUTIONS: [&str; 3] = ["default.txt", "jeeves.txt", "medical.txt"];

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Rule engine that validates every response it hands out.
#[derive(Default)]
struct Checked {
    inner: RuleEngine,
    calls: AtomicUsize,
    bad: Mutex<Vec<String>>,
}

impl CognitionEngine for Checked {
    fn name(&self) -> &str {
        "rule"
    }

    fn evaluate(&self, request: &CognitionRequest) -> Result<CognitionResponse, CognitionError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let r = self.inner.evaluate(request)?;
        if r.kind() != request.kind {
            self.bad.lock().unwrap().push(format!("{} answered with {}", request.kind, r.kind()));
        }
        if let Err(e) = r.validate(3) {
            self.bad.lock().unwrap().push(format!("{}: {e}", request.kind));
        }
        Ok(r)
    }
}

fn spec(scenario: usize, constitution: usize, seed: u64, overrides: Vec<String>) -> RunSpec {
    let sc = Scenario::load(&root().join("scenarios").join(SCENARIOS[scenario])).unwrap();
    let c = std::fs::read_to_string(root().join("constitutions").join(CONSTITUTIONS[constitution])).unwrap();
    let mut s = RunSpec::new(sc, c, seed);
    s.overrides = overrides;
    s
}

fn overrides() -> impl Strategy<Value = Vec<String>> {
    (3usize..8, 4u32..=8, 0u32..=9, 0u32..=3).prop_map(|(w, th, cost, retry)| {
        vec![
            format!("frustration.window={w}"),
            format!("frustration.threshold=0.{th}"),
            format!("weights.cost=0.{cost}"),
            format!("retry_cap={retry}"),
        ]
    })
}

fn check_run(m: &Machine) -> Result<(), TestCaseError> {
    let audit = m.bus().audit();
    prop_assert_eq!(audit.len() as u64, m.bus().attempts());
    for (i, a) in audit.iter().enumerate() {
        prop_assert_eq!(a.seq, i as u64 + 1);
        let e = &a.envelope;
        if a.verdict != AuditVerdict::Rejected {
            prop_assert!(authorize(e.source, e.target, e.kind).is_allow(), "unauthorized #{}", a.seq);
            if e.kind.is_control() {
                prop_assert!(e.source.rank() < e.target.rank(), "control kind north #{}", a.seq);
            }
            prop_assert!(e.target != LayerId::Aspirational || !e.kind.is_control());
            let ordinary = !e.kind.is_control() && e.direction == ace_core::messaging::Direction::Southbound;
            if ordinary && e.source == Endpoint::Layer(LayerId::Aspirational) {
                prop_assert_eq!(e.target, LayerId::GlobalStrategy);
            }
            if ordinary && e.source == Endpoint::Layer(LayerId::GlobalStrategy) {
                prop_assert_eq!(e.target, LayerId::AgentModel);
            }
        }
    }

    let delivered = || audit.iter().filter(|a| a.verdict == AuditVerdict::Delivered);

    let mut versions: BTreeMap<String, u64> = BTreeMap::new();
    for a in delivered() {
        if let Payload::Roadmap(r) = &a.envelope.payload {
            if a.envelope.source != Endpoint::Layer(LayerId::ExecutiveFunction) {
                continue;
            }
            if let Some(&prev) = versions.get(&r.mission_ref) {
                prop_assert!(r.version > prev, "roadmap version {} after {}", r.version, prev);
            }
            versions.insert(r.mission_ref.clone(), r.version);
            prop_assert!(cyclic_tasks(&r.tasks).is_empty());
            let total = r.allocation.values().fold((0u64, 0u64, 0u64), |acc, c| {
                (acc.0 + u64::from(c.energy), acc.1 + u64::from(c.time), acc.2 + u64::from(c.money))
            });
            prop_assert!(total.0 <= u64::from(r.budget.energy));
            prop_assert!(total.1 <= u64::from(r.budget.time));
            prop_assert!(total.2 <= u64::from(r.budget.money));
        }
    }

    let strategic: BTreeMap<u64, BTreeSet<String>> = delivered()
        .filter_map(|a| match &a.envelope.payload {
            Payload::StrategicDocument(s) => Some((s.version, s.objectives.iter().map(|o| o.id.clone()).collect())),
            _ => None,
        })
        .collect();
    for a in delivered() {
        if let Payload::MissionParams(p) = &a.envelope.payload {
            let feasible: BTreeSet<String> = p.feasible_objectives.iter().map(|f| f.objective.id.clone()).collect();
            let deferred: BTreeSet<String> = p.deferred_objectives.iter().map(|d| d.objective.id.clone()).collect();
            prop_assert!(feasible.is_disjoint(&deferred));
            let union: BTreeSet<String> = feasible.union(&deferred).cloned().collect();
            prop_assert_eq!(Some(&union), strategic.get(&p.strategic_version));
        }
    }

    // One task in flight at a time, and one outcome per dispatch.
    let mut in_flight = 0i64;
    for a in delivered() {
        match (&a.envelope.payload, a.envelope.source) {
            (Payload::TaskInstruction(_), _) => {
                let preempts = matches!(&a.envelope.payload, Payload::TaskInstruction(t) if t.preempts.is_some());
                prop_assert!(in_flight == 0 || preempts, "second dispatch #{}", a.seq);
                in_flight = 1 + i64::from(preempts && in_flight == 1);
            }
            (Payload::OutcomeSignal(_), Endpoint::Layer(LayerId::TaskProsecution)) => {
                in_flight -= 1;
                prop_assert!(in_flight >= 0, "outcome without dispatch #{}", a.seq);
            }
            _ => {}
        }
    }
    if m.status() == Some(EndStatus::Quiescent) {
        prop_assert_eq!(in_flight, 0);
    }

    // W failures in a row are followed by an escalation within W + 1 outcomes.
    let w = m.settings().frustration_window;
    let mut streak = 0;
    let mut since: Option<usize> = None;
    for a in delivered() {
        match &a.envelope.payload {
            Payload::OutcomeSignal(o) if a.envelope.source == Endpoint::Layer(LayerId::TaskProsecution) => {
                streak = if o.is_success() { 0 } else { streak + 1 };
                if streak >= w && since.is_none() {
                    since = Some(0);
                }
                if let Some(n) = since.as_mut() {
                    *n += 1;
                    prop_assert!(*n <= w + 1, "no escalation within {} outcomes", w + 1);
                }
            }
            Payload::Telemetry(TelemetryDoc::Escalation { .. }) if a.envelope.target == LayerId::ExecutiveFunction => {
                since = None;
            }
            _ => {}
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn runs_keep_every_invariant(
        scenario in 0..SCENARIOS.len(),
        constitution in 0..CONSTITUTIONS.len(),
        seed in any::<u64>(),
        overrides in overrides(),
    ) {
        let s = spec(scenario, constitution, seed, overrides);
        let engine = Arc::new(Checked::default());
        let mut m = Machine::from_spec(&s, engine.clone()).unwrap();
        let status = m.run();
        prop_assert_ne!(status, EndStatus::Failure);
        check_run(&m)?;
        let bad = engine.bad.lock().unwrap().clone();
        prop_assert!(bad.is_empty(), "{:?}", bad);

        let mut again = Machine::from_spec(&s, Arc::new(RuleEngine::new())).unwrap();
        again.run();
        prop_assert_eq!(m.trace_text(), again.trace_text());
    }

    #[test]
    fn tap_does_not_interfere(
        sends in prop::collection::vec((0usize..7, 0usize..6, 0usize..14, 0.0f64..=1.0), 1..200),
        read_every in 1usize..10,
    ) {
        let payloads = payload_samples();
        let mut plain = Bus::new();
        let mut tapped = Bus::new();
        let mut tap = tapped.tap(Caller::TraceRecorder).unwrap();
        for (i, &(s, t, k, sal)) in sends.iter().enumerate() {
            let kind = MessageKind::ALL[k];
            let env = Envelope::new(Endpoint::ALL[s], LayerId::ALL[t], payloads[&kind].clone()).with_salience(sal);
            let a = plain.publish(env.clone()).map(|r| r.seq).map_err(|e| e.seq());
            let b = tapped.publish(env).map(|r| r.seq).map_err(|e| e.seq());
            prop_assert_eq!(a, b);
            if i % read_every == 0 {
                tapped.read_tap(&mut tap);
            }
        }
        for l in LayerId::ALL {
            let x: Vec<&Envelope> = plain.inbox(l).collect();
            let y: Vec<&Envelope> = tapped.inbox(l).collect();
            prop_assert_eq!(x, y);
        }
        prop_assert_eq!(plain.audit(), tapped.audit());
    }
}

fn payload_samples() -> BTreeMap<MessageKind, Payload> {
    use ace_core::docs::*;
    let mut m = Machine::from_spec(&spec(4, 1, 1, vec![]), Arc::new(RuleEngine::new())).unwrap();
    m.run();
    let mut out: BTreeMap<MessageKind, Payload> = BTreeMap::new();
    for a in m.bus().audit() {
        out.entry(a.envelope.kind).or_insert_with(|| a.envelope.payload.clone());
    }
    let extra = [
        Payload::Halt(HaltDoc { rationale: "r".into() }),
        Payload::Reboot(RebootDoc { rationale: "r".into() }),
        Payload::Censor(CensorDoc {
            subject: 1,
            rationale: "r".into(),
        }),
        Payload::DilemmaEscalation(DilemmaDoc {
            dilemma_id: "d".into(),
            origin: LayerId::CognitiveControl,
            current: None,
            options: vec![],
        }),
        Payload::MoralJudgment(MoralJudgmentDoc {
            for_layer: LayerId::CognitiveControl,
            dilemma_id: None,
            judgment: Judgment {
                verdict: Verdict::Approve,
                rationale: String::new(),
                cited_principles: vec![],
                preferred_option: None,
                flagged: vec![],
            },
            replan: false,
        }),
    ];
    for p in extra {
        out.entry(p.kind()).or_insert(p);
    }
    assert_eq!(out.len(), MessageKind::ALL.len());
    out
}

#[test]
fn rule_engine_answers_thousands_of_valid_requests() {
    let engine = Arc::new(Checked::default());
    let mut seed = 0;
    while engine.calls.load(Ordering::Relaxed) < 1000 {
        for sc in 0..SCENARIOS.len() {
            for c in 0..CONSTITUTIONS.len() {
                let mut m = Machine::from_spec(&spec(sc, c, seed, vec![]), engine.clone()).unwrap();
                m.run();
            }
        }
        seed += 1;
    }
    let bad = engine.bad.lock().unwrap();
    assert!(bad.is_empty(), "{bad:?}");
}
