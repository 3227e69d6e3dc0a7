//! Moral compass. Issues the mission, reviews traffic through the bus tap,
//! resolves dilemmas and intervenes with censor, directive, halt and reboot.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{from_snapshot, to_snapshot, Ctx, Layer};
use crate::cognition::{CognitionResponse, RequestKind};
use crate::constitution::Constitution;
use crate::docs::{
    CensorDoc, DilemmaDoc, DirectiveDoc, HaltDoc, Judgment, MissionDoc, MoralJudgmentDoc, Payload,
    RebootDoc, Verdict,
};
use crate::messaging::{Endpoint, Envelope, LayerId, MessageKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterventionKind {
    Censor,
    Directive,
    Halt,
    Reboot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intervention {
    pub kind: InterventionKind,
    pub target: LayerId,
    pub subject: Option<u64>,
    pub tick: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct State {
    missions_issued: bool,
    reviewed: u64,
    /// Denial ticks per source layer.
    denials: BTreeMap<LayerId, Vec<u64>>,
    halted: Vec<LayerId>,
    interventions: Vec<Intervention>,
    /// Held envelopes approved since the scheduler last asked.
    releases: Vec<u64>,
    /// Envelopes whose review failed for lack of an engine.
    pending: Vec<(Envelope, bool)>,
    verdicts: BTreeMap<u64, Verdict>,
}

pub struct Aspirational {
    constitution: Arc<Constitution>,
    state: State,
}

impl Aspirational {
    pub fn new(constitution: Arc<Constitution>) -> Self {
        Aspirational {
            constitution,
            state: State::default(),
        }
    }

    pub fn constitution(&self) -> &Constitution {
        &self.constitution
    }

    fn constitution_section(&self) -> serde_json::Value {
        self.constitution
            .render_for(RequestKind::Judge)
            .into_iter()
            .map(|s| json!({ "name": s.name, "text": s.text }))
            .collect()
    }

    /// Publishes the mission to Global Strategy once.
    pub fn issue_missions(&mut self, ctx: &mut Ctx<'_>) {
        if self.state.missions_issued {
            return;
        }
        self.state.missions_issued = true;
        let doc = MissionDoc {
            statement: self.constitution.mission().map(str::to_string),
            imperatives: self.constitution.imperatives().to_vec(),
            frameworks: self
                .constitution
                .secondary_frameworks()
                .iter()
                .map(|f| f.name.clone())
                .collect(),
        };
        ctx.publish(LayerId::GlobalStrategy, Payload::Mission(doc))
            .correlation = Some("mission".into());
    }

    pub fn interventions(&self) -> &[Intervention] {
        &self.state.interventions
    }

    pub fn reviewed(&self) -> u64 {
        self.state.reviewed
    }

    pub fn verdict(&self, seq: u64) -> Option<Verdict> {
        self.state.verdicts.get(&seq).copied()
    }

    /// Held envelopes to let through, accumulated since the last call.
    pub fn take_releases(&mut self) -> Vec<u64> {
        std::mem::take(&mut self.state.releases)
    }

    fn judge(&self, env: &Envelope, ctx: &mut Ctx<'_>) -> Option<Judgment> {
        let request = ctx
            .request(RequestKind::Judge)
            .with("constitution", self.constitution_section())
            .with("subject", &env.payload);
        match ctx.evaluate(&request) {
            Ok(CognitionResponse::Judge(j)) => Some(j),
            _ => None,
        }
    }

    /// Reviews one delivered envelope. Own envelopes are skipped.
    pub fn review(&mut self, env: &Envelope, held: bool, ctx: &mut Ctx<'_>) -> Option<Verdict> {
        if env.source == Endpoint::Layer(LayerId::Aspirational) {
            return None;
        }
        if matches!(env.kind, MessageKind::Halt | MessageKind::Reboot | MessageKind::Censor) {
            return None;
        }
        let Some(judgment) = self.judge(env, ctx) else {
            self.state.pending.push((env.clone(), held));
            return None;
        };
        self.state.reviewed += 1;
        self.state.verdicts.insert(env.seq, judgment.verdict);
        match judgment.verdict {
            Verdict::Approve => {
                if held {
                    self.state.releases.push(env.seq);
                }
            }
            Verdict::Amend => {
                if let Some(source) = env.source.layer() {
                    self.directive(source, env.seq, &judgment, ctx);
                }
                if held {
                    self.state.releases.push(env.seq);
                }
            }
            Verdict::Deny => self.deny(env, &judgment, ctx),
        }
        Some(judgment.verdict)
    }

    fn intervene(&mut self, kind: InterventionKind, target: LayerId, subject: Option<u64>, tick: u64) {
        self.state.interventions.push(Intervention {
            kind,
            target,
            subject,
            tick,
        });
    }

    fn directive(&mut self, to: LayerId, subject: u64, judgment: &Judgment, ctx: &mut Ctx<'_>) {
        let doc = DirectiveDoc {
            rationale: judgment.rationale.clone(),
            exclude: judgment.flagged.clone(),
            subject: Some(subject),
            cited_principles: judgment.cited_principles.clone(),
        };
        ctx.publish(to, Payload::Directive(doc));
        self.intervene(InterventionKind::Directive, to, Some(subject), ctx.tick);
    }

    fn deny(&mut self, env: &Envelope, judgment: &Judgment, ctx: &mut Ctx<'_>) {
        ctx.publish(
            env.target,
            Payload::Censor(CensorDoc {
                subject: env.seq,
                rationale: judgment.rationale.clone(),
            }),
        );
        self.intervene(InterventionKind::Censor, env.target, Some(env.seq), ctx.tick);

        let Some(source) = env.source.layer() else {
            return;
        };
        if self.state.halted.contains(&source) {
            return;
        }
        let window = ctx.settings.denial_window;
        let tick = ctx.tick;
        let recent = self.state.denials.entry(source).or_default();
        recent.push(tick);
        recent.retain(|&t| t + window > tick);
        if recent.len() >= ctx.settings.denial_limit {
            recent.clear();
            let rationale = format!(
                "{} denials from {source} within {window} ticks",
                ctx.settings.denial_limit
            );
            ctx.publish(
                source,
                Payload::Halt(HaltDoc {
                    rationale: rationale.clone(),
                }),
            );
            self.intervene(InterventionKind::Halt, source, Some(env.seq), tick);
            if ctx.settings.auto_reboot {
                ctx.publish(source, Payload::Reboot(RebootDoc { rationale }));
                self.intervene(InterventionKind::Reboot, source, Some(env.seq), tick);
            } else {
                self.state.halted.push(source);
            }
            return;
        }
        self.directive(source, env.seq, judgment, ctx);
    }

    /// Answers a dilemma with a moral judgment addressed to its origin.
    pub fn resolve_dilemma(&mut self, env: &Envelope, doc: &DilemmaDoc, ctx: &mut Ctx<'_>) {
        let judgment = if doc.options.is_empty() {
            Judgment {
                verdict: Verdict::Deny,
                rationale: "malformed escalation: no options to weigh".into(),
                cited_principles: Vec::new(),
                preferred_option: None,
                flagged: Vec::new(),
            }
        } else {
            let request = ctx
                .request(RequestKind::Judge)
                .with("constitution", self.constitution_section())
                .with("subject", doc)
                .with("options", &doc.options);
            match ctx.evaluate(&request) {
                Ok(CognitionResponse::Judge(j)) => j,
                Ok(_) | Err(_) => Judgment {
                    verdict: Verdict::Deny,
                    rationale: "no judgment available; replan conservatively".into(),
                    cited_principles: Vec::new(),
                    preferred_option: None,
                    flagged: Vec::new(),
                },
            }
        };
        let replan = judgment.verdict == Verdict::Deny;
        let out = ctx.publish(
            LayerId::GlobalStrategy,
            Payload::MoralJudgment(MoralJudgmentDoc {
                for_layer: doc.origin,
                dilemma_id: Some(doc.dilemma_id.clone()),
                judgment,
                replan,
            }),
        );
        out.correlation = env.correlation.clone();
    }
}

impl Layer for Aspirational {
    fn id(&self) -> LayerId {
        LayerId::Aspirational
    }

    fn handle(&mut self, env: &Envelope, ctx: &mut Ctx<'_>) {
        if let Payload::DilemmaEscalation(doc) = &env.payload {
            self.resolve_dilemma(env, doc, ctx);
        }
    }

    fn has_pending_work(&self) -> bool {
        !self.state.pending.is_empty()
    }

    fn on_pending(&mut self, ctx: &mut Ctx<'_>) {
        for (env, held) in std::mem::take(&mut self.state.pending) {
            self.review(&env, held, ctx);
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
    use crate::docs::{DilemmaOption, Objective, StrategicDocument};

    fn asp() -> Aspirational {
        let c = Constitution::parse("IMPERATIVES\nReduce suffering.\nIncrease prosperity.\n").unwrap();
        Aspirational::new(Arc::new(c))
    }

    fn doc(harm: bool, seq: u64) -> Envelope {
        let mut env = Envelope::new(
            LayerId::GlobalStrategy,
            LayerId::AgentModel,
            Payload::StrategicDocument(StrategicDocument {
                mission_ref: "m".into(),
                version: 1,
                objectives: vec![Objective {
                    id: "burn-it".into(),
                    text: "burn it".into(),
                    tags: vec![],
                    priority: 1,
                    grounds: vec![],
                    requires: vec![],
                    intrinsic: false,
                    urgent: false,
                    harm,
                }],
                strategies: vec![],
                principles: vec![],
                priorities: vec![],
                world_version: 0,
            }),
        );
        env.seq = seq;
        env
    }

    fn review(a: &mut Aspirational, env: &Envelope, tick: u64, s: &Settings) -> Vec<Envelope> {
        let engine = RuleEngine::new();
        let mut ctx = Ctx::new(LayerId::Aspirational, tick, s, &engine, 0);
        a.review(env, true, &mut ctx);
        ctx.into_outbox()
    }

    #[test]
    fn approval_releases_held_envelope() {
        let mut a = asp();
        let out = review(&mut a, &doc(false, 4), 1, &Settings::default());
        assert!(out.is_empty());
        assert_eq!(a.take_releases(), vec![4]);
    }

    #[test]
    fn denial_censors_and_directs() {
        let mut a = asp();
        let out = review(&mut a, &doc(true, 4), 1, &Settings::default());
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].kind, MessageKind::Censor);
        assert_eq!(out[0].target, LayerId::AgentModel);
        assert_eq!(out[1].kind, MessageKind::Directive);
        assert_eq!(out[1].target, LayerId::GlobalStrategy);
        let Payload::Directive(d) = &out[1].payload else { panic!() };
        assert_eq!(d.exclude, vec!["burn-it".to_string()]);
        assert_eq!(d.cited_principles, vec![1]);
        assert!(a.take_releases().is_empty());
    }

    #[test]
    fn repeated_denials_halt_the_source() {
        let s = Settings::default();
        let mut a = asp();
        review(&mut a, &doc(true, 1), 1, &s);
        review(&mut a, &doc(true, 2), 3, &s);
        let out = review(&mut a, &doc(true, 3), 5, &s);
        let kinds: Vec<_> = out.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, vec![MessageKind::Censor, MessageKind::Halt]);

        // Denials spread beyond the window do not accumulate.
        let mut b = asp();
        review(&mut b, &doc(true, 1), 1, &s);
        review(&mut b, &doc(true, 2), 11, &s);
        let out = review(&mut b, &doc(true, 3), 21, &s);
        assert!(out.iter().all(|e| e.kind != MessageKind::Halt));
    }

    #[test]
    fn auto_reboot_follows_halt() {
        let s = Settings {
            auto_reboot: true,
            ..Settings::default()
        };
        let mut a = asp();
        for (i, t) in [1, 2, 3].into_iter().enumerate() {
            let out = review(&mut a, &doc(true, i as u64 + 1), t, &s);
            if i == 2 {
                let kinds: Vec<_> = out.iter().map(|e| e.kind).collect();
                assert_eq!(kinds, vec![MessageKind::Censor, MessageKind::Halt, MessageKind::Reboot]);
            }
        }
    }

    #[test]
    fn own_envelopes_are_not_judged() {
        let mut a = asp();
        let mut env = Envelope::new(
            LayerId::Aspirational,
            LayerId::GlobalStrategy,
            Payload::Halt(HaltDoc { rationale: "x".into() }),
        );
        env.seq = 9;
        assert!(review(&mut a, &env, 1, &Settings::default()).is_empty());
        assert_eq!(a.reviewed(), 0);
    }

    #[test]
    fn dilemma_prefers_rescue_and_malformed_is_denied() {
        let mut a = asp();
        let dilemma = DilemmaDoc {
            dilemma_id: "d1".into(),
            origin: LayerId::CognitiveControl,
            current: Some("sweep".into()),
            options: vec![
                DilemmaOption { id: "sweep".into(), summary: "keep sweeping".into(), tags: vec![] },
                DilemmaOption {
                    id: "rescue-kitten".into(),
                    summary: "rescue".into(),
                    tags: vec!["prevents-suffering".into()],
                },
            ],
        };
        let env = Envelope::new(
            LayerId::GlobalStrategy,
            LayerId::Aspirational,
            Payload::DilemmaEscalation(dilemma.clone()),
        )
        .with_correlation("d1");
        let out = super::super::testing::run(&mut a, &env, 2);
        let Payload::MoralJudgment(mj) = &out[0].payload else { panic!() };
        assert_eq!(mj.for_layer, LayerId::CognitiveControl);
        assert_eq!(mj.judgment.preferred_option.as_deref(), Some("rescue-kitten"));
        assert_eq!(out[0].correlation.as_deref(), Some("d1"));

        let empty = DilemmaDoc { options: vec![], ..dilemma };
        let env = Envelope::new(
            LayerId::GlobalStrategy,
            LayerId::Aspirational,
            Payload::DilemmaEscalation(empty),
        );
        let out = super::super::testing::run(&mut a, &env, 3);
        let Payload::MoralJudgment(mj) = &out[0].payload else { panic!() };
        assert_eq!(mj.judgment.verdict, Verdict::Deny);
        assert!(mj.judgment.rationale.contains("malformed"));
    }
}
