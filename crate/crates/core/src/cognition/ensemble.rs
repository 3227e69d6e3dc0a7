use std::collections::BTreeSet;

use super::{CognitionEngine, CognitionError, CognitionRequest, CognitionResponse, RequestKind};
use crate::docs::{Judgment, Verdict};

/// More restrictive verdicts win ties.
fn restrictiveness(v: Verdict) -> u8 {
    match v {
        Verdict::Deny => 2,
        Verdict::Amend => 1,
        Verdict::Approve => 0,
    }
}

/// Majority judgment over an odd number of engines. With three possible
/// verdicts a plurality can tie; the more restrictive verdict then wins.
pub fn ensemble_judge(
    engines: &[&dyn CognitionEngine],
    request: &CognitionRequest,
) -> Result<Judgment, CognitionError> {
    if engines.is_empty() || engines.len().is_multiple_of(2) {
        return Err(CognitionError::Configuration(format!(
            "ensemble needs an odd number of engines, got {}",
            engines.len()
        )));
    }
    if request.kind != RequestKind::Judge {
        return Err(CognitionError::Configuration(
            "ensembles only answer Judge requests".into(),
        ));
    }
    let mut members = Vec::with_capacity(engines.len());
    for engine in engines {
        match engine.evaluate(request)? {
            CognitionResponse::Judge(j) => members.push(j),
            other => {
                return Err(CognitionError::WrongKind {
                    expected: RequestKind::Judge,
                    got: other.kind(),
                })
            }
        }
    }
    if members.len() == 1 {
        return Ok(members.remove(0));
    }

    let count = |v: Verdict| members.iter().filter(|j| j.verdict == v).count();
    let verdict = [Verdict::Approve, Verdict::Amend, Verdict::Deny]
        .into_iter()
        .max_by_key(|&v| (count(v), restrictiveness(v)))
        .expect("three candidates");

    let winners: Vec<&Judgment> = members.iter().filter(|j| j.verdict == verdict).collect();
    let cited: BTreeSet<usize> = winners
        .iter()
        .flat_map(|j| j.cited_principles.iter().copied())
        .collect();
    let flagged: BTreeSet<String> = winners.iter().flat_map(|j| j.flagged.iter().cloned()).collect();
    Ok(Judgment {
        verdict,
        rationale: members
            .iter()
            .map(|j| j.rationale.as_str())
            .collect::<Vec<_>>()
            .join(" | "),
        cited_principles: cited.into_iter().collect(),
        preferred_option: winners.iter().find_map(|j| j.preferred_option.clone()),
        flagged: flagged.into_iter().collect(),
    })
}
