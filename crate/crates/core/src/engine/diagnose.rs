//! Candidate enumeration, annotation and ranking.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{DiagnosticProblem, Disorder, Manifestation};
use crate::scale::Degree;

use super::relevance::{subtheory, RelevantSubtheory};
use super::{Analyzer, EngineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreferenceClass {
    IdentifiedFault,
    UpstreamSignature,
    Signature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisStatus {
    Active,
    Discarded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DiscardReason {
    /// Consistency with the observations is zero.
    Inconsistent,
    /// No possible influence path to this present manifestation.
    Irrelevant { manifestation: Manifestation },
    /// A state of the signature has itself been observed.
    Observed { manifestation: Manifestation },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub disorder: Disorder,
    /// Δ*, zeroed unless the disorder is fully consistent with the
    /// observations.
    pub abductive_degree: Degree,
    /// Δ* before that gate.
    pub coverage: Degree,
    pub consistency_degree: Degree,
    pub relevant: bool,
    pub preference_class: PreferenceClass,
    pub status: HypothesisStatus,
    pub discard_reason: Option<DiscardReason>,
}

impl Hypothesis {
    pub fn is_active(&self) -> bool {
        self.status == HypothesisStatus::Active
    }

    pub fn is_abductive(&self) -> bool {
        self.is_active() && !self.abductive_degree.is_zero()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnoseOptions {
    /// Also consider abnormal states on several outputs of one component.
    pub multi_output_signatures: bool,
}

fn relevant_to(d: &Disorder, sub: &RelevantSubtheory) -> bool {
    match d {
        Disorder::Fault { component, .. } => sub.comps.contains(component),
        Disorder::Signature { component, states } => {
            states.iter().all(|(o, s)| sub.contains_output(component, o, s))
        }
    }
}

fn is_trivial(d: &Disorder, problem: &DiagnosticProblem) -> bool {
    let obs = &problem.observations;
    d.signature_states().iter().any(|m| obs.present.contains_key(m) || obs.absent.contains_key(m))
}

fn subtheories(a: &Analyzer) -> Result<Vec<(Manifestation, RelevantSubtheory)>, EngineError> {
    if a.problem.observations.present.is_empty() {
        return Err(EngineError::NothingToExplain);
    }
    Ok(a.problem.observations.present.keys().map(|m| (m.clone(), subtheory(a, m))).collect())
}

/// Disorders suggested by one subtheory.
fn candidates_of(problem: &DiagnosticProblem, sub: &RelevantSubtheory, options: DiagnoseOptions) -> BTreeSet<Disorder> {
    let model = &problem.model;
    let mut out = BTreeSet::new();
    for c in &sub.comps {
        if let Some(comp) = model.component(c) {
            for mode in &comp.fault_modes {
                out.insert(Disorder::fault(c.clone(), mode.clone()));
            }
        }
    }
    let mut per_component: BTreeMap<&str, BTreeMap<&str, Vec<&str>>> = BTreeMap::new();
    for m in &sub.outputs {
        if model.component(&m.component).is_some_and(|c| c.junction) {
            continue;
        }
        out.insert(Disorder::signature(m.component.clone(), m.output.clone(), m.state.clone()));
        per_component.entry(&m.component).or_default().entry(&m.output).or_default().push(&m.state);
    }
    if options.multi_output_signatures {
        for (comp, outputs) in per_component {
            let outs: Vec<(&str, Vec<&str>)> = outputs.into_iter().collect();
            // Every choice of at most one state per output, at least two outputs.
            let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
            for (o, states) in &outs {
                let mut next = Vec::new();
                for partial in &combos {
                    next.push(partial.clone());
                    for s in states.iter() {
                        let mut p = partial.clone();
                        p.push((o.to_string(), s.to_string()));
                        next.push(p);
                    }
                }
                combos = next;
            }
            for states in combos.into_iter().filter(|s| s.len() >= 2) {
                out.insert(Disorder::Signature { component: comp.to_string(), states });
            }
        }
    }
    out.retain(|d| !is_trivial(d, problem));
    out
}

/// Disorders relevant to every present manifestation, trivial ones removed.
pub fn enumerate_candidates(problem: &DiagnosticProblem) -> Result<Vec<Disorder>, EngineError> {
    let a = Analyzer::new(problem);
    let subs = subtheories(&a)?;
    let mut iter = subs.iter().map(|(_, s)| candidates_of(problem, s, DiagnoseOptions::default()));
    let first = iter.next().unwrap_or_default();
    let all = iter.fold(first, |acc, s| acc.intersection(&s).cloned().collect());
    Ok(all.into_iter().collect())
}

fn dominates_with(a: &Analyzer, d1: &Disorder, d2: &Disorder) -> bool {
    let explains = |x: &Disorder, y: &Disorder| {
        let base = a.base(x);
        y.signature_states().iter().all(|s| !a.expected_present(&base, s).is_zero())
    };
    d1.is_signature() && d2.is_signature() && d1 != d2 && explains(d1, d2) && !explains(d2, d1)
}

/// `d1` lies upstream of `d2`: `d1` entails every state of `d2` to a
/// positive degree and not the other way round.
pub fn dominates(problem: &DiagnosticProblem, d1: &Disorder, d2: &Disorder) -> bool {
    dominates_with(&Analyzer::new(problem), d1, d2)
}

pub fn diagnose(problem: &DiagnosticProblem) -> Result<Vec<Hypothesis>, EngineError> {
    diagnose_with(problem, DiagnoseOptions::default())
}

/// Annotates and ranks every disorder relevant to at least one present
/// manifestation. Those failing relevance for some manifestation or fully
/// inconsistent with the observations are kept as discarded.
pub fn diagnose_with(problem: &DiagnosticProblem, options: DiagnoseOptions) -> Result<Vec<Hypothesis>, EngineError> {
    let a = Analyzer::new(problem);
    let subs = subtheories(&a)?;
    let candidates: BTreeSet<Disorder> = subs.iter().flat_map(|(_, s)| candidates_of(problem, s, options)).collect();

    let mut hyps: Vec<Hypothesis> = candidates
        .into_iter()
        .map(|d| {
            let failing = subs.iter().find(|(_, s)| !relevant_to(&d, s)).map(|(m, _)| m.clone());
            let consistency = a.consistency_degree(&d);
            let coverage = a.abductive_degree(&d);
            let discard_reason = if consistency.is_zero() {
                Some(DiscardReason::Inconsistent)
            } else {
                failing.clone().map(|manifestation| DiscardReason::Irrelevant { manifestation })
            };
            Hypothesis {
                abductive_degree: if consistency.is_one() { coverage } else { Degree::ZERO },
                coverage,
                consistency_degree: consistency,
                relevant: failing.is_none(),
                preference_class: if d.is_signature() { PreferenceClass::UpstreamSignature } else { PreferenceClass::IdentifiedFault },
                status: if discard_reason.is_some() { HypothesisStatus::Discarded } else { HypothesisStatus::Active },
                discard_reason,
                disorder: d,
            }
        })
        .collect();

    let active: Vec<Disorder> = hyps
        .iter()
        .filter(|h| h.is_active() && h.disorder.is_signature())
        .map(|h| h.disorder.clone())
        .collect();
    for h in hyps.iter_mut().filter(|h| h.disorder.is_signature()) {
        if active.iter().any(|other| dominates_with(&a, other, &h.disorder)) {
            h.preference_class = PreferenceClass::Signature;
        }
    }

    hyps.sort_by_cached_key(|h| {
        (
            h.status,
            h.disorder.signature_size() > 1,
            Reverse(h.abductive_degree),
            Reverse(h.consistency_degree),
            h.preference_class,
            h.disorder.id(),
        )
    });
    Ok(hyps)
}
