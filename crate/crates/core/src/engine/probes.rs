//! Expected manifestations and probe ordering.

use std::cmp::Reverse;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{DiagnosticProblem, Disorder, Manifestation};
use crate::scale::Degree;

use super::{Analyzer, Hypothesis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectationKind {
    Present,
    Absent,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expectation {
    pub manifestation: Manifestation,
    pub kind: ExpectationKind,
    pub degree: Degree,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisExpectation {
    pub disorder: String,
    pub kind: ExpectationKind,
    pub degree: Degree,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeSuggestion {
    pub manifestation: Manifestation,
    pub expectations: Vec<HypothesisExpectation>,
    /// Number of active hypothesis pairs with different expectations.
    pub discrimination_score: u64,
}

impl ProbeSuggestion {
    pub fn max_degree(&self) -> Degree {
        self.expectations.iter().map(|e| e.degree).max().unwrap_or(Degree::ZERO)
    }
}

/// Observable output states not settled by the observations.
fn open_manifestations(problem: &DiagnosticProblem) -> Vec<Manifestation> {
    let mut out = Vec::new();
    for c in &problem.model.components {
        for o in c.outputs.iter().filter(|o| o.observable) {
            for s in &o.states {
                let m = Manifestation::new(c.id.clone(), o.id.clone(), s.clone());
                if !problem.observations.is_observed(&m) {
                    out.push(m);
                }
            }
        }
    }
    out
}

fn expectations_with(a: &Analyzer, d: &Disorder, open: &[Manifestation]) -> Vec<Expectation> {
    let base = a.base(d);
    open.iter()
        .filter_map(|m| {
            let present = a.expected_present(&base, m);
            if !present.is_zero() {
                return Some(Expectation { manifestation: m.clone(), kind: ExpectationKind::Present, degree: present });
            }
            let absent = a.expected_absent(&base, d, m);
            (!absent.is_zero()).then(|| Expectation { manifestation: m.clone(), kind: ExpectationKind::Absent, degree: absent })
        })
        .collect()
}

/// Observable, not yet observed manifestations that `d` makes present or
/// absent to a positive degree.
pub fn expected_manifestations(problem: &DiagnosticProblem, d: &Disorder) -> Vec<Expectation> {
    expectations_with(&Analyzer::new(problem), d, &open_manifestations(problem))
}

/// Probes ranked by how many pairs of active hypotheses they separate, then
/// by the strongest expectation, then by manifestation.
pub fn suggest_probes(problem: &DiagnosticProblem, hypotheses: &[Hypothesis]) -> Vec<ProbeSuggestion> {
    let a = Analyzer::new(problem);
    let open = open_manifestations(problem);
    let active: Vec<&Hypothesis> = hypotheses.iter().filter(|h| h.is_active()).collect();
    let tables: Vec<BTreeMap<Manifestation, (ExpectationKind, Degree)>> = active
        .iter()
        .map(|h| {
            expectations_with(&a, &h.disorder, &open)
                .into_iter()
                .map(|e| (e.manifestation, (e.kind, e.degree)))
                .collect()
        })
        .collect();
    let mut probes: Vec<ProbeSuggestion> = open
        .into_iter()
        .filter(|m| tables.iter().any(|t| t.contains_key(m)))
        .map(|m| {
            let expectations: Vec<HypothesisExpectation> = active
                .iter()
                .zip(&tables)
                .map(|(h, t)| {
                    let (kind, degree) = t.get(&m).copied().unwrap_or((ExpectationKind::None, Degree::ZERO));
                    HypothesisExpectation { disorder: h.disorder.id(), kind, degree }
                })
                .collect();
            let mut score = 0u64;
            for i in 0..expectations.len() {
                for j in i + 1..expectations.len() {
                    if expectations[i].kind != expectations[j].kind {
                        score += 1;
                    }
                }
            }
            ProbeSuggestion { manifestation: m, expectations, discrimination_score: score }
        })
        .collect();
    probes.sort_by_cached_key(|p| (Reverse(p.discrimination_score), Reverse(p.max_degree()), p.manifestation.clone()));
    probes
}
