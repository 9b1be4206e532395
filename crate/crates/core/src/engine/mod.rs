//! Relevance extraction, degree computation, ranking and probe prediction.
//!
//! Everything here is a pure function of a [`DiagnosticProblem`].

mod diagnose;
mod probes;
mod reasoner;
mod relevance;

use thiserror::Error;

use crate::model::{DiagnosticProblem, Disorder, Manifestation};
use crate::scale::Degree;
use reasoner::{Closure, Query, Theory};

pub use diagnose::{
    diagnose, diagnose_with, dominates, enumerate_candidates, DiagnoseOptions, DiscardReason, Hypothesis,
    HypothesisStatus, PreferenceClass,
};
pub use probes::{expected_manifestations, suggest_probes, Expectation, ExpectationKind, ProbeSuggestion};
pub use relevance::{relevant_comps, relevant_links, relevant_subtheory, RelevantSubtheory};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("nothing to explain")]
    NothingToExplain,
}

/// Compiled problem shared by the degree computations.
pub(crate) struct Analyzer<'a> {
    pub problem: &'a DiagnosticProblem,
    pub system: Theory,
    pub locals: Vec<Theory>,
    observations: Query,
}

impl<'a> Analyzer<'a> {
    pub fn new(problem: &'a DiagnosticProblem) -> Analyzer<'a> {
        let system = Theory::system(problem);
        let locals = (0..problem.model.components.len()).map(|c| Theory::local(problem, c)).collect();
        let observations = system.observation_query(problem);
        Analyzer { problem, system, locals, observations }
    }

    fn disorder_query(&self, d: &Disorder) -> Query {
        let facts = self.system.disorder_atoms(self.problem, d).into_iter().map(|a| (a, Degree::ONE)).collect();
        Query { facts, negations: Vec::new() }
    }

    /// Closure of `SD ∪ CXT ∪ {d}`.
    pub fn base(&self, d: &Disorder) -> Closure {
        self.system.close(&self.disorder_query(d))
    }

    pub fn entailment_weight(&self, d: &Disorder, m: &Manifestation) -> Degree {
        self.entailment_in(&self.base(d), m)
    }

    /// `Inc(K ∪ {¬m})` from the closure of `K`.
    pub fn entailment_in(&self, base: &Closure, m: &Manifestation) -> Degree {
        match self.system.manifestation_atom(self.problem, m) {
            Some(a) => base.inconsistency.max(base.pos[a]),
            None => base.inconsistency,
        }
    }

    pub fn exclusion_weight(&self, d: &Disorder, m: &Manifestation) -> Degree {
        let mut q = self.disorder_query(d);
        if let Some(a) = self.system.manifestation_atom(self.problem, m) {
            q.facts.push((a, Degree::ONE));
        }
        self.system.close(&q).inconsistency
    }

    pub fn consistency_degree(&self, d: &Disorder) -> Degree {
        let mut q = self.disorder_query(d);
        q.facts.extend(self.observations.facts.iter().copied());
        q.negations.extend(self.observations.negations.iter().copied());
        self.system.close(&q).inconsistency.complement()
    }

    /// Δ*: coverage of M⁺ by the consequences of `d`.
    pub fn abductive_degree(&self, d: &Disorder) -> Degree {
        let base = self.base(d);
        self.problem
            .observations
            .present
            .iter()
            .map(|(m, beta)| beta.godel_implies(self.entailment_in(&base, m)))
            .min()
            .unwrap_or(Degree::ONE)
    }

    /// Degree with which `d` makes `m` expected, above the inconsistency
    /// `d` already carries with the model alone.
    pub fn expected_present(&self, base: &Closure, m: &Manifestation) -> Degree {
        let w = self.entailment_in(base, m);
        if w > base.inconsistency {
            w
        } else {
            Degree::ZERO
        }
    }

    pub fn expected_absent(&self, base: &Closure, d: &Disorder, m: &Manifestation) -> Degree {
        let w = self.exclusion_weight(d, m);
        if w > base.inconsistency {
            w
        } else {
            Degree::ZERO
        }
    }
}

/// Best derivation degree of `m` from `SD ∪ CXT ∪ {d}`, i.e. `N(m)` in that
/// base.
pub fn entailment_weight(problem: &DiagnosticProblem, d: &Disorder, m: &Manifestation) -> Degree {
    Analyzer::new(problem).entailment_weight(d, m)
}

/// `N(¬m)` in `SD ∪ CXT ∪ {d}`.
pub fn exclusion_weight(problem: &DiagnosticProblem, d: &Disorder, m: &Manifestation) -> Degree {
    Analyzer::new(problem).exclusion_weight(d, m)
}

/// `1 − Inc(SD ∪ CXT ∪ {d} ∪ OBS)`.
pub fn consistency_degree(problem: &DiagnosticProblem, d: &Disorder) -> Degree {
    Analyzer::new(problem).consistency_degree(d)
}

/// Consistency assembled from per-observation entailment and exclusion
/// weights: `1 − max(max_j min(N(m_j), ρ_j), max_r min(N(¬m_r), β_r))`.
/// Agrees with [`consistency_degree`] whenever observations do not interact
/// through the model.
pub fn consistency_from_weights(problem: &DiagnosticProblem, d: &Disorder) -> Degree {
    let a = Analyzer::new(problem);
    let base = a.base(d);
    let absent = problem.observations.absent.iter().map(|(m, rho)| (*rho).min(a.entailment_in(&base, m)));
    let present = problem.observations.present.iter().map(|(m, beta)| (*beta).min(a.exclusion_weight(d, m)));
    absent.chain(present).max().unwrap_or(Degree::ZERO).complement()
}

/// Δ*(d) = min over present m_j of `β_j → N(m_j | d)` (Gödel implication).
pub fn abductive_degree(problem: &DiagnosticProblem, d: &Disorder) -> Degree {
    Analyzer::new(problem).abductive_degree(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_model, parse_observations};
    use crate::model::compose_problem;
    use std::sync::Arc;

    pub(crate) fn problem(model: &str, obs: &str) -> DiagnosticProblem {
        let model = parse_model(model, "t.pdm").unwrap().model;
        let (ctx, o) = parse_observations(obs, "t.pdo", &model).unwrap();
        compose_problem(Arc::new(model), ctx, o).unwrap()
    }

    const CHAIN: &str = "scale { certain=1 likely=3/5 doubtful=2/5 possible=0 }
        absence { impossible=certain }
        component a { output out: analog observable; }
        component b { input in: analog; output out: analog observable;
            rule in=ABS => out=ABS likely; rule in=DEG =/> out=ABS certain; }
        link a.out -> b.in;";

    fn likely() -> Degree {
        Degree::new(3, 5).unwrap()
    }

    #[test]
    fn degrees_on_a_chain() {
        let p = problem(CHAIN, "obs b.out = ABS certain;");
        let abs = Disorder::signature("a", "out", "ABS");
        let deg = Disorder::signature("a", "out", "DEG");
        let m = Manifestation::new("b", "out", "ABS");
        assert_eq!(entailment_weight(&p, &abs, &m), likely());
        assert_eq!(entailment_weight(&p, &deg, &m), Degree::ZERO);
        assert_eq!(exclusion_weight(&p, &deg, &m), Degree::ONE);
        assert_eq!(exclusion_weight(&p, &abs, &m), Degree::ZERO);
        assert_eq!(consistency_degree(&p, &abs), Degree::ONE);
        assert_eq!(consistency_degree(&p, &deg), Degree::ZERO);
        assert_eq!(abductive_degree(&p, &abs), likely());
        assert_eq!(abductive_degree(&p, &deg), Degree::ZERO);
    }

    #[test]
    fn absent_observation_lowers_consistency() {
        let p = problem(CHAIN, "obs b.out != ABS impossible;");
        let abs = Disorder::signature("a", "out", "ABS");
        assert_eq!(consistency_degree(&p, &abs), likely().complement());
        assert_eq!(consistency_from_weights(&p, &abs), likely().complement());
    }

    #[test]
    fn without_excludes_only_rival_states_exclude() {
        let text = CHAIN.replace("rule in=DEG =/> out=ABS certain;", "");
        let p = problem(&text, "obs b.out = ABS certain;");
        let abs = Disorder::signature("a", "out", "ABS");
        let deg = Disorder::signature("a", "out", "DEG");
        for t in ["ABS", "DEG"] {
            let m = Manifestation::new("b", "out", t);
            assert_eq!(exclusion_weight(&p, &deg, &m), Degree::ZERO);
        }
        assert_eq!(exclusion_weight(&p, &abs, &Manifestation::new("b", "out", "ABS")), Degree::ZERO);
        assert_eq!(exclusion_weight(&p, &abs, &Manifestation::new("b", "out", "DEG")), likely());
    }
}
