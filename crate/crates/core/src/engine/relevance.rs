//! Possible influence paths leading to a manifestation.
//!
//! Relevance is tracked per output state. An input state of a component is
//! on a path to one of its relevant output states when the input appears in
//! an active `entails` rule concluding on that output and the component
//! theory alone stays consistent to a positive degree with both states. A
//! link feeding such an input is relevant, and the matching state of its
//! source output becomes relevant in turn.

use std::collections::{BTreeSet, VecDeque};

use crate::model::{DiagnosticProblem, Link, Literal, Manifestation, Polarity};
use crate::scale::Degree;

use super::reasoner::{AtomKey, Query};
use super::Analyzer;

/// The part of the model that can influence one manifestation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelevantSubtheory {
    /// Indices into `model.links`.
    pub links: BTreeSet<usize>,
    pub comps: BTreeSet<String>,
    /// Output states on a possible influence path, `m` included.
    pub outputs: BTreeSet<Manifestation>,
}

impl RelevantSubtheory {
    pub fn contains_output(&self, component: &str, output: &str, state: &str) -> bool {
        self.outputs.contains(&Manifestation::new(component, output, state))
    }
}

pub(crate) fn subtheory(a: &Analyzer, m: &Manifestation) -> RelevantSubtheory {
    let problem = a.problem;
    let model = &problem.model;
    let mut rel = RelevantSubtheory::default();
    let Some(c0) = model.component_index(&m.component) else { return rel };
    rel.comps.insert(m.component.clone());

    let mut queue = VecDeque::new();
    let mut seen = BTreeSet::new();
    let locate = |c: usize, out: &str, state: &str| -> Option<(usize, usize, usize)> {
        let p = model.components[c].outputs.iter().position(|o| o.id == out)?;
        let s = model.components[c].outputs[p].states.iter().position(|x| x == state)?;
        Some((c, p, s))
    };
    if let Some(start) = locate(c0, &m.output, &m.state) {
        queue.push_back(start);
    }
    while let Some((c, p, s)) = queue.pop_front() {
        if !seen.insert((c, p, s)) {
            continue;
        }
        let comp = &model.components[c];
        let out = &comp.outputs[p];
        rel.outputs.insert(Manifestation::new(comp.id.clone(), out.id.clone(), out.states[s].clone()));

        let mut influencing = BTreeSet::new();
        for (r, rule) in comp.rules.iter().enumerate() {
            if !problem.rule_active(c, r) || rule.polarity != Polarity::Entails || rule.output != out.id || rule.certainty.is_zero() {
                continue;
            }
            for lit in &rule.antecedent {
                if let Literal::Input { param, .. } = lit {
                    if let Some(i) = comp.inputs.iter().position(|d| &d.id == param) {
                        influencing.insert(i);
                    }
                }
            }
        }

        let local = &a.locals[c];
        let out_atom = local.atom(AtomKey::Output { comp: c, param: p, state: s });
        for i in influencing {
            let decl = &comp.inputs[i];
            let link = model
                .links
                .iter()
                .position(|l| l.targets.iter().any(|t| t.component == comp.id && t.param == decl.id));
            for (st, state) in decl.states.iter().enumerate() {
                let in_atom = local.atom(AtomKey::Input { comp: c, param: i, state: st });
                let facts = [in_atom, out_atom].into_iter().flatten().map(|x| (x, Degree::ONE)).collect();
                if local.close(&Query { facts, negations: Vec::new() }).inconsistency.is_one() {
                    continue;
                }
                let Some(l) = link else { continue };
                let source = &model.links[l].source;
                rel.links.insert(l);
                rel.comps.insert(source.component.clone());
                if let Some(sc) = model.component_index(&source.component) {
                    if let Some(next) = locate(sc, &source.param, state) {
                        queue.push_back(next);
                    }
                }
            }
        }
    }
    rel
}

pub fn relevant_subtheory(problem: &DiagnosticProblem, m: &Manifestation) -> RelevantSubtheory {
    subtheory(&Analyzer::new(problem), m)
}

/// Links that may propagate the cause of `m`.
pub fn relevant_links(problem: &DiagnosticProblem, m: &Manifestation) -> Vec<Link> {
    relevant_subtheory(problem, m).links.into_iter().map(|i| problem.model.links[i].clone()).collect()
}

/// `m`'s component and every component whose output feeds a relevant link.
pub fn relevant_comps(problem: &DiagnosticProblem, m: &Manifestation) -> BTreeSet<String> {
    relevant_subtheory(problem, m).comps
}
