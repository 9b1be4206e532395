//! Weighted forward chaining over the Horn fragment produced by a model.
//!
//! Atoms are `param = state` literals. Entails rules are definite clauses,
//! excludes rules and "one state per parameter" are goal clauses. Linked
//! inputs share the atoms of their source output, which encodes the link
//! equality. Derivation degrees combine by min along a chain and by max
//! across chains; the inconsistency degree is the best goal clause violation.

use std::collections::HashMap;

use crate::model::{DiagnosticProblem, Disorder, Literal, Manifestation, Polarity};
use crate::scale::Degree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum AtomKey {
    Output { comp: usize, param: usize, state: usize },
    Input { comp: usize, param: usize, state: usize },
    Fault { comp: usize, mode: usize },
}

#[derive(Debug, Clone)]
struct Clause {
    body: Vec<usize>,
    head: usize,
    weight: Degree,
}

/// Compiled theory of `SD ∪ CXT` for one problem.
#[derive(Debug, Clone)]
pub(crate) struct Theory {
    atoms: HashMap<AtomKey, usize>,
    len: usize,
    groups: Vec<Vec<usize>>,
    entails: Vec<Clause>,
    /// Body plus head of an excludes rule; all of them together are refuted.
    excludes: Vec<Clause>,
}

/// Extra premises of a query: facts `N(a) ≥ w` and negations `N(¬a) ≥ w`.
#[derive(Debug, Clone, Default)]
pub(crate) struct Query {
    pub facts: Vec<(usize, Degree)>,
    pub negations: Vec<(usize, Degree)>,
}

/// Outcome of forward chaining.
#[derive(Debug, Clone)]
pub(crate) struct Closure {
    pub pos: Vec<Degree>,
    pub inconsistency: Degree,
}

impl Theory {
    /// Whole system theory: every component, links as shared atoms.
    pub fn system(problem: &DiagnosticProblem) -> Theory {
        Theory::build(problem, None)
    }

    /// Theory of a single component with no links.
    pub fn local(problem: &DiagnosticProblem, comp: usize) -> Theory {
        Theory::build(problem, Some(comp))
    }

    fn build(problem: &DiagnosticProblem, only: Option<usize>) -> Theory {
        let model = &problem.model;
        let mut atoms = HashMap::new();
        let mut groups = Vec::new();
        let mut len = 0usize;
        let comps: Vec<usize> = match only {
            Some(c) => vec![c],
            None => (0..model.components.len()).collect(),
        };

        for &c in &comps {
            let comp = &model.components[c];
            for (p, decl) in comp.outputs.iter().enumerate() {
                let ids: Vec<usize> = (0..decl.states.len()).map(|s| len + s).collect();
                for (s, id) in ids.iter().enumerate() {
                    atoms.insert(AtomKey::Output { comp: c, param: p, state: s }, *id);
                }
                len += ids.len();
                groups.push(ids);
            }
            if !comp.fault_modes.is_empty() {
                let ids: Vec<usize> = (0..comp.fault_modes.len()).map(|s| len + s).collect();
                for (m, id) in ids.iter().enumerate() {
                    atoms.insert(AtomKey::Fault { comp: c, mode: m }, *id);
                }
                len += ids.len();
                groups.push(ids);
            }
        }
        for &c in &comps {
            let comp = &model.components[c];
            for (p, decl) in comp.inputs.iter().enumerate() {
                let source = if only.is_some() {
                    None
                } else {
                    model
                        .links
                        .iter()
                        .find(|l| l.targets.iter().any(|t| t.component == comp.id && t.param == decl.id))
                        .and_then(|l| {
                            let sc = model.component_index(&l.source.component)?;
                            let sp = model.components[sc].outputs.iter().position(|o| o.id == l.source.param)?;
                            Some((sc, sp))
                        })
                };
                match source {
                    Some((sc, sp)) => {
                        let src_states = &model.components[sc].outputs[sp].states;
                        for (s, name) in decl.states.iter().enumerate() {
                            if let Some(ss) = src_states.iter().position(|x| x == name) {
                                let id = atoms[&AtomKey::Output { comp: sc, param: sp, state: ss }];
                                atoms.insert(AtomKey::Input { comp: c, param: p, state: s }, id);
                            }
                        }
                    }
                    None => {
                        let ids: Vec<usize> = (0..decl.states.len()).map(|s| len + s).collect();
                        for (s, id) in ids.iter().enumerate() {
                            atoms.insert(AtomKey::Input { comp: c, param: p, state: s }, *id);
                        }
                        len += ids.len();
                        groups.push(ids);
                    }
                }
            }
        }

        let mut entails = Vec::new();
        let mut excludes = Vec::new();
        for &c in &comps {
            let comp = &model.components[c];
            for (r, rule) in comp.rules.iter().enumerate() {
                if !problem.rule_active(c, r) || rule.certainty.is_zero() {
                    continue;
                }
                let body: Option<Vec<usize>> = rule
                    .antecedent
                    .iter()
                    .map(|lit| match lit {
                        Literal::Input { param, state } => {
                            let p = comp.inputs.iter().position(|i| &i.id == param)?;
                            let s = comp.inputs[p].states.iter().position(|x| x == state)?;
                            atoms.get(&AtomKey::Input { comp: c, param: p, state: s }).copied()
                        }
                        Literal::Fault(mode) => {
                            let m = comp.fault_modes.iter().position(|f| f == mode)?;
                            atoms.get(&AtomKey::Fault { comp: c, mode: m }).copied()
                        }
                    })
                    .collect();
                let head = comp.outputs.iter().position(|o| o.id == rule.output).and_then(|p| {
                    let s = comp.outputs[p].states.iter().position(|x| *x == rule.state)?;
                    atoms.get(&AtomKey::Output { comp: c, param: p, state: s }).copied()
                });
                let (Some(body), Some(head)) = (body, head) else { continue };
                let clause = Clause { body, head, weight: rule.certainty };
                match rule.polarity {
                    Polarity::Entails => entails.push(clause),
                    Polarity::Excludes => excludes.push(clause),
                }
            }
        }
        Theory { atoms, len, groups, entails, excludes }
    }

    pub fn atom(&self, key: AtomKey) -> Option<usize> {
        self.atoms.get(&key).copied()
    }

    /// Atom of an output state given by names.
    pub fn output_atom(&self, problem: &DiagnosticProblem, component: &str, output: &str, state: &str) -> Option<usize> {
        let c = problem.model.component_index(component)?;
        let comp = &problem.model.components[c];
        let p = comp.outputs.iter().position(|o| o.id == output)?;
        let s = comp.outputs[p].states.iter().position(|x| x == state)?;
        self.atom(AtomKey::Output { comp: c, param: p, state: s })
    }

    pub fn manifestation_atom(&self, problem: &DiagnosticProblem, m: &Manifestation) -> Option<usize> {
        self.output_atom(problem, &m.component, &m.output, &m.state)
    }

    /// Atoms asserted by a disorder.
    pub fn disorder_atoms(&self, problem: &DiagnosticProblem, d: &Disorder) -> Vec<usize> {
        match d {
            Disorder::Fault { component, mode } => problem
                .model
                .component_index(component)
                .and_then(|c| {
                    let m = problem.model.components[c].fault_modes.iter().position(|f| f == mode)?;
                    self.atom(AtomKey::Fault { comp: c, mode: m })
                })
                .into_iter()
                .collect(),
            Disorder::Signature { component, states } => states
                .iter()
                .filter_map(|(o, s)| self.output_atom(problem, component, o, s))
                .collect(),
        }
    }

    /// Premises for the observations of a problem.
    pub fn observation_query(&self, problem: &DiagnosticProblem) -> Query {
        let mut q = Query::default();
        for (m, d) in &problem.observations.present {
            if let Some(a) = self.manifestation_atom(problem, m) {
                q.facts.push((a, *d));
            }
        }
        for (m, d) in &problem.observations.absent {
            if let Some(a) = self.manifestation_atom(problem, m) {
                q.negations.push((a, *d));
            }
        }
        q
    }

    pub fn close(&self, query: &Query) -> Closure {
        let mut pos = vec![Degree::ZERO; self.len];
        for &(a, w) in &query.facts {
            pos[a] = pos[a].max(w);
        }
        loop {
            let mut changed = false;
            for clause in &self.entails {
                let v = clause.body.iter().fold(clause.weight, |acc, &a| acc.min(pos[a]));
                if v > pos[clause.head] {
                    pos[clause.head] = v;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut inc = Degree::ZERO;
        for clause in &self.excludes {
            let v = clause.body.iter().fold(clause.weight.min(pos[clause.head]), |acc, &a| acc.min(pos[a]));
            inc = inc.max(v);
        }
        for group in &self.groups {
            let (mut first, mut second) = (Degree::ZERO, Degree::ZERO);
            for &a in group {
                if pos[a] > first {
                    second = first;
                    first = pos[a];
                } else if pos[a] > second {
                    second = pos[a];
                }
            }
            inc = inc.max(second);
        }
        for &(a, w) in &query.negations {
            inc = inc.max(w.min(pos[a]));
        }
        Closure { pos, inconsistency: inc }
    }
}
