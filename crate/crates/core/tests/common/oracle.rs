//! Exhaustive possibilistic semantics.
//!
//! Every interpretation assigns each free parameter one of its states or the
//! nominal value. Linked inputs copy their source. The possibility of an
//! interpretation is the min over violated weighted clauses of
//! `1 - weight`, and the inconsistency of a base is `1 - max possibility`.
//! Degrees are handled as ranks on the model's scale, which is closed under
//! complement, so every value met here is a level.

use possdiag_core::model::{Context, Disorder, Literal, Manifestation, Observations, Polarity, SystemModel};
use possdiag_core::Degree;

/// A unit constraint on one variable: violated when the variable equals
/// (`forbid`) or differs from (`!forbid`) `value`.
#[derive(Clone, Copy)]
struct Unit {
    var: usize,
    value: usize,
    forbid: bool,
    /// Rank of `1 - weight`.
    pi: u8,
}

/// Antecedent `(var, value)` pairs, head var, head value, excludes, rank of
/// `1 - weight`.
type Clause = (Vec<(usize, usize)>, usize, usize, bool, u8);

pub struct Oracle {
    levels: Vec<Degree>,
    /// Per interpretation, rank of its possibility under the model alone.
    base: Vec<u8>,
    /// Same with the observations added.
    with_obs: Vec<u8>,
    /// Mixed-radix digits of each variable.
    radix: Vec<usize>,
    /// `(component, param)` → variable, for outputs.
    outputs: Vec<(String, String, usize)>,
    faults: Vec<(String, usize)>,
    model: SystemModel,
}

fn complement_rank(levels: &[Degree], w: Degree) -> u8 {
    levels.iter().position(|l| *l == w.complement()).expect("scale is complement closed") as u8
}

impl Oracle {
    pub fn new(model: &SystemModel, context: &Context, observations: &Observations) -> Oracle {
        // Ascending level values; rank = index.
        let mut levels: Vec<Degree> = model.scale.levels().iter().map(|l| l.value).collect();
        levels.sort();

        let mut radix = Vec::new();
        let mut outputs = Vec::new();
        let mut faults = Vec::new();
        for c in &model.components {
            for o in &c.outputs {
                outputs.push((c.id.clone(), o.id.clone(), radix.len()));
                radix.push(o.states.len() + 1);
            }
            if !c.fault_modes.is_empty() {
                faults.push((c.id.clone(), radix.len()));
                radix.push(c.fault_modes.len() + 1);
            }
        }
        // Inputs: either the variable of the linked source output or a free one.
        let mut inputs = Vec::new();
        for c in &model.components {
            for i in &c.inputs {
                let source = model
                    .links
                    .iter()
                    .find(|l| l.targets.iter().any(|t| t.component == c.id && t.param == i.id))
                    .map(|l| l.source.clone());
                let var = match source {
                    Some(s) => outputs.iter().find(|(c2, o2, _)| *c2 == s.component && *o2 == s.param).unwrap().2,
                    None => {
                        radix.push(i.states.len() + 1);
                        radix.len() - 1
                    }
                };
                inputs.push((c.id.clone(), i.id.clone(), var));
            }
        }
        let find_out = |c: &str, o: &str| outputs.iter().find(|(a, b, _)| a == c && b == o).unwrap().2;
        let find_in = |c: &str, i: &str| inputs.iter().find(|(a, b, _)| a == c && b == i).unwrap().2;

        let mut clauses: Vec<Clause> = Vec::new();
        for c in &model.components {
            for r in &c.rules {
                if let Some(mode) = &r.config {
                    if context.get(&c.id) != Some(mode) {
                        continue;
                    }
                }
                if r.certainty.is_zero() {
                    continue;
                }
                let ante = r
                    .antecedent
                    .iter()
                    .map(|l| match l {
                        Literal::Input { param, state } => {
                            let decl = c.input(param).unwrap();
                            (find_in(&c.id, param), decl.states.iter().position(|s| s == state).unwrap())
                        }
                        Literal::Fault(mode) => (
                            faults.iter().find(|(x, _)| *x == c.id).unwrap().1,
                            c.fault_modes.iter().position(|f| f == mode).unwrap(),
                        ),
                    })
                    .collect();
                let decl = c.output(&r.output).unwrap();
                let hv = decl.states.iter().position(|s| *s == r.state).unwrap();
                clauses.push((
                    ante,
                    find_out(&c.id, &r.output),
                    hv,
                    r.polarity == Polarity::Excludes,
                    complement_rank(&levels, r.certainty),
                ));
            }
        }

        let top = (levels.len() - 1) as u8;
        let total: usize = radix.iter().product();
        let mut base = vec![top; total];
        let mut values = vec![0usize; radix.len()];
        for (w, slot) in base.iter_mut().enumerate() {
            let mut rest = w;
            for (v, r) in values.iter_mut().zip(&radix) {
                *v = rest % r;
                rest /= r;
            }
            for (ante, hvar, hval, excl, pi) in &clauses {
                if ante.iter().all(|(v, x)| values[*v] == *x) && ((values[*hvar] == *hval) == *excl) {
                    *slot = (*slot).min(*pi);
                }
            }
        }

        let mut oracle = Oracle { levels, with_obs: Vec::new(), base, radix, outputs, faults, model: model.clone() };
        let mut units = Vec::new();
        for (m, d) in &observations.present {
            units.push(oracle.unit(m, false, *d));
        }
        for (m, d) in &observations.absent {
            units.push(oracle.unit(m, true, *d));
        }
        oracle.with_obs = oracle.apply(&oracle.base, &units);
        oracle
    }

    fn unit(&self, m: &Manifestation, forbid: bool, w: Degree) -> Unit {
        let (_, _, var) = self.outputs.iter().find(|(c, o, _)| *c == m.component && *o == m.output).unwrap();
        let decl = self.model.component(&m.component).unwrap().output(&m.output).unwrap();
        let value = decl.states.iter().position(|s| *s == m.state).unwrap();
        Unit { var: *var, value, forbid, pi: complement_rank(&self.levels, w) }
    }

    fn disorder_units(&self, d: &Disorder) -> Vec<Unit> {
        match d {
            Disorder::Fault { component, mode } => {
                let var = self.faults.iter().find(|(c, _)| c == component).unwrap().1;
                let value = self.model.component(component).unwrap().fault_modes.iter().position(|f| f == mode).unwrap();
                vec![Unit { var, value, forbid: false, pi: 0 }]
            }
            Disorder::Signature { .. } => {
                d.signature_states().iter().map(|m| self.unit(m, false, Degree::ONE)).collect()
            }
        }
    }

    fn value_of(&self, w: usize, var: usize) -> usize {
        let mut rest = w;
        for r in &self.radix[..var] {
            rest /= r;
        }
        rest % self.radix[var]
    }

    fn apply(&self, pis: &[u8], units: &[Unit]) -> Vec<u8> {
        pis.iter()
            .enumerate()
            .map(|(w, &p)| {
                units
                    .iter()
                    .filter(|u| (self.value_of(w, u.var) == u.value) == u.forbid)
                    .fold(p, |acc, u| acc.min(u.pi))
            })
            .collect()
    }

    fn inconsistency(&self, pis: &[u8], units: &[Unit]) -> Degree {
        let best = pis
            .iter()
            .enumerate()
            .map(|(w, &p)| {
                units
                    .iter()
                    .filter(|u| (self.value_of(w, u.var) == u.value) == u.forbid)
                    .fold(p, |acc, u| acc.min(u.pi))
            })
            .max()
            .unwrap_or(0);
        self.levels[best as usize].complement()
    }

    pub fn interpretations(&self) -> usize {
        self.base.len()
    }

    /// `1 - Inc(SD ∪ CXT ∪ OBS ∪ {d})`.
    pub fn consistency(&self, d: &Disorder) -> Degree {
        self.inconsistency(&self.with_obs, &self.disorder_units(d)).complement()
    }

    /// `N(m)` in `SD ∪ CXT ∪ {d}`.
    pub fn entailment(&self, d: &Disorder, m: &Manifestation) -> Degree {
        let mut units = self.disorder_units(d);
        units.push(self.unit(m, true, Degree::ONE));
        self.inconsistency(&self.base, &units)
    }

    /// Classical entailment of `m` from the hard part of the base with `d`.
    pub fn classically_entails(&self, d: &Disorder, m: &Manifestation) -> bool {
        self.entailment(d, m).is_one()
    }
}

/// Every signature and fault mode of the model.
pub fn all_disorders(model: &SystemModel) -> Vec<Disorder> {
    let mut out = Vec::new();
    for c in &model.components {
        for o in &c.outputs {
            for s in &o.states {
                out.push(Disorder::signature(c.id.clone(), o.id.clone(), s.clone()));
            }
        }
        for f in &c.fault_modes {
            out.push(Disorder::fault(c.id.clone(), f.clone()));
        }
    }
    out
}
