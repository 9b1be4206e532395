//! Random well-formed models for property and oracle tests.

use std::collections::BTreeSet;

use possdiag_core::model::{
    validate_model, BehaviorRule, Component, Context, Link, Literal, Manifestation, ObsPolarity, Observations,
    ParamDecl, ParamKind, Polarity, PortRef, SystemModel,
};
use possdiag_core::scale::{Level, Scale};
use possdiag_core::Degree;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct GenConfig {
    pub max_components: usize,
    /// Largest product of free-variable domain sizes the oracle accepts.
    pub max_domain: u64,
    /// Only weights 0 and 1.
    pub crisp: bool,
    /// Exercise every DSL feature (custom kinds, junctions, odd level names).
    pub rich: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { max_components: 6, max_domain: 4096, crisp: false, rich: false }
    }
}

/// A symmetric scale with `1..=3` intermediate pairs and an absence block.
pub fn random_scale(r: &mut impl Rng, rich: bool) -> Scale {
    let pairs = r.gen_range(0..=2);
    let mut lows = BTreeSet::new();
    while lows.len() < pairs {
        let den = r.gen_range(3..=20);
        let num = r.gen_range(1..den);
        if 2 * num < den {
            lows.insert(Degree::new(num, den).unwrap());
        }
    }
    let mut values: Vec<Degree> = vec![Degree::ZERO, Degree::ONE];
    for l in &lows {
        values.push(*l);
        values.push(l.complement());
    }
    if r.gen_bool(0.5) {
        values.push(Degree::new(1, 2).unwrap());
    }
    values.sort();
    values.dedup();
    values.reverse();
    let n = values.len();
    let levels: Vec<Level> = values
        .into_iter()
        .enumerate()
        .map(|(i, value)| {
            let name = match (i, rich) {
                (0, _) => "certain".to_string(),
                (i, _) if i == n - 1 => "possible".to_string(),
                (i, true) if i % 2 == 1 => format!("level {}", i),
                (i, _) => format!("l{}", i),
            };
            Level { name, value }
        })
        .collect();
    let mut absence = vec![("impossible".to_string(), "certain".to_string())];
    if rich && n > 2 {
        absence.push(("hardly".to_string(), levels[1].name.clone()));
    }
    Scale::with_absence(levels, absence).unwrap()
}

pub fn crisp_scale() -> Scale {
    Scale::with_absence(
        vec![Level { name: "certain".into(), value: Degree::ONE }, Level { name: "possible".into(), value: Degree::ZERO }],
        vec![("impossible".into(), "certain".into())],
    )
    .unwrap()
}

fn positive_levels(scale: &Scale) -> Vec<Degree> {
    scale.levels().iter().map(|l| l.value).filter(|d| !d.is_zero()).collect()
}

const STATE_POOL: &[&str] = &["ABS", "DEG", "HI"];

/// One attempt; `None` when the draw breaks a constraint.
fn attempt(r: &mut impl Rng, cfg: GenConfig) -> Option<(SystemModel, Context)> {
    let scale = if cfg.crisp { crisp_scale() } else { random_scale(r, cfg.rich) };
    let weights = positive_levels(&scale);
    let n_states = r.gen_range(1..=3);
    let states: Vec<String> = STATE_POOL[..n_states].iter().map(|s| s.to_string()).collect();
    let kind = if cfg.rich && r.gen_bool(0.3) {
        ParamKind::Custom
    } else if n_states == 2 {
        ParamKind::Analog
    } else {
        ParamKind::Custom
    };
    let n_comp = r.gen_range(1..=cfg.max_components);
    let mut comps: Vec<Component> = Vec::new();
    let mut links: Vec<Link> = Vec::new();
    let mut context = Context::new();
    let mut domain: u64 = 1;
    let decl = |id: String, observable: bool| ParamDecl { id, kind, states: states.clone(), observable, span: None };

    for ci in 0..n_comp {
        let mut c = Component::new(format!("c{}", ci));
        c.junction = cfg.rich && r.gen_bool(0.1);
        let n_out = if r.gen_bool(0.8) { 1 } else { 2 };
        for o in 0..n_out {
            c.outputs.push(decl(format!("out{}", o), r.gen_bool(0.6)));
            domain *= n_states as u64 + 1;
        }
        let n_in = if ci == 0 { r.gen_range(0..=1) } else { r.gen_range(0..=2) };
        for i in 0..n_in {
            let id = format!("in{}", i);
            c.inputs.push(decl(id.clone(), false));
            let earlier: Vec<(usize, usize)> =
                (0..ci).flat_map(|k| (0..comps[k].outputs.len()).map(move |o| (k, o))).collect();
            if let (true, Some(&(k, o))) = (r.gen_bool(0.85), earlier.choose(r)) {
                let source = PortRef::new(comps[k].id.clone(), comps[k].outputs[o].id.clone());
                let target = PortRef::new(c.id.clone(), id);
                match links.iter_mut().find(|l| l.source == source) {
                    Some(l) => l.targets.push(target),
                    None => links.push(Link { source, targets: vec![target], span: None }),
                }
            } else {
                domain *= n_states as u64 + 1;
            }
        }
        if r.gen_bool(0.25) {
            let n_modes = r.gen_range(1..=2);
            c.fault_modes = (0..n_modes).map(|m| format!("f{}", m)).collect();
            domain *= n_modes as u64 + 1;
        }
        if r.gen_bool(0.2) {
            c.config_modes = vec!["ON".into(), "OFF".into()];
            context.insert(c.id.clone(), if r.gen_bool(0.5) { "ON" } else { "OFF" }.to_string());
        }
        let n_rules = r.gen_range(0..=4);
        for _ in 0..n_rules {
            let mut sources: Vec<Literal> = Vec::new();
            for i in &c.inputs {
                sources.push(Literal::Input { param: i.id.clone(), state: states.choose(r).unwrap().clone() });
            }
            for f in &c.fault_modes {
                sources.push(Literal::Fault(f.clone()));
            }
            if sources.is_empty() {
                break;
            }
            let k = r.gen_range(1..=sources.len().min(2));
            let mut antecedent: Vec<Literal> = sources.choose_multiple(r, k).cloned().collect();
            antecedent.sort_by_key(|l| l.to_string());
            // Two literals on one parameter can never hold together.
            let params: BTreeSet<String> = antecedent
                .iter()
                .map(|l| match l {
                    Literal::Input { param, .. } => param.clone(),
                    Literal::Fault(_) => "fault".into(),
                })
                .collect();
            if params.len() != antecedent.len() {
                continue;
            }
            let output = c.outputs.choose(r).unwrap().id.clone();
            let config = if !c.config_modes.is_empty() && r.gen_bool(0.6) {
                Some(c.config_modes.choose(r).unwrap().clone())
            } else {
                None
            };
            c.rules.push(BehaviorRule {
                config,
                antecedent,
                output,
                state: states.choose(r).unwrap().clone(),
                polarity: if r.gen_bool(0.75) { Polarity::Entails } else { Polarity::Excludes },
                certainty: *weights.choose(r).unwrap(),
                span: None,
            });
        }
        comps.push(c);
    }
    if domain > cfg.max_domain {
        return None;
    }
    let model = SystemModel { scale, components: comps, links };
    if validate_model(&model).has_errors() {
        return None;
    }
    Some((model, context))
}

/// Acyclic model and matching context. Rejection-samples until valid.
pub fn random_model(r: &mut impl Rng, cfg: GenConfig) -> (SystemModel, Context) {
    loop {
        if let Some(found) = attempt(r, cfg) {
            return found;
        }
    }
}

/// All output states of the model.
pub fn output_states(model: &SystemModel) -> Vec<Manifestation> {
    let mut out = Vec::new();
    for c in &model.components {
        for o in &c.outputs {
            for s in &o.states {
                out.push(Manifestation::new(c.id.clone(), o.id.clone(), s.clone()));
            }
        }
    }
    out
}

pub fn observable_states(model: &SystemModel) -> Vec<Manifestation> {
    let mut out = Vec::new();
    for c in &model.components {
        for o in c.outputs.iter().filter(|o| o.observable) {
            for s in &o.states {
                out.push(Manifestation::new(c.id.clone(), o.id.clone(), s.clone()));
            }
        }
    }
    out
}

/// Up to `max` random consistent observations of observable outputs.
pub fn random_observations(r: &mut impl Rng, model: &SystemModel, max: usize) -> Vec<(Manifestation, ObsPolarity, Degree)> {
    let weights = positive_levels(&model.scale);
    let mut pool = observable_states(model);
    pool.shuffle(r);
    let mut obs = Observations::default();
    let mut out = Vec::new();
    for m in pool {
        if out.len() >= max {
            break;
        }
        let pol = if r.gen_bool(0.5) { ObsPolarity::Present } else { ObsPolarity::Absent };
        let d = *weights.choose(r).unwrap();
        if obs.insert(m.clone(), pol, d).is_ok() {
            out.push((m, pol, d));
        }
    }
    out
}

pub fn observations_from(list: &[(Manifestation, ObsPolarity, Degree)]) -> Observations {
    let mut obs = Observations::default();
    for (m, p, d) in list {
        obs.insert(m.clone(), *p, *d).unwrap();
    }
    obs
}
