//! Property checks shared by the proptest suite and the acceptance runner.
//! Each returns `Err` with a readable counterexample.

use std::sync::Arc;

use possdiag_core::dsl::{parse_model, serialize_model, serialize_observations};
use possdiag_core::engine::{
    abductive_degree, consistency_degree, diagnose, entailment_weight, relevant_comps, relevant_subtheory,
    HypothesisStatus,
};
use possdiag_core::model::{
    compose_problem, validate_model, BehaviorRule, Context, DiagnosticProblem, Literal, ObsPolarity,
    Observations, Polarity, SystemModel,
};
use possdiag_core::session::{ObservationRecord, Session};
use possdiag_core::{Degree, Scale};
use rand::seq::SliceRandom;
use rand::Rng;

use super::gen::{
    observations_from, output_states, random_model, random_observations, rng, GenConfig,
};
use super::oracle::{all_disorders, Oracle};

pub type Check = Result<(), String>;
pub type SeededCheck = fn(u64) -> Check;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn problem(model: &SystemModel, ctx: &Context, obs: Observations) -> DiagnosticProblem {
    compose_problem(Arc::new(model.clone()), ctx.clone(), obs).expect("generated problem composes")
}

/// Random model, context and observations for one seed.
pub fn instance(seed: u64, cfg: GenConfig) -> (SystemModel, Context, Observations) {
    let mut r = rng(seed);
    let (model, ctx) = random_model(&mut r, cfg);
    let obs = observations_from(&random_observations(&mut r, &model, 3));
    (model, ctx, obs)
}

/// Engine against exhaustive enumeration. Returns the number of compared
/// degrees.
pub fn oracle_equivalence(seed: u64) -> Result<usize, String> {
    let (model, ctx, obs) = instance(seed, GenConfig::default());
    let p = problem(&model, &ctx, obs.clone());
    let oracle = Oracle::new(&model, &ctx, &obs);
    let states = output_states(&model);
    let mut n = 0;
    for d in all_disorders(&model) {
        let (e, o) = (consistency_degree(&p, &d), oracle.consistency(&d));
        if e != o {
            return Err(format!("seed {seed}: consistency of {d}: engine {e}, oracle {o}\n{}", serialize_model(&model)));
        }
        n += 1;
        for m in &states {
            let (e, o) = (entailment_weight(&p, &d, m), oracle.entailment(&d, m));
            if e != o {
                return Err(format!(
                    "seed {seed}: entailment of {m} under {d}: engine {e}, oracle {o}\n{}",
                    serialize_model(&model)
                ));
            }
            n += 1;
        }
    }
    Ok(n)
}

pub fn scale_laws(a: Degree, b: Degree, c: Degree) -> Check {
    let msg = || format!("a={a} b={b} c={c}");
    ensure(a.min_combine(b) == b.min_combine(a) && a.max_combine(b) == b.max_combine(a), msg)?;
    ensure(a.min_combine(b.min_combine(c)) == a.min_combine(b).min_combine(c), msg)?;
    ensure(a.max_combine(b.max_combine(c)) == a.max_combine(b).max_combine(c), msg)?;
    ensure(a.min_combine(a.max_combine(b)) == a && a.max_combine(a.min_combine(b)) == a, msg)?;
    ensure(a.min_combine(b.max_combine(c)) == a.min_combine(b).max_combine(a.min_combine(c)), msg)?;
    ensure(a.complement().complement() == a, msg)?;
    // De Morgan through the involutive complement.
    ensure(a.min_combine(b).complement() == a.complement().max_combine(b.complement()), msg)?;
    ensure((a <= b) == (b.complement() <= a.complement()), msg)?;
    ensure(a.min_combine(Degree::ONE) == a && a.max_combine(Degree::ZERO) == a, msg)?;
    Ok(())
}

pub fn godel_laws(a: Degree, b: Degree, c: Degree) -> Check {
    let msg = || format!("a={a} b={b} c={c}");
    let imp = |x: Degree, y: Degree| x.godel_implies(y);
    ensure(imp(a, b) == if a <= b { Degree::ONE } else { b }, msg)?;
    // Monotone in the consequent, antitone in the antecedent.
    if b <= c {
        ensure(imp(a, b) <= imp(a, c), msg)?;
        ensure(imp(c, a) <= imp(b, a), msg)?;
    }
    // Residuation: min(a, x) <= b iff x <= a -> b.
    ensure((a.min_combine(c) <= b) == (c <= imp(a, b)), msg)?;
    ensure(imp(Degree::ONE, b) == b && imp(a, Degree::ONE) == Degree::ONE, msg)?;
    Ok(())
}

/// Δ* never drops when a present manifestation is forgotten and never rises
/// when a present degree is raised.
pub fn abductive_monotone(seed: u64) -> Check {
    let (model, ctx, obs) = instance(seed, GenConfig::default());
    let p = problem(&model, &ctx, obs.clone());
    let levels: Vec<Degree> = model.scale.levels().iter().map(|l| l.value).collect();
    for (m, beta) in &obs.present {
        let mut fewer = obs.clone();
        fewer.present.remove(m);
        let pf = problem(&model, &ctx, fewer);
        let mut raised = obs.clone();
        let higher: Vec<Degree> = levels.iter().copied().filter(|l| l > beta).collect();
        for d in all_disorders(&model) {
            let base = abductive_degree(&p, &d);
            let after = abductive_degree(&pf, &d);
            ensure(after >= base, || format!("seed {seed}: dropping {m} lowered Δ*({d}) {base} -> {after}"))?;
            for h in &higher {
                raised.present.insert(m.clone(), *h);
                let pr = problem(&model, &ctx, raised.clone());
                let up = abductive_degree(&pr, &d);
                ensure(up <= base, || format!("seed {seed}: raising {m} to {h} raised Δ*({d}) {base} -> {up}"))?;
            }
        }
    }
    Ok(())
}

/// Over a two-level scale Δ* is 1 exactly when `d` classically entails every
/// present manifestation. The classical check enumerates models directly.
pub fn crisp_specialization(seed: u64) -> Check {
    let cfg = GenConfig { crisp: true, ..GenConfig::default() };
    let (model, ctx, obs) = instance(seed, cfg);
    let p = problem(&model, &ctx, obs.clone());
    let oracle = Oracle::new(&model, &ctx, &Observations::default());
    for d in all_disorders(&model) {
        let delta = abductive_degree(&p, &d);
        ensure(delta.is_zero() || delta.is_one(), || format!("seed {seed}: Δ*({d}) = {delta} on a crisp scale"))?;
        let classical = obs.present.keys().all(|m| oracle.classically_entails(&d, m));
        ensure(delta.is_one() == classical, || format!("seed {seed}: Δ*({d}) = {delta}, classical {classical}"))?;
    }
    Ok(())
}

/// Adding observations never raises consistency, and never revives a
/// hypothesis on a session board.
pub fn monotone_discard(seed: u64) -> Check {
    let mut r = rng(seed);
    let (model, ctx) = random_model(&mut r, GenConfig::default());
    let all = random_observations(&mut r, &model, 5);
    let Some(first_present) = all.iter().position(|(_, p, _)| *p == ObsPolarity::Present) else {
        return Ok(());
    };
    let mut order = all.clone();
    let seed_obs = order.remove(first_present);
    order.insert(0, seed_obs);

    for k in 1..order.len() {
        let before = problem(&model, &ctx, observations_from(&order[..k]));
        let after = problem(&model, &ctx, observations_from(&order[..=k]));
        for d in all_disorders(&model) {
            let (c0, c1) = (consistency_degree(&before, &d), consistency_degree(&after, &d));
            ensure(c1 <= c0, || format!("seed {seed}: consistency of {d} rose {c0} -> {c1}"))?;
        }
    }

    let text = serialize_model(&model);
    let obs_text = serialize_observations(&ctx, &observations_from(&order[..1]), &model.scale);
    let mut session = Session::create("prop", "generated", &text, &obs_text)
        .map_err(|e| format!("seed {seed}: session: {e}\n{text}\n{obs_text}"))?;
    for (m, pol, d) in &order[1..] {
        let prior = session.board();
        let record = ObservationRecord {
            component: m.component.clone(),
            output: m.output.clone(),
            state: m.state.clone(),
            polarity: *pol,
            level: model.scale.name_of(*d).unwrap().to_string(),
        };
        session.add_observation(record).map_err(|e| format!("seed {seed}: {e}"))?;
        let board = session.board();
        for h in prior.hypotheses.iter().filter(|h| h.status == HypothesisStatus::Discarded) {
            let now = board.hypothesis(&h.id).ok_or_else(|| format!("seed {seed}: row {} vanished", h.id))?;
            ensure(now.status == HypothesisStatus::Discarded, || format!("seed {seed}: {} revived", h.id))?;
        }
    }
    Ok(())
}

/// A second symmetric scale with the same number of levels.
fn other_values(r: &mut impl Rng, n: usize) -> Vec<Degree> {
    loop {
        let den: i64 = r.gen_range(n as i64 * 2..=60);
        let mut lows: Vec<i64> = (1..den).filter(|x| 2 * x < den).collect();
        lows.shuffle(r);
        let pairs = (n - 2) / 2;
        if lows.len() < pairs {
            continue;
        }
        let mut values = vec![Degree::ZERO, Degree::ONE];
        for &x in &lows[..pairs] {
            let v = Degree::new(x, den).unwrap();
            values.push(v);
            values.push(v.complement());
        }
        if n % 2 == 1 {
            values.push(Degree::new(1, 2).unwrap());
        }
        values.sort();
        values.dedup();
        if values.len() == n {
            values.reverse();
            return values;
        }
    }
}

/// Same model over a re-valued scale: every degree moves to the level of
/// the same rank.
pub fn revalue(model: &SystemModel, obs: &Observations, values: &[Degree]) -> (SystemModel, Observations) {
    let scale: Scale = model.scale.revalued(values).expect("revalued scale");
    let map = |d: Degree| {
        let rank = model.scale.rank_of(d).expect("degree on the scale");
        values[values.len() - 1 - rank]
    };
    let mut m = model.clone();
    m.scale = scale;
    for c in &mut m.components {
        for rule in &mut c.rules {
            rule.certainty = map(rule.certainty);
        }
    }
    let mut o = Observations::default();
    for (k, d) in &obs.present {
        o.present.insert(k.clone(), map(*d));
    }
    for (k, d) in &obs.absent {
        o.absent.insert(k.clone(), map(*d));
    }
    (m, o)
}

pub fn ordinal_robustness(seed: u64) -> Check {
    let (model, ctx, obs) = instance(seed, GenConfig::default());
    if obs.present.is_empty() {
        return Ok(());
    }
    let mut r = rng(seed ^ 0x5eed);
    let values = other_values(&mut r, model.scale.levels().len());
    let (model2, obs2) = revalue(&model, &obs, &values);
    let h1 = diagnose(&problem(&model, &ctx, obs)).map_err(|e| e.to_string())?;
    let h2 = diagnose(&problem(&model2, &ctx, obs2)).map_err(|e| e.to_string())?;
    ensure(h1.len() == h2.len(), || format!("seed {seed}: {} vs {} hypotheses", h1.len(), h2.len()))?;
    let rank = |s: &Scale, d: Degree| s.rank_of(d).unwrap();
    for (a, b) in h1.iter().zip(&h2) {
        let same = a.disorder == b.disorder
            && a.status == b.status
            && a.discard_reason == b.discard_reason
            && a.preference_class == b.preference_class
            && rank(&model.scale, a.abductive_degree) == rank(&model2.scale, b.abductive_degree)
            && rank(&model.scale, a.consistency_degree) == rank(&model2.scale, b.consistency_degree)
            && rank(&model.scale, a.coverage) == rank(&model2.scale, b.coverage);
        ensure(same, || format!("seed {seed}: {:?} vs {:?}", a, b))?;
    }
    Ok(())
}

pub fn dsl_round_trip(seed: u64) -> Check {
    let mut r = rng(seed);
    let cfg = GenConfig { rich: true, max_domain: u64::MAX, ..GenConfig::default() };
    let (model, _) = random_model(&mut r, cfg);
    let text = serialize_model(&model);
    let parsed = parse_model(&text, "gen.pdm").map_err(|d| format!("seed {seed}: {:?}\n{text}", d))?;
    ensure(parsed.model.without_spans() == model, || format!("seed {seed}: round trip differs\n{text}"))?;
    ensure(serialize_model(&parsed.model) == text, || format!("seed {seed}: text not canonical\n{text}"))
}

/// Adding an uncertain entails rule never shrinks a relevant restriction.
pub fn relevance_monotone(seed: u64) -> Check {
    let mut r = rng(seed);
    let (model, ctx) = random_model(&mut r, GenConfig::default());
    let weights: Vec<Degree> =
        model.scale.levels().iter().map(|l| l.value).filter(|d| !d.is_zero() && !d.is_one()).collect();
    let hosts: Vec<usize> = (0..model.components.len()).filter(|&i| !model.components[i].inputs.is_empty()).collect();
    let (Some(&w), Some(&ci)) = (weights.choose(&mut r), hosts.choose(&mut r)) else {
        return Ok(());
    };
    let mut bigger = model.clone();
    let c = &mut bigger.components[ci];
    let input = c.inputs.choose(&mut r).unwrap().clone();
    let output = c.outputs.choose(&mut r).unwrap().clone();
    c.rules.push(BehaviorRule {
        config: None,
        antecedent: vec![Literal::Input { param: input.id.clone(), state: input.states.choose(&mut r).unwrap().clone() }],
        output: output.id.clone(),
        state: output.states.choose(&mut r).unwrap().clone(),
        polarity: Polarity::Entails,
        certainty: w,
        span: None,
    });
    if validate_model(&bigger).has_errors() {
        return Ok(());
    }
    let p0 = problem(&model, &ctx, Observations::default());
    let p1 = problem(&bigger, &ctx, Observations::default());
    for m in output_states(&model) {
        let (a, b) = (relevant_comps(&p0, &m), relevant_comps(&p1, &m));
        ensure(a.is_subset(&b), || format!("seed {seed}: components for {m} shrank {a:?} -> {b:?}"))?;
        let (a, b) = (relevant_subtheory(&p0, &m), relevant_subtheory(&p1, &m));
        ensure(a.outputs.is_subset(&b.outputs), || format!("seed {seed}: outputs for {m} shrank"))?;
        ensure(a.links.is_subset(&b.links), || format!("seed {seed}: links for {m} shrank"))?;
    }
    Ok(())
}
