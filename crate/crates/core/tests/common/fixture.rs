use std::sync::Arc;

use possdiag_core::dsl::{parse_model, parse_observations};
use possdiag_core::model::{compose_problem, DiagnosticProblem, Disorder};
use possdiag_core::Degree;

pub const MODEL: &str = include_str!("../../fixtures/solar_array.pdm");
pub const ECLIPSE: &str = include_str!("../../fixtures/eclipse.pdo");
pub const PROBES: &str = include_str!("../../fixtures/probes.pdo");

pub fn likely() -> Degree {
    Degree::new(3, 5).unwrap()
}

pub fn sig(c: &str, o: &str, s: &str) -> Disorder {
    Disorder::signature(c, o, s)
}

pub fn initial() -> DiagnosticProblem {
    let model = parse_model(MODEL, "solar_array.pdm").unwrap().model;
    let (ctx, obs) = parse_observations(ECLIPSE, "eclipse.pdo", &model).unwrap();
    compose_problem(Arc::new(model), ctx, obs).unwrap()
}

/// `p` with the observations of `text` added.
pub fn with_extra(p: &DiagnosticProblem, text: &str) -> DiagnosticProblem {
    let (_, extra) = parse_observations(text, "extra.pdo", &p.model).unwrap();
    let mut obs = p.observations.clone();
    for (m, d) in extra.present {
        obs.insert(m, possdiag_core::model::ObsPolarity::Present, d).unwrap();
    }
    for (m, d) in extra.absent {
        obs.insert(m, possdiag_core::model::ObsPolarity::Absent, d).unwrap();
    }
    p.with_observations(obs).unwrap()
}

pub fn after_probes() -> DiagnosticProblem {
    with_extra(&initial(), PROBES)
}
