//! System description, context, observations and their validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::SourceSpan;
use crate::scale::{Degree, Scale};

/// Name reserved for the fault-mode pseudo-parameter in rule antecedents.
pub const FAULT_PARAM: &str = "fault";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Analog,
    Digital,
    Custom,
}

impl ParamKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ParamKind::Analog => "analog",
            ParamKind::Digital => "digital",
            ParamKind::Custom => "custom",
        }
    }

    /// States assumed when a declaration omits them.
    pub fn default_states(self) -> Option<&'static [&'static str]> {
        match self {
            ParamKind::Analog => Some(&["ABS", "DEG"]),
            ParamKind::Digital => Some(&["ZERO", "ONE"]),
            ParamKind::Custom => None,
        }
    }
}

/// An input or output parameter. Only abnormal states are listed; the
/// nominal value is implicit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamDecl {
    pub id: String,
    pub kind: ParamKind,
    pub states: Vec<String>,
    pub observable: bool,
    #[serde(skip)]
    pub span: Option<SourceSpan>,
}

impl ParamDecl {
    pub fn has_state(&self, state: &str) -> bool {
        self.states.iter().any(|s| s == state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// `N(¬d ∨ m) ≥ certainty`
    Entails,
    /// `N(¬d ∨ ¬m) ≥ certainty`
    Excludes,
}

/// A disorder literal in a rule antecedent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Literal {
    Input { param: String, state: String },
    Fault(String),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Input { param, state } => write!(f, "{}={}", param, state),
            Literal::Fault(mode) => write!(f, "{}={}", FAULT_PARAM, mode),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorRule {
    pub config: Option<String>,
    pub antecedent: Vec<Literal>,
    pub output: String,
    pub state: String,
    pub polarity: Polarity,
    pub certainty: Degree,
    #[serde(skip)]
    pub span: Option<SourceSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub id: String,
    /// Wiring components introduced for fan-in. They propagate anomalies but
    /// are never themselves hypothesised as faulty.
    pub junction: bool,
    pub config_modes: Vec<String>,
    pub inputs: Vec<ParamDecl>,
    pub outputs: Vec<ParamDecl>,
    pub fault_modes: Vec<String>,
    pub rules: Vec<BehaviorRule>,
    #[serde(skip)]
    pub span: Option<SourceSpan>,
}

impl Component {
    pub fn new(id: impl Into<String>) -> Component {
        Component {
            id: id.into(),
            junction: false,
            config_modes: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            fault_modes: Vec::new(),
            rules: Vec::new(),
            span: None,
        }
    }

    pub fn input(&self, id: &str) -> Option<&ParamDecl> {
        self.inputs.iter().find(|p| p.id == id)
    }

    pub fn output(&self, id: &str) -> Option<&ParamDecl> {
        self.outputs.iter().find(|p| p.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PortRef {
    pub component: String,
    pub param: String,
}

impl PortRef {
    pub fn new(component: impl Into<String>, param: impl Into<String>) -> PortRef {
        PortRef { component: component.into(), param: param.into() }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.component, self.param)
    }
}

/// Fan-out connection carrying an output state unchanged to several inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub source: PortRef,
    pub targets: Vec<PortRef>,
    #[serde(skip)]
    pub span: Option<SourceSpan>,
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ->", self.source)?;
        for (i, t) in self.targets.iter().enumerate() {
            write!(f, "{}{}", if i == 0 { " " } else { ", " }, t)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemModel {
    pub scale: Scale,
    pub components: Vec<Component>,
    pub links: Vec<Link>,
}

impl SystemModel {
    pub fn component(&self, id: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.id == id)
    }

    pub fn component_index(&self, id: &str) -> Option<usize> {
        self.components.iter().position(|c| c.id == id)
    }

    /// Copy with every source span removed, for structural comparison.
    pub fn without_spans(&self) -> SystemModel {
        let mut m = self.clone();
        for c in &mut m.components {
            c.span = None;
            for p in c.inputs.iter_mut().chain(c.outputs.iter_mut()) {
                p.span = None;
            }
            for r in &mut c.rules {
                r.span = None;
            }
        }
        for l in &mut m.links {
            l.span = None;
        }
        m
    }
}

/// Every `(component, output)` pair flagged observable.
pub fn observable_outputs(model: &SystemModel) -> BTreeSet<PortRef> {
    model
        .components
        .iter()
        .flat_map(|c| {
            c.outputs
                .iter()
                .filter(|p| p.observable)
                .map(move |p| PortRef::new(c.id.clone(), p.id.clone()))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Duplicate,
    Reference,
    EmptyStates,
    EmptyAntecedent,
    Certainty,
    Coherence,
    FanIn,
    LinkStates,
    Junction,
    Cycle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub severity: Severity,
    pub kind: ViolationKind,
    pub component: Option<String>,
    pub message: String,
    #[serde(skip)]
    pub span: Option<SourceSpan>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(span) = &self.span {
            write!(f, "{}: ", span)?;
        }
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{}: {}", sev, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.violations.iter().any(|v| v.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.severity == Severity::Error)
    }

    fn push(
        &mut self,
        severity: Severity,
        kind: ViolationKind,
        component: Option<&str>,
        span: Option<&SourceSpan>,
        message: String,
    ) {
        self.violations.push(Violation {
            severity,
            kind,
            component: component.map(str::to_string),
            message,
            span: span.cloned(),
        });
    }

    fn error(&mut self, kind: ViolationKind, component: Option<&str>, span: Option<&SourceSpan>, message: String) {
        self.push(Severity::Error, kind, component, span, message);
    }
}

/// Checks every structural invariant of a model. Violations are returned as
/// data, sorted so the result does not depend on declaration order.
pub fn validate_model(model: &SystemModel) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut ids = BTreeSet::new();
    for c in &model.components {
        if !ids.insert(c.id.as_str()) {
            report.error(ViolationKind::Duplicate, Some(&c.id), c.span.as_ref(), format!("duplicate component `{}`", c.id));
        }
        validate_component(model, c, &mut report);
    }

    validate_links(model, &mut report);
    detect_cycles(model, &mut report);

    report.violations.sort_by(|a, b| {
        (std::cmp::Reverse(a.severity), a.kind, &a.component, &a.message)
            .cmp(&(std::cmp::Reverse(b.severity), b.kind, &b.component, &b.message))
    });
    report
}

fn validate_component(model: &SystemModel, c: &Component, report: &mut ValidationReport) {
    let cid = Some(c.id.as_str());
    let mut params = BTreeSet::new();
    for p in c.inputs.iter().chain(&c.outputs) {
        if p.id == FAULT_PARAM {
            report.error(ViolationKind::Reference, cid, p.span.as_ref(), format!("`{}` is reserved and cannot name a parameter of `{}`", FAULT_PARAM, c.id));
        }
        if !params.insert(p.id.as_str()) {
            report.error(ViolationKind::Duplicate, cid, p.span.as_ref(), format!("duplicate parameter `{}.{}`", c.id, p.id));
        }
        if p.states.is_empty() {
            report.error(ViolationKind::EmptyStates, cid, p.span.as_ref(), format!("parameter `{}.{}` declares no abnormal state", c.id, p.id));
        }
        let mut states = BTreeSet::new();
        for s in &p.states {
            if !states.insert(s.as_str()) {
                report.error(ViolationKind::Duplicate, cid, p.span.as_ref(), format!("duplicate state `{}` on `{}.{}`", s, c.id, p.id));
            }
        }
    }
    let mut modes = BTreeSet::new();
    for m in &c.config_modes {
        if !modes.insert(m.as_str()) {
            report.error(ViolationKind::Duplicate, cid, c.span.as_ref(), format!("duplicate config mode `{}` on `{}`", m, c.id));
        }
    }
    let mut faults = BTreeSet::new();
    for f in &c.fault_modes {
        if !faults.insert(f.as_str()) {
            report.error(ViolationKind::Duplicate, cid, c.span.as_ref(), format!("duplicate fault mode `{}` on `{}`", f, c.id));
        }
    }
    if c.junction && !c.fault_modes.is_empty() {
        report.error(ViolationKind::Junction, cid, c.span.as_ref(), format!("junction `{}` cannot declare fault modes", c.id));
    }

    for rule in &c.rules {
        let span = rule.span.as_ref();
        if rule.antecedent.is_empty() {
            report.error(ViolationKind::EmptyAntecedent, cid, span, format!("rule on `{}` has an empty antecedent", c.id));
        }
        if rule.certainty.is_zero() {
            report.error(ViolationKind::Certainty, cid, span, format!("rule on `{}` has zero certainty", c.id));
        } else if !model.scale.contains(rule.certainty) {
            report.error(ViolationKind::Certainty, cid, span, format!("rule certainty {} on `{}` is not a scale level", rule.certainty, c.id));
        }
        if let Some(mode) = &rule.config {
            if !c.config_modes.contains(mode) {
                report.error(ViolationKind::Reference, cid, span, format!("undeclared config mode `{}` on `{}`", mode, c.id));
            }
        }
        for lit in &rule.antecedent {
            match lit {
                Literal::Input { param, state } => match c.input(param) {
                    None => report.error(ViolationKind::Reference, cid, span, format!("undeclared input `{}.{}`", c.id, param)),
                    Some(decl) if !decl.has_state(state) => report.error(
                        ViolationKind::Reference,
                        cid,
                        span,
                        format!(
                            "undeclared state `{}` for input `{}.{}` (declared: {})",
                            state,
                            c.id,
                            param,
                            decl.states.join(" ")
                        ),
                    ),
                    Some(_) => {}
                },
                Literal::Fault(mode) => {
                    if !c.fault_modes.contains(mode) {
                        report.error(ViolationKind::Reference, cid, span, format!("undeclared fault mode `{}` on `{}`", mode, c.id));
                    }
                }
            }
        }
        match c.output(&rule.output) {
            None => report.error(ViolationKind::Reference, cid, span, format!("undeclared output `{}.{}`", c.id, rule.output)),
            Some(decl) if !decl.has_state(&rule.state) => report.error(
                ViolationKind::Reference,
                cid,
                span,
                format!(
                    "undeclared state `{}` for output `{}.{}` (declared: {})",
                    rule.state,
                    c.id,
                    rule.output,
                    decl.states.join(" ")
                ),
            ),
            Some(_) => {}
        }
    }

    // Coherence: no antecedent may both entail and exclude one output state.
    for (i, a) in c.rules.iter().enumerate() {
        for b in c.rules.iter().skip(i + 1) {
            if a.polarity == b.polarity || a.output != b.output || a.state != b.state {
                continue;
            }
            let configs_meet = match (&a.config, &b.config) {
                (Some(x), Some(y)) => x == y,
                _ => true,
            };
            if !configs_meet {
                continue;
            }
            let sa: BTreeSet<_> = a.antecedent.iter().collect();
            let sb: BTreeSet<_> = b.antecedent.iter().collect();
            if sa.is_subset(&sb) || sb.is_subset(&sa) {
                report.error(
                    ViolationKind::Coherence,
                    cid,
                    b.span.as_ref().or(a.span.as_ref()),
                    format!("incoherent rules on `{}`: `{}={}` is both entailed and excluded", c.id, a.output, a.state),
                );
            }
        }
    }
}

fn validate_links(model: &SystemModel, report: &mut ValidationReport) {
    let mut fed: BTreeMap<&PortRef, usize> = BTreeMap::new();
    for link in &model.links {
        let span = link.span.as_ref();
        let source = model
            .component(&link.source.component)
            .and_then(|c| c.output(&link.source.param));
        if source.is_none() {
            report.error(ViolationKind::Reference, Some(&link.source.component), span, format!("link source `{}` is not a declared output", link.source));
        }
        if link.targets.is_empty() {
            report.error(ViolationKind::Reference, Some(&link.source.component), span, format!("link from `{}` has no target", link.source));
        }
        for t in &link.targets {
            *fed.entry(t).or_default() += 1;
            let target = model.component(&t.component).and_then(|c| c.input(&t.param));
            match (source, target) {
                (_, None) => report.error(ViolationKind::Reference, Some(&t.component), span, format!("link target `{}` is not a declared input", t)),
                (Some(s), Some(tp)) => {
                    let a: BTreeSet<_> = s.states.iter().collect();
                    let b: BTreeSet<_> = tp.states.iter().collect();
                    if a != b {
                        report.error(
                            ViolationKind::LinkStates,
                            Some(&t.component),
                            span,
                            format!("link `{}` -> `{}` joins parameters with different states", link.source, t),
                        );
                    }
                }
                _ => {}
            }
        }
    }
    for (port, n) in fed {
        if n > 1 {
            let span = model
                .links
                .iter()
                .filter(|l| l.targets.contains(port))
                .nth(1)
                .and_then(|l| l.span.as_ref());
            report.error(ViolationKind::FanIn, Some(&port.component), span, format!("input `{}` is the target of {} links", port, n));
        }
    }
}

/// Cycles are reported at parameter level: output → input through links and
/// input → output through a rule mentioning the input.
fn detect_cycles(model: &SystemModel, report: &mut ValidationReport) {
    let mut edges: BTreeMap<(String, String), BTreeSet<(String, String)>> = BTreeMap::new();
    for link in &model.links {
        for t in &link.targets {
            edges
                .entry((link.source.component.clone(), link.source.param.clone()))
                .or_default()
                .insert((t.component.clone(), t.param.clone()));
        }
    }
    for c in &model.components {
        for r in &c.rules {
            for lit in &r.antecedent {
                if let Literal::Input { param, .. } = lit {
                    edges
                        .entry((c.id.clone(), param.clone()))
                        .or_default()
                        .insert((c.id.clone(), r.output.clone()));
                }
            }
        }
    }
    let reach = |from: &(String, String)| {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&(String, String)> = edges.get(from).into_iter().flatten().collect();
        while let Some(n) = stack.pop() {
            if seen.insert(n.clone()) {
                stack.extend(edges.get(n).into_iter().flatten());
            }
        }
        seen
    };
    let reachable: BTreeMap<_, _> = edges.keys().map(|n| (n.clone(), reach(n))).collect();
    let mut covered = BTreeSet::new();
    for (node, r) in &reachable {
        if !r.contains(node) || covered.contains(node) {
            continue;
        }
        // `node` is the smallest member of its strongly connected component.
        for other in r {
            if reachable.get(other).is_some_and(|ro| ro.contains(node)) {
                covered.insert(other.clone());
            }
        }
        report.push(
            Severity::Warning,
            ViolationKind::Cycle,
            Some(&node.0),
            model.component(&node.0).and_then(|c| c.span.as_ref()),
            format!("influence cycle through `{}.{}`", node.0, node.1),
        );
    }
}

// ---------------------------------------------------------------------------
// Context, observations, problems

/// Configuration mode of every configurable component.
pub type Context = BTreeMap<String, String>;

/// An abnormal state of an observable output.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Manifestation {
    pub component: String,
    pub output: String,
    pub state: String,
}

impl Manifestation {
    pub fn new(component: impl Into<String>, output: impl Into<String>, state: impl Into<String>) -> Manifestation {
        Manifestation { component: component.into(), output: output.into(), state: state.into() }
    }

    pub fn port(&self) -> PortRef {
        PortRef::new(self.component.clone(), self.output.clone())
    }
}

impl fmt::Display for Manifestation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}({})", self.component, self.output, self.state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObsPolarity {
    Present,
    Absent,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObservationError {
    #[error("`{0}` is observed both present and absent")]
    Conflict(Manifestation),
    #[error("`{0}` contradicts the present observation `{1}` on the same output")]
    StateConflict(Manifestation, Manifestation),
    #[error("observation degree of `{0}` must be positive")]
    ZeroDegree(Manifestation),
}

/// Fuzzy sets of present (M⁺) and absent (M⁻) manifestations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observations {
    pub present: BTreeMap<Manifestation, Degree>,
    pub absent: BTreeMap<Manifestation, Degree>,
}

impl Observations {
    pub fn is_empty(&self) -> bool {
        self.present.is_empty() && self.absent.is_empty()
    }

    /// Adds one observation. Returns whether anything changed; repeating a
    /// known observation keeps the larger degree.
    pub fn insert(&mut self, m: Manifestation, polarity: ObsPolarity, degree: Degree) -> Result<bool, ObservationError> {
        if degree.is_zero() {
            return Err(ObservationError::ZeroDegree(m));
        }
        let (same, other) = match polarity {
            ObsPolarity::Present => (&self.present, &self.absent),
            ObsPolarity::Absent => (&self.absent, &self.present),
        };
        if other.contains_key(&m) {
            return Err(ObservationError::Conflict(m));
        }
        if polarity == ObsPolarity::Present {
            if let Some(prev) = self
                .present
                .keys()
                .find(|p| p.component == m.component && p.output == m.output && p.state != m.state)
            {
                return Err(ObservationError::StateConflict(m, prev.clone()));
            }
        }
        if let Some(prev) = same.get(&m) {
            if *prev >= degree {
                return Ok(false);
            }
        }
        match polarity {
            ObsPolarity::Present => self.present.insert(m, degree),
            ObsPolarity::Absent => self.absent.insert(m, degree),
        };
        Ok(true)
    }

    /// A manifestation is settled once it, or another state of the same
    /// output, has been observed present, or it has been observed absent.
    pub fn is_observed(&self, m: &Manifestation) -> bool {
        self.absent.contains_key(m)
            || self
                .present
                .keys()
                .any(|p| p.component == m.component && p.output == m.output)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProblemError {
    #[error("model has validation errors: {0}")]
    InvalidModel(String),
    #[error("unknown component `{0}` in context")]
    UnknownComponent(String),
    #[error("unknown config mode `{mode}` for `{component}`")]
    UnknownConfigMode { component: String, mode: String },
    #[error("component `{0}` has no config modes")]
    NotConfigurable(String),
    #[error("no config mode assigned to `{0}`")]
    MissingConfig(String),
    #[error("unknown output `{0}`")]
    UnknownOutput(String),
    #[error("output `{0}` is not observable")]
    NotObservable(String),
    #[error("unknown state `{state}` for output `{port}`")]
    UnknownState { port: String, state: String },
    #[error(transparent)]
    Observation(#[from] ObservationError),
}

/// `{SD, CXT, OBS}` with rule activity resolved against the context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagnosticProblem {
    pub model: Arc<SystemModel>,
    pub context: Context,
    pub observations: Observations,
    /// `active[c][r]`: rule `r` of component `c` applies in this context.
    pub active: Vec<Vec<bool>>,
}

impl DiagnosticProblem {
    pub fn scale(&self) -> &Scale {
        &self.model.scale
    }

    pub fn rule_active(&self, component: usize, rule: usize) -> bool {
        self.active[component][rule]
    }

    /// Same model and context, observations replaced.
    pub fn with_observations(&self, observations: Observations) -> Result<DiagnosticProblem, ProblemError> {
        check_observations(&self.model, &observations)?;
        Ok(DiagnosticProblem {
            model: Arc::clone(&self.model),
            context: self.context.clone(),
            observations,
            active: self.active.clone(),
        })
    }
}

/// Checks that `m` names an observable output and one of its states.
pub fn check_manifestation(model: &SystemModel, m: &Manifestation) -> Result<(), ProblemError> {
    let port = m.port().to_string();
    let decl = model
        .component(&m.component)
        .and_then(|c| c.output(&m.output))
        .ok_or_else(|| ProblemError::UnknownOutput(port.clone()))?;
    if !decl.observable {
        return Err(ProblemError::NotObservable(port));
    }
    if !decl.has_state(&m.state) {
        return Err(ProblemError::UnknownState { port, state: m.state.clone() });
    }
    Ok(())
}

fn check_observations(model: &SystemModel, obs: &Observations) -> Result<(), ProblemError> {
    for (m, d) in obs.present.iter().chain(&obs.absent) {
        check_manifestation(model, m)?;
        if d.is_zero() {
            return Err(ObservationError::ZeroDegree(m.clone()).into());
        }
    }
    if let Some(m) = obs.present.keys().find(|m| obs.absent.contains_key(*m)) {
        return Err(ObservationError::Conflict(m.clone()).into());
    }
    Ok(())
}

/// Builds a diagnostic problem; rules whose config literal differs from the
/// context assignment are marked inactive.
pub fn compose_problem(
    model: Arc<SystemModel>,
    context: Context,
    observations: Observations,
) -> Result<DiagnosticProblem, ProblemError> {
    let report = validate_model(&model);
    if report.has_errors() {
        let msgs: Vec<String> = report.errors().map(|v| v.message.clone()).collect();
        return Err(ProblemError::InvalidModel(msgs.join("; ")));
    }
    for (comp, mode) in &context {
        let c = model.component(comp).ok_or_else(|| ProblemError::UnknownComponent(comp.clone()))?;
        if c.config_modes.is_empty() {
            return Err(ProblemError::NotConfigurable(comp.clone()));
        }
        if !c.config_modes.contains(mode) {
            return Err(ProblemError::UnknownConfigMode { component: comp.clone(), mode: mode.clone() });
        }
    }
    for c in &model.components {
        if !c.config_modes.is_empty() && !context.contains_key(&c.id) {
            return Err(ProblemError::MissingConfig(c.id.clone()));
        }
    }
    check_observations(&model, &observations)?;
    let active = model
        .components
        .iter()
        .map(|c| {
            c.rules
                .iter()
                .map(|r| match &r.config {
                    None => true,
                    Some(mode) => context.get(&c.id) == Some(mode),
                })
                .collect()
        })
        .collect();
    Ok(DiagnosticProblem { model, context, observations, active })
}

// ---------------------------------------------------------------------------
// Disorders

/// A single-fault candidate explanation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Disorder {
    /// An identified fault mode.
    Fault { component: String, mode: String },
    /// Abnormal states on one or more outputs of one component, sorted by
    /// output id.
    Signature { component: String, states: Vec<(String, String)> },
}

impl Disorder {
    pub fn fault(component: impl Into<String>, mode: impl Into<String>) -> Disorder {
        Disorder::Fault { component: component.into(), mode: mode.into() }
    }

    pub fn signature(component: impl Into<String>, output: impl Into<String>, state: impl Into<String>) -> Disorder {
        Disorder::Signature { component: component.into(), states: vec![(output.into(), state.into())] }
    }

    pub fn component(&self) -> &str {
        match self {
            Disorder::Fault { component, .. } | Disorder::Signature { component, .. } => component,
        }
    }

    pub fn is_signature(&self) -> bool {
        matches!(self, Disorder::Signature { .. })
    }

    pub fn signature_size(&self) -> usize {
        match self {
            Disorder::Fault { .. } => 1,
            Disorder::Signature { states, .. } => states.len(),
        }
    }

    /// Output states of a signature as manifestations.
    pub fn signature_states(&self) -> Vec<Manifestation> {
        match self {
            Disorder::Fault { .. } => Vec::new(),
            Disorder::Signature { component, states } => states
                .iter()
                .map(|(o, s)| Manifestation::new(component.clone(), o.clone(), s.clone()))
                .collect(),
        }
    }

    /// Stable textual id, also used as the last ranking tie-breaker.
    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Disorder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Disorder::Fault { component, mode } => write!(f, "{}:{}", component, mode),
            Disorder::Signature { component, states } => {
                for (i, (o, s)) in states.iter().enumerate() {
                    if i > 0 {
                        write!(f, "+")?;
                    }
                    write!(f, "{}.{}({})", component, o, s)?;
                }
                Ok(())
            }
        }
    }
}
