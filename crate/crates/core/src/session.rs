//! Interactive diagnosis sessions with an append-only journal.
//!
//! A session owns a diagnostic problem and the board computed from it. Every
//! accepted observation bumps the revision and is journaled together with a
//! hash of the resulting board, so replaying a journal can check that each
//! revision is reproduced exactly.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dsl::{parse_model, parse_observations, Diagnostic};
use crate::engine::{
    diagnose, expected_manifestations, suggest_probes, DiscardReason, EngineError, Expectation, ExpectationKind,
    Hypothesis, HypothesisStatus, PreferenceClass, ProbeSuggestion,
};
use crate::model::{
    check_manifestation, compose_problem, DiagnosticProblem, Manifestation, ObsPolarity, ObservationError,
    ProblemError,
};
use crate::scale::{Degree, Scale};

pub const JOURNAL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("{}", join_diagnostics(.0))]
    Parse(Vec<Diagnostic>),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Observation(#[from] ObservationError),
    #[error("unknown level `{0}`")]
    UnknownLevel(String),
    #[error("level `{0}` is zero and carries no information")]
    ZeroLevel(String),
    #[error("unknown hypothesis `{0}`")]
    UnknownHypothesis(String),
}

fn join_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("\n")
}

/// A degree as shown to operators: level name plus exact value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedDegree {
    pub name: Option<String>,
    pub numerator: i64,
    pub denominator: i64,
}

impl NamedDegree {
    pub fn new(scale: &Scale, d: Degree) -> NamedDegree {
        NamedDegree { name: scale.name_of(d).map(String::from), numerator: d.numerator(), denominator: d.denominator() }
    }

    pub fn degree(&self) -> Option<Degree> {
        Degree::new(self.numerator, self.denominator)
    }
}

/// One observation as submitted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub component: String,
    pub output: String,
    pub state: String,
    pub polarity: ObsPolarity,
    pub level: String,
}

impl ObservationRecord {
    pub fn manifestation(&self) -> Manifestation {
        Manifestation::new(self.component.clone(), self.output.clone(), self.state.clone())
    }
}

impl std::fmt::Display for ObservationRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let op = match self.polarity {
            ObsPolarity::Present => "=",
            ObsPolarity::Absent => "!=",
        };
        write!(f, "{}.{} {} {} {}", self.component, self.output, op, self.state, self.level)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub hypothesis: String,
    pub verdict: VerdictKind,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectationView {
    pub manifestation: String,
    pub kind: ExpectationKind,
    pub degree: NamedDegree,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisView {
    pub id: String,
    pub disorder: crate::model::Disorder,
    pub abductive_degree: NamedDegree,
    pub coverage: NamedDegree,
    pub consistency_degree: NamedDegree,
    pub relevant: bool,
    pub preference_class: PreferenceClass,
    pub status: HypothesisStatus,
    pub discard_reason: Option<DiscardReason>,
    /// The observation whose addition discarded this hypothesis.
    pub killed_by: Option<ObservationRecord>,
    pub verdict: Option<Verdict>,
    pub expected: Vec<ExpectationView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeExpectationView {
    pub hypothesis: String,
    pub kind: ExpectationKind,
    pub degree: NamedDegree,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeView {
    pub manifestation: Manifestation,
    pub label: String,
    pub discrimination_score: u64,
    pub expectations: Vec<ProbeExpectationView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoardView {
    pub revision: u64,
    pub hypotheses: Vec<HypothesisView>,
    /// Ids of active hypotheses with a positive abductive degree.
    pub abductive: Vec<String>,
    pub probes: Vec<ProbeView>,
}

impl BoardView {
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("board serialises");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn hypothesis(&self, id: &str) -> Option<&HypothesisView> {
        self.hypotheses.iter().find(|h| h.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JournalEvent {
    Header { version: u32, session_id: String, model_sha256: String },
    ModelLoaded { model_name: String, model: String, observations: String },
    ObservationAdded { revision: u64, observation: ObservationRecord },
    Verdict { revision: u64, verdict: Verdict },
    Snapshot { revision: u64, board_sha256: String },
}

impl JournalEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            JournalEvent::Header { .. } => "header",
            JournalEvent::ModelLoaded { .. } => "model_loaded",
            JournalEvent::ObservationAdded { .. } => "observation_added",
            JournalEvent::Verdict { .. } => "verdict",
            JournalEvent::Snapshot { .. } => "snapshot",
        }
    }
}

const EVENT_KINDS: &[&str] = &["header", "model_loaded", "observation_added", "verdict", "snapshot"];

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub model_name: String,
    problem: DiagnosticProblem,
    hypotheses: Vec<Hypothesis>,
    probes: Vec<ProbeSuggestion>,
    killed_by: BTreeMap<String, ObservationRecord>,
    verdicts: BTreeMap<String, Verdict>,
    revision: u64,
    journal: Vec<JournalEvent>,
}

/// Result of a mutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Applied {
    pub revision: u64,
    pub changed: bool,
}

impl Session {
    /// Parses both texts and computes the initial board.
    pub fn create(id: &str, model_name: &str, model_text: &str, obs_text: &str) -> Result<Session, SessionError> {
        let parsed = parse_model(model_text, model_name).map_err(SessionError::Parse)?;
        let (context, observations) =
            parse_observations(obs_text, "observations", &parsed.model).map_err(SessionError::Parse)?;
        let problem = compose_problem(Arc::new(parsed.model), context, observations)?;
        let hypotheses = diagnose(&problem)?;
        let probes = suggest_probes(&problem, &hypotheses);
        let mut s = Session {
            id: id.to_string(),
            model_name: model_name.to_string(),
            problem,
            hypotheses,
            probes,
            killed_by: BTreeMap::new(),
            verdicts: BTreeMap::new(),
            revision: 0,
            journal: vec![
                JournalEvent::Header { version: JOURNAL_VERSION, session_id: id.to_string(), model_sha256: sha256_hex(model_text) },
                JournalEvent::ModelLoaded {
                    model_name: model_name.to_string(),
                    model: model_text.to_string(),
                    observations: obs_text.to_string(),
                },
            ],
        };
        s.push_snapshot();
        Ok(s)
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn problem(&self) -> &DiagnosticProblem {
        &self.problem
    }

    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.hypotheses
    }

    pub fn journal(&self) -> &[JournalEvent] {
        &self.journal
    }

    pub fn journal_text(&self) -> String {
        journal_to_text(&self.journal)
    }

    fn push_snapshot(&mut self) {
        let digest = self.board().digest();
        self.journal.push(JournalEvent::Snapshot { revision: self.revision, board_sha256: digest });
    }

    fn resolve(&self, obs: &ObservationRecord) -> Result<(Manifestation, Degree), SessionError> {
        let m = obs.manifestation();
        check_manifestation(&self.problem.model, &m)?;
        let scale = self.problem.scale();
        let degree = match obs.polarity {
            ObsPolarity::Present => scale.level_of(&obs.level),
            ObsPolarity::Absent => scale.absence_level_of(&obs.level),
        }
        .map_err(|_| SessionError::UnknownLevel(obs.level.clone()))?;
        if degree.is_zero() {
            return Err(SessionError::ZeroLevel(obs.level.clone()));
        }
        Ok((m, degree))
    }

    /// Problem, hypotheses and probes as they would be with `obs` added.
    fn extended(&self, obs: &ObservationRecord) -> Result<Option<(DiagnosticProblem, Vec<Hypothesis>)>, SessionError> {
        let (m, degree) = self.resolve(obs)?;
        let mut observations = self.problem.observations.clone();
        if !observations.insert(m, obs.polarity, degree)? {
            return Ok(None);
        }
        let problem = self.problem.with_observations(observations)?;
        let hypotheses = diagnose(&problem)?;
        Ok(Some((problem, hypotheses)))
    }

    /// Keeps every hypothesis ever shown: rows that are no longer candidates
    /// stay on the board as discarded.
    fn merge(&self, mut next: Vec<Hypothesis>, problem: &DiagnosticProblem) -> Vec<Hypothesis> {
        for old in &self.hypotheses {
            if next.iter().any(|h| h.disorder == old.disorder) {
                continue;
            }
            let observed = old
                .disorder
                .signature_states()
                .into_iter()
                .find(|m| problem.observations.present.contains_key(m) || problem.observations.absent.contains_key(m));
            let mut h = old.clone();
            h.status = HypothesisStatus::Discarded;
            h.abductive_degree = Degree::ZERO;
            h.discard_reason = Some(match observed {
                Some(manifestation) => DiscardReason::Observed { manifestation },
                None => old.discard_reason.clone().unwrap_or(DiscardReason::Inconsistent),
            });
            next.push(h);
        }
        let (active, mut discarded): (Vec<_>, Vec<_>) = next.into_iter().partition(|h| h.is_active());
        discarded.sort_by_cached_key(|h| {
            (h.disorder.signature_size() > 1, std::cmp::Reverse(h.consistency_degree), h.preference_class, h.disorder.id())
        });
        active.into_iter().chain(discarded).collect()
    }

    /// Adds an observation. Re-adding a known observation is a no-op that
    /// leaves the revision unchanged.
    pub fn add_observation(&mut self, obs: ObservationRecord) -> Result<Applied, SessionError> {
        let Some((problem, next)) = self.extended(&obs)? else {
            return Ok(Applied { revision: self.revision, changed: false });
        };
        let merged = self.merge(next, &problem);
        for h in &merged {
            let was_active = self.hypotheses.iter().any(|o| o.disorder == h.disorder && o.is_active());
            if was_active && !h.is_active() {
                self.killed_by.insert(h.disorder.id(), obs.clone());
            }
        }
        self.probes = suggest_probes(&problem, &merged);
        self.problem = problem;
        self.hypotheses = merged;
        self.revision += 1;
        self.journal.push(JournalEvent::ObservationAdded { revision: self.revision, observation: obs });
        self.push_snapshot();
        Ok(Applied { revision: self.revision, changed: true })
    }

    /// Board as if `obs` were added; the session is left untouched.
    pub fn what_if(&self, obs: &ObservationRecord) -> Result<BoardView, SessionError> {
        let Some((problem, next)) = self.extended(obs)? else {
            return Ok(self.board());
        };
        let merged = self.merge(next, &problem);
        let probes = suggest_probes(&problem, &merged);
        let mut killed = self.killed_by.clone();
        for h in &merged {
            if !h.is_active() && self.hypotheses.iter().any(|o| o.disorder == h.disorder && o.is_active()) {
                killed.insert(h.disorder.id(), obs.clone());
            }
        }
        Ok(render(&problem, &merged, &probes, &killed, &self.verdicts, self.revision))
    }

    /// Records an operator verdict. This is an annotation only: the engine
    /// status of the hypothesis is unchanged.
    pub fn add_verdict(&mut self, verdict: Verdict) -> Result<Applied, SessionError> {
        if !self.hypotheses.iter().any(|h| h.disorder.id() == verdict.hypothesis) {
            return Err(SessionError::UnknownHypothesis(verdict.hypothesis));
        }
        if self.verdicts.get(&verdict.hypothesis) == Some(&verdict) {
            return Ok(Applied { revision: self.revision, changed: false });
        }
        self.verdicts.insert(verdict.hypothesis.clone(), verdict.clone());
        self.journal.push(JournalEvent::Verdict { revision: self.revision, verdict });
        self.push_snapshot();
        Ok(Applied { revision: self.revision, changed: true })
    }

    pub fn board(&self) -> BoardView {
        render(&self.problem, &self.hypotheses, &self.probes, &self.killed_by, &self.verdicts, self.revision)
    }

    pub fn probes(&self) -> Vec<ProbeView> {
        self.board().probes
    }
}

fn render(
    problem: &DiagnosticProblem,
    hypotheses: &[Hypothesis],
    probes: &[ProbeSuggestion],
    killed_by: &BTreeMap<String, ObservationRecord>,
    verdicts: &BTreeMap<String, Verdict>,
    revision: u64,
) -> BoardView {
    let scale = problem.scale();
    let named = |d: Degree| NamedDegree::new(scale, d);
    let view_expectation = |e: Expectation| ExpectationView {
        manifestation: e.manifestation.to_string(),
        kind: e.kind,
        degree: named(e.degree),
    };
    let rows = hypotheses
        .iter()
        .map(|h| {
            let id = h.disorder.id();
            let expected = if h.is_active() {
                expected_manifestations(problem, &h.disorder).into_iter().map(view_expectation).collect()
            } else {
                Vec::new()
            };
            HypothesisView {
                disorder: h.disorder.clone(),
                abductive_degree: named(h.abductive_degree),
                coverage: named(h.coverage),
                consistency_degree: named(h.consistency_degree),
                relevant: h.relevant,
                preference_class: h.preference_class,
                status: h.status,
                discard_reason: h.discard_reason.clone(),
                killed_by: if h.is_active() { None } else { killed_by.get(&id).cloned() },
                verdict: verdicts.get(&id).cloned(),
                expected,
                id,
            }
        })
        .collect();
    let probes = probes
        .iter()
        .map(|p| ProbeView {
            manifestation: p.manifestation.clone(),
            label: p.manifestation.to_string(),
            discrimination_score: p.discrimination_score,
            expectations: p
                .expectations
                .iter()
                .map(|e| ProbeExpectationView { hypothesis: e.disorder.clone(), kind: e.kind, degree: named(e.degree) })
                .collect(),
        })
        .collect();
    BoardView {
        revision,
        abductive: hypotheses.iter().filter(|h| h.is_abductive()).map(|h| h.disorder.id()).collect(),
        hypotheses: rows,
        probes,
    }
}

// ---------------------------------------------------------------------------
// Journal

pub fn journal_to_text(events: &[JournalEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("event serialises"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("empty journal")]
    Empty,
    #[error("event {index}: corrupt event ({reason}); last valid event: {}", last_valid.as_deref().unwrap_or("none"))]
    Corrupt { index: usize, reason: String, last_valid: Option<String> },
    #[error("event {index}: unknown event type `{kind}`")]
    UnknownEvent { index: usize, kind: String },
    #[error("event {index}: {message}")]
    Mismatch { index: usize, message: String },
}

/// Parses journal lines. Blank lines are skipped; indices count events
/// from zero.
pub fn parse_journal(text: &str) -> Result<Vec<JournalEvent>, ReplayError> {
    let mut events = Vec::new();
    let last_valid = |events: &Vec<JournalEvent>| {
        events.last().map(|e: &JournalEvent| format!("#{} {}", events.len() - 1, e.kind()))
    };
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let index = events.len();
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| ReplayError::Corrupt {
            index,
            reason: e.to_string(),
            last_valid: last_valid(&events),
        })?;
        let kind = value.get("type").and_then(|t| t.as_str()).unwrap_or("").to_string();
        if !EVENT_KINDS.contains(&kind.as_str()) {
            return Err(ReplayError::UnknownEvent { index, kind });
        }
        let event: JournalEvent = serde_json::from_value(value).map_err(|e| ReplayError::Corrupt {
            index,
            reason: e.to_string(),
            last_valid: last_valid(&events),
        })?;
        events.push(event);
    }
    if events.is_empty() {
        return Err(ReplayError::Empty);
    }
    Ok(events)
}

/// Rebuilds a session from its journal, checking every recorded board hash.
pub fn replay(text: &str) -> Result<Session, ReplayError> {
    let events = parse_journal(text)?;
    let mismatch = |index: usize, message: String| ReplayError::Mismatch { index, message };
    let JournalEvent::Header { version, session_id, model_sha256 } = &events[0] else {
        return Err(mismatch(0, "journal does not start with a header".into()));
    };
    if *version != JOURNAL_VERSION {
        return Err(mismatch(0, format!("unsupported journal version {}", version)));
    }
    let Some(JournalEvent::ModelLoaded { model_name, model, observations }) = events.get(1) else {
        return Err(mismatch(1, "expected model_loaded after the header".into()));
    };
    if sha256_hex(model) != *model_sha256 {
        return Err(mismatch(1, "model content does not match the header hash".into()));
    }
    let mut session = Session::create(session_id, model_name, model, observations)
        .map_err(|e| mismatch(1, format!("cannot rebuild session: {}", e)))?;
    // The rebuilt session journals its own events; compare as we go.
    session.journal.truncate(2);
    for (index, event) in events.iter().enumerate().skip(2) {
        match event {
            JournalEvent::Header { .. } | JournalEvent::ModelLoaded { .. } => {
                return Err(mismatch(index, format!("unexpected {} event", event.kind())));
            }
            JournalEvent::ObservationAdded { revision, observation } => {
                let len = session.journal.len();
                let applied = session
                    .add_observation(observation.clone())
                    .map_err(|e| mismatch(index, format!("observation rejected: {}", e)))?;
                if !applied.changed || applied.revision != *revision {
                    return Err(mismatch(index, format!("expected revision {}, got {}", revision, applied.revision)));
                }
                session.journal.truncate(len);
            }
            JournalEvent::Verdict { verdict, .. } => {
                let len = session.journal.len();
                session.add_verdict(verdict.clone()).map_err(|e| mismatch(index, format!("verdict rejected: {}", e)))?;
                session.journal.truncate(len);
            }
            JournalEvent::Snapshot { revision, board_sha256 } => {
                if *revision != session.revision {
                    return Err(mismatch(index, format!("snapshot for revision {} at revision {}", revision, session.revision)));
                }
                if session.board().digest() != *board_sha256 {
                    return Err(mismatch(index, format!("board of revision {} differs from the recorded one", revision)));
                }
            }
        }
        session.journal.push(event.clone());
    }
    Ok(session)
}
