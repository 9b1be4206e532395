//! Plain-text rendering of boards and probes.

use std::fmt::Write;

use possdiag_core::engine::HypothesisStatus;
use possdiag_core::session::{BoardView, NamedDegree, ProbeView};
use serde::Serialize;

/// The serde name of a unit enum variant.
pub fn label<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

pub fn degree(d: &NamedDegree) -> String {
    match &d.name {
        Some(n) => n.clone(),
        None if d.denominator == 1 => d.numerator.to_string(),
        None => format!("{}/{}", d.numerator, d.denominator),
    }
}

pub fn board(b: &BoardView) -> String {
    let mut out = String::new();
    writeln!(out, "revision {}", b.revision).unwrap();
    if b.abductive.is_empty() {
        writeln!(out, "abductive explanations: none").unwrap();
    } else {
        writeln!(out, "abductive explanations: {}", b.abductive.join(", ")).unwrap();
    }
    let width = b.hypotheses.iter().map(|h| h.id.len()).max().unwrap_or(10).max(10);
    writeln!(
        out,
        "{:>3}  {:<width$}  {:<16}  {:<16}  {:<18}  status",
        "#", "hypothesis", "abductive", "consistency", "class"
    )
    .unwrap();
    for (i, h) in b.hypotheses.iter().enumerate() {
        let mut status = label(&h.status);
        if h.status == HypothesisStatus::Discarded {
            if let Some(reason) = &h.discard_reason {
                status = format!("{} ({})", status, label_reason(reason));
            }
            if let Some(k) = &h.killed_by {
                status = format!("{} by {}", status, k);
            }
        }
        if let Some(v) = &h.verdict {
            status = format!("{}, {} by user", status, label(&v.verdict));
            if !v.note.is_empty() {
                status = format!("{}: {}", status, v.note);
            }
        }
        writeln!(
            out,
            "{:>3}  {:<width$}  {:<16}  {:<16}  {:<18}  {}",
            i + 1,
            h.id,
            degree(&h.abductive_degree),
            degree(&h.consistency_degree),
            label(&h.preference_class),
            status
        )
        .unwrap();
    }
    out
}

fn label_reason(r: &possdiag_core::engine::DiscardReason) -> String {
    use possdiag_core::engine::DiscardReason;
    match r {
        DiscardReason::Inconsistent => "inconsistent".into(),
        DiscardReason::Irrelevant { manifestation } => format!("cannot cause {}", manifestation),
        DiscardReason::Observed { manifestation } => format!("{} observed", manifestation),
    }
}

pub fn probes(list: &[ProbeView]) -> String {
    let mut out = String::new();
    if list.is_empty() {
        writeln!(out, "no probe left to suggest").unwrap();
        return out;
    }
    for (i, p) in list.iter().enumerate() {
        let present = p.expectations.iter().filter(|e| label(&e.kind) == "present").count();
        let absent = p.expectations.iter().filter(|e| label(&e.kind) == "absent").count();
        writeln!(
            out,
            "{:>3}  {:<28}  score {:>4}  present under {}, absent under {}",
            i + 1,
            p.label,
            p.discrimination_score,
            present,
            absent
        )
        .unwrap();
    }
    out
}
