//! Interactive probing loop.

use std::io::{BufRead, Write};

use possdiag_core::model::{ObsPolarity, SystemModel};
use possdiag_core::session::{ObservationRecord, Session, Verdict, VerdictKind};

use crate::render;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Board,
    Probes,
    Observe(ObservationRecord),
    WhatIf(ObservationRecord),
    Reject { hypothesis: String, note: String },
    Save(String),
    Help,
    Quit,
}

pub const HELP: &str = "commands:
  board                                 show the ranked hypotheses
  probes                                show suggested probes
  obs <comp>.<out> =|!= <state> <level> record an observation
  whatif <comp>.<out> =|!= <state> <level>
                                        show the board as if observed
  reject <hypothesis> [note]            mark a hypothesis rejected
  save <file>                           write the journal
  quit";

/// Resolves `comp.out`, or a bare output name when it is unique among
/// observable outputs.
fn resolve_target(target: &str, model: &SystemModel) -> Result<(String, String), String> {
    if let Some((c, o)) = target.split_once('.') {
        return Ok((c.to_string(), o.to_string()));
    }
    let hits: Vec<(String, String)> = model
        .components
        .iter()
        .flat_map(|c| c.outputs.iter().filter(|o| o.id == target).map(move |o| (c.id.clone(), o.id.clone())))
        .collect();
    match hits.len() {
        1 => Ok(hits.into_iter().next().unwrap()),
        0 => Err(format!("no output named `{}`", target)),
        _ => Err(format!("output name `{}` is ambiguous; use component.output", target)),
    }
}

fn parse_observation(words: &[&str], model: &SystemModel) -> Result<ObservationRecord, String> {
    let [target, op, state, level @ ..] = words else {
        return Err("expected <comp>.<out> =|!= <state> <level>".into());
    };
    if level.is_empty() {
        return Err("missing level".into());
    }
    let polarity = match *op {
        "=" => ObsPolarity::Present,
        "!=" => ObsPolarity::Absent,
        other => return Err(format!("expected `=` or `!=`, found `{}`", other)),
    };
    let (component, output) = resolve_target(target, model)?;
    Ok(ObservationRecord { component, output, state: state.to_string(), polarity, level: level.join("_") })
}

pub fn parse_command(line: &str, model: &SystemModel) -> Result<Option<Command>, String> {
    let spaced = line.replace("!=", " \u{0} ").replace('=', " = ").replace('\u{0}', "!=");
    let words: Vec<&str> = spaced.split_whitespace().collect();
    let Some((head, rest)) = words.split_first() else { return Ok(None) };
    let cmd = match *head {
        "board" | "b" => Command::Board,
        "probes" | "p" => Command::Probes,
        "obs" | "o" => Command::Observe(parse_observation(rest, model)?),
        "whatif" | "w" => Command::WhatIf(parse_observation(rest, model)?),
        "reject" => {
            let (hyp, note) = rest.split_first().ok_or("expected a hypothesis id")?;
            Command::Reject { hypothesis: hyp.to_string(), note: note.join(" ") }
        }
        "save" => Command::Save(rest.first().ok_or("expected a file name")?.to_string()),
        "help" | "?" => Command::Help,
        "quit" | "exit" | "q" => Command::Quit,
        other => return Err(format!("unknown command `{}`; try help", other)),
    };
    Ok(Some(cmd))
}

/// Runs the loop until `quit` or end of input.
pub fn run(session: &mut Session, input: impl BufRead, mut out: impl Write) -> std::io::Result<()> {
    write!(out, "{}", render::board(&session.board()))?;
    writeln!(out, "type help for commands")?;
    for line in input.lines() {
        let line = line?;
        let model = session.problem().model.clone();
        let cmd = match parse_command(&line, &model) {
            Ok(Some(c)) => c,
            Ok(None) => continue,
            Err(e) => {
                writeln!(out, "error: {}", e)?;
                continue;
            }
        };
        match cmd {
            Command::Board => write!(out, "{}", render::board(&session.board()))?,
            Command::Probes => write!(out, "{}", render::probes(&session.probes()))?,
            Command::Observe(obs) => match session.add_observation(obs) {
                Ok(a) if a.changed => write!(out, "{}", render::board(&session.board()))?,
                Ok(_) => writeln!(out, "already observed; revision {}", session.revision())?,
                Err(e) => writeln!(out, "error: {}", e)?,
            },
            Command::WhatIf(obs) => match session.what_if(&obs) {
                Ok(b) => {
                    writeln!(out, "what if {} (not recorded):", obs)?;
                    write!(out, "{}", render::board(&b))?;
                }
                Err(e) => writeln!(out, "error: {}", e)?,
            },
            Command::Reject { hypothesis, note } => {
                match session.add_verdict(Verdict { hypothesis, verdict: VerdictKind::Rejected, note }) {
                    Ok(_) => writeln!(out, "noted")?,
                    Err(e) => writeln!(out, "error: {}", e)?,
                }
            }
            Command::Save(path) => match std::fs::write(&path, session.journal_text()) {
                Ok(()) => writeln!(out, "journal written to {}", path)?,
                Err(e) => writeln!(out, "error: {}", e)?,
            },
            Command::Help => writeln!(out, "{}", HELP)?,
            Command::Quit => break,
        }
    }
    Ok(())
}
