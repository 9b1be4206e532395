//! Textual model (`.pdm`) and observation (`.pdo`) languages.
//!
//! ```text
//! model      = { scale | absence | component | link }
//! scale      = "scale" "{" { name "=" value } "}"
//! absence    = "absence" "{" { name "=" name } "}"
//! component  = ("component" | "junction") IDENT "{" { member } "}"
//! member     = "config" "{" { IDENT } "}" [";"]
//!            | "input" IDENT ":" kind [ "{" { IDENT } "}" ] ";"
//!            | "output" IDENT ":" kind [ "{" { IDENT } "}" ] ["observable"] ";"
//!            | "fault" IDENT { "," IDENT } ";"
//!            | "rule" [ "[" IDENT "]" ] lit { "&" lit } ("=>" | "=/>") IDENT "=" IDENT name ";"
//! lit        = IDENT "=" IDENT            (* "fault=<mode>" names a fault mode *)
//! link       = "link" port "->" port { "," port } ";"
//! port       = IDENT "." IDENT
//! value      = INT [ "/" INT ] | DECIMAL
//! name       = IDENT | STRING
//!
//! observations = { context | obs }
//! context      = "context" { IDENT "=" IDENT } ";"
//! obs          = "obs" [ IDENT "." ] IDENT ("=" | "!=") IDENT name ";"
//! ```
//!
//! `#` starts a comment running to the end of the line. Statements are
//! `;`-terminated so line breaks carry no meaning.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{
    check_manifestation, validate_model, BehaviorRule, Component, Context, Link, Literal, Manifestation,
    ObsPolarity, Observations, ParamDecl, ParamKind, Polarity, PortRef, SystemModel, ValidationReport,
    ViolationKind, FAULT_PARAM,
};
use crate::scale::{normalize_level_name, Degree, Level, Scale};

/// Position of a parsed entity or diagnostic. `length` is the width of the
/// offending token in characters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceSpan {
    pub file: String,
    pub line: u32,
    pub column: u32,
    pub length: u32,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    Lexical,
    Syntax,
    Reference,
    Scale,
    Conflict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub span: SourceSpan,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

/// A model that parsed and resolved; `report` holds the remaining
/// (non-reference) validation findings.
#[derive(Debug, Clone)]
pub struct ParsedModel {
    pub model: SystemModel,
    pub report: ValidationReport,
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Colon,
    Comma,
    Dot,
    Eq,
    NotEq,
    Slash,
    Amp,
    Arrow,
    Entails,
    Excludes,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{}`", s),
            Tok::Number(s) => format!("number `{}`", s),
            Tok::Str(s) => format!("string \"{}\"", s),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Eq => "`=`".into(),
            Tok::NotEq => "`!=`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Entails => "`=>`".into(),
            Tok::Excludes => "`=/>`".into(),
            Tok::Eof => "end of file".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: u32,
    column: u32,
    length: u32,
}

fn lex(text: &str, file: &str, errors: &mut Vec<Diagnostic>) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let span = |line, column, length| SourceSpan { file: file.to_string(), line, column, length };
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut u32| {
            *i += n;
            *col += n as u32;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let mut push = |tok: Tok, len: usize| {
            out.push(Token { tok, line: start_line, column: start_col, length: len as u32 });
        };
        if c.is_ascii_alphabetic() || c == '_' {
            let s: String = chars[i..].iter().take_while(|c| c.is_ascii_alphanumeric() || **c == '_').collect();
            let n = s.chars().count();
            push(Tok::Ident(s), n);
            advance(n, &mut i, &mut col);
            continue;
        }
        if c.is_ascii_digit() {
            let mut s: String = chars[i..].iter().take_while(|c| c.is_ascii_digit()).collect();
            if chars.get(i + s.len()) == Some(&'.') && chars.get(i + s.len() + 1).is_some_and(|c| c.is_ascii_digit()) {
                s.push('.');
                s.extend(chars[i + s.len()..].iter().take_while(|c| c.is_ascii_digit()));
            }
            let n = s.len();
            push(Tok::Number(s), n);
            advance(n, &mut i, &mut col);
            continue;
        }
        if c == '"' {
            let mut j = i + 1;
            let mut s = String::new();
            while j < chars.len() && chars[j] != '"' && chars[j] != '\n' {
                s.push(chars[j]);
                j += 1;
            }
            if chars.get(j) != Some(&'"') {
                errors.push(Diagnostic {
                    kind: DiagnosticKind::Lexical,
                    span: span(start_line, start_col, (j - i) as u32),
                    message: "unterminated string".into(),
                });
                advance(j - i, &mut i, &mut col);
                continue;
            }
            let n = j + 1 - i;
            push(Tok::Str(s), n);
            advance(n, &mut i, &mut col);
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (tok, n) = match (c, next) {
            ('=', Some('/')) if chars.get(i + 2) == Some(&'>') => (Tok::Excludes, 3),
            ('=', Some('>')) => (Tok::Entails, 2),
            ('-', Some('>')) => (Tok::Arrow, 2),
            ('!', Some('=')) => (Tok::NotEq, 2),
            ('=', _) => (Tok::Eq, 1),
            ('{', _) => (Tok::LBrace, 1),
            ('}', _) => (Tok::RBrace, 1),
            ('[', _) => (Tok::LBracket, 1),
            (']', _) => (Tok::RBracket, 1),
            (';', _) => (Tok::Semi, 1),
            (':', _) => (Tok::Colon, 1),
            (',', _) => (Tok::Comma, 1),
            ('.', _) => (Tok::Dot, 1),
            ('/', _) => (Tok::Slash, 1),
            ('&', _) => (Tok::Amp, 1),
            _ => {
                errors.push(Diagnostic {
                    kind: DiagnosticKind::Lexical,
                    span: span(start_line, start_col, 1),
                    message: format!("unexpected character `{}`", c),
                });
                advance(1, &mut i, &mut col);
                continue;
            }
        };
        push(tok, n);
        advance(n, &mut i, &mut col);
    }
    out.push(Token { tok: Tok::Eof, line, column: col, length: 0 });
    out
}

// ---------------------------------------------------------------------------
// Parser

struct Parser<'a> {
    file: &'a str,
    toks: Vec<Token>,
    pos: usize,
    errors: Vec<Diagnostic>,
}

type PResult<T> = Result<T, ()>;

impl<'a> Parser<'a> {
    fn new(text: &str, file: &'a str) -> Parser<'a> {
        let mut errors = Vec::new();
        let toks = lex(text, file, &mut errors);
        Parser { file, toks, pos: 0, errors }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span_at(&self, idx: usize) -> SourceSpan {
        let t = &self.toks[idx.min(self.toks.len() - 1)];
        SourceSpan { file: self.file.to_string(), line: t.line, column: t.column, length: t.length }
    }

    fn span(&self) -> SourceSpan {
        self.span_at(self.pos)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error_here(&mut self, expected: &str) {
        let found = self.peek().describe();
        let span = self.span();
        self.errors.push(Diagnostic {
            kind: DiagnosticKind::Syntax,
            span,
            message: format!("expected {}, found {}", expected, found),
        });
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.error_here(what);
            Err(())
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, SourceSpan)> {
        if let Tok::Ident(s) = self.peek().clone() {
            let span = self.span();
            self.bump();
            Ok((s, span))
        } else {
            self.error_here(what);
            Err(())
        }
    }

    fn name(&mut self, what: &str) -> PResult<(String, SourceSpan)> {
        match self.peek().clone() {
            Tok::Ident(s) | Tok::Str(s) => {
                let span = self.span();
                self.bump();
                Ok((s, span))
            }
            _ => {
                self.error_here(what);
                Err(())
            }
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    /// Skips to just past the next `;`, stopping before `}` or end of file.
    fn recover_statement(&mut self) {
        loop {
            match self.peek() {
                Tok::Semi => {
                    self.bump();
                    return;
                }
                Tok::RBrace | Tok::Eof => return,
                _ => {
                    self.bump();
                }
            }
        }
    }

    /// Skips to the next token that can start a top-level item.
    fn recover_item(&mut self, keywords: &[&str]) {
        let mut depth = 0usize;
        loop {
            match self.peek() {
                Tok::Eof => return,
                Tok::LBrace => depth += 1,
                Tok::RBrace => {
                    depth = depth.saturating_sub(1);
                    self.bump();
                    if depth == 0 {
                        return;
                    }
                    continue;
                }
                Tok::Ident(s) if depth == 0 && keywords.contains(&s.as_str()) => return,
                Tok::Semi if depth == 0 => {
                    self.bump();
                    return;
                }
                _ => {}
            }
            self.bump();
        }
    }
}

const MODEL_ITEMS: &[&str] = &["scale", "absence", "component", "junction", "link"];
const OBS_ITEMS: &[&str] = &["context", "obs"];

struct RawRule {
    rule: BehaviorRule,
    level: (String, SourceSpan),
}

struct RawComponent {
    component: Component,
    rules: Vec<RawRule>,
}

#[derive(Default)]
struct RawModel {
    scale: Option<(Vec<(String, Degree, SourceSpan)>, SourceSpan)>,
    absence: Vec<(String, String)>,
    components: Vec<RawComponent>,
    links: Vec<Link>,
}

fn parse_value(p: &mut Parser) -> PResult<Degree> {
    let span = p.span();
    let bad = |p: &mut Parser, text: &str| {
        p.errors.push(Diagnostic {
            kind: DiagnosticKind::Scale,
            span: span.clone(),
            message: format!("scale value `{}` is not a number in [0, 1]", text),
        });
    };
    let Tok::Number(num) = p.peek().clone() else {
        p.error_here("a scale value");
        return Err(());
    };
    p.bump();
    if num.contains('.') {
        let (int, frac) = num.split_once('.').unwrap();
        let digits = format!("{}{}", int, frac);
        let denominator = 10i64.checked_pow(frac.len() as u32);
        let parsed = digits.parse::<i64>().ok().zip(denominator).and_then(|(n, d)| Degree::new(n, d));
        return parsed.ok_or_else(|| bad(p, &num));
    }
    let numerator = num.parse::<i64>();
    if *p.peek() == Tok::Slash {
        p.bump();
        let Tok::Number(den) = p.peek().clone() else {
            p.error_here("a denominator");
            return Err(());
        };
        p.bump();
        let text = format!("{}/{}", num, den);
        let parsed = numerator.ok().zip(den.parse::<i64>().ok()).and_then(|(n, d)| Degree::new(n, d));
        return parsed.ok_or_else(|| bad(p, &text));
    }
    numerator.ok().and_then(|n| Degree::new(n, 1)).ok_or_else(|| bad(p, &num))
}

fn parse_scale(p: &mut Parser, raw: &mut RawModel) -> PResult<()> {
    let kw_span = p.span();
    p.bump();
    p.expect(Tok::LBrace, "`{` after `scale`")?;
    let mut levels = Vec::new();
    while !matches!(p.peek(), Tok::RBrace | Tok::Eof) {
        let (name, span) = p.name("a level name")?;
        p.expect(Tok::Eq, "`=`")?;
        let value = parse_value(p)?;
        levels.push((name, value, span));
    }
    p.expect(Tok::RBrace, "`}`")?;
    if raw.scale.is_some() {
        p.errors.push(Diagnostic { kind: DiagnosticKind::Scale, span: kw_span, message: "duplicate scale declaration".into() });
        return Ok(());
    }
    raw.scale = Some((levels, kw_span));
    Ok(())
}

fn parse_absence(p: &mut Parser, raw: &mut RawModel) -> PResult<()> {
    p.bump();
    p.expect(Tok::LBrace, "`{` after `absence`")?;
    while !matches!(p.peek(), Tok::RBrace | Tok::Eof) {
        let (alias, _) = p.name("an absence alias")?;
        p.expect(Tok::Eq, "`=`")?;
        let (target, _) = p.name("a level name")?;
        raw.absence.push((alias, target));
    }
    p.expect(Tok::RBrace, "`}`")
}

fn parse_kind(p: &mut Parser) -> PResult<ParamKind> {
    let (kw, _) = p.ident("a parameter kind (analog, digital or custom)")?;
    match kw.as_str() {
        "analog" => Ok(ParamKind::Analog),
        "digital" => Ok(ParamKind::Digital),
        "custom" => Ok(ParamKind::Custom),
        _ => {
            p.pos -= 1;
            p.error_here("a parameter kind (analog, digital or custom)");
            p.bump();
            Err(())
        }
    }
}

fn parse_param(p: &mut Parser, output: bool) -> PResult<ParamDecl> {
    p.bump();
    let (id, span) = p.ident("a parameter name")?;
    p.expect(Tok::Colon, "`:`")?;
    let kind = parse_kind(p)?;
    let states = if *p.peek() == Tok::LBrace {
        p.bump();
        let mut states = Vec::new();
        while let Tok::Ident(s) = p.peek().clone() {
            p.bump();
            states.push(s);
        }
        p.expect(Tok::RBrace, "a state name or `}`")?;
        states
    } else {
        match kind.default_states() {
            Some(d) => d.iter().map(|s| s.to_string()).collect(),
            None => {
                p.error_here("`{` with the states of a custom parameter");
                return Err(());
            }
        }
    };
    let mut observable = false;
    if output && p.is_keyword("observable") {
        p.bump();
        observable = true;
    }
    p.expect(Tok::Semi, "`;`")?;
    Ok(ParamDecl { id, kind, states, observable, span: Some(span) })
}

fn parse_literal(p: &mut Parser) -> PResult<Literal> {
    let (param, _) = p.ident("a literal `param=STATE`")?;
    p.expect(Tok::Eq, "`=`")?;
    let (state, _) = p.ident("a state")?;
    Ok(if param == FAULT_PARAM { Literal::Fault(state) } else { Literal::Input { param, state } })
}

fn parse_rule(p: &mut Parser) -> PResult<RawRule> {
    let span = p.span();
    p.bump();
    let mut config = None;
    if *p.peek() == Tok::LBracket {
        p.bump();
        config = Some(p.ident("a config mode")?.0);
        p.expect(Tok::RBracket, "`]`")?;
    }
    let mut antecedent = vec![parse_literal(p)?];
    while *p.peek() == Tok::Amp {
        p.bump();
        antecedent.push(parse_literal(p)?);
    }
    let polarity = match p.peek() {
        Tok::Entails => Polarity::Entails,
        Tok::Excludes => Polarity::Excludes,
        _ => {
            p.error_here("`&`, `=>` or `=/>`");
            return Err(());
        }
    };
    p.bump();
    let (output, _) = p.ident("an output name")?;
    p.expect(Tok::Eq, "`=`")?;
    let (state, _) = p.ident("an output state")?;
    let level = p.name("a certainty level")?;
    p.expect(Tok::Semi, "`;`")?;
    Ok(RawRule {
        rule: BehaviorRule { config, antecedent, output, state, polarity, certainty: Degree::ZERO, span: Some(span) },
        level,
    })
}

fn parse_component(p: &mut Parser, raw: &mut RawModel) -> PResult<()> {
    let junction = p.is_keyword("junction");
    p.bump();
    let (id, span) = p.ident("a component name")?;
    p.expect(Tok::LBrace, "`{`")?;
    let mut comp = Component::new(id);
    comp.junction = junction;
    comp.span = Some(span);
    let mut rules = Vec::new();
    loop {
        let member: PResult<()> = match p.peek().clone() {
            Tok::RBrace => {
                p.bump();
                break;
            }
            Tok::Eof => {
                p.error_here("`}` closing the component");
                break;
            }
            Tok::Ident(kw) => match kw.as_str() {
                "config" => (|| {
                    p.bump();
                    p.expect(Tok::LBrace, "`{`")?;
                    while let Tok::Ident(m) = p.peek().clone() {
                        p.bump();
                        comp.config_modes.push(m);
                    }
                    p.expect(Tok::RBrace, "a config mode or `}`")?;
                    if *p.peek() == Tok::Semi {
                        p.bump();
                    }
                    Ok(())
                })(),
                "input" => parse_param(p, false).map(|d| comp.inputs.push(d)),
                "output" => parse_param(p, true).map(|d| comp.outputs.push(d)),
                "fault" => (|| {
                    p.bump();
                    comp.fault_modes.push(p.ident("a fault mode")?.0);
                    while *p.peek() == Tok::Comma {
                        p.bump();
                        comp.fault_modes.push(p.ident("a fault mode")?.0);
                    }
                    p.expect(Tok::Semi, "`,` or `;`")
                })(),
                "rule" => parse_rule(p).map(|r| rules.push(r)),
                _ => {
                    p.error_here("`config`, `input`, `output`, `fault`, `rule` or `}`");
                    Err(())
                }
            },
            _ => {
                p.error_here("`config`, `input`, `output`, `fault`, `rule` or `}`");
                Err(())
            }
        };
        if member.is_err() {
            p.recover_statement();
        }
    }
    raw.components.push(RawComponent { component: comp, rules });
    Ok(())
}

fn parse_port(p: &mut Parser) -> PResult<PortRef> {
    let (c, _) = p.ident("a component name")?;
    p.expect(Tok::Dot, "`.`")?;
    let (param, _) = p.ident("a parameter name")?;
    Ok(PortRef::new(c, param))
}

fn parse_link(p: &mut Parser, raw: &mut RawModel) -> PResult<()> {
    let span = p.span();
    p.bump();
    let source = parse_port(p)?;
    p.expect(Tok::Arrow, "`->`")?;
    let mut targets = vec![parse_port(p)?];
    while *p.peek() == Tok::Comma {
        p.bump();
        targets.push(parse_port(p)?);
    }
    p.expect(Tok::Semi, "`,` or `;`")?;
    raw.links.push(Link { source, targets, span: Some(span) });
    Ok(())
}

/// Parses a model. Lexical, syntax, scale and reference problems are errors;
/// every other validation finding is returned in the report.
pub fn parse_model(text: &str, file: &str) -> Result<ParsedModel, Vec<Diagnostic>> {
    let mut p = Parser::new(text, file);
    let mut raw = RawModel::default();
    while *p.peek() != Tok::Eof {
        let res = match p.peek().clone() {
            Tok::Ident(kw) if kw == "scale" => parse_scale(&mut p, &mut raw),
            Tok::Ident(kw) if kw == "absence" => parse_absence(&mut p, &mut raw),
            Tok::Ident(kw) if kw == "component" || kw == "junction" => parse_component(&mut p, &mut raw),
            Tok::Ident(kw) if kw == "link" => parse_link(&mut p, &mut raw),
            _ => {
                p.error_here("`scale`, `absence`, `component`, `junction` or `link`");
                p.bump();
                Err(())
            }
        };
        if res.is_err() {
            p.recover_item(MODEL_ITEMS);
        }
    }
    let mut errors = std::mem::take(&mut p.errors);

    let Some((levels, scale_span)) = raw.scale else {
        if errors.is_empty() {
            errors.push(Diagnostic {
                kind: DiagnosticKind::Scale,
                span: SourceSpan { file: file.to_string(), line: 1, column: 1, length: 0 },
                message: "no scale declaration".into(),
            });
        }
        return Err(errors);
    };
    let scale = match Scale::with_absence(
        levels.into_iter().map(|(name, value, _)| Level { name, value }).collect(),
        raw.absence,
    ) {
        Ok(s) => s,
        Err(e) => {
            errors.push(Diagnostic { kind: DiagnosticKind::Scale, span: scale_span, message: e.to_string() });
            return Err(errors);
        }
    };

    let mut components = Vec::new();
    for rc in raw.components {
        let mut comp = rc.component;
        for rr in rc.rules {
            let mut rule = rr.rule;
            let (level, span) = rr.level;
            let resolved = match rule.polarity {
                Polarity::Entails => scale.level_of(&level),
                Polarity::Excludes => scale.absence_level_of(&level),
            };
            match resolved {
                Ok(d) if !d.is_zero() => rule.certainty = d,
                Ok(_) => errors.push(Diagnostic {
                    kind: DiagnosticKind::Scale,
                    span,
                    message: format!("rule certainty `{}` is zero", level),
                }),
                Err(_) => errors.push(Diagnostic {
                    kind: DiagnosticKind::Reference,
                    span,
                    message: format!("unknown level `{}`", level),
                }),
            }
            comp.rules.push(rule);
        }
        components.push(comp);
    }
    let model = SystemModel { scale, components, links: raw.links };
    let report = validate_model(&model);
    for v in &report.violations {
        if v.kind == ViolationKind::Reference {
            errors.push(Diagnostic {
                kind: DiagnosticKind::Reference,
                span: v.span.clone().unwrap_or_else(|| SourceSpan { file: file.to_string(), line: 1, column: 1, length: 0 }),
                message: v.message.clone(),
            });
        }
    }
    if !errors.is_empty() {
        errors.sort_by_key(|d| (d.span.line, d.span.column));
        return Err(errors);
    }
    let report = ValidationReport {
        violations: report.violations.into_iter().filter(|v| v.kind != ViolationKind::Reference).collect(),
    };
    Ok(ParsedModel { model, report })
}

// ---------------------------------------------------------------------------
// Observations

/// Resolves `comp.out` or a bare output name that is unique in the model.
fn resolve_output(model: &SystemModel, component: Option<&str>, output: &str) -> Result<PortRef, String> {
    match component {
        Some(c) => {
            let comp = model.component(c).ok_or_else(|| format!("unknown component `{}`", c))?;
            comp.output(output).ok_or_else(|| format!("unknown output `{}.{}`", c, output))?;
            Ok(PortRef::new(c, output))
        }
        None => {
            let hits: Vec<_> = model
                .components
                .iter()
                .filter(|c| c.output(output).is_some())
                .map(|c| PortRef::new(c.id.clone(), output))
                .collect();
            match hits.len() {
                1 => Ok(hits.into_iter().next().unwrap()),
                0 => Err(format!("unknown output `{}`", output)),
                _ => Err(format!("output name `{}` is ambiguous; qualify it with a component", output)),
            }
        }
    }
}

/// Parses one observation clause `[comp.]out (=|!=) STATE level` without the
/// leading `obs` keyword, e.g. for interactive prompts.
pub fn parse_observation_clause(
    text: &str,
    model: &SystemModel,
) -> Result<(Manifestation, ObsPolarity, Degree), Vec<Diagnostic>> {
    let mut p = Parser::new(text, "<input>");
    let res = parse_obs_body(&mut p, model);
    if res.is_ok() && *p.peek() != Tok::Eof && *p.peek() != Tok::Semi {
        p.error_here("end of observation");
    }
    match res {
        Ok(Some(v)) if p.errors.is_empty() => Ok(v),
        _ => {
            if p.errors.is_empty() {
                p.error_here("an observation");
            }
            Err(p.errors)
        }
    }
}

/// Parses the part of an `obs` statement after the keyword. `Ok(None)` means
/// a diagnostic was recorded but the statement itself was well formed.
fn parse_obs_body(p: &mut Parser, model: &SystemModel) -> PResult<Option<(Manifestation, ObsPolarity, Degree)>> {
    let target_span = p.span();
    let (first, _) = p.ident("an output")?;
    let (component, output) = if *p.peek() == Tok::Dot {
        p.bump();
        (Some(first), p.ident("an output name")?.0)
    } else {
        (None, first)
    };
    let polarity = match p.peek() {
        Tok::Eq => ObsPolarity::Present,
        Tok::NotEq => ObsPolarity::Absent,
        _ => {
            p.error_here("`=` or `!=`");
            return Err(());
        }
    };
    p.bump();
    let (state, state_span) = p.ident("a state")?;
    let (level, level_span) = p.name("a certainty level")?;
    let port = match resolve_output(model, component.as_deref(), &output) {
        Ok(port) => port,
        Err(message) => {
            p.errors.push(Diagnostic { kind: DiagnosticKind::Reference, span: target_span, message });
            return Ok(None);
        }
    };
    let m = Manifestation::new(port.component, port.param, state);
    if let Err(e) = check_manifestation(model, &m) {
        let span = if matches!(e, crate::model::ProblemError::UnknownState { .. }) { state_span } else { target_span };
        p.errors.push(Diagnostic { kind: DiagnosticKind::Reference, span, message: e.to_string() });
        return Ok(None);
    }
    let degree = match polarity {
        ObsPolarity::Present => model.scale.level_of(&level),
        ObsPolarity::Absent => model.scale.absence_level_of(&level),
    };
    match degree {
        Ok(d) if !d.is_zero() => Ok(Some((m, polarity, d))),
        Ok(_) => {
            p.errors.push(Diagnostic {
                kind: DiagnosticKind::Scale,
                span: level_span,
                message: format!("observation level `{}` is zero and carries no information", level),
            });
            Ok(None)
        }
        Err(_) => {
            p.errors.push(Diagnostic { kind: DiagnosticKind::Reference, span: level_span, message: format!("unknown level `{}`", level) });
            Ok(None)
        }
    }
}

/// Parses a context + observations file against a model.
pub fn parse_observations(text: &str, file: &str, model: &SystemModel) -> Result<(Context, Observations), Vec<Diagnostic>> {
    let mut p = Parser::new(text, file);
    let mut context = Context::new();
    let mut obs = Observations::default();
    while *p.peek() != Tok::Eof {
        let res: PResult<()> = match p.peek().clone() {
            Tok::Ident(kw) if kw == "context" => (|| {
                p.bump();
                while let Tok::Ident(_) = p.peek() {
                    let (comp, span) = p.ident("a component")?;
                    p.expect(Tok::Eq, "`=`")?;
                    let (mode, mode_span) = p.ident("a config mode")?;
                    match model.component(&comp) {
                        None => p.errors.push(Diagnostic {
                            kind: DiagnosticKind::Reference,
                            span,
                            message: format!("unknown component `{}`", comp),
                        }),
                        Some(c) if !c.config_modes.contains(&mode) => p.errors.push(Diagnostic {
                            kind: DiagnosticKind::Reference,
                            span: mode_span,
                            message: format!("unknown config mode `{}` for `{}`", mode, comp),
                        }),
                        Some(_) => {
                            if context.insert(comp.clone(), mode).is_some() {
                                p.errors.push(Diagnostic {
                                    kind: DiagnosticKind::Conflict,
                                    span,
                                    message: format!("`{}` is assigned twice", comp),
                                });
                            }
                        }
                    }
                }
                p.expect(Tok::Semi, "`;`")
            })(),
            Tok::Ident(kw) if kw == "obs" => {
                let span = p.span();
                p.bump();
                match parse_obs_body(&mut p, model) {
                    Ok(Some((m, pol, d))) => {
                        if let Err(e) = obs.insert(m, pol, d) {
                            p.errors.push(Diagnostic { kind: DiagnosticKind::Conflict, span, message: e.to_string() });
                        }
                        p.expect(Tok::Semi, "`;`")
                    }
                    Ok(None) => p.expect(Tok::Semi, "`;`"),
                    Err(()) => Err(()),
                }
            }
            _ => {
                p.error_here("`context` or `obs`");
                p.bump();
                Err(())
            }
        };
        if res.is_err() {
            p.recover_item(OBS_ITEMS);
        }
    }
    if p.errors.is_empty() {
        Ok((context, obs))
    } else {
        Err(p.errors)
    }
}

// ---------------------------------------------------------------------------
// Serialisation

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn level_token(name: &str) -> String {
    if is_ident(name) {
        name.to_string()
    } else {
        format!("\"{}\"", name)
    }
}

fn level_name(scale: &Scale, d: Degree) -> String {
    level_token(scale.name_of(d).expect("certainty is a scale level"))
}

fn write_param(out: &mut String, dir: &str, p: &ParamDecl) {
    out.push_str(&format!("  {} {}: {} {{ {} }}", dir, p.id, p.kind.keyword(), p.states.join(" ")));
    if p.observable {
        out.push_str(" observable");
    }
    out.push_str(";\n");
}

/// Canonical text of a model. Parsing the result gives back a structurally
/// equal model.
pub fn serialize_model(model: &SystemModel) -> String {
    let mut out = String::new();
    out.push_str("scale {");
    for l in model.scale.levels() {
        out.push_str(&format!(" {}={}", level_token(&l.name), l.value));
    }
    out.push_str(" }\n");
    if !model.scale.absence_aliases().is_empty() {
        out.push_str("absence {");
        for (alias, target) in model.scale.absence_aliases() {
            out.push_str(&format!(" {}={}", level_token(alias), level_token(target)));
        }
        out.push_str(" }\n");
    }
    for c in &model.components {
        out.push_str(&format!("\n{} {} {{\n", if c.junction { "junction" } else { "component" }, c.id));
        if !c.config_modes.is_empty() {
            out.push_str(&format!("  config {{ {} }}\n", c.config_modes.join(" ")));
        }
        for p in &c.inputs {
            write_param(&mut out, "input", p);
        }
        for p in &c.outputs {
            write_param(&mut out, "output", p);
        }
        if !c.fault_modes.is_empty() {
            out.push_str(&format!("  fault {};\n", c.fault_modes.join(", ")));
        }
        for r in &c.rules {
            out.push_str("  rule ");
            if let Some(mode) = &r.config {
                out.push_str(&format!("[{}] ", mode));
            }
            let lits: Vec<String> = r.antecedent.iter().map(|l| l.to_string()).collect();
            out.push_str(&lits.join(" & "));
            let arrow = match r.polarity {
                Polarity::Entails => "=>",
                Polarity::Excludes => "=/>",
            };
            out.push_str(&format!(" {} {}={} {};\n", arrow, r.output, r.state, level_name(&model.scale, r.certainty)));
        }
        out.push_str("}\n");
    }
    if !model.links.is_empty() {
        out.push('\n');
    }
    for l in &model.links {
        out.push_str(&format!("link {};\n", l));
    }
    out
}

/// Canonical text of a context and observation set.
pub fn serialize_observations(context: &Context, obs: &Observations, scale: &Scale) -> String {
    let mut out = String::new();
    if !context.is_empty() {
        out.push_str("context");
        for (c, m) in context {
            out.push_str(&format!(" {}={}", c, m));
        }
        out.push_str(";\n");
    }
    for (m, d) in &obs.present {
        out.push_str(&format!("obs {}.{} = {} {};\n", m.component, m.output, m.state, level_name(scale, *d)));
    }
    for (m, d) in &obs.absent {
        out.push_str(&format!("obs {}.{} != {} {};\n", m.component, m.output, m.state, level_name(scale, *d)));
    }
    out
}

/// Collects the level names used by a model keyed by normalised name, for
/// diagnostics that list alternatives.
pub fn level_vocabulary(scale: &Scale) -> BTreeMap<String, Degree> {
    scale
        .levels()
        .iter()
        .map(|l| (normalize_level_name(&l.name), l.value))
        .chain(
            scale
                .absence_aliases()
                .iter()
                .filter_map(|(a, _)| scale.absence_level_of(a).ok().map(|d| (normalize_level_name(a), d))),
        )
        .collect()
}
