//! Score documents and their validation.
//!
//! Every group `G` is driven through two signals visible in every module of
//! the orchestration: input `GIn`, present whenever one of its patterns is
//! selected (its value is the pattern id), and output `GOut`, whose boolean
//! value activates or deactivates the group. A tank is an array of
//! single-pattern groups, so each tank pattern `p` additionally gets `pIn`
//! and `pOut`.

mod document;
mod tank;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::dsl::{parse_orchestration, ParseError};
use crate::kernel::ast::{Binding, ModuleDef, RunBindings, SignalDecl, Span, Stmt, StmtKind};
use crate::kernel::{elaborate_with_globals, ElabError, Machine, Program};

pub use document::{GroupDef, GroupKind, NoteEvent, PatternDef, Quantize, ScoreDocument};
pub use tank::{expand_tank, TankError, TANK_MODULE};

pub fn in_signal(name: &str) -> String {
    format!("{name}In")
}

pub fn out_signal(name: &str) -> String {
    format!("{name}Out")
}

/// One problem found while loading a score.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Finding {
    #[error("tempoBpm must be a positive number")]
    BadTempo,
    #[error("beatsPerMeasure must be positive")]
    BadBeatsPerMeasure,
    #[error("instrument `{0}` declared twice")]
    DuplicateInstrument(String),
    #[error("pattern `{0}` declared twice")]
    DuplicatePattern(String),
    #[error("group `{0}` declared twice")]
    DuplicateGroup(String),
    #[error("pattern `{pattern}` uses undeclared instrument `{instrument}`")]
    UnknownInstrument { pattern: String, instrument: String },
    #[error("pattern `{0}` must have a positive duration")]
    BadDuration(String),
    #[error("pattern `{0}` has a note outside its duration or outside the MIDI range")]
    BadNote(String),
    #[error("group `{0}` has no patterns")]
    EmptyGroup(String),
    #[error("group `{group}` lists undeclared pattern `{pattern}`")]
    UnknownPatternInGroup { group: String, pattern: String },
    #[error("pattern `{pattern}` belongs to both `{first}` and `{second}`")]
    PatternInTwoGroups {
        pattern: String,
        first: String,
        second: String,
    },
    #[error("group `{0}` mixes several instruments")]
    MixedInstruments(String),
    #[error("`{0}` cannot name a signal; use letters, digits and `_`")]
    BadIdentifier(String),
    #[error("signal `{0}` would be generated twice")]
    SignalClash(String),
    #[error("entry module `{0}` is not defined")]
    UnknownEntry(String),
    #[error("orchestration: {0}")]
    Syntax(ParseError),
    #[error("orchestration: {0}")]
    Elaboration(ElabError),
    #[error("signal `{signal}` at {span} matches no group")]
    OrphanSignal { signal: String, span: Span },
    #[error("signal `{signal}` at {span} is not declared")]
    UnknownSignal { signal: String, span: Span },
    #[error("`run Tank` at {span} needs `sigarray = <tank group>`, got `{arg}`")]
    TankArgument { arg: String, span: Span },
    #[error("group `{0}` is never activated by the orchestration")]
    OrphanGroup(String),
    #[error("pattern `{0}` belongs to no group and can never be selected")]
    UngroupedPattern(String),
}

impl Finding {
    pub fn is_warning(&self) -> bool {
        matches!(self, Finding::OrphanGroup(_) | Finding::UngroupedPattern(_))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("score document is not valid JSON: {0}")]
    Json(String),
    #[error("{}", FindingList(.0))]
    Validation(Vec<Finding>),
}

struct FindingList<'a>(&'a [Finding]);

impl fmt::Display for FindingList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let errors = self.0.iter().filter(|x| !x.is_warning()).count();
        write!(f, "score has {errors} error(s)")?;
        for x in self.0 {
            let tag = if x.is_warning() { "warning" } else { "error" };
            write!(f, "\n  {tag}: {x}")?;
        }
        Ok(())
    }
}

/// Pattern, group and instrument totals, with patterns per instrument in
/// declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreCounts {
    pub patterns: usize,
    pub groups: usize,
    pub instruments: usize,
    pub per_instrument: Vec<(String, usize)>,
}

impl fmt::Display for ScoreCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} patterns, {} groups, {} instruments",
            self.patterns, self.groups, self.instruments
        )
    }
}

/// A validated score with its elaborated orchestration.
#[derive(Debug, Clone)]
pub struct Score {
    pub doc: ScoreDocument,
    pub program: Program,
    pub warnings: Vec<Finding>,
    pattern_index: BTreeMap<String, usize>,
    group_index: BTreeMap<String, usize>,
    group_of: Vec<usize>,
}

impl Score {
    pub fn from_json(text: &str) -> Result<Score, ScoreError> {
        let doc = ScoreDocument::from_json(text).map_err(|e| ScoreError::Json(e.to_string()))?;
        load_score(doc)
    }

    pub fn title(&self) -> &str {
        &self.doc.title
    }

    pub fn patterns(&self) -> &[PatternDef] {
        &self.doc.patterns
    }

    pub fn groups(&self) -> &[GroupDef] {
        &self.doc.groups
    }

    pub fn instruments(&self) -> &[String] {
        &self.doc.instruments
    }

    pub fn pattern(&self, id: &str) -> Option<&PatternDef> {
        self.pattern_index.get(id).map(|&i| &self.doc.patterns[i])
    }

    pub fn group(&self, name: &str) -> Option<&GroupDef> {
        self.group_index.get(name).map(|&i| &self.doc.groups[i])
    }

    pub fn group_position(&self, name: &str) -> Option<usize> {
        self.group_index.get(name).copied()
    }

    /// Group of a grouped pattern.
    pub fn group_of(&self, pattern_id: &str) -> Option<&GroupDef> {
        let i = *self.pattern_index.get(pattern_id)?;
        self.doc.groups.get(self.group_of[i])
    }

    pub fn instrument_position(&self, name: &str) -> Option<usize> {
        self.doc.instruments.iter().position(|i| i == name)
    }

    pub fn beat_seconds(&self) -> f64 {
        60.0 / self.doc.tempo_bpm
    }

    /// Spacing of the start grid in seconds.
    pub fn grid_seconds(&self) -> f64 {
        match self.doc.quantize {
            Quantize::Beat => self.beat_seconds(),
            Quantize::Measure => self.beat_seconds() * self.doc.beats_per_measure as f64,
        }
    }

    pub fn pattern_seconds(&self, p: &PatternDef) -> f64 {
        p.duration_beats * self.beat_seconds()
    }

    pub fn counts(&self) -> ScoreCounts {
        ScoreCounts {
            patterns: self.doc.patterns.len(),
            groups: self.doc.groups.len(),
            instruments: self.doc.instruments.len(),
            per_instrument: self
                .doc
                .instruments
                .iter()
                .map(|i| {
                    let n = self.doc.patterns.iter().filter(|p| &p.instrument == i).count();
                    (i.clone(), n)
                })
                .collect(),
        }
    }

    pub fn machine(&self) -> Machine {
        Machine::new(self.program.clone())
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '$')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
}

/// Boundary signals generated from the groups: `GIn`/`GOut` per group and
/// `pIn`/`pOut` per tank pattern.
pub fn group_signals(doc: &ScoreDocument) -> Vec<SignalDecl> {
    let mut out = Vec::new();
    for g in &doc.groups {
        out.push(SignalDecl::input(in_signal(&g.name)));
        out.push(SignalDecl::output(out_signal(&g.name)));
        if g.kind == GroupKind::Tank {
            for p in &g.patterns {
                out.push(SignalDecl::input(in_signal(p)));
                out.push(SignalDecl::output(out_signal(p)));
            }
        }
    }
    out
}

/// Validates a document and elaborates its orchestration.
pub fn load_score(doc: ScoreDocument) -> Result<Score, ScoreError> {
    let mut findings = Vec::new();
    let (pattern_index, group_index, group_of) = check_structure(&doc, &mut findings);

    let program = match parse_orchestration(&doc.orchestration) {
        Err(e) => {
            findings.push(Finding::Syntax(e));
            None
        }
        Ok(mut modules) => check_orchestration(&doc, &mut modules, &mut findings),
    };

    if findings.iter().any(|f| !f.is_warning()) {
        return Err(ScoreError::Validation(findings));
    }
    let program = program.expect("no errors implies an elaborated program");
    Ok(Score {
        doc,
        program,
        warnings: findings,
        pattern_index,
        group_index,
        group_of,
    })
}

type Indexes = (BTreeMap<String, usize>, BTreeMap<String, usize>, Vec<usize>);

fn check_structure(doc: &ScoreDocument, findings: &mut Vec<Finding>) -> Indexes {
    if !(doc.tempo_bpm.is_finite() && doc.tempo_bpm > 0.0) {
        findings.push(Finding::BadTempo);
    }
    if doc.beats_per_measure == 0 {
        findings.push(Finding::BadBeatsPerMeasure);
    }
    let mut instruments = BTreeSet::new();
    for i in &doc.instruments {
        if !instruments.insert(i.as_str()) {
            findings.push(Finding::DuplicateInstrument(i.clone()));
        }
    }

    let mut pattern_index = BTreeMap::new();
    for (i, p) in doc.patterns.iter().enumerate() {
        if pattern_index.insert(p.id.clone(), i).is_some() {
            findings.push(Finding::DuplicatePattern(p.id.clone()));
        }
        if !instruments.contains(p.instrument.as_str()) {
            findings.push(Finding::UnknownInstrument {
                pattern: p.id.clone(),
                instrument: p.instrument.clone(),
            });
        }
        if !(p.duration_beats.is_finite() && p.duration_beats > 0.0) {
            findings.push(Finding::BadDuration(p.id.clone()));
        }
        let bad_note = p.notes.iter().any(|n| {
            !(n.onset_beats >= 0.0 && n.length_beats > 0.0)
                || n.onset_beats + n.length_beats > p.duration_beats + 1e-9
                || n.pitch > 127
                || n.velocity > 127
        });
        if bad_note {
            findings.push(Finding::BadNote(p.id.clone()));
        }
    }

    let mut group_index = BTreeMap::new();
    let mut group_of = vec![usize::MAX; doc.patterns.len()];
    for (gi, g) in doc.groups.iter().enumerate() {
        if group_index.insert(g.name.clone(), gi).is_some() {
            findings.push(Finding::DuplicateGroup(g.name.clone()));
        }
        if !is_identifier(&g.name) {
            findings.push(Finding::BadIdentifier(g.name.clone()));
        }
        if g.patterns.is_empty() {
            findings.push(Finding::EmptyGroup(g.name.clone()));
        }
        let mut inst = BTreeSet::new();
        for pid in &g.patterns {
            let Some(&pi) = pattern_index.get(pid) else {
                findings.push(Finding::UnknownPatternInGroup {
                    group: g.name.clone(),
                    pattern: pid.clone(),
                });
                continue;
            };
            if group_of[pi] != usize::MAX {
                findings.push(Finding::PatternInTwoGroups {
                    pattern: pid.clone(),
                    first: doc.groups[group_of[pi]].name.clone(),
                    second: g.name.clone(),
                });
            } else {
                group_of[pi] = gi;
            }
            inst.insert(doc.patterns[pi].instrument.as_str());
            if g.kind == GroupKind::Tank && !is_identifier(pid) {
                findings.push(Finding::BadIdentifier(pid.clone()));
            }
        }
        if inst.len() > 1 {
            findings.push(Finding::MixedInstruments(g.name.clone()));
        }
    }
    for (i, p) in doc.patterns.iter().enumerate() {
        if group_of[i] == usize::MAX {
            findings.push(Finding::UngroupedPattern(p.id.clone()));
        }
    }
    (pattern_index, group_index, group_of)
}

fn check_orchestration(
    doc: &ScoreDocument,
    modules: &mut BTreeMap<String, ModuleDef>,
    findings: &mut Vec<Finding>,
) -> Option<Program> {
    let tanks: BTreeMap<String, Vec<String>> = doc
        .groups
        .iter()
        .filter(|g| g.kind == GroupKind::Tank)
        .map(|g| (g.name.clone(), g.patterns.clone()))
        .collect();
    for bad in tank::rewrite_tank_calls(modules, &tanks) {
        findings.push(Finding::TankArgument {
            arg: bad.arg,
            span: bad.span,
        });
    }

    let globals = group_signals(doc);
    let mut seen = BTreeSet::new();
    for g in &globals {
        if !seen.insert(g.name.as_str()) {
            findings.push(Finding::SignalClash(g.name.clone()));
        }
    }

    let global_names: BTreeSet<&str> = globals.iter().map(|g| g.name.as_str()).collect();
    let mut undeclared = BTreeMap::new();
    for m in modules.values() {
        let mut scope: Vec<&str> = m.interface.iter().map(|d| d.name.as_str()).collect();
        undeclared_signals(&m.body, &global_names, &mut scope, &mut undeclared);
    }
    for (signal, span) in undeclared {
        findings.push(if signal.ends_with("In") || signal.ends_with("Out") {
            Finding::OrphanSignal { signal, span }
        } else {
            Finding::UnknownSignal { signal, span }
        });
    }

    if !modules.contains_key(&doc.entry_module) {
        findings.push(Finding::UnknownEntry(doc.entry_module.clone()));
    }
    if findings.iter().any(|f| !f.is_warning()) {
        return None;
    }
    let program = match elaborate_with_globals(modules, &doc.entry_module, &globals) {
        Ok(p) => p,
        Err(e) => {
            findings.push(Finding::Elaboration(e));
            return None;
        }
    };

    let emitted: BTreeSet<&str> = program
        .emitted_signals()
        .into_iter()
        .map(|id| program.name(id))
        .collect();
    for g in &doc.groups {
        if !emitted.contains(out_signal(&g.name).as_str()) {
            findings.push(Finding::OrphanGroup(g.name.clone()));
        }
    }
    Some(program)
}

/// Collects signal references that resolve neither to an enclosing
/// declaration nor to a group signal, keeping the first position of each.
fn undeclared_signals<'a>(
    s: &'a Stmt,
    globals: &BTreeSet<&str>,
    scope: &mut Vec<&'a str>,
    out: &mut BTreeMap<String, Span>,
) {
    let check = |name: &str, scope: &Vec<&'a str>, out: &mut BTreeMap<String, Span>| {
        if !scope.contains(&name) && !globals.contains(name) {
            out.entry(name.to_owned()).or_insert(s.span);
        }
    };
    let exprs = |e: &crate::kernel::ast::SigExpr| -> Vec<String> {
        e.signals().into_iter().cloned().collect()
    };
    match &s.kind {
        StmtKind::Nothing => {}
        StmtKind::Emit { signal, value } => {
            check(signal, scope, out);
            if let Some(v) = value {
                exprs(v).iter().for_each(|n| check(n, scope, out));
            }
        }
        StmtKind::Await { expr, .. } | StmtKind::AwaitCount { expr, .. } => {
            exprs(expr).iter().for_each(|n| check(n, scope, out));
        }
        StmtKind::Seq(v) | StmtKind::Fork(v) => {
            for c in v {
                undeclared_signals(c, globals, scope, out);
            }
        }
        StmtKind::Every { expr, body, .. }
        | StmtKind::Abort { expr, body }
        | StmtKind::Suspend { expr, body } => {
            exprs(expr).iter().for_each(|n| check(n, scope, out));
            undeclared_signals(body, globals, scope, out);
        }
        StmtKind::If {
            expr,
            then,
            otherwise,
        } => {
            exprs(expr).iter().for_each(|n| check(n, scope, out));
            undeclared_signals(then, globals, scope, out);
            if let Some(o) = otherwise {
                undeclared_signals(o, globals, scope, out);
            }
        }
        StmtKind::Loop(body) => undeclared_signals(body, globals, scope, out),
        StmtKind::Run { bindings, .. } => {
            if let RunBindings::Explicit(v) = bindings {
                for b in v {
                    let caller = match b {
                        Binding::As { caller, .. } => caller,
                        Binding::Assign { arg, .. } => arg,
                    };
                    check(caller, scope, out);
                }
            }
        }
        StmtKind::Local { decl, body } => {
            scope.push(&decl.name);
            undeclared_signals(body, globals, scope, out);
            scope.pop();
        }
        StmtKind::Async { signals, done, .. } => {
            for n in signals.iter().chain(done) {
                check(n, scope, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(orchestration: &str) -> ScoreDocument {
        let pat = |id: &str, inst: &str| PatternDef {
            id: id.into(),
            instrument: inst.into(),
            duration_beats: 2.0,
            notes: vec![NoteEvent {
                pitch: 60,
                onset_beats: 0.0,
                length_beats: 1.0,
                velocity: 90,
            }],
            media: None,
        };
        ScoreDocument {
            title: "t".into(),
            tempo_bpm: 120.0,
            quantize: Quantize::Beat,
            beats_per_measure: 4,
            instruments: vec!["bass".into(), "perc".into()],
            patterns: vec![pat("B1", "bass"), pat("P1", "perc"), pat("P2", "perc")],
            groups: vec![
                GroupDef {
                    name: "Bass".into(),
                    kind: GroupKind::Repeat,
                    patterns: vec!["B1".into()],
                },
                GroupDef {
                    name: "Percu".into(),
                    kind: GroupKind::Tank,
                    patterns: vec!["P1".into(), "P2".into()],
                },
            ],
            orchestration: orchestration.into(),
            entry_module: "Main".into(),
        }
    }

    #[test]
    fn loads_and_counts() {
        let s = load_score(doc(
            "module Main() { fork { emit BassOut(true); } par { run Tank(sigarray = Percu); } await count(2, BassIn.now); }",
        ))
        .unwrap();
        assert!(s.warnings.is_empty(), "{:?}", s.warnings);
        let c = s.counts();
        assert_eq!((c.patterns, c.groups, c.instruments), (3, 2, 2));
        assert_eq!(c.per_instrument, [("bass".to_string(), 1), ("perc".to_string(), 2)]);
        assert_eq!(s.group_of("P2").unwrap().name, "Percu");
        assert_eq!(s.grid_seconds(), 0.5);
    }

    #[test]
    fn orphan_signal_is_an_error() {
        let err = load_score(doc(
            "module Main() { emit BassOut(true); emit GhostOut(true); run Tank(sigarray = Percu); }",
        ))
        .unwrap_err();
        let ScoreError::Validation(f) = err else { panic!() };
        assert!(f.iter().any(|x| matches!(x, Finding::OrphanSignal { signal, .. } if signal == "GhostOut")));
    }

    #[test]
    fn orphan_group_is_only_a_warning() {
        let s = load_score(doc("module Main() { emit BassOut(true); }")).unwrap();
        assert_eq!(s.warnings, [Finding::OrphanGroup("Percu".into())]);
    }

    #[test]
    fn tank_argument_must_be_a_tank() {
        let err = load_score(doc("module Main() { run Tank(sigarray = Bass); }")).unwrap_err();
        let ScoreError::Validation(f) = err else { panic!() };
        assert!(matches!(&f[0], Finding::TankArgument { arg, .. } if arg == "Bass"));
    }

    #[test]
    fn structural_findings_are_aggregated() {
        let mut d = doc("module Main() { emit BassOut(true); run Tank(sigarray = Percu); }");
        d.patterns[0].instrument = "tuba".into();
        d.groups[1].patterns.push("B1".into());
        d.groups.push(GroupDef {
            name: "Bass".into(),
            kind: GroupKind::Repeat,
            patterns: vec![],
        });
        let ScoreError::Validation(f) = load_score(d).unwrap_err() else { panic!() };
        assert!(f.contains(&Finding::UnknownInstrument {
            pattern: "B1".into(),
            instrument: "tuba".into()
        }));
        assert!(f.contains(&Finding::DuplicateGroup("Bass".into())));
        assert!(f.contains(&Finding::EmptyGroup("Bass".into())));
        assert!(f.iter().any(|x| matches!(x, Finding::PatternInTwoGroups { .. })));
        assert!(f.contains(&Finding::MixedInstruments("Percu".into())));
    }

    #[test]
    fn syntax_errors_surface_with_position() {
        let ScoreError::Validation(f) = load_score(doc("module Main() {\n emit ;\n}")).unwrap_err() else {
            panic!()
        };
        assert!(matches!(&f[0], Finding::Syntax(ParseError::SyntaxError { line: 2, .. })));
    }

    #[test]
    fn listing_fork_with_tank_expansion() {
        let mut modules = parse_orchestration(
            "module Main() { fork { emit BassOut(true); } par { run Tank(sigarray = Percu); } }",
        )
        .unwrap();
        let tanks = BTreeMap::from([("Percu".to_string(), vec!["P1".to_string(), "P2".to_string()])]);
        assert!(tank::rewrite_tank_calls(&mut modules, &tanks).is_empty());
        let expected = parse_orchestration(
            r#"module Main() {
                fork { emit BassOut(true); }
                par {
                    emit PercuOut(true);
                    fork { await (P1In.now); emit P1Out(false); }
                    par { await (P2In.now); emit P2Out(false); }
                    emit PercuOut(false);
                }
            }"#,
        )
        .unwrap();
        assert_eq!(modules, expected);
    }
}
