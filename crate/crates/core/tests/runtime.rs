use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;
use skini::kernel::Value;
use skini::runtime::{
    AvailabilityMatrix, Performance, RejectReason, RuntimeError, Selection, PENDING_CAP,
};
use skini::scheduler::EventKind;
use skini::score::{
    load_score, GroupDef, GroupKind, NoteEvent, PatternDef, Quantize, Score, ScoreDocument,
};

const EPS: f64 = 1e-9;

fn pat(id: &str, inst: &str, beats: f64) -> PatternDef {
    PatternDef {
        id: id.into(),
        instrument: inst.into(),
        duration_beats: beats,
        notes: vec![NoteEvent {
            pitch: 48,
            onset_beats: 0.0,
            length_beats: 1.0,
            velocity: 80,
        }],
        media: None,
    }
}

fn group(name: &str, kind: GroupKind, ids: &[&str]) -> GroupDef {
    GroupDef {
        name: name.into(),
        kind,
        patterns: ids.iter().map(|s| s.to_string()).collect(),
    }
}

/// bass: repeat group Bass {B1, B2}; perc: tank Percu {P1, P2};
/// flute: repeat group Flutes {F1}. 120 bpm, beat grid.
fn score(orchestration: &str) -> Arc<Score> {
    let doc = ScoreDocument {
        title: "runtime".into(),
        tempo_bpm: 120.0,
        quantize: Quantize::Beat,
        beats_per_measure: 4,
        instruments: vec!["bass".into(), "perc".into(), "flute".into()],
        patterns: vec![
            pat("B1", "bass", 2.0),
            pat("B2", "bass", 1.0),
            pat("P1", "perc", 1.0),
            pat("P2", "perc", 1.0),
            pat("F1", "flute", 4.0),
        ],
        groups: vec![
            group("Bass", GroupKind::Repeat, &["B1", "B2"]),
            group("Percu", GroupKind::Tank, &["P1", "P2"]),
            group("Flutes", GroupKind::Repeat, &["F1"]),
        ],
        orchestration: orchestration.into(),
        entry_module: "Main".into(),
    };
    Arc::new(load_score(doc).unwrap())
}

const FOREVER: &str = "module Main() {
    fork { emit BassOut(true); } par { run Tank(sigarray = Percu); }
    loop { await (BassIn.now); }
}";

fn admitted(s: &Selection) -> &skini::runtime::Admission {
    match s {
        Selection::Admitted(a) => a,
        other => panic!("expected an admission, got {other:?}"),
    }
}

fn rejected(s: &Selection) -> RejectReason {
    match s {
        Selection::Rejected { reason, .. } => *reason,
        other => panic!("expected a rejection, got {other:?}"),
    }
}

fn outputs(pairs: &[(&str, bool)]) -> BTreeMap<String, Option<Value>> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), Some(Value::Bool(*v))))
        .collect()
}

#[test]
fn boot_activates_groups_and_snapshot_follows_declaration_order() {
    let p = Performance::new(score(FOREVER)).unwrap();
    let snap = p.snapshot();
    let names: Vec<&str> = snap.groups.iter().map(|g| g.name.as_str()).collect();
    assert_eq!(names, ["Bass", "Percu"]);
    assert_eq!(snap.groups[0].patterns, ["B1", "B2"]);
    assert_eq!(snap.groups[1].patterns, ["P1", "P2"]);
    assert!(snap.revision > 0);
    assert_eq!(p.trace().len(), 1);
    assert_eq!(p.trace()[0].instant, 0);
}

#[test]
fn matrix_outputs() {
    let s = score(FOREVER);
    let mut m = AvailabilityMatrix::new(&s);
    assert!(m.snapshot().groups.is_empty());

    let d = m.apply_outputs(&outputs(&[("BassOut", true)])).unwrap();
    assert_eq!(d.activated, ["Bass"]);
    assert_eq!(m.revision(), 1);

    m.apply_outputs(&outputs(&[("FlutesOut", true)])).unwrap();
    let d = m
        .apply_outputs(&outputs(&[("FlutesOut", false), ("BassOut", false)]))
        .unwrap();
    let mut off = d.deactivated.clone();
    off.sort();
    assert_eq!(off, ["Bass", "Flutes"]);
    assert_eq!(m.revision(), 3);

    let d = m.apply_outputs(&BTreeMap::new()).unwrap();
    assert!(d.is_empty());
    assert_eq!(m.revision(), 3);

    // Re-emitting the current value changes nothing.
    let d = m.apply_outputs(&outputs(&[("BassOut", false)])).unwrap();
    assert!(d.is_empty());
    assert_eq!(m.revision(), 3);

    assert_eq!(
        m.apply_outputs(&outputs(&[("TubaOut", true)])),
        Err(RuntimeError::UnknownOutputSignal("TubaOut".into()))
    );
}

#[test]
fn tank_output_consumes_its_pattern() {
    let s = score(FOREVER);
    let mut m = AvailabilityMatrix::new(&s);
    m.apply_outputs(&outputs(&[("PercuOut", true)])).unwrap();
    let d = m.apply_outputs(&outputs(&[("P2Out", false)])).unwrap();
    assert_eq!(d.consumed, ["P2"]);
    let snap = m.snapshot();
    assert_eq!(snap.groups[0].patterns, ["P1"]);
}

#[test]
fn inactive_group_is_rejected() {
    let mut p = Performance::new(score(FOREVER)).unwrap();
    let s = p.select("a", "F1", 0.0).unwrap();
    assert_eq!(rejected(&s), RejectReason::GroupInactive);
    assert_eq!(p.pending("a"), 0);
}

#[test]
fn unknown_pattern_is_an_error() {
    let mut p = Performance::new(score(FOREVER)).unwrap();
    assert_eq!(
        p.select("a", "Z9", 0.0),
        Err(RuntimeError::UnknownPattern("Z9".into()))
    );
}

#[test]
fn tank_pattern_admitted_once() {
    let mut p = Performance::new(score(FOREVER)).unwrap();
    let first = p.select("a", "P1", 0.0).unwrap();
    assert_eq!(admitted(&first).input_signal, "PercuIn");
    assert_eq!(rejected(&p.select("b", "P1", 0.0).unwrap()), RejectReason::TankExhausted);
    assert_eq!(p.snapshot().groups[1].patterns, ["P2"]);

    let reactions = p.pump().unwrap();
    assert_eq!(reactions.len(), 1);
    let r = &reactions[0];
    assert_eq!(r.inputs.get("PercuIn"), Some(&Some("P1".to_string())));
    assert_eq!(r.inputs.get("P1In"), Some(&Some("P1".to_string())));
    assert_eq!(r.outputs.get("P1Out"), Some(&Some(Value::Bool(false))));
    assert_eq!(rejected(&p.select("c", "P1", 1.0).unwrap()), RejectReason::TankExhausted);
}

#[test]
fn exhausted_tank_deactivates() {
    let mut p = Performance::new(score(FOREVER)).unwrap();
    admitted(&p.select("a", "P1", 0.0).unwrap());
    admitted(&p.select("b", "P2", 0.0).unwrap());
    let r = p.pump().unwrap();
    assert_eq!(r.len(), 2, "one admission per instant");
    assert_eq!(r[1].delta.deactivated, ["Percu"]);
    let names: Vec<String> = p.snapshot().groups.into_iter().map(|g| g.name).collect();
    assert_eq!(names, ["Bass"]);
}

#[test]
fn tank_never_refills() {
    let orch = "module Main() {
        run Tank(sigarray = Percu);
        emit BassOut(true);
        await (BassIn.now);
        run Tank(sigarray = Percu);
    }";
    let mut p = Performance::new(score(orch)).unwrap();
    admitted(&p.select("a", "P1", 0.0).unwrap());
    admitted(&p.select("a", "P2", 0.0).unwrap());
    p.pump().unwrap();
    admitted(&p.select("a", "B1", 0.0).unwrap());
    p.pump().unwrap();
    let snap = p.snapshot();
    let percu = snap.groups.iter().find(|g| g.name == "Percu").unwrap();
    assert!(percu.patterns.is_empty());
    assert_eq!(rejected(&p.select("b", "P1", 0.0).unwrap()), RejectReason::TankExhausted);
}

/// Reference trace, computed by hand for B1 (2 beats = 1 s) on a 0.5 s
/// grid, one participant, all requests at t = 0.1.
///
/// | step            | result                  | pending |
/// |-----------------|-------------------------|---------|
/// | select #1       | admitted pos 0, +0.4 s  | 1       |
/// | select #2       | admitted pos 1, +1.4 s  | 2       |
/// | select #3       | admitted pos 2, +2.4 s  | 3       |
/// | select #4, #5   | PendingCapReached       | 3       |
/// | pump            | instants 1, 2, 3        | 3       |
/// | advance to 0.5  | #1 starts, played       | 2       |
/// | retry at 0.5    | admitted pos 3, +3.0 s  | 3       |
#[test]
fn five_selection_scenario_matches_hand_trace() {
    let mut p = Performance::new(score(FOREVER)).unwrap();
    p.advance(0.1);
    let mut got = Vec::new();
    for _ in 0..5 {
        got.push(p.select("p", "B1", 0.1).unwrap());
    }
    let expect = [(0, 0.4, 1), (1, 1.4, 2), (2, 2.4, 3)];
    for (s, (pos, delay, pending)) in got.iter().zip(expect) {
        let a = admitted(s);
        assert_eq!(a.position, pos);
        assert!((a.delay - delay).abs() < EPS, "{} vs {delay}", a.delay);
        assert_eq!(a.pending, pending);
    }
    for s in &got[3..] {
        assert_eq!(
            *s,
            Selection::Rejected {
                pattern_id: "B1".into(),
                reason: RejectReason::PendingCapReached,
                pending: PENDING_CAP
            }
        );
    }

    let r = p.pump().unwrap();
    let instants: Vec<u64> = r.iter().map(|r| r.instant).collect();
    assert_eq!(instants, [1, 2, 3]);
    assert!(p.take_played().is_empty());

    p.advance(0.5);
    let played = p.take_played();
    assert_eq!(played.len(), 1);
    assert_eq!((played[0].pattern_id.as_str(), played[0].participant_id.as_str()), ("B1", "p"));
    assert!((played[0].time - 0.5).abs() < EPS);
    assert_eq!(p.pending("p"), 2);

    let retry = p.select("p", "B1", 0.5).unwrap();
    let a = admitted(&retry);
    assert_eq!((a.position, a.pending), (3, 3));
    assert!((a.delay - 3.0).abs() < EPS);
}

#[test]
fn played_notifications_follow_queue_order() {
    let mut p = Performance::new(score(FOREVER)).unwrap();
    admitted(&p.select("a", "B2", 0.0).unwrap());
    admitted(&p.select("a", "B1", 0.0).unwrap());
    p.pump().unwrap();
    p.drain();
    let ids: Vec<String> = p.take_played().into_iter().map(|x| x.pattern_id).collect();
    assert_eq!(ids, ["B2", "B1"]);
    assert_eq!(p.pending("a"), 0);
}

#[test]
fn deactivation_keeps_admitted_entries() {
    let orch = "module Main() { emit BassOut(true); await (BassIn.now); emit BassOut(false); }";
    let mut p = Performance::new(score(orch)).unwrap();
    admitted(&p.select("a", "B1", 0.0).unwrap());
    admitted(&p.select("b", "B2", 0.0).unwrap());
    p.pump().unwrap();
    assert!(p.snapshot().groups.is_empty());
    assert_eq!(rejected(&p.select("c", "B1", 0.0).unwrap()), RejectReason::GroupInactive);
    p.drain();
    let starts = p.events().iter().filter(|e| e.kind == EventKind::Start).count();
    assert_eq!(starts, 2);
}

#[test]
fn causality_error_carries_the_instant() {
    let orch = "module Main() { signal A; emit BassOut(true); await (BassIn.now); if (A.now) { nothing; } else { emit A(); } }";
    let mut p = Performance::new(score(orch)).unwrap();
    admitted(&p.select("a", "B1", 2.0).unwrap());
    match p.pump() {
        Err(RuntimeError::Reaction { instant, time, error }) => {
            assert_eq!(instant, 1);
            assert_eq!(time, 2.0);
            assert!(error.to_string().contains('A'));
        }
        other => panic!("{other:?}"),
    }
}

#[derive(Debug, Clone)]
enum Cmd {
    Select { who: usize, pattern: usize },
    Pump,
    Advance(f64),
}

fn cmd() -> impl Strategy<Value = Cmd> {
    prop_oneof![
        4 => (0usize..3, 0usize..5).prop_map(|(who, pattern)| Cmd::Select { who, pattern }),
        2 => Just(Cmd::Pump),
        2 => (0.0..2.0f64).prop_map(Cmd::Advance),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn runtime_invariants(cmds in prop::collection::vec(cmd(), 1..80)) {
        let orch = "module Main() {
            fork { emit BassOut(true); } par { run Tank(sigarray = Percu); }
            await count(2, BassIn.now);
            emit FlutesOut(true);
            emit BassOut(false);
            await (FlutesIn.now);
            emit BassOut(true);
            emit FlutesOut(false);
            loop { await (BassIn.now); }
        }";
        let ids = ["B1", "B2", "P1", "P2", "F1"];
        let mut p = Performance::new(score(orch)).unwrap();
        let mut t = 0.0;
        let mut admitted_n = 0usize;
        let mut tank_admissions: BTreeMap<String, usize> = BTreeMap::new();
        for c in cmds {
            match c {
                Cmd::Select { who, pattern } => {
                    let who = format!("p{who}");
                    let s = p.select(&who, ids[pattern], t).unwrap();
                    if let Selection::Admitted(a) = &s {
                        admitted_n += 1;
                        if a.group == "Percu" {
                            *tank_admissions.entry(a.pattern_id.clone()).or_default() += 1;
                        }
                    }
                }
                Cmd::Pump => { p.pump().unwrap(); }
                Cmd::Advance(dt) => { t += dt; p.advance(t); }
            }
            for who in ["p0", "p1", "p2"] {
                prop_assert!(p.pending(who) <= PENDING_CAP);
            }
        }
        p.pump().unwrap();

        // Tank single consumption.
        prop_assert!(tank_admissions.values().all(|&n| n == 1));

        // Matrix agrees with the last emitted GOut values.
        let mut last: BTreeMap<String, bool> = BTreeMap::new();
        for r in p.trace() {
            for (sig, v) in &r.outputs {
                if let Some(g) = sig.strip_suffix("Out") {
                    if p.score().group(g).is_some() {
                        last.insert(g.to_string(), v.as_ref().and_then(Value::as_bool).unwrap());
                    }
                }
            }
        }
        for g in p.score().groups() {
            let active = p.snapshot().groups.iter().any(|v| v.name == g.name);
            prop_assert_eq!(active, last.get(&g.name).copied().unwrap_or(false), "{}", g.name);
        }

        // One group input per admission, one start per admission.
        let group_inputs: usize = p.trace().iter().map(|r| {
            r.inputs.keys().filter(|k| ["BassIn", "PercuIn", "FlutesIn"].contains(&k.as_str())).count()
        }).sum();
        prop_assert_eq!(group_inputs, admitted_n);
        p.drain();
        prop_assert_eq!(p.events().iter().filter(|e| e.kind == EventKind::Start).count(), admitted_n);
        for who in ["p0", "p1", "p2"] {
            prop_assert_eq!(p.pending(who), 0);
        }
    }
}
