mod common;

use common::{tick_oracle_start, TickEntry};
use proptest::prelude::*;
use skini::scheduler::{
    parse_csv, render_csv, Entry, EventKind, PlaybackEvent, RenderError, Scheduler,
};

const EPS: f64 = 1e-9;

fn sched(instruments: &[&str], grid: f64) -> Scheduler {
    Scheduler::new(instruments.iter().map(|s| s.to_string()).collect(), grid)
}

fn entry(p: &str, who: &str, at: f64, dur: f64) -> Entry {
    Entry::new(p, who, at, dur)
}

#[test]
fn idle_instrument_on_a_boundary_starts_now() {
    let mut s = sched(&["bass"], 0.5);
    s.advance(1.0);
    let e = s.enqueue("bass", entry("B1", "p", 1.0, 1.0)).unwrap();
    assert_eq!(e.position, 0);
    assert!(e.delay.abs() < EPS);
}

#[test]
fn off_boundary_waits_for_the_rest_of_the_beat() {
    let beat = 0.5;
    let mut s = sched(&["bass"], beat);
    let now = 2.0 * beat + 0.3 * beat;
    s.advance(now);
    let e = s.enqueue("bass", entry("B1", "p", now, beat)).unwrap();
    assert!((e.delay - 0.7 * beat).abs() < EPS, "{}", e.delay);
}

#[test]
fn waits_behind_a_pattern_about_to_start() {
    let beat = 0.5;
    let mut s = sched(&["bass"], beat);
    let now = 0.1;
    s.advance(now);
    let first = s.enqueue("bass", entry("B1", "p", now, 4.0 * beat)).unwrap();
    assert_eq!(first.position, 0);
    let second = s.enqueue("bass", entry("B2", "q", now, beat)).unwrap();
    assert_eq!(second.position, 1);
    assert!((second.delay - (0.4 + 4.0 * beat)).abs() < EPS, "{}", second.delay);
}

#[test]
fn measure_grid_pads_short_patterns() {
    let beat = 0.5;
    let mut s = sched(&["bass"], 4.0 * beat);
    s.enqueue("bass", entry("B1", "p", 0.0, 3.0 * beat)).unwrap();
    let second = s.enqueue("bass", entry("B2", "p", 0.0, beat)).unwrap();
    assert!((second.delay - 4.0 * beat).abs() < EPS);
}

#[test]
fn same_instrument_plays_back_to_back() {
    let beat = 0.5;
    let mut s = sched(&["bass"], beat);
    s.enqueue("bass", entry("B1", "p", 0.0, 2.0 * beat)).unwrap();
    s.enqueue("bass", entry("B2", "p", 0.0, 2.0 * beat)).unwrap();
    let ev = s.drain();
    let times: Vec<(f64, EventKind)> = ev.iter().map(|e| (e.time, e.kind)).collect();
    assert_eq!(
        times,
        [
            (0.0, EventKind::Start),
            (1.0, EventKind::End),
            (1.0, EventKind::Start),
            (2.0, EventKind::End)
        ]
    );
}

#[test]
fn different_instruments_start_together() {
    let mut s = sched(&["bass", "drums"], 0.5);
    s.advance(0.2);
    s.enqueue("bass", entry("B1", "p", 0.2, 1.0)).unwrap();
    s.enqueue("drums", entry("D1", "q", 0.2, 1.0)).unwrap();
    let starts: Vec<f64> = s
        .drain()
        .iter()
        .filter(|e| e.kind == EventKind::Start)
        .map(|e| e.time)
        .collect();
    assert_eq!(starts, [0.5, 0.5]);
}

#[test]
fn advancing_by_zero_produces_nothing() {
    let mut s = sched(&["bass"], 0.5);
    s.advance(0.7);
    s.enqueue("bass", entry("B1", "p", 0.7, 1.0)).unwrap();
    assert!(s.advance(0.7).is_empty());
}

#[test]
fn unknown_instrument() {
    let mut s = sched(&["bass"], 0.5);
    assert!(s.enqueue("tuba", entry("T", "p", 0.0, 1.0)).is_err());
}

#[test]
fn csv_header_only_for_no_events() {
    assert_eq!(
        render_csv(&[]).unwrap(),
        "time_seconds,instrument,pattern_id,kind,participant\n"
    );
}

#[test]
fn csv_single_beat_at_120_bpm() {
    let mut s = sched(&["piano"], 0.5);
    s.enqueue("piano", entry("P1", "p0", 0.0, 0.5)).unwrap();
    let csv = render_csv(&s.drain()).unwrap();
    assert_eq!(
        csv,
        "time_seconds,instrument,pattern_id,kind,participant\n\
         0.000,piano,P1,start,p0\n\
         0.500,piano,P1,end,p0\n"
    );
    let back = parse_csv(&csv).unwrap();
    assert_eq!(render_csv(&back).unwrap(), csv);
}

#[test]
fn csv_rejects_unsorted_events() {
    let ev = |t: f64| PlaybackEvent {
        time: t,
        instant_hint: None,
        instrument: "a".into(),
        pattern_id: "x".into(),
        kind: EventKind::Start,
        participant: "p".into(),
    };
    assert_eq!(render_csv(&[ev(1.0), ev(0.5)]), Err(RenderError::UnsortedEvents));
}

/// Grids and durations whose millisecond values are whole numbers, so the
/// tick model is exact.
fn tempo_grid() -> impl Strategy<Value = (f64, u64)> {
    // (beat seconds, grid multiplier in beats)
    (prop::sample::select(vec![0.5, 0.6, 0.4, 0.8, 1.0, 0.48]), prop::sample::select(vec![1u64, 3, 4]))
        .prop_map(|(beat, m)| (beat, m))
}

fn ms(x: f64) -> u64 {
    (x * 1000.0).round() as u64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn estimate_matches_tick_oracle_and_actual_start(
        (beat, mult) in tempo_grid(),
        history in prop::collection::vec((0.0..3.0f64, 1u32..17), 0..6),
        gap in 0.0..2.0f64,
        new_len in 1u32..9,
    ) {
        let grid = beat * mult as f64;
        let mut s = sched(&["inst"], grid);
        let mut t = 0.0;
        for (i, (dt, quarters)) in history.iter().enumerate() {
            t += dt;
            s.advance(t);
            s.enqueue("inst", entry(&format!("h{i}"), "p", t, beat * *quarters as f64 / 4.0)).unwrap();
        }
        let now = t + gap;
        s.advance(now);

        let estimate = s.estimate_delay("inst", now).unwrap();

        let q = s.queue("inst").unwrap();
        let busy = q.playing.as_ref().map(|p| ms(p.end)).unwrap_or(0);
        let mut model: Vec<TickEntry> = q.entries.iter().map(|e| TickEntry {
            admitted_ms: (e.admitted_at * 1000.0).ceil() as u64,
            duration_ms: ms(e.duration),
        }).collect();
        let now_ms = (now * 1000.0).ceil() as u64;
        model.push(TickEntry { admitted_ms: now_ms, duration_ms: ms(beat * new_len as f64 / 4.0) });
        let oracle = tick_oracle_start(now_ms, busy, ms(grid), &model) as f64 / 1000.0 - now;
        prop_assert!((estimate - oracle).abs() <= 0.001 + EPS, "estimate {estimate} oracle {oracle}");

        let admitted = s.enqueue("inst", entry("new", "me", now, beat * new_len as f64 / 4.0)).unwrap();
        prop_assert!((admitted.delay - estimate).abs() < EPS);
        let start = s.drain().into_iter()
            .find(|e| e.pattern_id == "new" && e.kind == EventKind::Start)
            .unwrap();
        prop_assert!((start.time - now - estimate).abs() < EPS);
    }

    #[test]
    fn timeline_invariants(
        grid in prop::sample::select(vec![0.5, 0.75, 2.0]),
        admissions in prop::collection::vec((0.0..1.5f64, 0usize..3, 1u32..13), 1..40),
    ) {
        let names = ["a", "b", "c"];
        let mut s = sched(&names, grid);
        let mut t = 0.0;
        let mut order: Vec<Vec<String>> = vec![Vec::new(); 3];
        for (i, (dt, inst, quarters)) in admissions.iter().enumerate() {
            t += dt;
            s.advance(t);
            let id = format!("x{i}");
            s.enqueue(names[*inst], entry(&id, "p", t, grid * *quarters as f64 / 4.0)).unwrap();
            order[*inst].push(id);
        }
        s.drain();
        let events = s.events();
        prop_assert!(render_csv(events).is_ok());
        prop_assert_eq!(events.len(), 2 * admissions.len());
        for (k, name) in names.iter().enumerate() {
            let starts: Vec<&PlaybackEvent> = events.iter().filter(|e| e.instrument == *name && e.kind == EventKind::Start).collect();
            let ends: Vec<&PlaybackEvent> = events.iter().filter(|e| e.instrument == *name && e.kind == EventKind::End).collect();
            let ids: Vec<String> = starts.iter().map(|e| e.pattern_id.clone()).collect();
            prop_assert_eq!(&ids, &order[k]);
            for (i, st) in starts.iter().enumerate() {
                let cells = st.time / grid;
                prop_assert!((cells - cells.round()).abs() * grid < EPS);
                prop_assert_eq!(&ends[i].pattern_id, &st.pattern_id);
                if i + 1 < starts.len() {
                    prop_assert!(ends[i].time <= starts[i + 1].time + EPS);
                }
            }
        }
    }
}
