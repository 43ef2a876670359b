//! Reference models shared by the integration tests. They are written
//! against plain data and deliberately share no code with the library.

#![allow(dead_code)]

/// One queued selection as seen by the tick model: admission time and
/// duration, both in whole milliseconds.
#[derive(Debug, Clone, Copy)]
pub struct TickEntry {
    pub admitted_ms: u64,
    pub duration_ms: u64,
}

/// Brute-force start time of the last entry of `queue`, obtained by
/// stepping a clock one millisecond at a time from `now_ms`.
///
/// The instrument is busy until `busy_until_ms`. At each tick, if it is free,
/// the head entry has been admitted and the tick lies on the grid, the head
/// starts and keeps the instrument busy for its duration.
pub fn tick_oracle_start(now_ms: u64, busy_until_ms: u64, grid_ms: u64, queue: &[TickEntry]) -> u64 {
    assert!(!queue.is_empty());
    let mut busy = busy_until_ms;
    let mut head = 0;
    let mut t = now_ms;
    loop {
        let e = queue[head];
        if t >= busy && t >= e.admitted_ms && t.is_multiple_of(grid_ms) {
            if head == queue.len() - 1 {
                return t;
            }
            busy = t + e.duration_ms;
            head += 1;
            continue;
        }
        t += 1;
    }
}

/// Loads a score from the fixtures directory.
pub fn fixture(name: &str) -> std::sync::Arc<skini::score::Score> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    std::sync::Arc::new(skini::score::Score::from_json(&text).unwrap())
}
