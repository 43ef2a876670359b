//! Drive the chromatic score by hand: select, deliver, watch the matrix.

use std::sync::Arc;

use skini::runtime::{Performance, Selection};
use skini::score::Score;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/chromatic.json");
    let score = Arc::new(Score::from_json(&std::fs::read_to_string(path).unwrap()).unwrap());
    let mut p = Performance::new(score).unwrap();
    let show = |p: &Performance| {
        let names: Vec<String> = p.snapshot().groups.into_iter().map(|g| g.name).collect();
        println!("  matrix r{}: {}", p.matrix().revision(), names.join(", "));
    };
    show(&p);

    let script = [
        "ChromPercuTank1", "ChromPercuTank2", "ChromPercuTank3", "ChromPercuTank4",
        "ChromPercuTank1", "ChromBass_1", "ChromBass_2", "ChromBass_3",
    ];
    for (i, pid) in script.iter().enumerate() {
        let who = format!("p{i}");
        match p.select(&who, pid, 0.0).unwrap() {
            Selection::Admitted(a) => println!("{who} {pid}: admitted, plays in {:.2} s", a.delay),
            Selection::Rejected { reason, .. } => println!("{who} {pid}: {reason}"),
        }
        for r in p.pump().unwrap() {
            println!("  instant {}: {:?}", r.instant, r.delta);
        }
    }
    show(&p);
}
