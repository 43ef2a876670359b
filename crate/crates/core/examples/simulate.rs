//! A seeded simulated audience playing the jazz score.

use std::sync::Arc;

use skini::score::Score;
use skini::simulator::{run, SimulatorConfig};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/jazz.json");
    let score = Arc::new(Score::from_json(&std::fs::read_to_string(path).unwrap()).unwrap());
    let config = SimulatorConfig {
        audience_size: 12,
        seed: 7,
        run_length_s: 120.0,
        ..SimulatorConfig::default()
    };
    let result = run(score, &config).unwrap();
    println!("{}", result.stats_json());
    for line in result.csv().lines().take(8) {
        println!("{line}");
    }
}
