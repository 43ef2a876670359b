//! Play the chromatic score and write the result as a MIDI file.

use std::sync::Arc;

use skini::scheduler::render_smf;
use skini::score::Score;
use skini::simulator::{run, SimulatorConfig};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/chromatic.json");
    let score = Arc::new(Score::from_json(&std::fs::read_to_string(path).unwrap()).unwrap());
    let result = run(score.clone(), &SimulatorConfig::default()).unwrap();
    let bytes = render_smf(&result.events, &score).unwrap();
    let out = std::env::temp_dir().join("chromatic.mid");
    std::fs::write(&out, &bytes).unwrap();
    println!("{} events, {} bytes -> {}", result.events.len(), bytes.len(), out.display());
}
