//! An async metronome feeding the machine until an abort kills it.

use std::time::Duration;

use skini::dsl::compile;
use skini::kernel::{inputs, AsyncTask, Inputs, Machine, Metronome, ReactiveHost, Value};

const SRC: &str = r#"
module M(in stop, in pulse, out tick) {
    abort (stop.now) {
        fork {
            async Metronome(pulse);
        } par {
            every (pulse.now) { emit tick(pulse.nowval); }
        }
    }
}"#;

fn main() {
    let mut host = ReactiveHost::new(Machine::new(compile(SRC, "M").unwrap()));
    host.register("Metronome", || Box::new(Metronome::new(Duration::from_millis(100))) as Box<dyn AsyncTask>);
    host.react(&Inputs::new()).unwrap();
    for _ in 0..4 {
        let r = host.pump_one(Duration::from_secs(1)).unwrap().unwrap();
        println!("tick {:?}", r.emitted_outputs["tick"]);
    }
    let r = host.react(&inputs([("stop", None::<Value>)])).unwrap();
    println!("stopped, killed {:?}, terminated {}", r.killed_tasks, r.terminated);
}
