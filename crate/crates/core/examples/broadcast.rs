//! Three branches of one instant: two readers and the writer of `sax`.
//! Whatever order the branches are tried in, both readers see 30.

use skini::dsl::compile;
use skini::kernel::{Inputs, Machine};

const SRC: &str = r#"
module M(out sax, out hi1, out hi2) {
    fork {
        if (sax.nowval > 10) { emit hi1(); }
    } par {
        emit sax(30);
    } par {
        if (sax.nowval > 20) { emit hi2(); }
    }
}"#;

fn main() {
    let program = compile(SRC, "M").expect("valid program");
    for seed in [0, 1, 2] {
        let mut m = Machine::new(program.clone()).with_shuffled_schedule(seed);
        let r = m.react(&Inputs::new()).expect("constructive");
        println!("schedule {seed}: {:?}", r.emitted_outputs);
    }

    let mut paradox = Machine::new(compile("module P(out A) { if (A.now) { nothing; } else { emit A(); } }", "P").unwrap());
    println!("paradox: {}", paradox.react(&Inputs::new()).unwrap_err());
}
