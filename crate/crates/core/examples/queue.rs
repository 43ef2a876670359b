//! Instrument queues on a half-second grid: estimates, starts and the
//! resulting event log.

use skini::scheduler::{render_csv, Entry, Scheduler};

fn main() {
    let mut s = Scheduler::new(vec!["bass".into(), "violins".into()], 0.5);
    s.advance(0.1);
    for (i, who) in ["ann", "bob", "cyd"].iter().enumerate() {
        let estimate = s.estimate_delay("bass", 0.1).unwrap();
        let e = s.enqueue("bass", Entry::new(format!("B{i}"), *who, 0.1, 1.0)).unwrap();
        println!("{who}: position {}, estimate {estimate:.3} s, delay {:.3} s", e.position, e.delay);
    }
    s.enqueue("violins", Entry::new("V1", "dee", 0.1, 2.0)).unwrap();
    s.drain();
    print!("{}", render_csv(s.events()).unwrap());
}
