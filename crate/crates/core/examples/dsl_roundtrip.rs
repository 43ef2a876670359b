//! Parse an orchestration, print it back and parse the print again.

use skini::dsl::{parse_orchestration, print_modules};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/chromatic.json");
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let source = doc["orchestration"].as_str().unwrap();

    let modules = parse_orchestration(source).expect("parses");
    let printed = print_modules(&modules);
    println!("{printed}");
    assert_eq!(parse_orchestration(&printed).unwrap(), modules);
    println!("round trip ok, {} module(s)", modules.len());
}
