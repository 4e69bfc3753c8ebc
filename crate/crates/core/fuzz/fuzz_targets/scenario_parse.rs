#![no_main]

use kylesim::scenario::{parse_raw, Scenario};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let raw = parse_raw(text);
    let Ok(sc) = Scenario::parse(text, "fuzz", None) else {
        return;
    };
    // Anything the full parser accepts must have passed the section grammar.
    assert!(raw.is_ok());
    sc.validate().expect("parsed scenario validates");
    // The manifest form must carry the scenario through unchanged.
    let json = serde_json::to_string(&sc).unwrap();
    let back: Scenario = serde_json::from_str(&json).unwrap();
    assert_eq!(sc, back);
});
