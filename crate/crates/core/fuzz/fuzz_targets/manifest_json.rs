#![no_main]

use kylesim::cli::Manifest;
use kylesim::sim::Model;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(m) = Manifest::from_json(text) else {
        return;
    };
    assert_eq!(m.seed, m.scenario.mc.seed);
    // Binding to a grid may still reject the scenario, but must not panic.
    if m.scenario.mc.steps <= 100_000 {
        let _ = Model::new(&m.scenario);
    }
});
