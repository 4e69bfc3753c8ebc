#![no_main]

use kylesim::insider::DriftTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = DriftTable::parse_csv(text) {
        for (t, y) in [(0.0, 0.0), (-1e9, 1e9), (0.5, -3.0), (1e300, f64::MIN_POSITIVE)] {
            assert!(table.eval(t, y).is_finite());
        }
    }
});
