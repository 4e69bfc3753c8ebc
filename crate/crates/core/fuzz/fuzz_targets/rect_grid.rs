#![no_main]

use kylesim::rules::RectGrid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(g) = RectGrid::parse(text) {
        assert!(g.t.2 > 0 && g.x.2 > 0);
        assert!(g.t.0 <= g.t.1 && g.x.0 <= g.x.1);
        let n = g.points().take(1000).filter(|(t, x)| t.is_finite() && x.is_finite()).count();
        assert_eq!(n, (g.t.2 * g.x.2).min(1000));
    }
});
