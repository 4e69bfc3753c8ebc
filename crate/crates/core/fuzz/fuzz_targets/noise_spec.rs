#![no_main]

use kylesim::scenario::parse_noise;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(noise) = parse_noise(text) {
        noise.validate().expect("parsed noise validates");
        for t in [0.0, 0.5, 1.0, 1e6] {
            let s = noise.sigma(t);
            assert!(s > 0.0 && s.is_finite());
            assert!(noise.integrated_variance(t) >= 0.0);
        }
    }
});
