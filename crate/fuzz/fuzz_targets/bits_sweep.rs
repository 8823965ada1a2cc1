#![no_main]

use cmimo::parse::parse_bits_sweep;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(sweep) = parse_bits_sweep(text) {
        assert!(sweep.windows(2).all(|w| w[0] < w[1]));
        assert!(sweep.iter().all(|b| b.is_finite() && *b >= 0.0));
    }
});
