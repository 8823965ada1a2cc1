#![no_main]

use cmimo::SystemInstance;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // keeps eigendecompositions cheap
    if data.len() > 64 * 1024 {
        return;
    }
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(inst) = SystemInstance::from_json(text) {
        let again = SystemInstance::from_json(&inst.to_json().unwrap()).unwrap();
        assert_eq!(inst.channel, again.channel);
        assert_eq!(inst.seed, again.seed);
    }
});
