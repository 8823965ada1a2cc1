#![no_main]

use cmimo::parse::parse_scheme_list;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(schemes) = parse_scheme_list(text) {
        let joined: Vec<&str> = schemes.iter().map(|s| s.as_str()).collect();
        assert_eq!(parse_scheme_list(&joined.join(",")).unwrap(), schemes);
    }
});
