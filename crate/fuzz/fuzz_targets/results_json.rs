#![no_main]

use cmimo::experiment::ResultTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = ResultTable::from_json(text) {
        let _ = table.to_csv();
        let _ = table.to_json();
    }
});
