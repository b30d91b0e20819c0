#![no_main]

use libfuzzer_sys::fuzz_target;
use spikeguard::defense::{report_from_json, report_to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(report) = report_from_json(text) {
        let json = report_to_json(&report);
        assert_eq!(report_to_json(&report_from_json(&json).unwrap()), json);
    }
});
