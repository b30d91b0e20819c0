#![no_main]

use libfuzzer_sys::fuzz_target;
use spikeguard::defense::parse_report_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(rows) = parse_report_csv(text) {
            assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.accuracy)));
        }
    }
});
