#![no_main]

use libfuzzer_sys::fuzz_target;
use spikeguard::attack::{noise_to_csv, parse_noise_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(points) = parse_noise_csv(text) {
        let csv = noise_to_csv(&points);
        assert_eq!(parse_noise_csv(&csv).unwrap(), points);
    }
});
