#![no_main]

use libfuzzer_sys::fuzz_target;
use spikeguard::events::{read_canonical, write_canonical_binary, write_canonical_text};

fuzz_target!(|data: &[u8]| {
    let Ok(read) = read_canonical(data) else { return };
    let text = write_canonical_text(&read.stream);
    assert_eq!(read_canonical(text.as_bytes()).unwrap().stream, read.stream);
    let bin = write_canonical_binary(&read.stream);
    assert_eq!(read_canonical(&bin).unwrap().stream, read.stream);
});
