#![no_main]

use libfuzzer_sys::fuzz_target;
use spikeguard::snn::{read_checkpoint, write_checkpoint};

fuzz_target!(|data: &[u8]| {
    if let Ok(net) = read_checkpoint(data) {
        let text = write_checkpoint(&net);
        assert_eq!(write_checkpoint(&read_checkpoint(text.as_bytes()).unwrap()), text);
    }
});
