#![no_main]

use libfuzzer_sys::fuzz_target;
use spikeguard::events::{decode_nmnist_bin, encode_nmnist_bin};

fuzz_target!(|data: &[u8]| {
    if let Ok(stream) = decode_nmnist_bin(data, None) {
        // Anything that decodes must survive a re-encode unchanged.
        let bytes = encode_nmnist_bin(&stream).expect("decoded stream re-encodes");
        let again = decode_nmnist_bin(&bytes, None).expect("re-encoded stream decodes");
        assert_eq!(again.events(), stream.events());
    }
});
