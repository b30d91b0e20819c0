#![no_main]

use libfuzzer_sys::fuzz_target;
use spikeguard::attack::FrameMask;

fuzz_target!(|data: &[u8]| {
    let Some((&bins, spec)) = data.split_first() else { return };
    let Ok(spec) = std::str::from_utf8(spec) else { return };
    let _ = FrameMask::parse(spec, usize::from(bins));
});
