#![no_main]

use depthfuse::io::{format_intrinsics, parse_intrinsics};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(k) = parse_intrinsics(text) {
        assert_eq!(parse_intrinsics(&format_intrinsics(&k)).expect("formatted intrinsics parse"), k);
    }
});
