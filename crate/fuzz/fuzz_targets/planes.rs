#![no_main]

use depthfuse::io::{format_planes, parse_planes};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(h) = parse_planes(text) {
        assert_eq!(parse_planes(&format_planes(&h)).expect("formatted planes parse"), h);
    }
});
