#![no_main]

use depthfuse::io::{decode_state, encode_state};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(state) = decode_state(data) {
        let bytes = encode_state(&state);
        let again = decode_state(&bytes).expect("re-encoded state decodes");
        assert_eq!(encode_state(&again), bytes);
    }
});
