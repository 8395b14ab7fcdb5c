#![no_main]

use depthfuse::io::{decode_pfm, encode_pfm, ByteOrder};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(grid) = decode_pfm(data) {
        for order in [ByteOrder::Little, ByteOrder::Big] {
            let again = decode_pfm(&encode_pfm(&grid, order)).expect("re-encoded PFM decodes");
            assert_eq!(again.dims(), grid.dims());
            assert!(again.iter().zip(grid.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
});
