#![no_main]

use depthfuse::io::{format_poses, parse_poses};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(poses) = parse_poses(text) {
        let again = parse_poses(&format_poses(&poses)).expect("formatted poses parse");
        assert_eq!(again.len(), poses.len());
        for (a, b) in again.iter().zip(&poses) {
            assert_eq!(a.to_matrix3x4(), b.to_matrix3x4());
        }
    }
});
