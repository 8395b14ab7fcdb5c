#![no_main]

use depthfuse::io::Manifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = Manifest::parse(text) {
        let again = Manifest::parse(&m.to_toml()).expect("serialised manifest parses");
        assert_eq!(again, m);
    }
});
