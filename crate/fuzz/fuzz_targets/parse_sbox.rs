#![no_main]

use libfuzzer_sys::fuzz_target;
use sfspn::sbox::{parse_sbox, render_sbox};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = parse_sbox(text) {
        assert_eq!(parse_sbox(&render_sbox(&s)).unwrap(), s);
    }
});
