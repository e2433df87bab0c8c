#![no_main]

use libfuzzer_sys::fuzz_target;
use sfspn::sbox::{parse_family, render_family};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(members) = parse_family(text) {
        let again = parse_family(&render_family(members.iter().map(|(r, s)| (*r, s)))).unwrap();
        assert_eq!(again, members);
    }
});
