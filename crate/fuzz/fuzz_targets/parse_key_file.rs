#![no_main]

use libfuzzer_sys::fuzz_target;
use sfspn::cipher::CipherKeyBundle;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(k) = CipherKeyBundle::parse(text) {
        assert_eq!(CipherKeyBundle::parse(&k.render()).unwrap(), k);
    }
});
