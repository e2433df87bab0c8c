#![no_main]

use libfuzzer_sys::fuzz_target;
use sfspn::cipher::CiphertextContainer;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = CiphertextContainer::decode(data) {
        assert_eq!(c.encode(), data);
    }
});
