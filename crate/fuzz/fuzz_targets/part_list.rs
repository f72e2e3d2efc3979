#![no_main]

use libfuzzer_sys::fuzz_target;
use sinc_core::partlab::PartSet;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = PartSet::parse_list(s);
    }
});
