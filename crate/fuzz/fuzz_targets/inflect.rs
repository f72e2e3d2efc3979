#![no_main]

use libfuzzer_sys::fuzz_target;
use sinc_core::textaug::inflect_gerund;

fuzz_target!(|data: &[u8]| {
    let _ = inflect_gerund(&String::from_utf8_lossy(data));
});
