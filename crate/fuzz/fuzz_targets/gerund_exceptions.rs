#![no_main]

use libfuzzer_sys::fuzz_target;
use sinc_core::textaug::GerundInflector;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(g) = GerundInflector::from_json_str(s) {
        let _ = g.inflect("run in place");
    }
});
