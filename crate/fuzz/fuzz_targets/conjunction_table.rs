#![no_main]

use libfuzzer_sys::fuzz_target;
use sinc_core::textaug::{compose_description, ConjunctionTable};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(table) = ConjunctionTable::from_json_str(s) {
        let labels = ["walk".to_string(), "wave".to_string()];
        let _ = compose_description(&labels, 0, &table);
    }
});
