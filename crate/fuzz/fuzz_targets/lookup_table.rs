#![no_main]

use libfuzzer_sys::fuzz_target;
use sinc_core::partlab::{parse_response, LookupTable, PromptKind};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(table) = LookupTable::from_json_str(s) {
        let _ = parse_response("left arm\nwaist\nwave", PromptKind::FreeForm, &table);
    }
});
