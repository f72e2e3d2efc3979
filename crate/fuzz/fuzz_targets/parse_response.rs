#![no_main]

use libfuzzer_sys::fuzz_target;
use sinc_core::partlab::{parse_response, LookupTable, PromptKind};

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let lookup = LookupTable::builtin();
    for kind in PromptKind::ALL {
        let parts = parse_response(&text, kind, &lookup);
        let rendered: Vec<String> = parts.iter().map(|p| p.title().to_lowercase()).collect();
        let _ = parse_response(&rendered.join("\n"), kind, &lookup);
    }
});
