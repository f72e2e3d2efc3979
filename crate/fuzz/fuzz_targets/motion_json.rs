#![no_main]

use libfuzzer_sys::fuzz_target;
use sinc_core::motion::io::{motion_from_json_str, motion_to_json_string};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(m) = motion_from_json_str(s) {
        let again = motion_from_json_str(&motion_to_json_string(&m)).expect("written motion parses");
        assert_eq!(m.len(), again.len());
    }
});
