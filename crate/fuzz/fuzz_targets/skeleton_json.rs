#![no_main]

use libfuzzer_sys::fuzz_target;
use sinc_core::geometry::Skeleton;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = Skeleton::from_json_str(s);
    }
});
