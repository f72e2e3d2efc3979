#![no_main]

use libfuzzer_sys::fuzz_target;
use sinc_core::motion::io::{decode_binary, encode_binary};

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = decode_binary(data, "fuzz") {
        let bytes = encode_binary(&m).expect("decoded motion re-encodes");
        let again = decode_binary(&bytes, "fuzz").expect("re-encoded motion decodes");
        assert_eq!(m, again);
    }
});
