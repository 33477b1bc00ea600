#![no_main]
use libfuzzer_sys::fuzz_target;
use postsel::scalar::{likelihood_of, parse_decimal};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(r) = parse_decimal(s) {
            let _ = likelihood_of(&r);
        }
    }
});
