#![no_main]
use libfuzzer_sys::fuzz_target;
use postsel::symplectic::{GeneratorMatrix, PauliProduct};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(p) = s.parse::<PauliProduct>() {
            assert_eq!(p.to_string().parse::<PauliProduct>().ok(), Some(p));
        }
        let rows: Vec<&str> = s.lines().collect();
        let _ = GeneratorMatrix::from_strs(&rows);
    }
});
