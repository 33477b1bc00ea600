#![no_main]
use libfuzzer_sys::fuzz_target;
use num_rational::BigRational;
use postsel::error_models::GateErrorSet;

fuzz_target!(|data: &[u8]| {
    if let Ok(doc) = serde_json::from_slice::<serde_json::Value>(data) {
        let _ = GateErrorSet::<f64>::from_document(&doc, &());
        let _ = GateErrorSet::<BigRational>::from_document(&doc, &());
    }
});
