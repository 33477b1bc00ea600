#![no_main]
use libfuzzer_sys::fuzz_target;
use postsel::run::{parse_schedule, Backend, Settings};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(settings) = Settings::parse(s) {
            let _ = settings.run_config();
            let _ = settings.grid_config();
        }
        let _ = parse_schedule(s);
        let _ = s.parse::<Backend>();
    }
});
