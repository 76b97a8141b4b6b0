#![no_main]

use libfuzzer_sys::fuzz_target;

use ebvi_bench::experiment::Method;
use ebvi_bench::Settings;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = Settings::from_json(text) {
        let _ = s.clone().overlay(Settings::default());
        let _ = s.experiment(&Method::ALL);
    }
});
