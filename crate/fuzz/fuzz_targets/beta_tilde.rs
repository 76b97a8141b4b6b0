#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = ebvi::pilot::parse_beta_tilde(text) {
        assert!(v.iter().all(|b| b.is_finite()));
    }
});
