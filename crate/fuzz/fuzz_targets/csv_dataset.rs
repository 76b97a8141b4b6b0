#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(d) = ebvi::Dataset::from_csv_str(text, "y") {
        assert_eq!(d.x().nrows(), d.y().len());
        assert!(d.y().iter().all(|&v| v == 0.0 || v == 1.0));
        let again = ebvi::Dataset::from_csv_str(&d.to_csv_string("y"), "y").expect("own output parses");
        assert_eq!(again.x(), d.x());
    }
});
