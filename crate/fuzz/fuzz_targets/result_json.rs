#![no_main]

use libfuzzer_sys::fuzz_target;

use ebvi::mcmc::ChainResult;
use ebvi::posterior::PosteriorTable;
use ebvi_bench::output::{results_from_json, to_json_string};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = PosteriorTable::from_json(text) {
        let _ = PosteriorTable::from_json(&t.to_json()).expect("own output parses");
    }
    if let Ok(c) = ChainResult::from_json(text) {
        let _ = ChainResult::from_json(&c.to_json()).expect("own output parses");
    }
    if let Ok(r) = results_from_json(text) {
        let _ = results_from_json(&to_json_string(&r)).expect("own output parses");
    }
});
