#![no_main]

use libfuzzer_sys::fuzz_target;
use lmrate::config::parse_experiment;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = parse_experiment(text) {
        spec.validate().expect("parsed specs are valid");
        let _ = spec.operating_points();
    }
});
