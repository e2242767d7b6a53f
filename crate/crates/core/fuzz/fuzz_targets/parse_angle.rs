#![no_main]

use libfuzzer_sys::fuzz_target;
use lmrate::angle::parse_angle;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(angle) = parse_angle(text) {
        assert!(angle.radians().is_finite());
        let again = parse_angle(&angle.to_string()).expect("display output parses");
        assert_eq!(again, angle);
    }
});
