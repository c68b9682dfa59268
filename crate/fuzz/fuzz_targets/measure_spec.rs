#![no_main]

use libfuzzer_sys::fuzz_target;
use ruelle_core::spec::MeasureSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(spec) = MeasureSpec::parse(text) else { return };
    let emitted = serde_json::to_string(&spec).unwrap();
    assert_eq!(MeasureSpec::parse(&emitted).unwrap(), spec);
    // Moment sums may overflow for extreme weights; they only must not panic.
    let _ = spec.to_measure().moments();
});
