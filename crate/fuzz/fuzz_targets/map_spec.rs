#![no_main]

use libfuzzer_sys::fuzz_target;
use ruelle_core::spec::MapSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(spec) = MapSpec::parse(text) else { return };
    // Accepted coefficients are finite and degree-capped, so emission must
    // round-trip to an equal value.
    let emitted = serde_json::to_string(&spec).unwrap();
    assert_eq!(MapSpec::parse(&emitted).unwrap(), spec);
    let _ = spec.to_map();
    let _ = spec.to_direction();
});
