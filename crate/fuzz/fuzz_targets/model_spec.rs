#![no_main]

use libfuzzer_sys::fuzz_target;
use ruelle_core::spec::ModelSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(spec) = ModelSpec::parse(text) else { return };
    let emitted = serde_json::to_string(&spec).unwrap();
    assert_eq!(ModelSpec::parse(&emitted).unwrap(), spec);
    // Geometry validation may reject the model; it only must not panic.
    let _ = spec.to_model();
});
