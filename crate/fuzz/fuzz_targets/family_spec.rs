#![no_main]

use libfuzzer_sys::fuzz_target;
use ruelle_core::spec::FamilySpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(spec) = FamilySpec::parse(text) else { return };
    let emitted = serde_json::to_string(&spec).unwrap();
    assert_eq!(FamilySpec::parse(&emitted).unwrap(), spec);
    let _ = spec.to_family();
});
