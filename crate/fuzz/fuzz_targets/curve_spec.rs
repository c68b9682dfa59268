#![no_main]

use libfuzzer_sys::fuzz_target;
use ruelle_core::spec::CurveFileSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(spec) = CurveFileSpec::parse(text) else { return };
    // Parsing admits overflowed literals (1e999 reads as infinity), so the
    // emission may not round-trip; it only must not panic.
    if let Ok(emitted) = serde_json::to_string(&spec) {
        let _ = CurveFileSpec::parse(&emitted);
    }
    // Quadrature allocates per node; keep the harness iteration cheap.
    let nodes: usize = match &spec {
        CurveFileSpec::Single(c) => c.nodes,
        CurveFileSpec::Many { curves } => {
            if curves.len() > 8 {
                return;
            }
            curves.iter().map(|c| c.nodes).sum()
        }
    };
    if nodes <= 4096 {
        let _ = spec.to_measure();
    }
});
