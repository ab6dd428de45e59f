#![no_main]

use libfuzzer_sys::fuzz_target;
use nsrl_harness::config::SweepSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = SweepSpec::from_json(text) {
        let axis = spec.parsed_axis().expect("validated axis");
        for &v in &spec.values {
            axis.apply(&spec.base, v).expect("validated value");
        }
    }
});
