#![no_main]

use libfuzzer_sys::fuzz_target;
use nsrl_harness::config::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = ExperimentConfig::from_json(text) {
        // Accepted configs re-serialize to something that parses and hashes identically.
        let again = serde_json::to_string(&config).unwrap();
        let back = ExperimentConfig::from_json(&again).expect("round trip");
        assert_eq!(back.config_hash(), config.config_hash());
    }
});
