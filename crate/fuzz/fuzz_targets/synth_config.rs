#![no_main]

use libfuzzer_sys::fuzz_target;
use orsearch::SynthConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(cfg) = SynthConfig::from_json(s) {
            // keep generation itself out of the loop; it can be large
            assert!(cfg.validate().is_ok());
        }
    }
});
