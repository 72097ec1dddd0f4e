#![no_main]

use libfuzzer_sys::fuzz_target;
use orsearch_cli::lists::{parse_gallery_sizes, parse_ks, parse_modes, parse_seeds};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(ks) = parse_ks(s) {
        assert!(ks.iter().all(|&k| k >= 1));
    }
    let _ = parse_seeds(s);
    let _ = parse_gallery_sizes(s);
    let _ = parse_modes(s);
});
