#![no_main]

use libfuzzer_sys::fuzz_target;
use orsearch::ranking::{parse_tsv, to_tsv};
use orsearch::ScoringMode;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let Ok(lists) = parse_tsv(s, ScoringMode::VisualOR) else {
        return;
    };
    // after one trip through the writer the text is a fixed point
    let text: String = lists.iter().map(to_tsv).collect();
    let again = parse_tsv(&text, ScoringMode::VisualOR).expect("writer output parses");
    assert_eq!(again.iter().map(to_tsv).collect::<String>(), text);
});
