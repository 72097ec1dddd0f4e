#![no_main]

use libfuzzer_sys::fuzz_target;
use orsearch::dataset::format::{decode_embeddings, encode_embeddings};

fuzz_target!(|data: &[u8]| {
    // anything accepted must re-encode to the same bytes
    if let Ok(m) = decode_embeddings(data) {
        let rows: Vec<&[f32]> = m.rows().collect();
        assert_eq!(rows.len(), m.count);
        assert_eq!(encode_embeddings(m.dim, rows.into_iter()), data);
    }
});
