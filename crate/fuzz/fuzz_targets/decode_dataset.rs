//! Input layout: u16 LE length of the embedding blob, the blob, then the
//! items, frames and probes texts separated by 0x1e.

#![no_main]

use libfuzzer_sys::fuzz_target;
use orsearch::dataset::{decode_dataset, encode_dataset};

fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let n = u16::from_le_bytes([data[0], data[1]]) as usize;
    let rest = &data[2..];
    if rest.len() < n {
        return;
    }
    let (bin, text) = rest.split_at(n);
    let Ok(text) = std::str::from_utf8(text) else { return };
    let mut parts = text.split('\x1e');
    let (items, frames, probes) = (
        parts.next().unwrap_or(""),
        parts.next().unwrap_or(""),
        parts.next().unwrap_or(""),
    );
    if let Ok(ds) = decode_dataset(bin, items, frames, probes) {
        // a decoded dataset survives its own encoding
        let enc = encode_dataset(&ds);
        let again = decode_dataset(&enc.embeddings, &enc.items, &enc.frames, &enc.probes).expect("re-decode");
        assert_eq!(again, ds);
    }
});
