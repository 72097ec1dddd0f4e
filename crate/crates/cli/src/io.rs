use std::fs;
use std::path::Path;

use crate::error::{CliError, CliResult};

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// A file name derived from `id`: safe characters are kept, anything else
/// becomes `_` and a hash of the original id is appended to keep names unique.
pub fn sanitize_file_stem(id: &str) -> String {
    let clean: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    if clean == id && !id.is_empty() && !id.starts_with('.') {
        clean
    } else {
        format!("{clean}~{:016x}", orsearch::rng::fnv1a64(id.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems() {
        assert_eq!(sanitize_file_stem("d0000012"), "d0000012");
        let odd = sanitize_file_stem("cam 1/p:3");
        assert!(odd.starts_with("cam_1_p_3~"));
        assert_ne!(sanitize_file_stem("a/b"), sanitize_file_stem("a_b"));
        assert_ne!(sanitize_file_stem(".."), "..");
        assert!(!sanitize_file_stem("").is_empty());
    }
}
