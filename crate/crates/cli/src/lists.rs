//! Parsers for comma-separated command-line lists.

use orsearch::ScoringMode;

/// Longest list a single flag may expand to.
pub const MAX_LIST_LEN: usize = 10_000;

/// Cut-offs such as `1,5,10`. Each must be at least 1.
pub fn parse_ks(text: &str) -> Result<Vec<usize>, String> {
    let ks = split(text)?
        .map(|t| match t.parse::<usize>() {
            Ok(0) => Err("k must be at least 1".to_owned()),
            Ok(k) => Ok(k),
            Err(_) => Err(format!("`{t}` is not a positive integer")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    check_len(ks)
}

/// Seeds as a comma list, an inclusive range `a..b` / `a..=b`, or a mix.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for token in split(text)? {
        if let Some((lo, hi)) = token.split_once("..") {
            let hi = hi.strip_prefix('=').unwrap_or(hi);
            let lo: u64 = lo.trim().parse().map_err(|_| format!("bad range start in `{token}`"))?;
            let hi: u64 = hi.trim().parse().map_err(|_| format!("bad range end in `{token}`"))?;
            if lo > hi {
                return Err(format!("empty range `{token}`"));
            }
            if hi - lo >= (MAX_LIST_LEN - out.len()) as u64 {
                return Err(format!("more than {MAX_LIST_LEN} values"));
            }
            out.extend(lo..=hi);
        } else {
            out.push(token.parse().map_err(|_| format!("`{token}` is not a seed"))?);
        }
    }
    check_len(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GallerySize {
    /// Every detection outside the probe's frame.
    Full,
    Sampled(usize),
}

impl GallerySize {
    pub fn label(self) -> String {
        match self {
            GallerySize::Full => "full".to_owned(),
            GallerySize::Sampled(n) => n.to_string(),
        }
    }
}

/// Gallery sizes such as `50,100,full`.
pub fn parse_gallery_sizes(text: &str) -> Result<Vec<GallerySize>, String> {
    let sizes = split(text)?
        .map(|t| match t {
            "full" | "all" => Ok(GallerySize::Full),
            _ => match t.parse::<usize>() {
                Ok(0) => Err("gallery size must be at least 1".to_owned()),
                Ok(n) => Ok(GallerySize::Sampled(n)),
                Err(_) => Err(format!("`{t}` is not a gallery size")),
            },
        })
        .collect::<Result<Vec<_>, _>>()?;
    check_len(sizes)
}

/// `all`, or a comma list of `visual`, `o`, `r`, `or`. Result follows the
/// canonical mode order without repeats.
pub fn parse_modes(text: &str) -> Result<Vec<ScoringMode>, String> {
    let mut modes = Vec::new();
    for token in split(text)? {
        if token == "all" {
            modes.extend(ScoringMode::ALL);
        } else {
            modes.push(token.parse::<ScoringMode>().map_err(|e| e.to_string())?);
        }
    }
    modes.sort_unstable();
    modes.dedup();
    Ok(modes)
}

pub fn parse_mode(text: &str) -> Result<ScoringMode, String> {
    text.trim().parse::<ScoringMode>().map_err(|e| e.to_string())
}

fn split(text: &str) -> Result<impl Iterator<Item = &str>, String> {
    if text.trim().is_empty() {
        return Err("empty list".to_owned());
    }
    if text.split(',').any(|t| t.trim().is_empty()) {
        return Err(format!("empty element in `{text}`"));
    }
    Ok(text.split(',').map(str::trim))
}

fn check_len<T>(v: Vec<T>) -> Result<Vec<T>, String> {
    if v.len() > MAX_LIST_LEN {
        return Err(format!("more than {MAX_LIST_LEN} values"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks() {
        assert_eq!(parse_ks("1,5,10").unwrap(), [1, 5, 10]);
        assert_eq!(parse_ks(" 3 ").unwrap(), [3]);
        assert!(parse_ks("0").is_err());
        assert!(parse_ks("1,,2").is_err());
        assert!(parse_ks("").is_err());
        assert!(parse_ks("x").is_err());
    }

    #[test]
    fn seeds() {
        assert_eq!(parse_seeds("1..5").unwrap(), [1, 2, 3, 4, 5]);
        assert_eq!(parse_seeds("7,1..=2").unwrap(), [7, 1, 2]);
        assert!(parse_seeds("5..1").is_err());
        assert!(parse_seeds("0..18446744073709551615").is_err());
        assert!(parse_seeds("a").is_err());
    }

    #[test]
    fn sizes_and_modes() {
        assert_eq!(
            parse_gallery_sizes("50,full").unwrap(),
            [GallerySize::Sampled(50), GallerySize::Full]
        );
        assert!(parse_gallery_sizes("0").is_err());
        assert_eq!(parse_modes("all").unwrap(), ScoringMode::ALL);
        assert_eq!(
            parse_modes("or,visual,or").unwrap(),
            [ScoringMode::Visual, ScoringMode::VisualOR]
        );
        assert!(parse_modes("x").is_err());
        assert_eq!(parse_mode("r").unwrap(), ScoringMode::VisualR);
    }
}
