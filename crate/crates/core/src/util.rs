//! Small shared helpers.

/// Rounds half-up to two decimals for report rendering.
///
/// Inputs are metric percentages whose decimal midpoints (e.g. 79.395) are
/// not exactly representable, so a tolerance of 1e-9 is applied before the
/// floor to land on the decimal reading.
pub fn round2(x: f64) -> f64 {
    let scaled = x.abs() * 100.0;
    let r = (scaled + 0.5 + 1e-9).floor() / 100.0;
    if x < 0.0 {
        -r
    } else {
        r
    }
}

/// Whitespace-delimited word count.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Collapses every whitespace run (including newlines) to a single space.
pub fn single_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// 64-bit FNV-1a, used to derive stable sub-seeds from names.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round2_half_up() {
        assert_eq!(round2((79.56 + 79.23) / 2.0), 79.40);
        assert_eq!(round2((62.64 + 67.13) / 2.0), 64.89);
        assert_eq!(round2(35.0952), 35.10);
        assert_eq!(round2(0.0), 0.0);
        assert_eq!(round2(-1.005), -1.01);
    }

    #[test]
    fn words_and_lines() {
        assert_eq!(word_count("  a b\n c  "), 3);
        assert_eq!(single_line("a\n\tb  c"), "a b c");
    }
}
