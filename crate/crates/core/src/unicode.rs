//! Codepoint notation, Unicode character names and the built-in vowel-mark set.
//!
//! Nothing here normalizes text. Visually identical strings with different
//! codepoints stay different everywhere in this crate.

use crate::error::{Error, Result};

/// Arabic-script combining vowel marks (harakat and tanwin) plus the
/// superscript alef. Stripped only when a caller asks for it.
pub const VOWEL_MARKS: &[char] = &[
    '\u{064B}', // fathatan
    '\u{064C}', // dammatan
    '\u{064D}', // kasratan
    '\u{064E}', // fatha
    '\u{064F}', // damma
    '\u{0650}', // kasra
    '\u{0651}', // shadda
    '\u{0652}', // sukun
    '\u{0670}', // superscript alef
];

/// `U+XXXX` with at least four upper-case hex digits.
pub fn format_codepoint(c: char) -> String {
    format!("U+{:04X}", c as u32)
}

/// Parses `U+XXXX` (case-insensitive prefix). Rejects surrogates and
/// out-of-range values.
pub fn parse_codepoint(s: &str) -> Result<char> {
    let hex = s
        .strip_prefix("U+")
        .or_else(|| s.strip_prefix("u+"))
        .ok_or_else(|| Error::InvalidRule(format!("expected U+XXXX codepoint, got {s:?}")))?;
    let value = u32::from_str_radix(hex, 16)
        .map_err(|_| Error::InvalidRule(format!("bad codepoint hex {s:?}")))?;
    char::from_u32(value).ok_or_else(|| Error::InvalidRule(format!("not a scalar value: {s}")))
}

/// Unicode character name, or `UNKNOWN` for unassigned codepoints.
pub fn char_name(c: char) -> String {
    unicode_names2::name(c)
        .map(|n| n.to_string())
        .unwrap_or_else(|| "UNKNOWN".to_string())
}

pub fn is_vowel_mark(c: char) -> bool {
    VOWEL_MARKS.contains(&c)
}
