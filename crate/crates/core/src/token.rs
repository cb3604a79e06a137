//! Tweet tokenization and identical-token classes.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use unicode_normalization::UnicodeNormalization;
use unicode_properties::emoji::{self, UnicodeEmoji};
use unicode_segmentation::UnicodeSegmentation;

/// Category of a token for dictionary ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TokenClass {
    Numeral,
    Emoji,
    Emoticon,
    Word,
}

impl TokenClass {
    pub const ALL: [TokenClass; 4] = [
        TokenClass::Numeral,
        TokenClass::Emoji,
        TokenClass::Emoticon,
        TokenClass::Word,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TokenClass::Numeral => "numeral",
            TokenClass::Emoji => "emoji",
            TokenClass::Emoticon => "emoticon",
            TokenClass::Word => "word",
        }
    }

    pub fn parse(s: &str) -> Option<TokenClass> {
        match s {
            "numeral" => Some(TokenClass::Numeral),
            "emoji" => Some(TokenClass::Emoji),
            "emoticon" => Some(TokenClass::Emoticon),
            "word" => Some(TokenClass::Word),
            _ => None,
        }
    }
}

impl fmt::Display for TokenClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Bundled emoticon lexicon. Matching is exact and case-sensitive.
pub const EMOTICONS: &[&str] = &[
    ":)", ":-)", ":))", ":-))", ":]", "=)", "=]", "(:", "(-:", ":(", ":-(", ":((", ":-((", ":[", "=(", "=[", "):",
    ")-:", ";)", ";-)", ";]", "(;", ";D", ":D", ":-D", "=D", "XD", "xD", "X-D", ":P", ":-P", ":p", ":-p", ";P", ";p",
    ";-P", ";-p", "=P", "=p", ":O", ":-O", ":o", ":-o", ":/", ":-/", ":\\", ":-\\", ":|", ":-|", ":*", ":-*", ";*",
    ":'(", ":'-(", ":')", ":'-)", ":3", "<3", "</3", ":$", ":@", ">:(", ">:)", "D:", "8-)", "B-)", "^_^", "^^", "-_-",
    "o_O", "O_o", "o.O", "T_T", ";_;",
];

pub fn is_emoticon(token: &str) -> bool {
    EMOTICONS.contains(&token)
}

/// Assigns exactly one class; precedence is Numeral, Emoji, Emoticon, Word.
pub fn classify_token(token: &str) -> TokenClass {
    if is_numeral(token) {
        TokenClass::Numeral
    } else if is_emoji(token) {
        TokenClass::Emoji
    } else if is_emoticon(token) {
        TokenClass::Emoticon
    } else {
        TokenClass::Word
    }
}

/// ASCII digits with at most one internal '.' or ','.
pub fn is_numeral(token: &str) -> bool {
    let b = token.as_bytes();
    if b.is_empty() || !b[0].is_ascii_digit() || !b[b.len() - 1].is_ascii_digit() {
        return false;
    }
    let mut seps = 0;
    for &c in b {
        if c == b'.' || c == b',' {
            seps += 1;
        } else if !c.is_ascii_digit() {
            return false;
        }
    }
    seps <= 1
}

fn is_emoji_joiner(c: char) -> bool {
    emoji::is_zwj(c)
        || emoji::is_emoji_presentation_selector(c)
        || emoji::is_text_presentation_selector(c)
        || emoji::is_tag_character(c)
        || c == '\u{20E3}'
}

/// Every character carries the Emoji property or joins such characters.
/// ASCII characters such as '#' and '*' have the property too, so at least
/// one non-ASCII character is required.
pub fn is_emoji(token: &str) -> bool {
    let mut any_non_ascii = false;
    for c in token.chars() {
        if !(c.is_emoji_char() || is_emoji_joiner(c)) {
            return false;
        }
        any_non_ascii |= !c.is_ascii();
    }
    any_non_ascii
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenizerConfig {
    /// Case-fold words, mentions and hashtags.
    pub lowercase: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig { lowercase: true }
    }
}

/// Splits one tweet into tokens.
pub fn tokenize(line: &str, config: &TokenizerConfig) -> Vec<String> {
    let normalized: String = line.nfc().collect();
    let mut out = Vec::new();
    for chunk in normalized.split_whitespace() {
        tokenize_chunk(chunk, config, &mut out);
    }
    out
}

fn is_url(chunk: &str) -> bool {
    let head: String = chunk.chars().take(8).flat_map(char::to_lowercase).collect();
    head.starts_with("http://") || head.starts_with("https://") || head.starts_with("www.")
}

fn is_tag_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn prev_char(s: &str, i: usize) -> Option<char> {
    s[..i].chars().next_back()
}

/// Length in bytes of a mention, hashtag or emoticon starting at `i`.
fn special_at(chunk: &str, i: usize) -> Option<(usize, bool)> {
    let rest = &chunk[i..];
    let before_ok = prev_char(chunk, i).is_none_or(|c| !c.is_alphanumeric());
    if !before_ok {
        return None;
    }
    let mut chars = rest.chars();
    if let Some(first @ ('@' | '#')) = chars.next() {
        let body: usize = chars.take_while(|&c| is_tag_char(c)).map(char::len_utf8).sum();
        if body > 0 {
            return Some((first.len_utf8() + body, true));
        }
    }
    let mut best = 0;
    for e in EMOTICONS {
        if e.len() > best && rest.starts_with(e) {
            let after_ok = rest[e.len()..].chars().next().is_none_or(|c| !c.is_alphanumeric());
            if after_ok {
                best = e.len();
            }
        }
    }
    (best > 0).then_some((best, false))
}

fn tokenize_chunk(chunk: &str, config: &TokenizerConfig, out: &mut Vec<String>) {
    if is_url(chunk) {
        out.push(chunk.to_string());
        return;
    }
    let fold = |s: &str| {
        if config.lowercase {
            s.to_lowercase()
        } else {
            s.to_string()
        }
    };
    let mut i = 0;
    while i < chunk.len() {
        if let Some((len, is_tag)) = special_at(chunk, i) {
            let tok = &chunk[i..i + len];
            out.push(if is_tag { fold(tok) } else { tok.to_string() });
            i += len;
            continue;
        }
        // Plain run up to the next special token.
        let mut j = i + chunk[i..].chars().next().map_or(1, char::len_utf8);
        while j < chunk.len() && special_at(chunk, j).is_none() {
            j += chunk[j..].chars().next().map_or(1, char::len_utf8);
        }
        for seg in chunk[i..j].split_word_bounds() {
            if seg.chars().all(char::is_whitespace) {
                continue;
            }
            if is_emoji(seg) {
                out.extend(seg.graphemes(true).map(ToString::to_string));
            } else {
                out.push(fold(seg));
            }
        }
        i = j;
    }
}
