//! Information content units: content words clinicians expect in a
//! description of the Cookie Theft picture.
//!
//! Matching is done on suffix-stripped stems. The stemmer is deliberately
//! small and applied identically to the word list and to the tokens:
//!
//! 1. strip `ing`, `ed`, `es` (after `s`, `x`, `z`, `ch`, `sh`) or `s` (not
//!    after another `s`), keeping a stem of at least 3 characters;
//! 2. after `ing`/`ed`, undouble a final doubled consonant other than
//!    `l`, `s`, `z` (`sitting` -> `sit`);
//! 3. drop a final `e`, then rewrite a final `y` to `i`, again keeping at
//!    least 3 characters (`take`/`takes`/`taking` -> `tak`,
//!    `dry`/`dries` -> `dri`).

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../../resources/icu_words.txt");
const MIN_STEM: usize = 3;

pub fn bundled_words() -> Vec<&'static str> {
    parse_list(BUNDLED)
}

fn parse_list(text: &str) -> Vec<&str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

pub fn stem(word: &str) -> String {
    let mut w = word.to_lowercase();
    let len = w.len();
    let mut undouble = false;
    if w.ends_with("ing") && len - 3 >= MIN_STEM {
        w.truncate(len - 3);
        undouble = true;
    } else if w.ends_with("ed") && len - 2 >= MIN_STEM {
        w.truncate(len - 2);
        undouble = true;
    } else if len >= 2 + MIN_STEM
        && ["ses", "xes", "zes", "ches", "shes"]
            .iter()
            .any(|s| w.ends_with(s))
    {
        w.truncate(len - 2);
    } else if w.ends_with('s') && !w.ends_with("ss") && len > MIN_STEM {
        w.truncate(len - 1);
    }

    let b = w.as_bytes();
    if undouble && b.len() > MIN_STEM {
        let (x, y) = (b[b.len() - 1], b[b.len() - 2]);
        if x == y && x.is_ascii_alphabetic() && !is_vowel(x) && !matches!(x, b'l' | b's' | b'z') {
            w.pop();
        }
    }
    if w.ends_with('e') && w.len() > MIN_STEM {
        w.pop();
    }
    if w.ends_with('y') && w.len() >= MIN_STEM {
        w.pop();
        w.push('i');
    }
    w
}

#[derive(Debug, Clone)]
pub struct IcuLexicon {
    stems: HashSet<String>,
}

impl IcuLexicon {
    pub fn new<S: AsRef<str>>(words: &[S]) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::Empty("information content unit list"));
        }
        Ok(IcuLexicon {
            stems: words.iter().map(|w| stem(w.as_ref().trim())).collect(),
        })
    }

    pub fn bundled() -> Self {
        IcuLexicon::new(&bundled_words()).expect("bundled list is nonempty")
    }

    /// Reads a plain-text list, one word per line.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        IcuLexicon::new(&parse_list(&text))
    }

    pub fn matches(&self, token: &str) -> bool {
        self.stems.contains(&stem(token))
    }

    /// Presence flag and count of matching token positions.
    pub fn icu_features<S: AsRef<str>>(&self, tokens: &[S]) -> (bool, usize) {
        let count = tokens.iter().filter(|t| self.matches(t.as_ref())).count();
        (count > 0, count)
    }
}

impl Default for IcuLexicon {
    fn default() -> Self {
        IcuLexicon::bundled()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_list_has_75_words() {
        let words = bundled_words();
        assert_eq!(words.len(), 75);
        assert_eq!(words.first(), Some(&"boy"));
        assert_eq!(words.last(), Some(&"stand"));
    }

    #[test]
    fn stemmer_conflates_inflections() {
        for (surface, base) in [
            ("takes", "take"),
            ("taking", "take"),
            ("steals", "steal"),
            ("overflowing", "overflow"),
            ("sitting", "sit"),
            ("spilled", "spill"),
            ("dries", "dry"),
            ("dried", "dry"),
            ("cookies", "cookie"),
            ("dishes", "dish"),
            ("glasses", "glass"),
            ("ladies", "lady"),
            ("boys", "boy"),
            ("falls", "fall"),
            ("noticed", "notice"),
        ] {
            assert_eq!(stem(surface), stem(base), "{surface} vs {base}");
        }
        assert_eq!(stem("was"), "was");
        assert_eq!(stem("thing"), "thing");
        assert_ne!(stem("going"), stem("go"));
    }

    #[test]
    fn icu_examples() {
        let lex = IcuLexicon::bundled();
        assert_eq!(lex.icu_features(&["the", "boy", "takes", "a", "cookie"]), (true, 3));
        assert_eq!(lex.icu_features(&["hello", "there"]), (false, 0));
        assert_eq!(lex.icu_features::<&str>(&[]), (false, 0));
    }

    #[test]
    fn repeated_words_count_per_position() {
        let lex = IcuLexicon::bundled();
        assert_eq!(lex.icu_features(&["cookie", "cookie", "jar"]), (true, 3));
    }

    #[test]
    fn custom_list_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("words.txt");
        std::fs::write(&path, "# custom\nkite\n\nballoon\n").unwrap();
        let lex = IcuLexicon::from_file(&path).unwrap();
        assert_eq!(lex.icu_features(&["kites", "boy"]), (true, 1));
        std::fs::write(&path, "\n").unwrap();
        assert!(IcuLexicon::from_file(&path).is_err());
    }
}
