//! Rule-based text measurements: tokenization, Porter stemming, length and
//! novel-word statistics.
//!
//! Tokenization: every character outside letters, digits, and intra-word
//! apostrophes acts as a separator; tokens are the non-empty runs in
//! between. Intra-word means the apostrophe sits between two alphanumeric
//! characters, so `don't` is one token while quoting apostrophes are
//! stripped.

use std::collections::BTreeSet;

/// Split into words per the tokenization rule above.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let keep = if c.is_alphanumeric() {
            true
        } else if c == '\'' || c == '\u{2019}' {
            let prev_ok = i > 0 && chars[i - 1].is_alphanumeric();
            let next_ok = i + 1 < chars.len() && chars[i + 1].is_alphanumeric();
            prev_ok && next_ok
        } else {
            false
        };
        if keep {
            current.push(if c == '\u{2019}' { '\'' } else { c });
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Word count of a response: the number of tokens.
pub fn word_count(text: &str) -> u64 {
    tokenize(text).len() as u64
}

/// Porter's 1980 suffix-stripping algorithm, including the two departures of
/// the reference implementation (`bli` -> `ble`, `logi` -> `log`). Input is
/// lowercased first; tokens that are not purely ASCII letters are returned
/// unchanged, since the algorithm is defined over English letters only.
pub fn porter_stem(word: &str) -> String {
    let lower = word.to_lowercase();
    if lower.len() <= 2 || !lower.bytes().all(|b| b.is_ascii_lowercase()) {
        return lower;
    }
    let mut s = Stemmer {
        buf: lower.into_bytes(),
        k: 0,
        j: 0,
    };
    s.k = s.buf.len();
    s.step1ab();
    s.step1c();
    s.step2();
    s.step3();
    s.step4();
    s.step5();
    s.buf.truncate(s.k);
    String::from_utf8(s.buf).expect("ascii stays ascii")
}

/// Buffer plus two cursors: `k` is the current word length (exclusive end),
/// `j` marks the start of a candidate suffix.
struct Stemmer {
    buf: Vec<u8>,
    k: usize,
    j: usize,
}

impl Stemmer {
    fn is_consonant(&self, i: usize) -> bool {
        match self.buf[i] {
            b'a' | b'e' | b'i' | b'o' | b'u' => false,
            b'y' => i == 0 || !self.is_consonant(i - 1),
            _ => true,
        }
    }

    /// Number of vowel-consonant sequences in `[0, j)`.
    fn measure(&self) -> usize {
        let mut i = 0;
        let mut m = 0;
        while i < self.j && self.is_consonant(i) {
            i += 1;
        }
        loop {
            while i < self.j && !self.is_consonant(i) {
                i += 1;
            }
            if i >= self.j {
                return m;
            }
            m += 1;
            while i < self.j && self.is_consonant(i) {
                i += 1;
            }
            if i >= self.j {
                return m;
            }
        }
    }

    fn has_vowel(&self) -> bool {
        (0..self.j).any(|i| !self.is_consonant(i))
    }

    /// True when positions `i-1` and `i` hold the same consonant.
    fn double_consonant(&self, i: usize) -> bool {
        i >= 1 && i < self.k && self.buf[i] == self.buf[i - 1] && self.is_consonant(i)
    }

    /// consonant-vowel-consonant ending at `i`, last consonant not w/x/y.
    fn cvc(&self, i: usize) -> bool {
        if i < 2 || i >= self.k {
            return false;
        }
        if !self.is_consonant(i) || self.is_consonant(i - 1) || !self.is_consonant(i - 2) {
            return false;
        }
        !matches!(self.buf[i], b'w' | b'x' | b'y')
    }

    fn ends_with(&mut self, s: &str) -> bool {
        let suffix = s.as_bytes();
        if suffix.len() > self.k {
            return false;
        }
        if &self.buf[self.k - suffix.len()..self.k] != suffix {
            return false;
        }
        self.j = self.k - suffix.len();
        true
    }

    fn set_suffix(&mut self, s: &str) {
        let bytes = s.as_bytes();
        self.buf.truncate(self.j);
        self.buf.extend_from_slice(bytes);
        self.k = self.j + bytes.len();
    }

    fn replace_if_measure(&mut self, s: &str) {
        if self.measure() > 0 {
            self.set_suffix(s);
        }
    }

    /// Plurals and -ed/-ing.
    fn step1ab(&mut self) {
        if self.buf[self.k - 1] == b's' {
            if self.ends_with("sses") {
                self.k -= 2;
            } else if self.ends_with("ies") {
                self.set_suffix("i");
            } else if self.k >= 2 && self.buf[self.k - 2] != b's' {
                self.k -= 1;
            }
        }
        if self.ends_with("eed") {
            if self.measure() > 0 {
                self.k -= 1;
            }
        } else if (self.ends_with("ed") || self.ends_with("ing")) && self.has_vowel() {
            self.k = self.j;
            if self.ends_with("at") {
                self.set_suffix("ate");
            } else if self.ends_with("bl") {
                self.set_suffix("ble");
            } else if self.ends_with("iz") {
                self.set_suffix("ize");
            } else if self.k >= 1 && self.double_consonant(self.k - 1) {
                self.k -= 1;
                if matches!(self.buf[self.k - 1], b'l' | b's' | b'z') {
                    self.k += 1;
                }
            } else {
                self.j = self.k;
                if self.measure() == 1 && self.k >= 1 && self.cvc(self.k - 1) {
                    self.set_suffix("e");
                }
            }
        }
    }

    /// Terminal y -> i when there is a vowel in the stem.
    fn step1c(&mut self) {
        if self.ends_with("y") && self.has_vowel() {
            self.buf[self.k - 1] = b'i';
        }
    }

    fn step2(&mut self) {
        if self.k < 2 {
            return;
        }
        let rules: &[(&str, &str)] = match self.buf[self.k - 2] {
            b'a' => &[("ational", "ate"), ("tional", "tion")],
            b'c' => &[("enci", "ence"), ("anci", "ance")],
            b'e' => &[("izer", "ize")],
            b'l' => &[
                ("bli", "ble"),
                ("alli", "al"),
                ("entli", "ent"),
                ("eli", "e"),
                ("ousli", "ous"),
            ],
            b'o' => &[("ization", "ize"), ("ation", "ate"), ("ator", "ate")],
            b's' => &[
                ("alism", "al"),
                ("iveness", "ive"),
                ("fulness", "ful"),
                ("ousness", "ous"),
            ],
            b't' => &[("aliti", "al"), ("iviti", "ive"), ("biliti", "ble")],
            b'g' => &[("logi", "log")],
            _ => &[],
        };
        for (suffix, replacement) in rules {
            if self.ends_with(suffix) {
                self.replace_if_measure(replacement);
                return;
            }
        }
    }

    fn step3(&mut self) {
        let rules: &[(&str, &str)] = match self.buf[self.k - 1] {
            b'e' => &[("icate", "ic"), ("ative", ""), ("alize", "al")],
            b'i' => &[("iciti", "ic")],
            b'l' => &[("ical", "ic"), ("ful", "")],
            b's' => &[("ness", "")],
            _ => &[],
        };
        for (suffix, replacement) in rules {
            if self.ends_with(suffix) {
                self.replace_if_measure(replacement);
                return;
            }
        }
    }

    /// Drop -ant, -ence, etc. when the remaining stem has measure > 1.
    fn step4(&mut self) {
        if self.k < 2 {
            return;
        }
        let matched = match self.buf[self.k - 2] {
            b'a' => self.ends_with("al"),
            b'c' => self.ends_with("ance") || self.ends_with("ence"),
            b'e' => self.ends_with("er"),
            b'i' => self.ends_with("ic"),
            b'l' => self.ends_with("able") || self.ends_with("ible"),
            b'n' => {
                self.ends_with("ant")
                    || self.ends_with("ement")
                    || self.ends_with("ment")
                    || self.ends_with("ent")
            }
            b'o' => {
                (self.ends_with("ion")
                    && self.j >= 1
                    && matches!(self.buf[self.j - 1], b's' | b't'))
                    || self.ends_with("ou")
            }
            b's' => self.ends_with("ism"),
            b't' => self.ends_with("ate") || self.ends_with("iti"),
            b'u' => self.ends_with("ous"),
            b'v' => self.ends_with("ive"),
            b'z' => self.ends_with("ize"),
            _ => false,
        };
        if matched && self.measure() > 1 {
            self.k = self.j;
        }
    }

    /// Drop terminal e and reduce terminal ll.
    fn step5(&mut self) {
        self.j = self.k;
        if self.buf[self.k - 1] == b'e' {
            let m = self.measure();
            if m > 1 || (m == 1 && !(self.k >= 2 && self.cvc(self.k - 2))) {
                self.k -= 1;
            }
        }
        if self.buf[self.k - 1] == b'l' && self.double_consonant(self.k - 1) {
            self.j = self.k;
            if self.measure() > 1 {
                self.k -= 1;
            }
        }
    }
}

/// Unique stems of a text under the shared tokenization.
pub fn stem_set(text: &str) -> BTreeSet<String> {
    tokenize(text).iter().map(|t| porter_stem(t)).collect()
}

/// Novel-word statistics of a response against its source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NovelWords {
    /// Unique response stems absent from the source stem set.
    pub count: usize,
    /// `count` divided by the number of unique response stems.
    pub ratio: f64,
    pub unique_response_stems: usize,
}

/// `None` when the response has zero tokens (the ratio is undefined).
pub fn novel_word_stats(source: &str, response: &str) -> Option<NovelWords> {
    let response_stems = stem_set(response);
    if response_stems.is_empty() {
        return None;
    }
    let source_stems = stem_set(source);
    let count = response_stems
        .iter()
        .filter(|s| !source_stems.contains(*s))
        .count();
    Some(NovelWords {
        count,
        ratio: count as f64 / response_stems.len() as f64,
        unique_response_stems: response_stems.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_count_basic_cases() {
        assert_eq!(word_count("The cat sat."), 3);
        assert_eq!(word_count(""), 0);
        assert_eq!(word_count("Hello, world—again!"), 3);
    }

    #[test]
    fn tokenizer_keeps_intra_word_apostrophes_only() {
        assert_eq!(tokenize("don't stop"), vec!["don't", "stop"]);
        assert_eq!(tokenize("rock'n'roll"), vec!["rock'n'roll"]);
        assert_eq!(tokenize("'quoted'"), vec!["quoted"]);
        assert_eq!(tokenize("dogs' toys"), vec!["dogs", "toys"]);
        assert_eq!(tokenize("it\u{2019}s"), vec!["it's"]);
    }

    #[test]
    fn tokenizer_treats_everything_else_as_separator() {
        assert_eq!(tokenize("42 is 6*7"), vec!["42", "is", "6", "7"]);
        assert_eq!(tokenize("email@example.com"), vec!["email", "example", "com"]);
        assert_eq!(tokenize("  a\tb\nc "), vec!["a", "b", "c"]);
        assert_eq!(tokenize("naïve café"), vec!["naïve", "café"]);
    }

    #[test]
    fn porter_reference_vectors() {
        let cases = [
            ("caresses", "caress"),
            ("ponies", "poni"),
            ("ties", "ti"),
            ("caress", "caress"),
            ("cats", "cat"),
            ("feed", "feed"),
            ("agreed", "agre"),
            ("plastered", "plaster"),
            ("bled", "bled"),
            ("motoring", "motor"),
            ("sing", "sing"),
            ("conflated", "conflat"),
            ("troubled", "troubl"),
            ("sized", "size"),
            ("hopping", "hop"),
            ("tanned", "tan"),
            ("falling", "fall"),
            ("hissing", "hiss"),
            ("failing", "fail"),
            ("filing", "file"),
            ("happy", "happi"),
            ("sky", "sky"),
            ("relational", "relat"),
            ("conditional", "condit"),
            ("rational", "ration"),
            ("valenci", "valenc"),
            ("digitizer", "digit"),
            ("radicalli", "radic"),
            ("differentli", "differ"),
            ("vileli", "vile"),
            ("analogousli", "analog"),
            ("operator", "oper"),
            ("feudalism", "feudal"),
            ("decisiveness", "decis"),
            ("hopefulness", "hope"),
            ("formaliti", "formal"),
            ("sensitiviti", "sensit"),
            ("triplicate", "triplic"),
            ("formative", "form"),
            ("formalize", "formal"),
            ("electriciti", "electr"),
            ("electrical", "electr"),
            ("hopeful", "hope"),
            ("goodness", "good"),
            ("allowance", "allow"),
            ("inference", "infer"),
            ("adjustable", "adjust"),
            ("defensible", "defens"),
            ("irritant", "irrit"),
            ("replacement", "replac"),
            ("adjustment", "adjust"),
            ("dependent", "depend"),
            ("adoption", "adopt"),
            ("communism", "commun"),
            ("activate", "activ"),
            ("homologi", "homolog"),
            ("effective", "effect"),
            ("probate", "probat"),
            ("rate", "rate"),
            ("cease", "ceas"),
            ("controll", "control"),
            ("roll", "roll"),
            ("ion", "ion"),
            ("running", "run"),
            ("runs", "run"),
            ("runner", "runner"),
            ("quickly", "quickli"),
            ("was", "wa"),
            ("this", "thi"),
            ("pony", "poni"),
        ];
        for (word, expected) in cases {
            assert_eq!(porter_stem(word), expected, "stem({word})");
        }
    }

    #[test]
    fn porter_leaves_short_and_non_ascii_tokens_alone() {
        assert_eq!(porter_stem("a"), "a");
        assert_eq!(porter_stem("he"), "he");
        assert_eq!(porter_stem("THE"), "the");
        assert_eq!(porter_stem("naïve"), "naïve");
        assert_eq!(porter_stem("don't"), "don't");
        assert_eq!(porter_stem("42"), "42");
    }

    #[test]
    fn novel_words_identity_source_gives_zero() {
        let n = novel_word_stats("The cat sat.", "The cat sat.").unwrap();
        assert_eq!(n.count, 0);
        assert_eq!(n.ratio, 0.0);
    }

    #[test]
    fn novel_words_stemming_sensitive_case() {
        let n = novel_word_stats("The runner was running fast", "He runs quickly").unwrap();
        assert_eq!(n.count, 2);
        assert_eq!(n.unique_response_stems, 3);
        assert!((n.ratio - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn novel_words_empty_response_is_undefined() {
        assert_eq!(novel_word_stats("some source", ""), None);
        assert_eq!(novel_word_stats("some source", "—!—"), None);
    }
}
