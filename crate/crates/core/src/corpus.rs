//! Utterance-level transcripts: JSON Lines loading and saving, tokenization
//! and deterministic train/validation/test assignment.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "AD")]
    Ad,
    Control,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Ad => "AD",
            Label::Control => "Control",
        }
    }

    /// Class index used by classifiers; AD is the positive class (1).
    pub fn index(self) -> usize {
        match self {
            Label::Ad => 1,
            Label::Control => 0,
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "AD" => Ok(Label::Ad),
            "Control" => Ok(Label::Control),
            other => Err(Error::Validation(format!("unknown label {other:?}"))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Validation(format!("unknown split {other:?}"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub speaker_id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub label: Label,
    pub split: Option<Split>,
    pub parse: Option<String>,
}

impl Utterance {
    /// Builds an utterance, deriving `tokens` from `text`.
    pub fn new(
        id: impl Into<String>,
        speaker_id: impl Into<String>,
        text: impl Into<String>,
        label: Label,
    ) -> Self {
        let text = text.into();
        Utterance {
            id: id.into(),
            speaker_id: speaker_id.into(),
            tokens: tokenize(&text),
            text,
            label,
            split: None,
            parse: None,
        }
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = Some(split);
        self
    }

    pub fn with_parse(mut self, parse: impl Into<String>) -> Self {
        self.parse = Some(parse.into());
        self
    }
}

/// On-disk record. Label and split stay strings here so that unknown values
/// surface as validation errors rather than JSON errors.
#[derive(Debug, Serialize, Deserialize)]
struct Record {
    id: String,
    speaker: String,
    text: String,
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parse: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    utterances: Vec<Utterance>,
}

impl Corpus {
    pub fn new(utterances: Vec<Utterance>) -> Result<Self> {
        let mut seen = HashSet::new();
        for u in &utterances {
            if u.id.is_empty() {
                return Err(Error::Validation("utterance id is empty".into()));
            }
            if !seen.insert(u.id.as_str()) {
                return Err(Error::Validation(format!("duplicate utterance id {:?}", u.id)));
            }
        }
        Ok(Corpus { utterances })
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Utterance> {
        self.utterances.iter().find(|u| u.id == id)
    }

    pub fn index_by_id(&self) -> HashMap<&str, usize> {
        self.utterances
            .iter()
            .enumerate()
            .map(|(i, u)| (u.id.as_str(), i))
            .collect()
    }

    /// Count of utterances per split; untagged utterances are not counted.
    pub fn split_counts(&self) -> BTreeMap<Split, usize> {
        let mut counts = BTreeMap::new();
        for split in Split::ALL {
            counts.insert(split, 0);
        }
        for u in &self.utterances {
            if let Some(s) = u.split {
                *counts.entry(s).or_default() += 1;
            }
        }
        counts
    }

    pub fn is_fully_split(&self) -> bool {
        self.utterances.iter().all(|u| u.split.is_some())
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &Utterance> {
        self.utterances
            .iter()
            .filter(move |u| u.split == Some(split))
    }

    /// Corpus with every utterance text replaced, keeping ids, labels and splits.
    pub fn map_text<F>(&self, mut f: F) -> Corpus
    where
        F: FnMut(&Utterance) -> String,
    {
        let utterances = self
            .utterances
            .iter()
            .map(|u| {
                let text = f(u);
                Utterance {
                    tokens: tokenize(&text),
                    text,
                    ..u.clone()
                }
            })
            .collect();
        Corpus { utterances }
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file))
}

pub fn read_corpus<R: Read>(reader: R) -> Result<Corpus> {
    let reader = BufReader::new(reader);
    let mut utterances = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Record {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| Error::Record {
            line: line_no,
            message: e.to_string(),
        })?;
        let at_line = |e: Error| Error::Record {
            line: line_no,
            message: e.to_string(),
        };
        if record.id.is_empty() {
            return Err(at_line(Error::Validation("utterance id is empty".into())));
        }
        if !seen.insert(record.id.clone()) {
            return Err(at_line(Error::Validation(format!(
                "duplicate utterance id {:?}",
                record.id
            ))));
        }
        let label = record.label.parse::<Label>().map_err(at_line)?;
        let split = record
            .split
            .as_deref()
            .map(str::parse::<Split>)
            .transpose()
            .map_err(at_line)?;
        let mut u = Utterance::new(record.id, record.speaker, record.text, label);
        u.split = split;
        u.parse = record.parse;
        utterances.push(u);
    }
    Ok(Corpus { utterances })
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_corpus(corpus, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_corpus<W: Write>(corpus: &Corpus, mut w: W) -> std::io::Result<()> {
    for u in &corpus.utterances {
        let record = Record {
            id: u.id.clone(),
            speaker: u.speaker_id.clone(),
            text: u.text.clone(),
            label: u.label.as_str().to_string(),
            split: u.split.map(|s| s.as_str().to_string()),
            parse: u.parse.clone(),
        };
        serde_json::to_writer(&mut w, &record)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

const DETACHED_PUNCT: [char; 6] = ['.', ',', '?', '!', ';', ':'];

/// Lowercases, splits on whitespace, detaches `. , ? ! ; :` as their own
/// tokens and splits apostrophe clitics off before the apostrophe.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let lower = chunk.to_lowercase();
        let mut current = String::new();
        for c in lower.chars() {
            if DETACHED_PUNCT.contains(&c) {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(c.to_string());
            } else if c == '\'' && !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
                current.push(c);
            } else {
                current.push(c);
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let r = SplitRatios { train, val, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(Error::Validation(format!(
                "split ratios must be positive, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "split ratios must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.82,
            val: 0.09,
            test: 0.09,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitOptions {
    /// Keep every speaker's utterances in a single split.
    pub by_speaker: bool,
}

/// Target sizes: floor allocation for val and test, remainder to train.
pub fn split_sizes(n: usize, ratios: &SplitRatios) -> (usize, usize, usize) {
    let floor = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
    let val = floor(ratios.val);
    let test = floor(ratios.test);
    (n - val - test, val, test)
}

/// Tags every utterance with a split.
///
/// A corpus whose records already all carry a split is validated and
/// returned unchanged. Otherwise each utterance (or speaker, with
/// `by_speaker`) is ranked by a hash of its id and the seed, and the ranking
/// is cut into val, test and train in that order, so a tag never depends on
/// input order.
pub fn assign_splits(
    corpus: &Corpus,
    ratios: SplitRatios,
    seed: u64,
    options: SplitOptions,
) -> Result<Corpus> {
    ratios.validate()?;
    let tagged = corpus.utterances.iter().filter(|u| u.split.is_some()).count();
    if tagged == corpus.len() {
        return Ok(corpus.clone());
    }
    if tagged > 0 {
        return Err(Error::Validation(format!(
            "{tagged} of {} utterances carry a split tag; tag all or none",
            corpus.len()
        )));
    }

    let (_, n_val, n_test) = split_sizes(corpus.len(), &ratios);
    let mut out = corpus.clone();

    if options.by_speaker {
        let mut speakers: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, u) in corpus.utterances.iter().enumerate() {
            speakers.entry(u.speaker_id.as_str()).or_default().push(i);
        }
        let mut order: Vec<(u64, &str)> = speakers
            .keys()
            .map(|s| (derive_seed(seed, &["speaker", s]), *s))
            .collect();
        order.sort();
        let (mut val, mut test) = (0usize, 0usize);
        for (_, speaker) in order {
            let members = &speakers[speaker];
            let split = if val < n_val {
                val += members.len();
                Split::Val
            } else if test < n_test {
                test += members.len();
                Split::Test
            } else {
                Split::Train
            };
            for &i in members {
                out.utterances[i].split = Some(split);
            }
        }
    } else {
        let mut order: Vec<(u64, usize)> = corpus
            .utterances
            .iter()
            .enumerate()
            .map(|(i, u)| (derive_seed(seed, &["utterance", &u.id]), i))
            .collect();
        // ids are unique, so ties on the hash fall back to the id itself
        order.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then_with(|| corpus.utterances[a.1].id.cmp(&corpus.utterances[b.1].id))
        });
        for (rank, (_, i)) in order.into_iter().enumerate() {
            let split = if rank < n_val {
                Split::Val
            } else if rank < n_val + n_test {
                Split::Test
            } else {
                Split::Train
            };
            out.utterances[i].split = Some(split);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(toks("The boy falls."), ["the", "boy", "falls", "."]);
        assert!(toks("").is_empty());
        assert_eq!(toks("it's overflowing!"), ["it", "'s", "overflowing", "!"]);
        assert_eq!(toks("  a ,b;c  "), ["a", ",", "b", ";", "c"]);
        assert_eq!(toks("'cause"), ["'cause"]);
    }

    #[test]
    fn loads_single_record() {
        let c = read_corpus(
            r#"{"id":"u1","speaker":"s1","text":"The boy falls.","label":"AD"}"#.as_bytes(),
        )
        .unwrap();
        assert_eq!(c.len(), 1);
        let u = &c.utterances()[0];
        assert_eq!(u.tokens, ["the", "boy", "falls", "."]);
        assert_eq!(u.label, Label::Ad);
        assert_eq!(u.split, None);
    }

    #[test]
    fn empty_file_gives_empty_corpus() {
        assert!(read_corpus("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let data = concat!(
            r#"{"id":"u1","speaker":"s1","text":"a","label":"AD"}"#,
            "\n",
            r#"{"id":"u1","speaker":"s2","text":"b","label":"Control"}"#
        );
        let err = read_corpus(data.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Record { line: 2, .. }), "{err}");
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn unknown_label_and_malformed_lines_carry_line_numbers() {
        let bad_label = r#"{"id":"u1","speaker":"s1","text":"a","label":"MCI"}"#;
        let err = read_corpus(bad_label.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("unknown label"), "{err}");

        let data = format!(
            "{}\n{{not json\n",
            r#"{"id":"u1","speaker":"s1","text":"a","label":"AD"}"#
        );
        let err = read_corpus(data.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Record { line: 2, .. }), "{err}");
    }

    fn corpus_of(n: usize) -> Corpus {
        Corpus::new(
            (0..n)
                .map(|i| Utterance::new(format!("u{i}"), format!("s{}", i % 7), "x", Label::Ad))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn split_counts_use_floor_allocation() {
        let c = assign_splits(&corpus_of(100), SplitRatios::default(), 3, SplitOptions::default())
            .unwrap();
        let counts = c.split_counts();
        assert_eq!(counts[&Split::Train], 82);
        assert_eq!(counts[&Split::Val], 9);
        assert_eq!(counts[&Split::Test], 9);
    }

    #[test]
    fn split_assignment_is_deterministic() {
        let a = assign_splits(&corpus_of(10), SplitRatios::default(), 7, SplitOptions::default())
            .unwrap();
        let b = assign_splits(&corpus_of(10), SplitRatios::default(), 7, SplitOptions::default())
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pretagged_corpus_passes_through() {
        // per-split sizes of the reference benchmark; they total 5107
        let utterances = (0..4269 + 429 + 409)
            .map(|i| {
                let split = if i < 4269 {
                    Split::Train
                } else if i < 4269 + 429 {
                    Split::Val
                } else {
                    Split::Test
                };
                Utterance::new(format!("u{i}"), "s", "x", Label::Control).with_split(split)
            })
            .collect();
        let c = Corpus::new(utterances).unwrap();
        let out = assign_splits(&c, SplitRatios::default(), 1, SplitOptions::default()).unwrap();
        let counts = out.split_counts();
        assert_eq!(
            (counts[&Split::Train], counts[&Split::Val], counts[&Split::Test]),
            (4269, 429, 409)
        );
        assert_eq!(out, c);
    }

    #[test]
    fn partially_tagged_corpus_is_rejected() {
        let c = Corpus::new(vec![
            Utterance::new("a", "s", "x", Label::Ad).with_split(Split::Train),
            Utterance::new("b", "s", "x", Label::Ad),
        ])
        .unwrap();
        assert!(assign_splits(&c, SplitRatios::default(), 1, SplitOptions::default()).is_err());
    }

    #[test]
    fn ratios_must_sum_to_one() {
        assert!(SplitRatios::new(0.8, 0.1, 0.05).is_err());
        assert!(SplitRatios::new(0.8, 0.2, 0.0).is_err());
        let bad = SplitRatios {
            train: 0.5,
            val: 0.5,
            test: 0.5,
        };
        assert!(assign_splits(&corpus_of(3), bad, 1, SplitOptions::default()).is_err());
    }

    #[test]
    fn speaker_level_splits_keep_speakers_together() {
        let c = assign_splits(
            &corpus_of(200),
            SplitRatios::default(),
            11,
            SplitOptions { by_speaker: true },
        )
        .unwrap();
        let mut by_speaker: HashMap<&str, HashSet<Split>> = HashMap::new();
        for u in c.utterances() {
            by_speaker.entry(&u.speaker_id).or_default().insert(u.split.unwrap());
        }
        assert!(by_speaker.values().all(|s| s.len() == 1));
        assert!(c.is_fully_split());
    }

    #[test]
    fn save_then_load_is_identity() {
        let c = Corpus::new(vec![
            Utterance::new("u1", "s1", "It's a cookie jar!", Label::Ad)
                .with_split(Split::Test)
                .with_parse("(S (NP (NN it)) (VP (VBZ 's)))"),
            Utterance::new("u2", "s2", "The \"mother\" dries dishes.", Label::Control),
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_corpus(&c, &mut buf).unwrap();
        assert_eq!(read_corpus(buf.as_slice()).unwrap(), c);
    }
}
