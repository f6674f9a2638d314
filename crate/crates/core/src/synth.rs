//! Synthetic corpora with gold parses and synthetic embedding stores, for
//! tests, benchmarks and dry runs without licensed data.
//!
//! Sentences come from a small phrase-structure grammar over a fixed
//! vocabulary that separates words matching the bundled ICU list from
//! words that do not.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Label, Utterance};
use crate::embio::EmbeddingStore;
use crate::error::{Error, Result};
use crate::features::IcuLexicon;
use crate::parsetree::ParseTree;
use crate::seed::rng_for;

const ICU_NOUNS: &[&str] = &[
    "boy", "girl", "mother", "cookie", "cookies", "jar", "stool", "sink", "water", "window",
    "plate", "dish", "dishes", "curtain", "cupboard", "kitchen", "floor", "towel", "cup",
];
const OTHER_NOUNS: &[&str] = &[
    "cat", "dog", "car", "book", "lamp", "hat", "shoe", "ball", "box", "pen", "phone", "bird",
    "house", "desk", "clock", "door", "apple", "bag", "bed", "boat", "hill", "picture",
];
/// (third person singular, present participle)
const ICU_VERBS: &[(&str, &str)] = &[
    ("takes", "taking"),
    ("steals", "stealing"),
    ("washes", "washing"),
    ("spills", "spilling"),
    ("ignores", "ignoring"),
    ("notices", "noticing"),
];
const OTHER_VERBS: &[(&str, &str)] = &[
    ("sees", "seeing"),
    ("likes", "liking"),
    ("holds", "holding"),
    ("wants", "wanting"),
    ("finds", "finding"),
    ("gets", "getting"),
    ("reads", "reading"),
    ("needs", "needing"),
];
const INTRANSITIVE: &[(&str, &str)] = &[("runs", "running"), ("waits", "waiting"), ("laughs", "laughing")];
const ADJECTIVES: &[&str] = &["big", "small", "red", "old", "new", "tall", "happy", "little", "green"];
const ADVERBS: &[&str] = &["quickly", "slowly", "now", "again", "there"];
const PREPOSITIONS: &[&str] = &["on", "in", "near", "under", "with", "by"];
const DETERMINERS: &[&str] = &["the", "a", "this", "that"];
const PRONOUNS: &[&str] = &["she", "he", "it"];

/// Every content word the grammar can emit, with whether it is meant to
/// match the bundled ICU list.
pub fn synthetic_vocabulary() -> Vec<(&'static str, bool)> {
    let mut out: Vec<(&str, bool)> = Vec::new();
    out.extend(ICU_NOUNS.iter().map(|w| (*w, true)));
    out.extend(OTHER_NOUNS.iter().map(|w| (*w, false)));
    for (a, b) in ICU_VERBS {
        out.push((a, true));
        out.push((b, true));
    }
    for (a, b) in OTHER_VERBS.iter().chain(INTRANSITIVE) {
        out.push((a, false));
        out.push((b, false));
    }
    for list in [ADJECTIVES, ADVERBS, PREPOSITIONS, DETERMINERS, PRONOUNS] {
        out.extend(list.iter().map(|w| (*w, false)));
    }
    out.extend([("is", false), ("and", false)]);
    out
}

/// How utterance labels relate to the text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelRule {
    /// Control utterances contain at least one ICU word, AD utterances none.
    IcuPresence,
    /// Labels are fair coin flips independent of the text.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub n_speakers: usize,
    pub seed: u64,
    pub labels: LabelRule,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 500,
            n_speakers: 50,
            seed: 0,
            labels: LabelRule::Random,
        }
    }
}

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    icu: bool,
}

fn leaf(label: &str, word: &str) -> ParseTree {
    ParseTree::preterminal(label, word).expect("grammar words are atoms")
}

fn node(label: &str, children: Vec<ParseTree>) -> ParseTree {
    ParseTree::node(label, children).expect("grammar nodes have children")
}

impl Gen<'_> {
    fn pick<'w>(&mut self, words: &[&'w str]) -> &'w str {
        words.choose(self.rng).expect("nonempty word list")
    }

    fn noun(&mut self) -> &'static str {
        if self.icu && self.rng.gen_bool(0.5) {
            self.pick(ICU_NOUNS)
        } else {
            self.pick(OTHER_NOUNS)
        }
    }

    fn verb(&mut self) -> (&'static str, &'static str) {
        if self.icu && self.rng.gen_bool(0.4) {
            *ICU_VERBS.choose(self.rng).expect("nonempty")
        } else {
            *OTHER_VERBS.choose(self.rng).expect("nonempty")
        }
    }

    fn np(&mut self, depth: usize) -> ParseTree {
        let noun_label = |n: &str| if n.ends_with('s') { "NNS" } else { "NN" };
        match self.rng.gen_range(0..10) {
            0 | 1 => node("NP", vec![leaf("PRP", self.pick(PRONOUNS))]),
            2 | 3 => {
                let (d, a, n) = (self.pick(DETERMINERS), self.pick(ADJECTIVES), self.noun());
                node("NP", vec![leaf("DT", d), node("ADJP", vec![leaf("JJ", a)]), leaf(noun_label(n), n)])
            }
            4 if depth < 2 => {
                let inner = self.np(depth + 1);
                let pp = self.pp(depth + 1);
                node("NP", vec![inner, pp])
            }
            _ => {
                let (d, n) = (self.pick(DETERMINERS), self.noun());
                node("NP", vec![leaf("DT", d), leaf(noun_label(n), n)])
            }
        }
    }

    fn pp(&mut self, depth: usize) -> ParseTree {
        let p = self.pick(PREPOSITIONS);
        let obj = self.np(depth + 1);
        node("PP", vec![leaf("IN", p), obj])
    }

    fn vp(&mut self, depth: usize) -> ParseTree {
        match self.rng.gen_range(0..8) {
            0 => {
                let (v, _) = *INTRANSITIVE.choose(self.rng).expect("nonempty");
                let adv = self.pick(ADVERBS);
                node("VP", vec![leaf("VBZ", v), node("ADVP", vec![leaf("RB", adv)])])
            }
            1 => {
                let a = self.pick(ADJECTIVES);
                node("VP", vec![leaf("VBZ", "is"), node("ADJP", vec![leaf("JJ", a)])])
            }
            2 | 3 => {
                let (_, ing) = self.verb();
                let obj = self.np(depth + 1);
                let inner = node("VP", vec![leaf("VBG", ing), obj]);
                node("VP", vec![leaf("VBZ", "is"), inner])
            }
            4 if depth < 2 => {
                let (v, _) = self.verb();
                let obj = self.np(depth + 1);
                let pp = self.pp(depth + 1);
                node("VP", vec![leaf("VBZ", v), obj, pp])
            }
            _ => {
                let (v, _) = self.verb();
                let obj = self.np(depth + 1);
                node("VP", vec![leaf("VBZ", v), obj])
            }
        }
    }

    fn clause(&mut self) -> ParseTree {
        let subj = self.np(0);
        let pred = self.vp(0);
        node("S", vec![subj, pred])
    }

    fn sentence(&mut self) -> ParseTree {
        let period = || leaf(".", ".");
        let s = match self.rng.gen_range(0..10) {
            0 => {
                let a = self.clause();
                let b = self.clause();
                node("S", vec![a, leaf("CC", "and"), b, period()])
            }
            1 => {
                let adv = self.pick(ADVERBS);
                let subj = self.np(0);
                let pred = self.vp(0);
                node("S", vec![node("ADVP", vec![leaf("RB", adv)]), subj, pred, period()])
            }
            2 => self.clause(),
            3 => {
                let np = self.np(0);
                node("FRAG", vec![np, period()])
            }
            _ => {
                let subj = self.np(0);
                let pred = self.vp(0);
                node("S", vec![subj, pred, period()])
            }
        };
        node("ROOT", vec![s])
    }
}

/// Generates `config.n` utterances with parses and no split tags.
pub fn synth_corpus(config: &SynthConfig) -> Result<Corpus> {
    if config.n_speakers == 0 {
        return Err(Error::Validation("need at least one speaker".into()));
    }
    let lexicon = IcuLexicon::bundled();
    let mut utterances = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let id = format!("syn-{i:05}");
        let mut rng = rng_for(config.seed, &["synth", &id]);
        let label = if rng.gen_bool(0.5) { Label::Ad } else { Label::Control };
        let want_icu = match config.labels {
            LabelRule::IcuPresence => Some(label == Label::Control),
            LabelRule::Random => None,
        };
        let tree = loop {
            let mut g = Gen {
                rng: &mut rng,
                icu: want_icu != Some(false),
            };
            let tree = g.sentence();
            let has_icu = lexicon.icu_features(&tree.leaves()).0;
            if want_icu.is_none_or(|w| w == has_icu) {
                break tree;
            }
        };
        let text = tree.leaves().join(" ");
        let speaker = format!("spk{:03}", i % config.n_speakers);
        utterances.push(Utterance::new(id, speaker, text, label).with_parse(tree.serialize()));
    }
    Corpus::new(utterances)
}

fn noise_row(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect()
}

/// Uniform noise in [-1, 1). Each row depends only on the seed, the layer
/// and its id, never on labels or row order.
pub fn noise_embeddings(ids: &[String], n_layers: usize, dim: usize, seed: u64) -> Result<EmbeddingStore> {
    let layers = (1..=n_layers)
        .map(|l| {
            let l = l.to_string();
            ids.iter()
                .map(|id| noise_row(&mut rng_for(seed, &["noise", &l, id]), dim))
                .collect()
        })
        .collect();
    EmbeddingStore::from_rows(ids.to_vec(), layers)
}

/// Noise store whose coordinate 0 holds the row's label verbatim on every
/// layer.
pub fn label_embeddings(
    ids: &[String],
    labels: &[usize],
    n_layers: usize,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingStore> {
    if ids.len() != labels.len() {
        return Err(Error::Dimension {
            expected: ids.len(),
            got: labels.len(),
        });
    }
    if dim == 0 {
        return Err(Error::Validation("label embeddings need dim >= 1".into()));
    }
    let mut store_rows = Vec::with_capacity(n_layers);
    for l in 1..=n_layers {
        let l = l.to_string();
        let rows = ids
            .iter()
            .zip(labels)
            .map(|(id, &y)| {
                let mut row = noise_row(&mut rng_for(seed, &["label", &l, id]), dim);
                row[0] = y as f32;
                row
            })
            .collect();
        store_rows.push(rows);
    }
    EmbeddingStore::from_rows(ids.to_vec(), store_rows)
}

/// Store for dry runs: coordinate 0 carries the token count and coordinate
/// 1 the parse depth, each with noise whose size changes across layers, so
/// different layers win different probes. The remaining coordinates are
/// noise. Needs `dim >= 2` and a parse for every utterance.
pub fn structured_embeddings(corpus: &Corpus, n_layers: usize, dim: usize, seed: u64) -> Result<EmbeddingStore> {
    if dim < 2 {
        return Err(Error::Validation("structured embeddings need dim >= 2".into()));
    }
    let trees = crate::features::parse_all(corpus)?;
    let mut layers = Vec::with_capacity(n_layers);
    for l in 1..=n_layers {
        let t = l as f32 / n_layers.max(1) as f32;
        let ls = l.to_string();
        let rows = corpus
            .utterances()
            .iter()
            .zip(&trees)
            .map(|(u, tree)| {
                let mut rng = rng_for(seed, &["structured", &ls, &u.id]);
                let mut row = noise_row(&mut rng, dim);
                row[0] = u.tokens.len() as f32 + row[0] * 4.0 * t;
                row[1] = tree.depth() as f32 + row[1] * 4.0 * (1.0 - t);
                row
            })
            .collect();
        layers.push(rows);
    }
    let ids = corpus.utterances().iter().map(|u| u.id.clone()).collect();
    EmbeddingStore::from_rows(ids, layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parsetree::parse_ptb;

    #[test]
    fn vocabulary_partition_matches_the_bundled_list() {
        let lex = IcuLexicon::bundled();
        for (w, icu) in synthetic_vocabulary() {
            assert_eq!(lex.matches(w), icu, "{w}");
        }
    }

    #[test]
    fn corpus_is_deterministic_and_parsed() {
        let cfg = SynthConfig {
            n: 200,
            ..SynthConfig::default()
        };
        let a = synth_corpus(&cfg).unwrap();
        assert_eq!(a, synth_corpus(&cfg).unwrap());
        for u in a.utterances() {
            let t = parse_ptb(u.parse.as_deref().unwrap()).unwrap();
            assert_eq!(t.leaves(), u.tokens);
        }
        let other = synth_corpus(&SynthConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn icu_rule_ties_labels_to_icu_words() {
        let c = synth_corpus(&SynthConfig {
            n: 300,
            labels: LabelRule::IcuPresence,
            ..SynthConfig::default()
        })
        .unwrap();
        let lex = IcuLexicon::bundled();
        let mut n_ad = 0;
        for u in c.utterances() {
            let present = lex.icu_features(&u.tokens).0;
            assert_eq!(present, u.label == Label::Control, "{}", u.text);
            n_ad += (u.label == Label::Ad) as usize;
        }
        assert!((100..200).contains(&n_ad));
    }

    #[test]
    fn stores_have_requested_shape() {
        let ids: Vec<String> = (0..5).map(|i| format!("x{i}")).collect();
        let s = noise_embeddings(&ids, 3, 4, 1).unwrap();
        assert_eq!((s.n_layers(), s.n_rows(), s.dim()), (3, 5, 4));
        let shuffled: Vec<String> = ids.iter().rev().cloned().collect();
        let t = noise_embeddings(&shuffled, 3, 4, 1).unwrap();
        assert_eq!(s.row(2, 0), t.row(2, 4));
        let y = [0, 1, 2, 3, 4];
        let l = label_embeddings(&ids, &y, 2, 3, 1).unwrap();
        assert_eq!(l.row(2, 3)[0], 3.0);
        let c = synth_corpus(&SynthConfig {
            n: 10,
            ..SynthConfig::default()
        })
        .unwrap();
        let st = structured_embeddings(&c, 4, 6, 0).unwrap();
        assert_eq!((st.n_layers(), st.n_rows(), st.dim()), (4, 10, 6));
    }
}
