//! The 119-dimensional hand-crafted feature set.
//!
//! Layout, in order:
//!
//! | slots    | count | content                                            |
//! |----------|-------|----------------------------------------------------|
//! | 0..103   | 103   | proportion of each vocabulary production rule      |
//! | 103      | 1     | parse-tree depth                                   |
//! | 104..117 | 13    | phrasal ratios (NP, VP, PP x3; ADJP, ADVP x2)      |
//! | 117..119 | 2     | information-content-unit presence and count        |

mod icu;
mod standardize;
mod table;
mod vocab;

pub use icu::{bundled_words, stem, IcuLexicon};
pub use standardize::Standardizer;
pub use table::{parse_all, read_feature_csv, write_feature_csv, FeatureTable};
pub use vocab::{build_rule_vocabulary, RuleSlot, RuleVocabulary};

use std::collections::HashMap;

use crate::corpus::Utterance;
use crate::error::{Error, Result};
use crate::parsetree::{ParseTree, ProductionRule};

pub const N_RULES: usize = 103;
pub const N_SYNTACTIC_TREE: usize = N_RULES + 1;
pub const N_PHRASAL: usize = 13;
pub const N_WORD_CONTENT: usize = 2;
pub const N_FEATURES: usize = N_SYNTACTIC_TREE + N_PHRASAL + N_WORD_CONTENT;

/// Phrase labels with the full (coverage, mean length, count) triple.
const FULL_PHRASES: [&str; 3] = ["NP", "VP", "PP"];
/// Phrase labels with (coverage, count) only.
const SHORT_PHRASES: [&str; 2] = ["ADJP", "ADVP"];

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn rule_proportions(&self) -> &[f64] {
        &self.values[..N_RULES]
    }

    pub fn depth(&self) -> f64 {
        self.values[N_RULES]
    }

    pub fn phrasal(&self) -> &[f64] {
        &self.values[N_SYNTACTIC_TREE..N_SYNTACTIC_TREE + N_PHRASAL]
    }

    pub fn word_content(&self) -> &[f64] {
        &self.values[N_SYNTACTIC_TREE + N_PHRASAL..]
    }
}

/// Column names for a vocabulary; stable for a given vocabulary.
pub fn feature_schema(vocab: &RuleVocabulary) -> Vec<String> {
    let mut names: Vec<String> = vocab.rules().iter().map(RuleSlot::feature_name).collect();
    names.push("tree_depth".to_string());
    for p in FULL_PHRASES {
        names.push(format!("{p}_coverage"));
        names.push(format!("{p}_mean_length"));
        names.push(format!("{p}_count"));
    }
    for p in SHORT_PHRASES {
        names.push(format!("{p}_coverage"));
        names.push(format!("{p}_count"));
    }
    names.push("icu_present".to_string());
    names.push("icu_count".to_string());
    debug_assert_eq!(names.len(), N_FEATURES);
    names
}

/// Proportion of every distinct rule among the tree's productions. Empty
/// when the tree has no productions.
pub fn rule_distribution(tree: &ParseTree) -> HashMap<ProductionRule, f64> {
    let productions = tree.productions();
    let total = productions.len() as f64;
    let mut counts: HashMap<ProductionRule, usize> = HashMap::new();
    for p in productions {
        *counts.entry(p).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(rule, c)| (rule, c as f64 / total))
        .collect()
}

#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    vocab: RuleVocabulary,
    lexicon: IcuLexicon,
    schema: Vec<String>,
}

impl FeatureExtractor {
    pub fn new(vocab: RuleVocabulary, lexicon: IcuLexicon) -> Result<Self> {
        if vocab.len() != N_RULES {
            return Err(Error::Dimension {
                expected: N_RULES,
                got: vocab.len(),
            });
        }
        let schema = feature_schema(&vocab);
        Ok(FeatureExtractor {
            vocab,
            lexicon,
            schema,
        })
    }

    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    pub fn vocabulary(&self) -> &RuleVocabulary {
        &self.vocab
    }

    pub fn lexicon(&self) -> &IcuLexicon {
        &self.lexicon
    }

    pub fn extract(&self, utterance: &Utterance, tree: &ParseTree) -> FeatureVector {
        extract_features(utterance, tree, &self.vocab, &self.lexicon)
    }
}

/// Feature vector for one utterance and its parse.
///
/// Panics if the vocabulary does not hold exactly [`N_RULES`] slots; build
/// vocabularies with `k = N_RULES` or go through [`FeatureExtractor`].
pub fn extract_features(
    utterance: &Utterance,
    tree: &ParseTree,
    vocab: &RuleVocabulary,
    lexicon: &IcuLexicon,
) -> FeatureVector {
    assert_eq!(vocab.len(), N_RULES, "rule vocabulary must have {N_RULES} slots");
    let mut values = Vec::with_capacity(N_FEATURES);

    let productions = tree.productions();
    let total = productions.len();
    let mut counts: HashMap<&ProductionRule, usize> = HashMap::new();
    for p in &productions {
        *counts.entry(p).or_default() += 1;
    }
    for slot in vocab.rules() {
        let v = match slot {
            RuleSlot::Rule(rule) if total > 0 => {
                counts.get(rule).copied().unwrap_or(0) as f64 / total as f64
            }
            _ => 0.0,
        };
        values.push(v);
    }

    values.push(tree.depth() as f64);

    let n_leaves = tree.n_leaves() as f64;
    for p in FULL_PHRASES {
        let s = tree.phrase_stats(p);
        values.push(s.token_coverage as f64 / n_leaves);
        values.push(s.mean_length);
        values.push(s.count as f64);
    }
    for p in SHORT_PHRASES {
        let s = tree.phrase_stats(p);
        values.push(s.token_coverage as f64 / n_leaves);
        values.push(s.count as f64);
    }

    let (present, count) = lexicon.icu_features(&utterance.tokens);
    values.push(if present { 1.0 } else { 0.0 });
    values.push(count as f64);

    debug_assert_eq!(values.len(), N_FEATURES);
    FeatureVector { values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use crate::parsetree::parse_ptb;

    const BOY: &str = "(S (NP (DT the) (NN boy)) (VP (VBZ falls)))";

    fn two_rule_vocab() -> RuleVocabulary {
        RuleVocabulary::from_rules(
            vec![
                ProductionRule::new("S", &["NP", "VP"]),
                ProductionRule::new("NP", &["DT", "NN"]),
            ],
            N_RULES,
        )
        .unwrap()
    }

    #[test]
    fn schema_partition_is_104_13_2() {
        let schema = feature_schema(&two_rule_vocab());
        assert_eq!(schema.len(), 119);
        assert_eq!(N_SYNTACTIC_TREE, 104);
        assert_eq!(N_PHRASAL, 13);
        assert_eq!(N_WORD_CONTENT, 2);
        assert_eq!(schema[103], "tree_depth");
        assert_eq!(schema[104], "NP_coverage");
        assert_eq!(schema[116], "ADVP_count");
        assert_eq!(schema[117], "icu_present");
        assert_eq!(schema[118], "icu_count");
    }

    #[test]
    fn worked_example() {
        let vocab = two_rule_vocab();
        let u = Utterance::new("u", "s", "the boy falls .", Label::Ad);
        let fv = extract_features(&u, &parse_ptb(BOY).unwrap(), &vocab, &IcuLexicon::bundled());
        assert_eq!(fv.values.len(), 119);
        assert_eq!(vocab.rules()[0].feature_name(), "rule:S->NP VP");
        assert_eq!(vocab.rules()[1].feature_name(), "rule:NP->DT NN");
        assert_eq!(fv.rule_proportions()[0], 1.0 / 3.0);
        assert_eq!(fv.rule_proportions()[1], 1.0 / 3.0);
        assert!(fv.rule_proportions()[2..].iter().all(|&v| v == 0.0));
        assert_eq!(fv.depth(), 3.0);
        // NP: coverage 2/3, mean length 2, count 1; VP: 1/3, 1, 1; PP: zeros
        assert_eq!(
            &fv.phrasal()[..9],
            &[2.0 / 3.0, 2.0, 1.0, 1.0 / 3.0, 1.0, 1.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(&fv.phrasal()[9..], &[0.0, 0.0, 0.0, 0.0]);
        // "boy" and "falls" (stem of "fall") are both content units
        assert_eq!(fv.word_content(), &[1.0, 2.0]);
    }

    #[test]
    fn preterminal_tree_has_no_rule_mass() {
        let vocab = two_rule_vocab();
        let u = Utterance::new("u", "s", "dog", Label::Control);
        let fv = extract_features(&u, &parse_ptb("(NN dog)").unwrap(), &vocab, &IcuLexicon::bundled());
        assert!(fv.rule_proportions().iter().all(|&v| v == 0.0));
        assert_eq!(fv.depth(), 1.0);
        assert_eq!(fv.word_content(), &[0.0, 0.0]);
    }

    #[test]
    fn distribution_sums_to_one() {
        let tree = parse_ptb("(S (NP (NP (DT a) (NN b)) (PP (IN of) (NP (NN c)))) (VP (VB d)))").unwrap();
        let total: f64 = rule_distribution(&tree).values().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(rule_distribution(&parse_ptb("(NN x)").unwrap()).is_empty());
    }
}
