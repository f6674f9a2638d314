use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parsetree::{ParseTree, ProductionRule};
use crate::seed::sha256_hex;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleSlot {
    Rule(ProductionRule),
    /// Filler for vocabularies learned from fewer distinct rules than slots;
    /// always scores 0.
    Placeholder(usize),
}

impl RuleSlot {
    pub fn feature_name(&self) -> String {
        match self {
            RuleSlot::Rule(r) => format!("rule:{r}"),
            RuleSlot::Placeholder(i) => format!("rule:<unused-{i:03}>"),
        }
    }
}

/// Ordered production rules whose proportions form the first block of the
/// feature vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleVocabulary {
    rules: Vec<RuleSlot>,
    /// Hash of the trees the vocabulary was learned from.
    source: String,
}

impl RuleVocabulary {
    /// Vocabulary over an explicit rule list, padded with placeholders to `k`.
    pub fn from_rules(rules: Vec<ProductionRule>, k: usize) -> Result<Self> {
        if rules.len() > k {
            return Err(Error::Validation(format!(
                "{} rules do not fit in {k} slots",
                rules.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for r in &rules {
            if !seen.insert(r) {
                return Err(Error::Validation(format!("duplicate rule {r}")));
            }
        }
        let source = sha256_hex(
            rules
                .iter()
                .map(|r| r.key())
                .collect::<Vec<_>>()
                .join("\n")
                .as_bytes(),
        );
        Ok(Self::assemble(rules, k, source))
    }

    fn assemble(rules: Vec<ProductionRule>, k: usize, source: String) -> Self {
        let n_real = rules.len();
        let mut slots: Vec<RuleSlot> = rules.into_iter().map(RuleSlot::Rule).collect();
        slots.extend((n_real..k).map(RuleSlot::Placeholder));
        RuleVocabulary {
            rules: slots,
            source,
        }
    }

    pub fn rules(&self) -> &[RuleSlot] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn n_real_rules(&self) -> usize {
        self.rules
            .iter()
            .filter(|s| matches!(s, RuleSlot::Rule(_)))
            .count()
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

/// Top-`k` rules by frequency over `trees` (training split only), ties broken
/// by the `LHS→RHS` string. Short vocabularies are padded with placeholders.
pub fn build_rule_vocabulary(trees: &[ParseTree], k: usize) -> Result<RuleVocabulary> {
    if trees.is_empty() {
        return Err(Error::Empty("rule vocabulary needs at least one tree"));
    }
    if k == 0 {
        return Err(Error::Validation("rule vocabulary size must be at least 1".into()));
    }
    let mut counts: HashMap<ProductionRule, usize> = HashMap::new();
    let mut fingerprint = String::new();
    for t in trees {
        fingerprint.push_str(&t.serialize());
        fingerprint.push('\n');
        for p in t.productions() {
            *counts.entry(p).or_default() += 1;
        }
    }
    let mut ranked: Vec<(usize, String, ProductionRule)> = counts
        .into_iter()
        .map(|(rule, c)| (c, rule.key(), rule))
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    let rules = ranked.into_iter().take(k).map(|(_, _, r)| r).collect();
    Ok(RuleVocabulary::assemble(
        rules,
        k,
        sha256_hex(fingerprint.as_bytes()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parsetree::parse_ptb;

    const BOY: &str = "(S (NP (DT the) (NN boy)) (VP (VBZ falls)))";

    #[test]
    fn ties_break_lexicographically() {
        let trees = vec![parse_ptb(BOY).unwrap(); 3];
        let vocab = build_rule_vocabulary(&trees, 2).unwrap();
        assert_eq!(
            vocab.rules(),
            &[
                RuleSlot::Rule(ProductionRule::new("NP", &["DT", "NN"])),
                RuleSlot::Rule(ProductionRule::new("S", &["NP", "VP"])),
            ]
        );
    }

    #[test]
    fn frequency_dominates_order() {
        let trees = vec![
            parse_ptb("(S (NP (NN a)) (VP (VB b)))").unwrap(),
            parse_ptb("(S (NP (NN a)) (VP (VB b) (NP (NN c))))").unwrap(),
        ];
        let vocab = build_rule_vocabulary(&trees, 3).unwrap();
        // NP->NN occurs 3 times, S->NP VP twice, the VP rules once each
        let names: Vec<_> = vocab.rules().iter().map(RuleSlot::feature_name).collect();
        assert_eq!(names, ["rule:NP->NN", "rule:S->NP VP", "rule:VP->VB"]);
    }

    #[test]
    fn pads_small_vocabularies() {
        let trees = vec![parse_ptb("(S (NP (NN a)) (VP (VB b)))").unwrap()];
        let vocab = build_rule_vocabulary(&trees, 103).unwrap();
        assert_eq!(vocab.len(), 103);
        assert_eq!(vocab.n_real_rules(), 3);
        assert_eq!(vocab.rules()[3], RuleSlot::Placeholder(3));
        assert_eq!(vocab.rules()[3].feature_name(), "rule:<unused-003>");

        let two = vec![parse_ptb("(S (NP (NN a)) (NP (NN b)))").unwrap()];
        let vocab = build_rule_vocabulary(&two, 103).unwrap();
        assert_eq!(vocab.n_real_rules(), 2);
        assert_eq!(vocab.len() - vocab.n_real_rules(), 101);
    }

    #[test]
    fn empty_tree_list_is_an_error() {
        assert!(build_rule_vocabulary(&[], 103).is_err());
        let trees = vec![parse_ptb(BOY).unwrap()];
        assert!(build_rule_vocabulary(&trees, 0).is_err());
    }

    #[test]
    fn fingerprint_tracks_training_trees() {
        let a = build_rule_vocabulary(&[parse_ptb(BOY).unwrap()], 5).unwrap();
        let b = build_rule_vocabulary(&[parse_ptb("(NN x)").unwrap()], 5).unwrap();
        assert_ne!(a.source(), b.source());
        assert_eq!(a.source().len(), 64);
    }

    #[test]
    fn explicit_rules_reject_duplicates_and_overflow() {
        let r = ProductionRule::new("S", &["NP"]);
        assert!(RuleVocabulary::from_rules(vec![r.clone(), r.clone()], 5).is_err());
        assert!(RuleVocabulary::from_rules(vec![r], 0).is_err());
    }
}
