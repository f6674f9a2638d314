use std::collections::{BTreeSet, HashMap, HashSet};

use rand::Rng;

use super::{ProbeConfig, ProbeInstance, ProbingDataset, ProbingTask};
use crate::corpus::{Corpus, Split, Utterance};
use crate::error::{Error, Result};
use crate::features::parse_all;
use crate::seed::rng_for;

/// Labels one probing task over every eligible utterance of a fully split
/// corpus. Class boundaries and vocabularies are fit on the train split.
pub fn build_probing_dataset(
    task: ProbingTask,
    corpus: &Corpus,
    config: &ProbeConfig,
) -> Result<ProbingDataset> {
    let untagged: Vec<String> = corpus
        .utterances()
        .iter()
        .filter(|u| u.split.is_none())
        .map(|u| u.id.clone())
        .collect();
    if !untagged.is_empty() {
        return Err(Error::MissingIds {
            what: "utterances without a split tag".into(),
            ids: untagged,
        });
    }
    let min_tokens = if task == ProbingTask::BiGramShift { 2 } else { 1 };
    let eligible: Vec<&Utterance> = corpus
        .utterances()
        .iter()
        .filter(|u| u.tokens.len() >= min_tokens)
        .collect();
    match task {
        ProbingTask::SentenceLength => sentence_length(&eligible, config),
        ProbingTask::TreeDepth => tree_depth(&eligible, config),
        ProbingTask::TopConstituents => top_constituents(&eligible, config),
        ProbingTask::BiGramShift => bigram_shift(&eligible, config),
        ProbingTask::WordContent => word_content(&eligible, config),
    }
}

fn split_of(u: &Utterance) -> Split {
    u.split.expect("split tags checked on entry")
}

fn instance(u: &Utterance, label: usize) -> ProbeInstance {
    ProbeInstance {
        id: u.id.clone(),
        split: split_of(u),
        label,
        perturbed_text: None,
    }
}

/// Value at a 1-based rank of a sorted, nonempty sample, clamped to the
/// sample.
fn at_rank(sorted: &[usize], rank: usize) -> usize {
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Nearest-rank percentile of a sorted, nonempty sample.
fn percentile(sorted: &[usize], p: f64) -> usize {
    let rank = (p / 100.0 * sorted.len() as f64 - 1e-9).ceil().max(0.0) as usize;
    at_rank(sorted, rank)
}

fn train_values(eligible: &[&Utterance], values: &[usize], task: ProbingTask) -> Result<Vec<usize>> {
    let mut train: Vec<usize> = eligible
        .iter()
        .zip(values)
        .filter(|(u, _)| split_of(u) == Split::Train)
        .map(|(_, &v)| v)
        .collect();
    if train.is_empty() {
        return Err(Error::Validation(format!("{task}: no training utterances")));
    }
    train.sort_unstable();
    Ok(train)
}

fn sentence_length(eligible: &[&Utterance], config: &ProbeConfig) -> Result<ProbingDataset> {
    let task = ProbingTask::SentenceLength;
    let bins = config.sentence_length_bins;
    if bins == 0 {
        return Err(Error::Validation("sentence length needs at least one bin".into()));
    }
    let lengths: Vec<usize> = eligible.iter().map(|u| u.tokens.len()).collect();
    let train = train_values(eligible, &lengths, task)?;
    let edges: Vec<usize> = (1..bins)
        .map(|k| at_rank(&train, (k * train.len()).div_ceil(bins)))
        .collect();
    let instances = eligible
        .iter()
        .zip(&lengths)
        .map(|(u, &len)| instance(u, edges.iter().filter(|&&e| e < len).count()))
        .collect();
    let class_names = (0..bins)
        .map(|b| match (b.checked_sub(1).map(|i| edges[i]), edges.get(b)) {
            (None, Some(hi)) => format!("<={hi}"),
            (Some(lo), Some(hi)) => format!("{}-{hi}", lo + 1),
            (Some(lo), None) => format!(">{lo}"),
            (None, None) => "all".into(),
        })
        .collect();
    ProbingDataset::new(task, instances, class_names)
}

fn trees_for(eligible: &[&Utterance], task: ProbingTask) -> Result<Vec<crate::parsetree::ParseTree>> {
    let sub = Corpus::new(eligible.iter().map(|u| (*u).clone()).collect())?;
    parse_all(&sub).map_err(|e| match e {
        Error::MissingIds { ids, .. } => Error::MissingIds {
            what: format!("{task} needs parses; utterances without one"),
            ids,
        },
        other => other,
    })
}

fn tree_depth(eligible: &[&Utterance], config: &ProbeConfig) -> Result<ProbingDataset> {
    let task = ProbingTask::TreeDepth;
    let (p_lo, p_hi) = config.tree_depth_percentiles;
    if !(0.0..=100.0).contains(&p_lo) || !(p_lo..=100.0).contains(&p_hi) {
        return Err(Error::Validation(format!(
            "tree depth percentiles must satisfy 0 <= lo <= hi <= 100, got ({p_lo}, {p_hi})"
        )));
    }
    let trees = trees_for(eligible, task)?;
    let depths: Vec<usize> = trees.iter().map(|t| t.depth()).collect();
    let train = train_values(eligible, &depths, task)?;
    let lo = percentile(&train, p_lo);
    let hi = percentile(&train, p_hi);
    let instances = eligible
        .iter()
        .zip(&depths)
        .map(|(u, &d)| instance(u, d.clamp(lo, hi) - lo))
        .collect();
    let class_names = (lo..=hi).map(|d| d.to_string()).collect();
    ProbingDataset::new(task, instances, class_names)
}

pub(crate) const OTHER: &str = "OTHER";

fn top_constituents(eligible: &[&Utterance], config: &ProbeConfig) -> Result<ProbingDataset> {
    let task = ProbingTask::TopConstituents;
    if config.top_constituent_classes < 2 {
        return Err(Error::Validation(
            "top constituents needs at least two classes".into(),
        ));
    }
    let trees = trees_for(eligible, task)?;
    let sequences: Vec<String> = trees.iter().map(|t| t.top_constituents().join(" ")).collect();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for (u, s) in eligible.iter().zip(&sequences) {
        if split_of(u) == Split::Train {
            *counts.entry(s.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.truncate(config.top_constituent_classes - 1);
    let mut class_names: Vec<String> = ranked.iter().map(|(s, _)| s.to_string()).collect();
    let index: HashMap<&str, usize> = ranked.iter().enumerate().map(|(i, (s, _))| (*s, i)).collect();
    let other = class_names.len();
    let instances = eligible
        .iter()
        .zip(&sequences)
        .map(|(u, s)| instance(u, index.get(s.as_str()).copied().unwrap_or(other)))
        .collect();
    class_names.push(OTHER.into());
    ProbingDataset::new(task, instances, class_names)
}

/// `tokens` with positions `i` and `i + 1` exchanged.
pub fn swap_adjacent<S: AsRef<str>>(tokens: &[S], i: usize) -> Vec<String> {
    let mut out: Vec<String> = tokens.iter().map(|t| t.as_ref().to_string()).collect();
    out.swap(i, i + 1);
    out
}

const ORIGINAL: usize = 0;
const INVERTED: usize = 1;

fn bigram_shift(eligible: &[&Utterance], config: &ProbeConfig) -> Result<ProbingDataset> {
    let mut instances = Vec::with_capacity(eligible.len());
    for u in eligible {
        let mut rng = rng_for(config.seed, &["bigram-shift", &u.id]);
        let swappable: Vec<usize> = (0..u.tokens.len() - 1)
            .filter(|&i| u.tokens[i] != u.tokens[i + 1])
            .collect();
        let heads = rng.gen_bool(0.5);
        let (tokens, label) = if heads && !swappable.is_empty() {
            let i = swappable[rng.gen_range(0..swappable.len())];
            (swap_adjacent(&u.tokens, i), INVERTED)
        } else {
            (u.tokens.clone(), ORIGINAL)
        };
        instances.push(ProbeInstance {
            id: u.id.clone(),
            split: split_of(u),
            label,
            perturbed_text: Some(tokens.join(" ")),
        });
    }
    ProbingDataset::new(
        ProbingTask::BiGramShift,
        instances,
        vec!["original".into(), "inverted".into()],
    )
}

/// Corpus of the BiGramShift instances with their probe text, for
/// re-embedding. Ids, labels and splits are those of the source corpus.
pub fn bigram_shift_corpus(corpus: &Corpus, dataset: &ProbingDataset) -> Result<Corpus> {
    if dataset.task() != ProbingTask::BiGramShift {
        return Err(Error::Validation(format!(
            "expected a BiGramShift dataset, got {}",
            dataset.task()
        )));
    }
    let texts: HashMap<&str, &str> = dataset
        .instances()
        .iter()
        .filter_map(|i| i.perturbed_text.as_deref().map(|t| (i.id.as_str(), t)))
        .collect();
    let kept: Vec<Utterance> = corpus
        .utterances()
        .iter()
        .filter(|u| texts.contains_key(u.id.as_str()))
        .cloned()
        .collect();
    let missing: Vec<String> = dataset
        .instances()
        .iter()
        .filter(|i| corpus.get(&i.id).is_none())
        .map(|i| i.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingIds {
            what: "probe instances absent from the corpus".into(),
            ids: missing,
        });
    }
    Ok(Corpus::new(kept)?.map_text(|u| texts[u.id.as_str()].to_string()))
}

fn is_word(token: &str) -> bool {
    !token.is_empty() && token.chars().all(char::is_alphabetic)
}

fn word_content(eligible: &[&Utterance], config: &ProbeConfig) -> Result<ProbingDataset> {
    let w = config.word_content_targets;
    if w == 0 {
        return Err(Error::Validation("word content needs at least one target word".into()));
    }
    let mut df: HashMap<&str, usize> = HashMap::new();
    for u in eligible.iter().filter(|u| split_of(u) == Split::Train) {
        let types: BTreeSet<&str> = u.tokens.iter().map(String::as_str).filter(|t| is_word(t)).collect();
        for t in types {
            *df.entry(t).or_default() += 1;
        }
    }
    if df.len() < w {
        return Err(Error::Validation(format!(
            "word content needs {w} candidate words but the train split has only {}",
            df.len()
        )));
    }
    let mut ranked: Vec<(&str, usize)> = df.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let start = (ranked.len() - w) / 2;
    let targets: Vec<&str> = ranked[start..start + w].iter().map(|(t, _)| *t).collect();
    let index: HashMap<&str, usize> = targets.iter().enumerate().map(|(i, t)| (*t, i)).collect();
    let mut instances = Vec::new();
    for u in eligible {
        let present: HashSet<usize> = u.tokens.iter().filter_map(|t| index.get(t.as_str()).copied()).collect();
        if present.len() == 1 {
            let label = *present.iter().next().expect("one element");
            instances.push(instance(u, label));
        }
    }
    ProbingDataset::new(
        ProbingTask::WordContent,
        instances,
        targets.iter().map(|t| t.to_string()).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;

    fn utt(id: &str, text: &str, split: Split) -> Utterance {
        Utterance::new(id, "s1", text, Label::Control).with_split(split)
    }

    fn corpus(items: &[(&str, &str, Split)]) -> Corpus {
        Corpus::new(items.iter().map(|(i, t, s)| utt(i, t, *s)).collect()).unwrap()
    }

    #[test]
    fn nearest_rank_percentiles() {
        let v = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];
        assert_eq!(percentile(&v, 5.0), 1);
        assert_eq!(percentile(&v, 50.0), 5);
        assert_eq!(percentile(&v, 95.0), 10);
        assert_eq!(percentile(&v, 0.0), 1);
        assert_eq!(percentile(&[7], 50.0), 7);
    }

    #[test]
    fn swap_example_sentence() {
        let tokens = crate::corpus::tokenize("this is an example sentence .");
        assert_eq!(swap_adjacent(&tokens, 1).join(" "), "this an is example sentence .");
    }

    #[test]
    fn sentence_length_bins_fit_on_train() {
        let mut items = Vec::new();
        let texts: Vec<String> = (1..=12).map(|n| vec!["w"; n].join(" ")).collect();
        let ids: Vec<String> = (1..=12).map(|n| format!("u{n}")).collect();
        for n in 0..12 {
            items.push((ids[n].as_str(), texts[n].as_str(), Split::Train));
        }
        items.push(("one", "hello", Split::Test));
        items.push(("long", "a b c d e f g h i j k l m n o p", Split::Val));
        let ds = build_probing_dataset(ProbingTask::SentenceLength, &corpus(&items), &ProbeConfig::default()).unwrap();
        assert_eq!(ds.n_classes(), 6);
        let label = |id: &str| ds.instances().iter().find(|i| i.id == id).unwrap().label;
        assert_eq!(label("one"), 0);
        assert_eq!(label("u2"), 0);
        assert_eq!(label("u3"), 1);
        assert_eq!(label("long"), 5);
        assert_eq!(ds.class_names()[0], "<=2");
        assert_eq!(ds.class_names()[5], ">10");
    }

    #[test]
    fn empty_utterances_are_excluded() {
        let c = corpus(&[("a", "hi there", Split::Train), ("b", "", Split::Train)]);
        let ds = build_probing_dataset(ProbingTask::SentenceLength, &c, &ProbeConfig::default()).unwrap();
        assert_eq!(ds.len(), 1);
        let ds = build_probing_dataset(ProbingTask::BiGramShift, &c, &ProbeConfig::default()).unwrap();
        assert_eq!(ds.len(), 1);
    }

    #[test]
    fn syntactic_tasks_list_missing_parses() {
        let c = corpus(&[("a", "hi", Split::Train), ("b", "yo", Split::Val)]);
        let err = build_probing_dataset(ProbingTask::TreeDepth, &c, &ProbeConfig::default()).unwrap_err();
        match err {
            Error::MissingIds { ids, .. } => assert_eq!(ids, ["a", "b"]),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn tree_depth_clips_to_train_range() {
        let mk = |id: &str, depth: usize, split| {
            let mut tree = "(NN x)".to_string();
            for _ in 1..depth {
                tree = format!("(NP {tree})");
            }
            utt(id, "x", split).with_parse(tree)
        };
        let mut us: Vec<Utterance> = (0..20).map(|i| mk(&format!("t{i}"), 3 + i % 4, Split::Train)).collect();
        us.push(mk("deep", 30, Split::Test));
        us.push(mk("shallow", 1, Split::Val));
        let ds = build_probing_dataset(ProbingTask::TreeDepth, &Corpus::new(us).unwrap(), &ProbeConfig::default()).unwrap();
        assert_eq!(ds.class_names(), ["3", "4", "5", "6"]);
        let label = |id: &str| ds.instances().iter().find(|i| i.id == id).unwrap().label;
        assert_eq!(label("deep"), 3);
        assert_eq!(label("shallow"), 0);
        assert_eq!(label("t1"), 1);
    }

    #[test]
    fn top_constituents_keep_frequent_sequences() {
        let parse = "(ROOT (S (NP (PRP x)) (VP (VBZ y)) (. .)))";
        let other = "(ROOT (FRAG (NP (NN x))))";
        let mut us = vec![
            utt("a", "x y .", Split::Train).with_parse(parse),
            utt("b", "x y .", Split::Train).with_parse(parse),
            utt("c", "x", Split::Train).with_parse(other),
            utt("d", "x y .", Split::Test).with_parse(parse),
        ];
        us.push(utt("e", "x", Split::Test).with_parse("(ROOT (X (NN x)))"));
        let cfg = ProbeConfig {
            top_constituent_classes: 2,
            ..ProbeConfig::default()
        };
        let ds = build_probing_dataset(ProbingTask::TopConstituents, &Corpus::new(us).unwrap(), &cfg).unwrap();
        assert_eq!(ds.class_names(), ["NP VP .", "OTHER"]);
        let labels: Vec<usize> = ds.instances().iter().map(|i| i.label).collect();
        assert_eq!(labels, [0, 0, 1, 0, 1]);
    }

    #[test]
    fn bigram_shift_properties() {
        let us: Vec<Utterance> = (0..400)
            .map(|i| utt(&format!("u{i}"), "the boy is on the stool .", Split::Train))
            .collect();
        let c = Corpus::new(us).unwrap();
        let ds = build_probing_dataset(ProbingTask::BiGramShift, &c, &ProbeConfig::default()).unwrap();
        let inverted = ds.instances().iter().filter(|i| i.label == INVERTED).count();
        assert!((inverted as f64 / 400.0 - 0.5).abs() <= 0.05, "{inverted}");
        let original = &c.utterances()[0].tokens;
        for inst in ds.instances() {
            let t = crate::corpus::tokenize(inst.perturbed_text.as_deref().unwrap());
            let diff: Vec<usize> = (0..t.len()).filter(|&k| t[k] != original[k]).collect();
            if inst.label == INVERTED {
                assert_eq!(diff.len(), 2);
                assert_eq!(diff[1], diff[0] + 1);
                assert_eq!(swap_adjacent(original, diff[0]), t);
            } else {
                assert!(diff.is_empty());
            }
        }
        let again = build_probing_dataset(ProbingTask::BiGramShift, &c, &ProbeConfig::default()).unwrap();
        assert_eq!(ds, again);
        let derived = bigram_shift_corpus(&c, &ds).unwrap();
        assert_eq!(derived.len(), 400);
        assert_eq!(derived.utterances()[0].id, "u0");
    }

    #[test]
    fn bigram_shift_skips_identical_neighbours() {
        let us: Vec<Utterance> = (0..50).map(|i| utt(&format!("u{i}"), "no no", Split::Train)).collect();
        let ds = build_probing_dataset(ProbingTask::BiGramShift, &Corpus::new(us).unwrap(), &ProbeConfig::default()).unwrap();
        assert!(ds.instances().iter().all(|i| i.label == ORIGINAL));
    }

    #[test]
    fn word_content_targets_mid_frequency_words() {
        // df: a=4, b=3, c=2, d=1, e=1 on train
        let c = corpus(&[
            ("1", "a b c d", Split::Train),
            ("2", "a b c", Split::Train),
            ("3", "a b e", Split::Train),
            ("4", "a .", Split::Train),
            ("5", "c x", Split::Test),
            ("6", "b c", Split::Val),
            ("7", "a", Split::Val),
        ]);
        let cfg = ProbeConfig {
            word_content_targets: 3,
            ..ProbeConfig::default()
        };
        let ds = build_probing_dataset(ProbingTask::WordContent, &c, &cfg).unwrap();
        assert_eq!(ds.class_names(), ["b", "c", "d"]);
        let kept: Vec<(&str, usize)> = ds.instances().iter().map(|i| (i.id.as_str(), i.label)).collect();
        assert_eq!(kept, [("3", 0), ("5", 1)]);
        let too_many = ProbeConfig {
            word_content_targets: 6,
            ..ProbeConfig::default()
        };
        assert!(build_probing_dataset(ProbingTask::WordContent, &c, &too_many).is_err());
    }
}
