use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::corpus::{Corpus, Label, Split};
use crate::error::{Error, Result};
use crate::features::{
    build_rule_vocabulary, FeatureExtractor, IcuLexicon, RuleVocabulary, N_FEATURES, N_RULES,
};
use crate::parsetree::{parse_ptb, ParseTree};

/// Feature rows keyed by utterance id, in corpus order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub schema: Vec<String>,
    pub ids: Vec<String>,
    pub labels: Vec<Label>,
    pub rows: Vec<Vec<f64>>,
}

/// Parses every utterance's tree, failing with the list of ids that have no
/// parse.
pub fn parse_all(corpus: &Corpus) -> Result<Vec<ParseTree>> {
    let missing: Vec<String> = corpus
        .utterances()
        .iter()
        .filter(|u| u.parse.is_none())
        .map(|u| u.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingIds {
            what: "utterances without a parse".into(),
            ids: missing,
        });
    }
    corpus
        .utterances()
        .iter()
        .map(|u| {
            parse_ptb(u.parse.as_deref().unwrap_or_default()).map_err(|e| {
                Error::Validation(format!("parse of utterance {:?}: {e}", u.id))
            })
        })
        .collect()
}

impl FeatureTable {
    /// Learns the rule vocabulary on the training split and extracts a
    /// feature row for every utterance.
    pub fn from_corpus(corpus: &Corpus, lexicon: IcuLexicon) -> Result<(Self, RuleVocabulary)> {
        if !corpus.is_fully_split() {
            return Err(Error::Validation(
                "feature extraction needs split tags on every utterance".into(),
            ));
        }
        let trees = parse_all(corpus)?;
        let train_trees: Vec<ParseTree> = corpus
            .utterances()
            .iter()
            .zip(&trees)
            .filter(|(u, _)| u.split == Some(Split::Train))
            .map(|(_, t)| t.clone())
            .collect();
        let vocab = build_rule_vocabulary(&train_trees, N_RULES)?;
        let extractor = FeatureExtractor::new(vocab.clone(), lexicon)?;
        let rows = corpus
            .utterances()
            .iter()
            .zip(&trees)
            .map(|(u, t)| extractor.extract(u, t).values)
            .collect();
        let table = FeatureTable {
            schema: extractor.schema().to_vec(),
            ids: corpus.utterances().iter().map(|u| u.id.clone()).collect(),
            labels: corpus.utterances().iter().map(|u| u.label).collect(),
            rows,
        };
        Ok((table, vocab))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, id: &str) -> Option<&[f64]> {
        self.ids
            .iter()
            .position(|i| i == id)
            .map(|p| self.rows[p].as_slice())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["id".to_string(), "label".to_string()];
        header.extend(self.schema.iter().cloned());
        out.write_record(&header)?;
        for ((id, label), row) in self.ids.iter().zip(&self.labels).zip(&self.rows) {
            let mut rec = vec![id.clone(), label.as_str().to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::io("<feature csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        if header.len() != N_FEATURES + 2 || &header[0] != "id" || &header[1] != "label" {
            return Err(Error::Format(format!(
                "feature csv header must be id,label plus {N_FEATURES} columns, got {} columns",
                header.len()
            )));
        }
        let schema = header.iter().skip(2).map(str::to_string).collect();
        let mut table = FeatureTable {
            schema,
            ids: Vec::new(),
            labels: Vec::new(),
            rows: Vec::new(),
        };
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let bad = |m: String| Error::Record { line, message: m };
            table.ids.push(rec[0].to_string());
            table.labels.push(rec[1].parse().map_err(|e: Error| bad(e.to_string()))?);
            let row = rec
                .iter()
                .skip(2)
                .map(|s| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            table.rows.push(row);
        }
        Ok(table)
    }
}

pub fn write_feature_csv(table: &FeatureTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    table.write_csv(BufWriter::new(file))
}

pub fn read_feature_csv(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    FeatureTable::read_csv(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Utterance;

    fn corpus() -> Corpus {
        Corpus::new(vec![
            Utterance::new("a", "s1", "the boy falls .", Label::Ad)
                .with_split(Split::Train)
                .with_parse("(S (NP (DT the) (NN boy)) (VP (VBZ falls)) (. .))"),
            Utterance::new("b", "s2", "mother dries dishes", Label::Control)
                .with_split(Split::Test)
                .with_parse("(S (NP (NN mother)) (VP (VBZ dries) (NP (NNS dishes))))"),
        ])
        .unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let (table, vocab) = FeatureTable::from_corpus(&corpus(), IcuLexicon::bundled()).unwrap();
        assert_eq!(vocab.len(), 103);
        assert_eq!(table.rows[1][117..], [1.0, 3.0]);
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("id,label,rule:"));
        assert_eq!(text.lines().next().unwrap().split(',').count(), 121);
        assert_eq!(FeatureTable::read_csv(buf.as_slice()).unwrap(), table);
    }

    #[test]
    fn missing_parses_are_listed() {
        let c = Corpus::new(vec![
            Utterance::new("x1", "s", "a", Label::Ad).with_split(Split::Train),
            Utterance::new("x2", "s", "b", Label::Ad)
                .with_split(Split::Train)
                .with_parse("(NN b)"),
        ])
        .unwrap();
        let err = FeatureTable::from_corpus(&c, IcuLexicon::bundled()).unwrap_err();
        assert!(err.to_string().contains("x1"), "{err}");
        assert!(!err.to_string().contains("x2"), "{err}");
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(FeatureTable::read_csv("id,label,a\nx,AD,1\n".as_bytes()).is_err());
    }
}
