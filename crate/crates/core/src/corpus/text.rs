//! Caption corpora, human judgments and metric tables.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifies one (image, candidate caption) pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairKey {
    pub image_id: String,
    pub candidate_id: String,
}

impl PairKey {
    pub fn new(image_id: impl Into<String>, candidate_id: impl Into<String>) -> Self {
        PairKey {
            image_id: image_id.into(),
            candidate_id: candidate_id.into(),
        }
    }
}

impl std::fmt::Display for PairKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.image_id, self.candidate_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptionItem {
    pub image_id: String,
    pub candidate_id: String,
    pub caption: String,
    #[serde(default)]
    pub references: Vec<String>,
}

impl CaptionItem {
    pub fn key(&self) -> PairKey {
        PairKey::new(&self.image_id, &self.candidate_id)
    }

    /// Id under which this candidate's text embedding is stored:
    /// `"<image_id>/<candidate_id>"`.
    pub fn candidate_embedding_id(&self) -> String {
        self.key().to_string()
    }
}

/// Candidate captions in input order, indexed by [`PairKey`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CaptionCorpus {
    items: Vec<CaptionItem>,
    index: HashMap<PairKey, usize>,
}

impl CaptionCorpus {
    pub fn new(items: Vec<CaptionItem>) -> Result<Self> {
        let mut index = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if index.insert(item.key(), i).is_some() {
                return Err(Error::Invariant(format!(
                    "duplicate corpus pair {}",
                    item.key()
                )));
            }
        }
        Ok(CaptionCorpus { items, index })
    }

    pub fn items(&self) -> &[CaptionItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, key: &PairKey) -> Option<&CaptionItem> {
        self.index.get(key).map(|&i| &self.items[i])
    }

    pub fn contains(&self, image_id: &str, candidate_id: &str) -> bool {
        self.index
            .contains_key(&PairKey::new(image_id, candidate_id))
    }

    /// Distinct references per image (first-seen order), pooled over every
    /// candidate of that image.
    pub fn reference_pool(&self) -> IndexMap<String, Vec<String>> {
        let mut pool: IndexMap<String, Vec<String>> = IndexMap::new();
        for item in &self.items {
            let refs = pool.entry(item.image_id.clone()).or_default();
            for r in &item.references {
                if !refs.contains(r) {
                    refs.push(r.clone());
                }
            }
        }
        pool
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseJudgment {
    pub image_id: String,
    pub candidate_a_id: String,
    pub candidate_b_id: String,
    pub votes_a: u32,
    pub votes_b: u32,
}

impl PairwiseJudgment {
    pub fn key_a(&self) -> PairKey {
        PairKey::new(&self.image_id, &self.candidate_a_id)
    }

    pub fn key_b(&self) -> PairKey {
        PairKey::new(&self.image_id, &self.candidate_b_id)
    }
}

/// Human ratings aligned with a [`CaptionCorpus`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JudgmentSet {
    /// Per-pair Likert ratings, in input order.
    pub likert: IndexMap<PairKey, Vec<f64>>,
    pub pairwise: Vec<PairwiseJudgment>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum JudgmentLine {
    Likert {
        image_id: String,
        candidate_id: String,
        ratings: Vec<f64>,
    },
    Pairwise {
        image_id: String,
        candidate_a_id: String,
        candidate_b_id: String,
        votes_a: u32,
        votes_b: u32,
    },
}

/// One metric column per name, all aligned with `instance_ids` and `human`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    instance_ids: Vec<String>,
    human: Vec<f64>,
    metrics: IndexMap<String, Vec<f64>>,
}

impl MetricTable {
    pub fn new(
        instance_ids: Vec<String>,
        human: Vec<f64>,
        metrics: impl IntoIterator<Item = (String, Vec<f64>)>,
    ) -> Result<Self> {
        let n = instance_ids.len();
        if human.len() != n {
            return Err(Error::Invariant(format!(
                "human column has {} rows, expected {n}",
                human.len()
            )));
        }
        let mut cols = IndexMap::new();
        for (name, col) in metrics {
            if col.len() != n {
                return Err(Error::Invariant(format!(
                    "metric {name:?} has {} rows, expected {n}",
                    col.len()
                )));
            }
            if name == "instance_id" || name == "human" {
                return Err(Error::Invariant(format!("reserved metric name {name:?}")));
            }
            if cols.insert(name.clone(), col).is_some() {
                return Err(Error::Invariant(format!("duplicate metric name {name:?}")));
            }
        }
        Ok(MetricTable {
            instance_ids,
            human,
            metrics: cols,
        })
    }

    pub fn len(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instance_ids.is_empty()
    }

    pub fn instance_ids(&self) -> &[String] {
        &self.instance_ids
    }

    pub fn human(&self) -> &[f64] {
        &self.human
    }

    pub fn metric_names(&self) -> impl Iterator<Item = &str> {
        self.metrics.keys().map(String::as_str)
    }

    pub fn metric(&self, name: &str) -> Option<&[f64]> {
        self.metrics.get(name).map(Vec::as_slice)
    }

    pub fn num_metrics(&self) -> usize {
        self.metrics.len()
    }

    /// New table made of the given rows (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> MetricTable {
        let pick = |col: &[f64]| rows.iter().map(|&r| col[r]).collect::<Vec<_>>();
        MetricTable {
            instance_ids: rows.iter().map(|&r| self.instance_ids[r].clone()).collect(),
            human: pick(&self.human),
            metrics: self
                .metrics
                .iter()
                .map(|(k, v)| (k.clone(), pick(v)))
                .collect(),
        }
    }

    pub fn select_metrics(&self, names: &[&str]) -> Result<MetricTable> {
        let cols = names
            .iter()
            .map(|&n| {
                self.metric(n)
                    .map(|c| (n.to_owned(), c.to_vec()))
                    .ok_or_else(|| Error::InvalidInput(format!("unknown metric {n:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        MetricTable::new(self.instance_ids.clone(), self.human.clone(), cols)
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-blank lines with their 1-based line numbers.
fn jsonl_lines(text: &str) -> impl Iterator<Item = (u64, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i as u64 + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}

pub fn read_captions(path: impl AsRef<Path>) -> Result<CaptionCorpus> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut items = Vec::new();
    let mut seen = HashMap::new();
    for (line, raw) in jsonl_lines(&text) {
        let item: CaptionItem =
            serde_json::from_str(raw).map_err(|e| Error::load(path, line, e.to_string()))?;
        if let Some(prev) = seen.insert(item.key(), line) {
            return Err(Error::load(
                path,
                line,
                format!("duplicate pair {} (first seen on line {prev})", item.key()),
            ));
        }
        items.push(item);
    }
    CaptionCorpus::new(items)
}

/// Parses judgments and checks every referenced pair exists in `corpus`.
pub fn read_judgments(path: impl AsRef<Path>, corpus: &CaptionCorpus) -> Result<JudgmentSet> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut set = JudgmentSet::default();
    let require = |image: &str, cand: &str, line: u64| -> Result<()> {
        if corpus.contains(image, cand) {
            Ok(())
        } else {
            Err(Error::load(
                path,
                line,
                format!("judgment references unknown pair {image}/{cand}"),
            ))
        }
    };
    for (line, raw) in jsonl_lines(&text) {
        let parsed: JudgmentLine =
            serde_json::from_str(raw).map_err(|e| Error::load(path, line, e.to_string()))?;
        match parsed {
            JudgmentLine::Likert {
                image_id,
                candidate_id,
                ratings,
            } => {
                require(&image_id, &candidate_id, line)?;
                if ratings.is_empty() {
                    return Err(Error::load(path, line, "empty ratings list"));
                }
                if ratings.iter().any(|r| !r.is_finite()) {
                    return Err(Error::load(path, line, "non-finite rating"));
                }
                let key = PairKey::new(image_id, candidate_id);
                if set.likert.contains_key(&key) {
                    return Err(Error::load(
                        path,
                        line,
                        format!("duplicate likert key {key}"),
                    ));
                }
                set.likert.insert(key, ratings);
            }
            JudgmentLine::Pairwise {
                image_id,
                candidate_a_id,
                candidate_b_id,
                votes_a,
                votes_b,
            } => {
                require(&image_id, &candidate_a_id, line)?;
                require(&image_id, &candidate_b_id, line)?;
                if votes_a as u64 + votes_b as u64 == 0 {
                    return Err(Error::load(path, line, "pairwise record has no votes"));
                }
                set.pairwise.push(PairwiseJudgment {
                    image_id,
                    candidate_a_id,
                    candidate_b_id,
                    votes_a,
                    votes_b,
                });
            }
        }
    }
    Ok(set)
}

pub fn read_metric_table(path: impl AsRef<Path>) -> Result<MetricTable> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let csv_err = |e: csv::Error| {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        Error::load(path, line, e.to_string())
    };
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.len() < 2 || &header[0] != "instance_id" || &header[1] != "human" {
        return Err(Error::load(
            path,
            1,
            "header must start with instance_id,human",
        ));
    }
    let names: Vec<String> = header.iter().skip(2).map(str::to_owned).collect();
    let mut ids = Vec::new();
    let mut human = Vec::new();
    let mut cols = vec![Vec::new(); names.len()];
    let mut seen = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let id = record[0].to_owned();
        if let Some(prev) = seen.insert(id.clone(), line) {
            return Err(Error::load(
                path,
                line,
                format!("duplicate instance_id {id:?} (first seen on line {prev})"),
            ));
        }
        let parse = |field: &str, col: &str| -> Result<f64> {
            match field.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::load(
                    path,
                    line,
                    format!("bad value {field:?} in column {col}"),
                )),
            }
        };
        ids.push(id);
        human.push(parse(&record[1], "human")?);
        for (j, col) in cols.iter_mut().enumerate() {
            col.push(parse(&record[j + 2], &names[j])?);
        }
    }
    MetricTable::new(ids, human, names.into_iter().zip(cols))
        .map_err(|e| Error::load(path, 1, e.to_string()))
}

/// Loads the captions, the judgments cross-checked against them, and an
/// optional metric table.
pub fn load_corpus(
    captions_path: impl AsRef<Path>,
    judgments_path: impl AsRef<Path>,
    metric_table_path: Option<&Path>,
) -> Result<(CaptionCorpus, JudgmentSet, Option<MetricTable>)> {
    let corpus = read_captions(captions_path)?;
    let judgments = read_judgments(judgments_path, &corpus)?;
    let table = metric_table_path.map(read_metric_table).transpose()?;
    Ok((corpus, judgments, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    const CAPTIONS: &str = r#"{"image_id":"i1","candidate_id":"c1","caption":"a dog","references":["a dog runs"]}
{"image_id":"i1","candidate_id":"c2","caption":"a cat","references":["a dog runs","dog on grass"]}
"#;

    #[test]
    fn likert_counts() {
        let c = file(CAPTIONS);
        let j = file(
            r#"{"kind":"likert","image_id":"i1","candidate_id":"c1","ratings":[1,2,3]}
{"kind":"likert","image_id":"i1","candidate_id":"c2","ratings":[4,4,3]}
"#,
        );
        let (corpus, judg, table) = load_corpus(c.path(), j.path(), None).unwrap();
        assert_eq!(corpus.len(), 2);
        assert!(table.is_none());
        assert_eq!(judg.likert.len(), 2);
        assert!(judg.likert.values().all(|r| r.len() == 3));
        assert_eq!(
            judg.likert.get_index(0).unwrap().0,
            &PairKey::new("i1", "c1")
        );
    }

    #[test]
    fn empty_judgments_are_valid() {
        let c = file(CAPTIONS);
        let j = file("");
        let (_, judg, _) = load_corpus(c.path(), j.path(), None).unwrap();
        assert!(judg.likert.is_empty() && judg.pairwise.is_empty());
    }

    #[test]
    fn dangling_judgment_cites_line() {
        let c = file(CAPTIONS);
        let j = file(
            r#"{"kind":"likert","image_id":"i1","candidate_id":"c1","ratings":[1]}
{"kind":"pairwise","image_id":"i1","candidate_a_id":"c1","candidate_b_id":"nope","votes_a":1,"votes_b":0}
"#,
        );
        match load_corpus(c.path(), j.path(), None) {
            Err(Error::Load { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("nope"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_vote_pairwise_rejected() {
        let c = file(CAPTIONS);
        let j = file(
            r#"{"kind":"pairwise","image_id":"i1","candidate_a_id":"c1","candidate_b_id":"c2","votes_a":0,"votes_b":0}"#,
        );
        assert!(matches!(
            load_corpus(c.path(), j.path(), None),
            Err(Error::Load { line: 1, .. })
        ));
    }

    #[test]
    fn duplicate_caption_pair() {
        let c = file(
            r#"{"image_id":"i1","candidate_id":"c1","caption":"a","references":[]}
{"image_id":"i1","candidate_id":"c1","caption":"b","references":[]}"#,
        );
        assert!(matches!(
            read_captions(c.path()),
            Err(Error::Load { line: 2, .. })
        ));
    }

    #[test]
    fn reference_pool_dedups_per_image() {
        let c = file(CAPTIONS);
        let corpus = read_captions(c.path()).unwrap();
        let pool = corpus.reference_pool();
        assert_eq!(
            pool["i1"],
            vec!["a dog runs".to_owned(), "dog on grass".to_owned()]
        );
    }

    #[test]
    fn metric_table_parses() {
        let t = file("instance_id,human,bleu,cider\na,1.0,0.1,0.2\nb,2.5,0.3,0.4\n");
        let table = read_metric_table(t.path()).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table.metric_names().collect::<Vec<_>>(), ["bleu", "cider"]);
        assert_eq!(table.metric("cider").unwrap(), &[0.2, 0.4]);
        assert_eq!(table.human(), &[1.0, 2.5]);
    }

    #[test]
    fn ragged_metric_table_cites_line() {
        let t = file("instance_id,human,bleu\na,1.0,0.1\nb,2.0\n");
        match read_metric_table(t.path()) {
            Err(Error::Load { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_metric_names() {
        let t = file("instance_id,human,bleu,bleu\na,1.0,0.1,0.1\n");
        assert!(matches!(
            read_metric_table(t.path()),
            Err(Error::Load { .. })
        ));
    }

    #[test]
    fn duplicate_instance_ids() {
        let t = file("instance_id,human,m\na,1,1\na,2,2\n");
        assert!(matches!(
            read_metric_table(t.path()),
            Err(Error::Load { line: 3, .. })
        ));
    }
}
