//! Caption corpora (JSON lines) and entailment pair files (TSV).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::encoders::{tokenize, Vocabulary};
use crate::error::{Error, Result};
use crate::numerics::DenseVector;

use super::features::FeatureMatrix;
use super::{read_text, write_atomic};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCaption {
    pub caption_id: String,
    pub image_id: String,
    pub caption: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaptionRecord {
    pub caption_id: String,
    pub image_id: String,
    /// Token ids, never empty.
    pub tokens: Vec<usize>,
}

pub fn read_captions_raw(path: &Path) -> Result<Vec<RawCaption>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: RawCaption = serde_json::from_str(line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Tokenizes and maps captions to ids. Captions that tokenize to nothing
/// are skipped with a warning.
pub fn encode_captions(raw: &[RawCaption], vocab: &Vocabulary) -> Vec<CaptionRecord> {
    let mut out = Vec::with_capacity(raw.len());
    for r in raw {
        let tokens = vocab.encode_text(&r.caption);
        if tokens.is_empty() {
            warn!("skipping empty caption '{}'", r.caption_id);
            continue;
        }
        out.push(CaptionRecord {
            caption_id: r.caption_id.clone(),
            image_id: r.image_id.clone(),
            tokens,
        });
    }
    out
}

pub fn load_captions(path: &Path, vocab: &Vocabulary) -> Result<Vec<CaptionRecord>> {
    Ok(encode_captions(&read_captions_raw(path)?, vocab))
}

pub fn write_captions(path: &Path, captions: &[RawCaption]) -> Result<()> {
    let mut s = String::new();
    for c in captions {
        let line = serde_json::to_string(c).map_err(|e| Error::contract(e.to_string()))?;
        s.push_str(&line);
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntailLabel {
    Entailment,
    NonEntailment,
}

impl EntailLabel {
    pub fn is_entailment(self) -> bool {
        self == EntailLabel::Entailment
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EntailLabel::Entailment => "entailment",
            EntailLabel::NonEntailment => "non-entailment",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawEntail {
    pub premise: Vec<String>,
    pub hypothesis: Vec<String>,
    pub label: EntailLabel,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntailPair {
    pub premise: Vec<usize>,
    pub hypothesis: Vec<usize>,
    pub label: EntailLabel,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EntailData {
    pub pairs: Vec<RawEntail>,
    /// Rows with gold label `-`.
    pub skipped_unlabeled: usize,
    /// Rows whose premise or hypothesis tokenized to nothing.
    pub skipped_empty: usize,
}

/// Reads `label<TAB>premise<TAB>hypothesis` rows. A first line starting with
/// `gold_label` is taken as an SNLI-style header, and the label and sentence
/// columns are located by name (`gold_label`, `sentence1`, `sentence2`).
pub fn read_entail_raw(path: &Path) -> Result<EntailData> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate().peekable();
    let (mut li, mut pi, mut hi, mut min_cols) = (0, 1, 2, 3);
    let mut header = false;
    if let Some((_, first)) = lines.peek() {
        if first.starts_with("gold_label") {
            let cols: Vec<&str> = first.split('\t').collect();
            let find = |name: &str| {
                cols.iter()
                    .position(|c| *c == name)
                    .ok_or_else(|| Error::format(path, format!("line 1: header lacks '{name}' column")))
            };
            li = find("gold_label")?;
            pi = find("sentence1")?;
            hi = find("sentence2")?;
            min_cols = li.max(pi).max(hi) + 1;
            header = true;
            lines.next();
        }
    }
    let mut out = EntailData::default();
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let ok = if header { fields.len() >= min_cols } else { fields.len() == 3 };
        if !ok {
            return Err(Error::format(
                path,
                format!("line {lineno}: expected label, premise and hypothesis columns"),
            ));
        }
        let label = match fields[li] {
            "entailment" => EntailLabel::Entailment,
            "neutral" | "contradiction" | "non-entailment" => EntailLabel::NonEntailment,
            "-" => {
                out.skipped_unlabeled += 1;
                continue;
            }
            other => {
                return Err(Error::format(path, format!("line {lineno}: unknown label '{other}'")));
            }
        };
        let premise = tokenize(fields[pi]);
        let hypothesis = tokenize(fields[hi]);
        if premise.is_empty() || hypothesis.is_empty() {
            warn!("{}: line {lineno}: empty sentence, skipped", path.display());
            out.skipped_empty += 1;
            continue;
        }
        out.pairs.push(RawEntail {
            premise,
            hypothesis,
            label,
        });
    }
    if out.skipped_unlabeled > 0 {
        info!(
            "{}: skipped {} pairs without a gold label",
            path.display(),
            out.skipped_unlabeled
        );
    }
    Ok(out)
}

pub fn encode_entail(raw: &[RawEntail], vocab: &Vocabulary) -> Vec<EntailPair> {
    raw.iter()
        .map(|r| EntailPair {
            premise: vocab.encode(&r.premise),
            hypothesis: vocab.encode(&r.hypothesis),
            label: r.label,
        })
        .collect()
}

pub fn load_entail(path: &Path, vocab: &Vocabulary) -> Result<Vec<EntailPair>> {
    Ok(encode_entail(&read_entail_raw(path)?.pairs, vocab))
}

pub fn write_entail(path: &Path, pairs: &[RawEntail]) -> Result<()> {
    let mut s = String::new();
    for p in pairs {
        let _ = writeln!(
            s,
            "{}\t{}\t{}",
            p.label.as_str(),
            p.premise.join(" "),
            p.hypothesis.join(" ")
        );
    }
    write_atomic(path, s.as_bytes())
}

/// Captions aligned with image feature rows.
#[derive(Clone, Debug, PartialEq)]
pub struct RetrievalCorpus {
    pub image_ids: Vec<String>,
    pub images: Vec<DenseVector>,
    pub captions: Vec<CaptionRecord>,
    /// Index into `images` for each caption.
    pub caption_image: Vec<usize>,
}

impl RetrievalCorpus {
    /// Every caption's image must appear in `features`; `path` names the
    /// caption source in errors.
    pub fn assemble(features: &FeatureMatrix, captions: Vec<CaptionRecord>, path: &Path) -> Result<Self> {
        let index: HashMap<&str, usize> = features
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let caption_image = captions
            .iter()
            .map(|c| {
                index.get(c.image_id.as_str()).copied().ok_or_else(|| {
                    Error::format(
                        path,
                        format!("caption '{}' refers to unknown image '{}'", c.caption_id, c.image_id),
                    )
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let images = (0..features.len())
            .map(|i| DenseVector::from(features.row(i)))
            .collect();
        Ok(Self {
            image_ids: features.ids.clone(),
            images,
            captions,
            caption_image,
        })
    }

    pub fn load(captions: &Path, features: &Path, vocab: &Vocabulary) -> Result<Self> {
        let f = super::load_features(features)?;
        Self::assemble(&f, load_captions(captions, vocab)?, captions)
    }

    pub fn feat_dim(&self) -> usize {
        self.images.first().map_or(0, DenseVector::dim)
    }

    /// The listed images (in the given order) with their captions.
    pub fn select_images(&self, images: &[usize]) -> Result<Self> {
        let mut new_index = vec![usize::MAX; self.images.len()];
        for (k, &i) in images.iter().enumerate() {
            if i >= self.images.len() || new_index[i] != usize::MAX {
                return Err(Error::contract(format!("bad or repeated image index {i}")));
            }
            new_index[i] = k;
        }
        let mut captions = Vec::new();
        let mut caption_image = Vec::new();
        for (c, &i) in self.captions.iter().zip(&self.caption_image) {
            if new_index[i] != usize::MAX {
                captions.push(c.clone());
                caption_image.push(new_index[i]);
            }
        }
        Ok(Self {
            image_ids: images.iter().map(|&i| self.image_ids[i].clone()).collect(),
            images: images.iter().map(|&i| self.images[i].clone()).collect(),
            captions,
            caption_image,
        })
    }

    pub fn caption_lengths(&self) -> Vec<usize> {
        self.captions.iter().map(|c| c.tokens.len()).collect()
    }
}
