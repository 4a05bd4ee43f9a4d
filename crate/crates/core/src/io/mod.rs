//! File formats.
//!
//! * edge lists: `child<TAB>parent`, one pair per line;
//! * split files: the same lines under `#train`, `#dev`, `#test` headers;
//! * labeled pair files: `child<TAB>parent<TAB>0|1`, optionally sectioned;
//! * vocabulary files: one token per line, line 0 is `<unk>`;
//! * `OEF1` feature matrices (see [`features`]);
//! * JSON-lines captions and tab-separated entailment pairs (see [`corpus`]);
//! * `OEC1` checkpoints (see [`checkpoint`]).
//!
//! Loaders reject structural problems instead of repairing them, and every
//! file is written via a temporary file and an atomic rename.

pub mod checkpoint;
pub mod corpus;
pub mod features;
pub mod text;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use corpus::{
    encode_captions, encode_entail, load_captions, load_entail, read_captions_raw, read_entail_raw, write_captions, write_entail,
    CaptionRecord, EntailData, EntailLabel, EntailPair, RawCaption, RawEntail, RetrievalCorpus,
};
pub use features::{decode_features, encode_features, load_features, save_features, FeatureMatrix};
pub use text::{
    read_edges, read_labeled, read_sections, read_split, read_vocab, write_edges, write_labeled,
    write_report, write_split, write_vocab, NamedSplit, Sections,
};

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|e| {
        Error::format(path, format!("invalid UTF-8 at byte {}", e.utf8_error().valid_up_to()))
    })
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
