use std::fmt::Write as _;
use std::path::Path;

use crate::encoders::{Vocabulary, UNK_TOKEN};
use crate::error::{Error, Result};
use crate::eval::MetricReport;

use super::{read_text, write_atomic};

pub type NamedPair = (String, String);
/// A data row with its 1-based line number.
pub type NumberedRow = (usize, Vec<String>);
/// `(child, parent, label)`.
pub type LabeledRow = (String, String, bool);

/// Lines grouped under `#name` headers. Lines before the first header land
/// in a section named `""`. Each row keeps its 1-based line number.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sections {
    pub sections: Vec<(String, Vec<NumberedRow>)>,
}

impl Sections {
    pub fn get(&self, name: &str) -> Option<&[NumberedRow]> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, rows)| rows.as_slice())
    }
}

/// Splits a tab-separated file into sections, checking every data row has
/// exactly `columns` fields. Blank lines are ignored.
pub fn read_sections(path: &Path, columns: usize) -> Result<Sections> {
    let text = read_text(path)?;
    let mut out = Sections::default();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('#') {
            let name = name.trim().to_string();
            if out.sections.iter().any(|(n, _)| *n == name) {
                return Err(Error::format(path, format!("line {lineno}: repeated section '#{name}'")));
            }
            out.sections.push((name, Vec::new()));
            continue;
        }
        let fields: Vec<String> = line.split('\t').map(str::to_string).collect();
        if fields.len() != columns || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::format(
                path,
                format!("line {lineno}: expected {columns} non-empty tab-separated fields"),
            ));
        }
        if out.sections.is_empty() {
            out.sections.push((String::new(), Vec::new()));
        }
        out.sections.last_mut().expect("just pushed").1.push((lineno, fields));
    }
    Ok(out)
}

fn pair_rows(rows: &[NumberedRow]) -> Vec<NamedPair> {
    rows.iter().map(|(_, f)| (f[0].clone(), f[1].clone())).collect()
}

pub fn read_edges(path: &Path) -> Result<Vec<NamedPair>> {
    let s = read_sections(path, 2)?;
    if let Some((name, _)) = s.sections.iter().find(|(n, _)| !n.is_empty()) {
        return Err(Error::format(path, format!("unexpected section '#{name}' in edge list")));
    }
    Ok(s.get("").map(pair_rows).unwrap_or_default())
}

fn write_pair_lines(out: &mut String, pairs: &[NamedPair]) {
    for (c, p) in pairs {
        let _ = writeln!(out, "{c}\t{p}");
    }
}

fn check_name(path: &Path, name: &str) -> Result<()> {
    if name.is_empty() || name.contains(['\t', '\n', '\r']) || name.starts_with('#') {
        return Err(Error::format(path, format!("name {name:?} cannot be written to a pair file")));
    }
    Ok(())
}

pub fn write_edges(path: &Path, pairs: &[NamedPair]) -> Result<()> {
    for (c, p) in pairs {
        check_name(path, c)?;
        check_name(path, p)?;
    }
    let mut s = String::new();
    write_pair_lines(&mut s, pairs);
    write_atomic(path, s.as_bytes())
}

/// A split expressed with concept names.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NamedSplit {
    pub train: Vec<NamedPair>,
    pub dev: Vec<NamedPair>,
    pub test: Vec<NamedPair>,
}

pub fn read_split(path: &Path) -> Result<NamedSplit> {
    let s = read_sections(path, 2)?;
    for (name, rows) in &s.sections {
        if !matches!(name.as_str(), "train" | "dev" | "test") {
            let line = rows.first().map_or(0, |r| r.0);
            return Err(Error::format(
                path,
                format!("unknown section '#{name}' (near line {line}); expected #train, #dev, #test"),
            ));
        }
    }
    let part = |n: &str| -> Result<Vec<NamedPair>> {
        s.get(n)
            .map(pair_rows)
            .ok_or_else(|| Error::format(path, format!("missing section '#{n}'")))
    };
    Ok(NamedSplit {
        train: part("train")?,
        dev: part("dev")?,
        test: part("test")?,
    })
}

pub fn write_split(path: &Path, split: &NamedSplit) -> Result<()> {
    let mut s = String::new();
    for (name, pairs) in [("train", &split.train), ("dev", &split.dev), ("test", &split.test)] {
        for (c, p) in pairs {
            check_name(path, c)?;
            check_name(path, p)?;
        }
        let _ = writeln!(s, "#{name}");
        write_pair_lines(&mut s, pairs);
    }
    write_atomic(path, s.as_bytes())
}

/// Reads `child<TAB>parent<TAB>0|1` rows, grouped by section.
pub fn read_labeled(path: &Path) -> Result<Vec<(String, Vec<LabeledRow>)>> {
    let s = read_sections(path, 3)?;
    s.sections
        .iter()
        .map(|(name, rows)| {
            let items = rows
                .iter()
                .map(|(lineno, f)| {
                    let label = match f[2].as_str() {
                        "1" => true,
                        "0" => false,
                        other => {
                            return Err(Error::format(
                                path,
                                format!("line {lineno}: label must be 0 or 1, got '{other}'"),
                            ))
                        }
                    };
                    Ok((f[0].clone(), f[1].clone(), label))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((name.clone(), items))
        })
        .collect()
}

pub fn write_labeled(path: &Path, sections: &[(&str, Vec<LabeledRow>)]) -> Result<()> {
    let mut s = String::new();
    for (name, rows) in sections {
        if !name.is_empty() {
            let _ = writeln!(s, "#{name}");
        }
        for (c, p, label) in rows {
            check_name(path, c)?;
            check_name(path, p)?;
            let _ = writeln!(s, "{c}\t{p}\t{}", u8::from(*label));
        }
    }
    write_atomic(path, s.as_bytes())
}

pub fn read_vocab(path: &Path) -> Result<Vocabulary> {
    let text = read_text(path)?;
    let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));
    match lines.next() {
        Some(UNK_TOKEN) => {}
        _ => return Err(Error::format(path, format!("line 1 must be '{UNK_TOKEN}'"))),
    }
    let tokens: Vec<&str> = lines.collect();
    if let Some(i) = tokens.iter().position(|t| t.is_empty()) {
        return Err(Error::format(path, format!("line {}: empty token", i + 2)));
    }
    Vocabulary::from_tokens(tokens.iter().copied()).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_vocab(path: &Path, vocab: &Vocabulary) -> Result<()> {
    let mut s = String::new();
    for t in vocab.tokens() {
        let _ = writeln!(s, "{t}");
    }
    write_atomic(path, s.as_bytes())
}

pub fn write_report(path: &Path, report: &MetricReport) -> Result<()> {
    write_atomic(path, report.to_tsv().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn named(v: &[(&str, &str)]) -> Vec<NamedPair> {
        v.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn edges_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.tsv");
        let edges = named(&[("dog", "canine"), ("canine", "animal")]);
        write_edges(&p, &edges).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "dog\tcanine\ncanine\tanimal\n");
        assert_eq!(read_edges(&p).unwrap(), edges);
    }

    #[test]
    fn malformed_edge_line_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.tsv");
        std::fs::write(&p, "a\tb\n\nc d\n").unwrap();
        let err = read_edges(&p).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn split_round_trip_and_missing_section() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.tsv");
        let split = NamedSplit {
            train: named(&[("a", "b"), ("b", "c")]),
            dev: named(&[("a", "c")]),
            test: vec![],
        };
        write_split(&p, &split).unwrap();
        assert_eq!(read_split(&p).unwrap(), split);
        std::fs::write(&p, "#train\na\tb\n#dev\n").unwrap();
        assert!(matches!(read_split(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn labeled_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.tsv");
        let rows = vec![("a".into(), "b".into(), true), ("b".into(), "a".into(), false)];
        write_labeled(&p, &[("dev", rows.clone()), ("test", vec![])]).unwrap();
        let back = read_labeled(&p).unwrap();
        assert_eq!(back[0], ("dev".to_string(), rows));
        std::fs::write(&p, "a\tb\t2\n").unwrap();
        assert!(read_labeled(&p).unwrap_err().to_string().contains("line 1"));
    }

    #[test]
    fn vocab_requires_unk_first() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.txt");
        let v = Vocabulary::from_tokens(["the", "dog"]).unwrap();
        write_vocab(&p, &v).unwrap();
        assert_eq!(read_vocab(&p).unwrap(), v);
        std::fs::write(&p, "the\n<unk>\n").unwrap();
        assert!(read_vocab(&p).is_err());
    }
}
