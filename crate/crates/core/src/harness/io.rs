//! Flat-file persistence: JSON, JSONL and CSV, written atomically.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ising::{IsingInstance, TrialRecord};
use crate::oracle::OracleMethod;

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e))
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut out, row).map_err(|e| Error::format(path, e))?;
        out.push(b'\n');
    }
    write_atomic(path, &out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (k, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| Error::format(path, format!("line {}: {e}", k + 1)))?);
    }
    Ok(rows)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::format(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(path, e))?;
    write_atomic(path, &bytes)
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::format(path, e)))
        .collect()
}

/// Ground-truth line of an oracle file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundRecord {
    pub instance: String,
    pub n: usize,
    pub best_energy: f64,
    pub method: OracleMethod,
    pub effort: String,
}

/// All trials of one solver on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceTrials {
    pub instance: String,
    pub n: usize,
    pub solver: String,
    pub records: Vec<TrialRecord>,
}

/// Instance files at `path` (a `.json` file or a directory of them), as
/// `(stem, instance)` in natural name order.
pub fn load_instances(path: &Path) -> Result<Vec<(String, IsingInstance)>> {
    let files = if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort_by_key(|p| natural_key(&stem(p)));
        files
    } else {
        vec![path.to_path_buf()]
    };
    files
        .iter()
        .map(|p| Ok((stem(p), read_json::<IsingInstance>(p)?)))
        .collect()
}

pub fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Orders `maxcut_n20_i10` after `maxcut_n20_i9`.
pub fn natural_key(name: &str) -> Vec<(String, u64)> {
    let mut out = Vec::new();
    let mut text = String::new();
    let mut digits = String::new();
    for c in name.chars() {
        if c.is_ascii_digit() {
            digits.push(c);
        } else {
            if !digits.is_empty() {
                out.push((std::mem::take(&mut text), digits.parse().unwrap_or(u64::MAX)));
                digits.clear();
            }
            text.push(c);
        }
    }
    out.push((text, digits.parse().unwrap_or(0)));
    out
}

/// SHA-256 over every file below `dir` (relative path and contents, in path order).
pub fn archive_digest(dir: &Path) -> Result<String> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    files.sort();
    let mut h = Sha256::new();
    for rel in files {
        let bytes = fs::read(dir.join(&rel)).map_err(|e| Error::io(dir.join(&rel), e))?;
        h.update(rel.as_bytes());
        h.update([0u8]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else {
            let rel = p.strip_prefix(root).expect("below root");
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn natural_order() {
        let mut names = vec!["a_n20_i10", "a_n20_i9", "a_n100_i0", "a_n20_i0"];
        names.sort_by_key(|n| natural_key(n));
        assert_eq!(names, vec!["a_n20_i0", "a_n20_i9", "a_n20_i10", "a_n100_i0"]);
    }

    #[test]
    fn jsonl_and_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            GroundRecord {
                instance: "x".into(),
                n: 3,
                best_energy: -1.5,
                method: OracleMethod::Exhaustive,
                effort: "8 states".into(),
            };
            3
        ];
        let p = dir.path().join("sub/g.jsonl");
        write_jsonl(&p, &rows).unwrap();
        assert_eq!(read_jsonl::<GroundRecord>(&p).unwrap(), rows);

        #[derive(Debug, PartialEq, Serialize, Deserialize)]
        struct Row {
            a: f64,
            b: Option<f64>,
        }
        let rows = vec![Row { a: 0.1, b: None }, Row { a: 2.0, b: Some(1e-300) }];
        let p = dir.path().join("t.csv");
        write_csv(&p, &rows).unwrap();
        assert_eq!(read_csv::<Row>(&p).unwrap(), rows);
        assert!(!dir.path().join("t.csv.partial").exists());
    }

    #[test]
    fn digest_sees_names_and_bytes() {
        let a = tempfile::tempdir().unwrap();
        write_atomic(&a.path().join("x/1.txt"), b"one").unwrap();
        let d1 = archive_digest(a.path()).unwrap();
        write_atomic(&a.path().join("x/1.txt"), b"one!").unwrap();
        let d2 = archive_digest(a.path()).unwrap();
        assert_ne!(d1, d2);
        assert_eq!(d2, archive_digest(a.path()).unwrap());
    }
}
