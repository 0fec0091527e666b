//! File formats.
//!
//! Clouds are plain text by default:
//!
//! ```text
//! # columns=<n> features=<F> has_label=<0|1>
//! x y z f1 .. fF [label]
//! ```
//!
//! `n = 3 + F + has_label`; an ignored label is written as `-1`. Files whose
//! name ends in `.bin` use a little-endian binary layout instead:
//! magic `WSSEGCLD`, u32 version, u64 point count, u32 feature count,
//! u8 label flag, then per point the f64 coordinates and features and an
//! optional u32 label.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::cloud::{ClassCatalog, LabelArray, PointCloud};
use crate::error::{Error, Result};

pub const CLOUD_MAGIC: &[u8; 8] = b"WSSEGCLD";
const CLOUD_VERSION: u32 = 1;

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_cloud(path: &Path, cloud: &PointCloud, labels: Option<&LabelArray>) -> Result<()> {
    if is_binary(path) {
        std::fs::write(path, cloud_to_bytes(cloud, labels)?).map_err(|e| Error::io(path, e))
    } else {
        write_text(path, &cloud_to_text(cloud, labels)?)
    }
}

/// Reads either format; binary files are recognized by their magic.
pub fn read_cloud(path: &Path) -> Result<(PointCloud, Option<LabelArray>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(CLOUD_MAGIC) {
        return cloud_from_bytes(&bytes);
    }
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::Data(format!("{} is neither a text nor a binary cloud", path.display())))?;
    cloud_from_text(&text, path)
}

fn check_labels(cloud: &PointCloud, labels: Option<&LabelArray>) -> Result<()> {
    match labels {
        Some(l) if l.len() != cloud.len() => Err(Error::contract(format!(
            "{} labels for {} points",
            l.len(),
            cloud.len()
        ))),
        _ => Ok(()),
    }
}

pub fn cloud_to_text(cloud: &PointCloud, labels: Option<&LabelArray>) -> Result<String> {
    check_labels(cloud, labels)?;
    let f = cloud.feature_width();
    let has_label = labels.is_some() as usize;
    let mut out = format!("# columns={} features={f} has_label={has_label}\n", 3 + f + has_label);
    for (i, p) in cloud.coords().iter().enumerate() {
        let _ = write!(out, "{} {} {}", p[0], p[1], p[2]);
        for v in cloud.feature_row(i) {
            let _ = write!(out, " {v}");
        }
        if let Some(l) = labels {
            match l.get(i) {
                Some(c) => {
                    let _ = write!(out, " {c}");
                }
                None => out.push_str(" -1"),
            }
        }
        out.push('\n');
    }
    Ok(out)
}

fn header_value(header: &str, key: &str) -> Option<usize> {
    header
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix(key)?.strip_prefix('=')?.parse().ok())
}

pub fn cloud_from_text(text: &str, origin: &Path) -> Result<(PointCloud, Option<LabelArray>)> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .map(|(_, l)| l.trim())
        .filter(|l| l.starts_with('#'))
        .ok_or_else(|| err(1, "missing `# columns=.. features=.. has_label=..` header".into()))?;
    let (columns, features, has_label) = match (
        header_value(header, "columns"),
        header_value(header, "features"),
        header_value(header, "has_label"),
    ) {
        (Some(c), Some(f), Some(h)) if h <= 1 => (c, f, h == 1),
        _ => return Err(err(1, format!("malformed header `{header}`"))),
    };
    if columns != 3 + features + has_label as usize {
        return Err(err(
            1,
            format!("header declares {columns} columns but 3 + {features} features + {} label", has_label as u8),
        ));
    }
    let mut coords = Vec::new();
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    for (n, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != columns {
            return Err(err(n + 1, format!("expected {columns} columns, found {}", fields.len())));
        }
        let mut values = Vec::with_capacity(3 + features);
        for tok in &fields[..3 + features] {
            let v: f64 = tok
                .parse()
                .map_err(|_| err(n + 1, format!("`{tok}` is not a number")))?;
            if !v.is_finite() {
                return Err(err(n + 1, format!("non-finite value `{tok}`")));
            }
            values.push(v);
        }
        coords.push([values[0], values[1], values[2]]);
        feats.extend_from_slice(&values[3..]);
        if has_label {
            let tok = fields[columns - 1];
            let label = match tok.parse::<i64>() {
                Ok(-1) => LabelArray::IGNORE,
                Ok(v) if (0..u32::MAX as i64).contains(&v) => v as u32,
                _ => return Err(err(n + 1, format!("`{tok}` is not a class index"))),
            };
            labels.push(label);
        }
    }
    let cloud = PointCloud::new(coords, feats, features)?;
    Ok((cloud, has_label.then(|| LabelArray::new(labels))))
}

pub fn cloud_to_bytes(cloud: &PointCloud, labels: Option<&LabelArray>) -> Result<Vec<u8>> {
    check_labels(cloud, labels)?;
    let f = cloud.feature_width();
    let mut out = Vec::with_capacity(25 + cloud.len() * (8 * (3 + f) + 4));
    out.extend_from_slice(CLOUD_MAGIC);
    out.extend_from_slice(&CLOUD_VERSION.to_le_bytes());
    out.extend_from_slice(&(cloud.len() as u64).to_le_bytes());
    out.extend_from_slice(&(f as u32).to_le_bytes());
    out.push(labels.is_some() as u8);
    for (i, p) in cloud.coords().iter().enumerate() {
        for v in p.iter().chain(cloud.feature_row(i)) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(l) = labels {
            out.extend_from_slice(&l.as_slice()[i].to_le_bytes());
        }
    }
    Ok(out)
}

pub fn cloud_from_bytes(bytes: &[u8]) -> Result<(PointCloud, Option<LabelArray>)> {
    let short = || Error::Data("binary cloud is truncated".into());
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(short)?;
        pos += n;
        Ok(s)
    };
    if take(8)? != CLOUD_MAGIC {
        return Err(Error::Data("not a binary cloud: bad magic".into()));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != CLOUD_VERSION {
        return Err(Error::Data(format!("unsupported cloud version {version}")));
    }
    let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let f = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let has_label = match take(1)?[0] {
        0 => false,
        1 => true,
        other => return Err(Error::Data(format!("bad label flag {other}"))),
    };
    let record = 8 * (3 + f) + if has_label { 4 } else { 0 };
    if bytes.len() - 25 != n.checked_mul(record).ok_or_else(short)? {
        return Err(Error::Data(format!(
            "binary cloud holds {} payload bytes, expected {n} x {record}",
            bytes.len() - 25
        )));
    }
    let mut coords = Vec::with_capacity(n);
    let mut feats = Vec::with_capacity(n * f);
    let mut labels = Vec::new();
    for _ in 0..n {
        let mut row = [0.0; 3];
        for v in row.iter_mut() {
            *v = f64::from_le_bytes(take(8)?.try_into().unwrap());
        }
        coords.push(row);
        for _ in 0..f {
            feats.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
        }
        if has_label {
            labels.push(u32::from_le_bytes(take(4)?.try_into().unwrap()));
        }
    }
    let cloud = PointCloud::new(coords, feats, f)?;
    Ok((cloud, has_label.then(|| LabelArray::new(labels))))
}

/// One class name per line; blank lines and `#` comments are skipped.
pub fn read_catalog(path: &Path) -> Result<ClassCatalog> {
    let names = read_text(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect();
    ClassCatalog::new(names)
}

pub fn write_catalog(path: &Path, catalog: &ClassCatalog) -> Result<()> {
    let text: String = catalog.names().iter().map(|n| format!("{n}\n")).collect();
    write_text(path, &text)
}

/// Per-point probabilities, one row per line, with a `# classes=K` header.
pub fn write_probs(path: &Path, probs: &Array2<f64>) -> Result<()> {
    let mut out = format!("# classes={}\n", probs.ncols());
    for row in probs.rows() {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn read_probs(path: &Path) -> Result<Array2<f64>> {
    let text = read_text(path)?;
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let k = lines
        .next()
        .and_then(|(_, l)| header_value(l, "classes"))
        .ok_or_else(|| err(1, "missing `# classes=K` header".into()))?;
    let mut values = Vec::new();
    let mut rows = 0;
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| err(n + 1, format!("`{t}` is not a number"))))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != k {
            return Err(err(n + 1, format!("expected {k} values, found {}", row.len())));
        }
        values.extend(row);
        rows += 1;
    }
    Ok(Array2::from_shape_vec((rows, k), values).expect("row lengths checked"))
}

/// `x y z h` lines, `h` the normalized entropy of each point.
pub fn write_entropy_map(path: &Path, cloud: &PointCloud, values: &[f64]) -> Result<()> {
    if values.len() != cloud.len() {
        return Err(Error::contract(format!(
            "{} entropy values for {} points",
            values.len(),
            cloud.len()
        )));
    }
    let mut out = String::from("# x y z normalized_entropy\n");
    for (p, h) in cloud.coords().iter().zip(values) {
        let _ = writeln!(out, "{} {} {} {h}", p[0], p[1], p[2]);
    }
    write_text(path, &out)
}
