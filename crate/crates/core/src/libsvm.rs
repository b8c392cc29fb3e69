//! LIBSVM / SVMlight text format.
//!
//! Each non-empty line is `label idx:val idx:val ...` with 1-based, strictly
//! increasing feature indices. `#` starts a comment that runs to the end of
//! the line.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Error, Result};
use crate::vectors::{Dataset, SparseVector};

/// Parses LIBSVM text.
///
/// Labels are remapped to `0..K` in the order of the sorted distinct label
/// values. With `binary_relabel` the only admissible labels are `-1` and
/// `+1`, which become classes 0 and 1 (always `K = 2`).
pub fn parse_libsvm(text: &[u8], binary_relabel: bool) -> Result<Dataset> {
    let text = core::str::from_utf8(text).map_err(|e| Error::Malformed {
        line: line_of_offset(text, e.valid_up_to()),
        msg: "invalid UTF-8".to_string(),
    })?;

    let mut rows: Vec<(i64, SparseVector)> = Vec::new();
    let mut dim = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let mut tokens = content.split_ascii_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let label = parse_label(label_tok, line)?;

        let mut indices = Vec::new();
        let mut values = Vec::new();
        for tok in tokens {
            let (idx_tok, val_tok) = tok.split_once(':').ok_or_else(|| Error::Malformed {
                line,
                msg: alloc::format!("expected `index:value`, found `{tok}`"),
            })?;
            let idx: usize = idx_tok.parse().map_err(|_| Error::Malformed {
                line,
                msg: alloc::format!("bad feature index `{idx_tok}`"),
            })?;
            if idx == 0 {
                return Err(Error::Malformed {
                    line,
                    msg: "feature indices are 1-based".to_string(),
                });
            }
            if let Some(&prev) = indices.last() {
                if idx - 1 <= prev {
                    return Err(Error::NonIncreasingIndex {
                        line,
                        prev: prev + 1,
                        next: idx,
                    });
                }
            }
            let val: f64 = match val_tok.parse() {
                Ok(v) if f64::is_finite(v) => v,
                _ => {
                    return Err(Error::NonNumeric {
                        line,
                        token: val_tok.to_string(),
                    })
                }
            };
            indices.push(idx - 1);
            values.push(val);
            dim = dim.max(idx);
        }
        // dim is fixed up once the whole file has been read
        let x = SparseVector::new(usize::MAX, indices, values)?;
        rows.push((label, x));
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let class_labels: Vec<i64> = if binary_relabel {
        if let Some((line, _)) = rows.iter().enumerate().find(|(_, (l, _))| *l != -1 && *l != 1) {
            return Err(Error::Malformed {
                line: line + 1,
                msg: "binary relabeling expects labels -1 / +1".to_string(),
            });
        }
        alloc::vec![-1, 1]
    } else {
        rows.iter()
            .map(|(l, _)| *l)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    };

    let mut instances = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (label, x) in rows {
        // class_labels is sorted, so the class id is its position
        let class = class_labels.binary_search(&label).expect("label collected above");
        labels.push(class);
        instances.push(x);
    }
    Dataset::new(instances, labels, dim, class_labels)
}

/// Canonical LIBSVM text for a dataset: original label values, 1-based
/// indices, shortest round-trip float formatting.
pub fn serialize_libsvm(data: &Dataset) -> String {
    let mut out = String::new();
    for (x, &y) in data.instances().iter().zip(data.labels()) {
        let _ = write!(out, "{}", data.class_labels()[y]);
        for (i, v) in x.iter() {
            let _ = write!(out, " {}:{}", i + 1, v);
        }
        out.push('\n');
    }
    out
}

fn parse_label(tok: &str, line: usize) -> Result<i64> {
    if let Ok(v) = tok.parse::<i64>() {
        return Ok(v);
    }
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() && v == (v as i64) as f64 => Ok(v as i64),
        _ => Err(Error::NonNumeric {
            line,
            token: tok.to_string(),
        }),
    }
}

fn line_of_offset(bytes: &[u8], offset: usize) -> usize {
    1 + bytes[..offset].iter().filter(|&&b| b == b'\n').count()
}
