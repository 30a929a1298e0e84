//! Plain-text dataset files.
//!
//! A dataset file starts with a header line `d n` followed by `n` lines of
//! `d` space-separated reals. Ground truth lives in a sidecar file next to it
//! (`<name>.truth`) holding one cluster id per line for every point and a
//! final `phistar <value>` line.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::diagnostics::fmt_real;
use crate::error::{Error, Result};
use crate::geometry::{CenterSet, Dataset, GroundTruth, Points};

/// Sidecar path holding the ground truth for `path`.
pub fn truth_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".truth");
    path.with_file_name(name)
}

pub fn write_dataset<P: Points + ?Sized, W: Write>(points: &P, out: &mut W) -> Result<()> {
    writeln!(out, "{} {}", points.dim(), points.len())?;
    for i in 0..points.len() {
        let row: Vec<String> = points.point(i).iter().map(|&c| fmt_real(c)).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn write_truth<W: Write>(truth: &GroundTruth, out: &mut W) -> Result<()> {
    for l in truth.labels() {
        writeln!(out, "{l}")?;
    }
    writeln!(out, "phistar {}", fmt_real(truth.phi_star()))?;
    Ok(())
}

fn write_atomically(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        body(&mut w)?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes the dataset and, when it has ground truth, the sidecar file.
pub fn save_dataset(x: &Dataset, path: &Path) -> Result<()> {
    write_atomically(path, |w| write_dataset(x, w))?;
    if let Some(truth) = x.ground_truth() {
        write_atomically(&truth_path(path), |w| write_truth(truth, w))?;
    }
    Ok(())
}

pub fn save_centers(c: &CenterSet, path: &Path) -> Result<()> {
    write_atomically(path, |w| write_dataset(c, w))
}

fn parse_count(token: Option<&str>, line: usize, what: &str) -> Result<usize> {
    let token = token.ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
    token
        .parse()
        .map_err(|_| Error::parse(line, format!("{what} `{token}` is not a nonnegative integer")))
}

/// Reads the `d n` format. Trailing blank lines are ignored.
pub fn read_dataset<R: BufRead>(input: R) -> Result<Dataset> {
    let mut lines = input.lines();
    let header = match lines.next() {
        Some(l) => l?,
        None => return Err(Error::parse(1, "empty file, expected header `d n`")),
    };
    let mut tokens = header.split_whitespace();
    let dim = parse_count(tokens.next(), 1, "dimension")?;
    let n = parse_count(tokens.next(), 1, "point count")?;
    if tokens.next().is_some() {
        return Err(Error::parse(1, "header must be exactly `d n`"));
    }
    if dim == 0 {
        return Err(Error::parse(1, "dimension must be >= 1"));
    }
    let mut coords = Vec::with_capacity(dim * n);
    for row in 0..n {
        let line_no = row + 2;
        let line = match lines.next() {
            Some(l) => l?,
            None => {
                return Err(Error::parse(
                    line_no,
                    format!("expected {n} points, found {row}"),
                ))
            }
        };
        let before = coords.len();
        for token in line.split_whitespace() {
            let v: f64 = token
                .parse()
                .map_err(|_| Error::parse(line_no, format!("`{token}` is not a number")))?;
            if !v.is_finite() {
                return Err(Error::parse(line_no, format!("non-finite value `{token}`")));
            }
            coords.push(v);
        }
        let found = coords.len() - before;
        if found != dim {
            return Err(Error::parse(
                line_no,
                format!("expected {dim} coordinates, found {found}"),
            ));
        }
    }
    for (extra, line) in lines.enumerate() {
        if !line?.trim().is_empty() {
            return Err(Error::parse(n + 2 + extra, "unexpected content after the last point"));
        }
    }
    Dataset::new(dim, coords)
}

/// Reads a sidecar: per-point cluster ids then `phistar <value>`.
pub fn read_truth<R: BufRead>(input: R, x: &Dataset) -> Result<GroundTruth> {
    let mut labels = Vec::with_capacity(x.len());
    let mut phi_star = None;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if phi_star.is_some() {
            return Err(Error::parse(line_no, "content after the phistar line"));
        }
        if let Some(rest) = trimmed.strip_prefix("phistar") {
            let v: f64 = rest
                .trim()
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad phistar value `{}`", rest.trim())))?;
            phi_star = Some(v);
        } else {
            labels.push(
                trimmed
                    .parse::<usize>()
                    .map_err(|_| Error::parse(line_no, format!("bad cluster id `{trimmed}`")))?,
            );
        }
    }
    let phi_star = phi_star.ok_or_else(|| Error::parse(labels.len() + 1, "missing phistar line"))?;
    if labels.len() != x.len() {
        return Err(Error::parse(
            labels.len() + 1,
            format!("{} cluster ids for {} points", labels.len(), x.len()),
        ));
    }
    GroundTruth::from_labels(x, labels)?.with_recorded_phi_star(phi_star)
}

/// Loads a dataset and, if present, its ground-truth sidecar.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let x = read_dataset(BufReader::new(File::open(path)?))?;
    let label = path.display().to_string();
    let sidecar = truth_path(path);
    let x = if sidecar.exists() {
        let truth = read_truth(BufReader::new(File::open(&sidecar)?), &x)?;
        x.with_ground_truth(truth)?
    } else {
        x
    };
    Ok(x.with_label(label))
}

/// Loads a center file (same format as datasets); centers are synthetic.
pub fn load_centers(path: &Path) -> Result<CenterSet> {
    let x = read_dataset(BufReader::new(File::open(path)?))?;
    Ok(CenterSet::from_points(&x))
}
