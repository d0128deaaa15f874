//! Text artifacts shared between runs and commands: configuration
//! matrices, sensing dictionaries, labeled datasets, decision-network
//! models, and the CSV report tables.
//!
//! Numeric fields are written with Rust's shortest round-trip formatting,
//! so reading an artifact back reproduces the original values bit for
//! bit. Headers carry content hashes of upstream artifacts; downstream
//! commands verify them and refuse mismatched inputs. No artifact
//! contains timestamps: a config plus seed determines every byte.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::coherence::CoherenceVector;
use crate::error::{Error, Result};
use crate::fcao::IterationRecord;
use crate::recognizer::{
    Activation, DecisionNetwork, EvaluationReport, LabeledDataset, SplitTag, Standardizer,
};
use crate::ris::{ConfigurationMatrix, FrameConfiguration};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

fn malformed(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::MalformedArtifact {
        path: path.display().to_string(),
        line,
        reason: reason.into(),
    }
}

fn header_value<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    line.strip_prefix('#')
        .map(str::trim)
        .and_then(|rest| rest.strip_prefix(key))
        .and_then(|rest| rest.strip_prefix('='))
        .map(str::trim)
}

// ---------------------------------------------------------------------------
// Configuration matrix: one line per frame, L*N_a space-separated fields.
// ---------------------------------------------------------------------------

fn configuration_body(matrix: &ConfigurationMatrix) -> String {
    let mut body = String::new();
    for frame in matrix.frames() {
        let fields: Vec<String> = frame.as_flat().iter().map(|v| format!("{v}")).collect();
        body.push_str(&fields.join(" "));
        body.push('\n');
    }
    body
}

/// Content hash of a configuration matrix (over its data lines only).
pub fn configuration_hash(matrix: &ConfigurationMatrix) -> String {
    sha256_hex(configuration_body(matrix).as_bytes())
}

pub fn write_configuration(
    path: impl AsRef<Path>,
    matrix: &ConfigurationMatrix,
    dictionary_hash: Option<&str>,
) -> Result<()> {
    let mut text = String::new();
    let _ = writeln!(text, "# ris-configuration v1");
    let _ = writeln!(
        text,
        "# frames={} groups={} states={}",
        matrix.frame_count(),
        matrix.group_count(),
        matrix.state_count()
    );
    let _ = writeln!(text, "# delta={}", matrix.frame_length);
    if let Some(hash) = dictionary_hash {
        let _ = writeln!(text, "# a_hash={hash}");
    }
    text.push_str(&configuration_body(matrix));
    fs::write(path, text)?;
    Ok(())
}

/// A configuration matrix read back from disk, with the dictionary hash
/// it was optimized against (when recorded).
pub struct StoredConfiguration {
    pub matrix: ConfigurationMatrix,
    pub dictionary_hash: Option<String>,
}

pub fn read_configuration(path: impl AsRef<Path>) -> Result<StoredConfiguration> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut shape: Option<(usize, usize, usize)> = None;
    let mut delta = 1.0f64;
    let mut dictionary_hash = None;
    let mut frames = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(v) = header_value(line, "delta") {
                delta = v.parse().map_err(|_| malformed(path, lineno, "bad delta"))?;
            } else if let Some(v) = header_value(line, "a_hash") {
                dictionary_hash = Some(v.to_string());
            } else if let Some(rest) = line.strip_prefix("# frames=") {
                let fields: Vec<usize> = rest
                    .split_whitespace()
                    .filter_map(|f| f.split('=').next_back())
                    .filter_map(|f| f.parse().ok())
                    .collect();
                if fields.len() != 3 {
                    return Err(malformed(path, lineno, "bad shape header"));
                }
                shape = Some((fields[0], fields[1], fields[2]));
            }
            continue;
        }
        let (_, groups, states) =
            shape.ok_or_else(|| malformed(path, lineno, "data before shape header"))?;
        let values: std::result::Result<Vec<f64>, _> =
            line.split_whitespace().map(str::parse).collect();
        let values = values.map_err(|_| malformed(path, lineno, "non-numeric duration"))?;
        if values.len() != groups * states {
            return Err(malformed(
                path,
                lineno,
                format!("expected {} fields, found {}", groups * states, values.len()),
            ));
        }
        frames.push(FrameConfiguration::from_flat(groups, states, values)?);
    }
    let (frames_n, _, _) = shape.ok_or_else(|| malformed(path, 0, "missing shape header"))?;
    if frames.len() != frames_n {
        return Err(malformed(
            path,
            0,
            format!("expected {frames_n} frame lines, found {}", frames.len()),
        ));
    }
    let matrix = ConfigurationMatrix::new(frames, delta)?;
    Ok(StoredConfiguration { matrix, dictionary_hash })
}

// ---------------------------------------------------------------------------
// Sensing dictionary: header (shape, carrier, scene hash) + rows of
// "re im" pairs.
// ---------------------------------------------------------------------------

fn dictionary_body(dictionary: &crate::channel::SensingDictionary) -> String {
    let a = dictionary.matrix();
    let mut body = String::new();
    for r in 0..a.nrows() {
        let mut fields = Vec::with_capacity(2 * a.ncols());
        for c in 0..a.ncols() {
            let v = a[(r, c)];
            fields.push(format!("{}", v.re));
            fields.push(format!("{}", v.im));
        }
        body.push_str(&fields.join(" "));
        body.push('\n');
    }
    body
}

/// Content hash of a dictionary (data lines plus carrier and scene hash,
/// so regenerating from the same config reproduces it).
pub fn dictionary_hash(
    dictionary: &crate::channel::SensingDictionary,
    carrier_frequency: f64,
    scene_hash: &str,
) -> String {
    let mut content = format!("fc={carrier_frequency} scene={scene_hash}\n");
    content.push_str(&dictionary_body(dictionary));
    sha256_hex(content.as_bytes())
}

pub fn write_dictionary(
    path: impl AsRef<Path>,
    dictionary: &crate::channel::SensingDictionary,
    carrier_frequency: f64,
    scene_hash: &str,
) -> Result<()> {
    let a = dictionary.matrix();
    let mut text = String::new();
    let _ = writeln!(text, "# sensing-dictionary v1");
    let _ = writeln!(
        text,
        "# rows={} cols={} groups={} states={}",
        a.nrows(),
        a.ncols(),
        dictionary.group_count(),
        dictionary.state_count()
    );
    let _ = writeln!(text, "# fc={carrier_frequency}");
    let _ = writeln!(text, "# scene_hash={scene_hash}");
    text.push_str(&dictionary_body(dictionary));
    fs::write(path, text)?;
    Ok(())
}

pub fn read_dictionary(path: impl AsRef<Path>) -> Result<crate::channel::SensingDictionary> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut shape = None;
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(rest) = line.strip_prefix("# rows=") {
                let fields: Vec<usize> = rest
                    .split_whitespace()
                    .filter_map(|f| f.split('=').next_back())
                    .filter_map(|f| f.parse().ok())
                    .collect();
                if fields.len() != 4 {
                    return Err(malformed(path, lineno, "bad shape header"));
                }
                shape = Some((fields[0], fields[1], fields[2], fields[3]));
            }
            continue;
        }
        let (_, cols, _, _) =
            shape.ok_or_else(|| malformed(path, lineno, "data before shape header"))?;
        let values: std::result::Result<Vec<f64>, _> =
            line.split_whitespace().map(str::parse).collect();
        let values = values.map_err(|_| malformed(path, lineno, "non-numeric entry"))?;
        if values.len() != 2 * cols {
            return Err(malformed(
                path,
                lineno,
                format!("expected {} fields, found {}", 2 * cols, values.len()),
            ));
        }
        rows.push(values.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect());
    }
    let (nrows, cols, groups, states) =
        shape.ok_or_else(|| malformed(path, 0, "missing shape header"))?;
    if rows.len() != nrows {
        return Err(malformed(path, 0, format!("expected {nrows} rows, found {}", rows.len())));
    }
    let matrix = ndarray::Array2::from_shape_fn((nrows, cols), |(r, c)| rows[r][c]);
    crate::channel::SensingDictionary::from_matrix(matrix, groups, states)
}

// ---------------------------------------------------------------------------
// Labeled datasets: CSV with provenance headers.
// ---------------------------------------------------------------------------

/// Provenance carried in a dataset header.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetProvenance {
    pub t_hash: String,
    pub a_hash: String,
    pub seed: u64,
}

pub fn write_dataset(
    path: impl AsRef<Path>,
    dataset: &LabeledDataset,
    provenance: &DatasetProvenance,
) -> Result<()> {
    let k = dataset.measurement_len();
    let mut text = String::new();
    let _ = writeln!(text, "# dataset v1");
    let _ = writeln!(text, "# t_hash={}", provenance.t_hash);
    let _ = writeln!(text, "# a_hash={}", provenance.a_hash);
    let _ = writeln!(text, "# seed={}", provenance.seed);
    let split = match dataset.split {
        SplitTag::Train => "train",
        SplitTag::Test => "test",
    };
    let _ = writeln!(text, "# k={k} classes={} split={split}", dataset.class_count);
    let mut header = vec!["label".to_string()];
    for i in 1..=k {
        header.push(format!("re{i}"));
        header.push(format!("im{i}"));
    }
    let _ = writeln!(text, "{}", header.join(","));
    for (y, label) in &dataset.samples {
        let mut fields = vec![label.to_string()];
        for v in y {
            fields.push(format!("{}", v.re));
            fields.push(format!("{}", v.im));
        }
        let _ = writeln!(text, "{}", fields.join(","));
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<(LabeledDataset, DatasetProvenance)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut t_hash = None;
    let mut a_hash = None;
    let mut seed = None;
    let mut k = None;
    let mut classes = None;
    let mut split = SplitTag::Train;
    let mut saw_column_header = false;
    let mut samples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(v) = header_value(line, "t_hash") {
                t_hash = Some(v.to_string());
            } else if let Some(v) = header_value(line, "a_hash") {
                a_hash = Some(v.to_string());
            } else if let Some(v) = header_value(line, "seed") {
                seed = Some(v.parse().map_err(|_| malformed(path, lineno, "bad seed"))?);
            } else if let Some(rest) = line.strip_prefix("# k=") {
                let mut it = rest.split_whitespace();
                k = it.next().and_then(|f| f.parse().ok());
                classes = it
                    .next()
                    .and_then(|f| f.strip_prefix("classes="))
                    .and_then(|f| f.parse().ok());
                if let Some(tag) = it.next().and_then(|f| f.strip_prefix("split=")) {
                    split = if tag == "test" { SplitTag::Test } else { SplitTag::Train };
                }
            }
            continue;
        }
        if !saw_column_header {
            if !line.starts_with("label,") {
                return Err(malformed(path, lineno, "missing column header"));
            }
            saw_column_header = true;
            continue;
        }
        let k = k.ok_or_else(|| malformed(path, lineno, "missing k header"))?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 1 + 2 * k {
            return Err(malformed(
                path,
                lineno,
                format!("expected {} fields, found {}", 1 + 2 * k, fields.len()),
            ));
        }
        let label: usize =
            fields[0].parse().map_err(|_| malformed(path, lineno, "bad label"))?;
        let mut y = Vec::with_capacity(k);
        for pair in fields[1..].chunks(2) {
            let re: f64 =
                pair[0].parse().map_err(|_| malformed(path, lineno, "bad real field"))?;
            let im: f64 =
                pair[1].parse().map_err(|_| malformed(path, lineno, "bad imag field"))?;
            y.push(Complex64::new(re, im));
        }
        samples.push((y, label));
    }
    let classes = classes.ok_or_else(|| malformed(path, 0, "missing classes header"))?;
    let dataset = LabeledDataset::new(samples, classes, split)?;
    let provenance = DatasetProvenance {
        t_hash: t_hash.ok_or_else(|| malformed(path, 0, "missing t_hash"))?,
        a_hash: a_hash.ok_or_else(|| malformed(path, 0, "missing a_hash"))?,
        seed: seed.ok_or_else(|| malformed(path, 0, "missing seed"))?,
    };
    Ok((dataset, provenance))
}

// ---------------------------------------------------------------------------
// Decision-network model file.
// ---------------------------------------------------------------------------

pub fn write_model(path: impl AsRef<Path>, net: &DecisionNetwork) -> Result<()> {
    let mut text = String::new();
    let _ = writeln!(text, "# decision-network v1");
    let sizes: Vec<String> = net.layer_sizes().iter().map(|s| s.to_string()).collect();
    let _ = writeln!(text, "# layers={}", sizes.join(","));
    let _ = writeln!(text, "# activation={}", net.activation().tag());
    let _ = writeln!(text, "# standardize={}", u8::from(net.standardizer().is_some()));
    if let Some(s) = net.standardizer() {
        let mean: Vec<String> = s.mean.iter().map(|v| format!("{v}")).collect();
        let scale: Vec<String> = s.scale.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(text, "mean {}", mean.join(" "));
        let _ = writeln!(text, "scale {}", scale.join(" "));
    }
    let theta: Vec<String> = net.parameters().iter().map(|v| format!("{v}")).collect();
    let _ = writeln!(text, "theta {}", theta.join(" "));
    fs::write(path, text)?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<DecisionNetwork> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut sizes: Option<Vec<usize>> = None;
    let mut activation = Activation::Relu;
    let mut mean: Option<Vec<f64>> = None;
    let mut scale: Option<Vec<f64>> = None;
    let mut theta: Option<Vec<f64>> = None;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(v) = header_value(line, "layers") {
            let parsed: std::result::Result<Vec<usize>, _> =
                v.split(',').map(str::parse).collect();
            sizes = Some(parsed.map_err(|_| malformed(path, lineno, "bad layer sizes"))?);
        } else if let Some(v) = header_value(line, "activation") {
            activation = Activation::from_tag(v)?;
        } else if let Some(rest) = line.strip_prefix("mean ") {
            mean = Some(parse_floats(rest, path, lineno)?);
        } else if let Some(rest) = line.strip_prefix("scale ") {
            scale = Some(parse_floats(rest, path, lineno)?);
        } else if let Some(rest) = line.strip_prefix("theta ") {
            theta = Some(parse_floats(rest, path, lineno)?);
        }
    }
    let sizes = sizes.ok_or_else(|| malformed(path, 0, "missing layer sizes"))?;
    let theta = theta.ok_or_else(|| malformed(path, 0, "missing parameters"))?;
    let standardizer = match (mean, scale) {
        (Some(mean), Some(scale)) => Some(Standardizer { mean, scale }),
        (None, None) => None,
        _ => return Err(malformed(path, 0, "incomplete standardizer")),
    };
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for h in 0..sizes.len() - 1 {
        weights.push(ndarray::Array2::zeros((sizes[h + 1], sizes[h])));
        biases.push(vec![0.0; sizes[h + 1]]);
    }
    let mut net =
        DecisionNetwork::from_parts(sizes, activation, weights, biases, standardizer)?;
    net.set_parameters(&theta)?;
    Ok(net)
}

fn parse_floats(fields: &str, path: &Path, lineno: usize) -> Result<Vec<f64>> {
    fields
        .split_whitespace()
        .map(|f| f.parse().map_err(|_| malformed(path, lineno, "bad float field")))
        .collect()
}

// ---------------------------------------------------------------------------
// Report tables.
// ---------------------------------------------------------------------------

/// `iteration,frame_index,mu` rows; the initial coherence appears as
/// iteration 0 with an empty frame field.
pub fn write_mu_history(
    path: impl AsRef<Path>,
    initial_mu: f64,
    history: &[IterationRecord],
) -> Result<()> {
    let mut text = String::from("iteration,frame_index,mu\n");
    let _ = writeln!(text, "0,,{initial_mu}");
    for record in history {
        let _ = writeln!(text, "{},{},{}", record.iteration, record.frame, record.mu);
    }
    fs::write(path, text)?;
    Ok(())
}

/// `(m, m', |u|)` triples plus a trailing summary comment with mu.
pub fn write_coherence_report(
    path: impl AsRef<Path>,
    coherences: &CoherenceVector,
    mu: f64,
) -> Result<()> {
    let mut text = String::from("m,m_prime,abs_u\n");
    for ((m, mp), u) in coherences.pairs() {
        let _ = writeln!(text, "{m},{mp},{}", u.norm());
    }
    let _ = writeln!(text, "# average_mutual_coherence={mu}");
    fs::write(path, text)?;
    Ok(())
}

/// Confusion matrix, per-class accuracies, and the summary block.
pub fn write_eval_report(path: impl AsRef<Path>, report: &EvaluationReport) -> Result<()> {
    let classes = report.confusion.nrows();
    let mut text = String::from("record,true_class,decided_class,value\n");
    for i in 0..classes {
        for j in 0..classes {
            let _ = writeln!(text, "confusion,{},{},{}", i + 1, j + 1, report.confusion[(i, j)]);
        }
    }
    for (i, acc) in report.per_class_accuracy.iter().enumerate() {
        let _ = writeln!(text, "class_accuracy,{},,{acc}", i + 1);
    }
    let _ = writeln!(text, "summary,accuracy,,{}", report.accuracy);
    let _ = writeln!(text, "summary,psi_hat,,{}", report.empirical_cost);
    let _ = writeln!(text, "summary,samples,,{}", report.sample_count);
    fs::write(path, text)?;
    Ok(())
}

/// One comparison row per pipeline case.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub case: String,
    pub mu: f64,
    pub accuracy: f64,
    pub psi_hat: f64,
}

pub fn write_compare_report(path: impl AsRef<Path>, rows: &[CompareRow]) -> Result<()> {
    let mut text = String::from("case,mu,accuracy,psi_hat\n");
    for row in rows {
        let _ = writeln!(text, "{},{},{},{}", row.case, row.mu, row.accuracy, row.psi_hat);
    }
    fs::write(path, text)?;
    Ok(())
}
