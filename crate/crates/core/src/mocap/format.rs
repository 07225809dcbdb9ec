//! On-disk recording formats.
//!
//! CSV: header `t,<label>.x,<label>.y,<label>.z,...`, one frame per row, a
//! blank coordinate cell marks the marker lost in that frame.
//! JSON Lines: `{"t": 0.0, "markers": {"RSHO": [x, y, z], "RELB": null}}`.
//! Rate, handedness and synthesis ground truth live in a JSON sidecar next to
//! the recording (`<file>.meta.json`).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    is_known_label, Handedness, MarkerFrame, Recording, RecordingError, ServeGroundTruth, Vec3,
    DEFAULT_RATE_HZ,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordingFormat {
    Csv,
    JsonLines,
}

impl RecordingFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Self::Csv),
            "jsonl" | "ndjson" => Some(Self::JsonLines),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: unknown marker label `{label}`")]
    UnknownLabel { line: u64, label: String },
    #[error("line {line}: timestamp {t} does not increase")]
    NonMonotone { line: u64, t: f64 },
    #[error("unrecognized recording extension: {0}")]
    UnknownFormat(PathBuf),
    #[error("sidecar {path}: {message}")]
    Sidecar { path: PathBuf, message: String },
    #[error(transparent)]
    Invalid(#[from] RecordingError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Sidecar metadata document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub rate_hz: f64,
    pub handedness: Handedness,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    #[serde(default)]
    pub ground_truth: Vec<ServeGroundTruth>,
}

impl Default for RecordingMeta {
    fn default() -> Self {
        Self {
            rate_hz: DEFAULT_RATE_HZ,
            handedness: Handedness::Right,
            metadata: BTreeMap::new(),
            ground_truth: Vec::new(),
        }
    }
}

impl RecordingMeta {
    pub fn of(rec: &Recording) -> Self {
        Self {
            rate_hz: rec.rate_hz,
            handedness: rec.handedness,
            metadata: rec.metadata.clone(),
            ground_truth: rec.ground_truth.clone(),
        }
    }

    pub fn apply(self, frames: Vec<MarkerFrame>) -> Result<Recording, RecordingError> {
        let mut rec = Recording::new(frames, self.rate_hz, self.handedness)?;
        rec.metadata = self.metadata;
        rec.ground_truth = self.ground_truth;
        Ok(rec)
    }
}

/// Parses a complete recording document with default metadata
/// (120 Hz, right-handed). Use [`read_recording`] to pick up a sidecar.
pub fn parse_recording<R: Read>(source: R, format: RecordingFormat) -> Result<Recording, ParseError> {
    let frames = match format {
        RecordingFormat::Csv => parse_csv(source)?,
        RecordingFormat::JsonLines => parse_jsonl(source)?,
    };
    Ok(RecordingMeta::default().apply(frames)?)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Loads a recording file, applying `<file>.meta.json` when present.
pub fn read_recording(path: &Path) -> Result<Recording, ParseError> {
    let format =
        RecordingFormat::from_path(path).ok_or_else(|| ParseError::UnknownFormat(path.into()))?;
    let file = File::open(path)?;
    let frames = match format {
        RecordingFormat::Csv => parse_csv(file)?,
        RecordingFormat::JsonLines => parse_jsonl(file)?,
    };
    let meta_path = sidecar_path(path);
    let meta = if meta_path.exists() {
        let text = std::fs::read_to_string(&meta_path)?;
        serde_json::from_str(&text).map_err(|e| ParseError::Sidecar {
            path: meta_path.clone(),
            message: e.to_string(),
        })?
    } else {
        RecordingMeta::default()
    };
    Ok(meta.apply(frames)?)
}

pub fn write_recording<W: Write>(
    rec: &Recording,
    format: RecordingFormat,
    mut out: W,
) -> io::Result<()> {
    match format {
        RecordingFormat::Csv => write_csv(rec, out),
        RecordingFormat::JsonLines => {
            for frame in rec.frames() {
                let line = JsonFrame {
                    t: frame.timestamp,
                    markers: frame
                        .markers
                        .iter()
                        .map(|(k, v)| (k.clone(), v.map(|p| [p.x, p.y, p.z])))
                        .collect(),
                };
                serde_json::to_writer(&mut out, &line)?;
                out.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

pub fn write_sidecar(rec: &Recording, path: &Path) -> io::Result<()> {
    let text = serde_json::to_string_pretty(&RecordingMeta::of(rec))?;
    std::fs::write(sidecar_path(path), text + "\n")
}

fn malformed(line: u64, message: impl Into<String>) -> ParseError {
    ParseError::Malformed {
        line,
        message: message.into(),
    }
}

fn parse_csv<R: Read>(source: R) -> Result<Vec<MarkerFrame>, ParseError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    if header.get(0) != Some("t") {
        return Err(malformed(1, "first column must be `t`"));
    }
    if (header.len() - 1) % 3 != 0 {
        return Err(malformed(1, "coordinate columns must come in x,y,z triples"));
    }
    let mut labels = Vec::new();
    for triple in 0..(header.len() - 1) / 3 {
        let mut label: Option<&str> = None;
        for (k, axis) in ["x", "y", "z"].iter().enumerate() {
            let col = &header[1 + triple * 3 + k];
            let (l, a) = col
                .rsplit_once('.')
                .ok_or_else(|| malformed(1, format!("column `{col}` is not <label>.<axis>")))?;
            if a != *axis || label.is_some_and(|prev| prev != l) {
                return Err(malformed(1, format!("column `{col}` out of x,y,z order")));
            }
            label = Some(l);
        }
        let label = label.unwrap_or_default().to_string();
        if !is_known_label(&label) {
            return Err(ParseError::UnknownLabel { line: 1, label });
        }
        if labels.contains(&label) {
            return Err(malformed(1, format!("duplicate label `{label}`")));
        }
        labels.push(label);
    }

    let mut frames: Vec<MarkerFrame> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            malformed(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let t: f64 = row[0]
            .parse()
            .map_err(|_| malformed(line, format!("bad timestamp `{}`", &row[0])))?;
        if !t.is_finite() {
            return Err(malformed(line, "timestamp is not finite"));
        }
        if let Some(prev) = frames.last() {
            if !(t > prev.timestamp) {
                return Err(ParseError::NonMonotone { line, t });
            }
        }
        let mut frame = MarkerFrame::new(t);
        for (i, label) in labels.iter().enumerate() {
            let cells = [&row[1 + 3 * i], &row[2 + 3 * i], &row[3 + 3 * i]];
            let position = if cells.iter().any(|c| c.is_empty()) {
                None
            } else {
                let mut xyz = [0.0_f64; 3];
                for (slot, cell) in xyz.iter_mut().zip(cells) {
                    *slot = cell.parse().map_err(|_| {
                        malformed(line, format!("bad coordinate `{cell}` for {label}"))
                    })?;
                    if !slot.is_finite() {
                        return Err(malformed(line, format!("non-finite coordinate for {label}")));
                    }
                }
                Some(Vec3::from(xyz))
            };
            frame.markers.insert(label.clone(), position);
        }
        frames.push(frame);
    }
    Ok(frames)
}

#[derive(Serialize, Deserialize)]
struct JsonFrame {
    t: f64,
    markers: BTreeMap<String, Option<[f64; 3]>>,
}

fn parse_jsonl<R: Read>(source: R) -> Result<Vec<MarkerFrame>, ParseError> {
    let mut frames: Vec<MarkerFrame> = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: JsonFrame =
            serde_json::from_str(&line).map_err(|e| malformed(line_no, e.to_string()))?;
        if !parsed.t.is_finite() {
            return Err(malformed(line_no, "timestamp is not finite"));
        }
        if let Some(prev) = frames.last() {
            if !(parsed.t > prev.timestamp) {
                return Err(ParseError::NonMonotone {
                    line: line_no,
                    t: parsed.t,
                });
            }
        }
        let mut frame = MarkerFrame::new(parsed.t);
        for (label, p) in parsed.markers {
            if !is_known_label(&label) {
                return Err(ParseError::UnknownLabel {
                    line: line_no,
                    label,
                });
            }
            if let Some(p) = p {
                if !p.iter().all(|c| c.is_finite()) {
                    return Err(malformed(line_no, format!("non-finite coordinate for {label}")));
                }
            }
            frame.markers.insert(label, p.map(Vec3::from));
        }
        if let Some(first) = frames.first() {
            if !first.markers.keys().eq(frame.markers.keys()) {
                return Err(malformed(line_no, "label set differs from the first frame"));
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

fn write_csv<W: Write>(rec: &Recording, out: W) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let labels = rec.labels();
    let mut header = vec!["t".to_string()];
    for l in &labels {
        for axis in ["x", "y", "z"] {
            header.push(format!("{l}.{axis}"));
        }
    }
    w.write_record(&header)?;
    for frame in rec.frames() {
        let mut row = Vec::with_capacity(header.len());
        row.push(frame.timestamp.to_string());
        for l in &labels {
            match frame.markers.get(l).copied().flatten() {
                Some(p) => row.extend(p.iter().map(|c| c.to_string())),
                None => row.extend(std::iter::repeat_n(String::new(), 3)),
            }
        }
        w.write_record(&row)?;
    }
    w.flush()
}
