//! Labeled image corpora: manifests, splits and the grayscale working format.

mod image;

pub use self::image::{load_image, resize_bilinear, save_png, to_grayscale, GrayImage};

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Working resolution of the descriptor pipeline.
pub const CANONICAL_SIDE: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}` (expected train, val or test)")),
        }
    }
}

/// Pixel rectangle `(x, y, w, h)` with the origin at the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    /// Resolved path (manifest-relative paths are joined with the manifest directory on load).
    pub path: PathBuf,
    pub class_label: String,
    pub split: Split,
    pub bbox: Option<BBox>,
    /// Object area over field-of-view area. Descriptive metadata only.
    pub size_fraction: Option<f64>,
}

impl ImageRecord {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if let Some(b) = self.bbox {
            if b.w == 0 || b.h == 0 {
                return Err(format!("record `{}`: bbox has zero area", self.id));
            }
        }
        if let Some(s) = self.size_fraction {
            if !(s > 0.0 && s <= 1.0) {
                return Err(format!(
                    "record `{}`: size_fraction {s} outside (0, 1]",
                    self.id
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub records: Vec<ImageRecord>,
    pub classes: Vec<String>,
}

impl Manifest {
    /// Builds a manifest, deriving the class list from the records when `classes` is `None`.
    pub fn new(records: Vec<ImageRecord>, classes: Option<Vec<String>>) -> Result<Self> {
        let classes = match classes {
            Some(c) => c,
            None => records
                .iter()
                .map(|r| r.class_label.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        };
        let m = Manifest { records, classes };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::Validation("manifest has no classes".into()));
        }
        let mut seen = HashSet::new();
        for c in &self.classes {
            if !seen.insert(c.as_str()) {
                return Err(Error::Validation(format!("duplicate class `{c}`")));
            }
        }
        let mut ids = HashSet::new();
        for r in &self.records {
            r.validate().map_err(Error::Validation)?;
            if !ids.insert(r.id.as_str()) {
                return Err(Error::Validation(format!("duplicate id `{}`", r.id)));
            }
            if !seen.contains(r.class_label.as_str()) {
                return Err(Error::Validation(format!(
                    "record `{}` has class `{}` not in the class list",
                    r.id, r.class_label
                )));
            }
        }
        Ok(())
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records of one class, in manifest order.
    pub fn class_records<'a>(&'a self, class: &'a str) -> impl Iterator<Item = &'a ImageRecord> {
        self.records.iter().filter(move |r| r.class_label == class)
    }

    /// Writes the manifest as JSONL with a leading class-list header.
    /// Paths under `base` are written relative to it.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or(Path::new(""));
        let mut out = String::new();
        out.push_str(&serde_json::to_string(&HeaderLine {
            classes: self.classes.clone(),
        })?);
        out.push('\n');
        for r in &self.records {
            let rel = r.path.strip_prefix(base).unwrap_or(&r.path);
            let line = RawRecord {
                id: r.id.clone(),
                path: rel.to_string_lossy().replace('\\', "/"),
                class: r.class_label.clone(),
                split: r.split.as_str().to_string(),
                bbox: r.bbox.map(|b| [b.x, b.y, b.w, b.h]),
                size_fraction: r.size_fraction,
            };
            out.push_str(&serde_json::to_string(&line)?);
            out.push('\n');
        }
        let mut f = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        f.write_all(out.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    classes: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    path: String,
    class: String,
    split: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bbox: Option<[u32; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    size_fraction: Option<f64>,
}

impl RawRecord {
    fn into_record(self, base: &Path) -> std::result::Result<ImageRecord, String> {
        let split = self.split.parse::<Split>()?;
        let p = PathBuf::from(&self.path);
        let path = if p.is_absolute() { p } else { base.join(p) };
        Ok(ImageRecord {
            id: self.id,
            path,
            class_label: self.class,
            split,
            bbox: self.bbox.map(|[x, y, w, h]| BBox { x, y, w, h }),
            size_fraction: self.size_fraction,
        })
    }
}

/// Loads a JSONL or CSV manifest (chosen by the `.csv` extension).
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
    let is_csv = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("csv"))
        .unwrap_or(false);
    let (records, classes) = if is_csv {
        parse_csv(path, &text, &base)?
    } else {
        parse_jsonl(path, &text, &base)?
    };
    if records.is_empty() {
        return Err(Error::Validation(format!(
            "{}: no records",
            path.display()
        )));
    }
    Manifest::new(records, classes)
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_jsonl(
    path: &Path,
    text: &str,
    base: &Path,
) -> Result<(Vec<ImageRecord>, Option<Vec<String>>)> {
    let mut records = Vec::new();
    let mut classes = None;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| parse_err(path, lineno, e.to_string()))?;
        if value.get("id").is_none() && value.get("classes").is_some() {
            if !records.is_empty() || classes.is_some() {
                return Err(parse_err(path, lineno, "class header must be the first line"));
            }
            let h: HeaderLine =
                serde_json::from_value(value).map_err(|e| parse_err(path, lineno, e.to_string()))?;
            classes = Some(h.classes);
            continue;
        }
        let raw: RawRecord =
            serde_json::from_value(value).map_err(|e| parse_err(path, lineno, e.to_string()))?;
        let rec = raw
            .into_record(base)
            .map_err(|m| parse_err(path, lineno, m))?;
        records.push(rec);
    }
    Ok((records, classes))
}

const CSV_HEADER: [&str; 9] = [
    "id",
    "path",
    "class",
    "split",
    "bbox_x",
    "bbox_y",
    "bbox_w",
    "bbox_h",
    "size_fraction",
];

fn parse_csv(
    path: &Path,
    text: &str,
    base: &Path,
) -> Result<(Vec<ImageRecord>, Option<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| parse_err(path, 1, e.to_string()))?;
    if header.iter().map(str::trim).ne(CSV_HEADER.iter().copied()) {
        return Err(parse_err(
            path,
            1,
            format!("expected header `{}`", CSV_HEADER.join(",")),
        ));
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let lineno = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let cell = |i: usize| row.get(i).unwrap_or("").trim();
        let opt_u32 = |i: usize| -> std::result::Result<Option<u32>, String> {
            let c = cell(i);
            if c.is_empty() {
                Ok(None)
            } else {
                c.parse()
                    .map(Some)
                    .map_err(|_| format!("column {} is not an integer: `{c}`", CSV_HEADER[i]))
            }
        };
        let bbox_cells = (4..8)
            .map(opt_u32)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|m| parse_err(path, lineno, m))?;
        let bbox = match bbox_cells.as_slice() {
            [Some(x), Some(y), Some(w), Some(h)] => Some([*x, *y, *w, *h]),
            [None, None, None, None] => None,
            _ => return Err(parse_err(path, lineno, "bbox must have all four cells or none")),
        };
        let size_fraction = match cell(8) {
            "" => None,
            s => Some(
                s.parse::<f64>()
                    .map_err(|_| parse_err(path, lineno, format!("bad size_fraction `{s}`")))?,
            ),
        };
        let raw = RawRecord {
            id: cell(0).to_string(),
            path: cell(1).to_string(),
            class: cell(2).to_string(),
            split: cell(3).to_string(),
            bbox,
            size_fraction,
        };
        records.push(raw.into_record(base).map_err(|m| parse_err(path, lineno, m))?);
    }
    Ok((records, None))
}

/// Keeps the records of one split, preserving class list and record order.
pub fn split_manifest(manifest: &Manifest, split: Split) -> Manifest {
    Manifest {
        records: manifest
            .records
            .iter()
            .filter(|r| r.split == split)
            .cloned()
            .collect(),
        classes: manifest.classes.clone(),
    }
}
