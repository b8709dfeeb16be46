//! Dataset loading: native claim files to binary-labeled claims.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::claim::{Claim, Verdict};

const BUILTIN_LABELS: &str = include_str!("../data/datasets.toml");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("record {record}: {reason}")]
    SchemaError { record: usize, reason: String },
    #[error("record {record}: unknown label {label:?} for {format}")]
    LabelError { record: usize, label: String, format: DatasetFormat },
    #[error("record {record}: duplicate claim id {id:?}")]
    DuplicateId { record: usize, id: String },
    #[error("label table: {0}")]
    LabelTable(String),
    #[error("unknown dataset format {0:?} (expected scifact, healthfc, covert or generic)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    SciFact,
    HealthFc,
    Covert,
    Generic,
}

impl DatasetFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetFormat::SciFact => "scifact",
            DatasetFormat::HealthFc => "healthfc",
            DatasetFormat::Covert => "covert",
            DatasetFormat::Generic => "generic",
        }
    }

    /// Name used in reports.
    pub fn display_name(self) -> &'static str {
        match self {
            DatasetFormat::SciFact => "SciFact",
            DatasetFormat::HealthFc => "HealthFC",
            DatasetFormat::Covert => "CoVERT",
            DatasetFormat::Generic => "generic",
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "scifact" => Ok(DatasetFormat::SciFact),
            "healthfc" => Ok(DatasetFormat::HealthFc),
            "covert" => Ok(DatasetFormat::Covert),
            "generic" => Ok(DatasetFormat::Generic),
            _ => Err(CorpusError::UnknownFormat(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappedLabel {
    Supported,
    Refuted,
    Drop,
}

impl MappedLabel {
    pub fn verdict(self) -> Option<Verdict> {
        match self {
            MappedLabel::Supported => Some(Verdict::Supported),
            MappedLabel::Refuted => Some(Verdict::Refuted),
            MappedLabel::Drop => None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct FormatSpec {
    pub text_field: String,
    #[serde(default)]
    pub id_field: Option<String>,
    pub label_field: String,
    #[serde(default)]
    pub evidence_field: Option<String>,
    labels: BTreeMap<String, MappedLabel>,
}

impl FormatSpec {
    pub fn map_label(&self, raw: &str) -> Option<MappedLabel> {
        let key = raw.trim().to_ascii_uppercase();
        self.labels
            .iter()
            .find(|(k, _)| k.trim().to_ascii_uppercase() == key)
            .map(|(_, v)| *v)
    }
}

/// Per-format field names and label vocabularies.
#[derive(Debug, Clone)]
pub struct LabelMaps {
    formats: HashMap<DatasetFormat, FormatSpec>,
}

impl Default for LabelMaps {
    fn default() -> Self {
        Self::parse(BUILTIN_LABELS).expect("built-in label table parses")
    }
}

impl LabelMaps {
    pub fn parse(toml_text: &str) -> Result<Self, CorpusError> {
        let raw: HashMap<String, FormatSpec> =
            toml::from_str(toml_text).map_err(|e| CorpusError::LabelTable(e.to_string()))?;
        let mut formats = HashMap::new();
        for (name, spec) in raw {
            formats.insert(name.parse::<DatasetFormat>()?, spec);
        }
        Ok(Self { formats })
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn spec(&self, format: DatasetFormat) -> Result<&FormatSpec, CorpusError> {
        self.formats
            .get(&format)
            .ok_or_else(|| CorpusError::LabelTable(format!("no entry for {format}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledClaim {
    pub claim: Claim,
    pub gold: Verdict,
}

/// A record before NEI filtering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub claim: Claim,
    pub raw_label: String,
    pub mapped: MappedLabel,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LoadSummary {
    pub total: usize,
    pub kept: usize,
    pub dropped: usize,
    pub supported: usize,
    pub refuted: usize,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub format: DatasetFormat,
    pub claims: Vec<LabeledClaim>,
    pub summary: LoadSummary,
}

/// Keeps Supported/Refuted records in order; returns them with the number
/// dropped.
pub fn filter_binary(records: Vec<RawRecord>) -> (Vec<LabeledClaim>, usize) {
    let total = records.len();
    let kept: Vec<LabeledClaim> = records
        .into_iter()
        .filter_map(|r| r.mapped.verdict().map(|gold| LabeledClaim { claim: r.claim, gold }))
        .collect();
    let dropped = total - kept.len();
    (kept, dropped)
}

pub fn load(path: &Path, format: DatasetFormat) -> Result<Dataset, CorpusError> {
    load_with(path, format, &LabelMaps::default())
}

pub fn load_with(path: &Path, format: DatasetFormat, maps: &LabelMaps) -> Result<Dataset, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let kind = InputKind::detect(path, &text);
    load_str(&text, kind, format, maps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    JsonLines,
    JsonArray,
    Csv,
}

impl InputKind {
    /// From the extension, else from the first non-blank character.
    pub fn detect(path: &Path, text: &str) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("jsonl") | Some("ndjson") => InputKind::JsonLines,
            Some("csv") => InputKind::Csv,
            Some("json") if text.trim_start().starts_with('[') => InputKind::JsonArray,
            Some("json") => InputKind::JsonLines,
            _ => match text.trim_start().chars().next() {
                Some('[') => InputKind::JsonArray,
                Some('{') => InputKind::JsonLines,
                _ => InputKind::Csv,
            },
        }
    }
}

pub fn load_str(text: &str, kind: InputKind, format: DatasetFormat, maps: &LabelMaps) -> Result<Dataset, CorpusError> {
    let spec = maps.spec(format)?;
    let rows = read_rows(text, kind)?;
    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let record = i + 1;
        let raw = to_raw_record(row, record, format, spec)?;
        if !seen.insert(raw.claim.id().to_string()) {
            return Err(CorpusError::DuplicateId {
                record,
                id: raw.claim.id().to_string(),
            });
        }
        records.push(raw);
    }
    let total = records.len();
    let (claims, dropped) = filter_binary(records);
    let supported = claims.iter().filter(|c| c.gold == Verdict::Supported).count();
    let summary = LoadSummary {
        total,
        kept: claims.len(),
        dropped,
        supported,
        refuted: claims.len() - supported,
    };
    Ok(Dataset { format, claims, summary })
}

fn read_rows(text: &str, kind: InputKind) -> Result<Vec<serde_json::Map<String, Value>>, CorpusError> {
    let object = |v: Value, record: usize| match v {
        Value::Object(map) => Ok(map),
        other => Err(CorpusError::SchemaError {
            record,
            reason: format!("expected an object, found {other}"),
        }),
    };
    match kind {
        InputKind::JsonLines => text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, line)| {
                let v: Value = serde_json::from_str(line).map_err(|e| CorpusError::SchemaError {
                    record: i + 1,
                    reason: e.to_string(),
                })?;
                object(v, i + 1)
            })
            .collect(),
        InputKind::JsonArray => {
            let values: Vec<Value> = serde_json::from_str(text).map_err(|e| CorpusError::SchemaError {
                record: 0,
                reason: e.to_string(),
            })?;
            values.into_iter().enumerate().map(|(i, v)| object(v, i + 1)).collect()
        }
        InputKind::Csv => {
            let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(text.as_bytes());
            let headers = reader
                .headers()
                .map_err(|e| CorpusError::SchemaError {
                    record: 0,
                    reason: e.to_string(),
                })?
                .clone();
            reader
                .records()
                .enumerate()
                .map(|(i, rec)| {
                    let rec = rec.map_err(|e| CorpusError::SchemaError {
                        record: i + 1,
                        reason: e.to_string(),
                    })?;
                    Ok(headers
                        .iter()
                        .zip(rec.iter())
                        .map(|(h, v)| (h.trim().to_string(), Value::String(v.to_string())))
                        .collect())
                })
                .collect()
        }
    }
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn to_raw_record(
    row: &serde_json::Map<String, Value>,
    record: usize,
    format: DatasetFormat,
    spec: &FormatSpec,
) -> Result<RawRecord, CorpusError> {
    let schema = |reason: String| CorpusError::SchemaError { record, reason };
    let text = row
        .get(&spec.text_field)
        .and_then(scalar_text)
        .ok_or_else(|| schema(format!("missing field {:?}", spec.text_field)))?;
    let id = match &spec.id_field {
        Some(field) => row.get(field).and_then(scalar_text).filter(|s| !s.trim().is_empty()),
        None => None,
    }
    .unwrap_or_else(|| format!("{format}-{record}"));

    let raw_label = match row.get(&spec.label_field).and_then(scalar_text) {
        Some(label) => label,
        None => match spec.evidence_field.as_ref().and_then(|f| row.get(f)) {
            Some(evidence) => evidence_label(evidence).map_err(schema)?,
            None => return Err(schema(format!("missing field {:?}", spec.label_field))),
        },
    };
    let mapped = spec.map_label(&raw_label).ok_or_else(|| CorpusError::LabelError {
        record,
        label: raw_label.clone(),
        format,
    })?;
    let claim = Claim::new(id, text)
        .map_err(|e| schema(e.to_string()))?
        .with_origin(format.as_str());
    Ok(RawRecord { claim, raw_label, mapped })
}

/// Label carried by a SciFact-style evidence map `{doc: [{label, ...}]}`.
/// No evidence means NEI; conflicting labels give MIXED.
fn evidence_label(evidence: &Value) -> Result<String, String> {
    let docs = evidence
        .as_object()
        .ok_or_else(|| "evidence is not an object".to_string())?;
    let mut labels: Vec<String> = Vec::new();
    for sets in docs.values() {
        let sets = sets.as_array().ok_or_else(|| "evidence entry is not a list".to_string())?;
        for set in sets {
            if let Some(label) = set.get("label").and_then(scalar_text) {
                let label = label.trim().to_ascii_uppercase();
                if !labels.contains(&label) {
                    labels.push(label);
                }
            }
        }
    }
    Ok(match labels.len() {
        0 => "NEI".to_string(),
        1 => labels.remove(0),
        _ => "MIXED".to_string(),
    })
}
