//! Tabular serialization of sweep results: CSV and JSON.
//!
//! CSV dialect: comma separator, `\n` line endings, mandatory header, units
//! in brackets in the header, reals at 12 significant digits, empty field
//! for absent values.

use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::fmt::sig12;
use crate::ProtocolParams;

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Real(f64),
    Int(u64),
    Flag(bool),
    Text(String),
    Absent,
}

impl Field {
    fn render(&self) -> String {
        match self {
            Field::Real(x) => sig12(*x),
            Field::Int(n) => n.to_string(),
            Field::Flag(b) => b.to_string(),
            Field::Text(s) => s.clone(),
            Field::Absent => String::new(),
        }
    }
}

impl From<Option<f64>> for Field {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Field::Absent, Field::Real)
    }
}

/// Writes a header and rows as CSV text, quoting fields where needed.
pub fn csv_text<I, R, S>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("fields are UTF-8")
}

/// A record type that renders as one CSV row.
pub trait Tabular {
    fn header() -> Vec<&'static str>;
    fn row(&self) -> Vec<Field>;
}

/// Provenance attached to every result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub analysis: String,
    pub tool_version: String,
    pub params_hash: String,
    pub params: ProtocolParams,
}

impl Metadata {
    pub fn new(analysis: &str, params: &ProtocolParams) -> Self {
        Self {
            analysis: analysis.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            params_hash: params_hash(params),
            params: params.clone(),
        }
    }
}

/// First 16 hex digits of the SHA-256 of the canonical JSON encoding.
pub fn params_hash(params: &ProtocolParams) -> String {
    let json = serde_json::to_string(params).expect("params serialize");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().take(8).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Axis-ordered cells of one analysis, with provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult<C> {
    pub metadata: Metadata,
    pub cells: Vec<C>,
}

impl<C: Tabular + Serialize> SweepResult<C> {
    pub fn to_csv(&self) -> String {
        csv_text(
            &C::header(),
            self.cells
                .iter()
                .map(|c| c.row().iter().map(Field::render).collect::<Vec<_>>()),
        )
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result serializes");
        s.push('\n');
        s
    }
}
