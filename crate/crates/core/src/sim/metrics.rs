//! Append-only observation log with CSV and JSON-lines encodings.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TrustError};
use crate::types::{EntityId, Tick};

pub const CSV_HEADER: [&str; 9] = [
    "tick", "observer", "subject", "trv", "dt", "it", "rt", "selected", "outcome",
];

/// What a row records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Trust in a candidate just before selection.
    Observe,
    /// A recommender's trust after an update.
    Recommender,
    /// Episode completed with a provider that offered directly.
    Settled,
    /// Episode completed with a provider reached through a recommendation.
    Recommended,
    /// Episode ended without a transaction.
    Failed,
}

impl Outcome {
    pub fn is_episode(self) -> bool {
        matches!(
            self,
            Outcome::Settled | Outcome::Recommended | Outcome::Failed
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Observe => "observe",
            Outcome::Recommender => "recommender",
            Outcome::Settled => "settled",
            Outcome::Recommended => "recommended",
            Outcome::Failed => "failed",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "observe" => Outcome::Observe,
            "recommender" => Outcome::Recommender,
            "settled" => Outcome::Settled,
            "recommended" => Outcome::Recommended,
            "failed" => Outcome::Failed,
            other => return Err(format!("unknown outcome `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub tick: Tick,
    pub observer: EntityId,
    pub subject: Option<EntityId>,
    pub trv: Option<f64>,
    pub dt: Option<f64>,
    pub it: Option<f64>,
    pub rt: Option<f64>,
    pub selected: Option<EntityId>,
    pub outcome: Outcome,
    /// Whether the history was adequate for direct trust alone. JSON-lines only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adequate: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsLog {
    rows: Vec<MetricsRow>,
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

impl MetricsLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: MetricsRow) {
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[MetricsRow] {
        &self.rows
    }

    pub fn episode_rows(&self) -> impl Iterator<Item = &MetricsRow> {
        self.rows.iter().filter(|r| r.outcome.is_episode())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| TrustError::Io(e.to_string());
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.tick.to_string(),
                r.observer.to_string(),
                opt(&r.subject),
                opt(&r.trv),
                opt(&r.dt),
                opt(&r.it),
                opt(&r.rt),
                opt(&r.selected),
                r.outcome.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.rows {
            serde_json::to_writer(&mut out, r).map_err(|e| TrustError::Io(e.to_string()))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Parses a log written by [`MetricsLog::write_csv`]. Errors carry the
    /// 1-based line number.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        let headers = rdr.headers().map_err(|e| TrustError::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        if headers.iter().ne(CSV_HEADER) {
            return Err(TrustError::Parse {
                line: 1,
                message: format!("expected header `{}`", CSV_HEADER.join(",")),
            });
        }
        let mut log = MetricsLog::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| TrustError::Parse {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let bad = |field: &str, v: &str| TrustError::Parse {
                line,
                message: format!("bad {field} `{v}`"),
            };
            let num = |i: usize| -> Result<Option<f64>> {
                match &rec[i] {
                    "" => Ok(None),
                    v => v.parse().map(Some).map_err(|_| bad(CSV_HEADER[i], v)),
                }
            };
            let id = |i: usize| match &rec[i] {
                "" => None,
                v => Some(EntityId::new(v)),
            };
            log.push(MetricsRow {
                tick: rec[0].parse().map_err(|_| bad("tick", &rec[0]))?,
                observer: EntityId::new(&rec[1]),
                subject: id(2),
                trv: num(3)?,
                dt: num(4)?,
                it: num(5)?,
                rt: num(6)?,
                selected: id(7),
                outcome: rec[8].parse().map_err(|_| bad("outcome", &rec[8]))?,
                adequate: None,
            });
        }
        Ok(log)
    }
}
