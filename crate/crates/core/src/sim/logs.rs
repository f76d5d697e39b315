//! CSV trace streams written by the runner.
//!
//! Every stream starts with `tick`. Floats use Rust's shortest round-trip
//! formatting so a value read back is bit-identical to the one written.
//! Vector fields are expanded with a numeric suffix (`q0` .. `q6`).
//!
//! * `operator.csv`: operator joint state, commanded hand pose
//!   (`cmd_x..cmd_qz`), scripted goal, FT reading, every torque component
//!   (`tau_cmd*`, `tau_f*`, `tau_lo*`, `tau_la*`, `tau_no*`, `tau_co*`),
//!   `alpha*`, `beta`, `tau_total*`, predicted avatar joints (`pred_q*`) and
//!   the avatar joints last received (`fb_q*`, `fb_tick` = -1 before any).
//! * `avatar.csv`: `mode`, fade progress, effective goal, hand pose, joint
//!   state and torque, filtered sensor wrench (`ft_*`), estimated hand force
//!   (`panda_f*`), contact force magnitudes, brake and safety flags.
//! * `channel.csv`: per-direction counters and the newest send tick seen.
//! * `observer.csv`: observer input force, per-axis bin amplitudes,
//!   `v_raw`, computed and applied `beta`.
//! * `hands.csv` (optional): glove command, hand joint positions, currents
//!   and brake states.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

pub const OPERATOR_LOG: &str = "operator.csv";
pub const AVATAR_LOG: &str = "avatar.csv";
pub const CHANNEL_LOG: &str = "channel.csv";
pub const OBSERVER_LOG: &str = "observer.csv";
pub const HANDS_LOG: &str = "hands.csv";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: missing column {column:?}")]
    MissingColumn { path: String, column: String },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

/// Header names `prefix0 .. prefix{n-1}`.
pub fn indexed(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Builds one CSV row using shortest round-trip float formatting.
#[derive(Debug, Default)]
pub struct Row {
    fields: Vec<String>,
}

impl Row {
    pub fn new() -> Self {
        Self { fields: Vec::with_capacity(128) }
    }

    pub fn int(&mut self, v: i64) -> &mut Self {
        self.fields.push(v.to_string());
        self
    }

    pub fn num(&mut self, v: f64) -> &mut Self {
        self.fields.push(format!("{v}"));
        self
    }

    pub fn nums<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) -> &mut Self {
        for v in vs {
            self.num(*v);
        }
        self
    }

    pub fn flag(&mut self, b: bool) -> &mut Self {
        self.fields.push(if b { "1" } else { "0" }.to_string());
        self
    }

    pub fn text(&mut self, s: &str) -> &mut Self {
        self.fields.push(s.to_string());
        self
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

pub struct LogWriter<W: Write> {
    inner: csv::Writer<W>,
    columns: usize,
    label: String,
}

impl LogWriter<BufWriter<File>> {
    pub fn create(path: &Path, header: &[String]) -> Result<Self, LogError> {
        let file = File::create(path).map_err(|source| LogError::Io { path: path.display().to_string(), source })?;
        Self::new(BufWriter::new(file), header, path.display().to_string())
    }
}

impl<W: Write> LogWriter<W> {
    pub fn new(w: W, header: &[String], label: String) -> Result<Self, LogError> {
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(header).map_err(|source| LogError::Csv { path: label.clone(), source })?;
        Ok(Self { inner, columns: header.len(), label })
    }

    pub fn write(&mut self, row: &Row) -> Result<(), LogError> {
        if row.len() != self.columns {
            return Err(LogError::Format {
                path: self.label.clone(),
                message: format!("row has {} fields, header has {}", row.len(), self.columns),
            });
        }
        self.inner.write_record(&row.fields).map_err(|source| LogError::Csv { path: self.label.clone(), source })
    }

    pub fn finish(mut self) -> Result<W, LogError> {
        self.inner.flush().map_err(|source| LogError::Io { path: self.label.clone(), source })?;
        self.inner.into_inner().map_err(|e| LogError::Io { path: self.label.clone(), source: e.into_error() })
    }
}

/// Column-addressable CSV trace. Numeric fields are parsed to `f64`;
/// columns holding any non-numeric value are also kept as text.
#[derive(Debug, Clone)]
pub struct LogTable {
    pub path: String,
    headers: Vec<String>,
    index: HashMap<String, usize>,
    columns: Vec<Vec<f64>>,
    text: HashMap<usize, Vec<String>>,
}

impl LogTable {
    pub fn read(path: &Path) -> Result<Self, LogError> {
        let label = path.display().to_string();
        let mut text = String::new();
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|source| LogError::Io { path: label.clone(), source })?;
        Self::parse(&text, &label)
    }

    pub fn parse(text: &str, label: &str) -> Result<Self, LogError> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|source| LogError::Csv { path: label.to_string(), source })?
            .iter()
            .map(str::to_string)
            .collect();
        let mut columns = vec![Vec::new(); headers.len()];
        let mut texts: HashMap<usize, Vec<String>> = HashMap::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|source| LogError::Csv { path: label.to_string(), source })?;
            for (c, field) in rec.iter().enumerate() {
                match field.parse::<f64>() {
                    Ok(v) => columns[c].push(v),
                    Err(_) => {
                        columns[c].push(f64::NAN);
                        let col = texts.entry(c).or_insert_with(|| vec![String::new(); r]);
                        col.resize(r, String::new());
                        col.push(field.to_string());
                    }
                }
            }
            for col in texts.values_mut() {
                col.resize(r + 1, String::new());
            }
        }
        let index = headers.iter().enumerate().map(|(i, h)| (h.clone(), i)).collect();
        Ok(Self { path: label.to_string(), headers, index, columns, text: texts })
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn has(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn col(&self, name: &str) -> Result<&[f64], LogError> {
        self.index
            .get(name)
            .map(|&i| self.columns[i].as_slice())
            .ok_or_else(|| LogError::MissingColumn { path: self.path.clone(), column: name.to_string() })
    }

    /// `prefix0 .. prefix{n-1}` as a list of columns.
    pub fn cols(&self, prefix: &str, n: usize) -> Result<Vec<&[f64]>, LogError> {
        (0..n).map(|i| self.col(&format!("{prefix}{i}"))).collect()
    }

    pub fn text_col(&self, name: &str) -> Result<Vec<String>, LogError> {
        let i = *self
            .index
            .get(name)
            .ok_or_else(|| LogError::MissingColumn { path: self.path.clone(), column: name.to_string() })?;
        Ok(match self.text.get(&i) {
            Some(t) => t.clone(),
            None => self.columns[i].iter().map(|v| format!("{v}")).collect(),
        })
    }

    /// Rows of three columns as points.
    pub fn points(&self, x: &str, y: &str, z: &str) -> Result<Vec<[f64; 3]>, LogError> {
        let (x, y, z) = (self.col(x)?, self.col(y)?, self.col(z)?);
        Ok((0..x.len()).map(|i| [x[i], y[i], z[i]]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        let vals = [0.1 + 0.2, std::f64::consts::PI, -1e-300, 123456.789e10, f64::MIN_POSITIVE, 0.0, -0.0];
        let header = vec!["tick".to_string(), "mode".to_string()].into_iter().chain(indexed("v", vals.len())).collect::<Vec<_>>();
        let mut w = LogWriter::new(Vec::new(), &header, "mem".into()).unwrap();
        for t in 0..3 {
            let mut r = Row::new();
            r.int(t).text(if t == 1 { "HOLD" } else { "TRACK" }).nums(&vals);
            w.write(&r).unwrap();
        }
        let bytes = w.finish().unwrap();
        let table = LogTable::parse(std::str::from_utf8(&bytes).unwrap(), "mem").unwrap();
        assert_eq!(table.rows(), 3);
        for (i, v) in vals.iter().enumerate() {
            assert_eq!(table.col(&format!("v{i}")).unwrap()[2].to_bits(), v.to_bits());
        }
        assert_eq!(table.text_col("mode").unwrap(), vec!["TRACK", "HOLD", "TRACK"]);
        assert!(table.col("nope").is_err());
    }

    #[test]
    fn row_width_is_checked() {
        let mut w = LogWriter::new(Vec::new(), &indexed("a", 2), "mem".into()).unwrap();
        let mut r = Row::new();
        r.num(1.0);
        assert!(w.write(&r).is_err());
    }
}
