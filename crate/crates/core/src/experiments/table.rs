//! Result rows and their CSV / JSON emission.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::value::RawValue;

use crate::error::{Error, Result};

use super::config::EmitFormat;

/// One record of an experiment. Per-seed rows carry `seed`; aggregate rows
/// leave it empty and report means with `e1_se`; fit summaries carry `slope`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Row {
    pub experiment: String,
    pub config_id: String,
    pub seed: Option<u64>,
    pub mode: Option<String>,
    pub a: Option<f64>,
    pub n: Option<usize>,
    pub kappa: Option<f64>,
    pub t: Option<f64>,
    pub e1: Option<f64>,
    pub e1_se: Option<f64>,
    pub w1: Option<f64>,
    pub slope: Option<f64>,
    pub dx: Option<f64>,
    pub dv: Option<f64>,
    pub flocking: Option<f64>,
    pub kernel_evals: Option<u64>,
    pub wall_clock: Option<f64>,
}

pub const COLUMNS: [&str; 17] = [
    "experiment",
    "config_id",
    "seed",
    "mode",
    "a",
    "n",
    "kappa",
    "t",
    "e1",
    "e1_se",
    "w1",
    "slope",
    "dx",
    "dv",
    "flocking",
    "kernel_evals",
    "wall_clock",
];

/// 17 significant digits: enough to round-trip every f64.
pub fn format_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn opt<T>(v: &Option<T>, f: impl Fn(&T) -> String) -> String {
    v.as_ref().map(f).unwrap_or_default()
}

impl Row {
    pub fn new(experiment: &str, config_id: impl Into<String>) -> Self {
        Self {
            experiment: experiment.to_string(),
            config_id: config_id.into(),
            ..Default::default()
        }
    }

    fn fields(&self) -> [String; 17] {
        let r = |v: &Option<f64>| opt(v, |x| format_real(*x));
        [
            self.experiment.clone(),
            self.config_id.clone(),
            opt(&self.seed, u64::to_string),
            self.mode.clone().unwrap_or_default(),
            r(&self.a),
            opt(&self.n, usize::to_string),
            r(&self.kappa),
            r(&self.t),
            r(&self.e1),
            r(&self.e1_se),
            r(&self.w1),
            r(&self.slope),
            r(&self.dx),
            r(&self.dv),
            r(&self.flocking),
            opt(&self.kernel_evals, u64::to_string),
            r(&self.wall_clock),
        ]
    }

    fn from_fields(f: &csv::StringRecord) -> Result<Self> {
        let bad = |col: &str, v: &str| Error::InvalidParameter(format!("column {col}: `{v}`"));
        let get = |k: usize| f.get(k).unwrap_or("");
        let real = |k: usize| -> Result<Option<f64>> {
            let v = get(k);
            if v.is_empty() {
                Ok(None)
            } else {
                v.parse().map(Some).map_err(|_| bad(COLUMNS[k], v))
            }
        };
        let int = |k: usize| -> Result<Option<u64>> {
            let v = get(k);
            if v.is_empty() {
                Ok(None)
            } else {
                v.parse().map(Some).map_err(|_| bad(COLUMNS[k], v))
            }
        };
        let text = |k: usize| Some(get(k).to_string()).filter(|s| !s.is_empty());
        Ok(Row {
            experiment: get(0).to_string(),
            config_id: get(1).to_string(),
            seed: int(2)?,
            mode: text(3),
            a: real(4)?,
            n: int(5)?.map(|n| n as usize),
            kappa: real(6)?,
            t: real(7)?,
            e1: real(8)?,
            e1_se: real(9)?,
            w1: real(10)?,
            slope: real(11)?,
            dx: real(12)?,
            dv: real(13)?,
            flocking: real(14)?,
            kernel_evals: int(15)?,
            wall_clock: real(16)?,
        })
    }

    fn json(&self) -> Result<String> {
        let raw = |s: String| {
            RawValue::from_string(s).map_err(|e| Error::InvalidParameter(e.to_string()))
        };
        let mut obj: Vec<(&str, Box<RawValue>)> = Vec::new();
        for (k, v) in COLUMNS.iter().zip(self.fields()) {
            let value = if v.is_empty() {
                raw("null".into())?
            } else if matches!(*k, "experiment" | "config_id" | "mode") {
                raw(serde_json::to_string(&v)
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?)?
            } else if v.parse::<f64>().is_ok_and(f64::is_finite) {
                raw(v)?
            } else {
                // NaN / inf have no JSON number form
                raw(format!("\"{v}\""))?
            };
            obj.push((k, value));
        }
        #[derive(Serialize)]
        struct Obj<'a>(#[serde(serialize_with = "ser_pairs")] &'a [(&'a str, Box<RawValue>)]);
        fn ser_pairs<S: serde::Serializer>(
            pairs: &&[(&str, Box<RawValue>)],
            s: S,
        ) -> std::result::Result<S::Ok, S::Error> {
            use serde::ser::SerializeMap;
            let mut m = s.serialize_map(Some(pairs.len()))?;
            for (k, v) in pairs.iter() {
                m.serialize_entry(k, v)?;
            }
            m.end()
        }
        serde_json::to_string(&Obj(&obj)).map_err(|e| Error::InvalidParameter(e.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<Row>,
}

impl ResultTable {
    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: ResultTable) {
        self.rows.extend(other.rows);
    }

    /// Aggregate rows (no seed) matching `pred`.
    pub fn summaries<'a>(
        &'a self,
        pred: impl Fn(&Row) -> bool + 'a,
    ) -> impl Iterator<Item = &'a Row> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.seed.is_none() && pred(r))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::InvalidParameter(e.to_string());
        w.write_record(COLUMNS).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.fields()).map_err(io)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::InvalidParameter(e.to_string()))
    }

    pub fn to_json_string(&self) -> Result<String> {
        let rows = self
            .rows
            .iter()
            .map(Row::json)
            .collect::<Result<Vec<_>>>()?;
        Ok(format!("[{}]\n", rows.join(",\n")))
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r
            .headers()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        if header.iter().ne(COLUMNS.iter().copied()) {
            return Err(Error::InvalidParameter(
                "CSV header does not match the result schema".into(),
            ));
        }
        let rows = r
            .records()
            .map(|rec| Row::from_fields(&rec.map_err(|e| Error::InvalidParameter(e.to_string()))?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Write `table` to `path` in the given format.
pub fn emit(table: &ResultTable, path: &Path, format: EmitFormat) -> Result<()> {
    let text = match format {
        EmitFormat::Csv => table.to_csv_string()?,
        EmitFormat::Json => table.to_json_string()?,
    };
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut f = BufWriter::new(File::create(path).map_err(io)?);
    f.write_all(text.as_bytes()).map_err(io)?;
    f.flush().map_err(io)
}
