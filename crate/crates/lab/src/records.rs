//! Result records and their CSV / JSON Lines serializations.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bdre_core::stats::{KsResult, MCEstimate};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

pub const CSV_COLUMNS: [&str; 9] = [
    "quantity",
    "value",
    "std_error",
    "n",
    "theoretical",
    "provenance",
    "pass",
    "seed",
    "config_hash",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub quantity: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub n: Option<u64>,
    pub theoretical: Option<f64>,
    /// Where `theoretical` comes from (`closed-form`, `quadrature`,
    /// `oracle`, `asymptotic-constant`, ...), or `none`.
    pub provenance: String,
    pub pass: Option<bool>,
    pub seed: u64,
    pub config_hash: String,
}

/// Stamps records with a seed and config hash.
#[derive(Debug, Clone)]
pub struct RecordSink {
    seed: u64,
    config_hash: String,
    pub records: Vec<ResultRecord>,
}

impl RecordSink {
    pub fn new(seed: u64, config_hash: impl Into<String>) -> Self {
        RecordSink {
            seed,
            config_hash: config_hash.into(),
            records: Vec::new(),
        }
    }

    pub fn value(&mut self, quantity: impl Into<String>, value: f64) -> &mut ResultRecord {
        self.records.push(ResultRecord {
            quantity: quantity.into(),
            value,
            std_error: None,
            n: None,
            theoretical: None,
            provenance: "none".into(),
            pass: None,
            seed: self.seed,
            config_hash: self.config_hash.clone(),
        });
        self.records.last_mut().expect("just pushed")
    }

    pub fn estimate(&mut self, quantity: impl Into<String>, e: &MCEstimate) -> &mut ResultRecord {
        let r = self.value(quantity, e.mean);
        r.std_error = Some(e.std_error);
        r.n = Some(e.n);
        r
    }

    /// KS statistic with its p-value as a companion record.
    pub fn ks(&mut self, quantity: &str, k: &KsResult, n: u64) -> &mut ResultRecord {
        self.value(format!("{quantity}.p_value"), k.p_value).n = Some(n);
        let r = self.value(format!("{quantity}.statistic"), k.statistic);
        r.n = Some(n);
        r
    }
}

impl ResultRecord {
    pub fn theory(&mut self, value: f64, provenance: &str) -> &mut Self {
        self.theoretical = Some(value);
        self.provenance = provenance.into();
        self
    }

    pub fn check(&mut self, pass: bool) -> &mut Self {
        self.pass = Some(pass);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    JsonLines,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::JsonLines => "jsonl",
        }
    }
}

/// Header row followed by one row per record.
pub fn write_csv<W: Write>(records: &[ResultRecord], out: W) -> LabResult<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| LabError::io("<csv>", e))?;
    Ok(())
}

pub fn write_jsonl<W: Write>(records: &[ResultRecord], mut out: W) -> LabResult<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| LabError::io("<jsonl>", e))?;
    }
    Ok(())
}

/// Writes `dir/stem.{csv,jsonl}` and returns the path.
pub fn write_results(records: &[ResultRecord], dir: &Path, stem: &str, format: Format) -> LabResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let path = dir.join(format!("{stem}.{}", format.extension()));
    let file = File::create(&path).map_err(|e| LabError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        Format::Csv => write_csv(records, &mut w)?,
        Format::JsonLines => write_jsonl(records, &mut w)?,
    }
    w.flush().map_err(|e| LabError::io(&path, e))?;
    Ok(path)
}

pub fn read_csv(path: &Path) -> LabResult<Vec<ResultRecord>> {
    let file = File::open(path).map_err(|e| LabError::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_COLUMNS) {
        return Err(LabError::config(format!("{}: unexpected header", path.display())));
    }
    Ok(r.deserialize().collect::<Result<Vec<ResultRecord>, _>>()?)
}

/// Rate CSVs name survival points `<prefix>.p@<t>`; the script pulls them
/// out with awk and plots them on a log scale.
pub fn gnuplot_script(csv_name: &str, prefixes: &[String]) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator whitespace\n");
    s.push_str("set logscale y\n");
    s.push_str("set xlabel \"t\"\n");
    s.push_str("set ylabel \"conditioned survival probability\"\n");
    s.push_str("set key top right\n");
    let plots: Vec<String> = prefixes
        .iter()
        .map(|p| {
            let pattern = p.replace('.', "[.]");
            format!(
                r#"  "< awk -F, '$1 ~ /^{pattern}[.]p@/ {{ split($1, a, \"@\"); print a[2], $2, $3 }}' {csv_name}" using 1:2:3 with yerrorlines title "{p}""#
            )
        })
        .collect();
    s.push_str("plot \\\n");
    s.push_str(&plots.join(", \\\n"));
    s.push('\n');
    s
}
