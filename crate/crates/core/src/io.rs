//! Instance files and result tables.
//!
//! Instances are JSON documents tagged `"format": "ising-v1"` (canonical) or
//! plain-text edge lists for ingesting public MaxCut corpora. Results go to
//! CSV with a fixed header and 12 significant digits per number.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::IsingModel;

pub const FORMAT_TAG: &str = "ising-v1";

/// How coupling weights in a file relate to the stored `J`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// `H = Σ_{i<j} Ĵ_ij s_i s_j + …`; stored `J = Ĵ/2`.
    Hamiltonian,
    /// Weights are the symmetric matrix entries themselves.
    Scalar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub format: String,
    pub d: usize,
    pub convention: Convention,
    pub couplings: Vec<(usize, usize, f64)>,
    pub fields: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
}

impl InstanceFile {
    /// Scalar-convention document for `model`.
    pub fn from_model(model: &IsingModel) -> Self {
        Self {
            format: FORMAT_TAG.to_string(),
            d: model.d(),
            convention: Convention::Scalar,
            couplings: model.couplings().iter().map(|c| (c.i, c.j, c.weight)).collect(),
            fields: model.fields().to_vec(),
            offset: model.offset(),
        }
    }

    pub fn into_model(self) -> Result<IsingModel> {
        if self.format != FORMAT_TAG {
            return Err(Error::Parse { line: 0, msg: format!("unsupported format {:?}", self.format) });
        }
        let InstanceFile { d, convention, couplings, fields, offset, .. } = self;
        let mut seen = HashSet::new();
        for &(i, j, _) in &couplings {
            let key = (i.min(j), i.max(j));
            if !seen.insert(key) {
                return Err(Error::InvalidModel(format!("duplicate coupling ({i}, {j})")));
            }
        }
        let model = match convention {
            Convention::Scalar => IsingModel::new(d, couplings, fields)?,
            Convention::Hamiltonian => IsingModel::from_hamiltonian(d, couplings, fields)?,
        };
        model.with_offset(offset)
    }
}

pub fn parse_json(text: &str) -> Result<IsingModel> {
    let doc: InstanceFile = serde_json::from_str(text)?;
    doc.into_model()
}

pub fn to_json(model: &IsingModel) -> String {
    serde_json::to_string_pretty(&InstanceFile::from_model(model)).expect("instance documents always serialize")
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Parses the text edge-list form.
///
/// ```text
/// d m [one-indexed]
/// i j w        (m lines)
/// F i w        (optional field lines)
/// ```
///
/// Blank lines and lines starting with `#` are skipped. Weights are scalar
/// convention. `one_indexed` forces 1-based indices even without the
/// header flag.
pub fn parse_edge_list(text: &str, one_indexed: bool) -> Result<IsingModel> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if !(2..=3).contains(&tokens.len()) {
        return Err(parse_err(hline, "header must be `d m [one-indexed]`"));
    }
    let d: usize = tokens[0].parse().map_err(|_| parse_err(hline, format!("bad spin count {:?}", tokens[0])))?;
    let m: usize = tokens[1].parse().map_err(|_| parse_err(hline, format!("bad edge count {:?}", tokens[1])))?;
    let shift = match tokens.get(2) {
        None => usize::from(one_indexed),
        Some(&"one-indexed") | Some(&"1") => 1,
        Some(&"zero-indexed") | Some(&"0") => usize::from(one_indexed),
        Some(other) => return Err(parse_err(hline, format!("unknown header flag {other:?}"))),
    };
    let index = |line: usize, tok: &str| -> Result<usize> {
        let raw: usize = tok.parse().map_err(|_| parse_err(line, format!("bad index {tok:?}")))?;
        raw.checked_sub(shift)
            .filter(|&i| i < d)
            .ok_or_else(|| parse_err(line, format!("index {raw} out of range for d={d}")))
    };
    let weight = |line: usize, tok: &str| -> Result<f64> {
        tok.parse::<f64>()
            .ok()
            .filter(|w| w.is_finite())
            .ok_or_else(|| parse_err(line, format!("bad weight {tok:?}")))
    };

    let mut couplings = Vec::with_capacity(m);
    let mut seen = HashSet::with_capacity(m);
    let mut fields = vec![0.0; d];
    let mut edges = 0;
    for (line, text) in lines {
        let t: Vec<&str> = text.split_whitespace().collect();
        if t.first() == Some(&"F") {
            if t.len() != 3 {
                return Err(parse_err(line, "field line must be `F i w`"));
            }
            fields[index(line, t[1])?] += weight(line, t[2])?;
            continue;
        }
        if t.len() != 3 {
            return Err(parse_err(line, "edge line must be `i j w`"));
        }
        if edges == m {
            return Err(parse_err(line, format!("more than the {m} declared edges")));
        }
        let (i, j) = (index(line, t[0])?, index(line, t[1])?);
        if i == j {
            return Err(parse_err(line, format!("self-loop on spin {}", t[0])));
        }
        if !seen.insert((i.min(j), i.max(j))) {
            return Err(parse_err(line, format!("duplicate edge ({}, {})", t[0], t[1])));
        }
        couplings.push((i.min(j), i.max(j), weight(line, t[2])?));
        edges += 1;
    }
    if edges != m {
        return Err(parse_err(hline, format!("header declares {m} edges, found {edges}")));
    }
    IsingModel::new(d, couplings, fields)
}

/// Edge-list text for `model` (0-based, scalar convention, fields as `F` lines).
pub fn to_edge_list(model: &IsingModel) -> String {
    let mut out = format!("{} {}\n", model.d(), model.num_couplings());
    for c in model.couplings() {
        let _ = writeln!(out, "{} {} {:?}", c.i, c.j, c.weight);
    }
    for (i, h) in model.fields().iter().enumerate().filter(|(_, h)| **h != 0.0) {
        let _ = writeln!(out, "F {i} {h:?}");
    }
    out
}

/// Reads either format: JSON when the first non-blank byte is `{`.
pub fn parse_instance(text: &str, one_indexed: bool) -> Result<IsingModel> {
    if text.trim_start().starts_with('{') {
        parse_json(text)
    } else {
        parse_edge_list(text, one_indexed)
    }
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<IsingModel> {
    load_instance_with(path, false)
}

pub fn load_instance_with(path: impl AsRef<Path>, one_indexed: bool) -> Result<IsingModel> {
    let mut text = String::new();
    fs::File::open(path)?.read_to_string(&mut text)?;
    parse_instance(&text, one_indexed)
}

/// Writes the canonical JSON form.
pub fn save_instance(model: &IsingModel, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(to_json(model).as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

/// `x` with 12 significant digits, in plain decimal where that stays short.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".to_string() } else { x.to_string() };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Version tag carried in the first column of every results row.
pub const RESULT_SCHEMA: &str = "pds-result-v1";

pub const RESULT_HEADER: [&str; 13] = [
    "schema",
    "instance_id",
    "family",
    "d",
    "seed",
    "eta",
    "iterations",
    "wall_time_s",
    "energy",
    "chi_hat",
    "tts",
    "speed",
    "solver",
];

mod sig12 {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_sig12(*x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

mod sig12_opt {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&x.map(format_sig12).unwrap_or_default())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
        let text = String::deserialize(d)?;
        if text.is_empty() {
            Ok(None)
        } else {
            text.parse().map(Some).map_err(serde::de::Error::custom)
        }
    }
}

/// One row of a results table. Missing metrics are empty cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema: String,
    pub instance_id: String,
    pub family: String,
    pub d: usize,
    pub seed: u64,
    #[serde(with = "sig12")]
    pub eta: f64,
    pub iterations: usize,
    #[serde(with = "sig12_opt")]
    pub wall_time_s: Option<f64>,
    #[serde(with = "sig12")]
    pub energy: f64,
    #[serde(with = "sig12_opt")]
    pub chi_hat: Option<f64>,
    #[serde(with = "sig12_opt")]
    pub tts: Option<f64>,
    #[serde(with = "sig12_opt")]
    pub speed: Option<f64>,
    pub solver: String,
}

impl ResultRecord {
    pub fn from_solve(instance_id: &str, family: &str, seed: u64, r: &crate::solver::SolveResult) -> Self {
        Self {
            schema: RESULT_SCHEMA.to_string(),
            instance_id: instance_id.to_string(),
            family: family.to_string(),
            d: r.s.len(),
            seed,
            eta: r.eta,
            iterations: r.iterations,
            wall_time_s: Some(r.wall_time),
            energy: r.energy,
            chi_hat: r.chi_hat(),
            tts: r.tts(),
            speed: r.speed(),
            solver: "pds".to_string(),
        }
    }
}

/// Serializes rows through one writer. The header is written exactly once,
/// before the first row, unless `header` is false (appending).
pub struct ResultWriter<W: Write> {
    inner: csv::Writer<W>,
    header_pending: bool,
}

impl<W: Write> ResultWriter<W> {
    pub fn new(sink: W, header: bool) -> Self {
        Self { inner: csv::WriterBuilder::new().has_headers(false).from_writer(sink), header_pending: header }
    }

    pub fn write(&mut self, record: &ResultRecord) -> Result<()> {
        if self.header_pending {
            self.inner.write_record(RESULT_HEADER).map_err(csv_err)?;
            self.header_pending = false;
        }
        self.inner.serialize(record).map_err(csv_err)
    }

    /// Emits the header even if no rows follow.
    pub fn finish(mut self) -> Result<W> {
        if self.header_pending {
            self.inner.write_record(RESULT_HEADER).map_err(csv_err)?;
        }
        self.inner.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { line: 0, msg: format!("{other:?}") },
    }
}

/// Parses a results table, checking the header.
pub fn read_results<R: Read>(source: R) -> Result<Vec<ResultRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.iter().ne(RESULT_HEADER.iter().copied()) {
        return Err(Error::Parse { line: 1, msg: "unexpected results header".into() });
    }
    reader
        .deserialize()
        .enumerate()
        .map(|(k, row)| row.map_err(|e| Error::Parse { line: k + 2, msg: e.to_string() }))
        .collect()
}

/// Appends rows to `path`, writing the header only when the file is new or empty.
pub fn append_results(path: impl AsRef<Path>, rows: &[ResultRecord]) -> Result<()> {
    let path = path.as_ref();
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = fs::OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = ResultWriter::new(file, fresh);
    for r in rows {
        w.write(r)?;
    }
    w.finish()?.flush()?;
    Ok(())
}
