//! Run configuration and deterministic CSV/JSON artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::atom::{AtomScfOptions, PseudoPotential};
use crate::dissociation::ExtractionOptions;
use crate::error::{Error, Result};
use crate::scf::{PhaseOptions, ScfConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Isolated-atom block.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AtomSection {
    pub points: usize,
    pub r_max: f64,
    /// Grading of the radial grid toward the nucleus.
    pub beta: f64,
    pub pseudo_potential: PseudoPotential,
    pub mixing: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AtomSection {
    fn default() -> Self {
        let o = AtomScfOptions::default();
        Self {
            points: 4000,
            r_max: 40.0,
            beta: 8.0,
            pseudo_potential: PseudoPotential::zero(),
            mixing: o.mixing,
            tol: o.tol,
            max_iter: o.max_iter,
        }
    }
}

impl AtomSection {
    pub fn options(&self) -> AtomScfOptions {
        AtomScfOptions { mixing: self.mixing, tol: self.tol, max_iter: self.max_iter }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSection {
    pub l: f64,
    pub lattice: crate::lattice::LatticeSpec,
    /// Number of cross-check points inside the cell.
    pub points: usize,
    pub fourier_cutoff: f64,
    pub shells: usize,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self { l: 1.0, lattice: crate::lattice::LatticeSpec::preset("honeycomb"), points: 10, fourier_cutoff: 4000.0, shells: 8 }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum BandSource {
    /// `V = 0`.
    Free,
    /// Converged mean field of the `[scf]` block.
    #[default]
    Scf,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BandsSection {
    pub source: BandSource,
    pub path: Vec<String>,
    pub samples_per_segment: usize,
    pub n_bands: usize,
    /// Adds nearest-neighbor tight-binding bands with on-site `-wallace_mu` and hopping `wallace_theta`.
    pub wallace: bool,
    pub wallace_theta: f64,
    pub wallace_mu: f64,
}

impl Default for BandsSection {
    fn default() -> Self {
        Self {
            source: BandSource::Scf,
            path: default_path(),
            samples_per_segment: 24,
            n_bands: 6,
            wallace: false,
            wallace_theta: -1.0,
            wallace_mu: 0.0,
        }
    }
}

fn default_path() -> Vec<String> {
    ["G", "K", "M", "G"].iter().map(|s| s.to_string()).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TbSection {
    pub ls: Vec<f64>,
    pub extraction: ExtractionOptions,
    pub path: Vec<String>,
    pub samples_per_segment: usize,
}

impl Default for TbSection {
    fn default() -> Self {
        Self { ls: vec![4.0, 6.0, 8.0], extraction: ExtractionOptions::default(), path: default_path(), samples_per_segment: 16 }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum DiracSource {
    /// Wallace model with the given hopping.
    #[default]
    Tb,
    /// Plane-wave bands of the converged `[scf]` state.
    Pw,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DiracSection {
    pub source: DiracSource,
    pub theta: f64,
    /// Cone-fit radius in units of `|K|`.
    pub radius: f64,
    pub directions: usize,
    pub radii: usize,
}

impl Default for DiracSection {
    fn default() -> Self {
        Self { source: DiracSource::Tb, theta: -1.0, radius: 0.05, directions: 16, radii: 4 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseScanSection {
    pub ls: Vec<f64>,
    pub options: PhaseOptions,
}

impl Default for PhaseScanSection {
    fn default() -> Self {
        Self { ls: vec![0.5, 1.0, 1.4, 2.0, 6.0], options: PhaseOptions::default() }
    }
}

/// Whole configuration file; every block is optional.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub atom: AtomSection,
    pub kernel: KernelSection,
    pub scf: ScfConfig,
    pub bands: BandsSection,
    pub tb: TbSection,
    pub dirac: DiracSection,
    pub phase_scan: PhaseScanSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.scf.validate()?;
        let a = &self.atom;
        if a.points < 16 || !(a.r_max > 0.0) || !(a.beta >= 0.0) {
            return Err(Error::Config("atom grid needs >= 16 points and a positive extent".into()));
        }
        if !(a.mixing > 0.0 && a.mixing <= 1.0) || !(a.tol > 0.0) {
            return Err(Error::Config("atom mixing must lie in (0, 1] and tol be positive".into()));
        }
        a.pseudo_potential.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.kernel.l > 0.0) || self.kernel.shells < 2 {
            return Err(Error::Config("kernel needs L > 0 and at least 2 shells".into()));
        }
        if self.bands.n_bands == 0 || self.bands.samples_per_segment == 0 {
            return Err(Error::Config("bands need at least one band and one sample".into()));
        }
        if self.tb.ls.iter().chain(&self.phase_scan.ls).any(|l| !(*l > 0.0)) {
            return Err(Error::Config("scales must be positive".into()));
        }
        let d = &self.dirac;
        if !(d.radius > 0.0) || d.directions < 8 || d.radii < 2 {
            return Err(Error::Config("cone fit needs a positive radius, 8 directions and 2 radii".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, so formatting of the source file does not matter.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// `x` with 12 significant digits in scientific notation.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
    }
}

/// `x` rounded to 12 significant digits.
pub fn round_significant(x: f64) -> f64 {
    if x.is_finite() {
        format_number(x).parse().expect("formatted float parses")
    } else {
        x
    }
}

fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_significant(n.as_f64().unwrap());
            serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_value).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

/// Provenance stamped into every output file.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct Stamp {
    pub command: String,
    pub version: String,
    pub config_hash: String,
}

impl Stamp {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self { command: command.to_string(), version: VERSION.to_string(), config_hash: config.hash() }
    }
}

/// JSON document `{command, version, config_hash, data}` with rounded floats.
pub fn json_document<T: Serialize>(stamp: &Stamp, data: &T) -> Result<String> {
    let data = serde_json::to_value(data).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut doc = serde_json::Map::new();
    doc.insert("command".into(), Value::String(stamp.command.clone()));
    doc.insert("version".into(), Value::String(stamp.version.clone()));
    doc.insert("config_hash".into(), Value::String(stamp.config_hash.clone()));
    doc.insert("data".into(), round_value(data));
    let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("json value serializes");
    s.push('\n');
    Ok(s)
}

/// Numeric or text cell of a CSV table.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// CSV with `#` provenance lines and one header row.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, stamp: &Stamp) -> String {
        let mut s = format!(
            "# command={} version={} config_hash={}\n{}\n",
            stamp.command,
            stamp.version,
            stamp.config_hash,
            self.header.join(",")
        );
        for r in &self.rows {
            let cells: Vec<String> = r
                .iter()
                .map(|c| match c {
                    Cell::Num(x) => format_number(*x),
                    Cell::Int(i) => i.to_string(),
                    Cell::Text(t) if t.contains([',', '"', '\n']) => format!("\"{}\"", t.replace('"', "\"\"")),
                    Cell::Text(t) => t.clone(),
                })
                .collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// Named output files of one command.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn json<T: Serialize>(&mut self, name: &str, stamp: &Stamp, data: &T) -> Result<()> {
        self.files.push((name.to_string(), json_document(stamp, data)?));
        Ok(())
    }

    pub fn csv(&mut self, name: &str, stamp: &Stamp, table: &Table) {
        self.files.push((name.to_string(), table.render(stamp)));
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
        for (name, body) in &self.files {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
        }
        Ok(())
    }
}
