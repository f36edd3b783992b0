//! Versioned JSON documents and fixed-column CSV files.
//!
//! Every JSON document carries `"format": "obl/1"` and the crate version.
//! Curve documents are the bare curve spec plus those two fields, so a
//! perturbed curve written by one command is a valid `--curve` for the next.

use std::fs;
use std::io::Write;
use std::path::Path;

use obl_core::manifolds::{HeteroclinicPoint, ManifoldBranch};
use obl_core::variational::PolygonConfig;
use obl_core::{OvalSpec, PeriodicOrbit};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const FORMAT: &str = "obl/1";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A report body wrapped with the format tag, version and report name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document<T> {
    pub format: String,
    pub version: String,
    pub report: String,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Document<T> {
    pub fn new(report: &str, body: T) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION.into(),
            report: report.into(),
            body,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveDocument {
    pub format: String,
    pub version: String,
    #[serde(flatten)]
    pub spec: OvalSpec,
}

impl CurveDocument {
    pub fn new(spec: OvalSpec) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION.into(),
            spec,
        }
    }
}

/// One entry of an orbit library. Only `id` and `orbit` are required, so
/// hand-written libraries work too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hessian_signature: Option<(usize, usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub is_minimum: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nondegenerate: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetition_of: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<PolygonConfig>,
    pub orbit: PeriodicOrbit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitLibrary {
    pub curve: OvalSpec,
    pub m: usize,
    pub n: usize,
    pub starts: usize,
    pub converged: usize,
    pub rejected: usize,
    pub orbits: Vec<OrbitRecord>,
}

impl OrbitLibrary {
    pub fn get(&self, id: usize) -> CliResult<&OrbitRecord> {
        self.orbits
            .iter()
            .find(|r| r.id == id)
            .ok_or_else(|| CliError::Validation(format!("no orbit with id {id} in the library")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchDocumentBody {
    pub curve: OvalSpec,
    pub branch: ManifoldBranch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionsBody {
    pub threshold: f64,
    pub count: usize,
    pub points: Vec<HeteroclinicPoint>,
}

fn check_tag(value: &serde_json::Value, origin: &str) -> CliResult<()> {
    match value.get("format") {
        None => Ok(()),
        Some(serde_json::Value::String(s)) if s == FORMAT => Ok(()),
        Some(other) => Err(CliError::Validation(format!(
            "{origin}: field `format`: expected \"{FORMAT}\", found {other}"
        ))),
    }
}

/// Parses JSON text, naming the offending field on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> CliResult<T> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("{origin}: malformed JSON: {e}")))?;
    check_tag(&value, origin)?;
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        CliError::Validation(format!("{origin}: field `{path}`: {}", e.into_inner()))
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    parse_json(&text, &path.display().to_string())
}

pub fn read_curve(path: &Path) -> CliResult<OvalSpec> {
    let origin = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{origin}: {e}")))?;
    parse_curve(&text, &origin)
}

/// Like [`parse_json`], but sees through the `kind` tag so that errors
/// name the offending field.
pub fn parse_curve(text: &str, origin: &str) -> CliResult<OvalSpec> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("{origin}: malformed JSON: {e}")))?;
    check_tag(&value, origin)?;
    locate_curve_error(&value, "")
        .map_err(|(path, msg)| CliError::Validation(format!("{origin}: field `{path}`: {msg}")))?;
    serde_json::from_value(value).map_err(|e| CliError::Validation(format!("{origin}: {e}")))
}

#[derive(Deserialize)]
#[allow(dead_code)]
struct FourierFields {
    a0: f64,
    #[serde(default)]
    harmonics: Vec<obl_core::curve::Harmonic>,
}

#[derive(Deserialize)]
#[allow(dead_code)]
struct EllipseFields {
    a: f64,
    b: f64,
}

#[derive(Deserialize)]
#[allow(dead_code)]
struct PerturbedFields {
    base: serde_json::Value,
    bumps: Vec<obl_core::NormalBump>,
}

fn locate_curve_error(value: &serde_json::Value, prefix: &str) -> Result<(), (String, String)> {
    fn fields<T: DeserializeOwned>(value: &serde_json::Value, prefix: &str) -> Result<T, (String, String)> {
        serde_path_to_error::deserialize(value.clone()).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { String::new() } else { path };
            (format!("{prefix}.{}", path.trim_start_matches('.')), e.into_inner().to_string())
        })
    }
    let kind = match value.get("kind") {
        Some(serde_json::Value::String(k)) => k.as_str(),
        Some(_) => return Err((format!("{prefix}.kind"), "expected a string".into())),
        None => return Err((format!("{prefix}.kind"), "missing field `kind`".into())),
    };
    match kind {
        "fourier" => fields::<FourierFields>(value, prefix).map(|_| ()),
        "ellipse" => fields::<EllipseFields>(value, prefix).map(|_| ()),
        "perturbed" => {
            let p = fields::<PerturbedFields>(value, prefix)?;
            locate_curve_error(&p.base, &format!("{prefix}.base"))
        }
        other => Err((
            format!("{prefix}.kind"),
            format!("unknown curve kind `{other}`, expected fourier, ellipse or perturbed"),
        )),
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

/// Writes to `path`, or to standard output when `path` is `None`.
pub fn emit(path: Option<&Path>, contents: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, contents).map_err(|e| CliError::Validation(format!("{}: {e}", p.display()))),
        None => {
            std::io::stdout().write_all(contents.as_bytes())?;
            Ok(())
        }
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text with a header and 17-digit numeric fields.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> CliResult<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    pub fn row(&mut self, ints: &[i64], floats: &[f64]) -> CliResult<()> {
        let fields: Vec<String> = ints
            .iter()
            .map(|i| i.to_string())
            .chain(floats.iter().map(|&x| fmt17(x)))
            .collect();
        self.writer.write_record(&fields)?;
        Ok(())
    }

    pub fn finish(self) -> CliResult<String> {
        let bytes = self
            .writer
            .into_inner()
            .map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("ascii csv"))
    }
}

/// Parses a CSV written by [`Table`] back into its numeric columns.
pub fn read_table(text: &str) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| CliError::Validation(format!("bad number `{f}`: {e}"))))
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_document_round_trips() {
        let spec = OvalSpec::fourier(1.0, &[(3, 0.1, 0.0)]).perturbed(vec![obl_core::NormalBump::new(0.1, 0.2, 1e-3)]);
        let text = to_json(&CurveDocument::new(spec.clone()));
        let back: OvalSpec = parse_json(&text, "doc").unwrap();
        assert_eq!(back, spec);
        let doc: CurveDocument = parse_json(&text, "doc").unwrap();
        assert_eq!(doc.version, VERSION);
    }

    #[test]
    fn errors_name_the_field() {
        let err = parse_curve(r#"{"kind": "ellipse", "a": "two", "b": 1}"#, "c.json").unwrap_err();
        assert!(err.to_string().contains("`.a`"), "{err}");
        let err = parse_curve(r#"{"kind": "oval", "a": 2}"#, "c.json").unwrap_err();
        assert!(err.to_string().contains("`.kind`"), "{err}");
        let err = parse_json::<OvalSpec>(r#"{"format": "obl/0", "kind": "ellipse", "a": 2, "b": 1}"#, "c.json").unwrap_err();
        assert!(err.to_string().contains("format"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::f64::consts::PI] {
            assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
        }
        let mut t = Table::new(&["step", "x"]).unwrap();
        t.row(&[3], &[0.1]).unwrap();
        let (h, rows) = read_table(&t.finish().unwrap()).unwrap();
        assert_eq!(h, vec!["step", "x"]);
        assert_eq!(rows, vec![vec![3.0, 0.1]]);
    }
}
