//! Result records and their canonical JSON form.

use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use sobolev_wlab::verification::{CommutationReport, DensityReport, FinitenessReport};
use sobolev_wlab::{BoundReport, ConvergenceReport, Estimate, NormReport};

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Errors of the two stages of `approx` and the total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxReport {
    pub field_id: String,
    pub j: f64,
    pub epsilon: f64,
    /// `||u - tau_j u||`.
    pub truncation_error: Estimate<f64>,
    /// `||tau_j u - rho||`.
    pub mollification_error: Estimate<f64>,
    /// `u - rho` in both parts of the norm.
    pub total: NormReport<f64>,
    pub rho_support_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: String,
    pub example: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "report", rename_all = "snake_case")]
pub enum Output {
    Norm(NormReport<f64>),
    Approx(ApproxReport),
    Convergence(ConvergenceReport),
    Bound(BoundReport),
    Commutation(CommutationReport),
    Finiteness(FinitenessReport),
    Density(DensityReport),
    Catalog(Vec<CatalogEntry>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub timestamp: String,
    pub command: String,
    pub config: RunConfig,
    pub outputs: Vec<Output>,
    pub verdicts: Vec<Verdict>,
    pub notes: Vec<String>,
}

impl ResultRecord {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn to_canonical_json(&self) -> String {
        canonical_json(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Pretty output with sorted keys and every float written with 17
/// significant digits.
struct Canonical<'a>(PrettyFormatter<'a>);

impl Formatter for Canonical<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        // serde_json turns non-finite floats into null before reaching here
        write!(w, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Canonical JSON of any serializable value, newline-terminated.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    // going through Value sorts object keys
    let v = serde_json::to_value(value).expect("records serialize");
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Canonical(PrettyFormatter::with_indent(b"  ")));
    v.serialize(&mut ser).expect("writing to memory");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits_and_keys_are_sorted() {
        #[derive(Serialize)]
        struct S {
            zeta: f64,
            alpha: f64,
            count: u64,
        }
        let s = canonical_json(&S {
            zeta: 0.1,
            alpha: -2.5e-7,
            count: 3,
        });
        assert_eq!(
            s,
            "{\n  \"alpha\": -2.4999999999999999e-7,\n  \"count\": 3,\n  \"zeta\": 1.0000000000000001e-1\n}\n"
        );
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["zeta"].as_f64(), Some(0.1));
    }

    #[test]
    fn awkward_floats_round_trip() {
        for x in [f64::MIN_POSITIVE, 1.0 / 3.0, 1e300, -0.0, 123456789.123456789] {
            let s = canonical_json(&x);
            let y: f64 = serde_json::from_str(&s).unwrap();
            assert_eq!(x.to_bits(), y.to_bits(), "{s}");
        }
    }
}
