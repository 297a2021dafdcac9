//! Deterministic output formats.
//!
//! JSON floats are written with 17 significant digits in scientific notation
//! (`1.9098593171027440e0`), so every double round-trips exactly and output
//! bytes depend only on the values. Non-finite floats become `null`. CSV
//! fields carry 15 significant digits and never print a negative zero.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::LabResult;

pub const TOOL: &str = "qetlab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Every JSON output document: tool, version, resolved config and result.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, C: Serialize, R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a C,
    pub report: &'a R,
}

impl<'a, C: Serialize, R: Serialize> Envelope<'a, C, R> {
    pub fn new(command: &'a str, config: &'a C, report: &'a R) -> Self {
        Envelope {
            tool: TOOL,
            version: VERSION,
            command,
            config,
            report,
        }
    }
}

/// `{:.16e}` without the redundant `+` and with `-0` folded to `0`.
pub fn sig17(v: f64) -> String {
    if v == 0.0 {
        return "0.0000000000000000e0".into();
    }
    format!("{v:.16e}")
}

fn write_float<W: ?Sized + Write>(w: &mut W, v: f64) -> io::Result<()> {
    if v.is_finite() {
        w.write_all(sig17(v).as_bytes())
    } else {
        w.write_all(b"null")
    }
}

/// Pretty JSON with fixed-width floats.
pub struct Sig17Pretty(PrettyFormatter<'static>);

/// Single-line JSON with fixed-width floats, for JSON-lines output.
pub struct Sig17Compact;

impl Default for Sig17Pretty {
    fn default() -> Self {
        Sig17Pretty(PrettyFormatter::with_indent(b"  "))
    }
}

impl Formatter for Sig17Compact {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write_float(w, v)
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write_float(w, v as f64)
    }
}

impl Formatter for Sig17Pretty {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write_float(w, v)
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write_float(w, v as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_pretty<T: Serialize + ?Sized>(value: &T) -> LabResult<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig17Pretty::default());
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

pub fn to_json_line<T: Serialize + ?Sized>(value: &T) -> LabResult<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig17Compact);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

/// CSV field with 15 significant digits; `None` is an empty field.
pub fn csv_float(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(v) if v == 0.0 => "0.00000000000000e0".into(),
        Some(v) if v.is_nan() => "nan".into(),
        Some(v) if v.is_infinite() => if v > 0.0 { "inf" } else { "-inf" }.into(),
        Some(v) => format!("{v:.14e}"),
    }
}

/// Writes `# `-prefixed provenance lines followed by the table.
pub fn write_csv<W: Write>(
    mut w: W,
    meta: &[(&str, String)],
    header: &[&str],
    rows: &[Vec<String>],
) -> LabResult<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}: {v}")?;
    }
    let mut csv = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    csv.write_record(header)?;
    for r in rows {
        csv.write_record(r)?;
    }
    csv.flush()?;
    Ok(())
}
