//! File formats shared by the library and the command-line driver.
//!
//! JSON documents carry a top-level `schema_version`; CSV tables start with
//! a `# schema_version: N` comment line. Readers reject other versions.

use std::io::Write;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::problem::Field;

pub const SCHEMA_VERSION: u32 = 1;

const CSV_PREFIX: &str = "# schema_version:";

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Checks the `schema_version` member of a JSON document.
pub fn check_json_version(value: &serde_json::Value) -> Result<()> {
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Malformed("missing schema_version".into()))?;
    if found != SCHEMA_VERSION as u64 {
        return Err(Error::SchemaVersion { expected: SCHEMA_VERSION, found: found.min(u32::MAX as u64) as u32 });
    }
    Ok(())
}

/// Parses a versioned JSON document.
pub fn from_json_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    check_json_version(&value)?;
    Ok(serde_json::from_value(value)?)
}

/// Strips and checks the version line of a CSV table.
pub fn csv_body(text: &str) -> Result<&str> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let v = first
        .trim()
        .strip_prefix(CSV_PREFIX)
        .ok_or_else(|| Error::Malformed("CSV table lacks a schema_version line".into()))?;
    let found: u32 = v.trim().parse().map_err(|_| Error::Malformed(format!("bad schema_version line {first:?}")))?;
    if found != SCHEMA_VERSION {
        return Err(Error::SchemaVersion { expected: SCHEMA_VERSION, found });
    }
    Ok(rest)
}

/// `node_id, x, y, u` per node.
pub fn write_solution_csv<W: Write>(mesh: &Mesh, u: &Field, out: W) -> Result<()> {
    mesh.check_field(u)?;
    let mut out = out;
    writeln!(out, "{CSV_PREFIX} {SCHEMA_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node_id", "x", "y", "u"])?;
    for (i, (x, v)) in mesh.nodes().iter().zip(u.values()).enumerate() {
        w.write_record([i.to_string(), x[0].to_string(), x[1].to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_solution_csv`] back onto `mesh`.
pub fn read_solution_csv(mesh: &Mesh, text: &str) -> Result<Field> {
    let body = csv_body(text)?;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Malformed(format!("missing column {name}")))
    };
    let (ci, cu) = (col("node_id")?, col("u")?);
    let mut values = vec![f64::NAN; mesh.node_count()];
    for rec in r.records() {
        let rec = rec?;
        let parse = |c: usize| rec.get(c).ok_or_else(|| Error::Malformed("short CSV row".into()));
        let i: usize = parse(ci)?.trim().parse().map_err(|_| Error::Malformed("bad node_id".into()))?;
        let v: f64 = parse(cu)?.trim().parse().map_err(|_| Error::Malformed("bad u value".into()))?;
        if i >= values.len() {
            return Err(Error::Malformed(format!("node_id {i} out of range")));
        }
        values[i] = v;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Malformed("solution table does not cover every node".into()));
    }
    Field::new(mesh, values)
}
