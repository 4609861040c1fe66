//! Parameter documents: loading, `--set` overrides and the metadata preamble.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use omm_core::experiments::fmt_float;
use omm_core::{PhysicalParams, ValidatedModel};

use crate::Failure;

const UNIT_KEYS: [&str; 2] = ["over_2pi_hz", "rad_per_s"];

pub struct RunConfig {
    pub path: String,
    pub overrides: Vec<String>,
    pub model: ValidatedModel,
    /// SHA-256 of the parameter document after overrides, in canonical form.
    pub hash: String,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Input(format!("cannot read config {}: {e}", path.display())))?;
        let mut doc: Value = serde_json::from_str(&text)
            .map_err(|e| Failure::Input(format!("config {} is not valid JSON: {e}", path.display())))?;
        for assignment in overrides {
            apply_override(&mut doc, assignment)?;
        }
        let params: PhysicalParams = serde_path_to_error::deserialize(doc).map_err(|e| {
            let field = e.path().to_string();
            Failure::Input(format!("config field {field}: {}", e.inner()))
        })?;
        let model = params.validate().map_err(Failure::from)?;
        let canonical = serde_json::to_string(&params).expect("parameters serialize");
        let hash = Sha256::digest(canonical.as_bytes())
            .iter()
            .fold(String::new(), |mut s, b| {
                write!(s, "{b:02x}").unwrap();
                s
            });
        Ok(Self {
            path: path.display().to_string(),
            overrides: overrides.to_vec(),
            model,
            hash,
        })
    }

    /// `#`-prefixed header shared by every artifact.
    pub fn preamble(&self, command: &str) -> String {
        let mut out = String::new();
        writeln!(out, "# omm {} {command}", env!("CARGO_PKG_VERSION")).unwrap();
        writeln!(out, "# config {}", self.path).unwrap();
        writeln!(out, "# config_sha256 {}", self.hash).unwrap();
        for o in &self.overrides {
            writeln!(out, "# override {o}").unwrap();
        }
        writeln!(out, "# resolved parameters (frequencies in rad/s, T in K, P_L in W, b_drive in T, lengths in m)").unwrap();
        let value = serde_json::to_value(&self.model).expect("model serializes");
        let mut flat = Vec::new();
        flatten("", &value, &mut flat);
        for (k, v) in flat {
            writeln!(out, "# {k} = {v}").unwrap();
        }
        out
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&join(k), v, out);
            }
        }
        Value::Number(n) => out.push((prefix.to_string(), fmt_float(n.as_f64().unwrap_or(f64::NAN)))),
        Value::Null => out.push((prefix.to_string(), "NA".into())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// Applies `a.b.c=value`. A bare number assigned to a unit-tagged entry keeps
/// the entry's unit; other values replace the target. The value is parsed as
/// JSON when possible and taken as a string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), Failure> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Failure::Input(format!("override {assignment:?} is not of the form key=value")))?;
    let segments: Vec<&str> = key.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Failure::Input(format!("override key {key:?} has an empty path segment")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));

    let (last, parents) = segments.split_last().expect("split yields one segment");
    let mut node = doc;
    for seg in parents {
        let map = node
            .as_object_mut()
            .ok_or_else(|| Failure::Input(format!("override {key}: {seg} is not inside an object")))?;
        node = map.entry(seg.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    let map = node
        .as_object_mut()
        .ok_or_else(|| Failure::Input(format!("override {key}: parent is not an object")))?;
    match map.get_mut(*last) {
        Some(Value::Object(inner)) if value.is_number() && inner.len() == 1 => {
            let unit = inner.keys().next().expect("one key").clone();
            if !UNIT_KEYS.contains(&unit.as_str()) {
                return Err(Failure::Input(format!("override {key}: unknown unit key {unit}")));
            }
            inner.insert(unit, value);
        }
        _ => {
            map.insert(last.to_string(), value);
        }
    }
    Ok(())
}
