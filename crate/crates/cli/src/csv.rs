//! Minimal CSV documents with `#` metadata lines and `#>` section markers.
//!
//! Floats are written with `Display`, which prints the shortest string that
//! parses back to the same `f64`, so a round trip is lossless.

use std::fmt::Write as _;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Section {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Section {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Result<usize, CliError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CliError::Csv(format!("section {:?} has no column {name:?}", self.name)))
    }

    /// Parses one column as `f64`.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let k = self.column_index(name)?;
        self.rows
            .iter()
            .map(|r| {
                r[k].parse::<f64>()
                    .map_err(|_| CliError::Csv(format!("column {name:?}: not a number: {:?}", r[k])))
            })
            .collect()
    }

    pub fn strings(&self, name: &str) -> Result<Vec<&str>, CliError> {
        let k = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[k].as_str()).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Document {
    /// Metadata as `(key, value)` pairs, in file order.
    pub meta: Vec<(String, String)>,
    pub sections: Vec<Section>,
}

impl Document {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn section(&self, name: &str) -> Result<&Section, CliError> {
        self.sections
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| CliError::Csv(format!("no section {name:?}")))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k} = {v}");
        }
        for s in &self.sections {
            let _ = writeln!(out, "#> {}", s.name);
            let _ = writeln!(out, "{}", s.columns.join(","));
            for r in &s.rows {
                let _ = writeln!(out, "{}", r.join(","));
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut doc = Document::default();
        let mut current: Option<Section> = None;
        for (n, line) in text.lines().enumerate() {
            if let Some(name) = line.strip_prefix("#> ") {
                if let Some(s) = current.take() {
                    doc.sections.push(s);
                }
                current = Some(Section {
                    name: name.trim().to_string(),
                    ..Section::default()
                });
            } else if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest
                    .split_once(" = ")
                    .ok_or_else(|| CliError::Csv(format!("line {}: bad metadata {line:?}", n + 1)))?;
                doc.meta.push((k.to_string(), v.to_string()));
            } else if line.is_empty() {
                continue;
            } else {
                let s = current
                    .as_mut()
                    .ok_or_else(|| CliError::Csv(format!("line {}: data before any section", n + 1)))?;
                let fields: Vec<String> = line.split(',').map(str::to_string).collect();
                if s.columns.is_empty() {
                    s.columns = fields;
                } else if fields.len() != s.columns.len() {
                    return Err(CliError::Csv(format!(
                        "line {}: {} fields, expected {}",
                        n + 1,
                        fields.len(),
                        s.columns.len()
                    )));
                } else {
                    s.rows.push(fields);
                }
            }
        }
        if let Some(s) = current {
            doc.sections.push(s);
        }
        Ok(doc)
    }
}

pub fn f(x: f64) -> String {
    format!("{x}")
}

pub fn u(x: usize) -> String {
    format!("{x}")
}
