//! Flat key = value configuration with [sections] and '#' comments.
//!
//! The same parser reads builtin scenario presets and user files; defaults
//! are printable with the CLI's --dump-config.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::from("");
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| {
                    CoreError::Config(format!("line {}: unterminated section header", lineno + 1))
                })?;
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CoreError::Config(format!(
                    "line {}: expected key = value, got '{line}'",
                    lineno + 1
                ))
            })?;
            if current.is_empty() {
                return Err(CoreError::Config(format!(
                    "line {}: key outside any [section]",
                    lineno + 1
                )));
            }
            sections
                .get_mut(&current)
                .unwrap()
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(RawConfig { sections })
    }

    pub fn load(path: &Path) -> Result<RawConfig> {
        let text = std::fs::read_to_string(path)?;
        RawConfig::parse(&text)
    }

    /// Later keys win; used to layer user overrides on a preset.
    pub fn merge_over(&mut self, other: &RawConfig) {
        for (section, kv) in &other.sections {
            let target = self.sections.entry(section.clone()).or_default();
            for (k, v) in kv {
                target.insert(k.clone(), v.clone());
            }
        }
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(|s| s.as_str())
    }

    pub fn str_or<'a>(&'a self, section: &str, key: &str, default: &'a str) -> &'a str {
        self.get(section, key).unwrap_or(default)
    }

    pub fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        match self.get(section, key) {
            None => Ok(default),
            Some(text) => text
                .parse()
                .map_err(|_| CoreError::Config(format!("[{section}] {key}: bad number '{text}'"))),
        }
    }

    pub fn f64_req(&self, section: &str, key: &str) -> Result<f64> {
        self.get(section, key)
            .ok_or_else(|| CoreError::Config(format!("[{section}] missing required key '{key}'")))?
            .parse()
            .map_err(|_| CoreError::Config(format!("[{section}] {key}: bad number")))
    }

    pub fn f64_opt(&self, section: &str, key: &str) -> Result<Option<f64>> {
        match self.get(section, key) {
            None => Ok(None),
            Some("auto") => Ok(None),
            Some(text) => text
                .parse()
                .map(Some)
                .map_err(|_| CoreError::Config(format!("[{section}] {key}: bad number '{text}'"))),
        }
    }

    pub fn u64_or(&self, section: &str, key: &str, default: u64) -> Result<u64> {
        match self.get(section, key) {
            None => Ok(default),
            Some(text) => text
                .parse()
                .map_err(|_| CoreError::Config(format!("[{section}] {key}: bad integer '{text}'"))),
        }
    }

    pub fn bool_or(&self, section: &str, key: &str, default: bool) -> Result<bool> {
        match self.get(section, key) {
            None => Ok(default),
            Some("true") | Some("yes") | Some("1") => Ok(true),
            Some("false") | Some("no") | Some("0") => Ok(false),
            Some(other) => Err(CoreError::Config(format!(
                "[{section}] {key}: expected true/false, got '{other}'"
            ))),
        }
    }

    pub fn f64_list(&self, section: &str, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(section, key) {
            None => Ok(default.to_vec()),
            Some(text) => text
                .split(',')
                .map(|part| {
                    part.trim().parse().map_err(|_| {
                        CoreError::Config(format!("[{section}] {key}: bad number '{part}'"))
                    })
                })
                .collect(),
        }
    }

    /// Axis list in the form "512x200, 512x200".
    pub fn axes(
        &self,
        section: &str,
        key: &str,
        default: &[(usize, f64)],
    ) -> Result<Vec<(usize, f64)>> {
        match self.get(section, key) {
            None => Ok(default.to_vec()),
            Some(text) => text
                .split(',')
                .map(|part| {
                    let (n, l) = part.trim().split_once(['x', 'X']).ok_or_else(|| {
                        CoreError::Config(format!(
                            "[{section}] {key}: expected N x LENGTH, got '{part}'"
                        ))
                    })?;
                    let n: usize = n.trim().parse().map_err(|_| {
                        CoreError::Config(format!("[{section}] {key}: bad point count '{n}'"))
                    })?;
                    let l: f64 = l.trim().parse().map_err(|_| {
                        CoreError::Config(format!("[{section}] {key}: bad length '{l}'"))
                    })?;
                    Ok((n, l))
                })
                .collect(),
        }
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    /// Canonical text form (sorted sections and keys).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (section, kv) in &self.sections {
            out.push_str(&format!("[{section}]\n"));
            for (k, v) in kv {
                out.push_str(&format!("{k} = {v}\n"));
            }
            out.push('\n');
        }
        out
    }
}
