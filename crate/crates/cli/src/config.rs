//! Plain-text `[section]` / `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::Path;

use crate::CliError;

#[derive(Debug, Clone)]
pub struct Entry {
    pub value: String,
    pub line: usize,
}

/// One `[section]` block; keys are unique within a section.
#[derive(Debug, Clone, Default)]
pub struct Section {
    name: String,
    entries: BTreeMap<String, Entry>,
}

impl Section {
    pub fn get(&self, key: &str) -> Result<&str, CliError> {
        self.entries
            .get(key)
            .map(|e| e.value.as_str())
            .ok_or_else(|| CliError::Config(format!("missing field '{key}' in [{}]", self.name)))
    }

    pub fn opt(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        let e = self
            .entries
            .get(key)
            .ok_or_else(|| CliError::Config(format!("missing field '{key}' in [{}]", self.name)))?;
        e.value.parse().map_err(|_| {
            CliError::Config(format!(
                "line {}: field '{key}' in [{}] is not a number: '{}'",
                e.line, self.name, e.value
            ))
        })
    }

    pub fn opt_f64(&self, key: &str, default: f64) -> Result<f64, CliError> {
        if self.entries.contains_key(key) {
            self.f64(key)
        } else {
            Ok(default)
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        let e = self
            .entries
            .get(key)
            .ok_or_else(|| CliError::Config(format!("missing field '{key}' in [{}]", self.name)))?;
        e.value.parse().map_err(|_| {
            CliError::Config(format!(
                "line {}: field '{key}' in [{}] is not a positive integer: '{}'",
                e.line, self.name, e.value
            ))
        })
    }

    pub fn opt_usize(&self, key: &str, default: usize) -> Result<usize, CliError> {
        if self.entries.contains_key(key) {
            self.usize(key)
        } else {
            Ok(default)
        }
    }

    pub fn u32(&self, key: &str) -> Result<u32, CliError> {
        Ok(self.usize(key)? as u32)
    }

    pub fn i32(&self, key: &str) -> Result<i32, CliError> {
        let e = self
            .entries
            .get(key)
            .ok_or_else(|| CliError::Config(format!("missing field '{key}' in [{}]", self.name)))?;
        e.value.parse().map_err(|_| {
            CliError::Config(format!(
                "line {}: field '{key}' in [{}] is not an integer: '{}'",
                e.line, self.name, e.value
            ))
        })
    }

    /// Entries `prefixN = ...` ordered by the numeric suffix `N`.
    pub fn numbered(&self, prefix: &str) -> Result<Vec<(usize, &str)>, CliError> {
        let mut out = Vec::new();
        for (key, e) in &self.entries {
            if let Some(rest) = key.strip_prefix(prefix) {
                let idx: usize = rest.parse().map_err(|_| {
                    CliError::Config(format!(
                        "line {}: field '{key}' in [{}] must end in a number after '{prefix}'",
                        e.line, self.name
                    ))
                })?;
                out.push((idx, e.value.as_str()));
            }
        }
        out.sort_by_key(|(i, _)| *i);
        Ok(out)
    }

    pub fn entries(&self) -> &BTreeMap<String, Entry> {
        &self.entries
    }
}

/// Parsed run configuration; section order is irrelevant.
#[derive(Debug, Clone, Default)]
pub struct Config {
    sections: BTreeMap<String, Section>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut sections: BTreeMap<String, Section> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::Config(format!("line {line_no}: unterminated section header '{raw}'")))?
                    .trim()
                    .to_string();
                if name.is_empty() {
                    return Err(CliError::Config(format!("line {line_no}: empty section name")));
                }
                sections.entry(name.clone()).or_insert_with(|| Section { name: name.clone(), ..Default::default() });
                current = Some(name);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {line_no}: expected 'key = value', got '{raw}'")))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            let section = current
                .as_ref()
                .ok_or_else(|| CliError::Config(format!("line {line_no}: field '{key}' appears before any [section]")))?;
            let sec = sections.get_mut(section).unwrap();
            if sec.entries.insert(key.clone(), Entry { value, line: line_no }).is_some() {
                return Err(CliError::Config(format!(
                    "line {line_no}: duplicate field '{key}' in [{section}]"
                )));
            }
        }
        Ok(Self { sections })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn section(&self, name: &str) -> Result<&Section, CliError> {
        self.sections
            .get(name)
            .ok_or_else(|| CliError::Config(format!("missing [{name}] section")))
    }

    pub fn opt_section(&self, name: &str) -> Option<&Section> {
        self.sections.get(name)
    }

    /// Replaces a whole section (command-line overrides land here so the
    /// manifest records what was actually used).
    pub fn set_section(&mut self, name: &str, pairs: &[(&str, String)]) {
        let mut sec = Section { name: name.to_string(), ..Default::default() };
        for (k, v) in pairs {
            sec.entries.insert(k.to_string(), Entry { value: v.clone(), line: 0 });
        }
        self.sections.insert(name.to_string(), sec);
    }

    /// Fully resolved key/value view for the run manifest.
    pub fn resolved(&self) -> BTreeMap<String, BTreeMap<String, String>> {
        self.sections
            .iter()
            .map(|(name, sec)| {
                let inner = sec.entries.iter().map(|(k, e)| (k.clone(), e.value.clone())).collect();
                (name.clone(), inner)
            })
            .collect()
    }
}
