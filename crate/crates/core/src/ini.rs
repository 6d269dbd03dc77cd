//! INI-style configuration: `[section]` headers, `key = value` lines and
//! `#` comments. Every error carries the offending line and field.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub section: Option<String>,
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            line: None,
            section: None,
            field: None,
            message: message.into(),
        }
    }

    pub fn at_line(mut self, line: usize) -> Self {
        self.line = Some(line);
        self
    }

    pub fn in_section(mut self, section: &str) -> Self {
        self.section = Some(section.to_string());
        self
    }

    pub fn field(mut self, field: &str) -> Self {
        self.field = Some(field.to_string());
        self
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(section) = &self.section {
            write!(f, "[{section}] ")?;
        }
        if let Some(field) = &self.field {
            write!(f, "{field}: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    fn error(&self, entry: Option<&Entry>, key: &str, message: String) -> ConfigError {
        ConfigError::new(message)
            .at_line(entry.map_or(self.line, |e| e.line))
            .in_section(&self.name)
            .field(key)
    }

    pub fn parse<T>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|err| self.error(Some(e), key, format!("invalid value {:?}: {err}", e.value))),
        }
    }

    pub fn require<T>(&self, key: &str) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.parse(key)?
            .ok_or_else(|| self.error(None, key, "required key missing".into()))
    }

    /// Comma-separated list.
    pub fn parse_list<T>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        let Some(e) = self.get(key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|err| self.error(Some(e), key, format!("invalid item {s:?}: {err}")))
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    pub fn flag(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        let Some(e) = self.get(key) else {
            return Ok(None);
        };
        match e.value.to_ascii_lowercase().as_str() {
            "true" | "yes" | "on" | "1" => Ok(Some(true)),
            "false" | "no" | "off" | "0" => Ok(Some(false)),
            other => Err(self.error(Some(e), key, format!("expected a boolean, got {other:?}"))),
        }
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        match self.entries.iter().find(|e| !allowed.contains(&e.key.as_str())) {
            None => Ok(()),
            Some(e) => Err(self.error(Some(e), &e.key, "unknown key".into())),
        }
    }

    pub fn field_error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        self.error(self.get(key), key, message.into())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Document {
    pub sections: Vec<Section>,
}

impl Document {
    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    /// Sections named `<prefix>.<label>`, in file order, with their labels.
    pub fn labelled<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a Section)> + 'a {
        self.sections.iter().filter_map(move |s| {
            s.name
                .strip_prefix(prefix)
                .and_then(|rest| rest.strip_prefix('.'))
                .filter(|label| !label.is_empty())
                .map(|label| (label, s))
        })
    }
}

impl FromStr for Document {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut doc = Document::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(inner) = content.strip_prefix('[') {
                let name = inner
                    .strip_suffix(']')
                    .map(str::trim)
                    .filter(|n| !n.is_empty())
                    .ok_or_else(|| ConfigError::new("malformed section header").at_line(line))?;
                if doc.section(name).is_some() {
                    return Err(ConfigError::new("duplicate section")
                        .at_line(line)
                        .in_section(name));
                }
                doc.sections.push(Section {
                    name: name.to_string(),
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::new("expected `key = value`").at_line(line))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::new("empty key").at_line(line));
            }
            let section = doc
                .sections
                .last_mut()
                .ok_or_else(|| ConfigError::new("key outside any section").at_line(line).field(key))?;
            if section.get(key).is_some() {
                return Err(ConfigError::new("duplicate key")
                    .at_line(line)
                    .in_section(&section.name)
                    .field(key));
            }
            section.entries.push(Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line,
            });
        }
        Ok(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# comment
[experiment]
seed = 7   # trailing
rh_th = 64, 128

[tracker.ss]
kind = space_saving
";

    #[test]
    fn parses_sections_and_lists() {
        let doc: Document = SAMPLE.parse().unwrap();
        let exp = doc.section("experiment").unwrap();
        assert_eq!(exp.require::<u64>("seed").unwrap(), 7);
        assert_eq!(exp.parse_list::<u64>("rh_th").unwrap(), Some(vec![64, 128]));
        let labels: Vec<&str> = doc.labelled("tracker").map(|(l, _)| l).collect();
        assert_eq!(labels, vec!["ss"]);
    }

    #[test]
    fn errors_carry_line_and_field() {
        let doc: Document = "[a]\nx = 1\ny = nope\n".parse().unwrap();
        let err = doc.section("a").unwrap().require::<u32>("y").unwrap_err();
        assert_eq!(err.line, Some(3));
        assert_eq!(err.field.as_deref(), Some("y"));
        assert!(err.to_string().starts_with("line 3: [a] y: "));

        let err = "x = 1".parse::<Document>().unwrap_err();
        assert_eq!(err.line, Some(1));
        let err = "[a]\nk = 1\nk = 2".parse::<Document>().unwrap_err();
        assert_eq!(err.line, Some(3));
        let err = "[a]\njunk".parse::<Document>().unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn unknown_keys_rejected() {
        let doc: Document = "[a]\nx = 1\nzz = 2\n".parse().unwrap();
        let err = doc.section("a").unwrap().check_keys(&["x"]).unwrap_err();
        assert_eq!(err.line, Some(3));
    }
}
