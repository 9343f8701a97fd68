//! Sectioned `key = value` run files.
//!
//! ```text
//! # comment
//! [relation]
//! kind = linear
//! a = -0.5
//!
//! [domain]
//! kind = disk
//! R = 1
//! ```
//!
//! Keys outside any section must be dotted (`domain.R = 1`). Lists are
//! comma separated, strings may be quoted.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

pub const SECTIONS: [&str; 8] = ["relation", "domain", "solver", "boundary", "output", "sweep", "radial", "fit"];

/// Allowed keys per section. The first key of `relation` and `domain`
/// has the section name as an alias.
pub fn schema(section: &str) -> &'static [&'static str] {
    match section {
        "relation" => &["kind", "a", "lambda", "fprime0", "t_max", "samples"],
        "domain" => &["kind", "R", "a", "b", "R_in", "R_out", "rho", "center"],
        "solver" => &["n_s", "n_theta", "eps", "t_steps", "newton_tol", "newton_max", "damping_factor", "min_step", "armijo"],
        "boundary" => &[
            "constant",
            "plane",
            "cos",
            "sin",
            "inner_constant",
            "inner_cos",
            "inner_sin",
            "outer_constant",
            "outer_cos",
            "outer_sin",
            "outer_from_radial",
        ],
        "output" => &["dir"],
        "sweep" => &["command", "key", "values"],
        "radial" => &["R0", "C0", "r_max", "tol", "points_per_decade"],
        "fit" => &["input", "window", "exponent", "model"],
        _ => &[],
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub path: Option<PathBuf>,
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub suggestion: Option<String>,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self { path: None, line, column, message: message.into(), suggestion: None }
    }

    /// An error that is not tied to a position, such as a missing section.
    pub fn global(message: impl Into<String>) -> Self {
        Self::new(0, 0, message)
    }

    fn suggest(mut self, s: Option<&str>) -> Self {
        self.suggestion = s.map(str::to_owned);
        self
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = &self.path {
            write!(f, "{}:", p.display())?;
        }
        if self.line > 0 {
            write!(f, "{}:{}: ", self.line, self.column)?;
        } else if self.path.is_some() {
            f.write_str(" ")?;
        }
        f.write_str(&self.message)?;
        if let Some(s) = &self.suggestion {
            write!(f, " (did you mean `{s}`?)")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: String,
    pub line: usize,
    /// Column of the first character of the value.
    pub column: usize,
}

impl Entry {
    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.line, self.column, message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFile {
    pub path: Option<PathBuf>,
    pub sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

fn closest<'a>(word: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    let limit = (word.len() / 3).max(2);
    candidates
        .into_iter()
        .map(|c| (strsim::levenshtein(word, c), c))
        .filter(|(d, _)| *d <= limit)
        .min_by_key(|(d, _)| *d)
        .map(|(_, c)| c)
}

/// Strips a trailing `#` comment that is not inside double quotes.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(v: &str) -> &str {
    if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
        &v[1..v.len() - 1]
    } else {
        v
    }
}

impl RunFile {
    pub fn parse_str(text: &str) -> Result<Self, ParseError> {
        let mut rf = RunFile::default();
        let mut current: Option<String> = None;
        for (ln, raw) in text.lines().enumerate() {
            let line_no = ln + 1;
            let body = strip_comment(raw);
            let indent = body.len() - body.trim_start().len();
            let trimmed = body.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ParseError::new(line_no, indent + 1, "unterminated section header"))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(ParseError::new(line_no, indent + 2, format!("unknown section `{name}`"))
                        .suggest(closest(name, SECTIONS)));
                }
                rf.sections.entry(name.to_owned()).or_default();
                current = Some(name.to_owned());
                continue;
            }
            let Some(eq) = body.find('=') else {
                return Err(ParseError::new(line_no, indent + 1, "expected `key = value`"));
            };
            let key_raw = body[..eq].trim();
            let key_col = indent + 1;
            let value_part = &body[eq + 1..];
            let value_col = eq + 2 + (value_part.len() - value_part.trim_start().len());
            let value = unquote(value_part.trim()).to_owned();
            let (section, key) = match (&current, key_raw.split_once('.')) {
                (None, Some((s, k))) => {
                    if !SECTIONS.contains(&s) {
                        return Err(ParseError::new(line_no, key_col, format!("unknown section `{s}`"))
                            .suggest(closest(s, SECTIONS)));
                    }
                    (s.to_owned(), k.to_owned())
                }
                (None, None) => {
                    return Err(ParseError::new(
                        line_no,
                        key_col,
                        format!("key `{key_raw}` outside a section; write `[section]` or `section.{key_raw}`"),
                    ))
                }
                (Some(s), _) => (s.clone(), key_raw.to_owned()),
            };
            let key = if (section == "relation" && key == "relation") || (section == "domain" && key == "domain") {
                "kind".to_owned()
            } else {
                key
            };
            let allowed = schema(&section);
            if !allowed.contains(&key.as_str()) {
                return Err(ParseError::new(line_no, key_col, format!("unknown key `{key}` in [{section}]"))
                    .suggest(closest(&key, allowed.iter().copied())));
            }
            if value.is_empty() {
                return Err(ParseError::new(line_no, value_col, format!("empty value for `{key}`")));
            }
            let entries = rf.sections.entry(section.clone()).or_default();
            if let Some(prev) = entries.get(&key) {
                return Err(ParseError::new(
                    line_no,
                    key_col,
                    format!("duplicate key `{key}` in [{section}] (first set on line {})", prev.line),
                ));
            }
            entries.insert(key, Entry { value, line: line_no, column: value_col });
        }
        Ok(rf)
    }

    /// Reads and parses a run file; relative paths inside it resolve
    /// against its directory.
    pub fn parse_file(path: &Path) -> Result<Self, ParseError> {
        let text = std::fs::read_to_string(path).map_err(|e| ParseError {
            path: Some(path.to_owned()),
            ..ParseError::global(format!("cannot read run file: {e}"))
        })?;
        let mut rf = Self::parse_str(&text).map_err(|e| ParseError { path: Some(path.to_owned()), ..e })?;
        rf.path = Some(path.to_owned());
        rf.check_paths().map_err(|e| ParseError { path: Some(path.to_owned()), ..e })?;
        Ok(rf)
    }

    /// Directory that relative paths resolve against.
    pub fn base_dir(&self) -> PathBuf {
        self.path
            .as_ref()
            .and_then(|p| p.parent())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_owned()
        } else {
            self.base_dir().join(p)
        }
    }

    fn check_paths(&self) -> Result<(), ParseError> {
        if let Some(e) = self.get("fit", "input") {
            if !self.resolve(&e.value).is_file() {
                return Err(e.err(format!("input file `{}` not found", e.value)));
            }
        }
        Ok(())
    }

    pub fn has(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn require(&self, section: &str, command: &str) -> Result<(), ParseError> {
        if self.has(section) {
            Ok(())
        } else {
            Err(ParseError::global(format!("`{command}` requires a [{section}] section")))
        }
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|s| s.get(key))
    }

    pub fn str(&self, section: &str, key: &str) -> Option<&str> {
        self.get(section, key).map(|e| e.value.as_str())
    }

    pub fn require_str(&self, section: &str, key: &str) -> Result<&str, ParseError> {
        self.str(section, key)
            .ok_or_else(|| ParseError::global(format!("missing key `{key}` in [{section}]")))
    }

    pub fn f64(&self, section: &str, key: &str) -> Result<Option<f64>, ParseError> {
        self.get(section, key)
            .map(|e| {
                e.value
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| e.err(format!("`{key}` expects a finite number, got `{}`", e.value)))
            })
            .transpose()
    }

    pub fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64, ParseError> {
        Ok(self.f64(section, key)?.unwrap_or(default))
    }

    pub fn require_f64(&self, section: &str, key: &str) -> Result<f64, ParseError> {
        self.f64(section, key)?
            .ok_or_else(|| ParseError::global(format!("missing key `{key}` in [{section}]")))
    }

    pub fn usize(&self, section: &str, key: &str) -> Result<Option<usize>, ParseError> {
        self.get(section, key)
            .map(|e| {
                e.value
                    .parse::<usize>()
                    .map_err(|_| e.err(format!("`{key}` expects a non-negative integer, got `{}`", e.value)))
            })
            .transpose()
    }

    pub fn bool(&self, section: &str, key: &str) -> Result<Option<bool>, ParseError> {
        self.get(section, key)
            .map(|e| match e.value.as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                other => Err(e.err(format!("`{key}` expects true or false, got `{other}`"))),
            })
            .transpose()
    }

    pub fn list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>, ParseError> {
        self.get(section, key)
            .map(|e| {
                e.value
                    .split(',')
                    .map(|item| {
                        let item = item.trim();
                        item.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| e.err(format!("`{key}` expects a list of numbers, got `{item}`")))
                    })
                    .collect()
            })
            .transpose()
    }

    /// Error located at the value of `section.key`, or a global error when
    /// the key is absent.
    pub fn error_at(&self, section: &str, key: &str, message: impl Into<String>) -> ParseError {
        match self.get(section, key) {
            Some(e) => e.err(message),
            None => ParseError::global(message),
        }
    }

    /// Overrides a value, as done for each sweep entry.
    pub fn set(&mut self, section: &str, key: &str, value: String) {
        let entries = self.sections.entry(section.to_owned()).or_default();
        let (line, column) = entries.get(key).map(|e| (e.line, e.column)).unwrap_or((0, 0));
        entries.insert(key.to_owned(), Entry { value, line, column });
    }

    /// Canonical `section.key=value` listing, independent of layout and comments.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (s, entries) in &self.sections {
            for (k, e) in entries {
                out.push_str(&format!("{s}.{k}={}\n", e.value));
            }
        }
        out
    }

    /// SHA-256 of the canonical listing, in hex.
    pub fn config_hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file() {
        let rf = RunFile::parse_str("[relation]\nkind = minimal\n[domain]\nkind = disk\nR = 1\n").unwrap();
        assert_eq!(rf.str("relation", "kind"), Some("minimal"));
        assert_eq!(rf.f64("domain", "R").unwrap(), Some(1.0));
    }

    #[test]
    fn aliases_quotes_and_dotted_keys() {
        let rf = RunFile::parse_str("relation.relation = \"linear\"  # comment\nrelation.a = -0.5\n").unwrap();
        assert_eq!(rf.str("relation", "kind"), Some("linear"));
        assert_eq!(rf.f64("relation", "a").unwrap(), Some(-0.5));
    }

    #[test]
    fn unknown_key_suggests_the_nearest() {
        let e = RunFile::parse_str("[relation]\nkind = linear\nfprim0 = -0.5\n").unwrap_err();
        assert_eq!((e.line, e.column), (3, 1));
        assert_eq!(e.suggestion.as_deref(), Some("fprime0"));
        assert!(e.to_string().contains("did you mean `fprime0`"));
    }

    #[test]
    fn unknown_section_suggests_the_nearest() {
        let e = RunFile::parse_str("[domian]\n").unwrap_err();
        assert_eq!(e.suggestion.as_deref(), Some("domain"));
        assert_eq!(e.line, 1);
    }

    #[test]
    fn value_errors_point_at_the_value() {
        let rf = RunFile::parse_str("[domain]\nR =   abc\n").unwrap();
        let e = rf.f64("domain", "R").unwrap_err();
        assert_eq!((e.line, e.column), (2, 7));
    }

    #[test]
    fn duplicates_and_stray_lines() {
        assert!(RunFile::parse_str("[domain]\nR = 1\nR = 2\n").is_err());
        assert!(RunFile::parse_str("[domain]\njust words\n").is_err());
        assert!(RunFile::parse_str("R = 1\n").is_err());
        assert!(RunFile::parse_str("[domain\n").is_err());
    }

    #[test]
    fn hash_ignores_layout() {
        let a = RunFile::parse_str("[domain]\nR = 1\nkind = disk\n").unwrap();
        let b = RunFile::parse_str("# c\n[domain]\nkind=disk   \n\nR=1\n").unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn lists() {
        let rf = RunFile::parse_str("[sweep]\nvalues = 8, 16,32\n").unwrap();
        assert_eq!(rf.list("sweep", "values").unwrap(), Some(vec![8.0, 16.0, 32.0]));
    }
}
