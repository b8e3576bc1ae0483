//! Flat `dotted.key = value` config files.
//!
//! Values are numbers (`0.5`, `1e-3`, `1/40`), bare or quoted strings,
//! booleans, and bracketed lists that may nest (`[[1.5], [2.0]]`).
//! `#` starts a comment. Later assignments to the same key win, which is
//! how `--override` is applied.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("field `{key}` (line {line}): {msg}")]
    Field { key: String, line: usize, msg: String },

    #[error("missing required field `{0}`")]
    Missing(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Str(String),
    List(Vec<Value>),
}

impl Value {
    fn describe(&self) -> &'static str {
        match self {
            Value::Num(_) => "number",
            Value::Str(_) => "string",
            Value::List(_) => "list",
        }
    }
}

/// Line 0 marks values that came from the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: Value,
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

fn parse_number(tok: &str) -> Option<f64> {
    if let Some((a, b)) = tok.split_once('/') {
        let (a, b): (f64, f64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
        return (b != 0.0).then_some(a / b);
    }
    tok.parse().ok()
}

struct Cursor<'a> {
    s: &'a [u8],
    i: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn value(&mut self) -> Result<Value, String> {
        self.skip_ws();
        match self.s.get(self.i) {
            None => Err("expected a value".into()),
            Some(b'[') => {
                self.i += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    if self.s.get(self.i) == Some(&b']') {
                        self.i += 1;
                        return Ok(Value::List(items));
                    }
                    if !items.is_empty() {
                        if self.s.get(self.i) != Some(&b',') {
                            return Err(format!("expected ',' or ']' at column {}", self.i + 1));
                        }
                        self.i += 1;
                    }
                    items.push(self.value()?);
                }
            }
            Some(b'"') => {
                let start = self.i + 1;
                let end = self.s[start..]
                    .iter()
                    .position(|&c| c == b'"')
                    .ok_or("unterminated string")?;
                self.i = start + end + 1;
                Ok(Value::Str(String::from_utf8_lossy(&self.s[start..start + end]).into_owned()))
            }
            Some(_) => {
                let start = self.i;
                while self.i < self.s.len() && !matches!(self.s[self.i], b',' | b']' | b'[') {
                    self.i += 1;
                }
                let tok = std::str::from_utf8(&self.s[start..self.i]).unwrap().trim();
                if tok.is_empty() {
                    return Err(format!("empty value at column {}", start + 1));
                }
                Ok(parse_number(tok).map_or_else(|| Value::Str(tok.to_string()), Value::Num))
            }
        }
    }
}

fn parse_value(text: &str) -> Result<Value, String> {
    let mut c = Cursor { s: text.as_bytes(), i: 0 };
    let v = c.value()?;
    c.skip_ws();
    if c.i != c.s.len() {
        return Err(format!("trailing characters after value: `{}`", &text[c.i..]));
    }
    Ok(v)
}

fn valid_key(k: &str) -> bool {
    !k.is_empty()
        && k.split('.').all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
}

fn strip_comment(line: &str) -> &str {
    let mut in_str = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_str = !in_str,
            '#' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RawConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            cfg.assign(line, n + 1)?;
        }
        Ok(cfg)
    }

    /// Parses one `key = value` assignment; `line` is reported in errors.
    pub fn assign(&mut self, text: &str, line: usize) -> Result<(), ConfigError> {
        let err = |msg: String| ConfigError::Parse { line, msg };
        let (k, v) = text.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got `{text}`")))?;
        let key = k.trim();
        if !valid_key(key) {
            return Err(err(format!("invalid key `{key}`")));
        }
        let value = parse_value(v.trim()).map_err(err)?;
        self.entries.insert(key.to_string(), Entry { value, line });
        Ok(())
    }

    pub fn keys(&self) -> impl Iterator<Item = (&String, &Entry)> {
        self.entries.iter()
    }

    /// Canonical text form, used for hashing.
    pub fn canonical(&self) -> String {
        fn show(v: &Value) -> String {
            match v {
                Value::Num(x) => format!("{x:?}"),
                Value::Str(s) => format!("{s:?}"),
                Value::List(l) => format!("[{}]", l.iter().map(show).collect::<Vec<_>>().join(",")),
            }
        }
        self.entries.iter().map(|(k, e)| format!("{k}={}\n", show(&e.value))).collect()
    }
}

/// Typed access that records which keys were consumed, so leftovers can be
/// reported as unknown.
pub struct Reader<'a> {
    raw: &'a RawConfig,
    used: std::cell::RefCell<Vec<String>>,
}

impl<'a> Reader<'a> {
    pub fn new(raw: &'a RawConfig) -> Self {
        Self { raw, used: Default::default() }
    }

    fn get(&self, key: &str) -> Option<&'a Entry> {
        self.used.borrow_mut().push(key.to_string());
        self.raw.entries.get(key)
    }

    fn field_err(key: &str, e: &Entry, msg: String) -> ConfigError {
        ConfigError::Field { key: key.to_string(), line: e.line, msg }
    }

    pub fn str(&self, key: &str) -> Result<Option<String>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Entry { value: Value::Str(s), .. }) => Ok(Some(s.clone())),
            Some(Entry { value: Value::Num(x), .. }) => Ok(Some(format!("{x}"))),
            Some(e) => Err(Self::field_err(key, e, format!("expected a string, got a {}", e.value.describe()))),
        }
    }

    pub fn num(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Entry { value: Value::Num(x), .. }) => Ok(Some(*x)),
            Some(e) => Err(Self::field_err(key, e, format!("expected a number, got a {}", e.value.describe()))),
        }
    }

    pub fn positive(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let v = self.num(key)?;
        match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => {
                Err(Self::field_err(key, self.raw.entries.get(key).unwrap(), format!("must be positive, got {x}")))
            }
            _ => Ok(v),
        }
    }

    pub fn count(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.num(key)? {
            None => Ok(None),
            Some(x) if x >= 0.0 && x.fract() == 0.0 && x < 1e9 => Ok(Some(x as usize)),
            Some(x) => Err(Self::field_err(
                key,
                self.raw.entries.get(key).unwrap(),
                format!("expected a non-negative integer, got {x}"),
            )),
        }
    }

    pub fn flag(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.str(key)?.as_deref() {
            None => Ok(None),
            Some("true") => Ok(Some(true)),
            Some("false") => Ok(Some(false)),
            Some(s) => Err(Self::field_err(
                key,
                self.raw.entries.get(key).unwrap(),
                format!("expected true or false, got `{s}`"),
            )),
        }
    }

    /// A list of numbers; a bare number is read as a one-element list.
    pub fn nums(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(e) = self.get(key) else { return Ok(None) };
        let bad = |what: &str| Self::field_err(key, e, format!("expected a list of numbers, found a {what}"));
        match &e.value {
            Value::Num(x) => Ok(Some(vec![*x])),
            Value::List(l) => l
                .iter()
                .map(|v| match v {
                    Value::Num(x) => Ok(*x),
                    other => Err(bad(other.describe())),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            other => Err(bad(other.describe())),
        }
    }

    /// A list of points. Accepts `[[a, b], [c, d]]`, or a flat list of
    /// scalars when each point has one coordinate.
    pub fn points(&self, key: &str, dim: usize) -> Result<Option<Vec<Vec<f64>>>, ConfigError> {
        let Some(e) = self.get(key) else { return Ok(None) };
        let bad = |msg: String| Self::field_err(key, e, msg);
        let items = match &e.value {
            Value::List(l) => l.clone(),
            v => vec![v.clone()],
        };
        let mut out = Vec::new();
        for it in items {
            let p = match it {
                Value::Num(x) => vec![x],
                Value::List(l) => l
                    .iter()
                    .map(|v| match v {
                        Value::Num(x) => Ok(*x),
                        o => Err(bad(format!("point coordinates must be numbers, found a {}", o.describe()))),
                    })
                    .collect::<Result<_, _>>()?,
                Value::Str(s) => return Err(bad(format!("expected a point, found `{s}`"))),
            };
            if p.len() != dim {
                return Err(bad(format!("point {p:?} has {} coordinate(s), expected {dim}", p.len())));
            }
            out.push(p);
        }
        Ok(Some(out))
    }

    pub fn require<T>(&self, key: &str, v: Option<T>) -> Result<T, ConfigError> {
        v.ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    /// Error for a value that parsed but is not acceptable.
    pub fn invalid(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        let line = self.raw.entries.get(key).map_or(0, |e| e.line);
        ConfigError::Field { key: key.to_string(), line, msg: msg.into() }
    }

    /// Fails on the first key that no reader asked for.
    pub fn reject_unknown(&self) -> Result<(), ConfigError> {
        let used = self.used.borrow();
        match self.raw.entries.iter().find(|(k, _)| !used.contains(k)) {
            Some((k, e)) => Err(Self::field_err(k, e, "unknown key".into())),
            None => Ok(()),
        }
    }
}
