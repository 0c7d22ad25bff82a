use super::FleshError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Int,
    Real,
    Bool,
    Keyword,
    String,
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamKind::Int => "int",
            ParamKind::Real => "real",
            ParamKind::Bool => "bool",
            ParamKind::Keyword => "keyword",
            ParamKind::String => "string",
        })
    }
}

/// A parameter value. Keywords and strings share the `Str` variant; the
/// spec's kind says which it is.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Real(f64),
    Str(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{}", if *b { "yes" } else { "no" }),
            ParamValue::Int(i) => write!(f, "{i}"),
            // `{:?}` keeps a decimal point and round-trips exactly
            ParamValue::Real(x) => write!(f, "{x:?}"),
            ParamValue::Str(s) => write!(f, "{s}"),
        }
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Real(v)
    }
}

impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Bool(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Str(v.to_string())
    }
}

/// Declaration of one parameter: type, default, admissible values and
/// whether it may be changed while a simulation runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub kind: ParamKind,
    pub default: ParamValue,
    /// Inclusive numeric bounds (int and real).
    pub min: Option<f64>,
    pub max: Option<f64>,
    /// Admissible values, compared by their text form.
    pub allowed: Option<Vec<String>>,
    pub steerable: bool,
    pub description: String,
}

impl ParameterSpec {
    fn with(name: &str, kind: ParamKind, default: ParamValue) -> Self {
        Self {
            name: name.to_string(),
            kind,
            default,
            min: None,
            max: None,
            allowed: None,
            steerable: false,
            description: String::new(),
        }
    }

    pub fn int(name: &str, default: i64) -> Self {
        Self::with(name, ParamKind::Int, ParamValue::Int(default))
    }

    pub fn real(name: &str, default: f64) -> Self {
        Self::with(name, ParamKind::Real, ParamValue::Real(default))
    }

    pub fn boolean(name: &str, default: bool) -> Self {
        Self::with(name, ParamKind::Bool, ParamValue::Bool(default))
    }

    pub fn keyword(name: &str, default: &str, allowed: &[&str]) -> Self {
        let mut s = Self::with(name, ParamKind::Keyword, ParamValue::Str(default.to_string()));
        s.allowed = Some(allowed.iter().map(|a| a.to_string()).collect());
        s
    }

    pub fn string(name: &str, default: &str) -> Self {
        Self::with(name, ParamKind::String, ParamValue::Str(default.to_string()))
    }

    pub fn range(mut self, min: f64, max: f64) -> Self {
        self.min = Some(min);
        self.max = Some(max);
        self
    }

    pub fn at_least(mut self, min: f64) -> Self {
        self.min = Some(min);
        self
    }

    pub fn allowed(mut self, values: &[&str]) -> Self {
        self.allowed = Some(values.iter().map(|a| a.to_string()).collect());
        self
    }

    pub fn steerable(mut self) -> Self {
        self.steerable = true;
        self
    }

    pub fn describe(mut self, text: &str) -> Self {
        self.description = text.to_string();
        self
    }

    /// Parse the text of a value (as it appears in a parameter file).
    pub fn parse(&self, text: &str) -> Result<ParamValue, FleshError> {
        let text = text.trim();
        let bad = |reason: String| FleshError::BadValue {
            name: self.name.clone(),
            reason,
        };
        let v = match self.kind {
            ParamKind::Int => ParamValue::Int(
                text.parse::<i64>()
                    .map_err(|_| bad(format!("expected an integer, got {text:?}")))?,
            ),
            ParamKind::Real => ParamValue::Real(
                text.parse::<f64>()
                    .map_err(|_| bad(format!("expected a real number, got {text:?}")))?,
            ),
            ParamKind::Bool => ParamValue::Bool(match text.to_ascii_lowercase().as_str() {
                "yes" | "true" | "1" | "on" => true,
                "no" | "false" | "0" | "off" => false,
                _ => return Err(bad(format!("expected yes/no, got {text:?}"))),
            }),
            ParamKind::Keyword | ParamKind::String => ParamValue::Str(unquote(text).to_string()),
        };
        self.check(&v)?;
        Ok(v)
    }

    /// Coerce a value of a compatible type (e.g. a JSON number) and check it.
    pub fn coerce(&self, v: ParamValue) -> Result<ParamValue, FleshError> {
        let v = match (self.kind, v) {
            (ParamKind::Real, ParamValue::Int(i)) => ParamValue::Real(i as f64),
            (ParamKind::Int, ParamValue::Real(x)) if x.fract() == 0.0 && x.abs() < 9.0e15 => ParamValue::Int(x as i64),
            (_, ParamValue::Str(s)) if !matches!(self.kind, ParamKind::Keyword | ParamKind::String) => return self.parse(&s),
            (_, v) => v,
        };
        self.check(&v)?;
        Ok(v)
    }

    pub fn check(&self, v: &ParamValue) -> Result<(), FleshError> {
        let bad = |reason: String| FleshError::BadValue {
            name: self.name.clone(),
            reason,
        };
        let type_ok = matches!(
            (self.kind, v),
            (ParamKind::Int, ParamValue::Int(_))
                | (ParamKind::Real, ParamValue::Real(_))
                | (ParamKind::Bool, ParamValue::Bool(_))
                | (ParamKind::Keyword, ParamValue::Str(_))
                | (ParamKind::String, ParamValue::Str(_))
        );
        if !type_ok {
            return Err(bad(format!("type mismatch: {} parameter given {v:?}", self.kind)));
        }
        let x = match v {
            ParamValue::Int(i) => Some(*i as f64),
            ParamValue::Real(x) => Some(*x),
            _ => None,
        };
        if let Some(x) = x {
            if !x.is_finite() {
                return Err(bad(format!("{v} is not finite")));
            }
            if self.min.is_some_and(|m| x < m) || self.max.is_some_and(|m| x > m) {
                return Err(bad(format!("{v} out of range [{}, {}]", fmt_bound(self.min), fmt_bound(self.max))));
            }
        }
        if let Some(allowed) = &self.allowed {
            let text = v.to_string();
            if !allowed.contains(&text) {
                return Err(bad(format!("{text} is not one of {{{}}}", allowed.join(", "))));
            }
        }
        Ok(())
    }
}

fn fmt_bound(b: Option<f64>) -> String {
    b.map_or_else(|| "-".to_string(), |x| x.to_string())
}

fn unquote(s: &str) -> &str {
    s.strip_prefix('"').and_then(|t| t.strip_suffix('"')).unwrap_or(s)
}

/// Split a parameter file into `(line number, key, value text)` triples
/// without validating keys or values.
pub fn parse_assignments(text: &str) -> Result<Vec<(usize, String, String)>, FleshError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| FleshError::Parse {
            line: i + 1,
            reason: format!("expected `thorn::name = value`, got {raw:?}"),
        })?;
        let key = key.trim();
        if !key.contains("::") || key.split("::").any(|p| p.is_empty() || p.contains(char::is_whitespace)) {
            return Err(FleshError::Parse {
                line: i + 1,
                reason: format!("parameter name {key:?} must look like thorn::name"),
            });
        }
        out.push((i + 1, key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// `#` starts a comment unless it is inside double quotes.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

/// Parse and validate a parameter file against `specs`. Later assignments
/// to the same key override earlier ones.
pub fn parse_parameter_file(text: &str, specs: &BTreeMap<String, ParameterSpec>) -> Result<BTreeMap<String, ParamValue>, FleshError> {
    let mut out = BTreeMap::new();
    for (line, key, value) in parse_assignments(text)? {
        let spec = specs.get(&key).ok_or_else(|| FleshError::Parse {
            line,
            reason: format!("unknown parameter {key}"),
        })?;
        let v = spec.parse(&value).map_err(|e| FleshError::Parse {
            line,
            reason: e.to_string(),
        })?;
        out.insert(key, v);
    }
    Ok(out)
}

/// Current values of every declared parameter.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamTable {
    specs: BTreeMap<String, ParameterSpec>,
    values: BTreeMap<String, ParamValue>,
}

impl ParamTable {
    pub fn new(specs: BTreeMap<String, ParameterSpec>) -> Self {
        let values = specs.iter().map(|(k, s)| (k.clone(), s.default.clone())).collect();
        Self { specs, values }
    }

    pub fn specs(&self) -> &BTreeMap<String, ParameterSpec> {
        &self.specs
    }

    pub fn spec(&self, name: &str) -> Result<&ParameterSpec, FleshError> {
        self.specs.get(name).ok_or_else(|| FleshError::UnknownParameter(name.to_string()))
    }

    pub fn values(&self) -> &BTreeMap<String, ParamValue> {
        &self.values
    }

    pub fn get(&self, name: &str) -> Result<&ParamValue, FleshError> {
        self.values.get(name).ok_or_else(|| FleshError::UnknownParameter(name.to_string()))
    }

    /// Validate and store; returns the previous value.
    pub fn set(&mut self, name: &str, v: ParamValue) -> Result<ParamValue, FleshError> {
        let v = self.spec(name)?.coerce(v)?;
        Ok(self.values.insert(name.to_string(), v).expect("declared parameters always have a value"))
    }

    pub fn int(&self, name: &str) -> Result<i64, FleshError> {
        match self.get(name)? {
            ParamValue::Int(i) => Ok(*i),
            v => Err(self.wrong(name, "int", v)),
        }
    }

    pub fn real(&self, name: &str) -> Result<f64, FleshError> {
        match self.get(name)? {
            ParamValue::Real(x) => Ok(*x),
            ParamValue::Int(i) => Ok(*i as f64),
            v => Err(self.wrong(name, "real", v)),
        }
    }

    pub fn boolean(&self, name: &str) -> Result<bool, FleshError> {
        match self.get(name)? {
            ParamValue::Bool(b) => Ok(*b),
            v => Err(self.wrong(name, "bool", v)),
        }
    }

    pub fn str(&self, name: &str) -> Result<&str, FleshError> {
        match self.get(name)? {
            ParamValue::Str(s) => Ok(s),
            v => Err(self.wrong(name, "string", v)),
        }
    }

    fn wrong(&self, name: &str, want: &str, v: &ParamValue) -> FleshError {
        FleshError::BadValue {
            name: name.to_string(),
            reason: format!("read as {want} but holds {v:?}"),
        }
    }
}
