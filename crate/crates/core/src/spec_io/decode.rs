//! Typed decoding of [`Node`] trees with path tracking.

use std::collections::BTreeMap;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};

use super::yaml::{Key, Node, NodeKind};
use super::ParseError;
use crate::model::*;

/// Records the span of every visited path and builds errors at the right place.
#[derive(Debug, Default)]
pub struct Decoder {
    pub spans: BTreeMap<String, SourceSpan>,
}

pub fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

pub fn index(path: &str, i: usize) -> String {
    format!("{path}[{i}]")
}

fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, cb) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(ca != *cb)).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

impl Decoder {
    pub fn error(&self, code: ViolationCode, at: SourceSpan, path: &str, message: impl Into<String>) -> ParseError {
        ParseError {
            code,
            line: at.line,
            column: at.column,
            path: path.to_string(),
            message: message.into(),
        }
    }

    fn mismatch(&self, node: &Node, path: &str, expected: &str) -> ParseError {
        self.error(
            ViolationCode::TypeMismatch,
            node.span,
            path,
            format!("expected {expected}, found {}", node.kind_name()),
        )
    }

    /// Opens a mapping, rejecting any key not in `allowed`.
    pub fn map<'n>(&mut self, node: &'n Node, path: &str, allowed: &[&str]) -> Result<MapReader<'n>, ParseError> {
        let NodeKind::Map(entries) = &node.kind else {
            return Err(self.mismatch(node, path, "a mapping"));
        };
        for (k, _) in entries {
            if !allowed.contains(&k.text.as_str()) {
                let hint = allowed
                    .iter()
                    .map(|a| (edit_distance(&k.text, a), *a))
                    .filter(|(d, _)| *d <= 2)
                    .min()
                    .map(|(_, a)| format!(" (did you mean `{a}`?)"))
                    .unwrap_or_default();
                return Err(self.error(
                    ViolationCode::UnknownKey,
                    k.span,
                    &join(path, &k.text),
                    format!("unknown key `{}`{hint}", k.text),
                ));
            }
            self.spans.insert(join(path, &k.text), k.span);
        }
        Ok(MapReader {
            node,
            entries,
            path: path.to_string(),
        })
    }

    /// A mapping whose keys are free-form (e.g. per-category values).
    pub fn open_map<'n>(&mut self, node: &'n Node, path: &str) -> Result<&'n [(Key, Node)], ParseError> {
        let NodeKind::Map(entries) = &node.kind else {
            return Err(self.mismatch(node, path, "a mapping"));
        };
        for (k, _) in entries {
            self.spans.insert(join(path, &k.text), k.span);
        }
        Ok(entries)
    }

    pub fn seq<'n>(&mut self, node: &'n Node, path: &str) -> Result<&'n [Node], ParseError> {
        let NodeKind::Seq(items) = &node.kind else {
            return Err(self.mismatch(node, path, "a sequence"));
        };
        for (i, item) in items.iter().enumerate() {
            self.spans.entry(index(path, i)).or_insert(item.span);
        }
        Ok(items)
    }

    pub fn list<T>(
        &mut self,
        node: &Node,
        path: &str,
        mut each: impl FnMut(&mut Self, &Node, &str) -> Result<T, ParseError>,
    ) -> Result<Vec<T>, ParseError> {
        let items = self.seq(node, path)?;
        items
            .iter()
            .enumerate()
            .map(|(i, item)| each(self, item, &index(path, i)))
            .collect()
    }

    pub fn string(&self, node: &Node, path: &str) -> Result<String, ParseError> {
        match &node.kind {
            NodeKind::Scalar { text, .. } => Ok(text.clone()),
            _ => Err(self.mismatch(node, path, "a string")),
        }
    }

    pub fn nonempty_string(&self, node: &Node, path: &str) -> Result<String, ParseError> {
        let s = self.string(node, path)?;
        if s.trim().is_empty() {
            return Err(self.error(ViolationCode::InvalidValue, node.span, path, "must not be empty"));
        }
        Ok(s)
    }

    pub fn parsed<T: FromStr>(&self, node: &Node, path: &str, what: &str) -> Result<T, ParseError>
    where
        T::Err: std::fmt::Display,
    {
        let s = self.string(node, path)?;
        s.trim().parse::<T>().map_err(|e| {
            self.error(
                ViolationCode::InvalidValue,
                node.span,
                path,
                format!("{s:?} is not a valid {what}: {e}"),
            )
        })
    }

    pub fn number(&self, node: &Node, path: &str) -> Result<f64, ParseError> {
        if node.is_quoted() {
            return Err(self.error(ViolationCode::TypeMismatch, node.span, path, "expected a number, found a quoted string"));
        }
        let n: f64 = self.parsed(node, path, "number")?;
        if !n.is_finite() {
            return Err(self.error(ViolationCode::InvalidValue, node.span, path, "number must be finite"));
        }
        Ok(n)
    }

    pub fn u32(&self, node: &Node, path: &str) -> Result<u32, ParseError> {
        if node.is_quoted() {
            return Err(self.error(ViolationCode::TypeMismatch, node.span, path, "expected an integer, found a quoted string"));
        }
        self.parsed(node, path, "non-negative integer")
    }

    pub fn bool(&self, node: &Node, path: &str) -> Result<bool, ParseError> {
        match node.as_scalar() {
            Some("true") if !node.is_quoted() => Ok(true),
            Some("false") if !node.is_quoted() => Ok(false),
            Some(s) => Err(self.error(
                ViolationCode::TypeMismatch,
                node.span,
                path,
                format!("expected true or false, found {s:?}"),
            )),
            None => Err(self.mismatch(node, path, "a boolean")),
        }
    }

    pub fn date(&self, node: &Node, path: &str) -> Result<NaiveDate, ParseError> {
        self.parsed(node, path, "ISO-8601 date")
    }

    pub fn time(&self, node: &Node, path: &str) -> Result<NaiveTime, ParseError> {
        let s = self.string(node, path)?;
        parse_time(&s).ok_or_else(|| {
            self.error(
                ViolationCode::InvalidValue,
                node.span,
                path,
                format!("{s:?} is not a time of day (HH:MM)"),
            )
        })
    }

    pub fn datetime(&self, node: &Node, path: &str) -> Result<NaiveDateTime, ParseError> {
        let s = self.string(node, path)?;
        parse_datetime(&s).ok_or_else(|| {
            self.error(
                ViolationCode::InvalidValue,
                node.span,
                path,
                format!("{s:?} is not an ISO-8601 timestamp"),
            )
        })
    }

    pub fn duration(&self, node: &Node, path: &str) -> Result<Duration, ParseError> {
        self.parsed(node, path, "duration")
    }

    pub fn keyword<T>(
        &self,
        node: &Node,
        path: &str,
        options: &[&str],
        parse: impl Fn(&str) -> Option<T>,
    ) -> Result<T, ParseError> {
        let s = self.string(node, path)?;
        parse(s.trim()).ok_or_else(|| {
            self.error(
                ViolationCode::InvalidValue,
                node.span,
                path,
                format!("{s:?} is not one of: {}", options.join(", ")),
            )
        })
    }

    pub fn strings(&mut self, node: &Node, path: &str) -> Result<Vec<String>, ParseError> {
        self.list(node, path, |d, n, p| d.string(n, p))
    }
}

pub fn parse_time(s: &str) -> Option<NaiveTime> {
    let s = s.trim();
    NaiveTime::parse_from_str(s, "%H:%M")
        .or_else(|_| NaiveTime::parse_from_str(s, "%H:%M:%S"))
        .ok()
}

pub fn parse_datetime(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt);
        }
    }
    s.parse::<NaiveDate>().ok().and_then(|d| d.and_hms_opt(0, 0, 0))
}

pub struct MapReader<'n> {
    pub node: &'n Node,
    entries: &'n [(Key, Node)],
    path: String,
}

impl<'n> MapReader<'n> {
    pub fn path_of(&self, key: &str) -> String {
        join(&self.path, key)
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    /// The value under `key`, treating explicit nulls as absent.
    pub fn get(&self, key: &str) -> Option<&'n Node> {
        self.entries
            .iter()
            .find(|(k, _)| k.text == key)
            .map(|(_, v)| v)
            .filter(|v| !v.is_null())
    }

    pub fn has(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    pub fn require(&self, d: &Decoder, key: &str) -> Result<&'n Node, ParseError> {
        self.get(key).ok_or_else(|| {
            d.error(
                ViolationCode::MissingField,
                self.node.span,
                &self.path_of(key),
                format!("missing required field `{key}`"),
            )
        })
    }
}
