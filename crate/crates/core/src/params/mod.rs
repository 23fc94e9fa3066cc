//! Hierarchical parameter tree.
//!
//! A [`ParamTree`] is built once with its full structure (usually by a
//! solver's default-parameter constructor) and then frozen. After freezing,
//! leaf values can still be modified with [`ParamTree::set`], but no new
//! child or leaf can be added. Paths are dot separated, e.g. `forcing.enable`.

mod text;

use std::fmt;

use indexmap::IndexMap;

use crate::error::{Error, Result};

pub use text::{deserialize, serialize};

/// A leaf value.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    FloatList(Vec<f64>),
}

impl ParamValue {
    pub fn type_name(&self) -> &'static str {
        match self {
            ParamValue::Bool(_) => "bool",
            ParamValue::Int(_) => "integer",
            ParamValue::Float(_) => "float",
            ParamValue::Str(_) => "string",
            ParamValue::FloatList(_) => "float list",
        }
    }

    /// Bitwise equality: `0.0` and `-0.0` differ. All NaNs are equal,
    /// since text holds no sign or payload for them.
    pub fn bit_eq(&self, other: &ParamValue) -> bool {
        let same = |x: &f64, y: &f64| x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan());
        match (self, other) {
            (ParamValue::Float(a), ParamValue::Float(b)) => same(a, b),
            (ParamValue::FloatList(a), ParamValue::FloatList(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| same(x, y))
            }
            (a, b) => a == b,
        }
    }
}

impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Bool(v)
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Str(v.to_string())
    }
}

impl From<String> for ParamValue {
    fn from(v: String) -> Self {
        ParamValue::Str(v)
    }
}

impl From<Vec<f64>> for ParamValue {
    fn from(v: Vec<f64>) -> Self {
        ParamValue::FloatList(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamTree {
    name: String,
    leaves: IndexMap<String, ParamValue>,
    children: IndexMap<String, ParamTree>,
    frozen: bool,
}

pub fn valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl ParamTree {
    pub fn new(name: impl Into<String>) -> Self {
        ParamTree {
            name: name.into(),
            leaves: IndexMap::new(),
            children: IndexMap::new(),
            frozen: false,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Freezes the structure of this tree and all its descendants.
    pub fn freeze(&mut self) {
        self.frozen = true;
        for child in self.children.values_mut() {
            child.freeze();
        }
    }

    /// Adds a leaf, or replaces the default of an existing one while the
    /// tree is still being built.
    pub fn add_leaf(&mut self, name: &str, value: impl Into<ParamValue>) -> Result<&mut Self> {
        if self.frozen {
            return Err(Error::Frozen(name.to_string()));
        }
        if !valid_identifier(name) {
            return Err(Error::Config(format!("invalid parameter name `{name}`")));
        }
        if self.children.contains_key(name) {
            return Err(Error::Config(format!("`{name}` already names a subtree")));
        }
        self.leaves.insert(name.to_string(), value.into());
        Ok(self)
    }

    /// Returns the child named `name`, creating it if needed.
    pub fn add_child(&mut self, name: &str) -> Result<&mut ParamTree> {
        if !self.children.contains_key(name) {
            if self.frozen {
                return Err(Error::Frozen(name.to_string()));
            }
            if !valid_identifier(name) {
                return Err(Error::Config(format!("invalid parameter name `{name}`")));
            }
            if self.leaves.contains_key(name) {
                return Err(Error::Config(format!("`{name}` already names a leaf")));
            }
            self.children
                .insert(name.to_string(), ParamTree::new(name));
        }
        Ok(self.children.get_mut(name).expect("inserted above"))
    }

    pub fn leaves(&self) -> impl Iterator<Item = (&str, &ParamValue)> {
        self.leaves.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn children(&self) -> impl Iterator<Item = &ParamTree> {
        self.children.values()
    }

    pub fn child(&self, name: &str) -> Option<&ParamTree> {
        self.children.get(name)
    }

    pub fn subtree(&self, path: &str) -> Result<&ParamTree> {
        let mut node = self;
        for (i, seg) in path.split('.').enumerate() {
            node = node.children.get(seg).ok_or_else(|| Error::UnknownParameter {
                path: path.split('.').take(i + 1).collect::<Vec<_>>().join("."),
                suggestions: nearest(node.children.keys().map(String::as_str), seg),
            })?;
        }
        Ok(node)
    }

    /// All leaf paths in serialization order.
    pub fn leaf_paths(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_paths("", &mut out);
        out
    }

    fn collect_paths(&self, prefix: &str, out: &mut Vec<String>) {
        for name in self.leaves.keys() {
            out.push(format!("{prefix}{name}"));
        }
        for (name, child) in &self.children {
            child.collect_paths(&format!("{prefix}{name}."), out);
        }
    }

    fn locate<'a, 'p>(&'a self, path: &'p str) -> Result<(&'a ParamTree, &'p str)> {
        let (parent, leaf) = match path.rsplit_once('.') {
            Some((p, l)) => (self.subtree(p)?, l),
            None => (self, path),
        };
        Ok((parent, leaf))
    }

    fn unknown_leaf(&self, path: &str, parent: &ParamTree, leaf: &str) -> Error {
        let siblings = parent
            .leaves
            .keys()
            .chain(parent.children.keys())
            .map(String::as_str);
        Error::UnknownParameter {
            path: path.to_string(),
            suggestions: nearest(siblings, leaf),
        }
    }

    pub fn get(&self, path: &str) -> Result<&ParamValue> {
        let (parent, leaf) = self.locate(path)?;
        parent
            .leaves
            .get(leaf)
            .ok_or_else(|| self.unknown_leaf(path, parent, leaf))
    }

    /// Sets an existing leaf. The value must have the leaf's type.
    pub fn set(&mut self, path: &str, value: impl Into<ParamValue>) -> Result<()> {
        let value = value.into();
        let current = self.get(path)?;
        if std::mem::discriminant(current) != std::mem::discriminant(&value) {
            return Err(Error::TypeMismatch {
                path: path.to_string(),
                expected: current.type_name(),
                found: value.type_name(),
            });
        }
        *self.get_mut(path)? = value;
        Ok(())
    }

    /// Sets an existing leaf from its textual form, interpreted according to
    /// the leaf's current type. Integers are accepted for float leaves.
    pub fn set_from_str(&mut self, path: &str, text: &str) -> Result<()> {
        let current = self.get(path)?;
        let mismatch = |found| Error::TypeMismatch {
            path: path.to_string(),
            expected: current.type_name(),
            found,
        };
        let text = text.trim();
        let value = match current {
            ParamValue::Bool(_) => match text {
                "true" | "True" => ParamValue::Bool(true),
                "false" | "False" => ParamValue::Bool(false),
                _ => return Err(mismatch("text")),
            },
            ParamValue::Int(_) => ParamValue::Int(text.parse().map_err(|_| mismatch("text"))?),
            ParamValue::Float(_) => ParamValue::Float(text.parse().map_err(|_| mismatch("text"))?),
            ParamValue::Str(_) => {
                let unquoted = text
                    .strip_prefix('"')
                    .and_then(|t| t.strip_suffix('"'))
                    .unwrap_or(text);
                ParamValue::Str(unquoted.to_string())
            }
            ParamValue::FloatList(_) => {
                let inner = text
                    .strip_prefix('[')
                    .and_then(|t| t.strip_suffix(']'))
                    .unwrap_or(text);
                let items = inner
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| mismatch("text"))?;
                ParamValue::FloatList(items)
            }
        };
        *self.get_mut(path)? = value;
        Ok(())
    }

    fn get_mut(&mut self, path: &str) -> Result<&mut ParamValue> {
        // existence already checked by callers through `get`
        let mut node = self;
        let mut segs: Vec<&str> = path.split('.').collect();
        let leaf = segs.pop().unwrap_or_default();
        for seg in segs {
            node = node
                .children
                .get_mut(seg)
                .ok_or_else(|| Error::UnknownParameter {
                    path: path.to_string(),
                    suggestions: Vec::new(),
                })?;
        }
        node.leaves.get_mut(leaf).ok_or_else(|| Error::UnknownParameter {
            path: path.to_string(),
            suggestions: Vec::new(),
        })
    }

    pub fn get_bool(&self, path: &str) -> Result<bool> {
        match self.get(path)? {
            ParamValue::Bool(v) => Ok(*v),
            other => Err(type_err(path, "bool", other)),
        }
    }

    pub fn get_int(&self, path: &str) -> Result<i64> {
        match self.get(path)? {
            ParamValue::Int(v) => Ok(*v),
            other => Err(type_err(path, "integer", other)),
        }
    }

    /// Reads a float leaf. Integer leaves are widened.
    pub fn get_f64(&self, path: &str) -> Result<f64> {
        match self.get(path)? {
            ParamValue::Float(v) => Ok(*v),
            ParamValue::Int(v) => Ok(*v as f64),
            other => Err(type_err(path, "float", other)),
        }
    }

    pub fn get_str(&self, path: &str) -> Result<&str> {
        match self.get(path)? {
            ParamValue::Str(v) => Ok(v),
            other => Err(type_err(path, "string", other)),
        }
    }

    pub fn get_list(&self, path: &str) -> Result<&[f64]> {
        match self.get(path)? {
            ParamValue::FloatList(v) => Ok(v),
            other => Err(type_err(path, "float list", other)),
        }
    }

    /// Structural and bitwise value equality.
    pub fn bit_eq(&self, other: &ParamTree) -> bool {
        self.name == other.name
            && self.leaves.len() == other.leaves.len()
            && self
                .leaves
                .iter()
                .zip(&other.leaves)
                .all(|((ka, va), (kb, vb))| ka == kb && va.bit_eq(vb))
            && self.children.len() == other.children.len()
            && self
                .children
                .iter()
                .zip(&other.children)
                .all(|((ka, a), (kb, b))| ka == kb && a.bit_eq(b))
    }
}

impl fmt::Display for ParamTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize(self))
    }
}

fn type_err(path: &str, expected: &'static str, found: &ParamValue) -> Error {
    Error::TypeMismatch {
        path: path.to_string(),
        expected,
        found: found.type_name(),
    }
}

/// Names sharing the longest case-insensitive common prefix with `target`.
fn nearest<'a>(candidates: impl Iterator<Item = &'a str>, target: &str) -> Vec<String> {
    let target = target.to_lowercase();
    let scored: Vec<(usize, &str)> = candidates
        .map(|c| {
            let lcp = c
                .to_lowercase()
                .chars()
                .zip(target.chars())
                .take_while(|(a, b)| a == b)
                .count();
            (lcp, c)
        })
        .collect();
    let best = scored.iter().map(|(l, _)| *l).max().unwrap_or(0);
    if best == 0 {
        return Vec::new();
    }
    scored
        .into_iter()
        .filter(|(l, _)| *l == best)
        .map(|(_, c)| c.to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ParamTree {
        let mut t = ParamTree::new("params");
        t.add_leaf("nu_2", 0.0).unwrap();
        t.add_leaf("nu_4", 0.0).unwrap();
        let forcing = t.add_child("forcing").unwrap();
        forcing.add_leaf("enable", false).unwrap();
        forcing.add_leaf("band", vec![2.0, 4.0]).unwrap();
        t.freeze();
        t
    }

    #[test]
    fn set_existing_leaf() {
        let mut t = sample();
        t.set("nu_2", 1e-3).unwrap();
        assert_eq!(t.get_f64("nu_2").unwrap(), 1e-3);
    }

    #[test]
    fn unknown_leaf_suggests_siblings() {
        let mut t = sample();
        let err = t.set("nu_3", 1e-3).unwrap_err();
        match err {
            Error::UnknownParameter { path, suggestions } => {
                assert_eq!(path, "nu_3");
                assert_eq!(suggestions, vec!["nu_2", "nu_4"]);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn type_mismatch_is_rejected() {
        let mut t = sample();
        assert!(matches!(
            t.set("forcing.enable", 2.5),
            Err(Error::TypeMismatch { .. })
        ));
        assert!(!t.get_bool("forcing.enable").unwrap());
    }

    #[test]
    fn frozen_tree_rejects_new_names() {
        let mut t = sample();
        assert!(matches!(t.add_leaf("extra", 1i64), Err(Error::Frozen(_))));
        assert!(matches!(t.add_child("extra"), Err(Error::Frozen(_))));
        // existing children are still reachable
        assert!(t.add_child("forcing").is_ok());
    }

    #[test]
    fn set_from_str_uses_leaf_type() {
        let mut t = sample();
        t.set_from_str("nu_2", "1").unwrap();
        assert_eq!(t.get("nu_2").unwrap(), &ParamValue::Float(1.0));
        t.set_from_str("forcing.band", "[1, 3.5]").unwrap();
        assert_eq!(t.get_list("forcing.band").unwrap(), &[1.0, 3.5]);
        assert!(t.set_from_str("forcing.enable", "maybe").is_err());
    }

    #[test]
    fn unknown_subtree_is_reported() {
        let t = sample();
        let err = t.get("forcin.enable").unwrap_err();
        assert!(matches!(err, Error::UnknownParameter { ref suggestions, .. } if suggestions == &["forcing"]));
    }
}
