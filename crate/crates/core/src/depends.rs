//! Relation fields (`Depends`, `Build-Depends`, ...) and one-level
//! satisfiability against a package universe.

use std::collections::BTreeMap;
use std::fmt;

use log::warn;
use thiserror::Error;

use crate::version::{compare_versions, parse_version, Version, VersionError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DependsError {
    #[error("BadOperator: {0:?}")]
    BadOperator(String),
    #[error("UnbalancedParenthesis in {0:?}")]
    UnbalancedParenthesis(String),
    #[error("EmptyAlternative in {0:?}")]
    EmptyAlternative(String),
    #[error("BadName: {0:?}")]
    BadName(String),
    #[error("bad version in relation {atom:?}: {source}")]
    BadVersion {
        atom: String,
        #[source]
        source: VersionError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Earlier,
    EarlierEqual,
    Exactly,
    LaterEqual,
    Later,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Earlier => "<<",
            Relation::EarlierEqual => "<=",
            Relation::Exactly => "=",
            Relation::LaterEqual => ">=",
            Relation::Later => ">>",
        }
    }

    fn parse(op: &str) -> Option<Self> {
        Some(match op {
            "<<" => Relation::Earlier,
            "<=" => Relation::EarlierEqual,
            "=" => Relation::Exactly,
            ">=" => Relation::LaterEqual,
            ">>" => Relation::Later,
            _ => return None,
        })
    }

    pub fn holds(self, candidate: &Version, bound: &Version) -> bool {
        use std::cmp::Ordering::*;
        let ord = compare_versions(candidate, bound);
        match self {
            Relation::Earlier => ord == Less,
            Relation::EarlierEqual => ord != Greater,
            Relation::Exactly => ord == Equal,
            Relation::LaterEqual => ord != Less,
            Relation::Later => ord == Greater,
        }
    }

    pub const ALL: [Relation; 5] = [
        Relation::Earlier,
        Relation::EarlierEqual,
        Relation::Exactly,
        Relation::LaterEqual,
        Relation::Later,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub relation: Relation,
    pub version: Version,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyAtom {
    pub name: String,
    pub constraint: Option<Constraint>,
    /// Architecture qualifiers, build profiles and `:arch` suffixes,
    /// kept verbatim and otherwise ignored.
    pub ignored: Vec<String>,
}

impl DependencyAtom {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            constraint: None,
            ignored: Vec::new(),
        }
    }

    pub fn with_constraint(mut self, relation: Relation, version: Version) -> Self {
        self.constraint = Some(Constraint { relation, version });
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyClause {
    pub alternatives: Vec<DependencyAtom>,
}

impl DependencyClause {
    pub fn single(atom: DependencyAtom) -> Self {
        Self {
            alternatives: vec![atom],
        }
    }
}

/// `[a-z0-9][a-z0-9.+-]+`
pub fn is_valid_package_name(name: &str) -> bool {
    let bytes = name.as_bytes();
    bytes.len() >= 2
        && matches!(bytes[0], b'a'..=b'z' | b'0'..=b'9')
        && bytes[1..]
            .iter()
            .all(|b| matches!(b, b'a'..=b'z' | b'0'..=b'9' | b'.' | b'+' | b'-'))
}

impl fmt::Display for DependencyAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        for q in self.ignored.iter().filter(|q| q.starts_with(':')) {
            f.write_str(q)?;
        }
        if let Some(c) = &self.constraint {
            write!(f, " ({} {})", c.relation.as_str(), c.version)?;
        }
        for q in self.ignored.iter().filter(|q| !q.starts_with(':')) {
            write!(f, " {q}")?;
        }
        Ok(())
    }
}

impl fmt::Display for DependencyClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, atom) in self.alternatives.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            write!(f, "{atom}")?;
        }
        Ok(())
    }
}

/// Canonical rendering, the inverse of [`parse_relations`].
pub fn render_relations(clauses: &[DependencyClause]) -> String {
    clauses.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

pub fn parse_relations(field_text: &str) -> Result<Vec<DependencyClause>, DependsError> {
    let text = field_text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|clause| {
            let alternatives = clause.split('|').map(parse_atom).collect::<Result<Vec<_>, _>>()?;
            Ok(DependencyClause { alternatives })
        })
        .collect()
}

fn parse_atom(raw: &str) -> Result<DependencyAtom, DependsError> {
    let atom = raw.trim();
    if atom.is_empty() {
        return Err(DependsError::EmptyAlternative(raw.to_string()));
    }

    let name_end = atom
        .find(|c: char| c.is_whitespace() || matches!(c, '(' | '[' | '<' | ')' | ']' | '>'))
        .unwrap_or(atom.len());
    let (mut name, mut rest) = atom.split_at(name_end);
    let mut ignored = Vec::new();
    if let Some((n, arch)) = name.split_once(':') {
        ignored.push(format!(":{arch}"));
        name = n;
    }
    // dpkg accepts one-character names inside relation fields
    let relaxed = name.len() == 1 && name.bytes().all(|b| matches!(b, b'a'..=b'z' | b'0'..=b'9'));
    if !(relaxed || is_valid_package_name(name)) {
        return Err(DependsError::BadName(name.to_string()));
    }

    let mut constraint = None;
    rest = rest.trim_start();
    if let Some(inner) = rest.strip_prefix('(') {
        let close = inner
            .find(')')
            .ok_or_else(|| DependsError::UnbalancedParenthesis(atom.to_string()))?;
        let body = inner[..close].trim();
        if body.contains('(') {
            return Err(DependsError::UnbalancedParenthesis(atom.to_string()));
        }
        let op_len = body.find(|c: char| !matches!(c, '<' | '>' | '=')).unwrap_or(body.len());
        let (op, version) = body.split_at(op_len);
        let relation = Relation::parse(op).ok_or_else(|| DependsError::BadOperator(op.to_string()))?;
        let version = parse_version(version.trim()).map_err(|source| DependsError::BadVersion {
            atom: atom.to_string(),
            source,
        })?;
        constraint = Some(Constraint { relation, version });
        rest = inner[close + 1..].trim_start();
    }

    // [arch list] and <build profile> groups, in any order
    while !rest.is_empty() {
        let (open, close) = match rest.as_bytes()[0] {
            b'[' => ('[', ']'),
            b'<' => ('<', '>'),
            b')' => return Err(DependsError::UnbalancedParenthesis(atom.to_string())),
            b'(' => return Err(DependsError::UnbalancedParenthesis(atom.to_string())),
            _ => return Err(DependsError::BadName(rest.to_string())),
        };
        let end = rest
            .find(close)
            .ok_or_else(|| DependsError::UnbalancedParenthesis(atom.to_string()))?;
        let group = &rest[..=end];
        if group[1..].contains(open) {
            return Err(DependsError::UnbalancedParenthesis(atom.to_string()));
        }
        ignored.push(group.to_string());
        rest = rest[end + 1..].trim_start();
    }

    if !ignored.is_empty() {
        warn!("ignoring qualifiers {ignored:?} on dependency {name}");
    }

    Ok(DependencyAtom {
        name: name.to_string(),
        constraint,
        ignored,
    })
}

/// The set of installable binaries a clause is checked against.
#[derive(Debug, Clone, Default)]
pub struct Universe {
    versions: BTreeMap<String, Vec<Version>>,
    providers: BTreeMap<String, Vec<String>>,
}

impl Universe {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add<I, S>(&mut self, name: &str, version: Version, provides: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.versions.entry(name.to_string()).or_default().push(version);
        for virt in provides {
            let list = self.providers.entry(virt.into()).or_default();
            if !list.iter().any(|p| p == name) {
                list.push(name.to_string());
                list.sort();
            }
        }
    }

    pub fn with(mut self, name: &str, version: &str, provides: &[&str]) -> Self {
        let version = parse_version(version).expect("valid version literal");
        self.add(name, version, provides.iter().copied());
        self
    }

    pub fn versions_of(&self, name: &str) -> &[Version] {
        self.versions.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn providers_of(&self, name: &str) -> &[String] {
        self.providers.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.versions.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.versions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Satisfaction {
    pub satisfied: bool,
    pub witness: Option<String>,
}

fn atom_witness(atom: &DependencyAtom, universe: &Universe) -> Option<String> {
    match &atom.constraint {
        Some(c) => universe
            .versions_of(&atom.name)
            .iter()
            .any(|v| c.relation.holds(v, &c.version))
            .then(|| atom.name.clone()),
        None => {
            if !universe.versions_of(&atom.name).is_empty() {
                Some(atom.name.clone())
            } else {
                universe.providers_of(&atom.name).first().cloned()
            }
        }
    }
}

pub fn clause_satisfied(clause: &DependencyClause, universe: &Universe) -> Satisfaction {
    let witness = clause.alternatives.iter().find_map(|atom| atom_witness(atom, universe));
    Satisfaction {
        satisfied: witness.is_some(),
        witness,
    }
}

/// Clauses of `build_depends` that the universe cannot satisfy.
pub fn unsatisfied_clauses(build_depends: &[DependencyClause], universe: &Universe) -> Vec<DependencyClause> {
    build_depends
        .iter()
        .filter(|c| !clause_satisfied(c, universe).satisfied)
        .cloned()
        .collect()
}
