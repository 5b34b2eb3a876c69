//! The configured repository landscape and what each repository carries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::deb822::{parse_stanzas, Deb822Error, Stanza};
use crate::depends::{is_valid_package_name, parse_relations, DependencyClause, DependsError, Universe};
use crate::version::{compare_versions, parse_version, Version, VersionError};

pub const DEFAULT_ARCHITECTURE: &str = "amd64";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error(transparent)]
    Syntax(#[from] Deb822Error),
    #[error("MissingField: {field} in repository stanza {index}")]
    MissingField { index: usize, field: &'static str },
    #[error("InvalidField: {field} in repository stanza {index}: {reason}")]
    InvalidField {
        index: usize,
        field: &'static str,
        reason: String,
    },
    #[error("DuplicateRepoId: {0}")]
    DuplicateRepoId(String),
    #[error("NoTarget: expected exactly one repository with Role: target, found {found}")]
    NoTarget { found: usize },
    #[error("BrokenChain: source-release positions {positions:?} are not 1..={expected}")]
    BrokenChain { positions: Vec<u32>, expected: usize },
    #[error("UnknownRepo: {0}")]
    UnknownRepo(String),
    #[error("BadStanza: stanza {index}: {reason}")]
    BadStanza { index: usize, reason: String },
    #[error("bad version for package {package}: {source}")]
    Version {
        package: String,
        #[source]
        source: VersionError,
    },
    #[error("bad relation field {field} for package {package}: {source}")]
    Relation {
        package: String,
        field: &'static str,
        #[source]
        source: DependsError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Target,
    SourceRelease,
    ExtraEnabled,
    ExtraDisabled,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Target => "target",
            Role::SourceRelease => "source-release",
            Role::ExtraEnabled => "extra-enabled",
            Role::ExtraDisabled => "extra-disabled",
        }
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "target" => Role::Target,
            "source-release" => Role::SourceRelease,
            "extra-enabled" => Role::ExtraEnabled,
            "extra-disabled" => Role::ExtraDisabled,
            other => return Err(format!("unknown role {other:?}")),
        })
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Repository {
    pub id: String,
    /// `http(s)://` URL, `file://` URL or a filesystem path.
    pub base_url: String,
    pub dist: String,
    pub components: Vec<String>,
    pub role: Role,
    /// Position in the release chain: 0 for the target, 1.. for source releases.
    pub position: Option<u32>,
    /// Indices live directly under `base_url`.
    pub flat: bool,
    pub strict_checksums: bool,
    /// Column heading in status tables; defaults to the id.
    pub label: Option<String>,
}

impl Repository {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.id)
    }

    pub fn is_release(&self) -> bool {
        matches!(self.role, Role::Target | Role::SourceRelease)
    }
}

fn parse_flag(index: usize, field: &'static str, value: Option<&str>) -> Result<bool, CatalogError> {
    match value.map(str::trim) {
        None => Ok(false),
        Some("yes") => Ok(true),
        Some("no") => Ok(false),
        Some(other) => Err(CatalogError::InvalidField {
            index,
            field,
            reason: format!("expected yes or no, got {other:?}"),
        }),
    }
}

/// Parses and validates a repository configuration.
pub fn load_config(text: &str) -> Result<Vec<Repository>, CatalogError> {
    let stanzas = parse_stanzas(text)?;
    let mut repos: Vec<Repository> = Vec::with_capacity(stanzas.len());

    for (index, stanza) in stanzas.iter().enumerate() {
        let require = |field: &'static str| {
            stanza
                .get(field)
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .ok_or(CatalogError::MissingField { index, field })
        };
        let id = require("Repo")?.to_string();
        let role: Role = require("Role")?.parse().map_err(|reason| CatalogError::InvalidField {
            index,
            field: "Role",
            reason,
        })?;
        let base_url = require("URL")?.to_string();
        let dist = require("Dist")?.to_string();
        let flat = parse_flag(index, "Flat", stanza.get("Flat"))?;
        let components: Vec<String> = match stanza.get("Components") {
            Some(c) => c.split_whitespace().map(str::to_string).collect(),
            None => Vec::new(),
        };
        if components.is_empty() && !flat {
            return Err(CatalogError::MissingField {
                index,
                field: "Components",
            });
        }
        let position = match stanza.get("Position") {
            Some(p) => Some(p.trim().parse::<u32>().map_err(|e| CatalogError::InvalidField {
                index,
                field: "Position",
                reason: e.to_string(),
            })?),
            None => None,
        };
        let position = match role {
            Role::Target => match position {
                None | Some(0) => Some(0),
                Some(p) => {
                    return Err(CatalogError::InvalidField {
                        index,
                        field: "Position",
                        reason: format!("target must sit at position 0, got {p}"),
                    })
                }
            },
            Role::SourceRelease => Some(position.ok_or(CatalogError::MissingField {
                index,
                field: "Position",
            })?),
            Role::ExtraEnabled | Role::ExtraDisabled => {
                if position.is_some() {
                    return Err(CatalogError::InvalidField {
                        index,
                        field: "Position",
                        reason: "only releases have a chain position".into(),
                    });
                }
                None
            }
        };
        if repos.iter().any(|r| r.id == id) {
            return Err(CatalogError::DuplicateRepoId(id));
        }
        repos.push(Repository {
            id,
            base_url,
            dist,
            components,
            role,
            position,
            flat,
            strict_checksums: parse_flag(index, "Strict-Checksums", stanza.get("Strict-Checksums"))?,
            label: stanza.get("Label").map(|l| l.trim().to_string()),
        });
    }

    let targets = repos.iter().filter(|r| r.role == Role::Target).count();
    if targets != 1 {
        return Err(CatalogError::NoTarget { found: targets });
    }
    let mut positions: Vec<u32> = repos
        .iter()
        .filter(|r| r.role == Role::SourceRelease)
        .filter_map(|r| r.position)
        .collect();
    positions.sort_unstable();
    let contiguous = positions.iter().enumerate().all(|(i, &p)| p as usize == i + 1);
    if !contiguous {
        return Err(CatalogError::BrokenChain {
            expected: positions.len(),
            positions,
        });
    }
    Ok(repos)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackageRecord {
    pub name: String,
    pub version: Version,
    pub architecture: String,
    pub depends: Vec<DependencyClause>,
    pub provides: BTreeSet<String>,
    pub source_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourcePackage {
    pub name: String,
    pub version: Version,
    pub build_depends: Vec<DependencyClause>,
    pub binaries: Vec<String>,
}

#[derive(Debug, Clone, Default)]
struct RepoIndex {
    binaries: BTreeMap<String, Vec<PackageRecord>>,
    sources: BTreeMap<String, Vec<SourcePackage>>,
}

/// Immutable view of the indices of every configured repository.
/// Ingesting returns a new catalog; unchanged repositories are shared.
#[derive(Debug, Clone)]
pub struct Catalog {
    repos: Arc<Vec<Repository>>,
    architecture: String,
    indices: BTreeMap<String, Arc<RepoIndex>>,
}

fn relation_field(stanza: &Stanza, package: &str, field: &'static str) -> Result<Vec<DependencyClause>, CatalogError> {
    match stanza.get(field) {
        Some(text) => parse_relations(text).map_err(|source| CatalogError::Relation {
            package: package.to_string(),
            field,
            source,
        }),
        None => Ok(Vec::new()),
    }
}

fn package_and_version(stanza: &Stanza, index: usize) -> Result<(String, Version), CatalogError> {
    let name = stanza
        .get("Package")
        .map(str::trim)
        .ok_or_else(|| CatalogError::BadStanza {
            index,
            reason: "missing Package".into(),
        })?;
    if !is_valid_package_name(name) {
        return Err(CatalogError::BadStanza {
            index,
            reason: format!("invalid package name {name:?}"),
        });
    }
    let version = stanza
        .get("Version")
        .map(str::trim)
        .ok_or_else(|| CatalogError::BadStanza {
            index,
            reason: format!("missing Version for {name}"),
        })?;
    let version = parse_version(version).map_err(|source| CatalogError::Version {
        package: name.to_string(),
        source,
    })?;
    Ok((name.to_string(), version))
}

impl Catalog {
    pub fn new(repos: Vec<Repository>) -> Self {
        Self::with_architecture(repos, DEFAULT_ARCHITECTURE)
    }

    pub fn with_architecture(repos: Vec<Repository>, architecture: &str) -> Self {
        let indices = repos
            .iter()
            .map(|r| (r.id.clone(), Arc::new(RepoIndex::default())))
            .collect();
        Self {
            repos: Arc::new(repos),
            architecture: architecture.to_string(),
            indices,
        }
    }

    pub fn repositories(&self) -> &[Repository] {
        &self.repos
    }

    pub fn repository(&self, id: &str) -> Option<&Repository> {
        self.repos.iter().find(|r| r.id == id)
    }

    pub fn architecture(&self) -> &str {
        &self.architecture
    }

    pub fn target(&self) -> &Repository {
        self.repos
            .iter()
            .find(|r| r.role == Role::Target)
            .expect("validated configuration has a target")
    }

    /// Target and source releases ordered by chain position.
    pub fn release_chain(&self) -> Vec<&Repository> {
        let mut chain: Vec<_> = self.repos.iter().filter(|r| r.is_release()).collect();
        chain.sort_by_key(|r| r.position);
        chain
    }

    fn index_mut(&mut self, repo_id: &str) -> Result<&mut RepoIndex, CatalogError> {
        let slot = self
            .indices
            .get_mut(repo_id)
            .ok_or_else(|| CatalogError::UnknownRepo(repo_id.to_string()))?;
        Ok(Arc::make_mut(slot))
    }

    /// Adds the stanzas of a binary `Packages` index.
    pub fn ingest_index(&self, repo_id: &str, stanzas: &[Stanza]) -> Result<Catalog, CatalogError> {
        let mut next = self.clone();
        let arch = self.architecture.clone();
        let index_slot = next.index_mut(repo_id)?;
        for (i, stanza) in stanzas.iter().enumerate() {
            let (name, version) = package_and_version(stanza, i)?;
            let architecture = stanza.get("Architecture").map(str::trim).unwrap_or(&arch).to_string();
            if architecture != arch && architecture != "all" {
                continue;
            }
            let depends = relation_field(stanza, &name, "Depends")?;
            let provides = relation_field(stanza, &name, "Provides")?
                .into_iter()
                .flat_map(|c| c.alternatives.into_iter().map(|a| a.name))
                .collect();
            let source_name = stanza
                .get("Source")
                .and_then(|s| s.split_whitespace().next())
                .map(str::to_string);
            let records = index_slot.binaries.entry(name.clone()).or_default();
            if records
                .iter()
                .any(|r| r.version == version && r.architecture == architecture)
            {
                return Err(CatalogError::BadStanza {
                    index: i,
                    reason: format!("duplicate {name} {version} {architecture}"),
                });
            }
            records.push(PackageRecord {
                name,
                version,
                architecture,
                depends,
                provides,
                source_name,
            });
        }
        Ok(next)
    }

    /// Adds the stanzas of a `Sources` index.
    pub fn ingest_sources(&self, repo_id: &str, stanzas: &[Stanza]) -> Result<Catalog, CatalogError> {
        let mut next = self.clone();
        let index_slot = next.index_mut(repo_id)?;
        for (i, stanza) in stanzas.iter().enumerate() {
            let (name, version) = package_and_version(stanza, i)?;
            let mut build_depends = relation_field(stanza, &name, "Build-Depends")?;
            build_depends.extend(relation_field(stanza, &name, "Build-Depends-Indep")?);
            let binaries: Vec<String> = stanza
                .get("Binary")
                .unwrap_or("")
                .split([',', '\n'])
                .map(str::trim)
                .filter(|b| !b.is_empty())
                .map(str::to_string)
                .collect();
            if binaries.is_empty() {
                return Err(CatalogError::BadStanza {
                    index: i,
                    reason: format!("source {name} lists no binaries"),
                });
            }
            let records = index_slot.sources.entry(name.clone()).or_default();
            if records.iter().any(|r| r.version == version) {
                return Err(CatalogError::BadStanza {
                    index: i,
                    reason: format!("duplicate source {name} {version}"),
                });
            }
            records.push(SourcePackage {
                name,
                version,
                build_depends,
                binaries,
            });
        }
        Ok(next)
    }

    pub fn binaries(&self, repo_id: &str, name: &str) -> &[PackageRecord] {
        self.indices
            .get(repo_id)
            .and_then(|idx| idx.binaries.get(name))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn binary_names(&self, repo_id: &str) -> impl Iterator<Item = &str> {
        self.indices
            .get(repo_id)
            .into_iter()
            .flat_map(|idx| idx.binaries.keys().map(String::as_str))
    }

    pub fn highest_version(&self, repo_id: &str, name: &str) -> Option<&Version> {
        self.binaries(repo_id, name)
            .iter()
            .map(|r| &r.version)
            .max_by(|a, b| compare_versions(a, b))
    }

    /// Highest source record for `name` in `repo_id`.
    pub fn source(&self, repo_id: &str, name: &str) -> Option<&SourcePackage> {
        self.indices
            .get(repo_id)
            .and_then(|idx| idx.sources.get(name))
            .and_then(|list| list.iter().max_by(|a, b| compare_versions(&a.version, &b.version)))
    }

    /// Highest available binary version in every configured repository,
    /// keyed by repository id. Unknown names map to all-absent.
    pub fn availability(&self, name: &str) -> BTreeMap<String, Option<Version>> {
        self.repos
            .iter()
            .map(|r| (r.id.clone(), self.highest_version(&r.id, name).cloned()))
            .collect()
    }

    /// Binary universe of one repository, for build-dependency checks.
    pub fn universe(&self, repo_id: &str) -> Universe {
        let mut universe = Universe::new();
        if let Some(idx) = self.indices.get(repo_id) {
            for record in idx.binaries.values().flatten() {
                universe.add(&record.name, record.version.clone(), record.provides.iter().cloned());
            }
        }
        universe
    }
}
