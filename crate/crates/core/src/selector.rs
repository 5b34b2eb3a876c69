//! Backport candidate selection: new in a newer release, absent from the
//! target and from every enabled extra repository.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::catalog::{Catalog, Role};
use crate::depends::is_valid_package_name;
use crate::version::Version;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelectorError {
    #[error("NoSourceRelease: the configuration has no source-release repository")]
    NoSourceRelease,
    #[error("invalid watch list entry on line {line}: {name:?}")]
    BadWatchEntry { line: usize, name: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExclusionReason {
    PresentInTarget { repo_id: String, version: Version },
    PresentInEnabledExtra { repo_id: String, version: Version },
    NotFound,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Candidate { source_repo_id: String, version: Version },
    Excluded(ExclusionReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateDecision {
    pub name: String,
    pub decision: Decision,
    pub availability: BTreeMap<String, Option<Version>>,
    /// Target id, kept for explanations.
    pub target: String,
}

impl CandidateDecision {
    pub fn is_candidate(&self) -> bool {
        matches!(self.decision, Decision::Candidate { .. })
    }

    pub fn candidate_version(&self) -> Option<&Version> {
        match &self.decision {
            Decision::Candidate { version, .. } => Some(version),
            Decision::Excluded(_) => None,
        }
    }
}

/// Optional restriction of the selection pool.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WatchList {
    names: BTreeSet<String>,
}

impl WatchList {
    /// One package name per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, SelectorError> {
        let mut names = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let name = line.split('#').next().unwrap_or("").trim();
            if name.is_empty() {
                continue;
            }
            if !is_valid_package_name(name) {
                return Err(SelectorError::BadWatchEntry {
                    line: i + 1,
                    name: name.to_string(),
                });
            }
            names.insert(name.to_string());
        }
        Ok(Self { names })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for WatchList {
    fn from_iter<T: IntoIterator<Item = S>>(iter: T) -> Self {
        Self {
            names: iter.into_iter().map(Into::into).collect(),
        }
    }
}

pub fn select_candidates(
    catalog: &Catalog,
    watch: Option<&WatchList>,
) -> Result<Vec<CandidateDecision>, SelectorError> {
    let chain = catalog.release_chain();
    let sources: Vec<_> = chain.iter().filter(|r| r.role == Role::SourceRelease).collect();
    if sources.is_empty() {
        return Err(SelectorError::NoSourceRelease);
    }
    let target = catalog.target();
    let extras: Vec<_> = catalog
        .repositories()
        .iter()
        .filter(|r| r.role == Role::ExtraEnabled)
        .collect();

    let pool: BTreeSet<String> = match watch {
        Some(w) => w.names.clone(),
        None => sources
            .iter()
            .flat_map(|r| catalog.binary_names(&r.id))
            .map(str::to_string)
            .collect(),
    };

    let decisions = pool
        .into_iter()
        .map(|name| {
            let availability = catalog.availability(&name);
            let present = |id: &str| availability.get(id).cloned().flatten();
            let decision = if let Some(version) = present(&target.id) {
                Decision::Excluded(ExclusionReason::PresentInTarget {
                    repo_id: target.id.clone(),
                    version,
                })
            } else if let Some((repo_id, version)) =
                extras.iter().find_map(|r| present(&r.id).map(|v| (r.id.clone(), v)))
            {
                Decision::Excluded(ExclusionReason::PresentInEnabledExtra { repo_id, version })
            } else if let Some((source_repo_id, version)) =
                sources.iter().find_map(|r| present(&r.id).map(|v| (r.id.clone(), v)))
            {
                Decision::Candidate {
                    source_repo_id,
                    version,
                }
            } else {
                Decision::Excluded(ExclusionReason::NotFound)
            };
            CandidateDecision {
                name,
                decision,
                availability,
                target: target.id.clone(),
            }
        })
        .collect();
    Ok(decisions)
}

/// One human-readable line naming the rule that fired.
pub fn explain(decision: &CandidateDecision) -> String {
    decision.to_string()
}

impl fmt::Display for CandidateDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = &self.name;
        match &self.decision {
            Decision::Candidate {
                source_repo_id,
                version,
            } => write!(
                f,
                "{name}: candidate — newest in {source_repo_id} ({version}), absent from {} and all enabled repos",
                self.target
            ),
            Decision::Excluded(ExclusionReason::PresentInTarget { repo_id, version }) => {
                write!(f, "{name}: excluded — already in {repo_id} ({version})")
            }
            Decision::Excluded(ExclusionReason::PresentInEnabledExtra { repo_id, version }) => {
                write!(f, "{name}: excluded — available from {repo_id} ({version})")
            }
            Decision::Excluded(ExclusionReason::NotFound) => {
                write!(f, "{name}: excluded — not found in any source release")
            }
        }
    }
}
