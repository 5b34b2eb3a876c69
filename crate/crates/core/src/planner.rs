//! Multi-hop backport plans over the release chain, annotated with a
//! one-level build-dependency feasibility prediction per hop.

use std::fmt;

use thiserror::Error;

use crate::catalog::{Catalog, Repository, SourcePackage};
use crate::depends::{unsatisfied_clauses, DependencyClause};
use crate::selector::{CandidateDecision, Decision};
use crate::version::Version;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlannerError {
    #[error("UnknownSuite: {0}")]
    UnknownSuite(String),
    #[error("SourceBelowTarget: {source_id} sits below {target_id} in the release chain")]
    SourceBelowTarget { source_id: String, target_id: String },
    #[error("NotACandidate: {0}")]
    NotACandidate(String),
}

/// One step down the chain between adjacent releases.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hop {
    pub from_repo_id: String,
    pub to_repo_id: String,
}

impl Hop {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        Self {
            from_repo_id: from.into(),
            to_repo_id: to.into(),
        }
    }

    /// `<from>2<to>`, e.g. `quantal2precise`.
    pub fn label(&self) -> String {
        format!("{}2{}", self.from_repo_id, self.to_repo_id)
    }
}

impl fmt::Display for Hop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}2{}", self.from_repo_id, self.to_repo_id)
    }
}

/// A chain link: repository id and position (0 = target).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Suite {
    pub id: String,
    pub position: u32,
}

impl Suite {
    pub fn new(id: impl Into<String>, position: u32) -> Self {
        Self {
            id: id.into(),
            position,
        }
    }
}

pub fn chain_of(repos: &[&Repository]) -> Vec<Suite> {
    let mut chain: Vec<Suite> = repos
        .iter()
        .filter_map(|r| r.position.map(|p| Suite::new(r.id.clone(), p)))
        .collect();
    chain.sort_by_key(|s| s.position);
    chain
}

/// Every adjacent hop in a chain, top down.
pub fn all_hops(chain: &[Suite]) -> Vec<Hop> {
    let mut sorted: Vec<&Suite> = chain.iter().collect();
    sorted.sort_by_key(|s| s.position);
    sorted
        .windows(2)
        .rev()
        .map(|w| Hop::new(w[1].id.clone(), w[0].id.clone()))
        .collect()
}

pub fn plan_cascade(source_id: &str, target_id: &str, chain: &[Suite]) -> Result<Vec<Hop>, PlannerError> {
    let find = |id: &str| {
        chain
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| PlannerError::UnknownSuite(id.to_string()))
    };
    let source = find(source_id)?;
    let target = find(target_id)?;
    if source.position < target.position {
        return Err(PlannerError::SourceBelowTarget {
            source_id: source_id.to_string(),
            target_id: target_id.to_string(),
        });
    }
    (target.position..source.position)
        .rev()
        .map(|lower| {
            let at = |p: u32| {
                chain
                    .iter()
                    .find(|s| s.position == p)
                    .map(|s| s.id.clone())
                    .ok_or_else(|| PlannerError::UnknownSuite(format!("position {p}")))
            };
            Ok(Hop::new(at(lower + 1)?, at(lower)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility {
    NotAssessed,
    /// No Sources record for the package: nothing to check against.
    Unknown,
    Checked {
        unsatisfied: Vec<DependencyClause>,
        /// Qualifiers the check skipped over (`[amd64]`, `<!nocheck>`, ...).
        ignored: Vec<String>,
    },
}

impl Feasibility {
    pub fn predicted_buildable(&self) -> Option<bool> {
        match self {
            Feasibility::Checked { unsatisfied, .. } => Some(unsatisfied.is_empty()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedHop {
    pub hop: Hop,
    pub feasibility: Feasibility,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackportPlan {
    pub package: String,
    pub source_version: Version,
    pub hops: Vec<PlannedHop>,
}

impl BackportPlan {
    pub fn for_candidate(decision: &CandidateDecision, catalog: &Catalog) -> Result<Self, PlannerError> {
        let Decision::Candidate {
            source_repo_id,
            version,
        } = &decision.decision
        else {
            return Err(PlannerError::NotACandidate(decision.name.clone()));
        };
        let chain = chain_of(&catalog.release_chain());
        let hops = plan_cascade(source_repo_id, &catalog.target().id, &chain)?;
        Ok(Self {
            package: decision.name.clone(),
            source_version: version.clone(),
            hops: hops
                .into_iter()
                .map(|hop| PlannedHop {
                    hop,
                    feasibility: Feasibility::NotAssessed,
                })
                .collect(),
        })
    }

    pub fn hop_labels(&self) -> Vec<String> {
        self.hops.iter().map(|h| h.hop.label()).collect()
    }
}

fn source_name_for(catalog: &Catalog, package: &str, repo_ids: &[&str]) -> String {
    repo_ids
        .iter()
        .flat_map(|id| catalog.binaries(id, package))
        .find_map(|r| r.source_name.clone())
        .unwrap_or_else(|| package.to_string())
}

/// Fills in per-hop feasibility. A hop's source record comes from its
/// from-release, falling back to the release the plan starts in (the
/// record a cascade carries downwards).
pub fn assess_feasibility(plan: &BackportPlan, catalog: &Catalog) -> BackportPlan {
    let origin = plan.hops.first().map(|h| h.hop.from_repo_id.as_str());
    let mut repos: Vec<&str> = plan.hops.iter().map(|h| h.hop.from_repo_id.as_str()).collect();
    repos.dedup();
    let source_name = source_name_for(catalog, &plan.package, &repos);

    let lookup = |from: &str| -> Option<&SourcePackage> {
        catalog
            .source(from, &source_name)
            .or_else(|| origin.and_then(|o| catalog.source(o, &source_name)))
    };

    let hops = plan
        .hops
        .iter()
        .map(|planned| {
            let feasibility = match lookup(&planned.hop.from_repo_id) {
                None => Feasibility::Unknown,
                Some(src) => {
                    let universe = catalog.universe(&planned.hop.to_repo_id);
                    let ignored = src
                        .build_depends
                        .iter()
                        .flat_map(|c| &c.alternatives)
                        .flat_map(|a| a.ignored.iter().map(move |q| format!("{} {q}", a.name)))
                        .collect();
                    Feasibility::Checked {
                        unsatisfied: unsatisfied_clauses(&src.build_depends, &universe),
                        ignored,
                    }
                }
            };
            PlannedHop {
                hop: planned.hop.clone(),
                feasibility,
            }
        })
        .collect();
    BackportPlan {
        package: plan.package.clone(),
        source_version: plan.source_version.clone(),
        hops,
    }
}
