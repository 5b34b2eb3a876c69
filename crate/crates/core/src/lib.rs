//! Planning and tracking of distribution backport rounds.
//!
//! The pipeline reads package indices from a target release, newer
//! releases and extra repositories ([`transport`], [`catalog`]), picks
//! packages that are new upstream and missing downstream ([`selector`]),
//! plans the hop-by-hop cascade down the release chain with a build
//! dependency check per hop ([`planner`]), records each task's progress
//! in an append-only [`ledger`], schedules rounds from the release
//! calendar ([`schedule`]) and renders status tables and announcements
//! ([`report`]).

pub mod catalog;
pub mod deb822;
pub mod depends;
pub mod ledger;
pub mod pipeline;
pub mod planner;
pub mod report;
pub mod schedule;
pub mod selector;
pub mod transport;
pub mod version;

pub use catalog::{load_config, Catalog, Repository, Role};
pub use deb822::{parse_stanzas, serialize_stanzas, Stanza};
pub use depends::{clause_satisfied, parse_relations, DependencyAtom, DependencyClause, Universe};
pub use ledger::{Ledger, TaskState};
pub use pipeline::build_catalog;
pub use planner::{plan_cascade, BackportPlan, Hop};
pub use selector::{select_candidates, CandidateDecision, WatchList};
pub use version::{compare_versions, parse_version, Version};
