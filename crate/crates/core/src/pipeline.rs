//! Glue between transport and catalog: fetch every configured index and
//! build the catalog from it.

use log::debug;
use thiserror::Error;

use crate::catalog::{Catalog, CatalogError, Repository};
use crate::deb822::{parse_stanzas, Deb822Error};
use crate::transport::{Fetcher, IndexDescriptor, IndexKind, TransportError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{repo_id}: {source}")]
    Transport {
        repo_id: String,
        #[source]
        source: TransportError,
    },
    #[error("{repo_id} {path}: {source}")]
    Index {
        repo_id: String,
        path: String,
        #[source]
        source: Deb822Error,
    },
    #[error("{repo_id}: {source}")]
    Catalog {
        repo_id: String,
        #[source]
        source: Box<CatalogError>,
    },
}

/// Every index of every repository, in configuration order.
pub fn all_descriptors(repos: &[Repository], architecture: &str) -> Vec<IndexDescriptor> {
    repos
        .iter()
        .flat_map(|r| IndexDescriptor::all_for(r, architecture))
        .collect()
}

/// A missing `Sources` index is tolerated; extra repositories often
/// publish binaries only.
pub fn is_optional_miss(desc: &IndexDescriptor, err: &TransportError) -> bool {
    desc.kind == IndexKind::Sources && matches!(err, TransportError::NotFound(_) | TransportError::NotInCache { .. })
}

pub fn build_catalog(repos: &[Repository], fetcher: &Fetcher, architecture: &str) -> Result<Catalog, PipelineError> {
    let descs = all_descriptors(repos, architecture);
    let texts = fetcher.fetch_many(&descs, repos);
    let mut catalog = Catalog::with_architecture(repos.to_vec(), architecture);

    for (desc, result) in descs.iter().zip(texts) {
        let repo = repos
            .iter()
            .find(|r| r.id == desc.repo_id)
            .expect("descriptors come from the repository list");
        let text = match result {
            Ok(text) => text,
            Err(e) if is_optional_miss(desc, &e) => {
                debug!("{}: no {} index, skipping", desc.repo_id, desc.relative_path(repo));
                continue;
            }
            Err(source) => {
                return Err(PipelineError::Transport {
                    repo_id: desc.repo_id.clone(),
                    source,
                })
            }
        };
        let stanzas = parse_stanzas(&text).map_err(|source| PipelineError::Index {
            repo_id: desc.repo_id.clone(),
            path: desc.relative_path(repo),
            source,
        })?;
        let next = match desc.kind {
            IndexKind::BinaryPackages { .. } => catalog.ingest_index(&desc.repo_id, &stanzas),
            IndexKind::Sources => catalog.ingest_sources(&desc.repo_id, &stanzas),
        };
        catalog = next.map_err(|source| PipelineError::Catalog {
            repo_id: desc.repo_id.clone(),
            source: Box::new(source),
        })?;
    }
    Ok(catalog)
}
