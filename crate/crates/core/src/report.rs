//! Status spreadsheet (TSV) and mailing-list announcement.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::catalog::{Catalog, Repository, Role};
use crate::ledger::{summarize, BuildingCell, Ledger, Rollup};
use crate::selector::CandidateDecision;

pub const PACKAGE_HEADER: &str = "Software-Package";
pub const WORKFLOW_HEADERS: [&str; 5] = ["Notes", "Building", "Uploaded", "Backported", "From"];
pub const NOT_AVAILABLE: &str = "n/a";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("InconsistentInputs: ledger tracks {0} which is not among the decisions")]
    InconsistentInputs(String),
    #[error("bad status table: {0}")]
    BadTable(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatusRow {
    pub package: String,
    pub availability: Vec<String>,
    pub notes: String,
    pub building: String,
    pub uploaded: String,
    pub backported: String,
    pub from: String,
}

impl StatusRow {
    fn cells(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.package.as_str())
            .chain(self.availability.iter().map(String::as_str))
            .chain([
                self.notes.as_str(),
                self.building.as_str(),
                self.uploaded.as_str(),
                self.backported.as_str(),
                self.from.as_str(),
            ])
    }
}

/// Repository columns: extras in configuration order, then releases from
/// the top of the chain down to the target.
pub fn column_repositories(catalog: &Catalog) -> Vec<&Repository> {
    let mut columns: Vec<&Repository> = catalog
        .repositories()
        .iter()
        .filter(|r| matches!(r.role, Role::ExtraEnabled | Role::ExtraDisabled))
        .collect();
    let mut chain = catalog.release_chain();
    chain.reverse();
    columns.extend(chain);
    columns
}

pub fn status_rows(
    catalog: &Catalog,
    ledger: &Ledger,
    decisions: &[CandidateDecision],
) -> Result<Vec<StatusRow>, ReportError> {
    let summary = summarize(ledger);
    let known: BTreeSet<&str> = decisions.iter().map(|d| d.name.as_str()).collect();
    if let Some(stray) = summary.packages.keys().find(|p| !known.contains(p.as_str())) {
        return Err(ReportError::InconsistentInputs(stray.clone()));
    }
    let columns = column_repositories(catalog);
    let empty = Rollup::default();

    Ok(decisions
        .iter()
        .map(|d| {
            let rollup = summary.packages.get(&d.name).unwrap_or(&empty);
            let building = if d.is_candidate() {
                rollup.building
            } else {
                BuildingCell::NoTask
            };
            StatusRow {
                package: d.name.clone(),
                availability: columns
                    .iter()
                    .map(|r| match d.availability.get(&r.id).cloned().flatten() {
                        Some(v) => v.to_string(),
                        None => NOT_AVAILABLE.to_string(),
                    })
                    .collect(),
                notes: rollup.notes.join("; "),
                building: building.as_str().to_string(),
                uploaded: rollup.uploaded.as_str().to_string(),
                backported: rollup.backported.as_str().to_string(),
                from: rollup.from.clone(),
            }
        })
        .collect())
}

pub fn header(catalog: &Catalog) -> Vec<String> {
    std::iter::once(PACKAGE_HEADER.to_string())
        .chain(column_repositories(catalog).iter().map(|r| r.label().to_string()))
        .chain(WORKFLOW_HEADERS.iter().map(|h| h.to_string()))
        .collect()
}

fn tsv_line<'a>(cells: impl Iterator<Item = &'a str>) -> String {
    let mut line = cells
        .map(|c| c.replace(['\t', '\n'], " "))
        .collect::<Vec<_>>()
        .join("\t");
    line.push('\n');
    line
}

pub fn emit_status_table(
    catalog: &Catalog,
    ledger: &Ledger,
    decisions: &[CandidateDecision],
) -> Result<String, ReportError> {
    let rows = status_rows(catalog, ledger, decisions)?;
    let header = header(catalog);
    let mut out = tsv_line(header.iter().map(String::as_str));
    for row in &rows {
        out.push_str(&tsv_line(row.cells()));
    }
    Ok(out)
}

/// Header token with a trailing colon dropped and the German notes
/// heading mapped to `Notes`.
fn normalize_header(cell: &str) -> String {
    let cell = cell.trim().trim_end_matches(':');
    if cell == "Sonstiges" {
        "Notes".to_string()
    } else {
        cell.to_string()
    }
}

/// Reads a status table back. Short rows are padded with empty cells.
pub fn parse_status_table(text: &str) -> Result<(Vec<String>, Vec<StatusRow>), ReportError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| ReportError::BadTable("missing header".into()))?
        .split('\t')
        .map(normalize_header)
        .collect();
    let width = header.len();
    if width < 1 + WORKFLOW_HEADERS.len()
        || header[0] != PACKAGE_HEADER
        || header[width - WORKFLOW_HEADERS.len()..] != WORKFLOW_HEADERS
    {
        return Err(ReportError::BadTable(format!("unexpected header {header:?}")));
    }
    let repo_columns = width - 1 - WORKFLOW_HEADERS.len();
    let rows = lines
        .enumerate()
        .map(|(i, line)| {
            let mut cells: Vec<String> = line.split('\t').map(|c| c.trim().to_string()).collect();
            if cells.len() > width {
                return Err(ReportError::BadTable(format!(
                    "row {} has {} cells, header has {width}",
                    i + 1,
                    cells.len()
                )));
            }
            cells.resize(width, String::new());
            let mut it = cells.into_iter();
            let mut next = || it.next().expect("row padded to header width");
            let package = next();
            let availability = (0..repo_columns).map(|_| next()).collect();
            Ok(StatusRow {
                package,
                availability,
                notes: next(),
                building: next(),
                uploaded: next(),
                backported: next(),
                from: next(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((header, rows))
}

/// Plain-text round announcement listing every package whose latest hop
/// reached `Done`.
pub fn emit_announcement(ledger: &Ledger, decisions: &[CandidateDecision], round_label: &str, target: &str) -> String {
    let summary = summarize(ledger);
    let done: Vec<(&String, &Rollup)> = summary.packages.iter().filter(|(_, r)| !r.from.is_empty()).collect();

    let mut out = String::new();
    out.push_str(&format!("Subject: Backports round {round_label} for {target}\n\n"));
    out.push_str(&format!(
        "The following packages are now available from the backports repository of {target}:\n\n"
    ));
    for (package, rollup) in &done {
        let version = decisions
            .iter()
            .find(|d| &d.name == *package)
            .and_then(CandidateDecision::candidate_version);
        match version {
            Some(v) => out.push_str(&format!("  {package} {v} ({})\n", rollup.from)),
            None => out.push_str(&format!("  {package} ({})\n", rollup.from)),
        }
    }
    if !done.is_empty() {
        out.push('\n');
    }
    out.push_str(&format!("{} packages backported\n", done.len()));
    out.push_str(&format!("Target release: {target}\n"));
    out
}
