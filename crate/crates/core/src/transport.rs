//! Fetching repository indices into a verified local cache.
//!
//! Remote repositories are fetched over HTTP with `If-Modified-Since`
//! revalidation and checked against the SHA-256 digests declared in the
//! repository's `Release` file. Local repositories (plain paths or
//! `file://` URLs) are read in place and never touch the network or cache.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use flate2::read::GzDecoder;
use log::{debug, warn};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::catalog::Repository;
use crate::deb822::{parse_stanzas, serialize_stanzas, Deb822Error, Stanza};

pub const DEFAULT_PARALLELISM: usize = 4;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("UnknownRepo: {0}")]
    UnknownRepo(String),
    #[error("NetworkError: {url}: {reason}")]
    NetworkError { url: String, reason: String },
    #[error("NotFound: {0}")]
    NotFound(String),
    #[error("NotInCache: {repo_id}/{path}")]
    NotInCache { repo_id: String, path: String },
    #[error("ChecksumMismatch: {path}: Release declares {expected}, got {actual}")]
    ChecksumMismatch {
        path: String,
        expected: String,
        actual: String,
    },
    #[error("MissingChecksum: {path} has no SHA256 entry in Release (strict-checksums)")]
    MissingChecksum { path: String },
    #[error("DecompressError: {path}: {reason}")]
    DecompressError { path: String, reason: String },
    #[error("BadDigestFormat: {0:?}")]
    BadDigestFormat(String),
    #[error("CorruptCache: {0}")]
    CorruptCache(PathBuf),
    #[error("bad Release file for {repo_id}: {source}")]
    BadRelease {
        repo_id: String,
        #[source]
        source: Deb822Error,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> TransportError + '_ {
    move |source| TransportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum IndexKind {
    BinaryPackages { architecture: String },
    Sources,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexDescriptor {
    pub repo_id: String,
    /// Empty for flat repositories.
    pub component: String,
    pub kind: IndexKind,
}

impl IndexDescriptor {
    pub fn packages(repo_id: &str, component: &str, architecture: &str) -> Self {
        Self {
            repo_id: repo_id.to_string(),
            component: component.to_string(),
            kind: IndexKind::BinaryPackages {
                architecture: architecture.to_string(),
            },
        }
    }

    pub fn sources(repo_id: &str, component: &str) -> Self {
        Self {
            repo_id: repo_id.to_string(),
            component: component.to_string(),
            kind: IndexKind::Sources,
        }
    }

    /// Every index a repository publishes for one architecture.
    pub fn all_for(repo: &Repository, architecture: &str) -> Vec<Self> {
        let components: Vec<&str> = if repo.flat {
            vec![""]
        } else {
            repo.components.iter().map(String::as_str).collect()
        };
        components
            .into_iter()
            .flat_map(|c| [Self::packages(&repo.id, c, architecture), Self::sources(&repo.id, c)])
            .collect()
    }

    fn base_name(&self) -> &'static str {
        match self.kind {
            IndexKind::BinaryPackages { .. } => "Packages",
            IndexKind::Sources => "Sources",
        }
    }

    /// Path of the uncompressed index, relative to the directory the
    /// `Release` file lives in.
    pub fn relative_path(&self, repo: &Repository) -> String {
        if repo.flat {
            return self.base_name().to_string();
        }
        match &self.kind {
            IndexKind::BinaryPackages { architecture } => {
                format!("{}/binary-{}/Packages", self.component, architecture)
            }
            IndexKind::Sources => format!("{}/source/Sources", self.component),
        }
    }

    fn cache_filename(&self) -> String {
        match &self.kind {
            IndexKind::BinaryPackages { architecture } => format!("binary-{architecture}-Packages"),
            IndexKind::Sources => "Sources".to_string(),
        }
    }

    pub fn cache_path(&self, repo: &Repository, cache_dir: &Path) -> PathBuf {
        let mut path = cache_dir.join(&repo.id).join(&repo.dist);
        if !self.component.is_empty() {
            path.push(&self.component);
        }
        path.push(self.cache_filename());
        path
    }
}

/// Result of comparing bytes against an expected SHA-256.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChecksumCheck {
    Ok,
    Mismatch { actual: String },
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn verify_checksum(bytes: &[u8], expected_hex: &str) -> Result<ChecksumCheck, TransportError> {
    if expected_hex.len() != 64 || !expected_hex.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(TransportError::BadDigestFormat(expected_hex.to_string()));
    }
    let actual = sha256_hex(bytes);
    if actual.eq_ignore_ascii_case(expected_hex) {
        Ok(ChecksumCheck::Ok)
    } else {
        Ok(ChecksumCheck::Mismatch { actual })
    }
}

/// Metadata kept beside each cached index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheEntry {
    pub repo_id: String,
    /// Remote path the bytes came from, relative to the Release directory.
    pub path: String,
    pub sha256: String,
    pub fetched_at: String,
    pub size: u64,
    pub last_modified: Option<String>,
}

impl CacheEntry {
    fn to_stanza(&self) -> Stanza {
        let mut s = Stanza::new()
            .with("Repo", &self.repo_id)
            .with("Path", &self.path)
            .with("SHA256", &self.sha256)
            .with("Size", self.size.to_string())
            .with("Fetched-At", &self.fetched_at);
        if let Some(lm) = &self.last_modified {
            s.set("Last-Modified", lm);
        }
        s
    }

    fn from_stanza(s: &Stanza) -> Option<Self> {
        Some(Self {
            repo_id: s.get("Repo")?.to_string(),
            path: s.get("Path")?.to_string(),
            sha256: s.get("SHA256")?.to_string(),
            size: s.get("Size")?.parse().ok()?,
            fetched_at: s.get("Fetched-At")?.to_string(),
            last_modified: s.get("Last-Modified").map(str::to_string),
        })
    }
}

fn meta_path(data_path: &Path) -> PathBuf {
    let mut name = data_path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta");
    data_path.with_file_name(name)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), TransportError> {
    let dir = path.parent().expect("cache paths have a parent");
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile_in(dir, path)?;
    tmp.1.write_all(bytes).map_err(io_err(&tmp.0))?;
    tmp.1.sync_all().map_err(io_err(&tmp.0))?;
    drop(tmp.1);
    fs::rename(&tmp.0, path).map_err(io_err(path))
}

fn tempfile_in(dir: &Path, target: &Path) -> Result<(PathBuf, fs::File), TransportError> {
    static COUNTER: AtomicUsize = AtomicUsize::new(0);
    let stem = target.file_name().unwrap_or_default().to_string_lossy();
    loop {
        let n = COUNTER.fetch_add(1, Ordering::Relaxed);
        let candidate = dir.join(format!(".{stem}.{}.{n}.tmp", std::process::id()));
        match fs::OpenOptions::new().write(true).create_new(true).open(&candidate) {
            Ok(f) => return Ok((candidate, f)),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(io_err(&candidate)(e)),
        }
    }
}

/// Reads a cached index and checks it against its sidecar.
pub fn read_cache(data_path: &Path) -> Result<Option<(CacheEntry, String)>, TransportError> {
    let meta = meta_path(data_path);
    let meta_text = match fs::read_to_string(&meta) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io_err(&meta)(e)),
    };
    let entry = parse_stanzas(&meta_text)
        .ok()
        .and_then(|s| s.first().and_then(CacheEntry::from_stanza))
        .ok_or_else(|| TransportError::CorruptCache(meta.clone()))?;
    let bytes = match fs::read(data_path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Err(TransportError::CorruptCache(data_path.to_path_buf()))
        }
        Err(e) => return Err(io_err(data_path)(e)),
    };
    if sha256_hex(&bytes) != entry.sha256 {
        return Err(TransportError::CorruptCache(data_path.to_path_buf()));
    }
    let text = String::from_utf8(bytes).map_err(|_| TransportError::CorruptCache(data_path.to_path_buf()))?;
    Ok(Some((entry, text)))
}

fn decode(path: &str, bytes: Vec<u8>, gzipped: bool) -> Result<String, TransportError> {
    let raw = if gzipped {
        let mut out = Vec::new();
        GzDecoder::new(bytes.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| TransportError::DecompressError {
                path: path.to_string(),
                reason: e.to_string(),
            })?;
        out
    } else {
        bytes
    };
    String::from_utf8(raw).map_err(|e| TransportError::DecompressError {
        path: path.to_string(),
        reason: format!("index is not UTF-8: {e}"),
    })
}

/// `Release` SHA256 entries keyed by relative path.
pub fn parse_release_digests(repo_id: &str, text: &str) -> Result<BTreeMap<String, String>, TransportError> {
    let stanzas = parse_stanzas(text).map_err(|source| TransportError::BadRelease {
        repo_id: repo_id.to_string(),
        source,
    })?;
    let mut digests = BTreeMap::new();
    if let Some(field) = stanzas.first().and_then(|s| s.get("SHA256")) {
        for line in field.lines() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if let [digest, _size, path] = parts[..] {
                digests.insert(path.to_string(), digest.to_ascii_lowercase());
            }
        }
    }
    Ok(digests)
}

fn check_against_release(
    repo: &Repository,
    digests: Option<&BTreeMap<String, String>>,
    path: &str,
    bytes: &[u8],
) -> Result<(), TransportError> {
    match digests.and_then(|d| d.get(path)) {
        Some(expected) => match verify_checksum(bytes, expected)? {
            ChecksumCheck::Ok => Ok(()),
            ChecksumCheck::Mismatch { actual } => Err(TransportError::ChecksumMismatch {
                path: path.to_string(),
                expected: expected.clone(),
                actual,
            }),
        },
        None if repo.strict_checksums => Err(TransportError::MissingChecksum { path: path.to_string() }),
        None => {
            if digests.is_some() {
                warn!("{}: no SHA256 entry for {path} in Release, not verified", repo.id);
            }
            Ok(())
        }
    }
}

fn local_root(base_url: &str, base_dir: Option<&Path>) -> Option<PathBuf> {
    if let Some(path) = base_url.strip_prefix("file://") {
        return Some(PathBuf::from(path));
    }
    if base_url.contains("://") {
        return None;
    }
    let path = PathBuf::from(base_url);
    Some(match base_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path,
    })
}

/// Fetches indices for a set of repositories.
pub struct Fetcher {
    cache_dir: PathBuf,
    offline: bool,
    base_dir: Option<PathBuf>,
    parallelism: usize,
    agent: ureq::Agent,
}

enum HttpOutcome {
    Body {
        bytes: Vec<u8>,
        last_modified: Option<String>,
    },
    NotModified,
    NotFound,
}

impl Fetcher {
    pub fn new(cache_dir: impl Into<PathBuf>, offline: bool) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        Self {
            cache_dir: cache_dir.into(),
            offline,
            base_dir: None,
            parallelism: DEFAULT_PARALLELISM,
            agent,
        }
    }

    /// Directory relative local repository paths are resolved against
    /// (usually the directory holding the configuration file).
    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = Some(dir.into());
        self
    }

    pub fn with_parallelism(mut self, n: usize) -> Self {
        self.parallelism = n.max(1);
        self
    }

    pub fn cache_dir(&self) -> &Path {
        &self.cache_dir
    }

    pub fn fetch_index(&self, desc: &IndexDescriptor, repos: &[Repository]) -> Result<String, TransportError> {
        let repo = repos
            .iter()
            .find(|r| r.id == desc.repo_id)
            .ok_or_else(|| TransportError::UnknownRepo(desc.repo_id.clone()))?;
        match local_root(&repo.base_url, self.base_dir.as_deref()) {
            Some(root) => self.fetch_local(desc, repo, &root),
            None if self.offline => self.fetch_cached(desc, repo),
            None => self.fetch_remote(desc, repo),
        }
    }

    /// Fetches every descriptor, at most `parallelism` at a time. Results
    /// come back in input order.
    pub fn fetch_many(&self, descs: &[IndexDescriptor], repos: &[Repository]) -> Vec<Result<String, TransportError>> {
        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<Option<Result<String, TransportError>>>> =
            Mutex::new((0..descs.len()).map(|_| None).collect());
        let workers = self.parallelism.min(descs.len()).max(1);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(desc) = descs.get(i) else { break };
                    let result = self.fetch_index(desc, repos);
                    results.lock().expect("no panics while holding the lock")[i] = Some(result);
                });
            }
        });
        results
            .into_inner()
            .expect("workers finished")
            .into_iter()
            .map(|r| r.expect("every slot filled"))
            .collect()
    }

    fn release_dir_local(repo: &Repository, root: &Path) -> PathBuf {
        if repo.flat {
            root.to_path_buf()
        } else {
            root.join("dists").join(&repo.dist)
        }
    }

    fn fetch_local(&self, desc: &IndexDescriptor, repo: &Repository, root: &Path) -> Result<String, TransportError> {
        let dir = Self::release_dir_local(repo, root);
        let release_path = dir.join("Release");
        let digests = match fs::read_to_string(&release_path) {
            Ok(text) => Some(parse_release_digests(&repo.id, &text)?),
            Err(e) if e.kind() == io::ErrorKind::NotFound => None,
            Err(e) => return Err(io_err(&release_path)(e)),
        };
        if digests.is_none() {
            if repo.strict_checksums {
                return Err(TransportError::MissingChecksum {
                    path: release_path.display().to_string(),
                });
            }
            debug!("{}: no Release file, indices not verified", repo.id);
        }
        let rel = desc.relative_path(repo);
        for (path, gz) in [(rel.clone(), false), (format!("{rel}.gz"), true)] {
            let file = dir.join(&path);
            match fs::read(&file) {
                Ok(bytes) => {
                    check_against_release(repo, digests.as_ref(), &path, &bytes)?;
                    return decode(&path, bytes, gz);
                }
                Err(e) if e.kind() == io::ErrorKind::NotFound => continue,
                Err(e) => return Err(io_err(&file)(e)),
            }
        }
        Err(TransportError::NotFound(dir.join(rel).display().to_string()))
    }

    fn fetch_cached(&self, desc: &IndexDescriptor, repo: &Repository) -> Result<String, TransportError> {
        let data_path = desc.cache_path(repo, &self.cache_dir);
        match read_cache(&data_path)? {
            Some((_, text)) => Ok(text),
            None => Err(TransportError::NotInCache {
                repo_id: repo.id.clone(),
                path: desc.relative_path(repo),
            }),
        }
    }

    fn release_url(repo: &Repository) -> String {
        let base = repo.base_url.trim_end_matches('/');
        if repo.flat {
            base.to_string()
        } else {
            format!("{base}/dists/{}", repo.dist)
        }
    }

    fn http_get(&self, url: &str, if_modified_since: Option<&str>) -> Result<HttpOutcome, TransportError> {
        let net = |reason: String| TransportError::NetworkError {
            url: url.to_string(),
            reason,
        };
        let mut request = self.agent.get(url);
        if let Some(since) = if_modified_since {
            request = request.header("If-Modified-Since", since);
        }
        let mut response = request.call().map_err(|e| net(e.to_string()))?;
        match response.status().as_u16() {
            200 => {
                let last_modified = response
                    .headers()
                    .get("last-modified")
                    .and_then(|v| v.to_str().ok())
                    .map(str::to_string);
                let bytes = response
                    .body_mut()
                    .with_config()
                    .limit(u64::MAX)
                    .read_to_vec()
                    .map_err(|e| net(e.to_string()))?;
                Ok(HttpOutcome::Body { bytes, last_modified })
            }
            304 => Ok(HttpOutcome::NotModified),
            404 | 410 => Ok(HttpOutcome::NotFound),
            status => Err(net(format!("HTTP status {status}"))),
        }
    }

    fn fetch_remote(&self, desc: &IndexDescriptor, repo: &Repository) -> Result<String, TransportError> {
        let release_url = Self::release_url(repo);
        let digests = match self.http_get(&format!("{release_url}/Release"), None)? {
            HttpOutcome::Body { bytes, .. } => {
                let text = String::from_utf8_lossy(&bytes);
                Some(parse_release_digests(&repo.id, &text)?)
            }
            HttpOutcome::NotFound => {
                if repo.strict_checksums {
                    return Err(TransportError::MissingChecksum {
                        path: format!("{release_url}/Release"),
                    });
                }
                warn!("{}: no Release file, indices not verified", repo.id);
                None
            }
            HttpOutcome::NotModified => None,
        };

        let data_path = desc.cache_path(repo, &self.cache_dir);
        let cached = read_cache(&data_path).unwrap_or_else(|e| {
            warn!("ignoring unusable cache entry: {e}");
            None
        });
        let rel = desc.relative_path(repo);
        for (path, gz) in [(rel.clone(), false), (format!("{rel}.gz"), true)] {
            let since = cached
                .as_ref()
                .filter(|(entry, _)| entry.path == path)
                .and_then(|(entry, _)| entry.last_modified.as_deref());
            let url = format!("{release_url}/{path}");
            match self.http_get(&url, since)? {
                HttpOutcome::NotFound => continue,
                HttpOutcome::NotModified => match cached {
                    Some((_, text)) => return Ok(text),
                    None => {
                        return Err(TransportError::NetworkError {
                            url,
                            reason: "304 Not Modified without a cached copy".into(),
                        })
                    }
                },
                HttpOutcome::Body { bytes, last_modified } => {
                    check_against_release(repo, digests.as_ref(), &path, &bytes)?;
                    let text = decode(&path, bytes, gz)?;
                    self.store(&data_path, &repo.id, &path, &text, last_modified, cached.as_ref())?;
                    return Ok(text);
                }
            }
        }
        Err(TransportError::NotFound(format!("{release_url}/{rel}")))
    }

    fn store(
        &self,
        data_path: &Path,
        repo_id: &str,
        path: &str,
        text: &str,
        last_modified: Option<String>,
        previous: Option<&(CacheEntry, String)>,
    ) -> Result<(), TransportError> {
        let sha256 = sha256_hex(text.as_bytes());
        if let Some((entry, _)) = previous {
            if entry.sha256 == sha256 && entry.path == path && entry.last_modified == last_modified {
                return Ok(());
            }
        }
        let entry = CacheEntry {
            repo_id: repo_id.to_string(),
            path: path.to_string(),
            sha256,
            fetched_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            size: text.len() as u64,
            last_modified,
        };
        write_atomic(data_path, text.as_bytes())?;
        let meta = serialize_stanzas(&[entry.to_stanza()]).expect("cache metadata is well-formed");
        write_atomic(&meta_path(data_path), meta.as_bytes())
    }
}

/// Convenience wrapper over [`Fetcher::fetch_index`].
pub fn fetch_index(
    desc: &IndexDescriptor,
    repos: &[Repository],
    cache_dir: &Path,
    offline: bool,
) -> Result<String, TransportError> {
    Fetcher::new(cache_dir, offline).fetch_index(desc, repos)
}
