//! Package version strings and their total order.
//!
//! A version is `[epoch:]upstream[-revision]`. Comparison follows the usual
//! distribution policy: epochs numerically, then upstream and revision by
//! alternating non-digit/digit runs, with `~` sorting before everything,
//! including the end of the string.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub const MAX_EPOCH: u32 = i32::MAX as u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VersionError {
    #[error("EmptyVersion")]
    EmptyVersion,
    #[error("BadEpoch: {0:?}")]
    BadEpoch(String),
    #[error("IllegalCharacter: {ch:?} at offset {offset} in {text:?}")]
    IllegalCharacter { text: String, ch: char, offset: usize },
}

/// Equality is structural. Two versions may compare `Equal` under
/// [`compare_versions`] while differing textually (`1.02` and `1.2`), so
/// there is deliberately no `Ord` impl.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Version {
    pub epoch: u32,
    pub upstream: String,
    pub revision: String,
}

impl Version {
    pub fn parse(text: &str) -> Result<Self, VersionError> {
        parse_version(text)
    }

    pub fn is_native(&self) -> bool {
        self.revision.is_empty()
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.epoch != 0 {
            write!(f, "{}:", self.epoch)?;
        }
        f.write_str(&self.upstream)?;
        if !self.revision.is_empty() {
            write!(f, "-{}", self.revision)?;
        }
        Ok(())
    }
}

impl FromStr for Version {
    type Err = VersionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_version(s)
    }
}

pub fn parse_version(text: &str) -> Result<Version, VersionError> {
    if text.is_empty() {
        return Err(VersionError::EmptyVersion);
    }
    let illegal = |ch: char, offset: usize| VersionError::IllegalCharacter {
        text: text.to_string(),
        ch,
        offset,
    };

    let (epoch, rest, rest_offset) = match text.split_once(':') {
        Some((e, rest)) => {
            if e.is_empty() || !e.bytes().all(|b| b.is_ascii_digit()) {
                return Err(VersionError::BadEpoch(e.to_string()));
            }
            let epoch: u32 = e
                .parse()
                .ok()
                .filter(|&n| n <= MAX_EPOCH)
                .ok_or_else(|| VersionError::BadEpoch(e.to_string()))?;
            (epoch, rest, e.len() + 1)
        }
        None => (0, text, 0),
    };

    let (upstream, revision) = match rest.rfind('-') {
        Some(idx) => {
            let revision = &rest[idx + 1..];
            if revision.is_empty() {
                return Err(illegal('-', rest_offset + idx));
            }
            (&rest[..idx], revision)
        }
        None => (rest, ""),
    };

    let Some(first) = upstream.chars().next() else {
        return Err(VersionError::EmptyVersion);
    };
    if !first.is_ascii_alphanumeric() {
        return Err(illegal(first, rest_offset));
    }
    let has_epoch = rest_offset > 0;
    let has_revision = !revision.is_empty();
    for (i, ch) in upstream.char_indices() {
        let ok = ch.is_ascii_alphanumeric()
            || matches!(ch, '.' | '+' | '~')
            || (ch == '-' && has_revision)
            || (ch == ':' && has_epoch);
        if !ok {
            return Err(illegal(ch, rest_offset + i));
        }
    }
    let revision_offset = rest_offset + upstream.len() + 1;
    for (i, ch) in revision.char_indices() {
        if !(ch.is_ascii_alphanumeric() || matches!(ch, '.' | '+' | '~')) {
            return Err(illegal(ch, revision_offset + i));
        }
    }

    Ok(Version {
        epoch,
        upstream: upstream.to_string(),
        revision: revision.to_string(),
    })
}

pub fn compare_versions(a: &Version, b: &Version) -> Ordering {
    a.epoch
        .cmp(&b.epoch)
        .then_with(|| compare_part(&a.upstream, &b.upstream))
        .then_with(|| compare_part(&a.revision, &b.revision))
}

/// Sort weight of one byte inside a non-digit run. End of string is 0.
fn char_order(c: Option<u8>) -> i32 {
    match c {
        None => 0,
        Some(b'~') => -1,
        Some(c) if c.is_ascii_alphabetic() => c as i32,
        Some(c) => c as i32 + 256,
    }
}

fn compare_part(a: &str, b: &str) -> Ordering {
    let (mut a, mut b) = (a.as_bytes(), b.as_bytes());
    while !a.is_empty() || !b.is_empty() {
        let a_len = a.iter().take_while(|c| !c.is_ascii_digit()).count();
        let b_len = b.iter().take_while(|c| !c.is_ascii_digit()).count();
        let (a_str, a_rest) = a.split_at(a_len);
        let (b_str, b_rest) = b.split_at(b_len);
        for i in 0..a_len.max(b_len) {
            let ord = char_order(a_str.get(i).copied()).cmp(&char_order(b_str.get(i).copied()));
            if ord != Ordering::Equal {
                return ord;
            }
        }
        a = a_rest;
        b = b_rest;

        let a_len = a.iter().take_while(|c| c.is_ascii_digit()).count();
        let b_len = b.iter().take_while(|c| c.is_ascii_digit()).count();
        let (a_num, a_rest) = a.split_at(a_len);
        let (b_num, b_rest) = b.split_at(b_len);
        let ord = compare_digits(a_num, b_num);
        if ord != Ordering::Equal {
            return ord;
        }
        a = a_rest;
        b = b_rest;
    }
    Ordering::Equal
}

// Arbitrary-length digit runs: strip leading zeros, then length, then lexical.
fn compare_digits(a: &[u8], b: &[u8]) -> Ordering {
    let strip = |s: &[u8]| -> usize { s.iter().take_while(|&&c| c == b'0').count() };
    let a = &a[strip(a)..];
    let b = &b[strip(b)..];
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}
