//! Oracles and generators shared by the property suites and the
//! acceptance target. None of this calls into the code under test except
//! where noted.

#![allow(dead_code)]

use std::cmp::Ordering;

use backport_pilot_core::deb822::Stanza;
use backport_pilot_core::depends::Universe;
use backport_pilot_core::version::parse_version;
use proptest::prelude::*;

pub mod http;

/// Straight port of the reference character-weight version comparison,
/// working on raw strings.
pub mod reference {
    use std::cmp::Ordering;

    fn weight(c: Option<u8>) -> i32 {
        match c {
            None => 0,
            Some(b'~') => -1,
            Some(c) if c.is_ascii_digit() => 0,
            Some(c) if c.is_ascii_alphabetic() => c as i32,
            Some(c) => c as i32 + 256,
        }
    }

    fn is_digit(s: &[u8], i: usize) -> bool {
        s.get(i).is_some_and(u8::is_ascii_digit)
    }

    fn part(a: &str, b: &str) -> Ordering {
        let (a, b) = (a.as_bytes(), b.as_bytes());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            while (i < a.len() && !is_digit(a, i)) || (j < b.len() && !is_digit(b, j)) {
                let (wa, wb) = (weight(a.get(i).copied()), weight(b.get(j).copied()));
                if wa != wb {
                    return wa.cmp(&wb);
                }
                i += 1;
                j += 1;
            }
            while a.get(i) == Some(&b'0') {
                i += 1;
            }
            while b.get(j) == Some(&b'0') {
                j += 1;
            }
            let mut first_diff = 0i32;
            while is_digit(a, i) && is_digit(b, j) {
                if first_diff == 0 {
                    first_diff = a[i] as i32 - b[j] as i32;
                }
                i += 1;
                j += 1;
            }
            if is_digit(a, i) {
                return Ordering::Greater;
            }
            if is_digit(b, j) {
                return Ordering::Less;
            }
            if first_diff != 0 {
                return first_diff.cmp(&0);
            }
        }
        Ordering::Equal
    }

    fn split(v: &str) -> (u64, &str, &str) {
        let (epoch, rest) = match v.split_once(':') {
            Some((e, r)) => (e.parse().unwrap(), r),
            None => (0, v),
        };
        match rest.rfind('-') {
            Some(i) => (epoch, &rest[..i], &rest[i + 1..]),
            None => (epoch, rest, ""),
        }
    }

    pub fn compare(a: &str, b: &str) -> Ordering {
        let (ea, ua, ra) = split(a);
        let (eb, ub, rb) = split(b);
        ea.cmp(&eb).then_with(|| part(ua, ub)).then_with(|| part(ra, rb))
    }
}

/// Expected results come from `dpkg --compare-versions`.
pub const PAIRS: &[(&str, &str, Ordering)] = &[
    ("2.0.5-1", "2.1.0-1", Ordering::Less),
    ("4.5-1", "4.5-1", Ordering::Equal),
    ("1.0~rc1", "1.0", Ordering::Less),
    ("1.0~~", "1.0~", Ordering::Less),
    ("1.0~", "1.0", Ordering::Less),
    ("1.0", "1.0+b1", Ordering::Less),
    ("1.0", "1.0.0", Ordering::Less),
    ("1.0-1", "1.0-1ubuntu1", Ordering::Less),
    ("1:0.1", "2.0", Ordering::Greater),
    ("1:1.0", "0:9.9", Ordering::Greater),
    ("0:1.0", "1.0", Ordering::Equal),
    ("1.2", "1.02", Ordering::Equal),
    ("1.10", "1.9", Ordering::Greater),
    ("1.0a", "1.0+", Ordering::Less),
    ("1.0a", "1.0.", Ordering::Less),
    ("1.0.1", "1.0a", Ordering::Greater),
    ("5.3-3ubuntu3", "5.3-4ubuntu2", Ordering::Less),
    ("5.3-4ubuntu2", "5.5-1ubuntu1", Ordering::Less),
    ("2.0.2-1-precise1", "2.1.0-1-0ubuntu1", Ordering::Less),
    ("2.0.0-beta6-3u", "2.0.5-1", Ordering::Less),
    ("0.10.1+dfsg-1", "0.10.1+dfsg-1-precise1", Ordering::Less),
    ("2.1.4-1", "2.1.5-1", Ordering::Less),
    ("0.9.6.1-1", "0.9.9-2", Ordering::Less),
    ("1.1.10-1", "1.1.12-1", Ordering::Less),
    ("1.0.86-1", "1.0.90-1", Ordering::Less),
    ("2.1.0-1", "2.2.0-0ubuntu1", Ordering::Less),
    ("3.4-3build1", "3.4-3ubuntu1", Ordering::Less),
    ("4.0.3b-3ubuntu1", "4.0.3b-4", Ordering::Less),
    ("4.0.3b-4", "4.0.3b-5", Ordering::Less),
    ("1.6.2-2ubuntu1", "1.6.2-3ubuntu1", Ordering::Less),
    ("2.0.3-1", "2.0.6-1", Ordering::Less),
    ("2.0.6-1", "2.0.8-0ubuntu1", Ordering::Less),
    ("1.0.3-rc3-0ubuntu1", "1.0.4.1-1-precise1", Ordering::Less),
    ("0.6.0.1-1build", "0.7.5.1-1", Ordering::Less),
    ("9.20120115ubuntu3", "9.20120608ubuntu1", Ordering::Less),
    ("1.0-0", "1.0", Ordering::Equal),
    ("1.0", "1.0-0.1", Ordering::Less),
    ("00001.0", "1.0", Ordering::Equal),
    ("1.0~beta", "1.0~alpha", Ordering::Greater),
    ("7:1", "6:99999", Ordering::Greater),
    ("2147483647:1", "2147483646:9", Ordering::Greater),
    ("1.0-1~bpo1", "1.0-1", Ordering::Less),
    ("1.0+dfsg", "1.0", Ordering::Greater),
    ("1.0-a", "1.0-0", Ordering::Greater),
];

pub fn version_text() -> impl Strategy<Value = String> {
    let epoch = prop_oneof![3 => Just(String::new()), 1 => (0u32..4).prop_map(|e| format!("{e}:"))];
    let revision = prop_oneof![Just(String::new()), "[0-9a-z.+~]{1,4}".prop_map(|r| format!("-{r}"))];
    (epoch, "[0-9][0-9a-z.+~]{0,6}", revision).prop_map(|(e, u, r)| format!("{e}{u}{r}"))
}

// Dependency instances -------------------------------------------------

pub const NAMES: [&str; 4] = ["aa", "bb", "cc", "mta"];
pub const VERSIONS: [&str; 6] = ["1.0", "1.0-1", "1.1", "2.0~rc1", "2.0", "1:0.5"];
pub const OPS: [&str; 5] = ["<<", "<=", "=", ">=", ">>"];

#[derive(Debug, Clone)]
pub struct Package {
    pub name: String,
    pub version: String,
    pub provides: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Atom {
    pub name: String,
    pub constraint: Option<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub packages: Vec<Package>,
    pub clauses: Vec<Vec<Atom>>,
}

impl Instance {
    pub fn universe(&self) -> Universe {
        let mut u = Universe::new();
        for p in &self.packages {
            u.add(&p.name, parse_version(&p.version).unwrap(), p.provides.iter().cloned());
        }
        u
    }

    pub fn relation_text(&self) -> String {
        self.clauses
            .iter()
            .map(|c| c.iter().map(Atom::text).collect::<Vec<_>>().join(" | "))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl Atom {
    pub fn text(&self) -> String {
        match &self.constraint {
            Some((op, v)) => format!("{} ({op} {v})", self.name),
            None => self.name.clone(),
        }
    }
}

fn package() -> impl Strategy<Value = Package> {
    (
        prop::sample::select(&NAMES[..]),
        prop::sample::select(&VERSIONS[..]),
        prop::sample::subsequence(&NAMES[..], 0..=2),
    )
        .prop_map(|(n, v, p)| Package {
            name: n.to_string(),
            version: v.to_string(),
            provides: p.into_iter().filter(|x| *x != n).map(str::to_string).collect(),
        })
}

fn atom() -> impl Strategy<Value = Atom> {
    (
        prop::sample::select(&NAMES[..]),
        prop::option::of((prop::sample::select(&OPS[..]), prop::sample::select(&VERSIONS[..]))),
    )
        .prop_map(|(n, c)| Atom {
            name: n.to_string(),
            constraint: c.map(|(o, v)| (o.to_string(), v.to_string())),
        })
}

/// At most 6 packages and 4 clauses of up to 3 alternatives.
pub fn instance() -> impl Strategy<Value = Instance> {
    (
        prop::collection::vec(package(), 0..=6),
        prop::collection::vec(prop::collection::vec(atom(), 1..=3), 0..=4),
    )
        .prop_map(|(packages, clauses)| Instance { packages, clauses })
}

fn op_holds(op: &str, ord: Ordering) -> bool {
    match op {
        "<<" => ord == Ordering::Less,
        "<=" => ord != Ordering::Greater,
        "=" => ord == Ordering::Equal,
        ">=" => ord != Ordering::Less,
        ">>" => ord == Ordering::Greater,
        _ => unreachable!(),
    }
}

/// Every package that satisfies `atom`, found by scanning the whole list.
pub fn satisfiers(atom: &Atom, packages: &[Package]) -> Vec<String> {
    packages
        .iter()
        .filter(|p| match &atom.constraint {
            Some((op, v)) => p.name == atom.name && op_holds(op, reference::compare(&p.version, v)),
            None => p.name == atom.name || p.provides.contains(&atom.name),
        })
        .map(|p| p.name.clone())
        .collect()
}

pub fn brute_force(clause: &[Atom], packages: &[Package]) -> Vec<String> {
    clause.iter().flat_map(|a| satisfiers(a, packages)).collect()
}

// Stanzas ----------------------------------------------------------------

fn field_name() -> impl Strategy<Value = String> {
    "[A-Za-z0-9][!-9;-~]{0,12}"
}

/// Any value that survives serialization: printable ASCII, first line
/// not starting with a blank, continuation lines that are not a lone `.`.
fn field_value() -> impl Strategy<Value = String> {
    let first = "([!-~][ -~]{0,20})?";
    let rest = prop::collection::vec("([!-~][ -~]{0,15})?", 0..4);
    (first, rest).prop_map(|(first, rest)| {
        let mut v = first;
        for line in rest {
            v.push('\n');
            if line != "." {
                v.push_str(&line);
            }
        }
        v
    })
}

pub fn stanza() -> impl Strategy<Value = Stanza> {
    prop::collection::vec((field_name(), field_value()), 1..6).prop_map(|fields| {
        let mut s = Stanza::new();
        let mut seen = Vec::<String>::new();
        for (n, v) in fields {
            if seen.iter().any(|x| x.eq_ignore_ascii_case(&n)) {
                continue;
            }
            seen.push(n.clone());
            s.set(n, v);
        }
        s
    })
}

// Table 1 fixture ----------------------------------------------------------

/// Loads the committed Table 1 fixture and compares reports against the
/// printed table. The printed table is read with a plain tab split so the
/// report parser is not its own oracle.
pub mod table1 {
    use std::path::{Path, PathBuf};

    use backport_pilot_core::catalog::{load_config, Role};
    use backport_pilot_core::deb822::parse_stanzas;
    use backport_pilot_core::ledger::{load_ledger, Ledger};
    use backport_pilot_core::pipeline::build_catalog;
    use backport_pilot_core::selector::{select_candidates, CandidateDecision, WatchList};
    use backport_pilot_core::transport::Fetcher;
    use backport_pilot_core::Catalog;

    pub fn dir() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/table1")
    }

    pub fn read(name: &str) -> String {
        std::fs::read_to_string(dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
    }

    pub struct Run {
        pub catalog: Catalog,
        pub decisions: Vec<CandidateDecision>,
        pub ledger: Ledger,
    }

    /// Fixture catalog, selection over the watch list, and the event log.
    pub fn load(cache: &Path) -> Run {
        let repos = load_config(&read("backport-pilot.conf")).unwrap();
        let fetcher = Fetcher::new(cache, true).with_base_dir(dir());
        let catalog = build_catalog(&repos, &fetcher, "amd64").unwrap();
        let watch = WatchList::parse(&read("biolist.txt")).unwrap();
        let decisions = select_candidates(&catalog, Some(&watch)).unwrap();
        let ledger = load_ledger(&dir().join("table1.ledger")).unwrap();
        Run {
            catalog,
            decisions,
            ledger,
        }
    }

    pub fn enabled_extra_labels(catalog: &Catalog) -> Vec<String> {
        catalog
            .repositories()
            .iter()
            .filter(|r| r.role == Role::ExtraEnabled)
            .map(|r| r.label().to_string())
            .collect()
    }

    pub struct Table {
        pub header: Vec<String>,
        pub rows: Vec<Vec<String>>,
    }

    impl Table {
        pub fn parse(text: &str) -> Table {
            let mut lines = text.lines().filter(|l| !l.trim().is_empty());
            let header = lines
                .next()
                .unwrap()
                .split('\t')
                .map(|h| match h.trim().trim_end_matches(':') {
                    "Sonstiges" => "Notes".to_string(),
                    h => h.to_string(),
                })
                .collect::<Vec<_>>();
            let rows = lines
                .map(|l| {
                    let mut cells: Vec<String> = l.split('\t').map(|c| c.trim().to_string()).collect();
                    cells.resize(header.len(), String::new());
                    cells
                })
                .collect();
            Table { header, rows }
        }

        pub fn column(&self, name: &str) -> usize {
            self.header
                .iter()
                .position(|h| h == name)
                .unwrap_or_else(|| panic!("no column {name}"))
        }

        pub fn row(&self, package: &str) -> Option<&Vec<String>> {
            self.rows.iter().find(|r| r[0] == package)
        }

        pub fn cell(&self, package: &str, column: &str) -> Option<&str> {
            Some(self.row(package)?[self.column(column)].as_str())
        }
    }

    /// The printed table with the documented transcription repairs applied.
    pub fn printed_table() -> Table {
        let mut table = Table::parse(&read("table1.tsv"));
        for a in parse_stanzas(&read("anomalies")).unwrap() {
            let field = |n: &str| a.get(n).unwrap().trim().to_string();
            let (column, printed, fixture) = (field("Column"), field("Printed"), field("Fixture"));
            let col = table.column(&column);
            let row = if col == 0 {
                table.rows.iter_mut().find(|r| r[0] == printed)
            } else {
                let package = field("Package");
                table.rows.iter_mut().find(|r| r[0] == package)
            }
            .unwrap_or_else(|| panic!("anomaly row {printed} not in table"));
            assert_eq!(row[col], printed, "anomaly does not match the printed cell");
            row[col] = fixture;
        }
        table
    }

    pub const STATUS_COLUMNS: [&str; 3] = ["Building", "Uploaded", "Backported"];

    /// Every cell where `ours` differs from the printed table. A blank
    /// status cell in the printed table reads as "no task".
    pub fn mismatches(printed: &Table, ours: &Table) -> Vec<String> {
        let mut out = Vec::new();
        if printed.header != ours.header {
            out.push(format!("header {:?} != {:?}", printed.header, ours.header));
            return out;
        }
        if printed.rows.len() != ours.rows.len() {
            out.push(format!(
                "{} printed rows, {} produced",
                printed.rows.len(),
                ours.rows.len()
            ));
        }
        for row in &printed.rows {
            let Some(mine) = ours.row(&row[0]) else {
                out.push(format!("{}: missing", row[0]));
                continue;
            };
            for (i, column) in printed.header.iter().enumerate().skip(1) {
                let want = match row[i].as_str() {
                    "" if STATUS_COLUMNS.contains(&column.as_str()) => "no task",
                    cell => cell,
                };
                if mine[i] != want {
                    out.push(format!(
                        "{} / {column}: printed {want:?}, produced {:?}",
                        row[0], mine[i]
                    ));
                }
            }
        }
        out
    }
}
