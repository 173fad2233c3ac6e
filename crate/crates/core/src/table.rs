//! Reference tables: the canonical-order probability at every positive
//! composition of a fixed total, persisted as diffable text.
//!
//! ```text
//! ruinlab-table v1 k=3 N=300 method=jacobi
//! # certified gap 4.000e-12 after 180000 sweeps
//! 1 1 298 4.9666666666666665e-01
//! ...
//! ```

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::exact::ExactChain;
use crate::jacobi::{jacobi_solve_3, jacobi_solve_4, JacobiOptions};
use crate::lattice::{composition_count, composition_rank, Compositions};
use crate::model::{canonicalize, CapitalVector, EliminationOrder, Engine, OrderDistribution};

pub const TABLE_ENV: &str = "RUINLAB_TABLES";
const MAGIC: &str = "ruinlab-table v1";

/// Engines able to produce a full table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMethod {
    Exact,
    Jacobi,
}

impl TableMethod {
    pub fn tag(self) -> &'static str {
        match self {
            TableMethod::Exact => "exact",
            TableMethod::Jacobi => "jacobi",
        }
    }
}

impl FromStr for TableMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(TableMethod::Exact),
            "jacobi" => Ok(TableMethod::Jacobi),
            other => Err(Error::Parse {
                what: "table method",
                detail: format!("`{other}` (expected exact or jacobi)"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTable {
    k: usize,
    n: u64,
    method: String,
    note: Option<String>,
    entries: Vec<f64>,
}

impl ReferenceTable {
    /// `entries` must follow the lexicographic composition order.
    pub fn from_entries(
        k: usize,
        n: u64,
        method: impl Into<String>,
        note: Option<String>,
        entries: Vec<f64>,
    ) -> Result<Self> {
        let want = composition_count(k, n) as usize;
        if entries.len() != want {
            return Err(Error::Parse {
                what: "table",
                detail: format!("expected {want} entries for k={k}, N={n}, got {}", entries.len()),
            });
        }
        if let Some(bad) = entries.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Parse {
                what: "table",
                detail: format!("entry {bad} outside [0, 1]"),
            });
        }
        Ok(Self {
            k,
            n,
            method: method.into(),
            note,
            entries,
        })
    }

    pub fn players(&self) -> usize {
        self.k
    }

    pub fn total(&self) -> u64 {
        self.n
    }

    pub fn method(&self) -> &str {
        &self.method
    }

    /// Free-form precision note (for Jacobi tables, the certified gap).
    pub fn note(&self) -> Option<&str> {
        self.note.as_deref()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Canonical-order probability at a positive composition of `N`.
    pub fn get(&self, stacks: &[u64]) -> Result<f64> {
        if stacks.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                got: stacks.len(),
            });
        }
        composition_rank(stacks, self.n)
            .map(|i| self.entries[i])
            .ok_or_else(|| Error::NotInTable(stacks.to_vec()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vec<u64>, f64)> + '_ {
        Compositions::new(self.k, self.n).zip(self.entries.iter().copied())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{MAGIC} k={} N={} method={}", self.k, self.n, self.method)?;
        if let Some(note) = &self.note {
            for line in note.lines() {
                writeln!(w, "# {line}")?;
            }
        }
        let mut line = String::new();
        for (stacks, v) in self.iter() {
            line.clear();
            for s in &stacks {
                write!(line, "{s} ").expect("string write");
            }
            writeln!(w, "{line}{v:.16e}")?;
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        // write to a sibling and rename so readers never see a partial file
        let tmp = path.with_extension("partial");
        {
            let mut w = BufWriter::new(fs::File::create(&tmp)?);
            self.write_to(&mut w)?;
            w.flush()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let bad = |detail: String| Error::Parse {
            what: "table",
            detail,
        };
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))??;
        let rest = header
            .strip_prefix(MAGIC)
            .ok_or_else(|| bad(format!("bad header `{header}`")))?;
        let (mut k, mut n, mut method) = (None, None, None);
        for field in rest.split_whitespace() {
            match field.split_once('=') {
                Some(("k", v)) => k = v.parse::<usize>().ok(),
                Some(("N", v)) => n = v.parse::<u64>().ok(),
                Some(("method", v)) => method = Some(v.to_string()),
                _ => return Err(bad(format!("unknown header field `{field}`"))),
            }
        }
        let (k, n, method) = match (k, n, method) {
            (Some(k), Some(n), Some(m)) if (3..=4).contains(&k) => (k, n, m),
            _ => return Err(bad(format!("incomplete header `{header}`"))),
        };
        let mut notes = Vec::new();
        let mut entries = Vec::with_capacity(composition_count(k, n) as usize);
        let mut expected = Compositions::new(k, n);
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                notes.push(c.trim().to_string());
                continue;
            }
            let mut fields = line.split_whitespace();
            let stacks: Vec<u64> = fields
                .by_ref()
                .take(k)
                .map(|f| f.parse::<u64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(format!("line {}: {e}", lineno + 2)))?;
            let value: f64 = fields
                .next()
                .ok_or_else(|| bad(format!("line {}: missing probability", lineno + 2)))?
                .parse()
                .map_err(|e| bad(format!("line {}: {e}", lineno + 2)))?;
            if expected.next().as_deref() != Some(stacks.as_slice()) {
                return Err(bad(format!(
                    "line {}: composition {stacks:?} out of order",
                    lineno + 2
                )));
            }
            entries.push(value);
        }
        let note = (!notes.is_empty()).then(|| notes.join("\n"));
        Self::from_entries(k, n, method, note, entries)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(fs::File::open(path)?))
    }
}

/// Builds the full canonical table for `(k, n)`.
pub fn generate_table(k: usize, n: u64, method: TableMethod) -> Result<ReferenceTable> {
    generate_table_with(k, n, method, None)
}

/// As [`generate_table`], with an explicit Jacobi iteration policy.
pub fn generate_table_with(
    k: usize,
    n: u64,
    method: TableMethod,
    jacobi: Option<JacobiOptions>,
) -> Result<ReferenceTable> {
    if !(3..=4).contains(&k) {
        return Err(Error::InvalidInput(format!("tables need k in 3..=4, got {k}")));
    }
    match method {
        TableMethod::Exact => {
            let grid = ExactChain::shared().canonical_grid(k, n)?;
            let entries = grid.iter().map(|v| v.to_f64().clamp(0.0, 1.0)).collect();
            ReferenceTable::from_entries(k, n, method.tag(), None, entries)
        }
        TableMethod::Jacobi => {
            let grid = if k == 3 {
                let opts = jacobi.unwrap_or_else(JacobiOptions::three);
                jacobi_solve_3(n, &EliminationOrder::identity(3), &opts)?
            } else {
                let opts = jacobi.unwrap_or_else(JacobiOptions::four);
                jacobi_solve_4(n, &opts)?
            };
            let note = format!(
                "certified gap {:.3e} after {} sweeps",
                grid.gap(),
                grid.iterations()
            );
            ReferenceTable::from_entries(k, n, method.tag(), Some(note), grid.midpoints())
        }
    }
}

/// `P_capitals(sigma)` from a canonical table, by relabeling the players.
pub fn lookup_full(
    table: &ReferenceTable,
    capitals: &CapitalVector,
    sigma: &EliminationOrder,
) -> Result<f64> {
    if capitals.total() != table.total() {
        return Err(Error::Inconsistent(format!(
            "capitals sum to {}, table is for N={}",
            capitals.total(),
            table.total()
        )));
    }
    let (canon, _) = canonicalize(capitals, sigma)?;
    table.get(canon.stacks())
}

/// Every order's probability from a canonical table.
pub fn lookup_distribution(
    table: &ReferenceTable,
    capitals: &CapitalVector,
) -> Result<OrderDistribution> {
    let k = capitals.players();
    let entries = EliminationOrder::all(k)
        .into_iter()
        .map(|o| lookup_full(table, capitals, &o).map(|p| (o, p)))
        .collect::<Result<Vec<_>>>()?;
    let engine = if table.method() == "exact" {
        Engine::Exact
    } else {
        Engine::Jacobi
    };
    OrderDistribution::new(k, entries, engine)
}

/// Table directory: explicit flag, else `$RUINLAB_TABLES`, else `./tables`.
pub fn table_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(TABLE_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("tables"),
    }
}

pub fn table_file_name(k: usize, n: u64) -> String {
    format!("k{k}-N{n}")
}

pub fn table_path(dir: &Path, k: usize, n: u64) -> PathBuf {
    dir.join(table_file_name(k, n))
}

/// Loads `k{k}-N{n}` from `dir`; a missing file is an error, never regenerated.
pub fn load_table(dir: &Path, k: usize, n: u64) -> Result<ReferenceTable> {
    load_table_file(&table_path(dir, k, n), k, n)
}

/// Loads an explicit table file, checking it matches `(k, n)`.
pub fn load_table_file(path: &Path, k: usize, n: u64) -> Result<ReferenceTable> {
    if !path.exists() {
        return Err(Error::MissingTable {
            path: path.to_path_buf(),
            k,
            n,
        });
    }
    let t = ReferenceTable::read(path)?;
    if t.players() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: t.players(),
        });
    }
    Ok(t)
}
