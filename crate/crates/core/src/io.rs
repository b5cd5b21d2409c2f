//! On-disk forms: profile CSV, solution and constants JSON, stability tables.
//! Every writer goes through [`write_atomic`].

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ansatz::{BundleConfig, CurvatureConstants};
use crate::error::{Error, Result};
use crate::grid::{GridScheme, Profile, ProfileGrid};
use crate::solver::{Method, ResidualReport, SolitonSolution};
use crate::stability::StabilityReport;

/// Writes to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let mut file = fs::File::create(&tmp)?;
    file.write_all(bytes)?;
    file.sync_all()?;
    drop(file);
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Pretty JSON with a trailing newline, written atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// `t,f,df,ddf,l1,dl1,ddl1,…,u,du,ddu`.
pub fn profile_header(factor_count: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    let mut push = |name: &str| {
        h.push(name.to_string());
        h.push(format!("d{name}"));
        h.push(format!("dd{name}"));
    };
    push("f");
    for i in 1..=factor_count {
        push(&format!("l{i}"));
    }
    push("u");
    h
}

pub fn profile_csv(grid: &ProfileGrid) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(profile_header(grid.factor_count()))?;
    let mut row = Vec::new();
    for k in 0..grid.len() {
        row.clear();
        row.push(grid.t[k]);
        for p in std::iter::once(&grid.f).chain(&grid.l).chain(std::iter::once(&grid.u)) {
            row.extend([p.value[k], p.d1[k], p.d2[k]]);
        }
        w.write_record(row.iter().map(|x| format!("{x:e}")))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Parses a profile CSV back into a grid; the node layout is checked against `scheme`.
pub fn read_profile_csv(bytes: &[u8], scheme: GridScheme) -> Result<ProfileGrid> {
    let mut r = csv::Reader::from_reader(bytes);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.len() < 7 || !(header.len() - 7).is_multiple_of(3) {
        return Err(Error::Grid(format!("profile header has {} columns", header.len())));
    }
    let factor_count = (header.len() - 7) / 3;
    if header != profile_header(factor_count) {
        return Err(Error::Grid(format!("unexpected profile header: {}", header.join(","))));
    }
    let mut columns = vec![Vec::new(); header.len()];
    for (line, record) in r.records().enumerate() {
        let record = record?;
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Grid(format!("row {}: {field:?} is not a number", line + 1)))?;
            if !v.is_finite() {
                return Err(Error::Grid(format!("row {}: non-finite value", line + 1)));
            }
            columns[c].push(v);
        }
    }
    let mut cols = columns.into_iter();
    let t = cols.next().unwrap_or_default();
    let mut take = || Profile {
        value: cols.next().unwrap_or_default(),
        d1: cols.next().unwrap_or_default(),
        d2: cols.next().unwrap_or_default(),
    };
    let f = take();
    let l: Vec<Profile> = (0..factor_count).map(|_| take()).collect();
    let u = take();
    ProfileGrid::new(scheme, t, f, l, u)
}

/// JSON report stored next to a profile CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub config: BundleConfig,
    pub c_slope: f64,
    pub gauge_shift: f64,
    pub residuals: ResidualReport,
    pub method: Method,
    pub nodes: usize,
    pub scheme: GridScheme,
    pub length: f64,
    pub constants: CurvatureConstants,
    pub roots: Vec<f64>,
}

impl SolutionRecord {
    pub fn new(sol: &SolitonSolution) -> Self {
        Self {
            config: sol.config.clone(),
            c_slope: sol.c_slope,
            gauge_shift: sol.gauge_shift,
            residuals: sol.residuals.clone(),
            method: sol.method,
            nodes: sol.grid.len(),
            scheme: sol.grid.scheme,
            length: sol.grid.length(),
            constants: sol.constants.clone(),
            roots: sol.roots.clone(),
        }
    }

    /// Reattaches a grid read from disk; shapes must agree with the record.
    pub fn into_solution(self, grid: ProfileGrid) -> Result<SolitonSolution> {
        if grid.len() != self.nodes {
            return Err(Error::Grid(format!(
                "profile has {} nodes, report says {}",
                grid.len(),
                self.nodes
            )));
        }
        if grid.factor_count() != self.config.factor_count() {
            return Err(Error::FactorMismatch {
                grid: grid.factor_count(),
                config: self.config.factor_count(),
            });
        }
        Ok(SolitonSolution {
            grid,
            config: self.config,
            constants: self.constants,
            c_slope: self.c_slope,
            gauge_shift: self.gauge_shift,
            residuals: self.residuals,
            method: self.method,
            roots: self.roots,
        })
    }
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn save_solution(dir: &Path, stem: &str, sol: &SolitonSolution) -> Result<()> {
    write_atomic(&dir.join(format!("{stem}.csv")), &profile_csv(&sol.grid)?)?;
    write_json(&dir.join(format!("{stem}.json")), &SolutionRecord::new(sol))
}

pub fn load_solution(dir: &Path, stem: &str) -> Result<SolitonSolution> {
    let record: SolutionRecord = read_json(&dir.join(format!("{stem}.json")))?;
    let bytes = fs::read(dir.join(format!("{stem}.csv")))?;
    let grid = read_profile_csv(&bytes, record.scheme)?;
    record.into_solution(grid)
}

pub fn read_constants(path: &Path) -> Result<CurvatureConstants> {
    CurvatureConstants::from_json(&fs::read_to_string(path)?)
}

pub const STABILITY_HEADER: [&str; 5] = ["profile-id", "value", "sign", "C_hg", "v_h_norm"];

/// One row per profile; an empty slice yields the header alone.
pub fn stability_csv(rows: &[(String, StabilityReport)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(STABILITY_HEADER)?;
    for (id, r) in rows {
        w.write_record([
            id.clone(),
            format!("{:e}", r.value),
            r.sign.as_str().to_string(),
            format!("{:e}", r.c_hg),
            format!("{:e}", r.v_h_norm),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}
