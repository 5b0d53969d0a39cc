//! Input files and CSV output.
//!
//! * Map / pair file: first record is the dimension `n`; every further row
//!   holds `x_1..x_n, xi_1..xi_n`. Repeated `x` rows accumulate values.
//! * Quadruple file: rows `n, x_1..x_n, y_1..y_n, xi_1..xi_n, zeta_1..zeta_n`;
//!   a first row that does not parse as numbers is taken as a header.
//! * Density grid file: first line `n`, then `n` lines `min max res`, then
//!   the cell values in row-major order (last axis fastest), separated by
//!   whitespace or commas.

use std::io::Write;
use std::path::Path;

use hmono::form::Quadruple;
use hmono::map::MultiMap;
use hmono::measure::{Grid, GridMeasure};
use hmono::DVector;

use crate::CliError;

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))
}

fn parse_record(record: &csv::StringRecord, path: &Path, line: usize) -> Result<Vec<f64>, CliError> {
    record
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Input(format!("{}:{line}: bad number '{f}'", path.display())))
        })
        .collect()
}

fn records(path: &Path) -> Result<Vec<(usize, csv::StringRecord)>, CliError> {
    let mut out = Vec::new();
    for (i, rec) in reader(path)?.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        out.push((i + 1, rec));
    }
    Ok(out)
}

/// Dimension and `(x, xi)` rows of a map or pair file.
pub fn read_pairs(path: &Path) -> Result<(usize, Vec<(DVector<f64>, DVector<f64>)>), CliError> {
    let recs = records(path)?;
    let (first_line, first) = recs
        .first()
        .ok_or_else(|| CliError::Input(format!("{} is empty", path.display())))?;
    let n: usize = first
        .get(0)
        .and_then(|f| f.parse().ok())
        .filter(|&n: &usize| n >= 1 && first.len() == 1)
        .ok_or_else(|| CliError::Input(format!("{}:{first_line}: expected the dimension n alone", path.display())))?;
    let mut pairs = Vec::new();
    for (line, rec) in &recs[1..] {
        let vals = parse_record(rec, path, *line)?;
        if vals.len() != 2 * n {
            return Err(CliError::Input(format!(
                "{}:{line}: expected {} columns, found {}",
                path.display(),
                2 * n,
                vals.len()
            )));
        }
        pairs.push((
            DVector::from_column_slice(&vals[..n]),
            DVector::from_column_slice(&vals[n..]),
        ));
    }
    Ok((n, pairs))
}

pub fn read_map(path: &Path) -> Result<MultiMap, CliError> {
    let (n, pairs) = read_pairs(path)?;
    if pairs.is_empty() {
        return Err(CliError::Input(format!("{} has no rows", path.display())));
    }
    Ok(MultiMap::from_pairs(n, pairs)?)
}

pub fn read_quadruples(path: &Path) -> Result<Vec<Quadruple>, CliError> {
    let mut out = Vec::new();
    for (idx, (line, rec)) in records(path)?.iter().enumerate() {
        if idx == 0 && rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let vals = parse_record(rec, path, *line)?;
        let n = vals[0];
        if !(n >= 1.0 && n.fract() == 0.0) || vals.len() != 1 + 4 * n as usize {
            return Err(CliError::Input(format!(
                "{}:{line}: expected n followed by 4n values",
                path.display()
            )));
        }
        let n = n as usize;
        let part = |k: usize| DVector::from_column_slice(&vals[1 + k * n..1 + (k + 1) * n]);
        out.push(Quadruple::new(part(0), part(1), part(2), part(3))?);
    }
    if out.is_empty() {
        return Err(CliError::Input(format!("{} has no quadruples", path.display())));
    }
    Ok(out)
}

pub fn read_density(path: &Path) -> Result<GridMeasure, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let bad = |msg: &str| CliError::Input(format!("{}: {msg}", path.display()));
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty());
    let n: usize = lines
        .next()
        .and_then(|l| l.parse().ok())
        .filter(|&n: &usize| n >= 1)
        .ok_or_else(|| bad("first line must be the dimension"))?;
    let (mut min, mut max, mut res) = (Vec::new(), Vec::new(), Vec::new());
    for axis in 0..n {
        let fields: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad("missing axis line"))?
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let parsed = match fields.as_slice() {
            [a, b, r] => a.parse::<f64>().ok().zip(b.parse::<f64>().ok()).zip(r.parse::<usize>().ok()),
            _ => None,
        };
        let ((a, b), r) = parsed.ok_or_else(|| bad(&format!("axis {axis}: expected 'min max res'")))?;
        min.push(a);
        max.push(b);
        res.push(r);
    }
    let values: Vec<f64> = lines
        .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| bad(&format!("bad density value '{s}'"))))
        .collect::<Result<_, _>>()?;
    let grid = Grid::new(min, max, res)?;
    Ok(GridMeasure::new(grid, values)?)
}

/// CSV writer over a file or stdout.
pub fn writer(out: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>, CliError> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(
            std::fs::File::create(p).map_err(|e| CliError::Input(format!("cannot create {}: {e}", p.display())))?,
        ),
        None => Box::new(std::io::stdout()),
    };
    Ok(csv::WriterBuilder::new().flexible(true).from_writer(sink))
}

pub fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_all<'a, I: IntoIterator<Item = &'a f64>>(vals: I) -> Vec<String> {
    vals.into_iter().map(|v| fmt(*v)).collect()
}

/// Writes a map file.
pub fn write_map(out: Option<&Path>, map: &MultiMap) -> Result<(), CliError> {
    let mut w = writer(out)?;
    w.write_record([map.dim().to_string()])?;
    for entry in map.entries() {
        for v in &entry.values {
            let row: Vec<String> = fmt_all(entry.x.iter().chain(v.iter()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
