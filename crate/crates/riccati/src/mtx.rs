//! Reader and writer for the Matrix Market text exchange format
//! (`coordinate` and `array` variants, real general entries).

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Result, RiccatiError};

/// Storage variant of a parsed matrix-exchange file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtxFormat {
    Coordinate,
    Array,
}

impl MtxFormat {
    pub fn id(&self) -> &'static str {
        match self {
            MtxFormat::Coordinate => "coordinate",
            MtxFormat::Array => "array",
        }
    }
}

/// A parsed matrix: dimensions plus entries in triplet form
/// (array files expand to one triplet per entry).
#[derive(Debug, Clone)]
pub struct ParsedMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub format: MtxFormat,
    pub triplets: Vec<(usize, usize, f64)>,
}

impl ParsedMatrix {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for &(i, j, v) in &self.triplets {
            m[(i, j)] += v;
        }
        m
    }
}

fn parse_err(path: &Path, msg: impl Into<String>) -> RiccatiError {
    RiccatiError::Parse {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

pub fn read_matrix(path: &Path) -> Result<ParsedMatrix> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();

    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, "empty file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() < 4 || !fields[0].starts_with("%%MatrixMarket") {
        return Err(parse_err(path, "missing %%MatrixMarket header"));
    }
    let format = match fields[2] {
        "coordinate" => MtxFormat::Coordinate,
        "array" => MtxFormat::Array,
        other => return Err(parse_err(path, format!("unsupported format '{other}'"))),
    };
    if fields[3] != "real" {
        return Err(parse_err(path, format!("unsupported field '{}'", fields[3])));
    }
    if let Some(sym) = fields.get(4) {
        if *sym != "general" {
            return Err(parse_err(path, format!("unsupported symmetry '{sym}'")));
        }
    }

    let mut data_lines = lines.filter(|l| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let size_line = data_lines
        .next()
        .ok_or_else(|| parse_err(path, "missing size line"))?;
    let dims: Vec<&str> = size_line.split_whitespace().collect();

    match format {
        MtxFormat::Coordinate => {
            if dims.len() != 3 {
                return Err(parse_err(path, "coordinate size line needs 'rows cols nnz'"));
            }
            let nrows: usize = dims[0].parse().map_err(|_| parse_err(path, "bad rows"))?;
            let ncols: usize = dims[1].parse().map_err(|_| parse_err(path, "bad cols"))?;
            let nnz: usize = dims[2].parse().map_err(|_| parse_err(path, "bad nnz"))?;
            let mut triplets = Vec::with_capacity(nnz);
            for line in data_lines {
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() != 3 {
                    return Err(parse_err(path, format!("bad entry line '{line}'")));
                }
                let i: usize = f[0].parse().map_err(|_| parse_err(path, "bad row index"))?;
                let j: usize = f[1].parse().map_err(|_| parse_err(path, "bad col index"))?;
                let v: f64 = f[2].parse().map_err(|_| parse_err(path, "bad value"))?;
                if i == 0 || j == 0 || i > nrows || j > ncols {
                    return Err(parse_err(path, format!("index ({i},{j}) out of bounds")));
                }
                triplets.push((i - 1, j - 1, v));
            }
            if triplets.len() != nnz {
                return Err(parse_err(
                    path,
                    format!("expected {nnz} entries, found {}", triplets.len()),
                ));
            }
            Ok(ParsedMatrix {
                nrows,
                ncols,
                format,
                triplets,
            })
        }
        MtxFormat::Array => {
            if dims.len() != 2 {
                return Err(parse_err(path, "array size line needs 'rows cols'"));
            }
            let nrows: usize = dims[0].parse().map_err(|_| parse_err(path, "bad rows"))?;
            let ncols: usize = dims[1].parse().map_err(|_| parse_err(path, "bad cols"))?;
            let mut values = Vec::with_capacity(nrows * ncols);
            for line in data_lines {
                for tok in line.split_whitespace() {
                    let v: f64 = tok.parse().map_err(|_| parse_err(path, "bad value"))?;
                    values.push(v);
                }
            }
            if values.len() != nrows * ncols {
                return Err(parse_err(
                    path,
                    format!("expected {} entries, found {}", nrows * ncols, values.len()),
                ));
            }
            // column-major order per the format definition
            let mut triplets = Vec::with_capacity(values.len());
            for j in 0..ncols {
                for i in 0..nrows {
                    triplets.push((i, j, values[j * nrows + i]));
                }
            }
            Ok(ParsedMatrix {
                nrows,
                ncols,
                format,
                triplets,
            })
        }
    }
}

pub fn write_dense(path: &Path, m: &DMatrix<f64>, format: MtxFormat) -> Result<()> {
    let mut out = String::new();
    match format {
        MtxFormat::Array => {
            out.push_str("%%MatrixMarket matrix array real general\n");
            out.push_str(&format!("{} {}\n", m.nrows(), m.ncols()));
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    // shortest round-trip formatting keeps array files bit-exact
                    out.push_str(&format!("{}\n", m[(i, j)]));
                }
            }
        }
        MtxFormat::Coordinate => {
            let mut entries = Vec::new();
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    if m[(i, j)] != 0.0 {
                        entries.push((i, j, m[(i, j)]));
                    }
                }
            }
            out.push_str("%%MatrixMarket matrix coordinate real general\n");
            out.push_str(&format!("{} {} {}\n", m.nrows(), m.ncols(), entries.len()));
            for (i, j, v) in entries {
                out.push_str(&format!("{} {} {:.17e}\n", i + 1, j + 1, v));
            }
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}
