//! Input CSV parsing and the coreset file formats.
//!
//! Binary layout (little-endian): magic `TCS1`, version `u32`, `n u64`,
//! `m u64`, `d u64`, `Δ f64`, kind `u8`, `ε f64`, seed `u64`, construction
//! name as `u32` length plus UTF-8 bytes, then `m` rows of `d` coordinates
//! followed by the weight.

use std::fmt;
use std::io::{self, Read, Write};

use ndarray::{Array1, Array2};

use crate::coreset::Coreset;
use crate::linalg::PointSet;

pub const MAGIC: &[u8; 4] = b"TCS1";
pub const VERSION: u32 = 1;

/// Failures while reading or writing files; all map to exit code 1.
#[derive(Debug)]
pub struct FormatError(pub String);

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for FormatError {}

impl From<io::Error> for FormatError {
    fn from(e: io::Error) -> Self {
        FormatError(format!("i/o error: {e}"))
    }
}

impl From<crate::Error> for FormatError {
    fn from(e: crate::Error) -> Self {
        FormatError(e.to_string())
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T, FormatError> {
    Err(FormatError(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Subspace,
    Affine,
    KMeans,
}

impl ProblemKind {
    fn code(self) -> u8 {
        match self {
            ProblemKind::Subspace => 0,
            ProblemKind::Affine => 1,
            ProblemKind::KMeans => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(ProblemKind::Subspace),
            1 => Some(ProblemKind::Affine),
            2 => Some(ProblemKind::KMeans),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Subspace => "subspace",
            ProblemKind::Affine => "affine",
            ProblemKind::KMeans => "kmeans",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        [ProblemKind::Subspace, ProblemKind::Affine, ProblemKind::KMeans]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Header {
    pub version: u32,
    /// Number of input points summarized.
    pub n: u64,
    pub kind: ProblemKind,
    pub eps: f64,
    pub seed: u64,
    pub construction: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoresetFile {
    pub header: Header,
    pub coreset: Coreset,
}

impl CoresetFile {
    pub fn is_streamed(&self) -> bool {
        self.header.construction.starts_with("stream-")
    }
}

pub fn write_binary<W: Write>(file: &CoresetFile, out: &mut W) -> Result<(), FormatError> {
    let h = &file.header;
    let c = &file.coreset;
    let mut buf = Vec::with_capacity(64 + c.len() * (c.d() + 1) * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&h.version.to_le_bytes());
    buf.extend_from_slice(&h.n.to_le_bytes());
    buf.extend_from_slice(&(c.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(c.d() as u64).to_le_bytes());
    buf.extend_from_slice(&c.delta().to_le_bytes());
    buf.push(h.kind.code());
    buf.extend_from_slice(&h.eps.to_le_bytes());
    buf.extend_from_slice(&h.seed.to_le_bytes());
    let name = h.construction.as_bytes();
    buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
    buf.extend_from_slice(name);
    for (row, w) in c.points().outer_iter().zip(c.weights().iter()) {
        for x in row.iter() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        buf.extend_from_slice(&w.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8], FormatError> {
        if self.bytes.len() - self.pos < k {
            return bad("truncated coreset file");
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_binary(bytes: &[u8]) -> Result<CoresetFile, FormatError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return bad("not a TCS1 coreset file");
    }
    let version = cur.u32()?;
    if version != VERSION {
        return bad(format!("unsupported coreset file version {version}"));
    }
    let n = cur.u64()?;
    let m = cur.u64()? as usize;
    let d = cur.u64()? as usize;
    let delta = cur.f64()?;
    let code = cur.take(1)?[0];
    let Some(kind) = ProblemKind::from_code(code) else {
        return bad(format!("unknown problem kind {code}"));
    };
    let eps = cur.f64()?;
    let seed = cur.u64()?;
    let len = cur.u32()? as usize;
    let construction = String::from_utf8(cur.take(len)?.to_vec())
        .map_err(|_| FormatError("construction name is not UTF-8".into()))?;
    let need = m.checked_mul(d + 1).and_then(|c| c.checked_mul(8));
    if need != Some(bytes.len() - cur.pos) {
        return bad(format!("coreset file holds {} payload bytes, header promises {m} rows of {d} columns", bytes.len() - cur.pos));
    }
    let mut points = Array2::zeros((m, d));
    let mut weights = Array1::zeros(m);
    for i in 0..m {
        for x in points.row_mut(i).iter_mut() {
            *x = cur.f64()?;
        }
        weights[i] = cur.f64()?;
    }
    let coreset = Coreset::new(points, weights, delta)?;
    Ok(CoresetFile {
        header: Header {
            version,
            n,
            kind,
            eps,
            seed,
            construction,
        },
        coreset,
    })
}

/// `#`-prefixed header lines, then one `coords..., weight` row per point.
/// `f64` display is the shortest representation that parses back exactly.
pub fn write_csv<W: Write>(file: &CoresetFile, out: &mut W) -> Result<(), FormatError> {
    let h = &file.header;
    let c = &file.coreset;
    let mut s = String::new();
    s.push_str(&format!("# version={}\n", h.version));
    s.push_str(&format!("# n={}\n# m={}\n# d={}\n", h.n, c.len(), c.d()));
    s.push_str(&format!("# delta={}\n", c.delta()));
    s.push_str(&format!("# kind={}\n# epsilon={}\n# seed={}\n", h.kind.name(), h.eps, h.seed));
    s.push_str(&format!("# construction={}\n", h.construction));
    for (row, w) in c.points().outer_iter().zip(c.weights().iter()) {
        for x in row.iter() {
            s.push_str(&format!("{x},"));
        }
        s.push_str(&format!("{w}\n"));
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub fn read_csv(text: &str) -> Result<CoresetFile, FormatError> {
    let mut fields = std::collections::HashMap::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                fields.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(col, f)| parse_field(f, no + 1, col + 1))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return bad(format!("line {}: expected {} fields, found {}", no + 1, first.len(), row.len()));
            }
        }
        rows.push(row);
    }
    let get = |k: &str| fields.get(k).ok_or_else(|| FormatError(format!("coreset header lacks '{k}'")));
    let num = |k: &str| -> Result<f64, FormatError> {
        get(k)?.parse::<f64>().map_err(|_| FormatError(format!("header field '{k}' is not a number")))
    };
    let int = |k: &str| -> Result<u64, FormatError> {
        get(k)?.parse::<u64>().map_err(|_| FormatError(format!("header field '{k}' is not an integer")))
    };
    let version = int("version")? as u32;
    if version != VERSION {
        return bad(format!("unsupported coreset file version {version}"));
    }
    let m = int("m")? as usize;
    let d = int("d")? as usize;
    if rows.len() != m {
        return bad(format!("header promises {m} rows, found {}", rows.len()));
    }
    if rows.iter().any(|r| r.len() != d + 1) {
        return bad(format!("rows must hold {d} coordinates and a weight"));
    }
    let kind_name = get("kind")?;
    let Some(kind) = ProblemKind::from_name(kind_name) else {
        return bad(format!("unknown problem kind '{kind_name}'"));
    };
    let mut points = Array2::zeros((m, d));
    let mut weights = Array1::zeros(m);
    for (i, r) in rows.iter().enumerate() {
        for (c, x) in r[..d].iter().enumerate() {
            points[[i, c]] = *x;
        }
        weights[i] = r[d];
    }
    let coreset = Coreset::new(points, weights, num("delta")?)?;
    Ok(CoresetFile {
        header: Header {
            version,
            n: int("n")?,
            kind,
            eps: num("epsilon")?,
            seed: int("seed")?,
            construction: get("construction")?.clone(),
        },
        coreset,
    })
}

/// Reads either format, detected by the magic bytes.
pub fn read_coreset(bytes: &[u8]) -> Result<CoresetFile, FormatError> {
    if bytes.starts_with(MAGIC) {
        read_binary(bytes)
    } else {
        let text = std::str::from_utf8(bytes).map_err(|_| FormatError("coreset file is neither TCS1 nor UTF-8 text".into()))?;
        read_csv(text)
    }
}

fn parse_field(f: &str, line: usize, col: usize) -> Result<f64, FormatError> {
    let t = f.trim();
    match t.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        Ok(_) => bad(format!("line {line}, column {col}: non-finite value '{t}'")),
        Err(_) => bad(format!("line {line}, column {col}: cannot parse '{t}' as a number")),
    }
}

/// How to read input rows.
#[derive(Clone, Copy, Debug, Default)]
pub struct CsvOptions {
    /// Last column is a weight.
    pub weighted: bool,
    /// Skip the first line.
    pub header: bool,
}

/// Streaming reader of input rows; yields `(line number, coordinates, weight)`.
pub struct RowReader<R: Read> {
    inner: csv::Reader<R>,
    opts: CsvOptions,
    record: csv::StringRecord,
    width: Option<usize>,
}

impl<R: Read> RowReader<R> {
    pub fn new(source: R, opts: CsvOptions) -> Self {
        let inner = csv::ReaderBuilder::new()
            .has_headers(opts.header)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(source);
        RowReader {
            inner,
            opts,
            record: csv::StringRecord::new(),
            width: None,
        }
    }

    /// Next row, `Ok(None)` at end of input. A malformed row yields an error
    /// but leaves the reader usable for the following rows.
    pub fn next_row(&mut self) -> Result<Option<(u64, Vec<f64>, f64)>, FormatError> {
        loop {
            match self.inner.read_record(&mut self.record) {
                Ok(false) => return Ok(None),
                Ok(true) => {}
                Err(e) => {
                    let line = e.position().map(|p| p.line()).unwrap_or(0);
                    return bad(format!("line {line}: {e}"));
                }
            }
            let line = self.record.position().map(|p| p.line()).unwrap_or(0);
            if self.record.len() == 1 && self.record[0].is_empty() {
                continue;
            }
            let width = *self.width.get_or_insert(self.record.len());
            if self.record.len() != width {
                return bad(format!("line {line}: expected {width} fields, found {}", self.record.len()));
            }
            let mut vals = self
                .record
                .iter()
                .enumerate()
                .map(|(c, f)| parse_field(f, line as usize, c + 1))
                .collect::<Result<Vec<_>, _>>()?;
            let w = if self.opts.weighted {
                if vals.len() < 2 {
                    return bad(format!("line {line}: weighted rows need coordinates and a weight"));
                }
                let w = vals.pop().unwrap();
                if w < 0.0 {
                    return bad(format!("line {line}: negative weight {w}"));
                }
                w
            } else {
                1.0
            };
            return Ok(Some((line, vals, w)));
        }
    }
}

/// Reads a whole input file; malformed rows abort with their line number.
pub fn read_points<R: Read>(source: R, opts: CsvOptions) -> Result<PointSet, FormatError> {
    let mut reader = RowReader::new(source, opts);
    let mut data = Vec::new();
    let mut weights = Vec::new();
    let mut d = 0;
    while let Some((_, row, w)) = reader.next_row()? {
        d = row.len();
        data.extend(row);
        weights.push(w);
    }
    if weights.is_empty() {
        return bad("empty input");
    }
    let rows = Array2::from_shape_vec((weights.len(), d), data).map_err(|e| FormatError(e.to_string()))?;
    let points = if opts.weighted {
        PointSet::with_weights(rows, Array1::from(weights))?
    } else {
        PointSet::new(rows)?
    };
    Ok(points)
}

/// Writes points as plain CSV rows.
pub fn write_rows<W: Write>(rows: ndarray::ArrayView2<'_, f64>, out: &mut W) -> io::Result<()> {
    for row in rows.outer_iter() {
        let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sample() -> CoresetFile {
        let c = Coreset::new(array![[0.1, -2.5e-300], [1.0 / 3.0, 7.0]], array![1.5, 0.25], 0.125).unwrap();
        CoresetFile {
            header: Header {
                version: VERSION,
                n: 10,
                kind: ProblemKind::KMeans,
                eps: 0.5,
                seed: 7,
                construction: "kmeans-sensitivity".into(),
            },
            coreset: c,
        }
    }

    #[test]
    fn binary_round_trip() {
        let f = sample();
        let mut buf = Vec::new();
        write_binary(&f, &mut buf).unwrap();
        assert_eq!(read_coreset(&buf).unwrap(), f);
    }

    #[test]
    fn csv_round_trip() {
        let f = sample();
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        assert_eq!(read_coreset(&buf).unwrap(), f);
    }

    #[test]
    fn truncated_binary_rejected() {
        let mut buf = Vec::new();
        write_binary(&sample(), &mut buf).unwrap();
        buf.pop();
        assert!(read_binary(&buf).is_err());
    }

    #[test]
    fn line_numbers_in_errors() {
        let err = read_points("1,2\n3,x\n".as_bytes(), CsvOptions::default()).unwrap_err();
        assert!(err.0.contains("line 2"), "{}", err.0);
        let err = read_points("1,2\n3\n".as_bytes(), CsvOptions::default()).unwrap_err();
        assert!(err.0.contains("line 2"), "{}", err.0);
    }

    #[test]
    fn header_and_weights() {
        let p = read_points("x,y,weight\n1,2,3\n4,5,0.5\n".as_bytes(), CsvOptions { weighted: true, header: true }).unwrap();
        assert_eq!(p.n(), 2);
        assert_eq!(p.d(), 2);
        assert_eq!(p.weight(0), 3.0);
    }

    #[test]
    fn empty_input() {
        assert_eq!(read_points("".as_bytes(), CsvOptions::default()).unwrap_err().0, "empty input");
    }
}
