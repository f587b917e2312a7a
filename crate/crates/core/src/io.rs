//! Plain-text formats for tensors, masks, decompositions and rank-one results.
//!
//! Every file starts with `key=value` header lines, followed by one record
//! per line. Blank lines and lines starting with `#` are skipped. Indices in
//! files are 1-based; floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::decompose::{MatrixDecomposition, MatrixFactor};
use crate::error::{Error, Result};
use crate::instance::GroundTruth;
use crate::mask::SampleMask;
use crate::rank_one::Rank1CPS;
use crate::tensor::{CMatrix, CVector, Tensor4, C64};

struct Lines {
    lines: Vec<(usize, String)>,
    pos: usize,
}

impl Lines {
    fn read(r: impl BufRead) -> Result<Self> {
        let mut lines = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                lines.push((i + 1, t.to_string()));
            }
        }
        Ok(Self { lines, pos: 0 })
    }

    fn last_line(&self) -> usize {
        self.lines.last().map_or(0, |l| l.0)
    }

    fn next(&mut self, what: &str) -> Result<(usize, &str)> {
        match self.lines.get(self.pos) {
            Some((no, s)) => {
                self.pos += 1;
                Ok((*no, s.as_str()))
            }
            None => Err(Error::Parse {
                line: self.last_line() + 1,
                msg: format!("unexpected end of input, expected {what}"),
            }),
        }
    }

    fn header(&mut self, key: &str) -> Result<(usize, String)> {
        let (no, s) = self.next(key)?;
        match s.split_once('=') {
            Some((k, v)) if k.trim() == key => Ok((no, v.trim().to_string())),
            _ => Err(parse_err(
                no,
                format!("expected header `{key}=...`, found `{s}`"),
            )),
        }
    }

    fn header_parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (no, v) = self.header(key)?;
        v.parse()
            .map_err(|_| parse_err(no, format!("invalid value `{v}` for `{key}`")))
    }

    fn expect_header(&mut self, key: &str, value: &str) -> Result<()> {
        let (no, v) = self.header(key)?;
        if v != value {
            return Err(parse_err(
                no,
                format!("`{key}` must be `{value}`, found `{v}`"),
            ));
        }
        Ok(())
    }

    fn complex(&mut self) -> Result<C64> {
        let (no, s) = self.next("`re im` record")?;
        let f = floats(no, s, 2)?;
        Ok(C64::new(f[0], f[1]))
    }

    fn finish(&self) -> Result<()> {
        match self.lines.get(self.pos) {
            Some((no, s)) => Err(parse_err(*no, format!("trailing record `{s}`"))),
            None => Ok(()),
        }
    }
}

fn parse_err(line: usize, msg: String) -> Error {
    Error::Parse { line, msg }
}

fn floats(no: usize, s: &str, count: usize) -> Result<Vec<f64>> {
    let f: Vec<f64> = s
        .split_whitespace()
        .map(|x| x.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(no, format!("{e} in `{s}`")))?;
    if f.len() != count {
        return Err(parse_err(
            no,
            format!("expected {count} numbers, found {}", f.len()),
        ));
    }
    if f.iter().any(|x| !x.is_finite()) {
        return Err(parse_err(no, format!("non-finite value in `{s}`")));
    }
    Ok(f)
}

fn push_complex(out: &mut String, z: C64) {
    let _ = writeln!(out, "{:e} {:e}", z.re, z.im);
}

pub fn tensor_to_string(t: &Tensor4) -> String {
    let mut out = format!("n={}\norder=4\nfield=complex\n", t.n());
    for &z in t.as_slice() {
        push_complex(&mut out, z);
    }
    out
}

pub fn read_tensor(r: impl BufRead) -> Result<Tensor4> {
    let mut lines = Lines::read(r)?;
    let n: usize = lines.header_parsed("n")?;
    if n == 0 {
        return Err(parse_err(1, "n must be positive".into()));
    }
    lines.expect_header("order", "4")?;
    lines.expect_header("field", "complex")?;
    let data = (0..n.pow(4))
        .map(|_| lines.complex())
        .collect::<Result<Vec<_>>>()?;
    lines.finish()?;
    Tensor4::from_vec(n, data)
}

pub fn mask_to_string(m: &SampleMask) -> String {
    let mut out = format!("n={}\n", m.n());
    for [i, j, k, l] in m.indices() {
        let _ = writeln!(out, "{} {} {} {}", i + 1, j + 1, k + 1, l + 1);
    }
    out
}

/// Reads a mask. An orbit-incomplete set is closed when `close` is set and
/// rejected otherwise.
pub fn read_mask(r: impl BufRead, close: bool) -> Result<SampleMask> {
    let mut lines = Lines::read(r)?;
    let n: usize = lines.header_parsed("n")?;
    let mut mask = SampleMask::empty(n);
    while let Ok((no, s)) = lines.next("") {
        let q: Vec<usize> = s
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(no, format!("{e} in `{s}`")))?;
        if q.len() != 4 || q.iter().any(|&x| x == 0 || x > n) {
            return Err(parse_err(
                no,
                format!("`{s}` is not a quadruple in 1..={n}"),
            ));
        }
        mask.insert([q[0] - 1, q[1] - 1, q[2] - 1, q[3] - 1]);
    }
    if close {
        mask.close();
    }
    mask.require_closed()?;
    Ok(mask)
}

pub fn decomposition_to_string(d: &MatrixDecomposition) -> String {
    let mut out = format!(
        "n={}\ncount={}\nconjugated_second={}\n",
        d.n,
        d.len(),
        d.conjugated_second
    );
    for f in &d.factors {
        let _ = writeln!(out, "lambda={:e}", f.lambda);
        for i in 0..d.n {
            for j in 0..d.n {
                push_complex(&mut out, f.matrix[(i, j)]);
            }
        }
    }
    out
}

pub fn read_decomposition(r: impl BufRead) -> Result<MatrixDecomposition> {
    let mut lines = Lines::read(r)?;
    let n: usize = lines.header_parsed("n")?;
    let count: usize = lines.header_parsed("count")?;
    let conjugated_second: bool = lines.header_parsed("conjugated_second")?;
    let mut factors = Vec::with_capacity(count);
    for _ in 0..count {
        let lambda: f64 = lines.header_parsed("lambda")?;
        let entries = (0..n * n)
            .map(|_| lines.complex())
            .collect::<Result<Vec<_>>>()?;
        factors.push(MatrixFactor {
            lambda,
            matrix: CMatrix::from_row_slice(n, n, &entries),
        });
    }
    lines.finish()?;
    Ok(MatrixDecomposition {
        n,
        factors,
        conjugated_second,
    })
}

pub fn rank1_to_string(r: &Rank1CPS) -> String {
    let mut out = format!("n={}\nlambda={:e}\n", r.n(), r.lambda);
    for &z in r.x.iter() {
        push_complex(&mut out, z);
    }
    out
}

pub fn read_rank1(r: impl BufRead) -> Result<Rank1CPS> {
    let mut lines = Lines::read(r)?;
    let n: usize = lines.header_parsed("n")?;
    let lambda: f64 = lines.header_parsed("lambda")?;
    let x = (0..n)
        .map(|_| lines.complex())
        .collect::<Result<Vec<_>>>()?;
    lines.finish()?;
    Ok(Rank1CPS {
        lambda,
        x: CVector::from_vec(x),
    })
}

fn push_real_matrix(out: &mut String, m: &nalgebra::DMatrix<f64>) {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

/// Ground truth of a generated instance. Matrix factors use the
/// decomposition format; the other forms list their coefficients followed by
/// vectors (`re im` per entry) or real matrices (one row per line).
pub fn truth_to_string(truth: &GroundTruth) -> String {
    match truth {
        GroundTruth::Matrix(d) => decomposition_to_string(d),
        GroundTruth::Rank1(r) => rank1_to_string(r),
        GroundTruth::VectorSum(vs) => {
            let n = vs.first().map_or(0, |v| v.len());
            let mut out = format!(
                "n={n}
count={}
form=sum a o a o conj(a) o conj(a)
",
                vs.len()
            );
            for v in vs {
                out.push_str("vector\n");
                for &z in v.iter() {
                    push_complex(&mut out, z);
                }
            }
            out
        }
        GroundTruth::VectorPairs(ps) => {
            let n = ps.first().map_or(0, |f| f.p.len());
            let mut out = format!(
                "n={n}
count={}
form=sum c (p o p o q o q + q o q o p o p)
",
                ps.len()
            );
            for f in ps {
                let _ = writeln!(out, "coeff={:e}", f.coeff);
                for v in [&f.p, &f.q] {
                    let row: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
                    let _ = writeln!(out, "{}", row.join(" "));
                }
            }
            out
        }
        GroundTruth::Skew(fs) => {
            let n = fs.first().map_or(0, |f| f.u.nrows());
            let mut out = format!(
                "n={n}
count={}
form=sum c (U o V - V o U)
",
                fs.len()
            );
            for f in fs {
                let _ = writeln!(out, "coeff={:e}", f.coeff);
                push_real_matrix(&mut out, &f.u);
                push_real_matrix(&mut out, &f.v);
            }
            out
        }
    }
}

/// Real matrix with a scalar weight, as produced by PLMA.
pub fn weighted_matrix_to_string(weight: f64, m: &nalgebra::DMatrix<f64>) -> String {
    let mut out = format!(
        "rows={}\ncols={}\nalpha={:e}\n",
        m.nrows(),
        m.ncols(),
        weight
    );
    push_real_matrix(&mut out, m);
    out
}

pub fn load_tensor(path: &std::path::Path) -> Result<Tensor4> {
    read_tensor(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn load_mask(path: &std::path::Path, close: bool) -> Result<SampleMask> {
    read_mask(std::io::BufReader::new(std::fs::File::open(path)?), close)
}

pub fn load_decomposition(path: &std::path::Path) -> Result<MatrixDecomposition> {
    read_decomposition(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn save(path: &std::path::Path, contents: &str) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(contents.as_bytes())?;
    f.flush()?;
    Ok(())
}
