//! Text serialization of feature matrices and decomposition chains.
//!
//! Both formats start with `# key value` header lines and store numbers with
//! 17 significant digits so files can be diffed across runs.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{GrfError, Result};
use crate::kernel::{ChainFactor, ChainTerm, DecompositionChain, Factor};
use crate::sparse::CsrMatrix;
use crate::walk::{FeatureMatrix, Sampler};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureHeader {
    pub n: usize,
    pub m: usize,
    pub p_term: f64,
    pub sampler: Sampler,
    pub seed: u64,
}

/// `# grf-features` header followed by `i j value` triplets in row order.
pub fn write_feature_matrix<W: Write>(fm: &FeatureMatrix, mut out: W) -> Result<()> {
    writeln!(out, "# grf-features")?;
    writeln!(out, "# n {}", fm.n())?;
    writeln!(out, "# m {}", fm.config.walks_per_node)?;
    writeln!(out, "# p_term {}", fm.config.p_term)?;
    writeln!(out, "# sampler {}", fm.config.sampler)?;
    writeln!(out, "# seed {}", fm.config.master_seed)?;
    for (i, j, v) in fm.rows.triplets() {
        writeln!(out, "{i} {j} {v:.16e}")?;
    }
    Ok(())
}

pub fn read_feature_matrix<R: BufRead>(reader: R) -> Result<(FeatureHeader, CsrMatrix)> {
    let mut lines = Lines::new(reader);
    lines.expect_exact("# grf-features")?;
    let header = FeatureHeader {
        n: lines.header("n")?,
        m: lines.header("m")?,
        p_term: lines.header("p_term")?,
        sampler: lines.header("sampler")?,
        seed: lines.header("seed")?,
    };
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    while let Some(fields) = lines.next_fields()? {
        let line = lines.number;
        if fields.len() != 3 {
            return Err(GrfError::Parse { line, message: "expected `i j value`".into() });
        }
        triplets.push((parse(&fields[0], line)?, parse(&fields[1], line)?, parse(&fields[2], line)?));
    }
    for &(i, j, _) in &triplets {
        if i >= header.n || j >= header.n {
            return Err(GrfError::NodeOutOfRange { node: i.max(j), n: header.n });
        }
    }
    let rows = CsrMatrix::from_triplets(header.n, header.n, &triplets)?;
    Ok((header, rows))
}

/// `# grf-chain` header, then per term a `term <scale> <factors>` line and
/// per factor a manifest line `factor <sparse|dense> <rows> <cols>
/// <plain|transposed> <count>` followed by its entries (`i j value` triplets
/// for sparse factors, one row of values per line for dense ones).
pub fn write_chain<W: Write>(chain: &DecompositionChain, mut out: W) -> Result<()> {
    writeln!(out, "# grf-chain")?;
    writeln!(out, "# n {}", chain.n())?;
    writeln!(out, "# terms {}", chain.terms().len())?;
    writeln!(out, "# preprocessing_flops {}", chain.preprocessing_flops)?;
    for term in chain.terms() {
        writeln!(out, "term {:.16e} {}", term.scale, term.factors.len())?;
        for f in &term.factors {
            let orient = if f.transposed { "transposed" } else { "plain" };
            match &f.factor {
                Factor::Sparse(m) => {
                    writeln!(out, "factor sparse {} {} {orient} {}", m.nrows(), m.ncols(), m.nnz())?;
                    for (i, j, v) in m.triplets() {
                        writeln!(out, "{i} {j} {v:.16e}")?;
                    }
                }
                Factor::Dense(m) => {
                    writeln!(out, "factor dense {} {} {orient} {}", m.nrows(), m.ncols(), m.nrows())?;
                    for row in m.row_iter() {
                        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
                        writeln!(out, "{}", cells.join(" "))?;
                    }
                }
            }
        }
    }
    Ok(())
}

pub fn read_chain<R: BufRead>(reader: R) -> Result<DecompositionChain> {
    let mut lines = Lines::new(reader);
    lines.expect_exact("# grf-chain")?;
    let n: usize = lines.header("n")?;
    let term_count: usize = lines.header("terms")?;
    let flops: u64 = lines.header("preprocessing_flops")?;
    let mut terms = Vec::with_capacity(term_count);
    for _ in 0..term_count {
        let fields = lines.require()?;
        let line = lines.number;
        if fields.len() != 3 || fields[0] != "term" {
            return Err(GrfError::Parse { line, message: "expected `term <scale> <factors>`".into() });
        }
        let scale: f64 = parse(&fields[1], line)?;
        let factor_count: usize = parse(&fields[2], line)?;
        let mut factors = Vec::with_capacity(factor_count);
        for _ in 0..factor_count {
            factors.push(read_factor(&mut lines)?);
        }
        terms.push(ChainTerm { scale, factors });
    }
    if lines.next_fields()?.is_some() {
        return Err(GrfError::Parse { line: lines.number, message: "trailing content".into() });
    }
    Ok(DecompositionChain::new(n, terms)?.with_flops(flops))
}

fn read_factor<R: BufRead>(lines: &mut Lines<R>) -> Result<ChainFactor> {
    let fields = lines.require()?;
    let line = lines.number;
    if fields.len() != 6 || fields[0] != "factor" {
        return Err(GrfError::Parse { line, message: "expected a factor manifest line".into() });
    }
    let rows: usize = parse(&fields[2], line)?;
    let cols: usize = parse(&fields[3], line)?;
    let transposed = match fields[4].as_str() {
        "plain" => false,
        "transposed" => true,
        other => return Err(GrfError::Parse { line, message: format!("unknown orientation `{other}`") }),
    };
    let count: usize = parse(&fields[5], line)?;
    let factor = match fields[1].as_str() {
        "sparse" => {
            let mut triplets = Vec::with_capacity(count);
            for _ in 0..count {
                let f = lines.require()?;
                let l = lines.number;
                if f.len() != 3 {
                    return Err(GrfError::Parse { line: l, message: "expected `i j value`".into() });
                }
                let (i, j): (usize, usize) = (parse(&f[0], l)?, parse(&f[1], l)?);
                if i >= rows || j >= cols {
                    return Err(GrfError::Parse { line: l, message: format!("entry ({i}, {j}) outside {rows}x{cols}") });
                }
                triplets.push((i, j, parse(&f[2], l)?));
            }
            Factor::Sparse(CsrMatrix::from_triplets(rows, cols, &triplets)?)
        }
        "dense" => {
            if count != rows {
                return Err(GrfError::Parse { line, message: "dense factor must list every row".into() });
            }
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let f = lines.require()?;
                let l = lines.number;
                if f.len() != cols {
                    return Err(GrfError::Parse { line: l, message: format!("expected {cols} values") });
                }
                for t in &f {
                    values.push(parse::<f64>(t, l)?);
                }
            }
            Factor::Dense(DMatrix::from_row_slice(rows, cols, &values))
        }
        other => return Err(GrfError::Parse { line, message: format!("unknown factor kind `{other}`") }),
    };
    Ok(ChainFactor { factor, transposed })
}

fn parse<T: std::str::FromStr>(text: &str, line: usize) -> Result<T> {
    text.parse().map_err(|_| GrfError::Parse { line, message: format!("cannot parse `{text}`") })
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    fn new(reader: R) -> Self {
        Self { inner: reader.lines(), number: 0 }
    }

    fn raw(&mut self) -> Result<Option<String>> {
        match self.inner.next() {
            Some(line) => {
                self.number += 1;
                Ok(Some(line?))
            }
            None => Ok(None),
        }
    }

    fn expect_exact(&mut self, text: &str) -> Result<()> {
        match self.raw()? {
            Some(l) if l.trim() == text => Ok(()),
            _ => Err(GrfError::Parse { line: self.number.max(1), message: format!("expected `{text}`") }),
        }
    }

    fn header<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let line = self.raw()?.unwrap_or_default();
        let value = line
            .trim()
            .strip_prefix('#')
            .and_then(|rest| rest.trim().strip_prefix(key))
            .map(str::trim)
            .ok_or_else(|| GrfError::Parse { line: self.number, message: format!("expected `# {key} <value>`") })?;
        parse(value, self.number)
    }

    /// Next non-blank line split on whitespace.
    fn next_fields(&mut self) -> Result<Option<Vec<String>>> {
        while let Some(line) = self.raw()? {
            let t = line.trim();
            if !t.is_empty() {
                return Ok(Some(t.split_whitespace().map(String::from).collect()));
            }
        }
        Ok(None)
    }

    fn require(&mut self) -> Result<Vec<String>> {
        self.next_fields()?.ok_or_else(|| GrfError::Parse { line: self.number + 1, message: "unexpected end of input".into() })
    }
}
