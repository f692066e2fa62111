//! Dense n-dimensional lattice indexing (row-major, last coordinate fastest)
//! and the shared CSV lattice format.

use crate::error::{Error, Result};
use std::io::{BufRead, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lattice {
    pub dim: usize,
    pub side: usize,
}

impl Lattice {
    pub fn new(dim: usize, side: usize) -> Self {
        Self { dim, side }
    }

    pub fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dim);
        idx.iter().fold(0, |acc, &i| {
            debug_assert!(i < self.side);
            acc * self.side + i
        })
    }

    pub fn unravel(&self, mut offset: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = offset % self.side;
            offset /= self.side;
        }
    }

    pub fn index_of(&self, offset: usize) -> Vec<usize> {
        let mut v = vec![0; self.dim];
        self.unravel(offset, &mut v);
        v
    }

    /// Iterates all multi-indices in offset order.
    pub fn indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.len()).map(move |o| self.index_of(o))
    }
}

/// Writes `n,m` then one `i_1,...,i_n,value` row per lattice point.
pub fn write_lattice_csv<W: Write>(
    mut w: W,
    order: usize,
    lattice: Lattice,
    values: &[f64],
) -> Result<()> {
    writeln!(w, "{},{}", lattice.dim, order)?;
    let mut idx = vec![0; lattice.dim];
    for (o, v) in values.iter().enumerate() {
        lattice.unravel(o, &mut idx);
        for i in &idx {
            write!(w, "{},", i)?;
        }
        writeln!(w, "{:?}", v)?;
    }
    Ok(())
}

/// Parsed lattice CSV: dimension, Bernstein order and the `(index, value)` rows.
#[derive(Debug, Clone)]
pub struct LatticeRows {
    pub dim: usize,
    pub order: usize,
    pub rows: Vec<(Vec<usize>, f64)>,
}

pub fn read_lattice_csv<R: BufRead>(r: R) -> Result<LatticeRows> {
    let mut lines = r
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true));
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Csv("empty input".into()))?;
    let header = header?;
    let head: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    if head.len() != 2 {
        return Err(Error::Csv(format!(
            "header `{}` is not `n,m`",
            header.trim()
        )));
    }
    let dim: usize = head[0]
        .parse()
        .map_err(|_| Error::Csv(format!("bad dimension `{}`", head[0])))?;
    let order: usize = head[1]
        .parse()
        .map_err(|_| Error::Csv(format!("bad order `{}`", head[1])))?;
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        let line = line?;
        let fields: Vec<&str> = line.trim().split(',').map(str::trim).collect();
        if fields.len() != dim + 1 {
            return Err(Error::Csv(format!(
                "line {}: expected {} fields, found {}",
                lineno + 1,
                dim + 1,
                fields.len()
            )));
        }
        let idx = fields[..dim]
            .iter()
            .map(|f| {
                f.parse::<usize>()
                    .map_err(|_| Error::Csv(format!("line {}: bad index `{}`", lineno + 1, f)))
            })
            .collect::<Result<Vec<_>>>()?;
        let value: f64 = fields[dim]
            .parse()
            .map_err(|_| Error::Csv(format!("line {}: bad value `{}`", lineno + 1, fields[dim])))?;
        rows.push((idx, value));
    }
    Ok(LatticeRows { dim, order, rows })
}
