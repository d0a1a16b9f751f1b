//! Observed statistics tables.
//!
//! A [`StatTable`] holds per-(b, x, y) data either as raw counts (finite runs)
//! or as exact probabilities (asymptotic analysis). Raw counts are kept as
//! integers so that the finite-size machinery sees exact tallies; conditional
//! frequencies are derived lazily.

use std::io::{self, BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatError {
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("no rounds observed for cell (x={x}, y={y})")]
    EmptyCell { x: usize, y: usize },
    #[error("table has {got} cells, expected {want}")]
    WrongSize { got: usize, want: usize },
    #[error("cell (x={x}, y={y}) out of range for n={n}")]
    OutOfRange { x: usize, y: usize, n: usize },
    #[error("malformed statistics file: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

/// Input-distribution data a table inherits from the protocol: the marginal
/// state distribution p(x), the measurement distribution p(y), and the
/// sifting weight W(x, y) such that p(succ) = sum W(x,y) p(0|x,y).
#[derive(Debug, Clone, PartialEq)]
pub struct InputWeights {
    pub p_x: Vec<f64>,
    pub p_y: Vec<f64>,
    /// Row-major n x n; W(x, x) is also the weight of a sifted *error*.
    pub sift: Vec<f64>,
}

impl InputWeights {
    pub fn n(&self) -> usize {
        self.p_x.len()
    }

    pub fn sift_weight(&self, x: usize, y: usize) -> f64 {
        self.sift[x * self.n() + y]
    }
}

#[derive(Debug, Clone)]
enum TableData {
    Counts {
        /// counts of (b=0, x, y), row-major by (x, y)
        zero: Vec<u64>,
        /// counts of (b=1, x, y)
        one: Vec<u64>,
        rounds: u64,
    },
    Probs(Vec<f64>),
}

/// Per-(b, x, y) statistics with the input distributions they were taken
/// under. `rounds() == 0` means exact probabilities (asymptotic mode).
#[derive(Debug, Clone)]
pub struct StatTable {
    n: usize,
    weights: InputWeights,
    data: TableData,
}

impl StatTable {
    pub fn from_probs(weights: InputWeights, p0: Vec<f64>) -> Result<Self, StatError> {
        let n = weights.n();
        if p0.len() != n * n {
            return Err(StatError::WrongSize { got: p0.len(), want: n * n });
        }
        for &p in &p0 {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(StatError::BadProbability(p));
            }
        }
        Ok(Self { n, weights, data: TableData::Probs(p0) })
    }

    pub fn from_counts(weights: InputWeights, zero: Vec<u64>, one: Vec<u64>) -> Result<Self, StatError> {
        let n = weights.n();
        if zero.len() != n * n || one.len() != n * n {
            return Err(StatError::WrongSize { got: zero.len().max(one.len()), want: n * n });
        }
        let rounds = zero.iter().chain(one.iter()).sum();
        Ok(Self { n, weights, data: TableData::Counts { zero, one, rounds } })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &InputWeights {
        &self.weights
    }

    /// Total rounds; 0 in probability mode.
    pub fn rounds(&self) -> u64 {
        match &self.data {
            TableData::Counts { rounds, .. } => *rounds,
            TableData::Probs(_) => 0,
        }
    }

    pub fn is_count_mode(&self) -> bool {
        matches!(self.data, TableData::Counts { .. })
    }

    fn idx(&self, x: usize, y: usize) -> Result<usize, StatError> {
        if x >= self.n || y >= self.n {
            return Err(StatError::OutOfRange { x, y, n: self.n });
        }
        Ok(x * self.n + y)
    }

    /// Conditional p(b=0 | x, y): exact probability, or the observed frequency
    /// counts(0,x,y)/counts(x,y). Errors on a count-mode cell with no rounds.
    pub fn cond_p0(&self, x: usize, y: usize) -> Result<f64, StatError> {
        let i = self.idx(x, y)?;
        match &self.data {
            TableData::Probs(p) => Ok(p[i]),
            TableData::Counts { zero, one, .. } => {
                let t = zero[i] + one[i];
                if t == 0 {
                    return Err(StatError::EmptyCell { x, y });
                }
                Ok(zero[i] as f64 / t as f64)
            }
        }
    }

    /// Count of (b=0, x, y) events; only meaningful in count mode.
    pub fn count0(&self, x: usize, y: usize) -> u64 {
        match &self.data {
            TableData::Counts { zero, .. } => zero[x * self.n + y],
            TableData::Probs(_) => 0,
        }
    }

    /// Rounds observed with inputs (x, y).
    pub fn cell_trials(&self, x: usize, y: usize) -> u64 {
        match &self.data {
            TableData::Counts { zero, one, .. } => {
                let i = x * self.n + y;
                zero[i] + one[i]
            }
            TableData::Probs(_) => 0,
        }
    }

    /// Joint probability p(b=0, x, y) under the inherited input distributions
    /// (probability mode only; used for asymptotic consistency checks).
    pub fn joint_p0(&self, x: usize, y: usize) -> Result<f64, StatError> {
        Ok(self.cond_p0(x, y)? * self.weights.p_x[x] * self.weights.p_y[y])
    }

    /// Serialize as CSV with header `b,x,y,count` or `b,x,y,prob`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        match &self.data {
            TableData::Counts { zero, one, .. } => {
                writeln!(w, "b,x,y,count")?;
                for b in 0..2usize {
                    for x in 0..self.n {
                        for y in 0..self.n {
                            let c = if b == 0 { zero[x * self.n + y] } else { one[x * self.n + y] };
                            writeln!(w, "{b},{x},{y},{c}")?;
                        }
                    }
                }
            }
            TableData::Probs(p) => {
                writeln!(w, "b,x,y,prob")?;
                for b in 0..2usize {
                    for x in 0..self.n {
                        for y in 0..self.n {
                            let v = p[x * self.n + y];
                            let v = if b == 0 { v } else { 1.0 - v };
                            writeln!(w, "{b},{x},{y},{v}")?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Parse the CSV form produced by [`StatTable::write_csv`].
    pub fn read_csv<R: BufRead>(r: R, weights: InputWeights) -> Result<Self, StatError> {
        let n = weights.n();
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| StatError::Parse("empty file".into()))??;
        let header = header.trim();
        let count_mode = match header {
            "b,x,y,count" => true,
            "b,x,y,prob" => false,
            other => return Err(StatError::Parse(format!("unrecognized header `{other}`"))),
        };
        let mut zero_c = vec![0u64; n * n];
        let mut one_c = vec![0u64; n * n];
        let mut p0 = vec![f64::NAN; n * n];
        let mut p1 = vec![f64::NAN; n * n];
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(StatError::Parse(format!("line {}: expected 4 fields", lineno + 2)));
            }
            let parse_idx = |s: &str| -> Result<usize, StatError> {
                s.trim()
                    .parse()
                    .map_err(|_| StatError::Parse(format!("line {}: bad index `{s}`", lineno + 2)))
            };
            let b = parse_idx(fields[0])?;
            let x = parse_idx(fields[1])?;
            let y = parse_idx(fields[2])?;
            if b > 1 || x >= n || y >= n {
                return Err(StatError::Parse(format!("line {}: index out of range", lineno + 2)));
            }
            if count_mode {
                let c: u64 = fields[3].trim().parse().map_err(|_| {
                    StatError::Parse(format!("line {}: bad count `{}`", lineno + 2, fields[3]))
                })?;
                if b == 0 {
                    zero_c[x * n + y] = c;
                } else {
                    one_c[x * n + y] = c;
                }
            } else {
                let p: f64 = fields[3].trim().parse().map_err(|_| {
                    StatError::Parse(format!("line {}: bad probability `{}`", lineno + 2, fields[3]))
                })?;
                if b == 0 {
                    p0[x * n + y] = p;
                } else {
                    p1[x * n + y] = p;
                }
            }
        }
        if count_mode {
            Self::from_counts(weights, zero_c, one_c)
        } else {
            for i in 0..n * n {
                if p0[i].is_nan() {
                    if p1[i].is_nan() {
                        return Err(StatError::Parse(format!("missing cell {i}")));
                    }
                    p0[i] = 1.0 - p1[i];
                }
                if !p1[i].is_nan() && (p0[i] + p1[i] - 1.0).abs() > 1e-9 {
                    return Err(StatError::Parse(format!(
                        "cell {i}: p(0)+p(1) = {} != 1",
                        p0[i] + p1[i]
                    )));
                }
            }
            Self::from_probs(weights, p0)
        }
    }
}
