//! Combination matrices over directed agent graphs.
//!
//! A combination matrix `A` is left-stochastic: entry `(l, k)` is the weight agent
//! `k` assigns to information arriving from agent `l`, and every column sums to one.
//! Strong connectivity (a positive-weight path between every ordered pair of agents
//! plus at least one positive self-loop) makes `A` primitive, so `A^s` converges to
//! `u 1ᵀ` where `u` is the Perron vector.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on column sums of a combination matrix.
pub const COLUMN_SUM_TOL: f64 = 1e-12;

/// Resamples allowed before Erdos-Renyi generation gives up on strong connectivity.
pub const MAX_GENERATION_ATTEMPTS: usize = 100;

/// Iteration cap for the Perron power iteration.
pub const PERRON_MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CombinationMatrix {
    weights: DMatrix<f64>,
}

impl CombinationMatrix {
    /// Validates `weights` as a square left-stochastic matrix with entries in `[0, 1]`.
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        let n = weights.nrows();
        if n == 0 || weights.ncols() != n {
            return Err(Error::Contract(format!(
                "combination matrix must be square and non-empty, got {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        for l in 0..n {
            for k in 0..n {
                let w = weights[(l, k)];
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::Contract(format!(
                        "weight a[{l},{k}] = {w} is outside [0, 1]"
                    )));
                }
            }
        }
        for (k, col) in weights.column_iter().enumerate() {
            let sum: f64 = col.sum();
            if (sum - 1.0).abs() > COLUMN_SUM_TOL {
                return Err(Error::Contract(format!(
                    "column {k} sums to {sum}, expected 1 (left-stochastic)"
                )));
            }
        }
        Ok(Self { weights })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Contract(
                "combination matrix rows must all have length n".into(),
            ));
        }
        Self::new(DMatrix::from_fn(n, n, |l, k| rows[l][k]))
    }

    /// Averaging rule over a symmetric or directed adjacency: `a[l,k] = 1/|N_k|` for `l ∈ N_k`.
    pub fn averaging_rule(adjacency: &DMatrix<bool>) -> Result<Self> {
        let n = adjacency.nrows();
        let mut weights = DMatrix::zeros(n, n);
        for k in 0..n {
            let degree = adjacency.column(k).iter().filter(|&&e| e).count();
            if degree == 0 {
                return Err(Error::Contract(format!(
                    "agent {k} has an empty neighborhood"
                )));
            }
            let w = 1.0 / degree as f64;
            for l in 0..n {
                if adjacency[(l, k)] {
                    weights[(l, k)] = w;
                }
            }
        }
        Self::new(weights)
    }

    pub fn n_agents(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.weights
    }

    /// Agents `l` with `a[l,k] > 0`, including `k` itself when it has a self-loop.
    pub fn neighbors(&self, k: usize) -> Vec<usize> {
        (0..self.n_agents())
            .filter(|&l| self.weights[(l, k)] > 0.0)
            .collect()
    }

    /// Agent with the largest neighborhood; ties go to the lowest index.
    pub fn most_central(&self) -> usize {
        let n = self.n_agents();
        let mut best = 0;
        let mut best_deg = 0;
        for k in 0..n {
            let deg = self.neighbors(k).len();
            if deg > best_deg {
                best = k;
                best_deg = deg;
            }
        }
        best
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.weights
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# combination-matrix n={}", self.n_agents())?;
        for row in self.weights.row_iter() {
            let line: Vec<String> = row.iter().map(|w| w.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut declared_n = None;
        let mut rows = Vec::new();
        for line in input.lines() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                if let Some(n) = rest.trim().strip_prefix("combination-matrix n=") {
                    declared_n = Some(n.trim().parse::<usize>().map_err(|e| {
                        Error::Parse(format!("bad combination-matrix header `{trimmed}`: {e}"))
                    })?);
                }
                continue;
            }
            let row = trimmed
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad weight `{v}`: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        let n = declared_n
            .ok_or_else(|| Error::Parse("missing `# combination-matrix n=<n>` header".into()))?;
        if rows.len() != n {
            return Err(Error::Parse(format!(
                "header declares n={n} but {} rows were found",
                rows.len()
            )));
        }
        Self::from_rows(&rows)
    }

    pub fn to_json(&self) -> MatrixFile {
        MatrixFile {
            n: self.n_agents(),
            weights: self.rows(),
        }
    }

    pub fn from_json(file: &MatrixFile) -> Result<Self> {
        if file.weights.len() != file.n {
            return Err(Error::Parse(format!(
                "declared n={} but {} rows were found",
                file.n,
                file.weights.len()
            )));
        }
        Self::from_rows(&file.weights)
    }

    /// Reads a matrix from a `.json` or `.csv` file, chosen by extension.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => {
                let parsed: MatrixFile = serde_json::from_reader(std::io::BufReader::new(file))?;
                Self::from_json(&parsed)
            }
            _ => Self::read_csv(std::io::BufReader::new(file)),
        }
    }
}

/// JSON form of a combination matrix: `{"n": .., "weights": [[..], ..]}`, row-major.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixFile {
    pub n: usize,
    pub weights: Vec<Vec<f64>>,
}

/// Positive, sum-one eigenvector of `A` at eigenvalue 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronVector(DVector<f64>);

impl PerronVector {
    pub fn entries(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// Samples an undirected Erdos-Renyi graph with forced self-loops and weights it by the
/// averaging rule, resampling until the result is strongly connected.
pub fn generate_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<CombinationMatrix> {
    if n < 2 {
        return Err(Error::Contract(format!("need at least 2 agents, got {n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Contract(format!(
            "edge probability {p} is outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let mut adjacency = DMatrix::from_element(n, n, false);
        for k in 0..n {
            adjacency[(k, k)] = true;
            for l in (k + 1)..n {
                if rng.random_bool(p) {
                    adjacency[(l, k)] = true;
                    adjacency[(k, l)] = true;
                }
            }
        }
        let a = CombinationMatrix::averaging_rule(&adjacency)?;
        if is_strongly_connected(&a) {
            return Ok(a);
        }
    }
    Err(Error::GenerationFailed {
        n,
        p,
        seed,
        attempts: MAX_GENERATION_ATTEMPTS,
    })
}

fn reaches_all(n: usize, edge: impl Fn(usize, usize) -> bool) -> bool {
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        for (w, done) in seen.iter_mut().enumerate() {
            if !*done && edge(v, w) {
                *done = true;
                queue.push_back(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// True iff every ordered pair of agents is joined by a positive-weight path and at
/// least one agent has a positive self-loop.
pub fn is_strongly_connected(a: &CombinationMatrix) -> bool {
    let w = a.weights();
    let n = a.n_agents();
    let has_self_loop = (0..n).any(|k| w[(k, k)] > 0.0);
    has_self_loop
        && reaches_all(n, |from, to| w[(from, to)] > 0.0)
        && reaches_all(n, |from, to| w[(to, from)] > 0.0)
}

/// Perron vector by normalized power iteration on `A`.
pub fn perron_vector(a: &CombinationMatrix, tol: f64) -> Result<PerronVector> {
    if !is_strongly_connected(a) {
        return Err(Error::Contract(
            "Perron vector requires a strongly connected combination matrix".into(),
        ));
    }
    let n = a.n_agents();
    let w = a.weights();
    let mut u = DVector::from_element(n, 1.0 / n as f64);
    let mut residual = f64::INFINITY;
    for _ in 0..PERRON_MAX_ITERATIONS {
        let mut next = w * &u;
        next /= next.sum();
        residual = (&next - &u).amax();
        u = next;
        if residual <= tol {
            // residual of the returned vector itself
            let r = (w * &u - &u).amax();
            if r <= tol && u.iter().all(|&x| x > 0.0) {
                return Ok(PerronVector(u));
            }
        }
    }
    Err(Error::PerronNotConverged {
        residual,
        iterations: PERRON_MAX_ITERATIONS,
    })
}
