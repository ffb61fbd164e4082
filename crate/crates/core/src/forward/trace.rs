//! Simulation traces and their on-disk forms.
//!
//! * CSV long format: one row per (iteration, agent, hypothesis) with columns
//!   `iteration,agent,hypothesis,psi,mu_argmax,tie_flag`, preceded by `# key=value`
//!   metadata lines.
//! * JSON: `{"metadata": {..}, "iterations": [{"iteration", "lambda", "psi", ..}]}` with
//!   matrices stored row-major.
//! * JSON lines: one `{"iteration": i, "psi": [[..]]}` record per line, for streaming
//!   public beliefs into the inverse estimator.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{lambda_from_beliefs, Beliefs, LogRatioMatrix, RatioKind, StateEstimate, Step};
use crate::digest::config_hash;
use crate::error::{Error, Result};
use crate::graph::CombinationMatrix;
use crate::models::{LikelihoodFamily, LikelihoodModel, Observation};
use crate::rows::{from_rows, from_rows_auto, to_rows};

/// Smallest belief written to disk.
pub const BELIEF_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordOptions {
    pub public_beliefs: bool,
    pub likelihood_ratios: bool,
    pub observations: bool,
}

impl Default for RecordOptions {
    fn default() -> Self {
        Self {
            public_beliefs: true,
            likelihood_ratios: true,
            observations: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub config_hash: String,
    pub seed: u64,
    pub delta: f64,
    pub n_agents: usize,
    pub n_hypotheses: usize,
}

impl TraceMetadata {
    pub fn for_run(
        a: &CombinationMatrix,
        models: &[LikelihoodModel],
        truths: &[usize],
        delta: f64,
        iterations: usize,
        seed: u64,
    ) -> Self {
        #[derive(Serialize)]
        struct RunKey<'a> {
            weights: Vec<Vec<f64>>,
            models: Vec<&'a LikelihoodFamily>,
            truths: &'a [usize],
            delta: f64,
            iterations: usize,
        }
        let key = RunKey {
            weights: a.rows(),
            models: models.iter().map(|m| m.family()).collect(),
            truths,
            delta,
            iterations,
        };
        Self {
            config_hash: config_hash(&key),
            seed,
            delta,
            n_agents: a.n_agents(),
            n_hypotheses: models.first().map_or(0, |m| m.n_hypotheses()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub iteration: usize,
    pub public: Option<Beliefs>,
    pub lambda: LogRatioMatrix,
    pub likelihood_ratios: Option<LogRatioMatrix>,
    pub observations: Option<Vec<Observation>>,
    pub estimates: Vec<StateEstimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub metadata: TraceMetadata,
    pub steps: Vec<TraceStep>,
}

#[derive(Serialize, Deserialize)]
struct TraceFile {
    metadata: TraceMetadata,
    iterations: Vec<TraceRecord>,
}

#[derive(Serialize, Deserialize)]
struct TraceRecord {
    iteration: usize,
    lambda: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    likelihood_ratios: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    psi: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    observations: Option<Vec<Observation>>,
    mu_argmax: Vec<usize>,
    tie_flag: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct StreamRecord {
    iteration: usize,
    psi: Vec<Vec<f64>>,
}

fn meta_value<T>(meta: &BTreeMap<String, String>, key: &str) -> Result<T>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    let raw = meta
        .get(key)
        .ok_or_else(|| Error::Parse(format!("trace CSV is missing `# {key}=` metadata")))?;
    raw.parse()
        .map_err(|e| Error::Parse(format!("bad trace metadata {key}={raw}: {e}")))
}

fn floored_probabilities(b: &Beliefs) -> DMatrix<f64> {
    b.probabilities().map(|p| p.max(BELIEF_FLOOR))
}

impl SimulationTrace {
    pub fn new(metadata: TraceMetadata) -> Self {
        Self {
            metadata,
            steps: Vec::new(),
        }
    }

    pub fn push(&mut self, step: Step, record: RecordOptions) {
        self.steps.push(TraceStep {
            iteration: step.iteration,
            public: record.public_beliefs.then_some(step.public),
            lambda: step.lambda,
            likelihood_ratios: record.likelihood_ratios.then_some(step.likelihood_ratios),
            observations: record.observations.then_some(step.observations),
            estimates: step.estimates,
        });
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Public beliefs of every iteration, if they were recorded.
    pub fn public_beliefs(&self) -> Result<Vec<Beliefs>> {
        self.steps
            .iter()
            .map(|s| {
                s.public.clone().ok_or_else(|| {
                    Error::InsufficientData(format!(
                        "public beliefs were not recorded at iteration {}",
                        s.iteration
                    ))
                })
            })
            .collect()
    }

    pub fn lambdas(&self) -> Vec<LogRatioMatrix> {
        self.steps.iter().map(|s| s.lambda.clone()).collect()
    }

    fn write_metadata_comments<W: Write>(&self, out: &mut W) -> Result<()> {
        let m = &self.metadata;
        writeln!(out, "# social-inverse trace")?;
        writeln!(out, "# config_hash={}", m.config_hash)?;
        writeln!(out, "# seed={}", m.seed)?;
        writeln!(out, "# delta={}", m.delta)?;
        writeln!(out, "# n_agents={}", m.n_agents)?;
        writeln!(out, "# n_hypotheses={}", m.n_hypotheses)?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        self.write_metadata_comments(&mut out)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "iteration",
            "agent",
            "hypothesis",
            "psi",
            "mu_argmax",
            "tie_flag",
        ])?;
        for step in &self.steps {
            let public = step.public.as_ref().ok_or_else(|| {
                Error::InsufficientData("CSV traces need recorded public beliefs".into())
            })?;
            let psi = floored_probabilities(public);
            for (k, est) in step.estimates.iter().enumerate() {
                for theta in 0..psi.ncols() {
                    w.write_record(&[
                        step.iteration.to_string(),
                        k.to_string(),
                        theta.to_string(),
                        psi[(k, theta)].to_string(),
                        est.index.to_string(),
                        u8::from(est.tie).to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(mut input: R) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let mut meta = BTreeMap::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            if let Some((k, v)) = line.trim_start_matches('#').trim().split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let metadata = TraceMetadata {
            config_hash: meta_value::<String>(&meta, "config_hash")?,
            seed: meta_value(&meta, "seed")?,
            delta: meta_value(&meta, "delta")?,
            n_agents: meta_value(&meta, "n_agents")?,
            n_hypotheses: meta_value(&meta, "n_hypotheses")?,
        };
        let (n, h) = (metadata.n_agents, metadata.n_hypotheses);

        #[derive(Deserialize)]
        struct Row {
            iteration: usize,
            agent: usize,
            hypothesis: usize,
            psi: f64,
            mu_argmax: usize,
            tie_flag: u8,
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut trace = SimulationTrace::new(metadata);
        let mut current: Option<(usize, DMatrix<f64>, Vec<StateEstimate>)> = None;
        let finish = |trace: &mut SimulationTrace,
                      (iteration, psi, estimates): (usize, DMatrix<f64>, Vec<StateEstimate>)|
         -> Result<()> {
            let public = Beliefs::from_probabilities(&psi)?;
            let lambda = lambda_from_beliefs(&public, iteration)?;
            trace.steps.push(TraceStep {
                iteration,
                public: Some(public),
                lambda,
                likelihood_ratios: None,
                observations: None,
                estimates,
            });
            Ok(())
        };
        for row in reader.deserialize() {
            let row: Row = row?;
            if row.agent >= n || row.hypothesis >= h {
                return Err(Error::Parse(format!(
                    "row (agent {}, hypothesis {}) outside the declared {n}x{h} shape",
                    row.agent, row.hypothesis
                )));
            }
            if current.as_ref().map(|c| c.0) != Some(row.iteration) {
                if let Some(done) = current.take() {
                    finish(&mut trace, done)?;
                }
                current = Some((
                    row.iteration,
                    DMatrix::from_element(n, h, f64::NAN),
                    vec![
                        StateEstimate {
                            index: 0,
                            tie: false
                        };
                        n
                    ],
                ));
            }
            let (_, psi, est) = current.as_mut().expect("set above");
            psi[(row.agent, row.hypothesis)] = row.psi;
            est[row.agent] = StateEstimate {
                index: row.mu_argmax,
                tie: row.tie_flag != 0,
            };
        }
        if let Some(done) = current.take() {
            finish(&mut trace, done)?;
        }
        Ok(trace)
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        let file = TraceFile {
            metadata: self.metadata.clone(),
            iterations: self
                .steps
                .iter()
                .map(|s| TraceRecord {
                    iteration: s.iteration,
                    lambda: to_rows(&s.lambda.entries),
                    likelihood_ratios: s.likelihood_ratios.as_ref().map(|l| to_rows(&l.entries)),
                    psi: s
                        .public
                        .as_ref()
                        .map(|p| to_rows(&floored_probabilities(p))),
                    observations: s.observations.clone(),
                    mu_argmax: s.estimates.iter().map(|e| e.index).collect(),
                    tie_flag: s.estimates.iter().map(|e| e.tie).collect(),
                })
                .collect(),
        };
        serde_json::to_writer(out, &file)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        let file: TraceFile = serde_json::from_reader(input)?;
        let h = file.metadata.n_hypotheses;
        let steps = file
            .iterations
            .into_iter()
            .map(|r| {
                let lambda = LogRatioMatrix::new(
                    from_rows(&r.lambda, h - 1)?,
                    RatioKind::Belief,
                    r.iteration,
                )?;
                let likelihood_ratios = r
                    .likelihood_ratios
                    .map(|rows| {
                        LogRatioMatrix::new(
                            from_rows(&rows, h - 1)?,
                            RatioKind::Likelihood,
                            r.iteration,
                        )
                    })
                    .transpose()?;
                let public = r
                    .psi
                    .map(|rows| Beliefs::from_probabilities(&from_rows(&rows, h)?))
                    .transpose()?;
                if r.mu_argmax.len() != r.tie_flag.len() {
                    return Err(Error::Parse("mu_argmax and tie_flag lengths differ".into()));
                }
                Ok(TraceStep {
                    iteration: r.iteration,
                    public,
                    lambda,
                    likelihood_ratios,
                    observations: r.observations,
                    estimates: r
                        .mu_argmax
                        .iter()
                        .zip(&r.tie_flag)
                        .map(|(&index, &tie)| StateEstimate { index, tie })
                        .collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            metadata: file.metadata,
            steps,
        })
    }

    /// One `{"iteration", "psi"}` JSON record per line.
    pub fn write_public_stream<W: Write>(&self, mut out: W) -> Result<()> {
        for s in &self.steps {
            let public = s.public.as_ref().ok_or_else(|| {
                Error::InsufficientData("stream output needs recorded public beliefs".into())
            })?;
            let rec = StreamRecord {
                iteration: s.iteration,
                psi: to_rows(&floored_probabilities(public)),
            };
            serde_json::to_writer(&mut out, &rec)?;
            writeln!(out)?;
        }
        Ok(())
    }

    /// Writes `.csv`, `.json` or `.jsonl` depending on the extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => self.write_csv(file),
            Some("jsonl") => self.write_public_stream(file),
            Some("json") => self.write_json(file),
            other => Err(Error::Config(format!("unknown trace extension {other:?}"))),
        }
    }

    /// Reads a `.csv` or `.json` trace.
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Self::read_csv(file),
            Some("json") => Self::read_json(file),
            other => Err(Error::Config(format!("unknown trace extension {other:?}"))),
        }
    }
}

/// Parses a line-delimited stream of public beliefs. Blank lines and `#` comments are
/// skipped.
pub fn read_public_stream<R: BufRead>(input: R) -> impl Iterator<Item = Result<Beliefs>> {
    input.lines().filter_map(|line| {
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(e.into())),
        };
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            return None;
        }
        Some(
            serde_json::from_str::<StreamRecord>(trimmed)
                .map_err(Error::from)
                .and_then(|r| Beliefs::from_probabilities(&from_rows_auto(&r.psi)?)),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::run_simulation;
    use crate::graph::generate_erdos_renyi;

    fn small_trace(record: RecordOptions) -> SimulationTrace {
        let a = generate_erdos_renyi(4, 0.8, 2).unwrap();
        let models: Vec<_> = (0..4)
            .map(|k| {
                LikelihoodModel::categorical(
                    k,
                    vec![
                        vec![0.7, 0.2, 0.1],
                        vec![0.2, 0.6, 0.2],
                        vec![0.1, 0.3, 0.6],
                    ],
                )
                .unwrap()
            })
            .collect();
        run_simulation(&a, &models, &[0, 0, 2, 0], 0.2, 25, 17, record).unwrap()
    }

    #[test]
    fn csv_round_trip_preserves_beliefs() {
        let trace = small_trace(RecordOptions::default());
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("# config_hash="));
        assert!(text.contains("iteration,agent,hypothesis,psi,mu_argmax,tie_flag"));
        let back = SimulationTrace::read_csv(&buf[..]).unwrap();
        assert_eq!(back.metadata, trace.metadata);
        assert_eq!(back.len(), 25);
        for (a, b) in trace.steps.iter().zip(&back.steps) {
            assert_eq!(a.estimates, b.estimates);
            let d = (&a.lambda.entries - &b.lambda.entries).amax();
            assert!(d < 1e-12, "lambda drift {d}");
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let trace = small_trace(RecordOptions {
            observations: true,
            ..RecordOptions::default()
        });
        let mut buf = Vec::new();
        trace.write_json(&mut buf).unwrap();
        let back = SimulationTrace::read_json(&buf[..]).unwrap();
        for (a, b) in trace.steps.iter().zip(&back.steps) {
            assert_eq!(a.lambda, b.lambda);
            assert_eq!(a.likelihood_ratios, b.likelihood_ratios);
            assert_eq!(a.observations, b.observations);
        }
    }

    #[test]
    fn stream_round_trip() {
        let trace = small_trace(RecordOptions::default());
        let mut buf = b"# comment line\n\n".to_vec();
        trace.write_public_stream(&mut buf).unwrap();
        let publics: Vec<_> = read_public_stream(&buf[..]).collect::<Result<_>>().unwrap();
        assert_eq!(publics.len(), trace.len());
    }

    #[test]
    fn csv_requires_public_beliefs() {
        let trace = small_trace(RecordOptions {
            public_beliefs: false,
            ..RecordOptions::default()
        });
        assert!(trace.write_csv(Vec::new()).is_err());
        assert!(trace.public_beliefs().is_err());
    }

    #[test]
    fn csv_missing_metadata_is_rejected() {
        let text = "iteration,agent,hypothesis,psi,mu_argmax,tie_flag\n1,0,0,0.5,0,1\n";
        assert!(matches!(
            SimulationTrace::read_csv(text.as_bytes()),
            Err(Error::Parse(_))
        ));
    }
}
