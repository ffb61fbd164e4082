//! Shared oracles, fixtures and property checks for the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use social_inverse::forward::Beliefs;
use social_inverse::graph::{generate_erdos_renyi, perron_vector, CombinationMatrix};
use social_inverse::harness::{Experiment, ExperimentConfig};
use social_inverse::inverse::informativeness;
use social_inverse::models::LikelihoodModel;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

pub fn load_config(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&config_path(name)).expect("bundled config parses")
}

pub fn load_experiment(name: &str) -> Experiment {
    load_config(name)
        .resolve()
        .expect("bundled config resolves")
}

/// Cyclic three-symbol pmfs shared by the testbed agents.
pub fn testbed_pmfs() -> Vec<Vec<f64>> {
    vec![
        vec![0.7, 0.15, 0.15],
        vec![0.15, 0.7, 0.15],
        vec![0.15, 0.15, 0.7],
    ]
}

/// `E_θ★[log p_0 − log p_j]` for `j = 1..H−1` by direct enumeration.
pub fn oracle_expected_row(pmfs: &[Vec<f64>], truth: usize) -> Vec<f64> {
    (1..pmfs.len())
        .map(|j| {
            pmfs[truth]
                .iter()
                .enumerate()
                .map(|(s, &p)| p * (pmfs[0][s].ln() - pmfs[j][s].ln()))
                .sum()
        })
        .collect()
}

/// Trace of the covariance matrix `E[xxᵀ] − mmᵀ` of the per-agent log-ratio vector,
/// summed over agents.
pub fn oracle_trace_r(pmfs: &[Vec<f64>], truths: &[usize]) -> f64 {
    let h1 = pmfs.len() - 1;
    truths
        .iter()
        .map(|&t| {
            let mut second = DMatrix::<f64>::zeros(h1, h1);
            let mut mean = DVector::<f64>::zeros(h1);
            for (s, &p) in pmfs[t].iter().enumerate() {
                let x = DVector::from_fn(h1, |j, _| pmfs[0][s].ln() - pmfs[j + 1][s].ln());
                second += &x * x.transpose() * p;
                mean += x * p;
            }
            (second - &mean * mean.transpose()).trace()
        })
        .sum()
}

/// Solves `(A − I)u = 0` with `Σu = 1` by least squares on the stacked system.
pub fn oracle_perron(a: &DMatrix<f64>) -> DVector<f64> {
    let n = a.nrows();
    let mut m = DMatrix::<f64>::zeros(n + 1, n);
    m.view_mut((0, 0), (n, n))
        .copy_from(&(a - DMatrix::<f64>::identity(n, n)));
    m.row_mut(n).fill(1.0);
    let mut rhs = DVector::<f64>::zeros(n + 1);
    rhs[n] = 1.0;
    let normal = m.transpose() * &m;
    normal
        .lu()
        .solve(&(m.transpose() * rhs))
        .expect("strongly connected matrices have a unique Perron vector")
}

/// KL divergence between two pmfs by direct summation.
pub fn oracle_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b).ln())
        .sum()
}

// ---- strategies ----

pub fn pmf(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, len).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

pub fn pmf_family() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..5, 2usize..6).prop_flat_map(|(h, alphabet)| prop::collection::vec(pmf(alphabet), h))
}

pub fn graph_params() -> impl Strategy<Value = (usize, f64, u64)> {
    (2usize..12, 0.2f64..1.0, any::<u64>())
}

pub fn log_weights() -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..8, 2usize..6).prop_flat_map(|(n, h)| {
        prop::collection::vec(-700.0f64..700.0, n * h).prop_map(move |v| DMatrix::from_vec(n, h, v))
    })
}

pub fn l_matrix() -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..8, 1usize..6).prop_flat_map(|(n, c)| {
        prop::collection::vec(-50.0f64..50.0, n * c).prop_map(move |v| DMatrix::from_vec(n, c, v))
    })
}

// ---- properties ----

pub fn check_belief_normalization(log: DMatrix<f64>) -> Result<(), TestCaseError> {
    let b = Beliefs::from_log_weights(log).map_err(|e| TestCaseError::fail(e.to_string()))?;
    for row in b.probabilities().row_iter() {
        prop_assert!((row.sum() - 1.0).abs() <= 1e-10, "row sum {}", row.sum());
        prop_assert!(row.iter().all(|&x| x >= 0.0));
    }
    Ok(())
}

pub fn random_graph(n: usize, p: f64, seed: u64) -> Result<CombinationMatrix, TestCaseError> {
    match generate_erdos_renyi(n, p, seed) {
        Ok(a) => Ok(a),
        Err(e) => Err(TestCaseError::reject(e.to_string())),
    }
}

pub fn check_column_sums((n, p, seed): (usize, f64, u64)) -> Result<(), TestCaseError> {
    let a = random_graph(n, p, seed)?;
    for col in a.weights().column_iter() {
        prop_assert!((col.sum() - 1.0).abs() <= 1e-12, "column sum {}", col.sum());
        prop_assert!(col.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
    Ok(())
}

pub fn check_antisymmetry(l: DMatrix<f64>) -> Result<(), TestCaseError> {
    for d in informativeness(&l).values {
        for i in 0..d.nrows() {
            prop_assert_eq!(d[(i, i)], 0.0);
            for j in 0..d.ncols() {
                prop_assert_eq!(d[(i, j)], -d[(j, i)]);
            }
        }
    }
    Ok(())
}

pub fn check_perron_residual((n, p, seed): (usize, f64, u64)) -> Result<(), TestCaseError> {
    let a = random_graph(n, p, seed)?;
    let u = perron_vector(&a, 1e-13).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let u = u.entries();
    let residual = (a.weights() * u - u).amax();
    prop_assert!(residual <= 1e-10, "residual {residual}");
    prop_assert!(u.iter().all(|&x| x > 0.0));
    prop_assert!((u.sum() - 1.0).abs() <= 1e-12);
    let oracle = oracle_perron(a.weights());
    prop_assert!((u - oracle).amax() <= 1e-9);
    Ok(())
}

pub fn check_kl_nonnegative(pmfs: Vec<Vec<f64>>) -> Result<(), TestCaseError> {
    let h = pmfs.len();
    let m = LikelihoodModel::categorical(0, pmfs.clone())
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    for a in 0..h {
        for b in 0..h {
            let kl = m.kl_divergence(a, b).unwrap();
            prop_assert!(kl >= 0.0);
            prop_assert!((kl - oracle_kl(&pmfs[a], &pmfs[b]).max(0.0)).abs() <= 1e-12);
        }
    }
    Ok(())
}
