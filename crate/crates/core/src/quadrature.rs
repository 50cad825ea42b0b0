//! Gauss–Legendre rules and the matching spectral integration matrix.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

/// `P_0(x) … P_{deg}(x)`.
pub fn legendre_all(x: f64, deg: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(deg + 1);
    p.push(1.0);
    if deg >= 1 {
        p.push(x);
    }
    for n in 1..deg {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0) * x * p[n] - nf * p[n - 1]) / (nf + 1.0);
        p.push(next);
    }
    p
}

/// An `m`-point rule on `[-1, 1]` with its integration matrix.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `s[(k, j)]`: weight of `f(x_j)` in `∫_{-1}^{x_k} p(x) dx`, where `p` is
    /// the degree `m−1` interpolant of `f` at the nodes.
    pub s: DMatrix<f64>,
}

impl GaussLegendre {
    pub fn new(m: usize) -> Self {
        assert!(m >= 2, "need at least two nodes");
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            for _ in 0..100 {
                let p = legendre_all(x, m);
                let dp = m as f64 * (x * p[m] - p[m - 1]) / (x * x - 1.0);
                let dx = p[m] / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let p = legendre_all(x, m);
            let dp = m as f64 * (x * p[m] - p[m - 1]) / (x * x - 1.0);
            nodes[m - 1 - i] = x;
            weights[m - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        let s = integration_matrix(&nodes, &weights);
        Self { nodes, weights, s }
    }

    /// Shared rule for `m` nodes, built once per process.
    pub fn cached(m: usize) -> Arc<GaussLegendre> {
        static RULES: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let mut rules = RULES.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
        rules.entry(m).or_insert_with(|| Arc::new(GaussLegendre::new(m))).clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn integration_matrix(nodes: &[f64], weights: &[f64]) -> DMatrix<f64> {
    let m = nodes.len();
    // Legendre coefficients of the interpolant: a_n = (2n+1)/2 Σ_j w_j P_n(x_j) f_j.
    let pj: Vec<Vec<f64>> = nodes.iter().map(|&x| legendre_all(x, m)).collect();
    // ∫_{-1}^{x} P_0 = x + 1; ∫_{-1}^{x} P_n = (P_{n+1} − P_{n−1}) / (2n+1).
    let qk: Vec<Vec<f64>> = nodes
        .iter()
        .map(|&x| {
            let p = legendre_all(x, m);
            (0..m)
                .map(|n| if n == 0 { x + 1.0 } else { (p[n + 1] - p[n - 1]) / (2.0 * n as f64 + 1.0) })
                .collect()
        })
        .collect();
    DMatrix::from_fn(m, m, |k, j| {
        (0..m)
            .map(|n| (2.0 * n as f64 + 1.0) / 2.0 * weights[j] * pj[j][n] * qk[k][n])
            .sum()
    })
}
