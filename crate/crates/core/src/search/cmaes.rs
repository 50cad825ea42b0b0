//! Covariance matrix adaptation evolution strategy behind an ask/tell
//! interface.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::rng::StreamRng;

/// Black-box minimizer driven by the caller: `ask` proposes candidates,
/// `tell` returns their costs in the same order.
pub trait AskTell {
    fn ask(&mut self) -> Vec<DVector<f64>>;
    fn tell(&mut self, candidates: &[DVector<f64>], costs: &[f64]);
    fn best(&self) -> Option<(&DVector<f64>, f64)>;
    fn should_stop(&self) -> Option<StopReason>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    TolX,
    Stagnation,
    Conditioning,
}

#[derive(Clone, Debug)]
pub struct CmaParams {
    pub lambda: usize,
    pub mu: usize,
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c1: f64,
    pub c_mu: f64,
    pub chi_n: f64,
}

impl CmaParams {
    pub fn default_lambda(n: usize) -> usize {
        4 + (3.0 * (n as f64).ln()).floor() as usize
    }

    pub fn new(n: usize, lambda: usize) -> Self {
        let nf = n as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (0..mu).map(|i| (mu as f64 + 0.5).ln() - ((i + 1) as f64).ln()).collect();
        let sum: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / sum).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Self { lambda, mu, weights, mu_eff, c_sigma, d_sigma, c_c, c1, c_mu, chi_n }
    }
}

pub struct Cmaes {
    pub params: CmaParams,
    pub mean: DVector<f64>,
    pub sigma: f64,
    cov: DMatrix<f64>,
    b: DMatrix<f64>,
    d: DVector<f64>,
    p_sigma: DVector<f64>,
    p_c: DVector<f64>,
    rng: StreamRng,
    generation: usize,
    evals: usize,
    eigen_at: usize,
    best: Option<(DVector<f64>, f64)>,
    history: Vec<f64>,
    sigma0: f64,
}

impl Cmaes {
    pub fn new(x0: DVector<f64>, sigma0: f64, lambda: usize, rng: StreamRng) -> Self {
        let n = x0.len();
        let params = CmaParams::new(n, lambda.max(4));
        Self {
            params,
            mean: x0,
            sigma: sigma0,
            cov: DMatrix::identity(n, n),
            b: DMatrix::identity(n, n),
            d: DVector::from_element(n, 1.0),
            p_sigma: DVector::zeros(n),
            p_c: DVector::zeros(n),
            rng,
            generation: 0,
            evals: 0,
            eigen_at: 0,
            best: None,
            history: Vec::new(),
            sigma0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn evaluations(&self) -> usize {
        self.evals
    }

    fn update_eigen(&mut self) {
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        self.b = eig.eigenvectors;
        self.d = eig.eigenvalues.map(|v| v.max(1e-300).sqrt());
        self.cov = &self.b * DMatrix::from_diagonal(&self.d.map(|v| v * v)) * self.b.transpose();
        self.eigen_at = self.evals;
    }
}

impl AskTell for Cmaes {
    fn ask(&mut self) -> Vec<DVector<f64>> {
        let n = self.dim();
        (0..self.params.lambda)
            .map(|_| {
                let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut self.rng));
                let y = &self.b * z.component_mul(&self.d);
                &self.mean + y * self.sigma
            })
            .collect()
    }

    fn tell(&mut self, candidates: &[DVector<f64>], costs: &[f64]) {
        assert_eq!(candidates.len(), costs.len(), "one cost per candidate");
        let n = self.dim();
        let p = self.params.clone();
        self.evals += candidates.len();
        self.generation += 1;
        let mut order: Vec<usize> = (0..costs.len()).collect();
        order.sort_by(|&i, &j| costs[i].total_cmp(&costs[j]));
        let top = order[0];
        if self.best.as_ref().is_none_or(|b| costs[top] < b.1) {
            self.best = Some((candidates[top].clone(), costs[top]));
        }
        self.history.push(costs[top]);

        let old = self.mean.clone();
        let mut mean = DVector::zeros(n);
        for (k, &i) in order.iter().take(p.mu).enumerate() {
            mean += &candidates[i] * p.weights[k];
        }
        self.mean = mean;
        let y_w = (&self.mean - &old) / self.sigma;
        // C^{-1/2} y_w
        let inv_sqrt = &self.b * DMatrix::from_diagonal(&self.d.map(|v| 1.0 / v)) * self.b.transpose();
        self.p_sigma = &self.p_sigma * (1.0 - p.c_sigma) + inv_sqrt * &y_w * (p.c_sigma * (2.0 - p.c_sigma) * p.mu_eff).sqrt();
        let ps_norm = self.p_sigma.norm();
        let gen = self.generation as f64;
        let h_sigma = ps_norm / (1.0 - (1.0 - p.c_sigma).powf(2.0 * gen)).sqrt() / p.chi_n < 1.4 + 2.0 / (n as f64 + 1.0);
        let hs = if h_sigma { 1.0 } else { 0.0 };
        self.p_c = &self.p_c * (1.0 - p.c_c) + &y_w * (hs * (p.c_c * (2.0 - p.c_c) * p.mu_eff).sqrt());
        let mut rank_mu = DMatrix::zeros(n, n);
        for (k, &i) in order.iter().take(p.mu).enumerate() {
            let y = (&candidates[i] - &old) / self.sigma;
            rank_mu += &y * y.transpose() * p.weights[k];
        }
        let delta = (1.0 - hs) * p.c_c * (2.0 - p.c_c);
        self.cov = &self.cov * (1.0 - p.c1 - p.c_mu + p.c1 * delta)
            + &self.p_c * self.p_c.transpose() * p.c1
            + rank_mu * p.c_mu;
        self.sigma *= ((p.c_sigma / p.d_sigma) * (ps_norm / p.chi_n - 1.0)).min(1.0).exp();
        let gap = (p.lambda as f64 / ((p.c1 + p.c_mu) * n as f64 * 10.0)).max(1.0) as usize;
        if self.evals - self.eigen_at >= gap * p.lambda || self.generation == 1 {
            self.update_eigen();
        }
    }

    fn best(&self) -> Option<(&DVector<f64>, f64)> {
        self.best.as_ref().map(|(x, f)| (x, *f))
    }

    fn should_stop(&self) -> Option<StopReason> {
        let max_d = self.d.iter().copied().fold(0.0, f64::max);
        let min_d = self.d.iter().copied().fold(f64::INFINITY, f64::min);
        if self.sigma * max_d < 1e-11 * self.sigma0 {
            return Some(StopReason::TolX);
        }
        if max_d / min_d > 1e7 {
            return Some(StopReason::Conditioning);
        }
        let n = self.dim() as f64;
        let window = (10.0 + 30.0 * n / self.params.lambda as f64).ceil() as usize + 20;
        if self.history.len() > 2 * window {
            let h = &self.history;
            let recent = median(&h[h.len() - window..]);
            let before = median(&h[h.len() - 2 * window..h.len() - window]);
            if recent >= before * (1.0 - 1e-6) {
                return Some(StopReason::Stagnation);
            }
        }
        None
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[s.len() / 2]
}
