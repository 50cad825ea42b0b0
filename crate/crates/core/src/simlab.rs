//! Ensemble simulation of stroboscopic autocorrelations.
//!
//! Each realization builds the cycle propagator once and then iterates it.
//! The iteration runs on an eigendecomposition when one with a small
//! residual is found and falls back to repeated conjugation otherwise.

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{self, ControlSequence, EnsembleSpec, NetworkSpec};
use crate::ops::{self, Operator};
use crate::par::Execution;
use crate::pauli::Pauli;

/// Realizations whose cycle propagator drifts further than this from unitary
/// are dropped.
pub const UNITARITY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct Campaign {
    pub net: NetworkSpec,
    pub ensemble: EnsembleSpec,
    pub realizations: usize,
    /// Number of cycles after the initial point.
    pub cycles: usize,
    /// Single-qubit letter of the collective observable.
    pub observable: Pauli,
}

impl Campaign {
    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        self.ensemble.validate()?;
        if self.realizations == 0 {
            return Err(Error::Config("need at least one realization".into()));
        }
        if self.observable == Pauli::I {
            return Err(Error::Config("observable letter must be x, y or z".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub realization: u64,
    pub reason: String,
}

/// Ensemble-averaged autocorrelation sampled once per cycle.
#[derive(Clone, Debug)]
pub struct Series {
    /// µs
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Indexed like `realizations`.
    pub curves: Vec<Vec<f64>>,
    pub realizations: Vec<u64>,
    pub failures: Vec<Failure>,
}

impl Series {
    /// Mean at time `t_us`, linearly interpolated.
    pub fn at(&self, t_us: f64) -> Option<f64> {
        interpolate(&self.t, &self.mean, t_us)
    }

    /// First time the mean drops to `level`, linearly interpolated.
    pub fn crossing(&self, level: f64) -> Option<f64> {
        let k = self.mean.iter().position(|&s| s <= level)?;
        if k == 0 {
            return Some(self.t[0]);
        }
        let (s0, s1) = (self.mean[k - 1], self.mean[k]);
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        Some(t0 + (s0 - level) / (s0 - s1) * (t1 - t0))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t_ms", "S_mean", "S_stderr"])?;
        for k in 0..self.t.len() {
            w.write_record([
                format!("{:.6}", self.t[k] * 1e-3),
                format!("{:.12e}", self.mean[k]),
                format!("{:.12e}", self.stderr[k]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn interpolate(t: &[f64], y: &[f64], x: f64) -> Option<f64> {
    if t.is_empty() || x < t[0] || x > *t.last()? {
        return None;
    }
    let k = t.partition_point(|&v| v < x);
    if k == 0 || t[k] == x {
        return Some(y[k]);
    }
    let f = (x - t[k - 1]) / (t[k] - t[k - 1]);
    Some(y[k - 1] + f * (y[k] - y[k - 1]))
}

fn observable(letter: Pauli, n: usize) -> Operator {
    ops::collective(letter, n)
}

/// `S(k) = Tr(ρ_k ρ_0) / (N 2^N)` for `k = 0..=cycles`, with `ρ_k = U^k ρ_0 U^-k`.
pub fn curve(u: &Operator, letter: Pauli, n: usize, cycles: usize) -> Result<Vec<f64>> {
    let dev = ops::unitary_deviation(u);
    if dev > UNITARITY_TOL {
        return Err(Error::NotUnitary { deviation: dev });
    }
    let rho0 = observable(letter, n);
    match ops::unitary_eigen(u) {
        Ok((lambda, q)) => Ok(spectral_curve(&lambda, &q, &rho0, n, cycles)),
        Err(_) => Ok(direct_curve(u, &rho0, n, cycles)),
    }
}

fn norm(n: usize) -> f64 {
    n as f64 * ops::dim_of(n) as f64
}

fn spectral_curve(lambda: &[num_complex::Complex64], q: &Operator, rho0: &Operator, n: usize, cycles: usize) -> Vec<f64> {
    let rt = q.adjoint() * rho0 * q;
    let d = lambda.len();
    let theta: Vec<f64> = lambda.iter().map(|l| l.arg()).collect();
    let mut diag = 0.0;
    let mut pairs = Vec::with_capacity(d * (d - 1) / 2);
    for a in 0..d {
        diag += rt[(a, a)].norm_sqr();
        for b in (a + 1)..d {
            let w = rt[(a, b)].norm_sqr();
            if w > 1e-30 {
                pairs.push((2.0 * w, theta[a] - theta[b]));
            }
        }
    }
    let z = norm(n);
    let mut out = Vec::with_capacity(cycles + 1);
    out.push(1.0);
    for k in 1..=cycles {
        let kf = k as f64;
        let s: f64 = pairs.iter().map(|&(w, dt)| w * (kf * dt).cos()).sum();
        out.push((diag + s) / z);
    }
    out
}

fn direct_curve(u: &Operator, rho0: &Operator, n: usize, cycles: usize) -> Vec<f64> {
    let z = norm(n);
    let ud = u.adjoint();
    let mut rho = rho0.clone();
    let mut out = Vec::with_capacity(cycles + 1);
    out.push(1.0);
    for _ in 0..cycles {
        rho = u * &rho * &ud;
        out.push(rho.component_mul(&rho0.transpose()).sum().re / z);
    }
    out
}

/// Autocorrelation of one realization, or the reason it was dropped.
pub fn realization_curve(seq: &ControlSequence, campaign: &Campaign, index: u64) -> Result<Vec<f64>> {
    let real = model::sample_member(&campaign.net, &campaign.ensemble, index)?;
    let u = model::total_propagator(seq, &campaign.net, &real, real.eps())?;
    curve(&u, campaign.observable, campaign.net.n, campaign.cycles)
}

/// Runs the campaign. Failed realizations are listed, not averaged; the run
/// errors only if none survive.
pub fn autocorrelation(seq: &ControlSequence, campaign: &Campaign, exec: Execution) -> Result<Series> {
    campaign.validate()?;
    seq.validate()?;
    let results = exec.map(campaign.realizations, |i| realization_curve(seq, campaign, i as u64));
    let mut curves = Vec::new();
    let mut kept = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(c) => {
                curves.push(c);
                kept.push(i as u64);
            }
            Err(e) => failures.push(Failure { realization: i as u64, reason: e.to_string() }),
        }
    }
    if curves.is_empty() {
        let reason = failures.first().map(|f| f.reason.clone()).unwrap_or_default();
        return Err(Error::Precondition(format!("every realization failed; first: {reason}")));
    }
    let (mean, stderr) = mean_stderr(&curves);
    let period = seq.total_time();
    let t = (0..=campaign.cycles).map(|k| k as f64 * period).collect();
    Ok(Series { t, mean, stderr, curves, realizations: kept, failures })
}

fn mean_stderr(curves: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let m = curves.len() as f64;
    let len = curves[0].len();
    let mut mean = vec![0.0; len];
    let mut stderr = vec![0.0; len];
    for k in 0..len {
        let mu = curves.iter().map(|c| c[k]).sum::<f64>() / m;
        mean[k] = mu;
        if curves.len() > 1 {
            let var = curves.iter().map(|c| (c[k] - mu).powi(2)).sum::<f64>() / (m - 1.0);
            stderr[k] = (var / m).sqrt();
        }
    }
    (mean, stderr)
}

/// Largest pointwise spread between the x, y and z autocorrelations.
///
/// Under a collective-rotation-invariant ensemble the three coincide, so the
/// spread measures finite-ensemble noise plus any anisotropy of the sequence.
pub fn three_body_consistency(seq: &ControlSequence, campaign: &Campaign, exec: Execution) -> Result<(f64, [Series; 3])> {
    let run = |p| autocorrelation(seq, &Campaign { observable: p, ..campaign.clone() }, exec);
    let sx = run(Pauli::X)?;
    let sy = run(Pauli::Y)?;
    let sz = run(Pauli::Z)?;
    let spread = (0..sx.mean.len())
        .map(|k| {
            let v = [sx.mean[k], sy.mean[k], sz.mean[k]];
            v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
        })
        .fold(0.0, f64::max);
    Ok((spread, [sx, sy, sz]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    /// Same inverse unit as `t`.
    pub sigma: f64,
    pub points: usize,
    /// RMS residual of `log S`.
    pub residual: f64,
}

pub const FIT_MIN_POINTS: usize = 5;
pub const FIT_FLOOR: f64 = 0.1;

/// Fits `S = exp(-σ² t² / 2)` by least squares on `log S` against `t²`
/// through the origin, using points with `S > 0.1` and `t ≤ window`.
pub fn fit_gaussian_decay(t: &[f64], s: &[f64], window: f64) -> Result<GaussianFit> {
    if t.len() != s.len() {
        return Err(Error::LengthMismatch { expected: t.len(), actual: s.len() });
    }
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(s)
        .filter(|(&ti, &si)| si > FIT_FLOOR && ti <= window && si.is_finite())
        .map(|(&ti, &si)| (ti * ti, si.min(1.0).ln()))
        .collect();
    if pts.len() < FIT_MIN_POINTS {
        return Err(Error::TooFewPoints { needed: FIT_MIN_POINTS, got: pts.len() });
    }
    let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
    let slope = if sxx > 0.0 { (sxy / sxx).min(0.0) } else { 0.0 };
    let residual = (pts.iter().map(|(x, y)| (y - slope * x).powi(2)).sum::<f64>() / pts.len() as f64).sqrt();
    Ok(GaussianFit { sigma: (-2.0 * slope).sqrt(), points: pts.len(), residual })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sequence: String,
    pub sigma_dip_khz: f64,
    /// ms, `None` if the mean never reaches `1/e` inside the horizon.
    pub t_1e_ms: Option<f64>,
    /// Mean at each requested horizon.
    pub s_at: Vec<Option<f64>>,
    pub dropped: usize,
    pub error: Option<String>,
}

/// Runs every sequence at every coupling strength. Each cell reuses the base
/// ensemble seed so rows are comparable.
pub fn regime_sweep(
    sequences: &[(String, ControlSequence)],
    base: &Campaign,
    sigma_dip_khz: &[f64],
    horizons_ms: &[f64],
    exec: Execution,
) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for (name, seq) in sequences {
        for &f in sigma_dip_khz {
            let mut c = base.clone();
            c.ensemble.sigma_dip = model::khz_to_rad_per_us(f);
            let row = sweep_row(name, f, &autocorrelation(seq, &c, exec), horizons_ms, base.realizations);
            rows.push(row);
        }
    }
    rows
}

/// Summary row for one sweep cell.
pub fn sweep_row(name: &str, sigma_dip_khz: f64, result: &Result<Series>, horizons_ms: &[f64], realizations: usize) -> SweepRow {
    match result {
        Ok(s) => SweepRow {
            sequence: name.to_string(),
            sigma_dip_khz,
            t_1e_ms: s.crossing((-1f64).exp()).map(|t| t * 1e-3),
            s_at: horizons_ms.iter().map(|h| s.at(h * 1e3)).collect(),
            dropped: s.failures.len(),
            error: None,
        },
        Err(e) => SweepRow {
            sequence: name.to_string(),
            sigma_dip_khz,
            t_1e_ms: None,
            s_at: vec![None; horizons_ms.len()],
            dropped: realizations,
            error: Some(e.to_string()),
        },
    }
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], horizons_ms: &[f64], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["sequence".to_string(), "sigma_dip_khz".into(), "t_1e_ms".into()];
    header.extend(horizons_ms.iter().map(|h| format!("S_at_{h}ms")));
    header.extend(["dropped".to_string(), "error".into()]);
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for r in rows {
        let mut rec = vec![r.sequence.clone(), format!("{}", r.sigma_dip_khz), opt(r.t_1e_ms)];
        rec.extend(r.s_at.iter().map(|&v| opt(v)));
        rec.push(r.dropped.to_string());
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of a sequence as it would be written to CSV.
pub fn sequence_hash(seq: &ControlSequence) -> Result<String> {
    let mut buf = Vec::new();
    seq.write_csv(&mut buf)?;
    Ok(sha256_hex(&buf))
}

/// Provenance stored next to every campaign output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMetadata {
    pub version: String,
    pub seed: u64,
    pub rng: String,
    pub config_hash: String,
    pub sequence_hash: String,
    pub n: usize,
    pub observable: char,
    /// rad/µs, as simulated.
    pub ensemble: EnsembleSpec,
    pub realizations: usize,
    pub cycles: usize,
    pub failures: Vec<Failure>,
}

impl RunMetadata {
    pub fn new(config_hash: String, seq: &ControlSequence, campaign: &Campaign, series: &Series) -> Result<Self> {
        Ok(Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: campaign.ensemble.seed,
            rng: crate::rng::ALGORITHM.to_string(),
            config_hash,
            sequence_hash: sequence_hash(seq)?,
            n: campaign.net.n,
            observable: campaign.observable.as_char().to_ascii_lowercase(),
            ensemble: campaign.ensemble,
            realizations: campaign.realizations,
            cycles: campaign.cycles,
            failures: series.failures.clone(),
        })
    }
}
