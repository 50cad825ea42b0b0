//! Derivative-free sequence search, symmetrization and the random-sequence
//! span probe.

pub mod cmaes;

use std::io::Write;

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cspace::FrameAction;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{self, ControlSegment, ControlSequence};
use crate::objectives::{CostBreakdown, Evaluator, TargetUnitary};
use crate::par::Execution;
use crate::rng;
use crate::toggling::{self, QuadratureConfig};

pub use cmaes::{AskTell, CmaParams, Cmaes, StopReason};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub q_min: usize,
    pub q_max: usize,
    #[serde(default = "default_q_step")]
    pub q_step: usize,
    /// `0` picks the standard `4 + ⌊3 ln n⌋`.
    #[serde(default)]
    pub population: usize,
    pub max_evals: usize,
    #[serde(default)]
    pub restarts: usize,
    #[serde(default = "default_sigma0")]
    pub sigma0: f64,
    pub seed: u64,
    pub threshold: f64,
    /// Search a half cycle of `q/2` segments and append its mirror image
    /// (see [`mirror`]); every candidate is scored as the full cycle.
    #[serde(default)]
    pub mirror: bool,
    /// Solve the last interior segment so the cycle implements the primary
    /// target exactly (see [`closing_segment`]).
    #[serde(default)]
    pub closure: bool,
}

fn default_q_step() -> usize {
    2
}

fn default_sigma0() -> f64 {
    1.0
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            q_min: 8,
            q_max: 24,
            q_step: 2,
            population: 0,
            max_evals: 100_000,
            restarts: 2,
            sigma0: 1.0,
            seed: 1,
            threshold: 1e-3,
            mirror: false,
            closure: false,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q_min < 3 {
            return Err(Error::Config("q_min must be at least 3 (the endpoint rule uses two segments)".into()));
        }
        if self.q_max < self.q_min || self.q_step == 0 {
            return Err(Error::Config("need q_min ≤ q_max and q_step ≥ 1".into()));
        }
        if self.population != 0 && self.population < 4 {
            return Err(Error::Config("population must be at least 4".into()));
        }
        if self.mirror && (self.q_min % 2 != 0 || self.q_step % 2 != 0 || self.q_min < 6) {
            return Err(Error::Config("mirrored search needs even segment counts q ≥ 6".into()));
        }
        if self.closure && (self.mirror || self.q_min < 4) {
            return Err(Error::Config("closure needs q ≥ 4 and cannot be combined with mirror".into()));
        }
        if !(self.sigma0 > 0.0) || self.max_evals == 0 {
            return Err(Error::Config("sigma0 and max_evals must be positive".into()));
        }
        Ok(())
    }

    pub fn stages(&self) -> Vec<usize> {
        (self.q_min..=self.q_max).step_by(self.q_step).collect()
    }
}

/// Maps unconstrained coordinates onto bounded segments: three per interior
/// segment, `ω1 = ω_max·σ(u)`, `φ = v`, `Δω = ω_max·tanh(w)`. The first and
/// last segments stay idle.
#[derive(Clone, Copy, Debug)]
pub struct Parameterization {
    /// Segments of the decoded sequence.
    pub q: usize,
    pub dt: f64,
    pub omega_max: f64,
    pub mirror: bool,
    /// Target rotation the last interior segment is solved for.
    pub closure: Option<Matrix2<C64>>,
}

const LOGIT_CLAMP: f64 = 8.0;

impl Parameterization {
    fn free_segments(&self) -> usize {
        if self.mirror {
            self.q / 2
        } else {
            self.q
        }
    }

    fn searched_segments(&self) -> usize {
        self.free_segments() - 2 - usize::from(self.closure.is_some())
    }

    pub fn dim(&self) -> usize {
        3 * self.searched_segments()
    }

    pub fn decode(&self, x: &[f64]) -> ControlSequence {
        assert_eq!(x.len(), self.dim());
        let half = self.decode_free(x);
        if self.mirror {
            mirror(&half)
        } else {
            half
        }
    }

    fn decode_free(&self, x: &[f64]) -> ControlSequence {
        let mut segs = Vec::with_capacity(self.free_segments());
        segs.push(ControlSegment::idle(self.dt));
        for c in x.chunks(3) {
            segs.push(ControlSegment {
                duration: self.dt,
                omega1: self.omega_max / (1.0 + (-c[0]).exp()),
                phi: c[1],
                delta_omega: self.omega_max * c[2].tanh(),
            });
        }
        if let Some(w) = self.closure {
            let r = segs.iter().fold(Matrix2::identity(), |u, s| model::su2_rotation(s.generator(), s.duration) * u);
            segs.push(closing_segment(&(w * r.adjoint()), self.dt));
        }
        segs.push(ControlSegment::idle(self.dt));
        ControlSequence::new(segs, self.dt, self.omega_max, true)
    }

    /// Inverse of `decode` on the interior segments, with saturated values
    /// clamped.
    pub fn encode(&self, seq: &ControlSequence) -> Vec<f64> {
        let free = if self.mirror { seq.len() / 2 } else { seq.len() };
        let interior = &seq.segments[1..free - 1 - usize::from(self.closure.is_some())];
        interior
            .iter()
            .flat_map(|s| {
                let p = (s.omega1 / self.omega_max).clamp(1e-12, 1.0 - 1e-12);
                let u = (p / (1.0 - p)).ln().clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
                let w = (s.delta_omega / self.omega_max).clamp(-1.0 + 1e-12, 1.0 - 1e-12).atanh().clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
                [u, s.phi, w]
            })
            .collect()
    }
}

/// The segment of length `dt` whose rotation equals `v` up to a global
/// phase, taking the representative with angle in `[0, π]`. It respects the
/// amplitude bounds whenever `ω_max·dt ≥ π`.
pub fn closing_segment(v: &Matrix2<C64>, dt: f64) -> ControlSegment {
    let det = v.determinant();
    let mut v = v / det.sqrt();
    if (v[(0, 0)] + v[(1, 1)]).re < 0.0 {
        v = -v;
    }
    let c = 0.5 * (v[(0, 0)] + v[(1, 1)]).re;
    let sn = [
        -(0.5 * (v[(0, 1)] + v[(1, 0)])).im,
        (0.5 * (v[(1, 0)] - v[(0, 1)])).re,
        -(0.5 * (v[(0, 0)] - v[(1, 1)])).im,
    ];
    let s = (sn[0] * sn[0] + sn[1] * sn[1] + sn[2] * sn[2]).sqrt();
    if s == 0.0 {
        return ControlSegment::idle(dt);
    }
    let rate = 2.0 * s.atan2(c) / dt / s;
    let a = sn.map(|x| x * rate);
    ControlSegment { duration: dt, omega1: a[0].hypot(a[1]), phi: a[1].atan2(a[0]), delta_omega: a[2] }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceRecord {
    pub q: usize,
    pub restart: usize,
    pub generation: usize,
    pub evaluations: usize,
    pub sigma: f64,
    /// Best candidate of this generation.
    pub iteration_best: CostBreakdown,
    pub best_so_far: f64,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub best: ControlSequence,
    pub breakdown: CostBreakdown,
    pub evaluations: usize,
    pub converged: bool,
    pub trace: Vec<TraceRecord>,
}

pub fn write_trace<W: Write>(mut w: W, trace: &[TraceRecord]) -> Result<()> {
    for rec in trace {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn score(eval: &Evaluator, seq: &ControlSequence) -> (f64, CostBreakdown) {
    match eval.evaluate(seq) {
        Ok(b) if b.total.is_finite() => (b.total, b),
        _ => (f64::INFINITY, CostBreakdown { total: f64::INFINITY, ..Default::default() }),
    }
}

/// CMA-ES with progressive segment counts and population-doubling restarts.
pub fn optimize(
    eval: &Evaluator,
    cfg: &SearchConfig,
    dt: f64,
    omega_max: f64,
    exec: Execution,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    let stages = cfg.stages();
    let closure = match (&eval.spec.u_target, cfg.closure) {
        (_, false) => None,
        (TargetUnitary::Collective(w), true) => Some(*w),
        (TargetUnitary::Dense(_), true) => {
            return Err(Error::Config("closure needs a collective primary target".into()));
        }
    };
    let mut trace = Vec::new();
    let mut total_evals = 0usize;
    let mut best: Option<(ControlSequence, CostBreakdown)> = None;
    let mut warm: Option<ControlSequence> = None;
    'stages: for (si, &q) in stages.iter().enumerate() {
        let param = Parameterization { q, dt, omega_max, mirror: cfg.mirror, closure };
        let n = param.dim();
        let stage_budget = (cfg.max_evals - total_evals) / (stages.len() - si);
        let stage_end = total_evals + stage_budget;
        let base_lambda = if cfg.population == 0 { CmaParams::default_lambda(n) } else { cfg.population };
        let mut stage_best: Option<(ControlSequence, CostBreakdown)> = None;
        for restart in 0..=cfg.restarts {
            if total_evals >= stage_end {
                break;
            }
            let mut stream = rng::stream(cfg.seed, rng::purpose::OPTIMIZER + ((si as u64) << 8) + restart as u64);
            let x0 = match (&warm, restart) {
                (Some(prev), 0) => {
                    let mut x = param.encode(prev);
                    while x.len() < n {
                        x.extend_from_slice(&[-LOGIT_CLAMP, 0.0, 0.0]);
                    }
                    DVector::from_vec(x)
                }
                _ => DVector::from_fn(n, |i, _| {
                    if i % 3 == 1 {
                        stream.random::<f64>() * std::f64::consts::TAU
                    } else {
                        StandardNormal.sample(&mut stream)
                    }
                }),
            };
            let lambda = base_lambda << restart;
            let mut es = Cmaes::new(x0, cfg.sigma0, lambda, stream);
            while total_evals < stage_end {
                let xs = es.ask();
                let scored = exec.map(xs.len(), |k| score(eval, &param.decode(xs[k].as_slice())));
                let fs: Vec<f64> = scored.iter().map(|s| s.0).collect();
                es.tell(&xs, &fs);
                total_evals += xs.len();
                let top = (0..fs.len()).min_by(|&a, &b| fs[a].total_cmp(&fs[b])).unwrap();
                if stage_best.as_ref().is_none_or(|b| fs[top] < b.1.total) {
                    stage_best = Some((param.decode(xs[top].as_slice()), scored[top].1.clone()));
                }
                let best_so_far = stage_best.as_ref().map_or(f64::INFINITY, |b| b.1.total);
                trace.push(TraceRecord {
                    q,
                    restart,
                    generation: es.generation(),
                    evaluations: total_evals,
                    sigma: es.sigma,
                    iteration_best: scored[top].1.clone(),
                    best_so_far: best_so_far.min(best.as_ref().map_or(f64::INFINITY, |b| b.1.total)),
                });
                if best_so_far <= cfg.threshold || es.should_stop().is_some() {
                    break;
                }
            }
            if stage_best.as_ref().is_some_and(|b| b.1.total <= cfg.threshold) {
                break;
            }
        }
        if let Some(sb) = stage_best {
            warm = Some(sb.0.clone());
            if best.as_ref().is_none_or(|b| sb.1.total < b.1.total) {
                best = Some(sb);
            }
        }
        if best.as_ref().is_some_and(|b| b.1.total <= cfg.threshold) {
            break 'stages;
        }
    }
    let (best, breakdown) = best.ok_or_else(|| Error::Precondition("search budget too small for one generation".into()))?;
    Ok(SearchOutcome { converged: breakdown.total <= cfg.threshold, best, breakdown, evaluations: total_evals, trace })
}

/// Required closeness of a cycle to the identity before symmetrizing.
pub const IDENTITY_CYCLE_TOL: f64 = 1e-6;

/// `seq` followed by its segments in reverse order with every control
/// Hamiltonian negated, so that `U(T + s) = U(T − s)` and the toggling frame
/// is mirror symmetric about `T`.
pub fn symmetrize(seq: &ControlSequence, n: usize) -> Result<ControlSequence> {
    let fid = model::identity_cycle_fidelity(seq, n);
    if fid < 1.0 - IDENTITY_CYCLE_TOL {
        return Err(Error::Precondition(format!(
            "symmetrization needs a cycle whose primary propagator is the identity; |Tr U†·1|/2^n = {fid:.9}"
        )));
    }
    Ok(mirror(seq))
}

/// `seq` followed by its reversal with negated controls. The second half
/// undoes the first, `U(T + s) = U(T − s)`, whatever `U(T)` is.
pub fn mirror(seq: &ControlSequence) -> ControlSequence {
    let mut out = seq.clone();
    out.segments.extend(seq.segments.iter().rev().map(|s| s.negated()));
    out
}

#[derive(Clone, Debug)]
pub struct SpanProbe {
    pub order: usize,
    pub rank: usize,
    /// Orthonormal columns spanning the sampled order-`r` C-integral vectors.
    pub basis: DMatrix<f64>,
    pub singular_values: Vec<f64>,
}

impl SpanProbe {
    /// Distance of `v` from the probed span, relative to `‖v‖`.
    pub fn outside_fraction(&self, v: &DVector<f64>) -> f64 {
        let norm = v.norm();
        if norm == 0.0 {
            return 0.0;
        }
        (v - &self.basis * (self.basis.transpose() * v)).norm() / norm
    }

    pub fn probably_unachievable(&self, v: &DVector<f64>) -> bool {
        self.outside_fraction(v) > 1e-6
    }
}

pub const PROBE_TOL: f64 = 1e-8;

/// Samples `n_sequences` random sequences of `q` segments with amplitudes
/// scaled by `amplitude ∈ [0, 1]` and returns the span of their order-`r`
/// C-integral vectors.
#[allow(clippy::too_many_arguments)]
pub fn span_probe(
    frame: &FrameAction,
    order: usize,
    n_sequences: usize,
    q: usize,
    dt: f64,
    omega_max: f64,
    amplitude: f64,
    seed: u64,
    exec: Execution,
) -> Result<SpanProbe> {
    let d = frame.dim();
    let len = d.pow(order as u32);
    let quad = QuadratureConfig::default();
    let columns = exec.map(n_sequences, |k| {
        let mut r = rng::stream(seed, rng::purpose::SPAN_PROBE + k as u64);
        let segs = (0..q)
            .map(|_| ControlSegment {
                duration: dt,
                omega1: amplitude * omega_max * r.random::<f64>(),
                phi: r.random::<f64>() * std::f64::consts::TAU,
                delta_omega: amplitude * omega_max * (2.0 * r.random::<f64>() - 1.0),
            })
            .collect();
        let seq = ControlSequence::new(segs, dt, omega_max, false);
        toggling::sequence_integrals(&seq, frame, order, &quad).map(|c| DVector::from_column_slice(c.order_slice(order)))
    });
    let columns = columns.into_iter().collect::<Result<Vec<_>>>()?;
    let m = if columns.is_empty() { DMatrix::zeros(len, 0) } else { DMatrix::from_columns(&columns) };
    let sv = if m.is_empty() { Vec::new() } else { nalgebra::SVD::new(m.clone(), false, false).singular_values.iter().copied().collect() };
    let basis = linalg::column_space(&m, PROBE_TOL);
    Ok(SpanProbe { order, rank: basis.ncols(), basis, singular_values: sv })
}
