//! Toggling-frame coefficient traces and their time-ordered integrals.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cspace::{self, CSpaceBasis, Flow, FrameAction, ParametricOperator, SegmentFlow};
use crate::error::{Error, Result};
use crate::model::{self, ControlSequence, NetworkSpec};
use crate::ops;
use crate::pauli::PauliSum;
use crate::quadrature::GaussLegendre;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub nodes_per_panel: usize,
    /// Largest rotation angle (rad) of the fastest coefficient across one panel.
    pub max_panel_angle: f64,
    pub order_cap: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { nodes_per_panel: 16, max_panel_angle: 3.0, order_cap: 4 }
    }
}

impl QuadratureConfig {
    /// Twice the panel density; used by the convergence monitor.
    pub fn refined(&self) -> Self {
        Self { max_panel_angle: self.max_panel_angle / 2.0, ..self.clone() }
    }
}

/// Empirical tolerance for the node-doubling monitor, relative to the
/// largest tensor entry of each order.
pub const DOUBLING_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug)]
pub struct Panel {
    pub first_node: usize,
    pub t0: f64,
    pub half_width: f64,
}

#[derive(Clone, Debug)]
pub struct ToggleTrace {
    pub t_seq: f64,
    pub times: Vec<f64>,
    pub weights: Vec<f64>,
    /// `|C| × nodes`.
    pub values: DMatrix<f64>,
    pub panels: Vec<Panel>,
    rule: std::sync::Arc<GaussLegendre>,
}

impl ToggleTrace {
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn nodes_per_panel(&self) -> usize {
        self.rule.len()
    }

    /// Trace sampled from `f` on `panels` equal panels over `[0, t_seq]`.
    pub fn from_function(
        t_seq: f64,
        panels: usize,
        nodes_per_panel: usize,
        dim: usize,
        f: impl Fn(f64) -> DVector<f64>,
    ) -> Self {
        let rule = GaussLegendre::cached(nodes_per_panel);
        let width = t_seq / panels as f64;
        let layout: Vec<(f64, f64)> = (0..panels).map(|p| (p as f64 * width, width)).collect();
        let (times, weights, panel_list) = nodes_for(&layout, &rule);
        let mut values = DMatrix::zeros(dim, times.len());
        for (k, &t) in times.iter().enumerate() {
            values.set_column(k, &f(t));
        }
        Self { t_seq, times, weights, values, panels: panel_list, rule }
    }
}

fn nodes_for(layout: &[(f64, f64)], rule: &GaussLegendre) -> (Vec<f64>, Vec<f64>, Vec<Panel>) {
    let m = rule.len();
    let mut times = Vec::with_capacity(layout.len() * m);
    let mut weights = Vec::with_capacity(layout.len() * m);
    let mut panels = Vec::with_capacity(layout.len());
    for &(t0, w) in layout {
        let h = 0.5 * w;
        panels.push(Panel { first_node: times.len(), t0, half_width: h });
        for j in 0..m {
            times.push(t0 + h * (rule.nodes[j] + 1.0));
            weights.push(h * rule.weights[j]);
        }
    }
    (times, weights, panels)
}

/// Per-segment flows and prefix maps `P_{q−1} = E_1⋯E_{q−1}` of a sequence.
#[derive(Clone, Debug)]
pub struct FramePath {
    pub flows: Vec<Flow>,
    pub prefix: Vec<DMatrix<f64>>,
    /// Untoggled coefficients per segment: static part plus the error part.
    pub sources: Vec<DVector<f64>>,
    pub starts: Vec<f64>,
    pub t_seq: f64,
}

impl FramePath {
    pub fn new(seq: &ControlSequence, frame: &FrameAction) -> Self {
        Self::build(seq, frame, false)
    }

    /// As [`FramePath::new`] but always through the eigendecomposition of
    /// each segment generator; used by the reference oracles.
    pub fn spectral(seq: &ControlSequence, frame: &FrameAction) -> Self {
        Self::build(seq, frame, true)
    }

    fn build(seq: &ControlSequence, frame: &FrameAction, spectral: bool) -> Self {
        let dim = frame.dim();
        let mut flows = Vec::with_capacity(seq.len());
        let mut prefix = Vec::with_capacity(seq.len());
        let mut sources = Vec::with_capacity(seq.len());
        let mut starts = Vec::with_capacity(seq.len());
        let mut p = DMatrix::identity(dim, dim);
        let mut t = 0.0;
        for seg in &seq.segments {
            let a = seg.generator();
            let flow = if spectral { Flow::Spectral(SegmentFlow::new(&frame.generator(a))) } else { frame.flow(a) };
            let e = flow.exp(seg.duration);
            sources.push(&frame.static_coords + frame.error_vector(a));
            prefix.push(p.clone());
            starts.push(t);
            p *= e;
            flows.push(flow);
            t += seg.duration;
        }
        Self { flows, prefix, sources, starts, t_seq: t }
    }

    /// `c(t)`; `t` is clamped into the sequence and segment boundaries belong
    /// to the later segment.
    pub fn coefficients_at(&self, t: f64) -> DVector<f64> {
        let q = match self.starts.iter().rposition(|&s| s <= t) {
            Some(q) => q,
            None => 0,
        };
        let tau = (t - self.starts[q]).max(0.0);
        &self.prefix[q] * self.flows[q].apply(tau, &self.sources[q])
    }
}

fn panel_layout(seq: &ControlSequence, rates: &[f64], cfg: &QuadratureConfig) -> Vec<(f64, f64, usize)> {
    let mut out = Vec::new();
    let mut t = 0.0;
    for (q, seg) in seq.segments.iter().enumerate() {
        let angle = rates[q] * seg.duration;
        let count = ((angle / cfg.max_panel_angle).ceil() as usize).max(1);
        let w = seg.duration / count as f64;
        for p in 0..count {
            out.push((t + p as f64 * w, w, q));
        }
        t += seg.duration;
    }
    out
}

fn check_cfg(cfg: &QuadratureConfig) -> Result<()> {
    if cfg.nodes_per_panel < 4 {
        return Err(Error::Precondition(format!("nodes_per_panel {} < 4", cfg.nodes_per_panel)));
    }
    if !(cfg.max_panel_angle > 0.0) {
        return Err(Error::Precondition("max_panel_angle must be positive".into()));
    }
    Ok(())
}

/// Trace through the adjoint representation: `c(t) = P_{q−1} exp(τ L_q) c_q`.
pub fn toggling_trace_adjoint(seq: &ControlSequence, frame: &FrameAction, cfg: &QuadratureConfig) -> Result<ToggleTrace> {
    check_cfg(cfg)?;
    seq.validate()?;
    let path = FramePath::new(seq, frame);
    let rates: Vec<f64> = path.flows.iter().map(|f| f.max_rate()).collect();
    let layout = panel_layout(seq, &rates, cfg);
    let rule = GaussLegendre::cached(cfg.nodes_per_panel);
    let plain: Vec<(f64, f64)> = layout.iter().map(|l| (l.0, l.1)).collect();
    let (times, weights, panels) = nodes_for(&plain, &rule);
    let m = rule.len();
    let mut values = DMatrix::zeros(frame.dim(), times.len());
    let mut p = 0;
    while p < layout.len() {
        let q = layout[p].2;
        let mut end = p;
        while end < layout.len() && layout[end].2 == q {
            end += 1;
        }
        let taus: Vec<f64> = times[p * m..end * m].iter().map(|t| t - path.starts[q]).collect();
        let block = path.flows[q].sweep(&path.prefix[q], &path.sources[q], &taus);
        values.columns_mut(p * m, taus.len()).copy_from(&block);
        p = end;
    }
    Ok(ToggleTrace { t_seq: path.t_seq, times, weights, values, panels, rule })
}

/// Tolerance on the per-node projection residual of the dense route.
pub const PROJECTION_TOL: f64 = 1e-9;

/// Dense route: `U_pri(t)† O_m U_pri(t)` per parameter block, projected onto
/// the basis at every node, with the projection residual checked.
pub fn toggling_trace(
    seq: &ControlSequence,
    net: &NetworkSpec,
    basis: &CSpaceBasis,
    cfg: &QuadratureConfig,
) -> Result<ToggleTrace> {
    check_cfg(cfg)?;
    seq.validate()?;
    let frame = FrameAction::new(net, basis)?;
    let path = FramePath::new(seq, &frame);
    let rates: Vec<f64> = path.flows.iter().map(|f| f.max_rate()).collect();
    let layout = panel_layout(seq, &rates, cfg);
    let rule = GaussLegendre::cached(cfg.nodes_per_panel);
    let plain: Vec<(f64, f64)> = layout.iter().map(|l| (l.0, l.1)).collect();
    let (times, weights, panels) = nodes_for(&plain, &rule);
    let mut values = DMatrix::zeros(basis.len(), times.len());
    for (node, &t) in times.iter().enumerate() {
        let (c, res) = dense_coefficients_at(seq, net, basis, t)?;
        if res > PROJECTION_TOL {
            return Err(Error::ResidualBreach {
                residual: res,
                tolerance: PROJECTION_TOL,
                context: format!("toggled perturbation at t = {t} us is outside the C-space"),
            });
        }
        values.set_column(node, &c);
    }
    Ok(ToggleTrace { t_seq: path.t_seq, times, weights, values, panels, rule })
}

/// Coefficients at `t` by direct conjugation, with the projection residual.
pub fn dense_coefficients_at(
    seq: &ControlSequence,
    net: &NetworkSpec,
    basis: &CSpaceBasis,
    t: f64,
) -> Result<(DVector<f64>, f64)> {
    let n = net.n;
    let mut u = ops::identity(n);
    let mut start = 0.0;
    let mut q = 0;
    for (k, seg) in seq.segments.iter().enumerate() {
        q = k;
        let end = start + seg.duration;
        if t < end || k + 1 == seq.len() {
            break;
        }
        u = ops::expm_skew(&model::control_hamiltonian(seg, n, 0.0), seg.duration)? * u;
        start = end;
    }
    let seg = &seq.segments[q];
    let tau = (t - start).clamp(0.0, seg.duration);
    u = ops::expm_skew(&model::control_hamiltonian(seg, n, 0.0), tau)? * u;
    let ud = u.adjoint();
    let comps = model::perturbation_components(net, seq);
    let mut total = DVector::zeros(basis.len());
    let mut res_sq = 0.0;
    for comp in &comps {
        let op = comp.at_segment(q);
        let toggled: Vec<_> = op
            .blocks()
            .iter()
            .map(|(m, o)| {
                let d = &ud * o.to_dense(n) * &u;
                (*m, PauliSum::from_dense(&d, n))
            })
            .collect();
        let top = ParametricOperator::new(op.kind(), toggled);
        let (c, r) = cspace::project(&top, basis);
        total += c;
        res_sq += r * r;
    }
    Ok((total, res_sq.sqrt()))
}

/// All `c̄_{i1…ir}` for `r ≤ order`, flattened row-major with `i1` (the
/// latest time) most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct CIntegralTensor {
    pub order: usize,
    pub dim: usize,
    /// µs
    pub t_seq: f64,
    pub tensors: Vec<Vec<f64>>,
}

impl CIntegralTensor {
    pub fn order_slice(&self, r: usize) -> &[f64] {
        &self.tensors[r - 1]
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.tensors[idx.len() - 1][self.flat_index(idx)]
    }

    pub fn unflatten(&self, r: usize, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; r];
        for k in (0..r).rev() {
            idx[k] = flat % self.dim;
            flat /= self.dim;
        }
        idx
    }

    pub fn max_abs(&self, r: usize) -> f64 {
        self.order_slice(r).iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Nested integrals `I^{(r)}_{i1…ir}(t) = ∫₀ᵗ c_{i1}(s) I^{(r−1)}_{i2…ir}(s) ds`
/// by composite Gauss–Legendre with spectral in-panel integration.
pub fn c_integrals(trace: &ToggleTrace, order: usize, cap: usize) -> Result<CIntegralTensor> {
    if order == 0 {
        return Err(Error::Precondition("order must be at least 1".into()));
    }
    if order > cap {
        return Err(Error::OrderCap { requested: order, cap });
    }
    let d = trace.dim();
    let m = trace.nodes_per_panel();
    let s = &trace.rule.s;
    let w = DVector::from_column_slice(&trace.rule.weights);
    let mut ends: Vec<DVector<f64>> = (1..=order).map(|r| DVector::zeros(d.pow(r as u32))).collect();
    for panel in &trace.panels {
        let h = panel.half_width;
        let c = trace.values.columns(panel.first_node, m);
        // Values of I^{(r-1)} at the panel nodes, one row per node.
        let mut below = DMatrix::from_element(m, 1, 1.0);
        for r in 1..=order {
            let width = d.pow((r - 1) as u32);
            let mut g = DMatrix::zeros(m, d * width);
            for k in 0..m {
                for i1 in 0..d {
                    let ci = c[(i1, k)];
                    if ci == 0.0 {
                        continue;
                    }
                    for rest in 0..width {
                        g[(k, i1 * width + rest)] = ci * below[(k, rest)];
                    }
                }
            }
            let start = ends[r - 1].clone();
            let end_inc = g.tr_mul(&w) * h;
            if r < order {
                let mut at_nodes = s * &g * h;
                for k in 0..m {
                    for j in 0..at_nodes.ncols() {
                        at_nodes[(k, j)] += start[j];
                    }
                }
                below = at_nodes;
            }
            ends[r - 1] += end_inc;
        }
    }
    Ok(CIntegralTensor { order, dim: d, t_seq: trace.t_seq, tensors: ends.into_iter().map(|v| v.data.into()).collect() })
}

/// Convenience: adjoint-route trace and integrals in one call.
pub fn sequence_integrals(
    seq: &ControlSequence,
    frame: &FrameAction,
    order: usize,
    cfg: &QuadratureConfig,
) -> Result<CIntegralTensor> {
    let trace = toggling_trace_adjoint(seq, frame, cfg)?;
    c_integrals(&trace, order, cfg.order_cap)
}

/// `sqrt Σ (c̄_{i1…ir} − (−1)^r c̄_{ir…i1})²` over tuples not all equal.
pub fn parity_residual(cint: &CIntegralTensor, r: usize) -> f64 {
    assert!(r >= 1 && r <= cint.order, "order {r} not available");
    let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
    let t = cint.order_slice(r);
    let mut acc = 0.0;
    for flat in 0..t.len() {
        let idx = cint.unflatten(r, flat);
        if idx.iter().all(|&i| i == idx[0]) {
            continue;
        }
        let rev: Vec<usize> = idx.iter().rev().copied().collect();
        let diff = t[flat] - sign * t[cint.flat_index(&rev)];
        acc += diff * diff;
    }
    acc.sqrt()
}

/// Largest change of any order-`r` entry, relative to that order's largest
/// entry, when the panel density is doubled.
pub fn doubling_change(
    seq: &ControlSequence,
    frame: &FrameAction,
    order: usize,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let a = sequence_integrals(seq, frame, order, cfg)?;
    let b = sequence_integrals(seq, frame, order, &cfg.refined())?;
    let mut worst: f64 = 0.0;
    for r in 1..=order {
        let scale = b.max_abs(r).max(f64::MIN_POSITIVE);
        let diff = a.order_slice(r).iter().zip(b.order_slice(r)).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        worst = worst.max(diff / scale);
    }
    Ok(worst)
}

/// Reference integrals from `slices` midpoint samples per segment, each
/// slice treated as constant and concatenated exactly.
pub fn riemann_c_integrals(seq: &ControlSequence, frame: &FrameAction, order: usize, slices: usize) -> CIntegralTensor {
    let path = FramePath::spectral(seq, frame);
    let d = frame.dim();
    let mut tensors: Vec<Vec<f64>> = (1..=order).map(|r| vec![0.0; d.pow(r as u32)]).collect();
    let mut fact = vec![1.0; order + 1];
    for k in 1..=order {
        fact[k] = fact[k - 1] * k as f64;
    }
    for (q, seg) in seq.segments.iter().enumerate() {
        let dt = seg.duration / slices as f64;
        for s in 0..slices {
            let t = path.starts[q] + (s as f64 + 0.5) * dt;
            let v = path.coefficients_at(t);
            // Chen: I^(r)_{i1..ir} ← Σ_k [δ^k/k! v_{i1}⋯v_{ik}] I^(r−k)_{i_{k+1}..ir}.
            let old = tensors.clone();
            for r in 1..=order {
                let size = d.pow(r as u32);
                let out = &mut tensors[r - 1];
                for flat in 0..size {
                    let mut idx = vec![0; r];
                    let mut f = flat;
                    for k in (0..r).rev() {
                        idx[k] = f % d;
                        f /= d;
                    }
                    let mut acc = 0.0;
                    let mut prod = 1.0;
                    for k in 1..=r {
                        prod *= v[idx[k - 1]] * dt;
                        let lower = if k == r {
                            1.0
                        } else {
                            let rest = &idx[k..];
                            old[r - k - 1][rest.iter().fold(0, |a, &i| a * d + i)]
                        };
                        acc += prod / fact[k] * lower;
                    }
                    out[flat] = old[r - 1][flat] + acc;
                }
            }
        }
    }
    CIntegralTensor { order, dim: d, t_seq: path.t_seq, tensors }
}
