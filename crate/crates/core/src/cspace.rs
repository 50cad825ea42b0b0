//! Minimal composite C-space: the smallest operator space containing the
//! toggling-frame perturbation for every control history, built by closing
//! each perturbation component under the adjoint action of the primary
//! algebra.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, ComponentKind, NetworkSpec, ParamId, ParameterRealization};
use crate::ops::Operator;
use crate::pauli::{Pauli, PauliSum};
use crate::rng;

/// Linear form `Σ_m η_m O_m` stored as blocks `m → O_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParametricOperator {
    kind: ComponentKind,
    blocks: Vec<(ParamId, PauliSum)>,
}

impl ParametricOperator {
    pub fn new(kind: ComponentKind, mut blocks: Vec<(ParamId, PauliSum)>) -> Self {
        blocks.retain(|b| !b.1.is_empty());
        blocks.sort_by_key(|b| b.0);
        Self { kind, blocks }
    }

    pub fn zero(kind: ComponentKind) -> Self {
        Self { kind, blocks: Vec::new() }
    }

    pub fn kind(&self) -> ComponentKind {
        self.kind
    }

    pub fn blocks(&self) -> &[(ParamId, PauliSum)] {
        &self.blocks
    }

    pub fn block(&self, id: ParamId) -> Option<&PauliSum> {
        self.blocks.binary_search_by_key(&id, |b| b.0).ok().map(|k| &self.blocks[k].1)
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.is_empty()
    }

    /// `⟪A, B⟫ = Σ_m hs_inner(A_m, B_m)`.
    pub fn inner(&self, other: &ParametricOperator) -> C64 {
        let (mut i, mut j) = (0, 0);
        let mut acc = C64::new(0.0, 0.0);
        while i < self.blocks.len() && j < other.blocks.len() {
            match self.blocks[i].0.cmp(&other.blocks[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.blocks[i].1.inner(&other.blocks[j].1);
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(|b| b.1.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: impl Into<C64>) -> Self {
        let c = c.into();
        Self::new(self.kind, self.blocks.iter().map(|(m, o)| (*m, o.scale(c))).collect())
    }

    pub fn add_scaled(&mut self, other: &ParametricOperator, c: impl Into<C64>) {
        let c = c.into();
        for (m, o) in &other.blocks {
            match self.blocks.binary_search_by_key(m, |b| b.0) {
                Ok(k) => self.blocks[k].1.add_scaled(o, c),
                Err(k) => self.blocks.insert(k, (*m, o.scale(c))),
            }
        }
        self.blocks.retain(|b| !b.1.is_empty());
    }

    pub fn map_blocks(&self, f: impl Fn(&PauliSum) -> PauliSum) -> Self {
        Self::new(self.kind, self.blocks.iter().map(|(m, o)| (*m, f(o))).collect())
    }

    /// Blockwise `i[g, ·]`.
    pub fn i_ad(&self, g: &PauliSum) -> Self {
        self.map_blocks(|o| g.i_commutator(o))
    }

    pub fn pruned(&self, tol: f64) -> Self {
        self.map_blocks(|o| o.pruned(tol))
    }

    /// `Σ_m η_m O_m` at a realization; absent ids count as zero.
    pub fn instantiate(&self, real: &ParameterRealization) -> PauliSum {
        let mut out = PauliSum::zero();
        for (m, o) in &self.blocks {
            if let Some(v) = real.values.get(m) {
                out.add_scaled(o, *v);
            }
        }
        out
    }

    pub fn to_dense(&self, n: usize, real: &ParameterRealization) -> Operator {
        self.instantiate(real).to_dense(n)
    }
}

/// Orthonormal basis of the composite space, components in contiguous ranges.
#[derive(Clone, Debug)]
pub struct CSpaceBasis {
    pub n: usize,
    pub elements: Vec<ParametricOperator>,
    pub ranges: Vec<(ComponentKind, Range<usize>)>,
    /// Dimension of the closure of all seeds taken jointly.
    pub joint_dim: usize,
}

impl CSpaceBasis {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.ranges.iter().map(|r| r.1.len()).collect()
    }

    pub fn range_of(&self, kind: ComponentKind) -> Option<Range<usize>> {
        self.ranges.iter().find(|r| r.0 == kind).map(|r| r.1.clone())
    }

    pub fn kinds(&self) -> Vec<ComponentKind> {
        self.ranges.iter().map(|r| r.0).collect()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let d = self.len();
        DMatrix::from_fn(d, d, |i, j| self.elements[i].inner(&self.elements[j]).re)
    }

    pub fn dump(&self) -> BasisDump {
        BasisDump {
            n: self.n,
            components: self
                .ranges
                .iter()
                .map(|(k, r)| ComponentDump { kind: *k, dim: r.len(), first_index: r.start })
                .collect(),
            composite_dim: self.len(),
            joint_dim: self.joint_dim,
            elements: self
                .elements
                .iter()
                .enumerate()
                .map(|(index, h)| ElementDump {
                    index,
                    component: h.kind(),
                    terms: h
                        .blocks()
                        .iter()
                        .flat_map(|(m, o)| {
                            o.terms().iter().map(move |(w, c)| TermDump {
                                param: m.to_string(),
                                pauli: w.to_letters(self.n),
                                coeff: c.re,
                            })
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisDump {
    pub n: usize,
    pub components: Vec<ComponentDump>,
    pub composite_dim: usize,
    pub joint_dim: usize,
    pub elements: Vec<ElementDump>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentDump {
    pub kind: ComponentKind,
    pub dim: usize,
    pub first_index: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ElementDump {
    pub index: usize,
    pub component: ComponentKind,
    pub terms: Vec<TermDump>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermDump {
    pub param: String,
    pub pauli: String,
    pub coeff: f64,
}

/// Closure of `{ΣX/2, ΣY/2, ΣZ/2}` under `i[·,·]`.
pub fn primary_generators(n: usize) -> Vec<PauliSum> {
    let seeds: Vec<PauliSum> = Pauli::XYZ.iter().map(|p| PauliSum::collective(*p, n).scale(0.5)).collect();
    let mut span = GramSchmidt::new(LI_TOL);
    let mut gens = Vec::new();
    let mut frontier = Vec::new();
    for g in seeds {
        if span.try_push(&g) {
            frontier.push(g.clone());
            gens.push(g);
        }
    }
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for a in &frontier {
            for b in gens.clone() {
                let c = a.i_commutator(&b).pruned(1e-14);
                if span.try_push(&c) {
                    next.push(c.clone());
                    gens.push(c);
                }
            }
        }
        frontier = next;
    }
    gens
}

pub fn primary_generators_dense(n: usize) -> Vec<Operator> {
    primary_generators(n).iter().map(|g| g.to_dense(n)).collect()
}

/// Relative tolerance of the linear-independence test.
pub const LI_TOL: f64 = 1e-9;

trait Vector: Clone {
    fn dot(&self, other: &Self) -> f64;
    fn axpy(&mut self, a: f64, x: &Self);
}

impl Vector for PauliSum {
    fn dot(&self, other: &Self) -> f64 {
        self.inner(other).re
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        self.add_scaled(x, a)
    }
}

impl Vector for ParametricOperator {
    fn dot(&self, other: &Self) -> f64 {
        self.inner(other).re
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        self.add_scaled(x, a)
    }
}

struct GramSchmidt<V: Vector> {
    q: Vec<V>,
    tol: f64,
}

impl<V: Vector> GramSchmidt<V> {
    fn new(tol: f64) -> Self {
        Self { q: Vec::new(), tol }
    }

    fn try_push(&mut self, v: &V) -> bool {
        let norm = v.dot(v).sqrt();
        if norm == 0.0 {
            return false;
        }
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &self.q {
                let p = q.dot(&r);
                r.axpy(-p, q);
            }
        }
        let rn = r.dot(&r).sqrt();
        if rn <= self.tol * norm {
            return false;
        }
        let mut unit = r.clone();
        unit.axpy(1.0 / rn - 1.0, &r);
        self.q.push(unit);
        true
    }
}

impl GramSchmidt<ParametricOperator> {
    fn push_unit(&mut self, v: &ParametricOperator) -> bool {
        if !self.try_push(v) {
            return false;
        }
        let last = self.q.len() - 1;
        self.q[last] = self.q[last].pruned(1e-15);
        true
    }
}

#[derive(Clone, Debug)]
pub struct CSpaceOptions {
    pub max_sweeps: usize,
    /// When set, the time-dependent error component is seeded with one random
    /// generic control Hamiltonian instead of the three generators.
    pub seed: Option<u64>,
}

impl Default for CSpaceOptions {
    fn default() -> Self {
        Self { max_sweeps: 64, seed: None }
    }
}

/// Seeds for one component.
pub fn component_seeds(net: &NetworkSpec, kind: ComponentKind, opts: &CSpaceOptions) -> Vec<ParametricOperator> {
    let n = net.n;
    match kind {
        ComponentKind::Error => match opts.seed {
            None => Pauli::XYZ
                .iter()
                .map(|p| {
                    ParametricOperator::new(
                        ComponentKind::Error,
                        vec![(ParamId::Error(0), PauliSum::collective(*p, n).scale(0.5))],
                    )
                })
                .collect(),
            Some(seed) => {
                let mut r = rng::stream(seed, rng::purpose::CSPACE_SEED);
                let seg = model::ControlSegment {
                    duration: 1.0,
                    omega1: r.random_range(0.2..1.0),
                    phi: r.random_range(0.0..std::f64::consts::TAU),
                    delta_omega: r.random_range(-1.0..1.0),
                };
                vec![model::error_component(&seg, n)]
            }
        },
        ComponentKind::Detuning => vec![model::detuning_component(net)],
        ComponentKind::Coupling => vec![model::coupling_component(net)],
    }
}

fn close(
    seeds: Vec<ParametricOperator>,
    gens: &[PauliSum],
    opts: &CSpaceOptions,
) -> Result<Vec<ParametricOperator>> {
    let mut gs = GramSchmidt::new(LI_TOL);
    let mut frontier = Vec::new();
    for s in &seeds {
        if gs.push_unit(s) {
            frontier.push(gs.q.len() - 1);
        }
    }
    let mut sweeps = 0;
    while !frontier.is_empty() {
        sweeps += 1;
        if sweeps > opts.max_sweeps {
            return Err(Error::NonConvergence { iterations: opts.max_sweeps, dimension: gs.q.len() });
        }
        let mut next = Vec::new();
        for &k in &frontier {
            for g in gens {
                let v = gs.q[k].i_ad(g);
                if gs.push_unit(&v) {
                    next.push(gs.q.len() - 1);
                }
            }
        }
        frontier = next;
    }
    Ok(gs.q)
}

/// Algorithm: seed each component, close under `i·ad_g`, orthonormalize;
/// concatenate the component bases.
pub fn minimal_composite_cspace(net: &NetworkSpec, opts: &CSpaceOptions) -> Result<CSpaceBasis> {
    let gens = primary_generators(net.n);
    let mut elements = Vec::new();
    let mut ranges = Vec::new();
    let mut all_seeds = Vec::new();
    for kind in net.components() {
        let seeds = component_seeds(net, kind, opts);
        all_seeds.extend(seeds.iter().cloned());
        let part = close(seeds, &gens, opts)?;
        let start = elements.len();
        elements.extend(part);
        ranges.push((kind, start..elements.len()));
    }
    let joint_dim = close(all_seeds, &gens, opts)?.len();
    Ok(CSpaceBasis { n: net.n, elements, ranges, joint_dim })
}

/// Coefficients `c_i = ⟪h_i, op⟫` and the residual `‖op − Σ c_i h_i‖`.
pub fn project(op: &ParametricOperator, basis: &CSpaceBasis) -> (DVector<f64>, f64) {
    let c = DVector::from_iterator(basis.len(), basis.elements.iter().map(|h| h.inner(op).re));
    let mut r = op.clone();
    for (ci, h) in c.iter().zip(&basis.elements) {
        r.add_scaled(h, -ci);
    }
    (c, r.norm())
}

/// `Σ c_i h_i`.
pub fn combine(coeffs: &[f64], basis: &CSpaceBasis) -> ParametricOperator {
    let kind = basis.elements.first().map(|h| h.kind()).unwrap_or(ComponentKind::Error);
    let mut out = ParametricOperator::zero(kind);
    for (c, h) in coeffs.iter().zip(&basis.elements) {
        if *c != 0.0 {
            out.add_scaled(h, *c);
        }
    }
    out
}

/// Adjoint representation of the primary algebra on the C-space.
///
/// `d[k][(i, j)] = ⟪h_i, i[g_k, h_j]⟫`; a segment with generator coordinates
/// `a` evolves toggling coefficients by `exp(τ Σ_k a_k d[k])`, which is real
/// orthogonal and block diagonal over components.
#[derive(Clone, Debug)]
pub struct FrameAction {
    pub d: [DMatrix<f64>; 3],
    /// Coordinates of `{e → g_k}`, or `None` without an error component.
    pub error_coords: Option<[DVector<f64>; 3]>,
    /// Coordinates of the static components at unit parameters.
    pub static_coords: DVector<f64>,
    pub ranges: Vec<(ComponentKind, Range<usize>)>,
    /// Largest weight `J` when every `d[k]` has spectrum in `{i m : |m| ≤ J}`.
    pub max_spin: Option<usize>,
}

impl FrameAction {
    pub fn new(net: &NetworkSpec, basis: &CSpaceBasis) -> Result<Self> {
        let gens: Vec<PauliSum> = Pauli::XYZ.iter().map(|p| PauliSum::collective(*p, net.n).scale(0.5)).collect();
        let dim = basis.len();
        let mut d: [DMatrix<f64>; 3] = std::array::from_fn(|_| DMatrix::zeros(dim, dim));
        for (k, g) in gens.iter().enumerate() {
            for j in 0..dim {
                let v = basis.elements[j].i_ad(g);
                let (col, res) = project(&v, basis);
                if res > 1e-10 * v.norm().max(1.0) {
                    return Err(Error::ResidualBreach {
                        residual: res,
                        tolerance: 1e-10,
                        context: format!("basis element {j} leaves the C-space under ad_g{k}"),
                    });
                }
                d[k].set_column(j, &col);
            }
        }
        let error_coords = if net.error {
            let coords: Vec<DVector<f64>> = gens
                .iter()
                .map(|g| {
                    let op = ParametricOperator::new(ComponentKind::Error, vec![(ParamId::Error(0), g.clone())]);
                    project(&op, basis).0
                })
                .collect();
            Some([coords[0].clone(), coords[1].clone(), coords[2].clone()])
        } else {
            None
        };
        let mut static_coords = DVector::zeros(dim);
        if net.detuning {
            static_coords += project(&model::detuning_component(net), basis).0;
        }
        if !net.edges.is_empty() {
            static_coords += project(&model::coupling_component(net), basis).0;
        }
        let max_spin = integral_weights(&d[2]);
        Ok(Self { d, error_coords, static_coords, ranges: basis.ranges.clone(), max_spin })
    }

    pub fn dim(&self) -> usize {
        self.static_coords.len()
    }

    /// `L = Σ_k a_k d[k]`.
    pub fn generator(&self, a: [f64; 3]) -> DMatrix<f64> {
        &self.d[0] * a[0] + &self.d[1] * a[1] + &self.d[2] * a[2]
    }

    /// Segment flow for generator `a`: the weight polynomial when the
    /// spectrum is integral, the spectral factorization otherwise.
    pub fn flow(&self, a: [f64; 3]) -> Flow {
        let l = self.generator(a);
        match self.max_spin {
            Some(j) => Flow::Weight(WeightFlow::new(&l, (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt(), j)),
            None => Flow::Spectral(SegmentFlow::new(&l)),
        }
    }

    /// Error-component coordinates of `H_c` for generator `a`.
    pub fn error_vector(&self, a: [f64; 3]) -> DVector<f64> {
        match &self.error_coords {
            Some(e) => &e[0] * a[0] + &e[1] * a[1] + &e[2] * a[2],
            None => DVector::zeros(self.dim()),
        }
    }
}

/// Spectral factorization of `exp(τ L)` for real antisymmetric `L`:
/// `iL = V diag(λ) V†`, so `exp(τ L) = V diag(e^{-iλτ}) V†`.
#[derive(Clone, Debug)]
pub struct SegmentFlow {
    v: DMatrix<C64>,
    lambda: Vec<f64>,
}

impl SegmentFlow {
    pub fn new(l: &DMatrix<f64>) -> Self {
        if l.is_empty() {
            return Self { v: DMatrix::zeros(0, 0), lambda: Vec::new() };
        }
        let il = l.map(|x| C64::new(0.0, x));
        let herm = (&il + il.adjoint()) * C64::new(0.5, 0.0);
        let eig = nalgebra::SymmetricEigen::new(herm);
        Self { v: eig.eigenvectors, lambda: eig.eigenvalues.iter().copied().collect() }
    }

    /// Largest rotation rate (rad/µs) in the flow.
    pub fn max_rate(&self) -> f64 {
        self.lambda.iter().fold(0.0, |m, l| m.max(l.abs()))
    }

    pub fn exp(&self, tau: f64) -> DMatrix<f64> {
        let mut scaled = self.v.clone();
        for (k, l) in self.lambda.iter().enumerate() {
            let ph = C64::from_polar(1.0, -l * tau);
            scaled.column_mut(k).scale_mut_c(ph);
        }
        (scaled * self.v.adjoint()).map(|z| z.re)
    }

    /// `exp(τ L) x` without forming the matrix.
    pub fn apply(&self, tau: f64, x: &DVector<f64>) -> DVector<f64> {
        let xc = x.map(|v| C64::new(v, 0.0));
        let mut y = self.v.adjoint() * xc;
        for (k, l) in self.lambda.iter().enumerate() {
            y[k] *= C64::from_polar(1.0, -l * tau);
        }
        (&self.v * y).map(|z| z.re)
    }
}

fn integral_weights(dz: &DMatrix<f64>) -> Option<usize> {
    if dz.is_empty() {
        return Some(0);
    }
    let flow = SegmentFlow::new(dz);
    let mut j = 0usize;
    for l in &flow.lambda {
        let m = l.round();
        if (l - m).abs() > 1e-9 {
            return None;
        }
        j = j.max(m.abs() as usize);
    }
    Some(j)
}

/// `exp(θK) = Σ_k α_k(θ) K^k` for `K = L/|a|` with spectrum in
/// `{i m : |m| ≤ J}`; the `α_k` interpolate `e^{imθ}` on those points.
#[derive(Clone, Debug)]
pub struct WeightFlow {
    rate: f64,
    spin: usize,
    powers: Vec<DMatrix<f64>>,
    vinv: DMatrix<C64>,
}

impl WeightFlow {
    pub fn new(l: &DMatrix<f64>, rate: f64, spin: usize) -> Self {
        let d = l.nrows();
        if rate == 0.0 || spin == 0 {
            return Self { rate: 0.0, spin: 0, powers: vec![DMatrix::identity(d, d)], vinv: DMatrix::from_element(1, 1, C64::new(1.0, 0.0)) };
        }
        let k = l / rate;
        let mut powers = Vec::with_capacity(2 * spin + 1);
        powers.push(DMatrix::identity(d, d));
        for p in 1..=2 * spin {
            let next = &powers[p - 1] * &k;
            powers.push(next);
        }
        Self { rate, spin, powers, vinv: vandermonde_inverse(spin) }
    }

    pub fn max_rate(&self) -> f64 {
        self.rate * self.spin as f64
    }

    pub fn powers(&self) -> &[DMatrix<f64>] {
        &self.powers
    }

    /// `α_k(rate·τ)`.
    pub fn alphas(&self, tau: f64) -> Vec<f64> {
        let theta = self.rate * tau;
        let j = self.spin as i64;
        let e: Vec<C64> = (-j..=j).map(|m| C64::from_polar(1.0, m as f64 * theta)).collect();
        (0..self.powers.len()).map(|k| (0..e.len()).map(|m| self.vinv[(k, m)] * e[m]).sum::<C64>().re).collect()
    }

    pub fn exp(&self, tau: f64) -> DMatrix<f64> {
        let a = self.alphas(tau);
        let mut out = &self.powers[0] * a[0];
        for (p, ak) in self.powers.iter().zip(&a).skip(1) {
            out += p * *ak;
        }
        out
    }
}

fn vandermonde_inverse(spin: usize) -> DMatrix<C64> {
    let j = spin as i64;
    let pts: Vec<C64> = (-j..=j).map(|m| C64::new(0.0, m as f64)).collect();
    let n = pts.len();
    // Rows: points, columns: powers.
    let v = DMatrix::from_fn(n, n, |m, k| pts[m].powu(k as u32));
    v.try_inverse().expect("distinct interpolation points")
}

#[derive(Clone, Debug)]
pub enum Flow {
    Weight(WeightFlow),
    Spectral(SegmentFlow),
}

impl Flow {
    pub fn max_rate(&self) -> f64 {
        match self {
            Flow::Weight(w) => w.max_rate(),
            Flow::Spectral(s) => s.max_rate(),
        }
    }

    pub fn exp(&self, tau: f64) -> DMatrix<f64> {
        match self {
            Flow::Weight(w) => w.exp(tau),
            Flow::Spectral(s) => s.exp(tau),
        }
    }

    pub fn apply(&self, tau: f64, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Flow::Weight(w) => w.exp(tau) * x,
            Flow::Spectral(s) => s.apply(tau, x),
        }
    }

    /// `P·exp(τ_j L)·x` for every `τ_j`, as columns.
    pub fn sweep(&self, p: &DMatrix<f64>, x: &DVector<f64>, taus: &[f64]) -> DMatrix<f64> {
        match self {
            Flow::Weight(w) => {
                let k = w.powers.len();
                let mut m = DMatrix::zeros(p.nrows(), k);
                for (c, pow) in w.powers.iter().enumerate() {
                    m.set_column(c, &(p * (pow * x)));
                }
                let mut alpha = DMatrix::zeros(k, taus.len());
                for (j, &t) in taus.iter().enumerate() {
                    for (r, a) in w.alphas(t).into_iter().enumerate() {
                        alpha[(r, j)] = a;
                    }
                }
                m * alpha
            }
            Flow::Spectral(s) => {
                let mut out = DMatrix::zeros(p.nrows(), taus.len());
                for (j, &t) in taus.iter().enumerate() {
                    out.set_column(j, &(p * s.apply(t, x)));
                }
                out
            }
        }
    }
}

trait ScaleComplex {
    fn scale_mut_c(&mut self, c: C64);
}

impl<S: nalgebra::storage::StorageMut<C64, nalgebra::Dyn, nalgebra::U1>> ScaleComplex
    for nalgebra::Matrix<C64, nalgebra::Dyn, nalgebra::U1, S>
{
    fn scale_mut_c(&mut self, c: C64) {
        for z in self.iter_mut() {
            *z *= c;
        }
    }
}
