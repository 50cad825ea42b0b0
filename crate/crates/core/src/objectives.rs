//! Cost functions for sequence design: primary fidelity, zeroth-order
//! coefficient targets and per-order graph residuals.

use std::collections::BTreeMap;

use nalgebra::{DVector, Matrix2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::cspace::{self, CSpaceBasis, FrameAction, ParametricOperator};
use crate::error::{Error, Result};
use crate::graphs::{constraint_system, ConstraintSystem, ParameterGraph};
use crate::model::{self, ComponentKind, ControlSequence, NetworkSpec};
use crate::ops::{self, Operator};
use crate::pauli::{Pauli, PauliSum, PauliWord};
use crate::toggling::{self, CIntegralTensor, QuadratureConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub primary: f64,
    pub zeroth: f64,
    /// `higher[k]` weighs the order-`k+2` residual.
    pub higher: Vec<f64>,
}

impl Default for Weights {
    fn default() -> Self {
        Self { primary: 10.0, zeroth: 1.0, higher: vec![0.3, 0.1] }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<()> {
        if self.primary < 0.0 || self.zeroth < 0.0 || self.higher.iter().any(|w| *w < 0.0) {
            return Err(Error::Config("weights must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn for_order(&self, r: usize) -> f64 {
        self.higher.get(r.wrapping_sub(2)).copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Debug)]
pub enum TargetUnitary {
    /// `W^{⊗n}` for a single-qubit `W`.
    Collective(Matrix2<C64>),
    Dense(Operator),
}

impl TargetUnitary {
    pub fn identity() -> Self {
        TargetUnitary::Collective(Matrix2::identity())
    }
}

/// Coordinates the order-1 C-integrals must hit, restricted to some
/// components. `coords` already carries the `T′` scaling.
#[derive(Clone, Debug)]
pub struct ZerothTarget {
    pub components: Vec<ComponentKind>,
    pub coords: DVector<f64>,
}

impl ZerothTarget {
    pub fn decoupling(basis: &CSpaceBasis, components: &[ComponentKind]) -> Self {
        Self { components: components.to_vec(), coords: DVector::zeros(basis.len()) }
    }
}

#[derive(Clone, Debug)]
pub struct DesignSpec {
    pub u_target: TargetUnitary,
    pub zeroth: Option<ZerothTarget>,
    pub systems: Vec<ConstraintSystem>,
    pub weights: Weights,
}

impl DesignSpec {
    /// Highest C-integral order the costs need.
    pub fn max_order(&self) -> usize {
        self.systems.iter().map(|s| s.order).max().unwrap_or(1).max(1)
    }

    pub fn orders(&self) -> Vec<usize> {
        let mut o: Vec<usize> = self.systems.iter().map(|s| s.order).collect();
        o.sort_unstable();
        o.dedup();
        o
    }
}

pub fn cost_primary(seq: &ControlSequence, n: usize, target: &TargetUnitary) -> f64 {
    match target {
        TargetUnitary::Collective(w) => {
            let r = model::primary_rotation(seq);
            let overlap = (r.adjoint() * w).trace().norm() / 2.0;
            1.0 - overlap.powi(n as i32)
        }
        TargetUnitary::Dense(v) => {
            let u = model::primary_propagator(seq, n);
            let num = (u.adjoint() * v).trace().norm();
            let den = (v.adjoint() * v).trace().re;
            1.0 - num / den
        }
    }
}

pub fn cost_zeroth(cint: &CIntegralTensor, target: &ZerothTarget, basis: &CSpaceBasis) -> Result<f64> {
    if target.coords.len() != cint.dim {
        return Err(Error::LengthMismatch { expected: cint.dim, actual: target.coords.len() });
    }
    let c = cint.order_slice(1);
    let mut acc = 0.0;
    for kind in &target.components {
        if let Some(range) = basis.range_of(*kind) {
            for i in range {
                let d = c[i] - target.coords[i];
                acc += d * d;
            }
        }
    }
    Ok(acc.sqrt())
}

/// Root-sum-square of `‖A(G) c − d(G)‖` over the order-`r` systems.
pub fn cost_order(cint: &CIntegralTensor, systems: &[ConstraintSystem], r: usize) -> f64 {
    systems
        .iter()
        .filter(|s| s.order == r)
        .map(|s| s.residual(cint.order_slice(r)).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub total: f64,
    pub primary: f64,
    pub zeroth: f64,
    /// Unweighted residual per order `r ≥ 2`.
    pub orders: BTreeMap<usize, f64>,
}

pub fn combine_costs(spec: &DesignSpec, primary: f64, zeroth: f64, orders: BTreeMap<usize, f64>) -> CostBreakdown {
    let w = &spec.weights;
    let total =
        w.primary * primary + w.zeroth * zeroth + orders.iter().map(|(r, v)| w.for_order(*r) * v).sum::<f64>();
    CostBreakdown { total, primary, zeroth, orders }
}

pub fn cost_total(
    seq: &ControlSequence,
    net: &NetworkSpec,
    basis: &CSpaceBasis,
    frame: &FrameAction,
    spec: &DesignSpec,
    quad: &QuadratureConfig,
) -> Result<CostBreakdown> {
    let cint = toggling::sequence_integrals(seq, frame, spec.max_order(), quad)?;
    breakdown_from(seq, net, basis, spec, &cint)
}

fn breakdown_from(
    seq: &ControlSequence,
    net: &NetworkSpec,
    basis: &CSpaceBasis,
    spec: &DesignSpec,
    cint: &CIntegralTensor,
) -> Result<CostBreakdown> {
    let primary = cost_primary(seq, net.n, &spec.u_target);
    let zeroth = match &spec.zeroth {
        Some(z) => cost_zeroth(cint, z, basis)?,
        None => 0.0,
    };
    let orders = spec
        .orders()
        .into_iter()
        .filter(|&r| r >= 2)
        .map(|r| (r, cost_order(cint, &spec.systems, r)))
        .collect();
    Ok(combine_costs(spec, primary, zeroth, orders))
}

/// Everything needed to score sequences repeatedly against one spec.
#[derive(Clone, Debug)]
pub struct Evaluator {
    pub net: NetworkSpec,
    pub basis: CSpaceBasis,
    pub frame: FrameAction,
    pub spec: DesignSpec,
    pub quad: QuadratureConfig,
}

impl Evaluator {
    pub fn new(net: NetworkSpec, basis: CSpaceBasis, spec: DesignSpec, quad: QuadratureConfig) -> Result<Self> {
        spec.weights.validate()?;
        if spec.systems.iter().any(|s| s.order != s.graph.order() || s.order < 2) {
            return Err(Error::Config("every constraint system must have order |G| ≥ 2".into()));
        }
        let frame = FrameAction::new(&net, &basis)?;
        Ok(Self { net, basis, frame, spec, quad })
    }

    pub fn integrals(&self, seq: &ControlSequence) -> Result<CIntegralTensor> {
        toggling::sequence_integrals(seq, &self.frame, self.spec.max_order(), &self.quad)
    }

    pub fn evaluate(&self, seq: &ControlSequence) -> Result<CostBreakdown> {
        let cint = self.integrals(seq)?;
        breakdown_from(seq, &self.net, &self.basis, &self.spec, &cint)
    }

    /// Per-graph residuals `‖A(G) c − d(G)‖`, keyed by graph label.
    pub fn graph_residuals(&self, cint: &CIntegralTensor) -> Vec<(usize, String, f64)> {
        self.spec
            .systems
            .iter()
            .map(|s| (s.order, s.graph.to_string(), s.residual(cint.order_slice(s.order))))
            .collect()
    }
}

/// Places target letters on the register: a word of length `n` is taken as
/// is; a word with one letter per graph vertex is placed on the sorted
/// vertices.
pub fn place_target_word(letters: &str, g: &ParameterGraph, n: usize) -> Result<PauliWord> {
    let parsed: Vec<Pauli> = letters
        .chars()
        .map(|c| Pauli::from_char(c).ok_or_else(|| Error::Parse(format!("bad Pauli letter {c:?} in {letters:?}"))))
        .collect::<Result<_>>()?;
    if parsed.len() == n {
        return Ok(PauliWord::from_letters(&parsed));
    }
    let verts = g.vertices();
    if parsed.len() != verts.len() {
        return Err(Error::Config(format!(
            "target word {letters:?} for graph {g} needs {} or {n} letters",
            verts.len()
        )));
    }
    let mut w = PauliWord::IDENTITY;
    for (p, q) in parsed.iter().zip(verts) {
        w = w.with(q, *p);
    }
    Ok(w)
}

pub fn target_operator(map: &BTreeMap<String, f64>, g: &ParameterGraph, n: usize) -> Result<PauliSum> {
    let terms = map
        .iter()
        .map(|(k, v)| Ok((place_target_word(k, g, n)?, C64::new(*v, 0.0))))
        .collect::<Result<Vec<_>>>()?;
    Ok(PauliSum::from_terms(terms))
}

fn relabel_word(w: PauliWord, map: &BTreeMap<usize, usize>, n: usize) -> PauliWord {
    let mut out = PauliWord::IDENTITY;
    for q in 0..n {
        let p = w.letter(q);
        if p != Pauli::I {
            out = out.with(map.get(&q).copied().unwrap_or(q), p);
        }
    }
    out
}

/// Extends an order-1 graph target to every parameter of the same kind by
/// relabeling, then projects onto the C-space. Fails when the target has a
/// component outside the span.
pub fn zeroth_coords(
    targets: &[(ParameterGraph, PauliSum)],
    net: &NetworkSpec,
    basis: &CSpaceBasis,
    t_prime: f64,
) -> Result<DVector<f64>> {
    let mut coords = DVector::zeros(basis.len());
    for (g, op) in targets {
        if g.order() != 1 {
            return Err(Error::Config(format!("zeroth-order target on {g} must be a single-edge graph")));
        }
        let edge = g.edges()[0];
        let kind = edge.kind();
        let src = edge.vertices();
        let mut blocks = Vec::new();
        for id in net.param_ids().into_iter().filter(|id| id.kind() == kind) {
            let map: BTreeMap<usize, usize> = src.iter().copied().zip(id.vertices()).collect();
            let block = PauliSum::from_terms(op.terms().iter().map(|(w, c)| (relabel_word(*w, &map, net.n), *c)));
            blocks.push((id, block));
        }
        let param = ParametricOperator::new(kind, blocks);
        let (c, res) = cspace::project(&param, basis);
        if res > 1e-9 * param.norm().max(1.0) {
            return Err(Error::Infeasible { graph: g.to_string(), distance: res });
        }
        coords += c * t_prime;
    }
    Ok(coords)
}

/// Decoupling or targeted systems for a list of graphs.
pub fn graph_systems(
    graphs: &[(ParameterGraph, Option<PauliSum>)],
    basis: &CSpaceBasis,
    t_prime: f64,
) -> Result<Vec<ConstraintSystem>> {
    graphs.iter().map(|(g, t)| constraint_system(g, basis, t.as_ref(), t_prime)).collect()
}

pub fn unitary_from_dense(u: Operator) -> Result<TargetUnitary> {
    let dev = ops::unitary_deviation(&u);
    if dev > 1e-8 {
        return Err(Error::NotUnitary { deviation: dev });
    }
    Ok(TargetUnitary::Dense(u))
}
