//! Magnus terms from C-integrals.
//!
//! `H̄^{(r−1)} T = Σ_{i1…ir} F(h_{i1}, …, h_{ir}) c̄_{i1…ir}` with
//! `F = (−i)^{r−1} Σ_π (−1)^{d_b} d_a! d_b! / r! · h_{π(1)}⋯h_{π(r)}`, where
//! `d_b` counts descents `π(k) > π(k+1)` of the word `π(1)…π(r)`.

use num_complex::Complex64 as C64;

use crate::cspace::CSpaceBasis;
use crate::error::{Error, Result};
use crate::graphs::ParameterGraph;
use crate::model::{self, ControlSequence, NetworkSpec, ParamId, ParameterRealization};
use crate::ops::{self, Operator};
use crate::pauli::PauliSum;
use crate::toggling::CIntegralTensor;

pub const ORDER_CAP: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct PermutationWeight {
    /// Zero-based word `π(1)…π(r)`.
    pub perm: Vec<usize>,
    pub ascents: usize,
    pub descents: usize,
    pub weight: C64,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// All permutations of `0..r` in lexicographic order.
pub fn permutations(r: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                rec(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; r], &mut out);
    out
}

pub fn permutation_weights(r: usize) -> Vec<PermutationWeight> {
    let lead = C64::new(0.0, -1.0).powu(r.saturating_sub(1) as u32);
    permutations(r)
        .into_iter()
        .map(|perm| {
            let descents = perm.windows(2).filter(|w| w[0] > w[1]).count();
            let ascents = r - 1 - descents;
            let sign = if descents % 2 == 0 { 1.0 } else { -1.0 };
            let weight = lead * (sign * factorial(ascents) * factorial(descents) / factorial(r));
            PermutationWeight { perm, ascents, descents, weight }
        })
        .collect()
}

fn check_order(r: usize, cap: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::Precondition("F needs at least one operator".into()));
    }
    if r > cap {
        return Err(Error::OrderCap { requested: r, cap });
    }
    Ok(())
}

/// Dense `F(a_1, …, a_r)`.
pub fn f_coefficient(ops_in: &[Operator]) -> Result<Operator> {
    let r = ops_in.len();
    check_order(r, ORDER_CAP)?;
    let dim = ops_in[0].nrows();
    for o in ops_in {
        if o.nrows() != dim || o.ncols() != dim {
            return Err(Error::DimMismatch { left: dim, right: o.nrows() });
        }
    }
    let mut out = Operator::zeros(dim, dim);
    for pw in permutation_weights(r) {
        let mut prod = ops_in[pw.perm[0]].clone();
        for &k in &pw.perm[1..] {
            prod = prod * &ops_in[k];
        }
        out += prod * pw.weight;
    }
    Ok(out)
}

/// Pauli-form `F(a_1, …, a_r)`.
pub fn f_coefficient_pauli(ops_in: &[&PauliSum]) -> PauliSum {
    let r = ops_in.len();
    assert!((1..=ORDER_CAP).contains(&r), "F order {r} outside 1..={ORDER_CAP}");
    if r == 1 {
        return ops_in[0].clone();
    }
    if r == 2 {
        return ops_in[0].commutator(ops_in[1]).scale(C64::new(0.0, -0.5));
    }
    let mut out = PauliSum::zero();
    for pw in permutation_weights(r) {
        let mut prod = ops_in[pw.perm[0]].clone();
        for &k in &pw.perm[1..] {
            prod = prod.mul(ops_in[k]);
        }
        out.add_scaled(&prod, pw.weight);
    }
    out
}

/// `H̄^{(0)}, …, H̄^{(R−1)}` at a realization.
pub fn reconstruct_magnus(
    cint: &CIntegralTensor,
    basis: &CSpaceBasis,
    real: &ParameterRealization,
    order: usize,
) -> Result<Vec<Operator>> {
    if order > cint.order {
        return Err(Error::Precondition(format!("C-integrals only up to order {}", cint.order)));
    }
    check_order(order, ORDER_CAP)?;
    let n = basis.n;
    let h: Vec<Operator> = basis.elements.iter().map(|e| e.to_dense(n, real)).collect();
    let mut out = Vec::with_capacity(order);
    for r in 1..=order {
        let weights = permutation_weights(r);
        let t = cint.order_slice(r);
        let mut acc = Operator::zeros(1 << n, 1 << n);
        let scale = cint.max_abs(r);
        for (flat, &c) in t.iter().enumerate() {
            if c == 0.0 || c.abs() < 1e-300 * scale.max(1.0) {
                continue;
            }
            let idx = cint.unflatten(r, flat);
            let slot: Vec<Operator> = idx.iter().map(|&i| h[i].clone()).collect();
            let f = if r == 1 {
                slot[0].clone()
            } else {
                let mut f = Operator::zeros(1 << n, 1 << n);
                for pw in &weights {
                    let mut prod = slot[pw.perm[0]].clone();
                    for &k in &pw.perm[1..] {
                        prod = prod * &slot[k];
                    }
                    f += prod * pw.weight;
                }
                f
            };
            acc += f * C64::new(c, 0.0);
        }
        out.push(acc / C64::new(cint.t_seq, 0.0));
    }
    Ok(out)
}

/// Nested-commutator integrals evaluated on `slices` midpoint samples per
/// segment. Reference for `r ≤ 3` only.
pub fn magnus_oracle(
    seq: &ControlSequence,
    net: &NetworkSpec,
    real: &ParameterRealization,
    order: usize,
    slices: usize,
) -> Result<Vec<Operator>> {
    if order > 3 {
        return Err(Error::OrderCap { requested: order, cap: 3 });
    }
    let n = net.n;
    let dim = 1 << n;
    let h_int = model::internal_hamiltonian(net, real)?;
    let eps = real.eps();
    let mut samples: Vec<Operator> = Vec::new();
    let mut widths: Vec<f64> = Vec::new();
    let mut u = ops::identity(n);
    for seg in &seq.segments {
        let hc = model::control_hamiltonian(seg, n, 0.0);
        let h_pert = &h_int + &hc * C64::new(eps, 0.0);
        let dt = seg.duration / slices as f64;
        let (vals, vecs) = ops::eigh(&hc)?;
        let at = |tau: f64| -> Operator {
            let mut scaled = vecs.clone();
            for (k, l) in vals.iter().enumerate() {
                let ph = C64::from_polar(1.0, -l * tau);
                for r in 0..dim {
                    scaled[(r, k)] *= ph;
                }
            }
            scaled * vecs.adjoint()
        };
        for s in 0..slices {
            let uu = at((s as f64 + 0.5) * dt) * &u;
            samples.push(uu.adjoint() * &h_pert * &uu);
            widths.push(dt);
        }
        u = at(seg.duration) * u;
    }
    let t_seq = seq.total_time();
    let k_tot = samples.len();
    let zero = || Operator::zeros(dim, dim);
    let weighted: Vec<Operator> = samples.iter().zip(&widths).map(|(h, w)| h * C64::new(*w, 0.0)).collect();
    let mut out = Vec::with_capacity(order);
    let total = weighted.iter().fold(zero(), |a, b| a + b);
    out.push(&total / C64::new(t_seq, 0.0));
    if order >= 2 {
        let mut prefix = zero();
        let mut acc = zero();
        for k in 0..k_tot {
            acc += &weighted[k] * &prefix - &prefix * &weighted[k];
            prefix += &weighted[k];
        }
        out.push(acc * C64::new(0.0, -0.5 / t_seq));
    }
    if order >= 3 {
        let comm = |a: &Operator, b: &Operator| a * b - b * a;
        let mut prefix = zero();
        let mut suffix = total.clone();
        let mut acc = zero();
        for k in 0..k_tot {
            let hk = &weighted[k];
            suffix -= hk;
            acc += comm(&suffix, &comm(hk, &prefix)) + comm(&prefix, &comm(hk, &suffix));
            acc += (comm(hk, &comm(hk, &prefix)) + comm(hk, &comm(hk, &suffix))) * C64::new(0.5, 0.0);
            prefix += hk;
        }
        out.push(acc * C64::new(-1.0 / (6.0 * t_seq), 0.0));
    }
    Ok(out)
}

/// Distinct orderings of a multiset, lexicographic.
pub fn distinct_arrangements(items: &[ParamId]) -> Vec<Vec<ParamId>> {
    let mut sorted = items.to_vec();
    sorted.sort();
    let mut out = vec![sorted.clone()];
    // Next-permutation enumeration visits each distinct ordering once.
    loop {
        let a = &mut sorted;
        let Some(i) = (1..a.len()).rev().find(|&i| a[i - 1] < a[i]) else { break };
        let j = (i..a.len()).rev().find(|&j| a[j] > a[i - 1]).unwrap();
        a.swap(i - 1, j);
        a[i..].reverse();
        out.push(a.clone());
    }
    out
}

/// `∂_G F_{i1…ir}`: the coefficient of `Π_{m∈G} η_m` in `F(h_{i1}(η), …)`.
pub fn graph_derivative_f(indices: &[usize], g: &ParameterGraph, basis: &CSpaceBasis) -> PauliSum {
    graph_derivative_f_with(indices, &distinct_arrangements(g.edges()), basis)
}

/// As [`graph_derivative_f`] with the arrangements of `G` precomputed.
pub fn graph_derivative_f_with(indices: &[usize], arrangements: &[Vec<ParamId>], basis: &CSpaceBasis) -> PauliSum {
    let r = indices.len();
    let mut out = PauliSum::zero();
    if arrangements.first().map(|a| a.len()) != Some(r) {
        return out;
    }
    'outer: for arr in arrangements {
        let mut slots = Vec::with_capacity(r);
        for (k, &i) in indices.iter().enumerate() {
            match basis.elements[i].block(arr[k]) {
                Some(b) => slots.push(b),
                None => continue 'outer,
            }
        }
        out.add_scaled(&f_coefficient_pauli(&slots), 1.0);
    }
    out
}

/// `∂_G H̄^{(r−1)} · T = Σ c̄_{i1…ir} ∂_G F_{i1…ir}` with `r = |G|`.
pub fn graph_derivative_magnus(cint: &CIntegralTensor, g: &ParameterGraph, basis: &CSpaceBasis) -> PauliSum {
    let r = g.edges().len();
    let arrangements = distinct_arrangements(g.edges());
    let mut out = PauliSum::zero();
    if r > cint.order {
        return out;
    }
    for (flat, &c) in cint.order_slice(r).iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let idx = cint.unflatten(r, flat);
        out.add_scaled(&graph_derivative_f_with(&idx, &arrangements, basis), c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cspace::{minimal_composite_cspace, CSpaceOptions, FrameAction};
    use crate::model::{ControlSegment, Topology};
    use crate::pauli::{Pauli, PauliString};
    use crate::toggling::{sequence_integrals, QuadratureConfig};
    use rand::Rng;

    fn p(s: &str) -> Operator {
        let ps: PauliString = s.parse().unwrap();
        let n = ps.letters.len();
        ops::build_pauli(&ps, n).unwrap()
    }

    #[test]
    fn weights_have_expected_structure() {
        for r in 1..=4 {
            let ws = permutation_weights(r);
            assert_eq!(ws.len(), factorial(r) as usize);
            for w in &ws {
                assert_eq!(w.ascents + w.descents, r - 1);
            }
            let real_sum: f64 = ws
                .iter()
                .map(|w| if w.descents % 2 == 0 { 1.0 } else { -1.0 } * factorial(w.ascents) * factorial(w.descents) / factorial(r))
                .sum();
            assert!((real_sum - if r == 1 { 1.0 } else { 0.0 }).abs() < 1e-15);
        }
    }

    #[test]
    fn order_two_is_half_commutator() {
        let a = p("XZ") + p("YY") * C64::new(0.3, 0.0);
        let b = p("ZI") - p("XY") * C64::new(1.7, 0.0);
        let f = f_coefficient(&[a.clone(), b.clone()]).unwrap();
        let expect = (&a * &b - &b * &a) * C64::new(0.0, -0.5);
        assert!(ops::max_abs(&(f - expect)) < 1e-12);
        assert!(ops::max_abs(&(f_coefficient(&[a.clone()]).unwrap() - a)) == 0.0);
    }

    #[test]
    fn commuting_inputs_vanish_at_order_three() {
        let a = p("ZZ");
        let b = p("ZI") * C64::new(2.0, 0.0);
        let c = p("IZ") * C64::new(-0.5, 0.0);
        assert!(ops::max_abs(&f_coefficient(&[a, b, c]).unwrap()) < 1e-12);
    }

    #[test]
    fn order_cap_is_enforced() {
        let a = p("X");
        let err = f_coefficient(&vec![a; 5]).unwrap_err();
        assert!(matches!(err, Error::OrderCap { requested: 5, cap: 4 }));
    }

    #[test]
    fn pauli_and_dense_f_agree() {
        let n = 2;
        let ops_p: Vec<PauliSum> = ["XZ", "YI", "ZY", "XX"]
            .iter()
            .map(|s| PauliSum::single(crate::pauli::PauliWord::parse(s).unwrap(), 1.0))
            .collect();
        for r in 1..=4 {
            let refs: Vec<&PauliSum> = ops_p[..r].iter().collect();
            let fp = f_coefficient_pauli(&refs).to_dense(n);
            let fd = f_coefficient(&ops_p[..r].iter().map(|o| o.to_dense(n)).collect::<Vec<_>>()).unwrap();
            assert!(ops::max_abs(&(fp - fd)) < 1e-13);
        }
    }

    #[test]
    fn multiset_arrangements() {
        let a = ParamId::detuning(0);
        let b = ParamId::coupling(0, 1);
        assert_eq!(distinct_arrangements(&[a, b]).len(), 2);
        assert_eq!(distinct_arrangements(&[a, a]).len(), 1);
        assert_eq!(distinct_arrangements(&[a, a, b]).len(), 3);
        assert_eq!(distinct_arrangements(&[a, b, ParamId::Error(0)]).len(), 6);
    }

    #[test]
    fn idle_first_order_is_the_perturbation() {
        let net = NetworkSpec::new(2, &Topology::AllToAll);
        let basis = minimal_composite_cspace(&net, &CSpaceOptions::default()).unwrap();
        let frame = FrameAction::new(&net, &basis).unwrap();
        let seq = ControlSequence::idle(3, 2.0, 1.0);
        let mut real = ParameterRealization::zeros(&net);
        real.set(ParamId::detuning(0), 0.2);
        real.set(ParamId::detuning(1), -0.1);
        real.set(ParamId::coupling(0, 1), 0.3);
        let ci = sequence_integrals(&seq, &frame, 1, &QuadratureConfig::default()).unwrap();
        let h = reconstruct_magnus(&ci, &basis, &real, 1).unwrap();
        let expect = model::internal_hamiltonian(&net, &real).unwrap();
        assert!(ops::max_abs(&(&h[0] - expect)) < 1e-13);
    }

    #[test]
    fn constant_toggling_frame_has_no_first_order_term() {
        let net = NetworkSpec::new(2, &Topology::AllToAll);
        let seq = ControlSequence::idle(2, 2.0, 1.0);
        let mut real = ParameterRealization::zeros(&net);
        real.set(ParamId::detuning(0), 0.2);
        real.set(ParamId::coupling(0, 1), 0.3);
        let h = magnus_oracle(&seq, &net, &real, 2, 50).unwrap();
        assert!(ops::max_abs(&h[1]) < 1e-14);
        let zero = magnus_oracle(&seq, &net, &ParameterRealization::zeros(&net), 3, 10).unwrap();
        assert!(zero.iter().all(|m| ops::max_abs(m) == 0.0));
    }

    #[test]
    fn reconstruction_matches_slicing_oracle() {
        let net = NetworkSpec::new(2, &Topology::AllToAll);
        let basis = minimal_composite_cspace(&net, &CSpaceOptions::default()).unwrap();
        let frame = FrameAction::new(&net, &basis).unwrap();
        let mut r = crate::rng::stream(21, crate::rng::purpose::TEST);
        let w = model::khz_to_rad_per_us(250.0);
        let seq = ControlSequence::new(
            (0..4)
                .map(|_| ControlSegment {
                    duration: 2.0,
                    omega1: r.random_range(0.0..w),
                    phi: r.random_range(-3.0..3.0),
                    delta_omega: r.random_range(-w..w),
                })
                .collect(),
            2.0,
            w,
            false,
        );
        let mut real = ParameterRealization::zeros(&net);
        for id in net.param_ids() {
            real.set(id, r.random_range(-0.05..0.05));
        }
        let ci = sequence_integrals(&seq, &frame, 3, &QuadratureConfig::default()).unwrap();
        let ours = reconstruct_magnus(&ci, &basis, &real, 3).unwrap();
        let oracle = magnus_oracle(&seq, &net, &real, 3, 600).unwrap();
        for k in 0..3 {
            let scale = ops::max_abs(&oracle[k]);
            assert!(ops::max_abs(&(&ours[k] - &oracle[k])) <= 1e-4 * scale, "order {k}");
            assert!(ops::is_hermitian(&ours[k]) || ops::hermitian_deviation(&ours[k]) < 1e-12);
        }
    }

    #[test]
    fn graph_derivative_matches_two_term_sum() {
        let net = NetworkSpec::new(3, &Topology::AllToAll);
        let basis = minimal_composite_cspace(&net, &CSpaceOptions::default()).unwrap();
        let a = ParamId::detuning(0);
        let b = ParamId::coupling(0, 1);
        let g = ParameterGraph::new(vec![a, b]);
        let (i1, i2) = (4, 7);
        let got = graph_derivative_f(&[i1, i2], &g, &basis);
        let blk = |i: usize, m: ParamId| basis.elements[i].block(m).cloned().unwrap_or_default();
        let mut expect = f_coefficient_pauli(&[&blk(i1, a), &blk(i2, b)]);
        expect.add_scaled(&f_coefficient_pauli(&[&blk(i1, b), &blk(i2, a)]), 1.0);
        assert!((&got - &expect).norm() < 1e-14);
        assert!(got.norm() > 0.0 || expect.norm() == 0.0);
        let _ = Pauli::X;
    }
}
