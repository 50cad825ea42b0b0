//! Parameter graphs, their constraint systems `A(G)·c = d(G)`, achievable
//! subspaces and sequential feasibility of target sets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cspace::CSpaceBasis;
use crate::error::{Error, Result};
use crate::linalg::{self, RANK_TOL};
use crate::magnus::{distinct_arrangements, graph_derivative_f_with};
use crate::model::{ComponentKind, NetworkSpec, ParamId};
use crate::pauli::{PauliSum, PauliWord};

/// Multiset of parameter ids, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParameterGraph {
    edges: Vec<ParamId>,
}

impl ParameterGraph {
    pub fn new(mut edges: Vec<ParamId>) -> Self {
        edges.sort();
        Self { edges }
    }

    pub fn edges(&self) -> &[ParamId] {
        &self.edges
    }

    pub fn order(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.edges.iter().flat_map(|e| e.vertices()).collect();
        set.into_iter().collect()
    }

    pub fn has_error_edge(&self) -> bool {
        self.edges.iter().any(|e| matches!(e, ParamId::Error(_)))
    }

    /// Error edges act on every qubit, so only the vertex edges decide
    /// connectivity; a graph of error edges alone is connected.
    pub fn is_connected(&self) -> bool {
        let verts = self.vertices();
        if verts.len() <= 1 {
            return true;
        }
        let mut parent: BTreeMap<usize, usize> = verts.iter().map(|&v| (v, v)).collect();
        fn find(p: &mut BTreeMap<usize, usize>, v: usize) -> usize {
            let mut r = v;
            while p[&r] != r {
                r = p[&r];
            }
            p.insert(v, r);
            r
        }
        for e in &self.edges {
            if let ParamId::Coupling(i, j) = *e {
                let (a, b) = (find(&mut parent, i as usize), find(&mut parent, j as usize));
                parent.insert(a, b);
            }
        }
        let root = find(&mut parent, verts[0]);
        verts.iter().all(|&v| find(&mut parent, v) == root)
    }

    fn relabeled(&self, map: &BTreeMap<usize, usize>) -> ParameterGraph {
        ParameterGraph::new(
            self.edges
                .iter()
                .map(|e| match *e {
                    ParamId::Error(k) => ParamId::Error(k),
                    ParamId::Detuning(i) => ParamId::detuning(map[&(i as usize)]),
                    ParamId::Coupling(i, j) => ParamId::coupling(map[&(i as usize)], map[&(j as usize)]),
                })
                .collect(),
        )
    }

    /// Lexicographically smallest relabeling of the vertices onto
    /// `0..k`, error ids fixed. Equal canonical forms ⇔ isomorphic.
    pub fn canonical(&self) -> ParameterGraph {
        let verts = self.vertices();
        let k = verts.len();
        let mut best: Option<ParameterGraph> = None;
        for perm in crate::magnus::permutations(k) {
            let map: BTreeMap<usize, usize> = verts.iter().enumerate().map(|(a, &v)| (v, perm[a])).collect();
            let g = self.relabeled(&map);
            if best.as_ref().is_none_or(|b| g < *b) {
                best = Some(g);
            }
        }
        best.unwrap_or_else(|| self.clone())
    }

    pub fn is_isomorphic(&self, other: &ParameterGraph) -> bool {
        self.order() == other.order() && self.canonical() == other.canonical()
    }

    /// Whether every edge exists in the network.
    pub fn embeds_in(&self, net: &NetworkSpec) -> bool {
        self.edges.iter().all(|e| net.has_param(*e))
    }
}

impl fmt::Display for ParameterGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.edges.iter().map(|e| e.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

impl FromStr for ParameterGraph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('{').trim_end_matches('}');
        if inner.trim().is_empty() {
            return Err(Error::Parse(format!("empty parameter graph {s:?}")));
        }
        let edges = inner.split(',').map(|p| p.parse()).collect::<Result<Vec<ParamId>>>()?;
        Ok(ParameterGraph::new(edges))
    }
}

impl Serialize for ParameterGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ParameterGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn multisets(ids: &[ParamId], r: usize) -> Vec<Vec<ParamId>> {
    fn rec(ids: &[ParamId], start: usize, r: usize, cur: &mut Vec<ParamId>, out: &mut Vec<Vec<ParamId>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for k in start..ids.len() {
            cur.push(ids[k]);
            rec(ids, k, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(ids, 0, r, &mut Vec::new(), &mut out);
    out
}

fn candidate_ids(net: &NetworkSpec, include_error: bool, filter: Option<&[ComponentKind]>) -> Vec<ParamId> {
    net.param_ids()
        .into_iter()
        .filter(|id| include_error || !matches!(id, ParamId::Error(_)))
        .filter(|id| filter.is_none_or(|f| f.contains(&id.kind())))
        .collect()
}

/// Canonical representatives of every multiset of `r` network parameters,
/// connected or not, in canonical order.
pub fn enumerate_all_graphs(
    net: &NetworkSpec,
    r: usize,
    include_error: bool,
    filter: Option<&[ComponentKind]>,
) -> Vec<ParameterGraph> {
    let ids = candidate_ids(net, include_error, filter);
    let set: BTreeSet<ParameterGraph> =
        multisets(&ids, r).into_iter().map(|e| ParameterGraph::new(e).canonical()).collect();
    set.into_iter().collect()
}

/// Connected graphs with `r` edges embeddable in the network, up to
/// isomorphism.
pub fn enumerate_graphs(
    net: &NetworkSpec,
    r: usize,
    include_error: bool,
    filter: Option<&[ComponentKind]>,
) -> Vec<ParameterGraph> {
    enumerate_all_graphs(net, r, include_error, filter).into_iter().filter(|g| g.is_connected()).collect()
}

/// A copy of `g` whose vertices are relabeled onto network qubits, or
/// `None` when no embedding exists.
pub fn embed(g: &ParameterGraph, net: &NetworkSpec) -> Option<ParameterGraph> {
    if g.embeds_in(net) {
        return Some(g.clone());
    }
    let verts = g.vertices();
    if verts.len() > net.n {
        return None;
    }
    fn rec(
        g: &ParameterGraph,
        net: &NetworkSpec,
        verts: &[usize],
        map: &mut BTreeMap<usize, usize>,
        used: &mut Vec<bool>,
    ) -> Option<ParameterGraph> {
        if map.len() == verts.len() {
            let h = g.relabeled(map);
            return if h.embeds_in(net) { Some(h) } else { None };
        }
        let v = verts[map.len()];
        for q in 0..net.n {
            if !used[q] {
                used[q] = true;
                map.insert(v, q);
                if let Some(h) = rec(g, net, verts, map, used) {
                    return Some(h);
                }
                map.remove(&v);
                used[q] = false;
            }
        }
        None
    }
    rec(g, net, &verts, &mut BTreeMap::new(), &mut vec![false; net.n])
}

/// `vec[·]` coordinates: sorted Pauli words of the support union.
fn word_index(ops: &[PauliSum]) -> Vec<PauliWord> {
    let set: BTreeSet<PauliWord> = ops.iter().flat_map(|o| o.terms().iter().map(|t| t.0)).collect();
    set.into_iter().collect()
}

fn vectorize(op: &PauliSum, words: &[PauliWord]) -> Option<DVector<f64>> {
    let mut v = DVector::zeros(words.len());
    for &(w, c) in op.terms() {
        match words.binary_search(&w) {
            Ok(k) => v[k] = c.re,
            Err(_) => {
                if c.norm() > 1e-14 {
                    return None;
                }
            }
        }
    }
    Some(v)
}

/// `∂_G F_{i1…ir}` for every index tuple, flattened like the C-integrals.
pub fn graph_derivative_columns(g: &ParameterGraph, basis: &CSpaceBasis) -> Vec<PauliSum> {
    let r = g.order();
    let d = basis.len();
    let arrangements = distinct_arrangements(g.edges());
    // Elements lacking every parameter of G can never contribute.
    let relevant: Vec<bool> =
        basis.elements.iter().map(|h| g.edges().iter().any(|m| h.block(*m).is_some())).collect();
    let total = d.pow(r as u32);
    let mut cols = Vec::with_capacity(total);
    let mut idx = vec![0usize; r];
    for flat in 0..total {
        let mut f = flat;
        for k in (0..r).rev() {
            idx[k] = f % d;
            f /= d;
        }
        if idx.iter().all(|&i| relevant[i]) {
            cols.push(graph_derivative_f_with(&idx, &arrangements, basis).pruned(1e-14));
        } else {
            cols.push(PauliSum::zero());
        }
    }
    cols
}

#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    pub graph: ParameterGraph,
    pub order: usize,
    /// Rows: `words`; columns: index tuples over `|C|^r`.
    pub a: DMatrix<f64>,
    pub d: DVector<f64>,
    pub words: Vec<PauliWord>,
    /// Columns with any nonzero entry, for fast residual evaluation.
    pub active: Vec<usize>,
    compact: DMatrix<f64>,
}

impl ConstraintSystem {
    pub fn columns(&self) -> usize {
        self.a.ncols()
    }

    /// `‖A c − d‖` for a flattened order-`r` C-integral vector.
    pub fn residual(&self, c: &[f64]) -> f64 {
        let mut v = -self.d.clone();
        for (k, &col) in self.active.iter().enumerate() {
            let x = c[col];
            if x != 0.0 {
                v.axpy(x, &self.compact.column(k), 1.0);
            }
        }
        v.norm()
    }

    /// `A c` as an operator.
    pub fn apply_operator(&self, c: &[f64]) -> PauliSum {
        let v = &self.a * DVector::from_column_slice(c);
        PauliSum::from_terms(self.words.iter().zip(v.iter()).map(|(w, x)| (*w, num_complex::Complex64::new(*x, 0.0))))
    }

    pub fn with_target(&self, d: DVector<f64>) -> ConstraintSystem {
        ConstraintSystem { d, ..self.clone() }
    }
}

/// Assembles `A(G)` and `d(G) = vec[∂_G H_target]·T′`; `target = None`
/// means decoupling. A target outside the column space is rejected.
pub fn constraint_system(
    g: &ParameterGraph,
    basis: &CSpaceBasis,
    target: Option<&PauliSum>,
    t_prime: f64,
) -> Result<ConstraintSystem> {
    let cols = graph_derivative_columns(g, basis);
    let words = word_index(&cols);
    let mut a = DMatrix::zeros(words.len(), cols.len());
    for (j, col) in cols.iter().enumerate() {
        let v = vectorize(col, &words).expect("column words are in the index");
        a.set_column(j, &v);
    }
    let d = match target {
        None => DVector::zeros(words.len()),
        Some(t) => {
            let outside: f64 = t
                .terms()
                .iter()
                .filter(|(w, _)| words.binary_search(w).is_err())
                .map(|(_, c)| c.norm_sqr())
                .sum::<f64>()
                .sqrt();
            if outside > 1e-12 {
                return Err(Error::Infeasible { graph: g.to_string(), distance: outside * t_prime });
            }
            vectorize(t, &words).unwrap() * t_prime
        }
    };
    if d.norm() > 0.0 {
        let q = linalg::column_space(&a, RANK_TOL);
        let resid = (&d - &q * (q.transpose() * &d)).norm();
        if resid > 1e-9 * d.norm() {
            return Err(Error::Infeasible { graph: g.to_string(), distance: resid });
        }
    }
    let active: Vec<usize> = (0..a.ncols()).filter(|&j| a.column(j).iter().any(|&x| x != 0.0)).collect();
    let compact = DMatrix::from_fn(a.nrows(), active.len(), |i, k| a[(i, active[k])]);
    Ok(ConstraintSystem { graph: g.clone(), order: g.order(), a, d, words, active, compact })
}

#[derive(Clone, Debug)]
pub struct Subspace {
    pub graph: ParameterGraph,
    pub words: Vec<PauliWord>,
    /// Orthonormal columns in `words` coordinates.
    pub vectors: DMatrix<f64>,
}

impl Subspace {
    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn operators(&self) -> Vec<PauliSum> {
        (0..self.dim())
            .map(|k| {
                PauliSum::from_terms(
                    self.words
                        .iter()
                        .zip(self.vectors.column(k).iter())
                        .filter(|(_, x)| x.abs() > 1e-13)
                        .map(|(w, x)| (*w, num_complex::Complex64::new(*x, 0.0))),
                )
            })
            .collect()
    }

    /// Largest residual of projecting the unit-normalized `ops` onto the
    /// span, and of the span onto `ops`.
    pub fn mutual_residual(&self, ops: &[PauliSum]) -> f64 {
        let mut words: BTreeSet<PauliWord> = self.words.iter().copied().collect();
        words.extend(ops.iter().flat_map(|o| o.terms().iter().map(|t| t.0)));
        let words: Vec<PauliWord> = words.into_iter().collect();
        let embed = |v: &[(PauliWord, f64)]| {
            let mut out = DVector::zeros(words.len());
            for (w, x) in v {
                out[words.binary_search(w).unwrap()] = *x;
            }
            out
        };
        let ours: Vec<DVector<f64>> = (0..self.dim())
            .map(|k| embed(&self.words.iter().zip(self.vectors.column(k).iter()).map(|(w, x)| (*w, *x)).collect::<Vec<_>>()))
            .collect();
        let theirs: Vec<DVector<f64>> = ops.iter().map(|o| embed(&o.real_terms().collect::<Vec<_>>())).collect();
        let to_mat = |vs: &[DVector<f64>]| {
            if vs.is_empty() {
                DMatrix::zeros(words.len(), 0)
            } else {
                DMatrix::from_columns(vs)
            }
        };
        let a = to_mat(&ours);
        let b = to_mat(&theirs);
        let qb = linalg::column_space(&b, RANK_TOL);
        if qb.ncols() != a.ncols() {
            return 1.0;
        }
        let bn = DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)] / b.column(j).norm().max(f64::MIN_POSITIVE));
        linalg::projection_residual(&a, &qb).max(linalg::projection_residual(&bn, &a))
    }
}

/// `S(G) = span{∂_G F}`; with a restriction `N` (orthonormal columns in
/// C-integral space) the span of `A(G)·N`.
pub fn achievable_subspace(g: &ParameterGraph, basis: &CSpaceBasis, restriction: Option<&DMatrix<f64>>) -> Subspace {
    let sys = constraint_system(g, basis, None, 1.0).expect("decoupling systems are always consistent");
    subspace_of(&sys, restriction)
}

pub fn subspace_of(sys: &ConstraintSystem, restriction: Option<&DMatrix<f64>>) -> Subspace {
    let m = match restriction {
        Some(n) => &sys.a * n,
        None => sys.a.clone(),
    };
    Subspace { graph: sys.graph.clone(), words: sys.words.clone(), vectors: linalg::column_space(&m, RANK_TOL) }
}

/// Whether `A(G1)` and `A(G2)` have the same row space.
pub fn graphs_equivalent(g1: &ParameterGraph, g2: &ParameterGraph, basis: &CSpaceBasis) -> bool {
    if g1.order() != g2.order() {
        return false;
    }
    let a1 = constraint_system(g1, basis, None, 1.0).unwrap();
    let a2 = constraint_system(g2, basis, None, 1.0).unwrap();
    let r1 = linalg::row_space(&a1.a, RANK_TOL);
    let r2 = linalg::row_space(&a2.a, RANK_TOL);
    linalg::subspace_distance(&r1, &r2) <= 1e-9
}

#[derive(Clone, Debug, Serialize)]
pub struct FeasibilityStep {
    pub graph: String,
    /// Dimension of the reachable set `A(G)·[c + ∩N]` before this step.
    pub image_dim: usize,
    pub distance: f64,
    pub nullspace_dim: usize,
    pub feasible: bool,
}

#[derive(Clone, Debug)]
pub struct Feasibility {
    pub steps: Vec<FeasibilityStep>,
    pub particular: DVector<f64>,
    /// Orthonormal basis of the intersection of the processed nullspaces.
    pub nullspace: DMatrix<f64>,
    /// Reachable directions of the last processed graph, in its word coordinates.
    pub last_image: DMatrix<f64>,
}

impl Feasibility {
    pub fn feasible(&self) -> bool {
        self.steps.iter().all(|s| s.feasible)
    }
}

/// Processes systems in order, keeping a particular solution and the
/// intersection of nullspaces. Stops at the first infeasible target.
pub fn feasible_targets(systems: &[ConstraintSystem]) -> Result<Feasibility> {
    let Some(first) = systems.first() else {
        return Err(Error::Precondition("no constraint systems".into()));
    };
    let cols = first.columns();
    if systems.iter().any(|s| s.columns() != cols) {
        return Err(Error::Precondition("constraint systems must share one C-integral order".into()));
    }
    let mut c = DVector::zeros(cols);
    let mut null = DMatrix::identity(cols, cols);
    let mut steps = Vec::new();
    let mut last_image = DMatrix::zeros(0, 0);
    for sys in systems {
        let m = &sys.a * &null;
        let b = &sys.a * &c;
        let image = linalg::column_space(&m, RANK_TOL);
        let gap = &sys.d - &b;
        let distance = (&gap - &image * (image.transpose() * &gap)).norm();
        let feasible = distance <= 1e-9 * sys.d.norm().max(1.0);
        steps.push(FeasibilityStep {
            graph: sys.graph.to_string(),
            image_dim: image.ncols(),
            distance,
            nullspace_dim: null.ncols(),
            feasible,
        });
        last_image = image;
        if !feasible {
            if steps.len() == 1 {
                return Err(Error::Infeasible { graph: sys.graph.to_string(), distance });
            }
            break;
        }
        let y = linalg::lstsq(&m, &gap, RANK_TOL);
        c += &null * y;
        let inner = linalg::nullspace(&m, RANK_TOL);
        null = &null * inner;
        if let Some(s) = steps.last_mut() {
            s.nullspace_dim = null.ncols();
        }
    }
    Ok(Feasibility { steps, particular: c, nullspace: null, last_image })
}

/// Graph list report entry.
#[derive(Clone, Debug, Serialize)]
pub struct GraphReport {
    pub graph: String,
    pub order: usize,
    pub subspace_dim: usize,
    pub basis: Vec<BTreeMap<String, f64>>,
}

pub fn graph_report(g: &ParameterGraph, basis: &CSpaceBasis, net: &NetworkSpec) -> Option<GraphReport> {
    let embedded = embed(g, net)?;
    let s = achievable_subspace(&embedded, basis, None);
    Some(GraphReport {
        graph: g.to_string(),
        order: g.order(),
        subspace_dim: s.dim(),
        basis: s
            .operators()
            .iter()
            .map(|o| o.real_terms().map(|(w, x)| (w.to_letters(net.n), x)).collect())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cspace::{minimal_composite_cspace, CSpaceOptions};
    use crate::model::Topology;

    fn g(s: &str) -> ParameterGraph {
        s.parse().unwrap()
    }

    #[test]
    fn parse_display_round_trip() {
        for s in ["{11,12}", "{e,e}", "{12,23,34}", "{e,12}"] {
            assert_eq!(g(s).to_string(), s);
        }
        assert_eq!(g("{23,12}"), g("{12,23}"));
        assert!("{}".parse::<ParameterGraph>().is_err());
    }

    #[test]
    fn connectivity_rule() {
        assert!(g("{11,12}").is_connected());
        assert!(g("{e,e}").is_connected());
        assert!(g("{e,12}").is_connected());
        assert!(!g("{11,22}").is_connected());
        assert!(!g("{12,34}").is_connected());
        assert!(!g("{e,11,22}").is_connected());
        assert!(g("{12,23,13}").is_connected());
    }

    #[test]
    fn canonical_form_identifies_isomorphic_graphs() {
        assert!(g("{12,23}").is_isomorphic(&g("{13,23}")));
        assert!(g("{11,12}").is_isomorphic(&g("{33,23}")));
        assert!(!g("{12,12}").is_isomorphic(&g("{12,23}")));
        assert!(!g("{12,23,34}").is_isomorphic(&g("{12,13,14}")));
    }

    #[test]
    fn first_order_lists() {
        let net = NetworkSpec::new(4, &Topology::AllToAll);
        let with_error = enumerate_graphs(&net, 2, true, None);
        let expect: BTreeSet<ParameterGraph> =
            ["{11,11}", "{11,12}", "{12,12}", "{12,23}", "{e,11}", "{e,12}", "{e,e}"].iter().map(|s| g(s).canonical()).collect();
        assert_eq!(with_error.iter().cloned().collect::<BTreeSet<_>>(), expect);
        let r1 = enumerate_graphs(&net, 1, true, None);
        assert_eq!(r1.len(), 3);
        assert_eq!(enumerate_graphs(&net, 1, false, None).len(), 2);
    }

    #[test]
    fn second_order_coupling_list() {
        let net = NetworkSpec::new(5, &Topology::AllToAll);
        let got = enumerate_graphs(&net, 3, false, Some(&[ComponentKind::Coupling]));
        let expect: BTreeSet<ParameterGraph> = ["{12,12,23}", "{12,23,13}", "{12,13,14}", "{12,12,12}", "{12,23,34}"]
            .iter()
            .map(|s| g(s).canonical())
            .collect();
        assert_eq!(got.into_iter().collect::<BTreeSet<_>>(), expect);
    }

    #[test]
    fn pair_topology_has_fewer_classes() {
        let net = NetworkSpec::new(2, &Topology::AllToAll);
        let got = enumerate_graphs(&net, 3, false, Some(&[ComponentKind::Coupling]));
        assert_eq!(got, vec![g("{12,12,12}")]);
    }

    #[test]
    fn decoupling_targets_are_zero_and_equivalence_holds() {
        let net = NetworkSpec::new(3, &Topology::AllToAll);
        let basis = minimal_composite_cspace(&net, &CSpaceOptions::default()).unwrap();
        let sys = constraint_system(&g("{12,23}"), &basis, None, 1.0).unwrap();
        assert_eq!(sys.d.norm(), 0.0);
        assert_eq!(sys.columns(), 121);
        assert_eq!(linalg::rank(&sys.a, RANK_TOL), achievable_subspace(&g("{12,23}"), &basis, None).dim());
        assert!(graphs_equivalent(&g("{12,23}"), &g("{13,23}"), &basis));
        assert!(graphs_equivalent(&g("{12,23}"), &g("{12,23}"), &basis));
        assert!(!graphs_equivalent(&g("{12,12}"), &g("{12,23}"), &basis));
    }

    #[test]
    fn target_outside_span_is_rejected() {
        let net = NetworkSpec::new(3, &Topology::AllToAll);
        let basis = minimal_composite_cspace(&net, &CSpaceOptions::default()).unwrap();
        let bogus = PauliSum::single(PauliWord::parse("XXX").unwrap(), 1.0);
        let err = constraint_system(&g("{11,12}"), &basis, Some(&bogus), 1.0).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }));
    }

    #[test]
    fn feasibility_with_zero_targets_and_an_unreachable_one() {
        let net = NetworkSpec::new(3, &Topology::AllToAll);
        let basis = minimal_composite_cspace(&net, &CSpaceOptions::default()).unwrap();
        let a = constraint_system(&g("{12,12}"), &basis, None, 1.0).unwrap();
        let b = constraint_system(&g("{11,12}"), &basis, None, 1.0).unwrap();
        let ok = feasible_targets(&[a.clone(), b.clone()]).unwrap();
        assert!(ok.feasible());
        assert!(ok.particular.norm() == 0.0);
        let mut d = DVector::zeros(b.words.len());
        d[0] = 1.0;
        let d = &d - &linalg::column_space(&b.a, RANK_TOL) * (linalg::column_space(&b.a, RANK_TOL).transpose() * &d);
        if d.norm() > 1e-6 {
            let bad = b.with_target(d);
            let rep = feasible_targets(&[a, bad]).unwrap();
            assert!(!rep.feasible());
            assert!(rep.steps[1].distance > 0.0);
        }
    }
    fn exprs(list: &[&str]) -> Vec<PauliSum> {
        list.iter().map(|e| PauliSum::parse_expr(e).unwrap()).collect()
    }

    #[test]
    fn loop_plus_edge_subspace() {
        let net = NetworkSpec::new(2, &Topology::AllToAll);
        let basis = minimal_composite_cspace(&net, &CSpaceOptions::default()).unwrap();
        let s = achievable_subspace(&g("{11,12}"), &basis, None);
        assert_eq!(s.dim(), 8);
        let expect = exprs(&["2zz-xx-yy", "xx-yy", "xy", "yx", "xz", "zx", "yz", "zy"]);
        assert!(s.mutual_residual(&expect) < 1e-9, "{}", s.mutual_residual(&expect));
    }

    #[test]
    fn path_subspace_restricted_by_double_edge() {
        let net = NetworkSpec::new(3, &Topology::AllToAll);
        let basis = minimal_composite_cspace(&net, &CSpaceOptions::default()).unwrap();
        let a = constraint_system(&g("{12,12}"), &basis, None, 1.0).unwrap();
        let n = linalg::nullspace(&a.a, RANK_TOL);
        let s = achievable_subspace(&g("{12,23}"), &basis, Some(&n));
        let expect = exprs(&[
            "xyz+xzy+yxz+yzx+zxy+zyx",
            "xxy+xyx+yxx-2yyy+zzy+zyz+yzz",
            "xxz+xzx+zxx-2zzz+yyz+yzy+zyy",
            "yyx+yxy+xyy-3xxx+2zzx+2zxz+2xzz",
            "-xxy-xyx-yxx+zzy+zyz+yzz",
            "xxz+xzx+zxx-yyz-yzy-zyy",
            "-3yyx-3yxy-3xyy+xxx+2zzx+2zxz+2xzz",
        ]);
        assert_eq!(s.dim(), 7);
        assert!(s.mutual_residual(&expect) < 1e-9, "{}", s.mutual_residual(&expect));
    }

    #[test]
    fn disconnected_graphs_have_zero_derivative() {
        let net = NetworkSpec::new(4, &Topology::AllToAll);
        let basis = minimal_composite_cspace(&net, &CSpaceOptions::default()).unwrap();
        for gr in ["{11,22}", "{12,34}"] {
            assert_eq!(achievable_subspace(&g(gr), &basis, None).dim(), 0, "{gr}");
        }
    }

    #[test]
    fn expression_parser() {
        let e = PauliSum::parse_expr("2zz - xx -yy").unwrap();
        assert_eq!(e.len(), 3);
        assert_eq!(e.coeff(PauliWord::parse("ZZ").unwrap()).re, 2.0);
        assert!(PauliSum::parse_expr("2").is_err());
    }
}
