//! One PASS/FAIL line per acceptance criterion. Runs as a plain binary so the
//! summary is printed whether or not output capture is on.

use std::collections::BTreeMap;
use std::fs;
use std::panic;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;
use serde_json::Value;

use aht_core::cspace::{minimal_composite_cspace, CSpaceBasis, CSpaceOptions, FrameAction};
use aht_core::graphs::{self, ParameterGraph};
use aht_core::magnus;
use aht_core::model::{self, ControlSegment, ControlSequence, EnsembleSpec, NetworkSpec, ParamId, ParameterRealization, Topology};
use aht_core::ops::{self, Operator};
use aht_core::pauli::{PauliSum, PauliWord};
use aht_core::rng;
use aht_core::search;
use aht_core::toggling::{self, QuadratureConfig, DOUBLING_TOL};

type Outcome = Result<String, String>;

const W: f64 = std::f64::consts::PI / 2.0;
const DT: f64 = 2.0;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn flagship(n: usize) -> (NetworkSpec, CSpaceBasis) {
    let net = NetworkSpec::new(n, &Topology::AllToAll);
    let basis = minimal_composite_cspace(&net, &CSpaceOptions::default()).unwrap();
    (net, basis)
}

fn random_sequence(q: usize, seed: u64) -> ControlSequence {
    let mut r = rng::stream(seed, rng::purpose::TEST);
    let segs = (0..q)
        .map(|_| ControlSegment {
            duration: DT,
            omega1: r.random_range(0.0..W),
            phi: r.random_range(-3.0..3.0),
            delta_omega: r.random_range(-W..W),
        })
        .collect();
    ControlSequence::new(segs, DT, W, false)
}

fn identity_cycle(q: usize, seed: u64) -> ControlSequence {
    let mut seq = random_sequence(q, seed);
    let v = model::primary_rotation(&seq).adjoint();
    seq.segments.push(search::closing_segment(&v, DT));
    seq
}

fn spectral_norm(h: &Operator) -> f64 {
    let (vals, _) = ops::eigh(&ops::hermitian_part(h)).unwrap();
    vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn h_pert_norm(net: &NetworkSpec, seq: &ControlSequence, real: &ParameterRealization) -> f64 {
    let internal = spectral_norm(&model::internal_hamiltonian(net, real).unwrap());
    let control = seq.segments.iter().map(|s| {
        let a = s.generator();
        (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt() * net.n as f64 / 2.0
    });
    internal + real.eps().abs() * control.fold(0.0f64, f64::max)
}

fn c1_cspace_dimensions() -> Outcome {
    let start = Instant::now();
    for n in 3..=6 {
        let (_, basis) = flagship(n);
        ensure(basis.dims() == vec![3, 3, 5], format!("n={n}: dims {:?}", basis.dims()))?;
        ensure(basis.len() == 11, format!("n={n}: composite {}", basis.len()))?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, format!("took {secs:.1}s"))?;
    Ok(format!("dims 3,3,5 composite 11 for n=3..6 in {secs:.2}s"))
}

fn discrepancy(net: &NetworkSpec, basis: &CSpaceBasis, seq: &ControlSequence, cint: &toggling::CIntegralTensor, real: &ParameterRealization) -> f64 {
    let terms = magnus::reconstruct_magnus(cint, basis, real, 3).unwrap();
    let sum = terms.iter().fold(Operator::zeros(1 << net.n, 1 << net.n), |a, b| a + b);
    // The cycle closes only up to ±1 on the register; strip it so the
    // eigenphases stay near zero, away from the logarithm's branch cut.
    let u = model::primary_propagator(seq, net.n).adjoint() * model::total_propagator(seq, net, real, real.eps()).unwrap();
    let log = ops::logm_unitary(&u).unwrap() / ops::c(seq.total_time(), 0.0);
    spectral_norm(&(sum - log))
}

fn c2_magnus_vs_logm() -> Outcome {
    let (net, basis) = flagship(3);
    let frame = FrameAction::new(&net, &basis).unwrap();
    let ens = EnsembleSpec { sigma_dip: 0.05, sigma_z: 0.05, sigma_eps: 0.05, rho_corr: 0.0, seed: 17 };
    let (mut worst_rel, mut ratios) = (0.0f64, Vec::new());
    for k in 0..20 {
        let seq = identity_cycle(11, 100 + k);
        let cint = toggling::sequence_integrals(&seq, &frame, 3, &QuadratureConfig::default()).unwrap();
        let raw = model::sample_member(&net, &ens, k).unwrap();
        let t = seq.total_time();
        let real = raw.scaled(0.3 / (h_pert_norm(&net, &seq, &raw) * t));
        let norm = h_pert_norm(&net, &seq, &real);
        let full = discrepancy(&net, &basis, &seq, &cint, &real);
        let half = discrepancy(&net, &basis, &seq, &cint, &real.scaled(0.5));
        worst_rel = worst_rel.max(full / norm);
        let ratio = full / half;
        ensure((16.0 * 0.7..=16.0 * 1.3).contains(&ratio), format!("sequence {k}: halving ratio {ratio:.2}"))?;
        ratios.push(ratio);
    }
    ensure(worst_rel <= 5e-3, format!("worst relative discrepancy {worst_rel:.3e}"))?;
    let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    Ok(format!("worst discrepancy {worst_rel:.2e}·‖H‖, halving ratio in [{lo:.2}, {hi:.2}]"))
}

/// `Π_k t_k` coefficient of `F(h(Σ_k t_k e_{g_k}))` by central differences;
/// exact up to rounding because F is homogeneous of degree r.
fn mixed_difference(indices: &[usize], edges: &[ParamId], net: &NetworkSpec, basis: &CSpaceBasis, step: f64) -> PauliSum {
    let r = edges.len();
    let mut acc = PauliSum::default();
    for mask in 0..(1u32 << r) {
        let signs: Vec<f64> = (0..r).map(|k| if mask >> k & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let mut real = ParameterRealization::zeros(net);
        for (e, s) in edges.iter().zip(&signs) {
            real.set(*e, real.get(*e).unwrap() + s * step);
        }
        let h: Vec<PauliSum> = indices.iter().map(|&i| basis.elements[i].instantiate(&real)).collect();
        let refs: Vec<&PauliSum> = h.iter().collect();
        acc.add_scaled(&magnus::f_coefficient_pauli(&refs), signs.iter().product::<f64>());
    }
    acc.scale(ops::c((2.0 * step).powi(r as i32).recip(), 0.0))
}

fn c3_f_identities() -> Outcome {
    let p = |s: &str| PauliSum::single(PauliWord::parse(s).unwrap(), 1.0).to_dense(2);
    let (a, b) = (p("XZ") + p("YY") * ops::c(0.3, 0.0), p("ZI") - p("XY") * ops::c(1.7, 0.0));
    let f2 = magnus::f_coefficient(&[a.clone(), b.clone()]).unwrap();
    let half_comm = ops::commutator(&a, &b).unwrap() * ops::c(0.0, -0.5);
    let e2 = ops::max_abs(&(f2 - half_comm));
    ensure(e2 <= 1e-12, format!("r=2 deviates by {e2:.2e}"))?;
    let commuting = [p("ZZ"), p("ZI") * ops::c(2.0, 0.0), p("IZ") * ops::c(-0.5, 0.0)];
    let e3 = ops::max_abs(&magnus::f_coefficient(&commuting).unwrap());
    ensure(e3 <= 1e-12, format!("r=3 on commuting inputs is {e3:.2e}"))?;

    let (net, basis) = flagship(3);
    let mut r = rng::stream(5, rng::purpose::TEST);
    let pool: Vec<ParameterGraph> = [2, 3].iter().flat_map(|&k| graphs::enumerate_graphs(&net, k, true, None)).collect();
    let (mut probes, mut worst) = (0, 0.0f64);
    while probes < 10 {
        let g = &pool[r.random_range(0..pool.len())];
        let indices: Vec<usize> = (0..g.order()).map(|_| r.random_range(0..basis.len())).collect();
        let analytic = magnus::graph_derivative_f(&indices, g, &basis);
        if analytic.norm() < 1e-8 {
            continue;
        }
        let mut mult: BTreeMap<ParamId, usize> = BTreeMap::new();
        for e in g.edges() {
            *mult.entry(*e).or_default() += 1;
        }
        let symmetry: f64 = mult.values().map(|&m| (1..=m).product::<usize>() as f64).product();
        let numeric = mixed_difference(&indices, g.edges(), &net, &basis, 0.1).scale(ops::c(1.0 / symmetry, 0.0));
        let rel = (&analytic - &numeric).norm() / analytic.norm();
        ensure(rel <= 1e-6, format!("graph {g} indices {indices:?}: relative {rel:.2e}"))?;
        worst = worst.max(rel);
        probes += 1;
    }
    Ok(format!("r=2 {e2:.1e}, commuting r=3 {e3:.1e}, graph derivative vs differences {worst:.1e} over 10 probes"))
}

fn g(s: &str) -> ParameterGraph {
    s.parse().unwrap()
}

fn as_set(list: &[&str]) -> std::collections::BTreeSet<ParameterGraph> {
    list.iter().map(|s| g(s).canonical()).collect()
}

fn c4_graph_enumeration() -> Outcome {
    let r2 = graphs::enumerate_graphs(&NetworkSpec::new(4, &Topology::AllToAll), 2, true, None);
    let want2 = as_set(&["{11,11}", "{11,12}", "{12,12}", "{12,23}", "{e,11}", "{e,12}", "{e,e}"]);
    ensure(r2.len() == 7 && r2.iter().cloned().collect::<std::collections::BTreeSet<_>>() == want2, format!("r=2 list {r2:?}"))?;
    let net5 = NetworkSpec::new(5, &Topology::AllToAll);
    let r3 = graphs::enumerate_graphs(&net5, 3, false, Some(&[model::ComponentKind::Coupling]));
    let want3 = as_set(&["{12,12,23}", "{12,23,13}", "{12,13,14}", "{12,12,12}", "{12,23,34}"]);
    ensure(r3.len() == 5 && r3.iter().cloned().collect::<std::collections::BTreeSet<_>>() == want3, format!("r=3 list {r3:?}"))?;

    let (_, basis) = flagship(3);
    for (a, b) in [("{12,23}", "{13,23}"), ("{11,12}", "{33,23}"), ("{e,12}", "{e,23}"), ("{11,11}", "{22,22}")] {
        ensure(g(a).is_isomorphic(&g(b)), format!("{a} and {b} not isomorphic"))?;
        ensure(graphs::graphs_equivalent(&g(a), &g(b), &basis), format!("{a} and {b} not equivalent"))?;
    }
    ensure(!graphs::graphs_equivalent(&g("{12,12}"), &g("{12,23}"), &basis), "{12,12} equivalent to {12,23}")?;
    Ok("7 graphs at r=2, 5 coupling graphs at r=3, isomorphic pairs share row spaces".into())
}

fn c5_disconnected_graphs() -> Outcome {
    let (net, basis) = flagship(5);
    let (mut count, mut worst) = (0, 0.0f64);
    for r in 2..=3 {
        for gr in graphs::enumerate_all_graphs(&net, r, true, None).into_iter().filter(|x| !x.is_connected()) {
            let total: f64 = graphs::graph_derivative_columns(&gr, &basis).iter().map(|c| c.norm()).sum();
            ensure(total <= 1e-10, format!("{gr}: Σ‖∂F‖ = {total:.2e}"))?;
            worst = worst.max(total);
            count += 1;
        }
    }
    ensure(count > 0, "no disconnected graphs enumerated")?;
    Ok(format!("{count} disconnected graphs on 5 qubits, largest Σ‖∂F‖ {:.1e}", worst.abs()))
}

fn exprs(list: &[&str]) -> Vec<PauliSum> {
    list.iter().map(|e| PauliSum::parse_expr(e).unwrap()).collect()
}

fn c6_subspaces() -> Outcome {
    let (_, basis2) = flagship(2);
    let s = graphs::achievable_subspace(&g("{11,12}"), &basis2, None);
    let res_a = s.mutual_residual(&exprs(&["2zz-xx-yy", "xx-yy", "xy", "yx", "xz", "zx", "yz", "zy"]));
    ensure(s.dim() == 8 && res_a <= 1e-9, format!("S({{11,12}}): dim {}, residual {res_a:.2e}", s.dim()))?;

    let (_, basis3) = flagship(3);
    let a = graphs::constraint_system(&g("{12,12}"), &basis3, None, 1.0).unwrap();
    let null = aht_core::linalg::nullspace(&a.a, aht_core::linalg::RANK_TOL);
    let s = graphs::achievable_subspace(&g("{12,23}"), &basis3, Some(&null));
    let res_b = s.mutual_residual(&exprs(&[
        "xyz+xzy+yxz+yzx+zxy+zyx",
        "xxy+xyx+yxx-2yyy+zzy+zyz+yzz",
        "xxz+xzx+zxx-2zzz+yyz+yzy+zyy",
        "yyx+yxy+xyy-3xxx+2zzx+2zxz+2xzz",
        "-xxy-xyx-yxx+zzy+zyz+yzz",
        "xxz+xzx+zxx-yyz-yzy-zyy",
        "-3yyx-3yxy-3xyy+xxx+2zzx+2zxz+2xzz",
    ]));
    ensure(s.dim() == 7 && res_b <= 1e-9, format!("restricted S({{12,23}}): dim {}, residual {res_b:.2e}", s.dim()))?;
    Ok(format!("dims 8 and 7, residuals {res_a:.1e} and {res_b:.1e}"))
}

fn c7_c_integrals() -> Outcome {
    let (net, basis) = flagship(3);
    let frame = FrameAction::new(&net, &basis).unwrap();
    let quad = QuadratureConfig::default();
    let (mut s2, mut s3, mut riemann, mut doubling) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..3 {
        let seq = random_sequence(6, 40 + k);
        let ci = toggling::sequence_integrals(&seq, &frame, 3, &quad).unwrap();
        let d = ci.dim;
        let (n1, n2) = (ci.max_abs(1), ci.max_abs(2));
        for i in 0..d {
            for j in 0..d {
                s2 = s2.max((ci.get(&[i, j]) + ci.get(&[j, i]) - ci.get(&[i]) * ci.get(&[j])).abs() / (n1 * n1));
                for l in 0..d {
                    let lhs = ci.get(&[i, j, l]) + ci.get(&[j, i, l]) + ci.get(&[j, l, i]);
                    s3 = s3.max((lhs - ci.get(&[j, l]) * ci.get(&[i])).abs() / (n1 * n2));
                }
            }
        }
        let oracle = toggling::riemann_c_integrals(&seq, &frame, 3, 2000);
        for r in 1..=3 {
            let scale = ci.max_abs(r);
            for (a, b) in ci.order_slice(r).iter().zip(oracle.order_slice(r)) {
                riemann = riemann.max((a - b).abs() / scale);
            }
        }
        doubling = doubling.max(toggling::doubling_change(&seq, &frame, 3, &quad).unwrap());
    }
    ensure(s2 <= 1e-9, format!("r=2 shuffle {s2:.2e}"))?;
    ensure(s3 <= 1e-8, format!("r=3 shuffle {s3:.2e}"))?;
    ensure(riemann <= 1e-4, format!("Riemann oracle {riemann:.2e}"))?;
    ensure(doubling <= DOUBLING_TOL, format!("node doubling {doubling:.2e} above {DOUBLING_TOL:.0e}"))?;
    Ok(format!("shuffle {s2:.1e}/{s3:.1e}, Riemann {riemann:.1e}, doubling {doubling:.1e}"))
}

fn c8_symmetrization() -> Outcome {
    // Static partition: the amplitude-error component is odd under the
    // negated mirror, so its even-order parity is not constrained.
    let net = NetworkSpec::new(3, &Topology::AllToAll).restricted(&[model::ComponentKind::Detuning, model::ComponentKind::Coupling]);
    let basis = minimal_composite_cspace(&net, &CSpaceOptions::default()).unwrap();
    let frame = FrameAction::new(&net, &basis).unwrap();
    let quad = QuadratureConfig::default();
    let ens = EnsembleSpec { sigma_dip: 0.03, sigma_z: 0.02, sigma_eps: 0.0, rho_corr: 0.0, seed: 9 };
    let (mut parity, mut shrink) = (0.0f64, f64::MAX);
    for k in 0..10 {
        let cycle = identity_cycle(9, 200 + k);
        let sym = search::symmetrize(&cycle, net.n).map_err(|e| e.to_string())?;
        let real = model::sample_member(&net, &ens, k).unwrap();
        let first_order = |seq: &ControlSequence| {
            let ci = toggling::sequence_integrals(seq, &frame, 2, &quad).unwrap();
            let h = magnus::reconstruct_magnus(&ci, &basis, &real, 2).unwrap();
            (ci, ops::hs_norm(&h[1]))
        };
        let (_, base) = first_order(&cycle);
        let (ci, after) = first_order(&sym);
        parity = parity.max(toggling::parity_residual(&ci, 2));
        shrink = shrink.min(base / after.max(f64::MIN_POSITIVE));
    }
    ensure(parity <= 1e-6, format!("parity residual {parity:.2e}"))?;
    ensure(shrink >= 1e3, format!("first-order term shrinks only {shrink:.2e}x"))?;
    Ok(format!("10 random identity cycles: parity {parity:.1e}, H̄(1) shrink ≥ {shrink:.1e}x"))
}

fn campaigns() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../campaigns")
}

fn aht(args: &[&str]) -> Result<std::process::Output, String> {
    Command::new(env!("CARGO_BIN_EXE_aht")).args(args).output().map_err(|e| e.to_string())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_series(path: &Path) -> Vec<(f64, f64)> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(|r| {
        let r = r.unwrap();
        (r[0].parse().unwrap(), r[1].parse().unwrap())
    }).collect()
}

fn c9_design_smoke() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let dir = campaigns().join("decoupling");
    let out = tmp.path().join("design");
    let run = aht(&["--config", s(&dir.join("config.json")), "--out", s(&out), "design"])?;
    ensure(run.status.code() == Some(0), format!("design exited {:?}", run.status.code()))?;
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("design.json")).unwrap()).unwrap();
    let f0 = report["breakdown"]["zeroth"].as_f64().unwrap();
    let f1 = report["breakdown"]["orders"]["2"].as_f64().unwrap();
    let q = report["segments"].as_u64().unwrap();
    let evals = report["evaluations"].as_u64().unwrap();
    ensure(f0 <= 1e-3 && f1 <= 1e-2, format!("f0 {f0:.2e}, f1 {f1:.2e}"))?;
    ensure(q <= 24 && evals <= 100_000, format!("Q {q}, {evals} evaluations"))?;

    let mut cfg: Value = serde_json::from_str(&fs::read_to_string(dir.join("config.json")).unwrap()).unwrap();
    cfg["simulation"]["sequences"] = serde_json::json!({
        "design": out.join("sequence.csv"),
        "idle": dir.join("idle.csv"),
    });
    let cfg_path = tmp.path().join("config.json");
    fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let sim = tmp.path().join("sim");
    let run = aht(&["--config", s(&cfg_path), "--out", s(&sim), "simulate"])?;
    ensure(run.status.code() == Some(0), format!("simulate exited {:?}", run.status.code()))?;
    let idle = read_series(&sim.join("idle.csv"));
    let design = read_series(&sim.join("design.csv"));
    let k = idle.iter().position(|&(_, v)| v < 0.1).ok_or("idle never decays below 0.1")?;
    let (t, sd) = design[k];
    ensure(sd >= 0.8, format!("design S = {sd:.3} at {t} ms where idle is {:.3}", idle[k].1))?;
    let held = design.iter().take_while(|x| x.1 >= 0.8).last().map_or(0.0, |x| x.0);
    let &(t_end, s_end) = design.last().unwrap();
    Ok(format!(
        "f0 {f0:.1e}, f1 {f1:.1e}, Q {q}, {evals} evals; idle {:.3} at {t} ms where design is {sd:.3}; design ≥ 0.8 until {held} ms, {s_end:.3} at {t_end} ms",
        idle[k].1
    ))
}

fn c10_correlated_sampling() -> Outcome {
    let net = NetworkSpec::new(3, &Topology::AllToAll);
    let sd = model::khz_to_rad_per_us(0.75);
    let mut detail = Vec::new();
    for rho in [0.0, 0.5, 1.0] {
        let ens = EnsembleSpec { sigma_dip: sd, sigma_z: sd, sigma_eps: 0.01, rho_corr: rho, seed: 11 };
        let (mut b, mut d) = (Vec::new(), Vec::new());
        for k in 0..10_000 {
            let real = model::sample_member(&net, &ens, k).unwrap();
            b.push(real.get(ParamId::coupling(0, 1)).unwrap());
            d.push(real.get(ParamId::detuning(0)).unwrap() + real.get(ParamId::detuning(1)).unwrap());
        }
        let (b, d) = (DVector::from_vec(b), DVector::from_vec(d));
        let centered = |v: &DVector<f64>| v.add_scalar(-v.mean());
        let (bc, dc) = (centered(&b), centered(&d));
        let corr = bc.dot(&dc) / (bc.norm() * dc.norm());
        let std = (bc.norm_squared() / (b.len() - 1) as f64).sqrt();
        ensure((corr - rho).abs() <= 0.05, format!("rho {rho}: corr {corr:.3}"))?;
        ensure((std / sd - 1.0).abs() <= 0.03, format!("rho {rho}: std ratio {:.3}", std / sd))?;
        detail.push(format!("{corr:.3}"));
    }

    let tmp = tempfile::tempdir().unwrap();
    let run = aht(&["--config", s(&campaigns().join("cross/config.json")), "--out", s(tmp.path()), "simulate"])?;
    ensure(run.status.code() == Some(0), format!("cross simulate exited {:?}", run.status.code()))?;
    let mut rdr = csv::Reader::from_path(tmp.path().join("rho_summary.csv")).unwrap();
    let sigmas: Vec<(f64, f64)> = rdr.records().map(|r| {
        let r = r.unwrap();
        (r[1].parse().unwrap(), r[2].parse().unwrap())
    }).collect();
    ensure(sigmas.iter().map(|x| x.0).collect::<Vec<_>>() == vec![0.0, 0.5, 1.0], format!("rho grid {sigmas:?}"))?;
    ensure(sigmas.windows(2).all(|w| w[1].1 > w[0].1), format!("fitted sigma not increasing: {sigmas:?}"))?;
    let fitted: Vec<String> = sigmas.iter().map(|x| format!("{:.4}", x.1)).collect();
    Ok(format!("corr {} at rho 0/0.5/1; fitted sigma {} /ms", detail.join("/"), fitted.join(" < ")))
}

fn c11_replay() -> Outcome {
    let mut compared = 0;
    for name in ["decoupling", "cross"] {
        let results = campaigns().join(name).join("results");
        let tmp = tempfile::tempdir().unwrap();
        let run = aht(&["--out", s(tmp.path()), "simulate", "--replay", s(&results.join("simulate.record.json"))])?;
        ensure(run.status.code() == Some(0), format!("{name}: replay exited {:?}", run.status.code()))?;
        for entry in fs::read_dir(&results).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "csv") {
                let file = path.file_name().unwrap();
                let again = fs::read(tmp.path().join(file)).map_err(|e| format!("{name}: {file:?} {e}"))?;
                ensure(again == fs::read(&path).unwrap(), format!("{name}: {file:?} differs"))?;
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} shipped CSVs reproduced bit-identically"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("c-space dimensions", c1_cspace_dimensions),
        ("Magnus vs unitary log", c2_magnus_vs_logm),
        ("F-coefficient identities", c3_f_identities),
        ("graph enumeration", c4_graph_enumeration),
        ("disconnected graphs vanish", c5_disconnected_graphs),
        ("achievable subspaces", c6_subspaces),
        ("C-integral engine", c7_c_integrals),
        ("symmetrization", c8_symmetrization),
        ("design smoke test", c9_design_smoke),
        ("correlated sampling", c10_correlated_sampling),
        ("reproducibility", c11_replay),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {:>2} {name}: {detail} [{secs:.1}s]", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:>2} {name}: {why} [{secs:.1}s]", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
