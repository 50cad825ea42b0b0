use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::Serialize;

use aht_core::config::ProjectConfig;
use aht_core::cspace::{minimal_composite_cspace, CSpaceBasis, FrameAction};
use aht_core::graphs::{self, feasible_targets, ConstraintSystem, FeasibilityStep};
use aht_core::magnus;
use aht_core::model::{self, ControlSequence, NetworkSpec, ParameterRealization};
use aht_core::objectives::Evaluator;
use aht_core::ops;
use aht_core::par::Execution;
use aht_core::pauli::PauliSum;
use aht_core::search::{self, SearchConfig};
use aht_core::simlab::{self, Campaign, RunMetadata, Series};
use aht_core::toggling::{self, CIntegralTensor};

use crate::{hash_file, CliError, CliResult, Command, Global, NamedInput, RunRecord};

struct Session {
    global: Global,
    command: Command,
    cfg: ProjectConfig,
    base: PathBuf,
    out: PathBuf,
    inputs: BTreeMap<String, String>,
    sequences: Vec<NamedInput>,
    outputs: BTreeMap<String, String>,
}

impl Session {
    fn open(global: &Global, command: &Command, cfg: ProjectConfig, base: PathBuf) -> CliResult<Self> {
        fs::create_dir_all(&global.out)
            .map_err(|e| CliError::Failed(format!("cannot create {}: {e}", global.out.display())))?;
        Ok(Self {
            global: global.clone(),
            command: command.clone(),
            cfg,
            base,
            out: global.out.clone(),
            inputs: BTreeMap::new(),
            sequences: Vec::new(),
            outputs: BTreeMap::new(),
        })
    }

    fn exec(&self) -> Execution {
        match self.global.threads {
            Some(1) => Execution::Sequential,
            _ => Execution::Parallel,
        }
    }

    /// Path of `path` relative to the output directory, where the record lives.
    fn input_key(&self, path: &Path) -> String {
        let abs = std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf());
        let out = std::path::absolute(&self.out).unwrap_or_else(|_| self.out.clone());
        pathdiff::diff_paths(&abs, &out).unwrap_or(abs).display().to_string()
    }

    fn input(&mut self, path: &Path) -> CliResult<String> {
        let h = hash_file(path)?;
        let key = self.input_key(path);
        self.inputs.insert(key.clone(), h);
        Ok(key)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.out.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Failed(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.insert(name.to_string(), simlab::sha256_hex(bytes));
        Ok(path)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Failed(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn record(&self) -> RunRecord {
        RunRecord {
            command: self.command.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.global.seed,
            rng: aht_core::rng::ALGORITHM.to_string(),
            config_hash: self.cfg.hash(),
            config: self.cfg.clone(),
            inputs: self.inputs.clone(),
            sequences: self.sequences.clone(),
            outputs: self.outputs.clone(),
        }
    }

    fn finish(&self) -> CliResult<()> {
        let path = self.out.join(format!("{}.record.json", self.command.name()));
        let mut text = serde_json::to_string_pretty(&self.record()).map_err(|e| CliError::Failed(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::Failed(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }

    fn basis(&self) -> CliResult<(NetworkSpec, CSpaceBasis)> {
        let net = self.cfg.network()?;
        let basis = minimal_composite_cspace(&net, &self.cfg.cspace_options())?;
        Ok((net, basis))
    }

    fn load_sequence(&mut self, path: &Path) -> CliResult<(ControlSequence, String)> {
        let seq = ControlSequence::load(path, self.cfg.control.omega_max(), self.cfg.control.endpoint_rule)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let key = self.input(path)?;
        Ok((seq, key))
    }
}

fn load_config(global: &Global) -> CliResult<(ProjectConfig, PathBuf)> {
    let path = global.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let cfg = ProjectConfig::load(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

pub fn run_command(global: &Global, command: &Command) -> CliResult<()> {
    if let Command::Simulate { replay: Some(record), .. } = command {
        return replay(global, record);
    }
    let (cfg, base) = load_config(global)?;
    let mut s = Session::open(global, command, cfg, base)?;
    if let Some(p) = &global.config {
        s.input(p)?;
    }
    let result = match command.clone() {
        Command::Cspace => cspace(&mut s),
        Command::Graphs { order, no_error } => graphs_cmd(&mut s, order, !no_error),
        Command::Feasible => feasible(&mut s).map(|_| ()),
        Command::Design => design(&mut s),
        Command::Verify { sequence, sample } => verify(&mut s, &sequence, sample),
        Command::Simulate { sequences, .. } => sequence_files(&s, &sequences).and_then(|f| simulate(&mut s, &f)),
        Command::Symmetrize { sequence } => symmetrize(&mut s, &sequence),
        Command::Probe { order, samples, q, amplitude } => probe(&mut s, order, samples, q, amplitude),
    };
    // Non-converged and infeasible runs still leave their artifacts behind.
    s.finish()?;
    result
}

fn cspace(s: &mut Session) -> CliResult<()> {
    let (_, basis) = s.basis()?;
    let dims: Vec<String> = basis.ranges.iter().map(|(k, r)| format!("{k} {}", r.len())).collect();
    println!("component dimensions: {}", dims.join(", "));
    println!("composite dimension: {}", basis.len());
    let path = s.write_json("cspace_basis.json", &basis.dump())?;
    println!("basis dump: {}", path.display());
    Ok(())
}

fn graphs_cmd(s: &mut Session, order: usize, include_error: bool) -> CliResult<()> {
    if order == 0 || order > magnus::ORDER_CAP {
        return Err(CliError::Config(format!("order must be in 1..={}", magnus::ORDER_CAP)));
    }
    let (net, basis) = s.basis()?;
    let list = graphs::enumerate_graphs(&net, order, include_error, None);
    let reports: Vec<_> = list.iter().filter_map(|g| graphs::graph_report(g, &basis, &net)).collect();
    println!("{} connected graphs at order {order}", reports.len());
    for r in &reports {
        println!("  {:<16} dim S = {}", r.graph, r.subspace_dim);
    }
    s.write_json(&format!("graphs_r{order}.json"), &reports)?;
    Ok(())
}

#[derive(Serialize)]
struct FeasibilityReport {
    feasible: bool,
    orders: BTreeMap<usize, Vec<FeasibilityStep>>,
}

/// Chains feasibility per order; an infeasible target is an error.
fn check_feasibility(systems: &[ConstraintSystem]) -> CliResult<FeasibilityReport> {
    let mut by_order: BTreeMap<usize, Vec<ConstraintSystem>> = BTreeMap::new();
    for sys in systems {
        by_order.entry(sys.order).or_default().push(sys.clone());
    }
    let mut report = FeasibilityReport { feasible: true, orders: BTreeMap::new() };
    for (r, group) in by_order {
        let f = feasible_targets(&group)?;
        report.feasible &= f.feasible();
        report.orders.insert(r, f.steps);
    }
    Ok(report)
}

fn print_feasibility(report: &FeasibilityReport) {
    for (r, steps) in &report.orders {
        for st in steps {
            println!(
                "  order {r} {:<14} image {:>3}  nullspace {:>4}  distance {:.3e}  {}",
                st.graph,
                st.image_dim,
                st.nullspace_dim,
                st.distance,
                if st.feasible { "ok" } else { "INFEASIBLE" }
            );
        }
    }
}

fn feasible(s: &mut Session) -> CliResult<FeasibilityReport> {
    let (_, basis) = s.basis()?;
    let spec = match s.cfg.design_spec(&basis) {
        Err(aht_core::Error::Infeasible { graph, distance }) => {
            // The target alone already leaves the graph's achievable subspace.
            let report = serde_json::json!({ "feasible": false, "graph": graph, "distance": distance });
            s.write_json("feasibility.json", &report)?;
            return Err(CliError::Infeasible(format!("target for graph {graph} lies {distance:.3e} outside its achievable subspace")));
        }
        other => other?,
    };
    let report = check_feasibility(&spec.systems)?;
    print_feasibility(&report);
    s.write_json("feasibility.json", &report)?;
    if !report.feasible {
        let bad = report.orders.values().flatten().find(|st| !st.feasible).map(|st| st.graph.clone()).unwrap_or_default();
        return Err(CliError::Infeasible(format!("target for graph {bad} is not reachable; see feasibility.json")));
    }
    Ok(report)
}

#[derive(Serialize)]
struct GraphCheck {
    order: usize,
    graph: String,
    /// `‖A c − d‖` from the linear system.
    residual: f64,
    /// Same quantity from the graph derivative of the reconstructed term.
    residual_magnus: f64,
    target_norm: f64,
    /// `T′` realized along the target direction; absent for decoupling.
    achieved_t_prime: Option<f64>,
    pass: bool,
}

fn vectorize(op: &PauliSum, sys: &ConstraintSystem) -> (DVector<f64>, f64) {
    let v = DVector::from_iterator(sys.words.len(), sys.words.iter().map(|w| op.coeff(*w).re));
    let outside: f64 = op
        .terms()
        .iter()
        .filter(|(w, _)| sys.words.binary_search(w).is_err())
        .map(|(_, c)| c.norm_sqr())
        .sum();
    (v, outside)
}

fn graph_checks(
    cint: &CIntegralTensor,
    systems: &[ConstraintSystem],
    basis: &CSpaceBasis,
    t_prime: f64,
    threshold: f64,
) -> Vec<GraphCheck> {
    systems
        .iter()
        .map(|sys| {
            let residual = sys.residual(cint.order_slice(sys.order));
            let derived = magnus::graph_derivative_magnus(cint, &sys.graph, basis);
            let (v, outside) = vectorize(&derived, sys);
            let residual_magnus = ((&v - &sys.d).norm_squared() + outside).sqrt();
            let target_norm = sys.d.norm();
            let achieved_t_prime = (target_norm > 0.0).then(|| {
                let unit = &sys.d / t_prime;
                v.dot(&unit) / unit.norm_squared()
            });
            let agree = (residual - residual_magnus).abs() <= 1e-6 * (1.0 + residual.max(target_norm));
            GraphCheck {
                order: sys.order,
                graph: sys.graph.to_string(),
                residual,
                residual_magnus,
                target_norm,
                achieved_t_prime,
                pass: agree && residual <= threshold.max(1e-9),
            }
        })
        .collect()
}

fn print_checks(checks: &[GraphCheck]) {
    println!("  order graph          residual     via Magnus   achieved T'   pass");
    for c in checks {
        let tp = c.achieved_t_prime.map(|t| format!("{t:.4}")).unwrap_or_else(|| "-".into());
        println!(
            "  {:<5} {:<14} {:<12.4e} {:<12.4e} {:<13} {}",
            c.order,
            c.graph,
            c.residual,
            c.residual_magnus,
            tp,
            if c.pass { "yes" } else { "no" }
        );
    }
}

#[derive(Serialize)]
struct DesignReport {
    converged: bool,
    evaluations: usize,
    segments: usize,
    t_seq_us: f64,
    breakdown: aht_core::objectives::CostBreakdown,
    graphs: Vec<GraphCheck>,
}

fn search_config(s: &Session) -> CliResult<SearchConfig> {
    let mut cfg = s.cfg.search()?.clone();
    if let Some(seed) = s.global.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn design(s: &mut Session) -> CliResult<()> {
    let search_cfg = search_config(s)?;
    let (net, basis) = s.basis()?;
    let spec = s.cfg.design_spec(&basis)?;
    if !spec.systems.is_empty() {
        let report = check_feasibility(&spec.systems)?;
        s.write_json("feasibility.json", &report)?;
        if !report.feasible {
            print_feasibility(&report);
            return Err(CliError::Infeasible("graph targets are not jointly reachable; see feasibility.json".into()));
        }
    }
    let t_prime = s.cfg.design()?.t_prime;
    let eval = Evaluator::new(net, basis, spec, s.cfg.quadrature())?;
    let out = search::optimize(&eval, &search_cfg, s.cfg.control.dt_us, s.cfg.control.omega_max(), s.exec())?;
    let mut csv = Vec::new();
    out.best.write_csv(&mut csv)?;
    s.write("sequence.csv", &csv)?;
    let mut trace = Vec::new();
    search::write_trace(&mut trace, &out.trace)?;
    s.write("trace.jsonl", &trace)?;
    let cint = eval.integrals(&out.best)?;
    let checks = graph_checks(&cint, &eval.spec.systems, &eval.basis, t_prime, search_cfg.threshold.sqrt().max(search_cfg.threshold));
    println!(
        "{} after {} evaluations: Q = {}, total {:.4e} (primary {:.3e}, zeroth {:.3e})",
        if out.converged { "converged" } else { "NOT converged" },
        out.evaluations,
        out.best.len(),
        out.breakdown.total,
        out.breakdown.primary,
        out.breakdown.zeroth
    );
    print_checks(&checks);
    let report = DesignReport {
        converged: out.converged,
        evaluations: out.evaluations,
        segments: out.best.len(),
        t_seq_us: out.best.total_time(),
        breakdown: out.breakdown.clone(),
        graphs: checks,
    };
    s.write_json("design.json", &report)?;
    if !out.converged {
        return Err(CliError::NotConverged(format!(
            "best total {:.4e} above threshold {:.1e}; best-effort sequence written",
            out.breakdown.total, search_cfg.threshold
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleCheck {
    realization_seed: u64,
    scale: f64,
    h_pert_norm: f64,
    discrepancy: f64,
    relative: f64,
}

#[derive(Serialize)]
struct VerifyReport {
    t_seq_us: f64,
    identity_cycle_fidelity: f64,
    primary_cost: Option<f64>,
    zeroth_residual: Option<f64>,
    graphs: Vec<GraphCheck>,
    parity: BTreeMap<usize, f64>,
    oracle: Option<OracleCheck>,
}

fn spectral_norm(h: &ops::Operator) -> CliResult<f64> {
    let (vals, _) = ops::eigh(h)?;
    Ok(vals.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Perturbation norm bound: internal part plus the largest error-scaled
/// control term.
fn h_pert_norm(net: &NetworkSpec, seq: &ControlSequence, real: &ParameterRealization) -> CliResult<f64> {
    let internal = spectral_norm(&model::internal_hamiltonian(net, real)?)?;
    let control = seq
        .segments
        .iter()
        .map(|sg| {
            let a = sg.generator();
            (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt() * net.n as f64 / 2.0
        })
        .fold(0.0f64, f64::max);
    Ok(internal + real.eps().abs() * control)
}

fn oracle_check(net: &NetworkSpec, basis: &CSpaceBasis, seq: &ControlSequence, cint: &CIntegralTensor, s: &Session, sample: u64) -> CliResult<OracleCheck> {
    let ens = s.cfg.ensemble()?;
    let raw = model::sample_member(net, &ens, sample)?;
    let norm = h_pert_norm(net, seq, &raw)?;
    let t = seq.total_time();
    let scale = if norm * t > 0.3 { 0.3 / (norm * t) } else { 1.0 };
    let real = raw.scaled(scale);
    let terms = magnus::reconstruct_magnus(cint, basis, &real, 3)?;
    let sum = terms.iter().fold(ops::Operator::zeros(1 << net.n, 1 << net.n), |a, b| a + b);
    // Toggling-frame propagator: removes the ±1 an SU(2) cycle leaves on an
    // odd register, which would otherwise straddle the log branch cut.
    let u = model::primary_propagator(seq, net.n).adjoint() * model::total_propagator(seq, net, &real, real.eps())?;
    let log = ops::logm_unitary(&u)? / ops::c(t, 0.0);
    let discrepancy = spectral_norm(&ops::hermitian_part(&(sum - log)))?;
    let h_norm = norm * scale;
    Ok(OracleCheck {
        realization_seed: sample,
        scale,
        h_pert_norm: h_norm,
        discrepancy,
        relative: if h_norm > 0.0 { discrepancy / h_norm } else { 0.0 },
    })
}

fn verify(s: &mut Session, path: &Path, sample: u64) -> CliResult<()> {
    let (seq, _) = s.load_sequence(path)?;
    let (net, basis) = s.basis()?;
    let frame = FrameAction::new(&net, &basis)?;
    let quad = s.cfg.quadrature();
    let spec = s.cfg.design.as_ref().map(|_| s.cfg.design_spec(&basis)).transpose()?;
    let t_prime = s.cfg.design.as_ref().map_or(1.0, |d| d.t_prime);
    let threshold = s.cfg.search.as_ref().map_or(1e-3, |c| c.threshold);
    let threshold = threshold.sqrt().max(threshold);
    let systems = spec.as_ref().map(|d| d.systems.clone()).unwrap_or_default();
    let max_order = systems.iter().map(|x| x.order).max().unwrap_or(0).max(3);
    let cint = toggling::sequence_integrals(&seq, &frame, max_order, &quad)?;
    let checks = graph_checks(&cint, &systems, &basis, t_prime, threshold);
    let parity: BTreeMap<usize, f64> = (1..=max_order).map(|r| (r, toggling::parity_residual(&cint, r))).collect();
    let oracle = if s.cfg.ensemble.is_some() { Some(oracle_check(&net, &basis, &seq, &cint, s, sample)?) } else { None };
    let zeroth_residual = match spec.as_ref().and_then(|d| d.zeroth.as_ref()) {
        Some(z) => Some(aht_core::objectives::cost_zeroth(&cint, z, &basis)?),
        None => None,
    };
    let report = VerifyReport {
        t_seq_us: seq.total_time(),
        identity_cycle_fidelity: model::identity_cycle_fidelity(&seq, net.n),
        primary_cost: spec.as_ref().map(|d| aht_core::objectives::cost_primary(&seq, net.n, &d.u_target)),
        zeroth_residual,
        graphs: checks,
        parity,
        oracle,
    };
    println!("sequence {} ({} segments, {:.3} µs)", path.display(), seq.len(), report.t_seq_us);
    println!("identity-cycle fidelity {:.12}", report.identity_cycle_fidelity);
    if let Some(p) = report.primary_cost {
        println!("primary-target cost {p:.4e}");
    }
    if let Some(z) = report.zeroth_residual {
        println!("zeroth-order residual {z:.4e}");
    }
    print_checks(&report.graphs);
    for (r, p) in &report.parity {
        println!("  parity residual r={r}: {p:.4e}");
    }
    if let Some(o) = &report.oracle {
        println!(
            "  Magnus (r ≤ 3) vs log U / T at realization {}: {:.3e} ({:.3e} of ‖H_pert‖, scale {:.3e})",
            o.realization_seed, o.discrepancy, o.relative, o.scale
        );
    }
    s.write_json("verify.json", &report)?;
    Ok(())
}

#[derive(Serialize)]
struct SymmetrizeReport {
    base_parity_r2: f64,
    symmetrized_parity_r2: f64,
    base_first_order_norm: f64,
    symmetrized_first_order_norm: f64,
    shrink: f64,
}

/// Second-order term norm at a fixed realization, static components only.
fn first_order_norm(seq: &ControlSequence, net: &NetworkSpec, basis: &CSpaceBasis, frame: &FrameAction, real: &ParameterRealization, s: &Session) -> CliResult<(f64, f64)> {
    let cint = toggling::sequence_integrals(seq, frame, 2, &s.cfg.quadrature())?;
    let h = magnus::reconstruct_magnus(&cint, basis, real, 2)?;
    let _ = net;
    Ok((toggling::parity_residual(&cint, 2), ops::hs_norm(&h[1])))
}

fn symmetrize(s: &mut Session, path: &Path) -> CliResult<()> {
    let (seq, _) = s.load_sequence(path)?;
    let full = s.cfg.network()?;
    let sym = search::symmetrize(&seq, full.n).map_err(|e| CliError::Config(e.to_string()))?;
    let net = full.restricted(&[model::ComponentKind::Detuning, model::ComponentKind::Coupling]);
    let basis = minimal_composite_cspace(&net, &s.cfg.cspace_options())?;
    let frame = FrameAction::new(&net, &basis)?;
    let ens = s.cfg.ensemble.as_ref().map(|e| e.spec()).unwrap_or(model::EnsembleSpec {
        sigma_dip: 0.01,
        sigma_z: 0.01,
        sigma_eps: 0.0,
        rho_corr: 0.0,
        seed: 0,
    });
    let real = model::sample_member(&net, &ens, 0)?;
    let (p0, h0) = first_order_norm(&seq, &net, &basis, &frame, &real, s)?;
    let (p1, h1) = first_order_norm(&sym, &net, &basis, &frame, &real, s)?;
    let report = SymmetrizeReport {
        base_parity_r2: p0,
        symmetrized_parity_r2: p1,
        base_first_order_norm: h0,
        symmetrized_first_order_norm: h1,
        shrink: if h1 > 0.0 { h0 / h1 } else { f64::INFINITY },
    };
    let stem = path.file_stem().map(|x| x.to_string_lossy().into_owned()).unwrap_or_else(|| "sequence".into());
    let mut csv = Vec::new();
    sym.write_csv(&mut csv)?;
    let out = s.write(&format!("{stem}_sym.csv"), &csv)?;
    println!("wrote {} ({} segments)", out.display(), sym.len());
    println!("parity residual r=2: {p0:.4e} -> {p1:.4e}");
    println!("second-order term norm: {h0:.4e} -> {h1:.4e} (shrink {:.3e})", report.shrink);
    s.write_json("symmetrize.json", &report)?;
    Ok(())
}

#[derive(Serialize)]
struct ProbeGraph {
    graph: String,
    outside_fraction: f64,
    probably_unachievable: bool,
}

#[derive(Serialize)]
struct ProbeReport {
    order: usize,
    samples: usize,
    q: usize,
    rank: usize,
    ambient_dim: usize,
    singular_values: Vec<f64>,
    graphs: Vec<ProbeGraph>,
}

fn probe(s: &mut Session, order: usize, samples: usize, q: usize, amplitude: f64) -> CliResult<()> {
    if order == 0 || order > magnus::ORDER_CAP {
        return Err(CliError::Config(format!("order must be in 1..={}", magnus::ORDER_CAP)));
    }
    if !(0.0..=1.0).contains(&amplitude) || q < 1 || samples < 1 {
        return Err(CliError::Config("need 0 ≤ amplitude ≤ 1, q ≥ 1 and samples ≥ 1".into()));
    }
    let (net, basis) = s.basis()?;
    let frame = FrameAction::new(&net, &basis)?;
    let seed = s.global.seed.unwrap_or(0);
    let p = search::span_probe(&frame, order, samples, q, s.cfg.control.dt_us, s.cfg.control.omega_max(), amplitude, seed, s.exec())?;
    let mut graphs_out = Vec::new();
    if s.cfg.design.is_some() {
        for sys in s.cfg.design_spec(&basis)?.systems.iter().filter(|x| x.order == order) {
            // Directions of A(G) reachable from the probed span.
            let image = aht_core::linalg::column_space(&(&sys.a * &p.basis), search::PROBE_TOL);
            let d = &sys.d;
            let frac = if d.norm() == 0.0 { 0.0 } else { (d - &image * (image.transpose() * d)).norm() / d.norm() };
            graphs_out.push(ProbeGraph { graph: sys.graph.to_string(), outside_fraction: frac, probably_unachievable: frac > 1e-6 });
        }
    }
    let report = ProbeReport {
        order,
        samples,
        q,
        rank: p.rank,
        ambient_dim: frame.dim().pow(order as u32),
        singular_values: p.singular_values.clone(),
        graphs: graphs_out,
    };
    println!("order {order}: rank {} of {} from {samples} random sequences (Q = {q})", report.rank, report.ambient_dim);
    for g in &report.graphs {
        println!(
            "  {:<14} outside fraction {:.3e}{}",
            g.graph,
            g.outside_fraction,
            if g.probably_unachievable { "  (probably unachievable)" } else { "" }
        );
    }
    s.write_json(&format!("probe_r{order}.json"), &report)?;
    Ok(())
}

fn write_series(s: &mut Session, name: &str, seq: &ControlSequence, campaign: &Campaign, series: &Series) -> CliResult<()> {
    let mut csv = Vec::new();
    series.write_csv(&mut csv)?;
    s.write(&format!("{name}.csv"), &csv)?;
    let meta = RunMetadata::new(s.cfg.hash(), seq, campaign, series)?;
    s.write_json(&format!("{name}.meta.json"), &meta)?;
    if !series.failures.is_empty() {
        eprintln!("{name}: {} realizations dropped (see {name}.meta.json)", series.failures.len());
    }
    Ok(())
}

fn fmt_num(x: f64) -> String {
    let t = format!("{x}");
    t.replace('.', "p")
}

#[derive(Serialize)]
struct RhoRow {
    sequence: String,
    rho_corr: f64,
    sigma_per_ms: Option<f64>,
    fit_points: usize,
    fit_residual: Option<f64>,
    error: Option<String>,
}

/// `(name, path)` pairs from the command line, or the config's list.
fn sequence_files(s: &Session, args: &[PathBuf]) -> CliResult<Vec<(String, PathBuf)>> {
    let files: Vec<(String, PathBuf)> = if args.is_empty() {
        s.cfg.sequence_paths(&s.base)?
    } else {
        args.iter()
            .map(|p| (p.file_stem().map(|x| x.to_string_lossy().into_owned()).unwrap_or_else(|| "sequence".into()), p.clone()))
            .collect()
    };
    if files.is_empty() {
        return Err(CliError::Config("no sequences given on the command line or in simulation.sequences".into()));
    }
    Ok(files)
}

fn simulate(s: &mut Session, files: &[(String, PathBuf)]) -> CliResult<()> {
    let sim = s.cfg.simulation()?.clone();
    let base = s.cfg.campaign(s.global.seed)?;
    let exec = s.exec();
    let mut loaded = Vec::new();
    for (name, path) in files {
        match s.load_sequence(path) {
            Ok((seq, key)) => {
                s.sequences.push(NamedInput { name: name.clone(), path: key });
                loaded.push((name.clone(), seq));
            }
            Err(e) => eprintln!("skipping {}: {e}", path.display()),
        }
    }
    if loaded.is_empty() {
        return Err(CliError::Config("no sequence file could be read".into()));
    }
    let mut any_ok = false;
    if !sim.rho_corr.is_empty() {
        let mut rows = Vec::new();
        for (name, seq) in &loaded {
            for &rho in &sim.rho_corr {
                let mut c = base.clone();
                c.ensemble.rho_corr = rho;
                let cell = format!("{name}_rho{}", fmt_num(rho));
                let row = match simlab::autocorrelation(seq, &c, exec) {
                    Ok(series) => {
                        write_series(s, &cell, seq, &c, &series)?;
                        any_ok = true;
                        let t_ms: Vec<f64> = series.t.iter().map(|t| t * 1e-3).collect();
                        match simlab::fit_gaussian_decay(&t_ms, &series.mean, sim.fit_window_ms) {
                            Ok(f) => RhoRow { sequence: name.clone(), rho_corr: rho, sigma_per_ms: Some(f.sigma), fit_points: f.points, fit_residual: Some(f.residual), error: None },
                            Err(e) => RhoRow { sequence: name.clone(), rho_corr: rho, sigma_per_ms: None, fit_points: 0, fit_residual: None, error: Some(e.to_string()) },
                        }
                    }
                    Err(e) => RhoRow { sequence: name.clone(), rho_corr: rho, sigma_per_ms: None, fit_points: 0, fit_residual: None, error: Some(e.to_string()) },
                };
                println!(
                    "{:<20} rho {:<5} sigma {}",
                    row.sequence,
                    row.rho_corr,
                    row.sigma_per_ms.map(|v| format!("{v:.6} /ms")).unwrap_or_else(|| row.error.clone().unwrap_or_default())
                );
                rows.push(row);
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["sequence", "rho_corr", "sigma_per_ms", "fit_points", "fit_residual", "error"]).map_err(aht_core::Error::from)?;
        for r in &rows {
            let opt = |v: Option<f64>| v.map(|x| format!("{x:.9e}")).unwrap_or_default();
            w.write_record([r.sequence.clone(), r.rho_corr.to_string(), opt(r.sigma_per_ms), r.fit_points.to_string(), opt(r.fit_residual), r.error.clone().unwrap_or_default()])
                .map_err(aht_core::Error::from)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Failed(e.to_string()))?;
        s.write("rho_summary.csv", &bytes)?;
    } else if !sim.sigma_dip_khz.is_empty() {
        let mut rows = Vec::new();
        for (name, seq) in &loaded {
            for &f in &sim.sigma_dip_khz {
                let mut c = base.clone();
                c.ensemble.sigma_dip = model::khz_to_rad_per_us(f);
                let result = simlab::autocorrelation(seq, &c, exec);
                if let Ok(series) = &result {
                    write_series(s, &format!("{name}_sdip{}khz", fmt_num(f)), seq, &c, series)?;
                    any_ok = true;
                }
                let row = simlab::sweep_row(name, f, &result, &sim.horizons_ms, c.realizations);
                println!(
                    "{:<20} sigma_dip {:<8} kHz  t(1/e) {}",
                    name,
                    f,
                    row.t_1e_ms.map(|t| format!("{t:.4} ms")).unwrap_or_else(|| row.error.clone().unwrap_or_else(|| "beyond horizon".into()))
                );
                rows.push(row);
            }
        }
        let mut bytes = Vec::new();
        simlab::write_sweep_csv(&rows, &sim.horizons_ms, &mut bytes)?;
        s.write("sweep.csv", &bytes)?;
    } else {
        for (name, seq) in &loaded {
            match simlab::autocorrelation(seq, &base, exec) {
                Ok(series) => {
                    write_series(s, name, seq, &base, &series)?;
                    any_ok = true;
                    let last = series.mean.last().copied().unwrap_or(1.0);
                    println!("{name:<20} {} cycles, S(end) = {last:.6}", base.cycles);
                }
                Err(e) => eprintln!("{name}: {e}"),
            }
        }
    }
    if !any_ok {
        return Err(CliError::Failed("every campaign failed".into()));
    }
    Ok(())
}

fn replay(global: &Global, record_path: &Path) -> CliResult<()> {
    let record = RunRecord::load(record_path)?;
    if !matches!(record.command, Command::Simulate { .. }) || record.sequences.is_empty() {
        return Err(CliError::Config(format!("{} is not a simulate record", record_path.display())));
    }
    if record.config.hash() != record.config_hash {
        return Err(CliError::Config("record config does not match its hash".into()));
    }
    let dir = record_path.parent().unwrap_or(Path::new(""));
    let mut files = Vec::new();
    for input in &record.sequences {
        let path = dir.join(&input.path);
        let expected = record
            .inputs
            .get(&input.path)
            .ok_or_else(|| CliError::Config(format!("record lists no hash for {}", input.path)))?;
        if &hash_file(&path)? != expected {
            return Err(CliError::Config(format!("{} changed since the record was written", path.display())));
        }
        files.push((input.name.clone(), path));
    }
    let mut g = global.clone();
    if g.seed.is_none() {
        g.seed = record.seed;
    }
    let mut s = Session::open(&g, &record.command, record.config.clone(), PathBuf::new())?;
    simulate(&mut s, &files)?;
    let mut mismatched = Vec::new();
    for (name, hash) in &record.outputs {
        let status = match s.outputs.get(name) {
            Some(h) if h == hash => "identical",
            Some(_) => "DIFFERS  ",
            None => "MISSING  ",
        };
        println!("{status}  {name}");
        if status != "identical" {
            mismatched.push(name.clone());
        }
    }
    s.finish()?;
    if mismatched.is_empty() {
        println!("all {} outputs reproduced bit-identically", record.outputs.len());
        Ok(())
    } else {
        Err(CliError::Failed(format!("{} outputs differ from the record", mismatched.len())))
    }
}
