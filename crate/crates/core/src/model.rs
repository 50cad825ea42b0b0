//! Control and internal Hamiltonians, network topology, parameter ensembles
//! and exact piecewise-constant propagation.
//!
//! Units: time in µs, angular frequency in rad/µs. Files carry kHz and are
//! converted with `ω = 2π·f·1e-3`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::Matrix2;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cspace::ParametricOperator;
use crate::error::{Error, Result};
use crate::ops::{self, Operator};
use crate::pauli::{Pauli, PauliSum, PauliWord};
use crate::rng::{self, StreamRng};

pub fn khz_to_rad_per_us(f_khz: f64) -> f64 {
    2.0 * PI * f_khz * 1e-3
}

pub fn rad_per_us_to_khz(w: f64) -> f64 {
    w / (2.0 * PI * 1e-3)
}

/// Identifier of a perturbative parameter. Qubit indices are zero-based
/// internally and printed one-based (`11`, `12`, `e`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParamId {
    Error(u8),
    Detuning(u8),
    Coupling(u8, u8),
}

impl ParamId {
    pub fn coupling(i: usize, j: usize) -> ParamId {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        ParamId::Coupling(a as u8, b as u8)
    }

    pub fn detuning(i: usize) -> ParamId {
        ParamId::Detuning(i as u8)
    }

    pub fn kind(self) -> ComponentKind {
        match self {
            ParamId::Error(_) => ComponentKind::Error,
            ParamId::Detuning(_) => ComponentKind::Detuning,
            ParamId::Coupling(..) => ComponentKind::Coupling,
        }
    }

    /// Qubits touched, as graph vertices; error ids have none.
    pub fn vertices(self) -> Vec<usize> {
        match self {
            ParamId::Error(_) => vec![],
            ParamId::Detuning(i) => vec![i as usize],
            ParamId::Coupling(i, j) => vec![i as usize, j as usize],
        }
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ParamId::Error(0) => write!(f, "e"),
            ParamId::Error(k) => write!(f, "e{}", k + 1),
            ParamId::Detuning(i) => write!(f, "{}{}", i + 1, i + 1),
            ParamId::Coupling(i, j) => write!(f, "{}{}", i + 1, j + 1),
        }
    }
}

impl FromStr for ParamId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("bad parameter id {s:?}"));
        if let Some(rest) = s.strip_prefix('e') {
            if rest.is_empty() {
                return Ok(ParamId::Error(0));
            }
            let k: u8 = rest.parse().map_err(|_| bad())?;
            return if k >= 1 { Ok(ParamId::Error(k - 1)) } else { Err(bad()) };
        }
        let digits: Vec<u32> = s.chars().map(|c| c.to_digit(10).ok_or_else(bad)).collect::<Result<_>>()?;
        if digits.len() != 2 || digits.contains(&0) {
            return Err(bad());
        }
        let (i, j) = (digits[0] as usize - 1, digits[1] as usize - 1);
        Ok(if i == j { ParamId::detuning(i) } else { ParamId::coupling(i, j) })
    }
}

/// Which perturbation component a parameter feeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    Error,
    Detuning,
    Coupling,
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComponentKind::Error => "error",
            ComponentKind::Detuning => "detuning",
            ComponentKind::Coupling => "coupling",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    AllToAll,
    Chain,
    Ring,
    Custom(Vec<(usize, usize)>),
}

impl Topology {
    pub fn edges(&self, n: usize) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = match self {
            Topology::AllToAll => (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect(),
            Topology::Chain => (1..n).map(|i| (i - 1, i)).collect(),
            Topology::Ring if n > 2 => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            Topology::Ring => (1..n).map(|i| (i - 1, i)).collect(),
            Topology::Custom(e) => e.clone(),
        };
        for p in e.iter_mut() {
            if p.0 > p.1 {
                *p = (p.1, p.0);
            }
        }
        e.sort_unstable();
        e.dedup();
        e
    }
}

pub const DIPOLAR: [[f64; 3]; 3] = [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 2.0]];
pub const HEISENBERG: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub n: usize,
    /// Coupled pairs `(i, j)` with `i < j`, zero-based.
    pub edges: Vec<(usize, usize)>,
    /// Per-qubit detuning loops present.
    pub detuning: bool,
    /// Single Rabi-amplitude error id present.
    pub error: bool,
    pub d_tensor: [[f64; 3]; 3],
}

impl NetworkSpec {
    /// Dipolar network with detunings and an amplitude error.
    pub fn new(n: usize, topology: &Topology) -> Self {
        Self { n, edges: topology.edges(n), detuning: true, error: true, d_tensor: DIPOLAR }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > 10 {
            return Err(Error::Config(format!("qubit count {} outside 1..=10", self.n)));
        }
        for &(i, j) in &self.edges {
            if i >= j || j >= self.n {
                return Err(Error::Config(format!("edge ({},{}) invalid for n={}", i + 1, j + 1, self.n)));
            }
        }
        let d = &self.d_tensor;
        for a in 0..3 {
            for b in 0..3 {
                if (d[a][b] - d[b][a]).abs() > 1e-12 {
                    return Err(Error::Config("D tensor must be symmetric".into()));
                }
            }
        }
        Ok(())
    }

    /// All parameter ids: error, detunings, couplings.
    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = Vec::new();
        if self.error {
            ids.push(ParamId::Error(0));
        }
        if self.detuning {
            ids.extend((0..self.n).map(ParamId::detuning));
        }
        ids.extend(self.edges.iter().map(|&(i, j)| ParamId::coupling(i, j)));
        ids
    }

    pub fn has_param(&self, id: ParamId) -> bool {
        match id {
            ParamId::Error(k) => self.error && k == 0,
            ParamId::Detuning(i) => self.detuning && (i as usize) < self.n,
            ParamId::Coupling(i, j) => self.edges.contains(&(i as usize, j as usize)),
        }
    }

    pub fn components(&self) -> Vec<ComponentKind> {
        let mut c = Vec::new();
        if self.error {
            c.push(ComponentKind::Error);
        }
        if self.detuning {
            c.push(ComponentKind::Detuning);
        }
        if !self.edges.is_empty() {
            c.push(ComponentKind::Coupling);
        }
        c
    }

    /// Copy restricted to the given components.
    pub fn restricted(&self, keep: &[ComponentKind]) -> NetworkSpec {
        let mut net = self.clone();
        net.error &= keep.contains(&ComponentKind::Error);
        net.detuning &= keep.contains(&ComponentKind::Detuning);
        if !keep.contains(&ComponentKind::Coupling) {
            net.edges.clear();
        }
        net
    }
}

/// `σ_z^i / 2`.
pub fn detuning_block(i: usize) -> PauliSum {
    PauliSum::single(PauliWord::single(i, Pauli::Z), 0.5)
}

/// `(1/4) σ⃗_i · D · σ⃗_j`.
pub fn coupling_block(i: usize, j: usize, d: &[[f64; 3]; 3]) -> PauliSum {
    let mut terms = Vec::new();
    for (a, pa) in Pauli::XYZ.iter().enumerate() {
        for (b, pb) in Pauli::XYZ.iter().enumerate() {
            if d[a][b] != 0.0 {
                let w = PauliWord::single(i, *pa).with(j, *pb);
                terms.push((w, C64::new(0.25 * d[a][b], 0.0)));
            }
        }
    }
    PauliSum::from_terms(terms)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSegment {
    /// µs
    pub duration: f64,
    /// rad/µs
    pub omega1: f64,
    /// rad
    pub phi: f64,
    /// rad/µs
    pub delta_omega: f64,
}

impl ControlSegment {
    pub fn idle(duration: f64) -> Self {
        Self { duration, omega1: 0.0, phi: 0.0, delta_omega: 0.0 }
    }

    /// Coordinates `a` of the generator `Σ_k a_k g_k`, `g = (ΣX, ΣY, ΣZ)/2`.
    pub fn generator(&self) -> [f64; 3] {
        [self.omega1 * self.phi.cos(), self.omega1 * self.phi.sin(), self.delta_omega]
    }

    pub fn is_idle(&self) -> bool {
        self.omega1 == 0.0 && self.delta_omega == 0.0
    }

    /// The same rotation axis reversed: `H_c → -H_c`.
    pub fn negated(&self) -> Self {
        Self { phi: self.phi + PI, delta_omega: -self.delta_omega, ..*self }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSequence {
    pub segments: Vec<ControlSegment>,
    /// µs
    pub dt_default: f64,
    /// rad/µs
    pub omega_max: f64,
    pub endpoint_rule: bool,
}

#[derive(Serialize, Deserialize)]
struct SegmentRow {
    duration_us: f64,
    omega1_khz: f64,
    phi_rad: f64,
    delta_omega_khz: f64,
}

const BOUND_SLACK: f64 = 1e-9;

impl ControlSequence {
    pub fn new(segments: Vec<ControlSegment>, dt_default: f64, omega_max: f64, endpoint_rule: bool) -> Self {
        Self { segments, dt_default, omega_max, endpoint_rule }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidSequence("no segments".into()));
        }
        let slack = BOUND_SLACK * self.omega_max.max(1.0);
        for (q, s) in self.segments.iter().enumerate() {
            if !(s.duration > 0.0 && s.duration.is_finite()) {
                return Err(Error::InvalidSequence(format!("segment {q}: duration {} not positive", s.duration)));
            }
            if !s.phi.is_finite() {
                return Err(Error::InvalidSequence(format!("segment {q}: non-finite phase")));
            }
            if s.omega1 < -slack || s.omega1 > self.omega_max + slack {
                return Err(Error::InvalidSequence(format!(
                    "segment {q}: omega1 {} outside [0, {}] rad/us",
                    s.omega1, self.omega_max
                )));
            }
            if s.delta_omega.abs() > self.omega_max + slack {
                return Err(Error::InvalidSequence(format!(
                    "segment {q}: |delta_omega| {} exceeds {} rad/us",
                    s.delta_omega.abs(),
                    self.omega_max
                )));
            }
        }
        if self.endpoint_rule {
            let (a, b) = (self.segments[0], *self.segments.last().unwrap());
            if !a.is_idle() || !b.is_idle() {
                return Err(Error::InvalidSequence("endpoint rule: first and last segments must be idle".into()));
            }
        }
        Ok(())
    }

    /// Parse the `duration_us,omega1_khz,phi_rad,delta_omega_khz` CSV format.
    pub fn read_csv<R: Read>(reader: R, omega_max: f64, endpoint_rule: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["duration_us", "omega1_khz", "phi_rad", "delta_omega_khz"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse(format!("sequence header must be {}", expected.join(","))));
        }
        let mut segments = Vec::new();
        for row in rdr.deserialize() {
            let row: SegmentRow = row?;
            segments.push(ControlSegment {
                duration: row.duration_us,
                omega1: khz_to_rad_per_us(row.omega1_khz),
                phi: row.phi_rad,
                delta_omega: khz_to_rad_per_us(row.delta_omega_khz),
            });
        }
        let dt = segments.first().map(|s| s.duration).unwrap_or(0.0);
        let seq = Self::new(segments, dt, omega_max, endpoint_rule);
        seq.validate()?;
        Ok(seq)
    }

    pub fn load(path: &std::path::Path, omega_max: f64, endpoint_rule: bool) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(f, omega_max, endpoint_rule)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for s in &self.segments {
            w.serialize(SegmentRow {
                duration_us: s.duration,
                omega1_khz: rad_per_us_to_khz(s.omega1),
                phi_rad: s.phi,
                delta_omega_khz: rad_per_us_to_khz(s.delta_omega),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(f)
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &ControlSequence) -> ControlSequence {
        let mut s = self.clone();
        s.segments.extend_from_slice(&other.segments);
        s
    }

    pub fn idle(q: usize, dt: f64, omega_max: f64) -> ControlSequence {
        ControlSequence::new(vec![ControlSegment::idle(dt); q], dt, omega_max, true)
    }
}

/// `(1+ε)·[(ω1/2)(cosφ ΣX + sinφ ΣY) + (Δω/2) ΣZ]` in Pauli form.
pub fn control_pauli(seg: &ControlSegment, n: usize, eps: f64) -> PauliSum {
    let a = seg.generator();
    let mut h = PauliSum::zero();
    for (k, p) in Pauli::XYZ.iter().enumerate() {
        h.add_scaled(&PauliSum::collective(*p, n), 0.5 * a[k] * (1.0 + eps));
    }
    h
}

pub fn control_hamiltonian(seg: &ControlSegment, n: usize, eps: f64) -> Operator {
    control_pauli(seg, n, eps).to_dense(n)
}

pub fn internal_pauli(net: &NetworkSpec, real: &ParameterRealization) -> Result<PauliSum> {
    real.check_against(net)?;
    let mut h = PauliSum::zero();
    if net.detuning {
        for i in 0..net.n {
            h.add_scaled(&detuning_block(i), real.get(ParamId::detuning(i))?);
        }
    }
    for &(i, j) in &net.edges {
        h.add_scaled(&coupling_block(i, j, &net.d_tensor), real.get(ParamId::coupling(i, j))?);
    }
    Ok(h)
}

/// `(1/2)Σ δ_i σz^i + (1/4)Σ_{i<j} B_ij σ⃗_i·D·σ⃗_j`.
pub fn internal_hamiltonian(net: &NetworkSpec, real: &ParameterRealization) -> Result<Operator> {
    Ok(internal_pauli(net, real)?.to_dense(net.n))
}

/// Time dependence of one perturbation component.
#[derive(Clone, Debug)]
pub enum Schedule {
    Static(ParametricOperator),
    PerSegment(Vec<ParametricOperator>),
}

#[derive(Clone, Debug)]
pub struct PerturbationComponent {
    pub kind: ComponentKind,
    pub schedule: Schedule,
}

impl PerturbationComponent {
    pub fn at_segment(&self, q: usize) -> &ParametricOperator {
        match &self.schedule {
            Schedule::Static(op) => op,
            Schedule::PerSegment(ops) => &ops[q],
        }
    }
}

/// Static detuning component `{(i,i) → σz^i/2}`.
pub fn detuning_component(net: &NetworkSpec) -> ParametricOperator {
    ParametricOperator::new(
        ComponentKind::Detuning,
        (0..net.n).map(|i| (ParamId::detuning(i), detuning_block(i))).collect(),
    )
}

/// Static coupling component `{(i,j) → σ⃗_i·D·σ⃗_j/4}`.
pub fn coupling_component(net: &NetworkSpec) -> ParametricOperator {
    ParametricOperator::new(
        ComponentKind::Coupling,
        net.edges.iter().map(|&(i, j)| (ParamId::coupling(i, j), coupling_block(i, j, &net.d_tensor))).collect(),
    )
}

/// Error component for one segment: `{e → H_c}`.
pub fn error_component(seg: &ControlSegment, n: usize) -> ParametricOperator {
    ParametricOperator::new(ComponentKind::Error, vec![(ParamId::Error(0), control_pauli(seg, n, 0.0))])
}

/// The partition `H_pert = Σ_w H_pert^w` in error, detuning, coupling order.
/// Components absent from the network are omitted.
pub fn perturbation_components(net: &NetworkSpec, seq: &ControlSequence) -> Vec<PerturbationComponent> {
    let mut out = Vec::new();
    for kind in net.components() {
        let schedule = match kind {
            ComponentKind::Error => {
                Schedule::PerSegment(seq.segments.iter().map(|s| error_component(s, net.n)).collect())
            }
            ComponentKind::Detuning => Schedule::Static(detuning_component(net)),
            ComponentKind::Coupling => Schedule::Static(coupling_component(net)),
        };
        out.push(PerturbationComponent { kind, schedule });
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    /// rad/µs
    pub sigma_dip: f64,
    /// rad/µs
    pub sigma_z: f64,
    pub sigma_eps: f64,
    pub rho_corr: f64,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_dip < 0.0 || self.sigma_z < 0.0 || self.sigma_eps < 0.0 {
            return Err(Error::InvalidEnsemble("standard deviations must be non-negative".into()));
        }
        if !(-1.0..=1.0).contains(&self.rho_corr) {
            return Err(Error::InvalidEnsemble(format!("rho_corr {} outside [-1, 1]", self.rho_corr)));
        }
        if self.rho_corr != 0.0 && self.sigma_z == 0.0 {
            return Err(Error::InvalidEnsemble(
                "correlated sampling (rho_corr != 0) needs sigma_z > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterRealization {
    pub values: BTreeMap<ParamId, f64>,
}

impl ParameterRealization {
    pub fn zeros(net: &NetworkSpec) -> Self {
        Self { values: net.param_ids().into_iter().map(|id| (id, 0.0)).collect() }
    }

    pub fn get(&self, id: ParamId) -> Result<f64> {
        self.values.get(&id).copied().ok_or_else(|| Error::MissingParameter(id.to_string()))
    }

    pub fn set(&mut self, id: ParamId, v: f64) {
        self.values.insert(id, v);
    }

    /// Rabi-amplitude error, zero when the network has none.
    pub fn eps(&self) -> f64 {
        self.values.get(&ParamId::Error(0)).copied().unwrap_or(0.0)
    }

    pub fn check_against(&self, net: &NetworkSpec) -> Result<()> {
        for id in net.param_ids() {
            if !self.values.contains_key(&id) {
                return Err(Error::MissingParameter(id.to_string()));
            }
        }
        for id in self.values.keys() {
            if !net.has_param(*id) {
                return Err(Error::UnexpectedParameter(id.to_string()));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { values: self.values.iter().map(|(k, v)| (*k, v * s)).collect() }
    }
}

/// Draws one realization. Order of draws: δ_i for every qubit, ε, then
/// `B_ij` in edge order. Draws happen even for absent ids so that a stream
/// yields the same values whatever components are enabled.
pub fn sample_realization(net: &NetworkSpec, ens: &EnsembleSpec, stream: &mut StreamRng) -> Result<ParameterRealization> {
    ens.validate()?;
    let mut real = ParameterRealization::default();
    let mut deltas = Vec::with_capacity(net.n);
    for i in 0..net.n {
        let z: f64 = stream.sample(StandardNormal);
        deltas.push(ens.sigma_z * z);
        if net.detuning {
            real.set(ParamId::detuning(i), deltas[i]);
        }
    }
    let z: f64 = stream.sample(StandardNormal);
    if net.error {
        real.set(ParamId::Error(0), ens.sigma_eps * z);
    }
    let rho = ens.rho_corr;
    for &(i, j) in &net.edges {
        let z: f64 = stream.sample(StandardNormal);
        let b = if rho != 0.0 {
            let lead = rho * ens.sigma_dip / (2f64.sqrt() * ens.sigma_z) * (deltas[i] + deltas[j]);
            lead + (1.0 - rho * rho).max(0.0).sqrt() * ens.sigma_dip * z
        } else {
            ens.sigma_dip * z
        };
        real.set(ParamId::coupling(i, j), b);
    }
    Ok(real)
}

/// Realization `index` of the ensemble, on its own substream.
pub fn sample_member(net: &NetworkSpec, ens: &EnsembleSpec, index: u64) -> Result<ParameterRealization> {
    sample_realization(net, ens, &mut rng::stream(ens.seed, index))
}

/// `U = U_Q ⋯ U_1` with `U_q = exp(-i[(1+ε)H_c,q + H_int] τ_q)`.
pub fn total_propagator(
    seq: &ControlSequence,
    net: &NetworkSpec,
    real: &ParameterRealization,
    eps: f64,
) -> Result<Operator> {
    if seq.is_empty() {
        return Err(Error::InvalidSequence("no segments".into()));
    }
    let h_int = internal_pauli(net, real)?;
    let mut u = ops::identity(net.n);
    for seg in &seq.segments {
        let mut h = control_pauli(seg, net.n, eps);
        h.add_scaled(&h_int, 1.0);
        let step = ops::expm_skew(&h.to_dense(net.n), seg.duration)?;
        u = step * u;
    }
    Ok(u)
}

/// Single-qubit `exp(-i (a·σ/2) τ)` for generator coordinates `a`.
pub fn su2_rotation(a: [f64; 3], tau: f64) -> Matrix2<C64> {
    let norm = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    if norm == 0.0 {
        return Matrix2::identity();
    }
    let half = 0.5 * norm * tau;
    let (s, c) = half.sin_cos();
    let n = [a[0] / norm, a[1] / norm, a[2] / norm];
    let mi = C64::new(0.0, -s);
    Matrix2::new(
        C64::new(c, 0.0) + mi * n[2],
        mi * C64::new(n[0], -n[1]),
        mi * C64::new(n[0], n[1]),
        C64::new(c, 0.0) - mi * n[2],
    )
}

/// Single-qubit factor of the error-free primary propagator `U_pri(T)`.
pub fn primary_rotation(seq: &ControlSequence) -> Matrix2<C64> {
    seq.segments
        .iter()
        .fold(Matrix2::identity(), |u, s| su2_rotation(s.generator(), s.duration) * u)
}

/// `U_pri(T)` on the register: the collective rotation `R^{⊗n}`.
pub fn primary_propagator(seq: &ControlSequence, n: usize) -> Operator {
    ops::tensor_power(&primary_rotation(seq), n)
}

/// `|Tr(U_pri(T)† 𝟙)| / 2^n`, computed from the single-qubit factor.
pub fn identity_cycle_fidelity(seq: &ControlSequence, n: usize) -> f64 {
    let r = primary_rotation(seq);
    (r.trace().norm() / 2.0).powi(n as i32)
}
