//! Project configuration: one JSON document drives every command.
//!
//! Unknown keys are rejected at every level. Keys that carry units say so
//! (`omega_max_khz`, `dt_us`); everything is converted to µs and rad/µs on
//! the way in.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::cspace::{CSpaceBasis, CSpaceOptions};
use crate::error::{Error, Result};
use crate::graphs::{constraint_system, ParameterGraph};
use crate::model::{self, khz_to_rad_per_us, ComponentKind, EnsembleSpec, NetworkSpec, Topology, DIPOLAR};
use crate::objectives::{self, DesignSpec, TargetUnitary, Weights, ZerothTarget};
use crate::pauli::Pauli;
use crate::search::SearchConfig;
use crate::simlab::{self, Campaign};
use crate::toggling::QuadratureConfig;

/// Pauli-string map, e.g. `{"ZZ": 2, "XX": -1, "YY": -1}`.
pub type PauliMap = BTreeMap<String, f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub network: NetworkBlock,
    pub control: ControlBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationBlock>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkBlock {
    pub n: usize,
    #[serde(default = "default_topology")]
    pub topology: Topology,
    #[serde(default = "default_d")]
    pub d_tensor: [[f64; 3]; 3],
    #[serde(default = "all_components")]
    pub components: Vec<ComponentKind>,
}

fn default_topology() -> Topology {
    Topology::AllToAll
}

fn default_d() -> [[f64; 3]; 3] {
    DIPOLAR
}

fn all_components() -> Vec<ComponentKind> {
    vec![ComponentKind::Error, ComponentKind::Detuning, ComponentKind::Coupling]
}

impl NetworkBlock {
    pub fn spec(&self) -> Result<NetworkSpec> {
        self.spec_with(self.n, &self.topology, &self.components)
    }

    fn spec_with(&self, n: usize, topology: &Topology, components: &[ComponentKind]) -> Result<NetworkSpec> {
        let mut net = NetworkSpec::new(n, topology);
        net.d_tensor = self.d_tensor;
        let net = net.restricted(components);
        net.validate()?;
        Ok(net)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBlock {
    pub omega_max_khz: f64,
    pub dt_us: f64,
    #[serde(default = "yes")]
    pub endpoint_rule: bool,
}

fn yes() -> bool {
    true
}

impl ControlBlock {
    /// rad/µs
    pub fn omega_max(&self) -> f64 {
        khz_to_rad_per_us(self.omega_max_khz)
    }

    fn validate(&self) -> Result<()> {
        if !(self.omega_max_khz > 0.0 && self.dt_us > 0.0) {
            return Err(Error::Config("control.omega_max_khz and control.dt_us must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleBlock {
    pub sigma_dip_khz: f64,
    pub sigma_z_khz: f64,
    #[serde(default)]
    pub sigma_eps: f64,
    #[serde(default)]
    pub rho_corr: f64,
    #[serde(default)]
    pub seed: u64,
}

impl EnsembleBlock {
    pub fn spec(&self) -> EnsembleSpec {
        EnsembleSpec {
            sigma_dip: khz_to_rad_per_us(self.sigma_dip_khz),
            sigma_z: khz_to_rad_per_us(self.sigma_z_khz),
            sigma_eps: self.sigma_eps,
            rho_corr: self.rho_corr,
            seed: self.seed,
        }
    }
}

/// Collective single-qubit rotation the control cycle should implement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationTarget {
    pub axis: [f64; 3],
    pub angle_rad: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZerothBlock {
    /// Components whose average Hamiltonian is constrained.
    pub components: Vec<ComponentKind>,
    /// Nonzero single-edge targets, e.g. `"{11}": {"Z": 1}`; anything not
    /// listed is decoupled.
    #[serde(default)]
    pub targets: IndexMap<String, PauliMap>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primary: Option<RotationTarget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeroth: Option<ZerothBlock>,
    /// Per-graph targets in the order feasibility is chained; an empty map
    /// means decoupling.
    #[serde(default)]
    pub graphs: IndexMap<String, PauliMap>,
    #[serde(default = "unit")]
    pub t_prime: f64,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cspace_seed: Option<u64>,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    /// Simulation register size, defaulting to the design network.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<Topology>,
    /// Perturbation components simulated, defaulting to the design network's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<ComponentKind>>,
    pub realizations: usize,
    pub cycles: usize,
    #[serde(default = "default_observable")]
    pub observable: char,
    /// Named sequence files, relative to the config file.
    #[serde(default)]
    pub sequences: IndexMap<String, PathBuf>,
    /// Coupling strengths for a regime sweep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sigma_dip_khz: Vec<f64>,
    /// Correlation values for a correlated-sampling study.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rho_corr: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub horizons_ms: Vec<f64>,
    #[serde(default = "default_window")]
    pub fit_window_ms: f64,
}

fn default_observable() -> char {
    'x'
}

fn default_window() -> f64 {
    12.0
}

impl ProjectConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ProjectConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hash of the canonical serialization, so formatting does not matter.
    pub fn hash(&self) -> String {
        simlab::sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        self.network.spec()?;
        self.control.validate()?;
        if let Some(e) = &self.ensemble {
            e.spec().validate()?;
        }
        if let Some(d) = &self.design {
            d.weights.validate()?;
            if !(d.t_prime > 0.0) {
                return Err(Error::Config("design.t_prime must be positive".into()));
            }
            for g in d.graphs.keys() {
                parse_graph(g)?;
            }
        }
        if let Some(s) = &self.search {
            s.validate()?;
        }
        if let Some(s) = &self.simulation {
            if s.realizations == 0 || s.cycles == 0 {
                return Err(Error::Config("simulation.realizations and simulation.cycles must be ≥ 1".into()));
            }
            observable_letter(s.observable)?;
        }
        Ok(())
    }

    pub fn network(&self) -> Result<NetworkSpec> {
        self.network.spec()
    }

    pub fn cspace_options(&self) -> CSpaceOptions {
        CSpaceOptions { seed: self.design.as_ref().and_then(|d| d.cspace_seed), ..Default::default() }
    }

    pub fn design(&self) -> Result<&DesignBlock> {
        self.design.as_ref().ok_or_else(|| Error::Config("missing design block".into()))
    }

    pub fn search(&self) -> Result<&SearchConfig> {
        self.search.as_ref().ok_or_else(|| Error::Config("missing search block".into()))
    }

    pub fn simulation(&self) -> Result<&SimulationBlock> {
        self.simulation.as_ref().ok_or_else(|| Error::Config("missing simulation block".into()))
    }

    pub fn ensemble(&self) -> Result<EnsembleSpec> {
        self.ensemble
            .as_ref()
            .map(EnsembleBlock::spec)
            .ok_or_else(|| Error::Config("missing ensemble block".into()))
    }

    /// Graph targets as operators on the design register.
    pub fn graph_targets(&self) -> Result<Vec<(ParameterGraph, Option<crate::pauli::PauliSum>)>> {
        let net = self.network()?;
        let design = self.design()?;
        let mut out = Vec::new();
        for (label, map) in &design.graphs {
            let g = parse_graph(label)?;
            if !g.embeds_in(&net) || g.vertices().iter().any(|&v| v >= net.n) {
                return Err(Error::Config(format!("graph {label} does not fit the design network")));
            }
            let target = if map.is_empty() { None } else { Some(objectives::target_operator(map, &g, net.n)?) };
            out.push((g, target));
        }
        Ok(out)
    }

    /// Full design specification over `basis`.
    pub fn design_spec(&self, basis: &CSpaceBasis) -> Result<DesignSpec> {
        let net = self.network()?;
        let design = self.design()?;
        let u_target = match &design.primary {
            None => TargetUnitary::identity(),
            Some(r) => {
                let norm = r.axis.iter().map(|a| a * a).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(Error::Config("design.primary.axis must be nonzero".into()));
                }
                let a = r.axis.map(|x| x / norm);
                TargetUnitary::Collective(model::su2_rotation(a, r.angle_rad))
            }
        };
        let zeroth = match &design.zeroth {
            None => None,
            Some(z) => {
                let mut targets = Vec::new();
                for (label, map) in &z.targets {
                    let g = parse_graph(label)?;
                    targets.push((g.clone(), objectives::target_operator(map, &g, net.n)?));
                }
                let mut zt = ZerothTarget::decoupling(basis, &z.components);
                if !targets.is_empty() {
                    zt.coords = objectives::zeroth_coords(&targets, &net, basis, design.t_prime)?;
                }
                Some(zt)
            }
        };
        let systems = self
            .graph_targets()?
            .iter()
            .map(|(g, t)| constraint_system(g, basis, t.as_ref(), design.t_prime))
            .collect::<Result<Vec<_>>>()?;
        Ok(DesignSpec { u_target, zeroth, systems, weights: design.weights.clone() })
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        QuadratureConfig::default()
    }

    /// Simulation campaign with an optional seed override.
    pub fn campaign(&self, seed: Option<u64>) -> Result<Campaign> {
        let sim = self.simulation()?;
        let mut ensemble = self.ensemble()?;
        if let Some(s) = seed {
            ensemble.seed = s;
        }
        let n = sim.n.unwrap_or(self.network.n);
        let topology = sim.topology.clone().unwrap_or_else(|| self.network.topology.clone());
        let components = sim.components.as_deref().unwrap_or(&self.network.components);
        let net = self.network.spec_with(n, &topology, components)?;
        Ok(Campaign {
            net,
            ensemble,
            realizations: sim.realizations,
            cycles: sim.cycles,
            observable: observable_letter(sim.observable)?,
        })
    }

    /// Sequence paths resolved against `base` (the config's directory).
    pub fn sequence_paths(&self, base: &Path) -> Result<Vec<(String, PathBuf)>> {
        Ok(self.simulation()?.sequences.iter().map(|(k, p)| (k.clone(), base.join(p))).collect())
    }
}

pub fn parse_graph(label: &str) -> Result<ParameterGraph> {
    label.parse().map_err(|e: Error| Error::Config(format!("graph {label:?}: {e}")))
}

fn observable_letter(c: char) -> Result<Pauli> {
    match Pauli::from_char(c) {
        Some(p) if p != Pauli::I => Ok(p),
        _ => Err(Error::Config(format!("simulation.observable must be x, y or z, got {c:?}"))),
    }
}
