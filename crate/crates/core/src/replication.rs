//! One Monte Carlo replication: simulate bits and run every requested
//! detector on the same stream, recording the first crossing of each
//! threshold in a grid.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::centralized::{CusumOracle, GcusumSnapshot};
use crate::consensus::ConsensusMatrices;
use crate::dag::{DagConfig, DagCusum, Eta3Scaling};
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::signal::{BitHistory, BitSource, RunKind, ScenarioConfig, SimulatedBits};
use crate::topology::NetworkTopology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DetectorKind {
    OracleCusum,
    Gcusum,
    Alternative,
    DagCusum,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 4] =
        [DetectorKind::OracleCusum, DetectorKind::Gcusum, DetectorKind::Alternative, DetectorKind::DagCusum];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::OracleCusum => "oracle-cusum",
            DetectorKind::Gcusum => "gcusum",
            DetectorKind::Alternative => "alternative",
            DetectorKind::DagCusum => "dag-cusum",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name() == s)
    }

    /// Whether the detector reports one stopping time per sensor.
    pub fn is_distributed(self) -> bool {
        self == DetectorKind::DagCusum
    }
}

/// A detector with its ascending threshold grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorPlan {
    pub kind: DetectorKind,
    pub h_grid: Vec<f64>,
}

/// Everything a replication needs, shared read-only across replications.
#[derive(Debug, Clone)]
pub struct ReplicationSpec {
    pub topology: NetworkTopology,
    pub matrices: ConsensusMatrices,
    pub noise: NoiseModel,
    pub scenario: ScenarioConfig,
    pub detectors: Vec<DetectorPlan>,
    /// Last monitoring time simulated.
    pub horizon: usize,
    pub eta3_scaling: Eta3Scaling,
    pub collapsed_warm_up: bool,
    /// Keep bit and statistic traces (memory grows with the horizon).
    pub record_trace: bool,
}

impl ReplicationSpec {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate(&self.topology)?;
        if self.matrices.dim() != self.topology.n_sensors() {
            return Err(Error::DimensionMismatch {
                expected: self.topology.n_sensors(),
                actual: self.matrices.dim(),
            });
        }
        if self.horizon == 0 {
            return Err(Error::InvalidScenario { field: "horizon", reason: "must be at least 1" });
        }
        for d in &self.detectors {
            if d.h_grid.is_empty() {
                return Err(Error::InvalidScenario { field: "h_grid", reason: "must not be empty" });
            }
            if d.h_grid.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidScenario { field: "h_grid", reason: "must be strictly increasing" });
            }
        }
        Ok(())
    }
}

/// First-crossing times of one detector: `stops[slot * n_h + i]` for
/// threshold `h_grid[i]`; one slot for centralized detectors, `N` slots for
/// the distributed one.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorOutcome {
    pub kind: DetectorKind,
    pub slots: usize,
    pub n_h: usize,
    pub stops: Vec<Option<usize>>,
}

impl DetectorOutcome {
    pub fn stop(&self, slot: usize, h_index: usize) -> Option<usize> {
        self.stops[slot * self.n_h + h_index]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentralTraceRow {
    pub k: usize,
    pub h_g: f64,
    pub h_a: f64,
    pub k_hat: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DagTraceRow {
    pub k: usize,
    pub sensor: usize,
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    pub h_d: f64,
    pub stopped: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplicationTrace {
    pub bits: BitHistory,
    pub central: Vec<CentralTraceRow>,
    pub dag: Vec<DagTraceRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub detectors: Vec<DetectorOutcome>,
    /// Monitoring steps actually simulated.
    pub steps: usize,
    pub degenerate_events: u64,
    pub trace: Option<ReplicationTrace>,
}

/// First-crossing bookkeeping over an ascending grid.
struct Crossings<'a> {
    grid: &'a [f64],
    next: Vec<usize>,
    stops: Vec<Option<usize>>,
}

impl<'a> Crossings<'a> {
    fn new(grid: &'a [f64], slots: usize) -> Self {
        Self { grid, next: vec![0; slots], stops: vec![None; slots * grid.len()] }
    }

    fn record(&mut self, slot: usize, value: f64, k: usize) {
        let n_h = self.grid.len();
        let nx = &mut self.next[slot];
        while *nx < n_h && value >= self.grid[*nx] {
            self.stops[slot * n_h + *nx] = Some(k);
            *nx += 1;
        }
    }

    fn done(&self) -> bool {
        self.next.iter().all(|&nx| nx == self.grid.len())
    }

    fn into_outcome(self, kind: DetectorKind) -> DetectorOutcome {
        DetectorOutcome { kind, slots: self.next.len(), n_h: self.grid.len(), stops: self.stops }
    }
}

/// Runs one replication on simulated bits.
pub fn run_replication(spec: &ReplicationSpec, replication: u64, run: RunKind) -> Result<ReplicationOutcome> {
    let mut source = SimulatedBits::new(&spec.scenario, &spec.noise, &spec.topology, replication, run);
    run_on_source(spec, &mut source)
}

/// Runs one replication on any bit source.
pub fn run_on_source<S: BitSource + ?Sized>(spec: &ReplicationSpec, source: &mut S) -> Result<ReplicationOutcome> {
    let topo = &spec.topology;
    let sc = &spec.scenario;
    let n = topo.n_sensors();
    if source.n_sensors() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: source.n_sensors() });
    }
    let plan = |kind| spec.detectors.iter().find(|d| d.kind == kind);
    let oracle_plan = plan(DetectorKind::OracleCusum);
    let g_plan = plan(DetectorKind::Gcusum);
    let a_plan = plan(DetectorKind::Alternative);
    let dag_plan = plan(DetectorKind::DagCusum);

    let mut oracle = oracle_plan.map(|_| CusumOracle::new(topo, &spec.noise, sc.theta, &sc.mu, sc.tau, f64::INFINITY));
    let mut oracle_x = oracle_plan.map(|p| Crossings::new(&p.h_grid, 1));

    let use_central = g_plan.is_some() || a_plan.is_some();
    let mut central = use_central.then(|| GcusumSnapshot::new(topo, spec.noise, sc.b, f64::INFINITY));
    let mut g_x = g_plan.map(|p| Crossings::new(&p.h_grid, 1));
    let mut a_x = a_plan.map(|p| Crossings::new(&p.h_grid, 1));

    let mut dag = match dag_plan {
        Some(_) => Some(DagCusum::new(
            topo,
            spec.matrices.clone(),
            DagConfig {
                noise: spec.noise,
                b: sc.b,
                alpha: sc.alpha,
                h: f64::INFINITY,
                q_rounds: sc.q_rounds,
                eta3_scaling: spec.eta3_scaling,
                collapsed_warm_up: spec.collapsed_warm_up,
            },
        )?),
        None => None,
    };
    let mut dag_x = dag_plan.map(|p| Crossings::new(&p.h_grid, n));

    let mut trace = spec.record_trace.then(|| ReplicationTrace { bits: BitHistory::new(n), ..Default::default() });
    let mut row = vec![0u8; n];

    for m in 1..=sc.secure_len {
        source.secure_bits(m, &mut row);
        if let Some(c) = central.as_mut() {
            c.push_secure(&row)?;
        }
        if let Some(d) = dag.as_mut() {
            d.warm_up_step(&row)?;
        }
        if let Some(t) = trace.as_mut() {
            t.bits.push_secure(&row)?;
        }
    }
    if let Some(d) = dag.as_mut() {
        d.finish_warm_up()?;
    }

    let mut steps = 0;
    for k in 1..=spec.horizon {
        let oracle_live = oracle_x.as_ref().is_some_and(|x| !x.done());
        let g_live = g_x.as_ref().is_some_and(|x| !x.done());
        let a_live = a_x.as_ref().is_some_and(|x| !x.done());
        let dag_live = dag_x.as_ref().is_some_and(|x| !x.done());
        if !(oracle_live || g_live || a_live || dag_live) && trace.is_none() {
            break;
        }
        if !source.monitoring_bits(k, &mut row) {
            break;
        }
        steps = k;
        if let Some(t) = trace.as_mut() {
            t.bits.push_monitoring(&row)?;
        }

        if let (Some(o), Some(x)) = (oracle.as_mut(), oracle_x.as_mut()) {
            let (s, _) = o.step(&row);
            x.record(0, s, k);
        }

        if let Some(c) = central.as_mut() {
            c.push_monitoring(&row)?;
            if g_live || a_live || trace.is_some() {
                let out = c.evaluate()?;
                if let Some(x) = g_x.as_mut() {
                    x.record(0, out.h_g, k);
                }
                if let Some(x) = a_x.as_mut() {
                    x.record(0, out.h_a, k);
                }
                if let Some(t) = trace.as_mut() {
                    t.central.push(CentralTraceRow { k, h_g: out.h_g, h_a: out.h_a, k_hat: out.k_hat });
                }
            }
        }

        if let (Some(d), Some(x)) = (dag.as_mut(), dag_x.as_mut()) {
            let states = d.step(&row)?;
            for (j, s) in states.iter().enumerate() {
                x.record(j, s.h_d, k);
            }
            if let Some(t) = trace.as_mut() {
                for (j, s) in states.iter().enumerate() {
                    t.dag.push(DagTraceRow {
                        k,
                        sensor: j,
                        eta1: s.eta1_hat,
                        eta2: s.eta2_hat,
                        eta3: s.eta3_hat,
                        h_d: s.h_d,
                        stopped: x.next[j] > 0,
                    });
                }
            }
        }
    }

    let mut detectors = Vec::new();
    for d in &spec.detectors {
        let outcome = match d.kind {
            DetectorKind::OracleCusum => oracle_x.take(),
            DetectorKind::Gcusum => g_x.take(),
            DetectorKind::Alternative => a_x.take(),
            DetectorKind::DagCusum => dag_x.take(),
        };
        if let Some(x) = outcome {
            detectors.push(x.into_outcome(d.kind));
        }
    }
    Ok(ReplicationOutcome {
        detectors,
        steps,
        degenerate_events: dag.as_ref().map_or(0, |d| d.degenerate_events()),
        trace,
    })
}

/// Builds a spec whose consensus uses one shared matrix on every stream.
pub fn uniform_matrices(w: crate::topology::WeightMatrix) -> ConsensusMatrices {
    ConsensusMatrices::uniform(Arc::new(w))
}
