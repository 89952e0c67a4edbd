//! Domain types shared by the solver, clustering and stream layers.
//!
//! Matrices are column-major with objects as columns, so a window of `n`
//! objects with `d` features is a `d × n` matrix.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::math;
use crate::Matrix;

/// One landmark window: a batch of objects with stable ids and optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DataWindow {
    matrix: Matrix,
    object_ids: Vec<u64>,
    labels: Option<Vec<String>>,
    window_index: usize,
}

impl DataWindow {
    pub fn new(
        matrix: Matrix,
        object_ids: Vec<u64>,
        labels: Option<Vec<String>>,
        window_index: usize,
    ) -> Result<Self> {
        let n = matrix.ncols();
        if let Some((idx, _)) = matrix.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let rows = matrix.nrows().max(1);
            return Err(CoreError::InvalidInput(format!(
                "non-finite entry at row {}, column {}",
                idx % rows,
                idx / rows
            )));
        }
        if object_ids.len() != n {
            return Err(CoreError::LengthMismatch { left: object_ids.len(), right: n });
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(CoreError::LengthMismatch { left: labels.len(), right: n });
            }
        }
        let mut seen = BTreeSet::new();
        for id in &object_ids {
            if !seen.insert(*id) {
                return Err(CoreError::InvalidInput(format!("duplicate object id {id}")));
            }
        }
        Ok(Self { matrix, object_ids, labels, window_index })
    }

    /// Window with sequential ids starting at `first_id` and no labels.
    pub fn unlabeled(matrix: Matrix, first_id: u64, window_index: usize) -> Result<Self> {
        let ids = (0..matrix.ncols() as u64).map(|i| first_id + i).collect();
        Self::new(matrix, ids, None, window_index)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn object_ids(&self) -> &[u64] {
        &self.object_ids
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn window_index(&self) -> usize {
        self.window_index
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn len(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.ncols() == 0
    }

    /// Same objects, new feature values (e.g. after corruption).
    pub fn with_matrix(&self, matrix: Matrix) -> Result<Self> {
        if matrix.shape() != self.matrix.shape() {
            return Err(CoreError::InvalidInput(format!(
                "replacement matrix is {:?}, window is {:?}",
                matrix.shape(),
                self.matrix.shape()
            )));
        }
        Self::new(matrix, self.object_ids.clone(), self.labels.clone(), self.window_index)
    }

    pub fn into_parts(self) -> (Matrix, Vec<u64>, Option<Vec<String>>, usize) {
        (self.matrix, self.object_ids, self.labels, self.window_index)
    }
}

/// Norm used for the noise term `E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseNorm {
    /// Sum of column norms; zeroes whole columns.
    #[default]
    L21,
    /// Elementwise absolute sum.
    L1,
    /// Squared Frobenius norm (dense Gaussian noise).
    Fro,
}

/// Parameters of the inexact augmented-Lagrangian solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    pub mu0: f64,
    pub mu_max: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub noise_norm: NoiseNorm,
    pub zero_diagonal: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 10.0,
            mu0: 1e-2,
            mu_max: 1e10,
            rho: 1.1,
            epsilon: 1e-6,
            max_iters: 500,
            noise_norm: NoiseNorm::L21,
            zero_diagonal: true,
        }
    }
}

impl SolverConfig {
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(CoreError::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        positive("lambda", self.lambda)?;
        positive("mu0", self.mu0)?;
        positive("mu_max", self.mu_max)?;
        positive("epsilon", self.epsilon)?;
        if self.mu0 >= self.mu_max {
            return Err(CoreError::InvalidConfig(format!(
                "mu0 ({}) must be below mu_max ({})",
                self.mu0, self.mu_max
            )));
        }
        if !(self.rho > 1.0) || !self.rho.is_finite() {
            return Err(CoreError::InvalidConfig(format!("rho must exceed 1, got {}", self.rho)));
        }
        if self.max_iters == 0 {
            return Err(CoreError::InvalidConfig("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Solver output. `z` is `n × n`, `e` is `d × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    pub z: Matrix,
    pub e: Matrix,
    pub iterations: usize,
    pub converged: bool,
    /// Max-norms of `X − XZ − E` and `Z − J` at exit.
    pub final_residuals: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterLevel {
    Micro,
    Macro,
    Final,
}

/// A partition of the columns `0..n` of a window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterSet {
    assignments: Vec<usize>,
    clusters: Vec<Vec<usize>>,
    level: ClusterLevel,
}

impl ClusterSet {
    /// Builds a partition from raw labels. Labels are compacted in order of
    /// first appearance of each label value, so empty labels disappear.
    pub fn from_assignments(raw: &[usize], level: ClusterLevel) -> Result<Self> {
        if raw.is_empty() {
            return Err(CoreError::InvalidInput("cannot partition zero objects".into()));
        }
        let mut relabel: Vec<Option<usize>> = vec![None; raw.iter().max().map_or(0, |m| m + 1)];
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        let mut assignments = Vec::with_capacity(raw.len());
        for (obj, &label) in raw.iter().enumerate() {
            let id = match relabel[label] {
                Some(id) => id,
                None => {
                    let id = clusters.len();
                    relabel[label] = Some(id);
                    clusters.push(Vec::new());
                    id
                }
            };
            clusters[id].push(obj);
            assignments.push(id);
        }
        Ok(Self { assignments, clusters, level })
    }

    /// Builds a partition from member lists; empty lists are dropped and the
    /// remaining clusters keep their relative order.
    pub fn from_members(members: Vec<Vec<usize>>, n: usize, level: ClusterLevel) -> Result<Self> {
        let mut assignments = vec![usize::MAX; n];
        let mut clusters = Vec::new();
        for mut set in members.into_iter().filter(|s| !s.is_empty()) {
            set.sort_unstable();
            let id = clusters.len();
            for &obj in &set {
                if obj >= n {
                    return Err(CoreError::InvalidInput(format!(
                        "member {obj} out of range for {n} objects"
                    )));
                }
                if assignments[obj] != usize::MAX {
                    return Err(CoreError::InvalidInput(format!(
                        "object {obj} appears in two clusters"
                    )));
                }
                assignments[obj] = id;
            }
            clusters.push(set);
        }
        if let Some(obj) = assignments.iter().position(|&a| a == usize::MAX) {
            return Err(CoreError::InvalidInput(format!("object {obj} is not in any cluster")));
        }
        if clusters.is_empty() {
            return Err(CoreError::InvalidInput("cannot partition zero objects".into()));
        }
        Ok(Self { assignments, clusters, level })
    }

    pub fn single(n: usize, level: ClusterLevel) -> Result<Self> {
        Self::from_assignments(&vec![0; n], level)
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn members(&self, cluster: usize) -> &[usize] {
        &self.clusters[cluster]
    }

    pub fn level(&self) -> ClusterLevel {
        self.level
    }

    pub fn with_level(mut self, level: ClusterLevel) -> Self {
        self.level = level;
        self
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn n_objects(&self) -> usize {
        self.assignments.len()
    }

    /// Checks the partition invariants; used by tests and debug assertions.
    pub fn is_consistent(&self) -> bool {
        let mut seen = vec![false; self.assignments.len()];
        for (id, set) in self.clusters.iter().enumerate() {
            if set.is_empty() {
                return false;
            }
            for &obj in set {
                if obj >= seen.len() || seen[obj] || self.assignments[obj] != id {
                    return false;
                }
                seen[obj] = true;
            }
        }
        seen.iter().all(|s| *s)
    }
}

/// Per-object outlier diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectDiagnostics {
    /// Sparsity residual value; 0 for an exactly represented object.
    pub srv: f64,
    pub is_outlier: bool,
    pub residual_norm: f64,
}

/// Stream-level configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamConfig {
    pub window_size: usize,
    /// Microcluster multiplier, `m = ceil(m_prime · k_max)`.
    pub m_prime: f64,
    pub k_max: usize,
    /// Outlier threshold on the SRV.
    pub sigma: f64,
    pub fine_tune: bool,
    /// Bank budget as a fraction of `window_size`.
    pub rep_fraction: f64,
    /// Skip merging when `k_max <= 2` and `m_prime == 1`.
    pub skip_merge_for_few_classes: bool,
    /// Minimum gap, in mean relative residual, that the merge test demands
    /// between a pair and every reference cluster.
    pub merge_margin: f64,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            window_size: 200,
            m_prime: 1.0,
            k_max: 2,
            sigma: 0.05,
            fine_tune: false,
            rep_fraction: 0.1,
            skip_merge_for_few_classes: true,
            merge_margin: 0.02,
            seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

impl StreamConfig {
    /// Number of microclusters requested from the spectral stage.
    pub fn microclusters(&self) -> usize {
        (math::ceil(self.m_prime * self.k_max as f64 - 1e-9) as usize).max(1)
    }

    /// Maximum number of representatives carried to the next window.
    pub fn bank_budget(&self) -> usize {
        math::ceil(self.rep_fraction * self.window_size as f64 - 1e-9) as usize
    }

    pub fn merging_enabled(&self) -> bool {
        !(self.skip_merge_for_few_classes && self.k_max <= 2 && self.m_prime == 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.window_size == 0 {
            return Err(CoreError::InvalidConfig("window_size must be positive".into()));
        }
        if self.k_max == 0 {
            return Err(CoreError::InvalidConfig("k_max must be positive".into()));
        }
        if !(1.0..=2.0).contains(&self.m_prime) {
            return Err(CoreError::InvalidConfig(format!(
                "m_prime must lie in [1, 2], got {}",
                self.m_prime
            )));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(CoreError::InvalidConfig(format!(
                "sigma must lie in (0, 1), got {}",
                self.sigma
            )));
        }
        if !(self.rep_fraction > 0.0 && self.rep_fraction <= 1.0) {
            return Err(CoreError::InvalidConfig(format!(
                "rep_fraction must lie in (0, 1], got {}",
                self.rep_fraction
            )));
        }
        if !(self.merge_margin >= 0.0 && self.merge_margin.is_finite()) {
            return Err(CoreError::InvalidConfig(format!(
                "merge_margin must be a non-negative number, got {}",
                self.merge_margin
            )));
        }
        let m = self.microclusters();
        if self.window_size < m {
            return Err(CoreError::InvalidConfig(format!(
                "window_size {} is smaller than the microcluster count {m}",
                self.window_size
            )));
        }
        Ok(())
    }
}

/// Metrics for one processed (or skipped) window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowReport {
    pub window_index: usize,
    pub n_objects: usize,
    pub bank_size: usize,
    pub purity: Option<f64>,
    pub f_measure: Option<f64>,
    pub n_clusters: usize,
    pub n_outliers: usize,
    pub runtime_ms: f64,
    pub solver_iterations: usize,
    pub converged: bool,
    /// True when the window was too short to process.
    pub skipped: bool,
}

impl WindowReport {
    pub(crate) fn skipped(window_index: usize, n_objects: usize, bank_size: usize) -> Self {
        Self {
            window_index,
            n_objects,
            bank_size,
            purity: None,
            f_measure: None,
            n_clusters: 0,
            n_outliers: 0,
            runtime_ms: 0.0,
            solver_iterations: 0,
            converged: false,
            skipped: true,
        }
    }
}

/// Engine state carried between windows.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamState {
    /// Representatives from the previous window, `d × r`.
    pub bank: Matrix,
    pub bank_ids: Vec<u64>,
    pub window_counter: usize,
    pub history: Vec<WindowReport>,
}

impl StreamState {
    pub fn bank_size(&self) -> usize {
        self.bank.ncols()
    }
}
