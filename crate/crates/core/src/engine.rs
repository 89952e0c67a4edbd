//! Window-by-window driver: code, cluster, flag outliers, refresh the bank.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::eval;
use crate::hierarchy::{self, MergeOptions};
use crate::model::{
    ClusterLevel, ClusterSet, DataWindow, ObjectDiagnostics, StreamConfig, StreamState, WindowReport,
};
use crate::solver::solve_sparse_code;
use crate::spectral;
use crate::srv;
use crate::Matrix;

/// Millisecond time source. The core crate has no clock of its own.
pub trait Clock {
    fn now_ms(&self) -> f64;
}

/// Clock that always reads zero; runtimes come out as 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ms(&self) -> f64 {
        0.0
    }
}

/// Per-object results for the current window's objects, in window order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WindowOutput {
    pub object_ids: Vec<u64>,
    /// Final cluster index of each object.
    pub labels: Vec<usize>,
    pub diagnostics: Vec<ObjectDiagnostics>,
}

impl WindowOutput {
    pub fn outlier_flags(&self) -> Vec<bool> {
        self.diagnostics.iter().map(|d| d.is_outlier).collect()
    }
}

/// Averages over a whole stream. Means skip windows without the metric.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamAggregate {
    pub windows: usize,
    pub processed: usize,
    pub skipped: usize,
    pub mean_purity: Option<f64>,
    pub mean_f_measure: Option<f64>,
    pub mean_clusters: Option<f64>,
    pub total_outliers: usize,
    pub mean_runtime_ms: Option<f64>,
    pub all_converged: bool,
}

impl StreamAggregate {
    pub fn from_reports(reports: &[WindowReport]) -> Self {
        let processed: Vec<&WindowReport> = reports.iter().filter(|r| !r.skipped).collect();
        let mean = |vals: Vec<f64>| {
            if vals.is_empty() {
                None
            } else {
                Some(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        };
        Self {
            windows: reports.len(),
            processed: processed.len(),
            skipped: reports.len() - processed.len(),
            mean_purity: mean(processed.iter().filter_map(|r| r.purity).collect()),
            mean_f_measure: mean(processed.iter().filter_map(|r| r.f_measure).collect()),
            mean_clusters: mean(processed.iter().map(|r| r.n_clusters as f64).collect()),
            total_outliers: processed.iter().map(|r| r.n_outliers).sum(),
            mean_runtime_ms: mean(processed.iter().map(|r| r.runtime_ms).collect()),
            all_converged: processed.iter().all(|r| r.converged),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamSummary {
    pub reports: Vec<WindowReport>,
    pub outputs: Vec<WindowOutput>,
    pub aggregate: StreamAggregate,
    pub state: StreamState,
}

pub fn init_state(cfg: &StreamConfig) -> Result<StreamState> {
    cfg.validate()?;
    Ok(StreamState {
        bank: Matrix::zeros(0, 0),
        bank_ids: Vec::new(),
        window_counter: 0,
        history: Vec::new(),
    })
}

fn window_seed(base: u64, counter: usize) -> u64 {
    base ^ (counter as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Processes one window against the current bank.
///
/// An empty window returns a skipped report and leaves the state untouched.
/// A window shorter than the microcluster count is reported as skipped and
/// keeps the old bank.
pub fn process_window(
    mut state: StreamState,
    window: &DataWindow,
    cfg: &StreamConfig,
    clock: &dyn Clock,
) -> Result<(StreamState, WindowReport, WindowOutput)> {
    cfg.validate()?;
    let started = clock.now_ms();
    let n_win = window.len();
    let n_bank = state.bank_size();
    let m = cfg.microclusters();

    if n_win == 0 {
        let report = WindowReport::skipped(window.window_index(), 0, n_bank);
        return Ok((state, report, WindowOutput::default()));
    }
    if n_bank > 0 && state.bank.nrows() != window.dim() {
        return Err(CoreError::InvalidInput(alloc::format!(
            "window dimension {} differs from bank dimension {}",
            window.dim(),
            state.bank.nrows()
        )));
    }
    if n_win < m || n_bank + n_win < 2 {
        let report = WindowReport::skipped(window.window_index(), n_win, n_bank);
        state.window_counter += 1;
        state.history.push(report.clone());
        let output = WindowOutput {
            object_ids: window.object_ids().to_vec(),
            ..WindowOutput::default()
        };
        return Ok((state, report, output));
    }

    // Bank columns first, then the window: X = [X_s, X_t].
    let x = if n_bank == 0 {
        window.matrix().clone()
    } else {
        let mut x = Matrix::zeros(window.dim(), n_bank + n_win);
        x.columns_mut(0, n_bank).copy_from(&state.bank);
        x.columns_mut(n_bank, n_win).copy_from(window.matrix());
        x
    };
    let code = solve_sparse_code(&x, &cfg.solver)?;

    let affinity = spectral::build_affinity(&code.z)?;
    let seed = window_seed(cfg.seed, state.window_counter);
    let micro = match spectral::ncuts(&affinity, m.min(x.ncols()), seed) {
        Err(CoreError::DegenerateAffinity) => spectral::round_robin(x.ncols(), m)?,
        other => other?,
    };
    let macro_set = if cfg.merging_enabled() {
        let opts = MergeOptions { merge_lone_pair: m == 2, tolerance: cfg.merge_margin };
        hierarchy::merge_microclusters_with(&micro, &code.z, &x, opts)?
    } else {
        micro.with_level(ClusterLevel::Macro)
    };
    let fine = hierarchy::fine_tune(&macro_set, &code.z, &x, cfg.fine_tune)?.clusters;

    let diagnostics = srv::diagnostics(&code.e, cfg.sigma);

    // Representatives come from the current window's objects only.
    let window_members: Vec<Vec<usize>> = fine
        .clusters()
        .iter()
        .map(|c| c.iter().filter(|&&i| i >= n_bank).map(|&i| i - n_bank).collect())
        .collect();
    let window_clusters = ClusterSet::from_members(window_members, n_win, ClusterLevel::Final)?;
    let window_diag: Vec<ObjectDiagnostics> = diagnostics[n_bank..].to_vec();
    let reps = srv::select_representatives(&window_clusters, &window_diag, cfg.bank_budget());

    let labels: Vec<usize> = fine.assignments()[n_bank..].to_vec();
    let (purity, f_measure) = match window.labels() {
        Some(truth) => (Some(eval::purity(&labels, truth)?), Some(eval::f_measure(&labels, truth)?)),
        None => (None, None),
    };

    let mut bank = Matrix::zeros(window.dim(), reps.len());
    for (slot, &i) in reps.iter().enumerate() {
        bank.set_column(slot, &window.matrix().column(i));
    }
    let bank_ids: Vec<u64> = reps.iter().map(|&i| window.object_ids()[i]).collect();

    let report = WindowReport {
        window_index: window.window_index(),
        n_objects: n_win,
        bank_size: n_bank,
        purity,
        f_measure,
        n_clusters: fine.len(),
        n_outliers: window_diag.iter().filter(|d| d.is_outlier).count(),
        runtime_ms: clock.now_ms() - started,
        solver_iterations: code.iterations,
        converged: code.converged,
        skipped: false,
    };
    state.bank = bank;
    state.bank_ids = bank_ids;
    state.window_counter += 1;
    state.history.push(report.clone());
    let output = WindowOutput {
        object_ids: window.object_ids().to_vec(),
        labels,
        diagnostics: window_diag,
    };
    Ok((state, report, output))
}

/// Folds [`process_window`] over every window. Errors carry the index of the
/// window that raised them.
pub fn run_stream<I>(windows: I, cfg: &StreamConfig, clock: &dyn Clock) -> Result<StreamSummary>
where
    I: IntoIterator<Item = DataWindow>,
{
    let mut state = init_state(cfg)?;
    let mut reports = Vec::new();
    let mut outputs = Vec::new();
    for window in windows {
        let index = window.window_index();
        let (next, report, output) = process_window(state, &window, cfg, clock)
            .map_err(|e| CoreError::AtWindow { index, source: Box::new(e) })?;
        state = next;
        reports.push(report);
        outputs.push(output);
    }
    if reports.is_empty() {
        return Err(CoreError::InsufficientData("stream yielded no windows".into()));
    }
    let aggregate = StreamAggregate::from_reports(&reports);
    Ok(StreamSummary { reports, outputs, aggregate, state })
}
