//! Function discovery by cluster-wise sparse linear regression.
//!
//! For a target column, rows of a sample are split into `K` clusters, each
//! with its own sparse linear model over the remaining numeric columns. The
//! fit alternates between assigning every row to the model that predicts it
//! best and refitting each cluster's model, until the penalized objective
//! `SSE + λ·Σ‖w_k‖₀` stops improving.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regression::{fit_indexed, mean, DesignMatrix, IndexedModel, Moments, RegressorModel};
use crate::table::{Sample, Table};

/// Bounded redraws in [`init_assignments`] before falling back to round-robin.
const INIT_RETRIES: usize = 16;

/// Samples up to this size get single-row move refinement after alternation.
const REFINE_MAX_ROWS: usize = 64;

/// Random subset draws per seeded start; the best one is kept.
const SEED_TRIALS: usize = 16;

/// Relative objective decrease a single-row move must achieve.
const MOVE_GAIN: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl ClusterAssignment {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn cluster_rows(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l == cluster)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KRegressionCandidate {
    pub target: String,
    /// Union of model supports, in table column order.
    pub references: Vec<String>,
    pub k: usize,
    pub models: Vec<RegressorModel>,
    pub lambda: f64,
    /// Worst residual against the closest model, in original units.
    pub sample_max_abs_error: f64,
    pub sample_sse: f64,
    /// Penalized objective `SSE + λ·Σ‖w_k‖₀` at the returned models.
    pub objective: f64,
    /// Rows of the sample that took part in fitting.
    pub fit_rows: usize,
    /// Objective after initialization and after every alternation step.
    #[serde(default, skip_serializing)]
    pub objective_trace: Vec<f64>,
}

impl KRegressionCandidate {
    pub fn total_support(&self) -> usize {
        self.models.iter().map(RegressorModel::support_size).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lambda {
    /// `error_threshold² · sample_rows / 100`.
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug)]
pub struct DrillConfig {
    pub k_max: usize,
    pub lambda: Lambda,
    pub sample_size: usize,
    pub error_threshold: f64,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub max_support: usize,
    pub seed: u64,
    /// Reference candidates null in more than this fraction of sample rows
    /// are left out, so that sparse columns do not starve the fit of rows.
    pub max_reference_null_fraction: f64,
    /// Restrict drilling to these targets; all eligible columns when `None`.
    pub targets: Option<Vec<String>>,
}

impl Default for DrillConfig {
    fn default() -> Self {
        Self {
            k_max: 4,
            lambda: Lambda::Auto,
            sample_size: 10_000,
            error_threshold: 1.0,
            restarts: 3,
            max_iter: 50,
            tol: 1e-6,
            max_support: 8,
            seed: 42,
            max_reference_null_fraction: 0.5,
            targets: None,
        }
    }
}

impl DrillConfig {
    pub fn resolve_lambda(&self, sample_rows: usize) -> f64 {
        match self.lambda {
            Lambda::Auto => self.error_threshold.powi(2) * sample_rows as f64 / 100.0,
            Lambda::Fixed(l) => l,
        }
    }
}

/// Alternation settings for a single K-regression run.
#[derive(Clone, Copy, Debug)]
pub struct AlternationOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub max_support: usize,
}

impl Default for AlternationOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-6,
            max_support: 8,
        }
    }
}

/// Result of one K-regression run on an in-memory design matrix.
#[derive(Clone, Debug)]
pub struct KRegressionFit {
    pub models: Vec<RegressorModel>,
    pub assignment: ClusterAssignment,
    pub sse: f64,
    pub objective: f64,
    pub objective_trace: Vec<f64>,
    pub max_abs_error: f64,
}

/// Uniform random labels in `0..k` with every cluster non-empty.
pub fn init_assignments(sample_size: usize, k: usize, seed: u64) -> Result<ClusterAssignment> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if sample_size < k {
        return Err(Error::InvalidArgument(format!(
            "cannot split {sample_size} rows into {k} non-empty clusters"
        )));
    }
    if k == 1 {
        return Ok(ClusterAssignment {
            labels: vec![0; sample_size],
            k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..INIT_RETRIES {
        let labels: Vec<usize> = (0..sample_size).map(|_| rng.random_range(0..k)).collect();
        let mut seen = vec![false; k];
        labels.iter().for_each(|&l| seen[l] = true);
        if seen.iter().all(|&s| s) {
            return Ok(ClusterAssignment { labels, k });
        }
    }
    Ok(ClusterAssignment {
        labels: (0..sample_size).map(|i| i % k).collect(),
        k,
    })
}

/// One sparse fit per cluster; empty clusters get the global mean.
pub fn fit_models(
    x: &DesignMatrix,
    y: &[f64],
    assignment: &ClusterAssignment,
    lambda: f64,
    max_support: usize,
) -> Result<Vec<RegressorModel>> {
    check_shapes(x, y, assignment)?;
    Ok(
        fit_models_indexed(&x.columns, y, assignment, lambda, max_support)?
            .iter()
            .map(|m| m.to_named(&x.names))
            .collect(),
    )
}

/// Assigns every row to the model with the smallest squared residual,
/// lowest cluster id on ties.
pub fn reassign(
    x: &DesignMatrix,
    y: &[f64],
    models: &[RegressorModel],
) -> Result<ClusterAssignment> {
    if models.is_empty() {
        return Err(Error::InvalidArgument(
            "reassign needs at least one model".into(),
        ));
    }
    let indexed = models
        .iter()
        .map(|m| index_model(m, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(reassign_indexed(&x.columns, y, &indexed))
}

/// Initial assignment for one alternation run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Start {
    /// [`init_assignments`] with this seed.
    Random(u64),
    /// [`seed_assignments`] with this seed.
    Seeded(u64),
}

/// Starts used for `restarts` runs at a given `k`.
pub fn restart_plan(k: usize, restarts: usize, seed_of: impl Fn(usize) -> u64) -> Vec<Start> {
    if k == 1 {
        return vec![Start::Random(seed_of(0))];
    }
    (0..restarts.max(1))
        .map(|r| Start::Seeded(seed_of(r)))
        .collect()
}

/// Fits one model per cluster on a small disjoint random subset of rows and
/// assigns every row to the model that predicts it best, keeping the best of
/// several draws. Subsets hold `columns + 1` rows where the sample allows,
/// enough for an exact fit.
pub fn seed_assignments(
    x: &DesignMatrix,
    y: &[f64],
    k: usize,
    lambda: f64,
    max_support: usize,
    seed: u64,
) -> Result<ClusterAssignment> {
    let n = y.len();
    if k == 0 || n < k {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} rows into {k} non-empty clusters"
        )));
    }
    if x.n_cols() > 0 && x.n_rows() != n {
        return Err(Error::InvalidArgument(format!(
            "design matrix has {} rows, target has {n}",
            x.n_rows()
        )));
    }
    let size = (x.n_cols() + 1).min(n / k).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, ClusterAssignment)> = None;
    for _ in 0..SEED_TRIALS {
        let picked = rand::seq::index::sample(&mut rng, n, size * k).into_vec();
        let models = picked
            .chunks(size)
            .map(|rows| fit_rows(&x.columns, y, rows, lambda, max_support))
            .collect::<Result<Vec<_>>>()?;
        let assignment = reassign_indexed(&x.columns, y, &models);
        let objective = penalized_objective(&x.columns, y, &assignment, &models, lambda);
        if best.as_ref().is_none_or(|(b, _)| objective < *b) {
            best = Some((objective, assignment));
        }
    }
    Ok(best.expect("at least one trial").1)
}

/// Alternates [`reassign`] and [`fit_models`] from a random start.
pub fn k_regression_matrix(
    x: &DesignMatrix,
    y: &[f64],
    k: usize,
    lambda: f64,
    options: &AlternationOptions,
    seed: u64,
) -> Result<KRegressionFit> {
    k_regression_from(x, y, k, lambda, options, Start::Random(seed))
}

/// Alternates [`reassign`] and [`fit_models`] from `start`.
///
/// The objective sequence is non-increasing: a refit that would raise the
/// objective keeps the previous model for that cluster, and if rounding in
/// the total still comes out higher the whole step is rejected and the run
/// stops at the previous models.
pub fn k_regression_from(
    x: &DesignMatrix,
    y: &[f64],
    k: usize,
    lambda: f64,
    options: &AlternationOptions,
    start: Start,
) -> Result<KRegressionFit> {
    if y.is_empty() {
        return Err(Error::DegenerateInput("no rows to fit".into()));
    }
    let cols = &x.columns;
    let mut assignment = match start {
        Start::Random(seed) => init_assignments(y.len(), k, seed)?,
        Start::Seeded(seed) => seed_assignments(x, y, k, lambda, options.max_support, seed)?,
    };
    check_shapes(x, y, &assignment)?;
    let mut models = fit_models_indexed(cols, y, &assignment, lambda, options.max_support)?;
    let mut objective = penalized_objective(cols, y, &assignment, &models, lambda);
    let mut trace = vec![objective];

    let mut passes = 0;
    loop {
        alternate(
            cols,
            y,
            lambda,
            options,
            &mut assignment,
            &mut models,
            &mut objective,
            &mut trace,
        )?;
        passes += 1;
        if y.len() > REFINE_MAX_ROWS
            || passes > options.max_iter
            || !move_rows(
                cols,
                y,
                lambda,
                options.max_support,
                &mut assignment,
                &mut models,
                &mut objective,
            )?
        {
            break;
        }
        trace.push(objective);
    }

    let sse = objective - lambda * total_support(&models) as f64;
    let max_abs_error = (0..y.len())
        .map(|i| {
            models
                .iter()
                .map(|m| (y[i] - m.predict(cols, i)).abs())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    Ok(KRegressionFit {
        models: models.iter().map(|m| m.to_named(&x.names)).collect(),
        assignment,
        sse: sse.max(0.0),
        objective,
        objective_trace: trace,
        max_abs_error,
    })
}

/// Fitting rows and reference candidates for one target.
#[derive(Clone, Debug)]
pub struct TargetData {
    pub matrix: DesignMatrix,
    pub y: Vec<f64>,
}

/// Builds the de-scaled design matrix for `target` from `sample`.
///
/// Rows with a null target are dropped, as are rows with a null in any
/// reference candidate.
pub fn target_data(
    table: &Table,
    sample: &Sample,
    target: &str,
    max_reference_null_fraction: f64,
) -> Result<TargetData> {
    let target_col = table
        .column(target)
        .ok_or_else(|| Error::UnknownColumn(target.to_string()))?;
    if !target_col.meta.kind.is_scaled() {
        return Err(Error::InvalidArgument(format!(
            "target `{target}` is not a scaled numeric column"
        )));
    }
    let rows = &sample.row_indices;
    let refs: Vec<_> = table
        .columns()
        .iter()
        .filter(|c| c.name() != target && c.meta.kind.is_scaled())
        .filter(|c| {
            let nulls = rows.iter().filter(|&&r| c.is_null(r)).count();
            rows.is_empty() || (nulls as f64) <= max_reference_null_fraction * rows.len() as f64
        })
        .collect();
    let usable: Vec<usize> = rows
        .iter()
        .copied()
        .filter(|&r| !target_col.is_null(r) && refs.iter().all(|c| !c.is_null(r)))
        .collect();
    let matrix = DesignMatrix {
        names: refs.iter().map(|c| c.name().to_string()).collect(),
        columns: refs
            .iter()
            .map(|c| usable.iter().map(|&r| c.descaled_at(r).unwrap()).collect())
            .collect(),
    };
    let y = usable
        .iter()
        .map(|&r| target_col.descaled_at(r).unwrap())
        .collect();
    Ok(TargetData { matrix, y })
}

/// K-regression for one target column over the sample rows.
#[allow(clippy::too_many_arguments)]
pub fn k_regression(
    table: &Table,
    sample: &Sample,
    target: &str,
    k: usize,
    lambda: f64,
    options: &AlternationOptions,
    seed: u64,
) -> Result<KRegressionCandidate> {
    let data = target_data(table, sample, target, 1.0)?;
    k_regression_on(&data, target, k, lambda, options, Start::Random(seed))
}

fn k_regression_on(
    data: &TargetData,
    target: &str,
    k: usize,
    lambda: f64,
    options: &AlternationOptions,
    start: Start,
) -> Result<KRegressionCandidate> {
    if data.y.is_empty() {
        return Err(Error::NoUsableRows(target.to_string()));
    }
    let fit = k_regression_from(&data.matrix, &data.y, k, lambda, options, start)?;
    let references = data
        .matrix
        .names
        .iter()
        .filter(|n| fit.models.iter().any(|m| m.weight(n).is_some()))
        .cloned()
        .collect();
    Ok(KRegressionCandidate {
        target: target.to_string(),
        references,
        k,
        models: fit.models,
        lambda,
        sample_max_abs_error: fit.max_abs_error,
        sample_sse: fit.sse,
        objective: fit.objective,
        fit_rows: data.y.len(),
        objective_trace: fit.objective_trace,
    })
}

/// Extra objective charged for `k` clusters: the switch column's
/// `log₂ K` bits per row, weighed at `λ` per byte.
pub fn switch_penalty(lambda: f64, rows: usize, k: usize) -> f64 {
    lambda * rows as f64 * (k as f64).log2() / 8.0
}

/// Runs K-regression on every eligible target and keeps those whose best
/// fit stays within the error threshold and uses at least one reference.
///
/// The sweep over K stops once the switch penalty alone reaches the best
/// score so far, since no larger K can beat it.
pub fn drill(
    table: &Table,
    sample: &Sample,
    config: &DrillConfig,
) -> Result<Vec<KRegressionCandidate>> {
    let lambda = config.resolve_lambda(sample.len());
    let options = AlternationOptions {
        max_iter: config.max_iter,
        tol: config.tol,
        max_support: config.max_support,
    };
    let targets: Vec<(usize, &str)> = table
        .columns()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.meta.kind.is_scaled())
        .filter(|(_, c)| {
            config
                .targets
                .as_ref()
                .is_none_or(|t| t.iter().any(|n| n == c.name()))
        })
        .map(|(i, c)| (i, c.name()))
        .collect();

    let results: Vec<Option<KRegressionCandidate>> = targets
        .par_iter()
        .map(|&(idx, target)| {
            let data = target_data(table, sample, target, config.max_reference_null_fraction)?;
            if data.y.is_empty() || data.matrix.n_cols() == 0 {
                return Ok(None);
            }
            let mut best: Option<(f64, KRegressionCandidate)> = None;
            for k in 1..=config.k_max.min(data.y.len()) {
                let penalty = switch_penalty(lambda, data.y.len(), k);
                if best.as_ref().is_some_and(|(s, _)| *s <= penalty) {
                    break;
                }
                let starts = restart_plan(k, config.restarts, |r| {
                    mix_seed(config.seed, idx as u64, k as u64, r as u64)
                });
                for start in starts {
                    let cand = k_regression_on(&data, target, k, lambda, &options, start)?;
                    let score = cand.objective + penalty;
                    if best.as_ref().is_none_or(|(s, _)| score < *s) {
                        best = Some((score, cand));
                    }
                }
            }
            Ok(best.map(|(_, c)| c).filter(|c| {
                c.sample_max_abs_error < config.error_threshold && c.total_support() > 0
            }))
        })
        .collect::<Result<_>>()?;
    Ok(results.into_iter().flatten().collect())
}

/// SplitMix64-style combination of the run seed with per-run coordinates.
pub fn mix_seed(seed: u64, a: u64, b: u64, c: u64) -> u64 {
    let mut z = seed;
    for v in [a, b, c] {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(v);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

fn check_shapes(x: &DesignMatrix, y: &[f64], assignment: &ClusterAssignment) -> Result<()> {
    if assignment.len() != y.len() || (x.n_cols() > 0 && x.n_rows() != y.len()) {
        return Err(Error::InvalidArgument(format!(
            "assignment has {} rows, target {}, design matrix {}",
            assignment.len(),
            y.len(),
            x.n_rows()
        )));
    }
    Ok(())
}

fn index_model(model: &RegressorModel, x: &DesignMatrix) -> Result<IndexedModel> {
    let mut terms = model
        .weights
        .iter()
        .map(|(name, w)| {
            x.names
                .iter()
                .position(|n| n == name)
                .map(|j| (j, *w))
                .ok_or_else(|| Error::MissingReference(name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    terms.sort_by_key(|&(j, _)| j);
    Ok(IndexedModel {
        terms,
        intercept: model.intercept,
    })
}

fn fit_models_indexed(
    cols: &[Vec<f64>],
    y: &[f64],
    assignment: &ClusterAssignment,
    lambda: f64,
    max_support: usize,
) -> Result<Vec<IndexedModel>> {
    (0..assignment.k)
        .map(|c| {
            let rows = assignment.cluster_rows(c);
            if rows.is_empty() {
                return Ok(IndexedModel::intercept_only(mean(y)));
            }
            let sub_cols: Vec<Vec<f64>> = cols
                .iter()
                .map(|col| rows.iter().map(|&i| col[i]).collect())
                .collect();
            let sub_y: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            fit_indexed(&sub_cols, &sub_y, lambda, max_support)
        })
        .collect()
}

fn reassign_indexed(cols: &[Vec<f64>], y: &[f64], models: &[IndexedModel]) -> ClusterAssignment {
    let labels = (0..y.len())
        .map(|i| {
            let mut best = (0, f64::INFINITY);
            for (k, m) in models.iter().enumerate() {
                let r = y[i] - m.predict(cols, i);
                let sq = r * r;
                if sq < best.1 {
                    best = (k, sq);
                }
            }
            best.0
        })
        .collect();
    ClusterAssignment {
        labels,
        k: models.len(),
    }
}

fn total_support(models: &[IndexedModel]) -> usize {
    models.iter().map(IndexedModel::support_size).sum()
}

/// Row-order sum of squared residuals plus the L0 penalty.
fn penalized_objective(
    cols: &[Vec<f64>],
    y: &[f64],
    assignment: &ClusterAssignment,
    models: &[IndexedModel],
    lambda: f64,
) -> f64 {
    let sse: f64 = assignment
        .labels
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let r = y[i] - models[k].predict(cols, i);
            r * r
        })
        .sum();
    sse + lambda * total_support(models) as f64
}

/// Reassign/refit rounds from the current state. Cluster moments follow
/// the assignment incrementally; a final exact refit of every cluster from
/// its rows replaces a model whenever it does not raise the objective.
#[allow(clippy::too_many_arguments)]
fn alternate(
    cols: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
    options: &AlternationOptions,
    assignment: &mut ClusterAssignment,
    models: &mut Vec<IndexedModel>,
    objective: &mut f64,
    trace: &mut Vec<f64>,
) -> Result<()> {
    let y_mean = mean(y);
    let shift: Vec<f64> = cols.iter().map(|c| mean(c)).chain([y_mean]).collect();
    let mut moments = vec![Moments::new(shift); assignment.k];
    let mut z = Vec::with_capacity(cols.len() + 1);
    for (i, &l) in assignment.labels.iter().enumerate() {
        moments[l].update(cols, y, i, 1.0, &mut z);
    }
    for _ in 0..options.max_iter {
        let next_assignment = reassign_indexed(cols, y, models);
        for (i, (&old, &new)) in assignment
            .labels
            .iter()
            .zip(&next_assignment.labels)
            .enumerate()
        {
            if old != new {
                moments[old].update(cols, y, i, -1.0, &mut z);
                moments[new].update(cols, y, i, 1.0, &mut z);
            }
        }
        let mut next_models: Vec<IndexedModel> = moments
            .iter()
            .map(|m| m.fit(lambda, options.max_support, y_mean))
            .collect();
        keep_better(cols, y, lambda, &next_assignment, &mut next_models, models);
        let next_objective = penalized_objective(cols, y, &next_assignment, &next_models, lambda);
        if next_objective > *objective {
            break;
        }
        let improvement = *objective - next_objective;
        let converged = next_assignment == *assignment
            || improvement <= options.tol * objective.abs().max(f64::MIN_POSITIVE);
        *assignment = next_assignment;
        *models = next_models;
        *objective = next_objective;
        trace.push(*objective);
        if converged {
            break;
        }
    }
    let mut exact = fit_models_indexed(cols, y, assignment, lambda, options.max_support)?;
    keep_better(cols, y, lambda, assignment, &mut exact, models);
    let exact_objective = penalized_objective(cols, y, assignment, &exact, lambda);
    if exact_objective <= *objective {
        if exact_objective < *objective {
            trace.push(exact_objective);
        }
        *models = exact;
        *objective = exact_objective;
    }
    Ok(())
}

/// Per cluster, falls back to the previous model when the new one does not
/// lower that cluster's objective.
fn keep_better(
    cols: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
    assignment: &ClusterAssignment,
    next: &mut [IndexedModel],
    previous: &[IndexedModel],
) {
    let k = next.len();
    let mut sse_new = vec![0.0; k];
    let mut sse_old = vec![0.0; k];
    for (i, &c) in assignment.labels.iter().enumerate() {
        let rn = y[i] - next[c].predict(cols, i);
        let ro = y[i] - previous[c].predict(cols, i);
        sse_new[c] += rn * rn;
        sse_old[c] += ro * ro;
    }
    for c in 0..k {
        let new_obj = sse_new[c] + lambda * next[c].support_size() as f64;
        let old_obj = sse_old[c] + lambda * previous[c].support_size() as f64;
        if old_obj <= new_obj {
            next[c] = previous[c].clone();
        }
    }
}

fn fit_rows(
    cols: &[Vec<f64>],
    y: &[f64],
    rows: &[usize],
    lambda: f64,
    max_support: usize,
) -> Result<IndexedModel> {
    let sub_cols: Vec<Vec<f64>> = cols
        .iter()
        .map(|col| rows.iter().map(|&i| col[i]).collect())
        .collect();
    let sub_y: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    fit_indexed(&sub_cols, &sub_y, lambda, max_support)
}

/// One pass of single-row moves on small samples: a row moves to another
/// cluster when refitting both clusters lowers the objective. Returns
/// whether any row moved.
fn move_rows(
    cols: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
    max_support: usize,
    assignment: &mut ClusterAssignment,
    models: &mut [IndexedModel],
    objective: &mut f64,
) -> Result<bool> {
    let k = assignment.k;
    let mut moved = false;
    for i in 0..y.len() {
        let from = assignment.labels[i];
        let from_rows = assignment.cluster_rows(from);
        if from_rows.len() <= 1 {
            continue;
        }
        let rest: Vec<usize> = from_rows.iter().copied().filter(|&r| r != i).collect();
        let from_model = fit_rows(cols, y, &rest, lambda, max_support)?;
        let from_before = cluster_objective(cols, y, &from_rows, &models[from], lambda);
        let from_after = cluster_objective(cols, y, &rest, &from_model, lambda);
        let mut best: Option<(usize, IndexedModel, f64)> = None;
        for to in (0..k).filter(|&c| c != from) {
            let to_rows = assignment.cluster_rows(to);
            let mut grown = to_rows.clone();
            grown.push(i);
            grown.sort_unstable();
            let to_model = fit_rows(cols, y, &grown, lambda, max_support)?;
            let delta = from_after + cluster_objective(cols, y, &grown, &to_model, lambda)
                - from_before
                - cluster_objective(cols, y, &to_rows, &models[to], lambda);
            if best.as_ref().is_none_or(|b| delta < b.2) {
                best = Some((to, to_model, delta));
            }
        }
        let Some((to, to_model, _)) = best else {
            continue;
        };
        let mut labels = assignment.labels.clone();
        labels[i] = to;
        let next = ClusterAssignment { labels, k };
        let mut next_models = models.to_vec();
        next_models[from] = from_model;
        next_models[to] = to_model;
        let next_objective = penalized_objective(cols, y, &next, &next_models, lambda);
        if next_objective < *objective * (1.0 - MOVE_GAIN) {
            *assignment = next;
            models.clone_from_slice(&next_models);
            *objective = next_objective;
            moved = true;
        }
    }
    Ok(moved)
}

fn cluster_objective(
    cols: &[Vec<f64>],
    y: &[f64],
    rows: &[usize],
    model: &IndexedModel,
    lambda: f64,
) -> f64 {
    let sse: f64 = rows
        .iter()
        .map(|&i| {
            let r = y[i] - model.predict(cols, i);
            r * r
        })
        .sum();
    sse + lambda * model.support_size() as f64
}
