//! Sparse least squares by greedy forward selection.
//!
//! The objective is `SSE + λ·‖w‖₀` with an unpenalized intercept. Columns are
//! admitted one at a time, always the one with the largest SSE reduction
//! under a full refit of the active set, for as long as that reduction
//! exceeds `λ`. Reductions are computed against an explicitly maintained
//! residual and Gram-Schmidt-orthogonalized candidate columns, so a
//! noiseless fit reports reductions near machine precision rather than
//! the cancellation error of normal equations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Candidates whose orthogonal remainder keeps less than this fraction of
/// their centered energy are treated as collinear with the active set.
const COLLINEAR_TOL: f64 = 1e-10;

/// Reductions below this fraction of the total sum of squares are rounding
/// noise; they never justify another reference column, even at `λ = 0`.
const GAIN_FLOOR: f64 = 1e-13;

/// Column-major design matrix over reference columns.
#[derive(Clone, Debug, Default)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl DesignMatrix {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::InvalidArgument(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if let Some(first) = columns.first() {
            if columns.iter().any(|c| c.len() != first.len()) {
                return Err(Error::InvalidArgument("ragged design matrix".into()));
            }
        }
        Ok(Self { names, columns })
    }

    pub fn from_rows(names: &[&str], rows: &[Vec<f64>]) -> Result<Self> {
        let columns = (0..names.len())
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        Self::new(names.iter().map(|s| s.to_string()).collect(), columns)
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    /// Rows `rows` of every column, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Vec<Vec<f64>> {
        self.columns
            .iter()
            .map(|c| rows.iter().map(|&i| c[i]).collect())
            .collect()
    }
}

/// One linear model `y ≈ Σ w_c·x_c + β` over named reference columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressorModel {
    /// Non-zero weights in reference-column order.
    pub weights: Vec<(String, f64)>,
    pub intercept: f64,
}

impl RegressorModel {
    pub fn intercept_only(intercept: f64) -> Self {
        Self {
            weights: Vec::new(),
            intercept,
        }
    }

    pub fn support_size(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, name: &str) -> Option<f64> {
        self.weights
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, w)| w)
    }
}

/// A model addressed by design-matrix column index, used on hot paths.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct IndexedModel {
    /// Ascending column indices with their non-zero weights.
    pub terms: Vec<(usize, f64)>,
    pub intercept: f64,
}

impl IndexedModel {
    pub fn intercept_only(intercept: f64) -> Self {
        Self {
            terms: Vec::new(),
            intercept,
        }
    }

    pub fn support_size(&self) -> usize {
        self.terms.len()
    }

    #[inline]
    pub fn predict(&self, columns: &[Vec<f64>], row: usize) -> f64 {
        let mut acc = 0.0;
        for &(j, w) in &self.terms {
            acc += w * columns[j][row];
        }
        acc + self.intercept
    }

    pub fn to_named(&self, names: &[String]) -> RegressorModel {
        RegressorModel {
            weights: self
                .terms
                .iter()
                .map(|&(j, w)| (names[j].clone(), w))
                .collect(),
            intercept: self.intercept,
        }
    }
}

/// Greedy L0-penalized least squares; see the module docs.
pub fn sparse_fit(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    max_support: usize,
) -> Result<RegressorModel> {
    if x.n_cols() > 0 && x.n_rows() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "design matrix has {} rows, target has {}",
            x.n_rows(),
            y.len()
        )));
    }
    let model = fit_indexed(&x.columns, y, lambda, max_support)?;
    Ok(model.to_named(&x.names))
}

pub(crate) fn fit_indexed(
    columns: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
    max_support: usize,
) -> Result<IndexedModel> {
    let n = y.len();
    if n == 0 {
        return Err(Error::DegenerateInput("no rows to fit".into()));
    }
    let y_mean = mean(y);
    let mut residual: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let total_ss = dot(&residual, &residual);

    let means: Vec<f64> = columns.iter().map(|c| mean(c)).collect();
    let mut work: Vec<Vec<f64>> = columns
        .iter()
        .zip(&means)
        .map(|(c, m)| c.iter().map(|v| v - m).collect())
        .collect();
    let base_energy: Vec<f64> = work.iter().map(|c| dot(c, c)).collect();

    let mut active: Vec<usize> = Vec::new();
    let mut inactive: Vec<bool> = vec![true; columns.len()];
    while active.len() < max_support {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..columns.len() {
            if !inactive[j] || base_energy[j] == 0.0 {
                continue;
            }
            let energy = dot(&work[j], &work[j]);
            if energy <= COLLINEAR_TOL * base_energy[j] {
                continue;
            }
            let proj = dot(&work[j], &residual);
            let gain = proj * proj / energy;
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((j, gain));
            }
        }
        let Some((j, gain)) = best else { break };
        if !(gain > lambda) || gain <= GAIN_FLOOR * total_ss {
            break;
        }
        inactive[j] = false;
        active.push(j);

        let norm = dot(&work[j], &work[j]).sqrt();
        let q: Vec<f64> = work[j].iter().map(|v| v / norm).collect();
        let r_proj = dot(&q, &residual);
        axpy(-r_proj, &q, &mut residual);
        for l in 0..columns.len() {
            if inactive[l] && base_energy[l] != 0.0 {
                let p = dot(&q, &work[l]);
                axpy(-p, &q, &mut work[l]);
            }
        }
    }

    if active.is_empty() {
        return Ok(IndexedModel::intercept_only(y_mean));
    }
    active.sort_unstable();

    let centered: Vec<Vec<f64>> = active
        .iter()
        .map(|&j| columns[j].iter().map(|v| v - means[j]).collect())
        .collect();
    let target: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let Some(coef) = least_squares(&centered, &target) else {
        return Ok(IndexedModel::intercept_only(y_mean));
    };
    let mut intercept = y_mean;
    for (&j, &w) in active.iter().zip(&coef) {
        intercept -= w * means[j];
    }
    let terms = active
        .into_iter()
        .zip(coef)
        .filter(|&(_, w)| w != 0.0)
        .collect();
    Ok(IndexedModel { terms, intercept })
}

/// Running sums of `[x, y]` over a set of rows, shifted by fixed column
/// offsets to keep the centered cross products well conditioned. Rows can be
/// added and removed, so a cluster's moments follow its assignment without
/// a rescan.
#[derive(Clone, Debug)]
pub(crate) struct Moments {
    dim: usize,
    count: usize,
    shift: Vec<f64>,
    sum: Vec<f64>,
    /// Upper triangle, row-major, `dim × dim`.
    cross: Vec<f64>,
}

impl Moments {
    /// Empty moments for `columns` and `y`, shifted by `shift` (one offset
    /// per column, then the target's).
    pub fn new(shift: Vec<f64>) -> Self {
        let dim = shift.len();
        Self {
            dim,
            count: 0,
            shift,
            sum: vec![0.0; dim],
            cross: vec![0.0; dim * dim],
        }
    }

    /// Adds (`sign = 1.0`) or removes (`sign = -1.0`) row `row`.
    pub fn update(
        &mut self,
        columns: &[Vec<f64>],
        y: &[f64],
        row: usize,
        sign: f64,
        z: &mut Vec<f64>,
    ) {
        let d = self.dim;
        z.clear();
        z.extend(columns.iter().map(|c| c[row]));
        z.push(y[row]);
        for (v, s) in z.iter_mut().zip(&self.shift) {
            *v -= s;
        }
        for a in 0..d {
            let za = sign * z[a];
            self.sum[a] += za;
            let row = &mut self.cross[a * d..(a + 1) * d];
            for b in a..d {
                row[b] += za * z[b];
            }
        }
        if sign > 0.0 {
            self.count += 1;
        } else {
            self.count -= 1;
        }
    }

    /// Forward selection on the centered cross products, with the same
    /// admission rule as [`sparse_fit`]. Weights come from the normal
    /// equations of the selected columns.
    pub fn fit(&self, lambda: f64, max_support: usize, empty_intercept: f64) -> IndexedModel {
        let d = self.dim;
        let m = d - 1;
        if self.count == 0 {
            return IndexedModel::intercept_only(empty_intercept);
        }
        let n = self.count as f64;
        let mut c = vec![0.0; d * d];
        for a in 0..d {
            for b in a..d {
                let v = self.cross[a * d + b] - self.sum[a] * self.sum[b] / n;
                c[a * d + b] = v;
                c[b * d + a] = v;
            }
        }
        let y_mean = self.shift[m] + self.sum[m] / n;
        let base: Vec<f64> = (0..m).map(|j| c[j * d + j]).collect();
        let total_ss = c[m * d + m].max(0.0);
        let original = c.clone();

        let mut active: Vec<usize> = Vec::new();
        let mut inactive = vec![true; m];
        while active.len() < max_support {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..m {
                if !inactive[j] || base[j] <= 0.0 {
                    continue;
                }
                let energy = c[j * d + j];
                if energy <= COLLINEAR_TOL * base[j] {
                    continue;
                }
                let proj = c[j * d + m];
                let gain = proj * proj / energy;
                if best.is_none_or(|(_, g)| gain > g) {
                    best = Some((j, gain));
                }
            }
            let Some((j, gain)) = best else { break };
            if !(gain > lambda) || gain <= GAIN_FLOOR * total_ss {
                break;
            }
            inactive[j] = false;
            active.push(j);
            // Orthogonalize everything against column j.
            let pivot = c[j * d + j];
            let cj: Vec<f64> = (0..d).map(|a| c[a * d + j]).collect();
            for a in 0..d {
                if cj[a] == 0.0 {
                    continue;
                }
                let f = cj[a] / pivot;
                for b in 0..d {
                    c[a * d + b] -= f * cj[b];
                }
            }
        }
        if active.is_empty() {
            return IndexedModel::intercept_only(y_mean);
        }
        active.sort_unstable();
        let s = active.len();
        let a: Vec<Vec<f64>> = (0..s)
            .map(|r| {
                active
                    .iter()
                    .map(|&j| original[active[r] * d + j])
                    .collect()
            })
            .collect();
        let b: Vec<f64> = active.iter().map(|&j| original[j * d + m]).collect();
        let Some(coef) = solve_spd(a, b) else {
            return IndexedModel::intercept_only(y_mean);
        };
        let mut intercept = y_mean;
        for (&j, &w) in active.iter().zip(&coef) {
            intercept -= w * (self.shift[j] + self.sum[j] / n);
        }
        let terms = active
            .into_iter()
            .zip(coef)
            .filter(|&(_, w)| w != 0.0)
            .collect();
        IndexedModel { terms, intercept }
    }
}

/// Solves a small symmetric positive definite system by Cholesky.
fn solve_spd(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let s = b.len();
    for k in 0..s {
        let mut diag = a[k][k];
        for p in 0..k {
            diag -= a[k][p] * a[k][p];
        }
        if !(diag > 0.0) {
            return None;
        }
        let l = diag.sqrt();
        a[k][k] = l;
        for r in k + 1..s {
            let mut v = a[r][k];
            for p in 0..k {
                v -= a[r][p] * a[k][p];
            }
            a[r][k] = v / l;
        }
    }
    for k in 0..s {
        let mut v = b[k];
        for p in 0..k {
            v -= a[k][p] * b[p];
        }
        b[k] = v / a[k][k];
    }
    for k in (0..s).rev() {
        let mut v = b[k];
        for p in k + 1..s {
            v -= a[p][k] * b[p];
        }
        b[k] = v / a[k][k];
    }
    Some(b)
}

/// Sum of squared residuals of `model` over all rows.
pub fn model_sse(model: &RegressorModel, x: &DesignMatrix, y: &[f64]) -> Result<f64> {
    let mut idx = Vec::with_capacity(model.weights.len());
    for (name, w) in &model.weights {
        let j = x
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::MissingReference(name.clone()))?;
        idx.push((j, *w));
    }
    let m = IndexedModel {
        terms: idx,
        intercept: model.intercept,
    };
    Ok((0..y.len())
        .map(|i| {
            let r = y[i] - m.predict(&x.columns, i);
            r * r
        })
        .sum())
}

/// Least-squares solution of `A·x ≈ b` by Householder QR. `a` is
/// column-major. Returns `None` when `A` is numerically rank deficient.
pub fn least_squares(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let s = a.len();
    if s == 0 {
        return Some(Vec::new());
    }
    if n < s {
        return None;
    }
    let mut q: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = b.to_vec();
    let scale: f64 = a
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let mut diag = vec![0.0; s];
    for k in 0..s {
        let col = &mut q[k];
        let norm = col[k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-12 * scale || norm == 0.0 {
            return None;
        }
        let alpha = if col[k] > 0.0 { -norm } else { norm };
        col[k] -= alpha;
        let vnorm2: f64 = col[k..].iter().map(|v| v * v).sum();
        diag[k] = alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        let v: Vec<f64> = col[k..].to_vec();
        for c in q.iter_mut().skip(k + 1) {
            let f = 2.0 * dot(&v, &c[k..]) / vnorm2;
            for (ci, vi) in c[k..].iter_mut().zip(&v) {
                *ci -= f * vi;
            }
        }
        let f = 2.0 * dot(&v, &rhs[k..]) / vnorm2;
        for (ri, vi) in rhs[k..].iter_mut().zip(&v) {
            *ri -= f * vi;
        }
    }
    // Back substitution on R (upper triangle of q, diagonal in `diag`).
    let mut x = vec![0.0; s];
    for k in (0..s).rev() {
        let mut acc = rhs[k];
        for j in k + 1..s {
            acc -= q[j][k] * x[j];
        }
        x[k] = acc / diag[k];
    }
    Some(x)
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Dot product over four interleaved partial sums.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive best-subset oracle: minimizes SSE + λ·|S| over every support
    /// `S`, each solved by plain normal equations with Gaussian elimination
    /// (an independent route from the QR solver above).
    fn best_subset(x: &DesignMatrix, y: &[f64], lambda: f64) -> (Vec<usize>, f64) {
        let m = x.n_cols();
        let n = y.len();
        let mut best = (Vec::new(), f64::INFINITY);
        for mask in 0u32..(1 << m) {
            let support: Vec<usize> = (0..m).filter(|j| mask & (1 << j) != 0).collect();
            // Normal equations with an explicit intercept column.
            let dim = support.len() + 1;
            let feat = |i: usize, a: usize| {
                if a == 0 {
                    1.0
                } else {
                    x.columns[support[a - 1]][i]
                }
            };
            let mut g = vec![vec![0.0; dim + 1]; dim];
            for (a, row) in g.iter_mut().enumerate() {
                for b in 0..dim {
                    row[b] = (0..n).map(|i| feat(i, a) * feat(i, b)).sum();
                }
                row[dim] = (0..n).map(|i| feat(i, a) * y[i]).sum();
            }
            for col in 0..dim {
                let piv = (col..dim)
                    .max_by(|&a, &b| g[a][col].abs().total_cmp(&g[b][col].abs()))
                    .unwrap();
                g.swap(col, piv);
                for r in 0..dim {
                    if r != col {
                        let f = g[r][col] / g[col][col];
                        for c in col..=dim {
                            g[r][c] -= f * g[col][c];
                        }
                    }
                }
            }
            let coef: Vec<f64> = (0..dim).map(|a| g[a][dim] / g[a][a]).collect();
            let sse: f64 = (0..n)
                .map(|i| {
                    let pred: f64 = (0..dim).map(|a| coef[a] * feat(i, a)).sum();
                    (y[i] - pred).powi(2)
                })
                .sum();
            let obj = sse + lambda * support.len() as f64;
            if obj < best.1 {
                best = (support, obj);
            }
        }
        best
    }

    #[test]
    fn exact_dependence_selects_single_column() {
        let x1 = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let x2 = [0.3, -1.2, 4.4, 0.0, 2.5, -3.1, 1.7, 0.9];
        let y: Vec<f64> = x1.iter().map(|v| 5.0 * v).collect();
        let x = DesignMatrix::new(
            vec!["x1".into(), "x2".into()],
            vec![x1.to_vec(), x2.to_vec()],
        )
        .unwrap();
        let m = sparse_fit(&x, &y, 1e-3, 8).unwrap();
        assert_eq!(m.support_size(), 1);
        assert!((m.weight("x1").unwrap() - 5.0).abs() < 1e-12);
        assert!(m.intercept.abs() < 1e-12);
    }

    #[test]
    fn constant_target_is_intercept_only() {
        let x = DesignMatrix::new(vec!["a".into()], vec![vec![1.0, 5.0, -2.0, 8.0]]).unwrap();
        let m = sparse_fit(&x, &[7.0; 4], 0.1, 8).unwrap();
        assert!(m.weights.is_empty());
        assert_eq!(m.intercept, 7.0);
    }

    #[test]
    fn empty_rows_are_degenerate() {
        let x = DesignMatrix::new(vec!["a".into()], vec![vec![]]).unwrap();
        assert!(matches!(
            sparse_fit(&x, &[], 0.1, 8),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn collinear_columns_not_both_selected() {
        let a = vec![1.0, 2.0, 4.0, 3.0, 7.0];
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        let y: Vec<f64> = a.iter().map(|v| 3.0 * v + 1.0).collect();
        let x = DesignMatrix::new(vec!["a".into(), "b".into()], vec![a, b]).unwrap();
        let m = sparse_fit(&x, &y, 0.0, 8).unwrap();
        assert_eq!(m.support_size(), 1);
        assert!(model_sse(&m, &x, &y).unwrap() < 1e-20);
    }

    #[test]
    fn max_support_caps_selection() {
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|j| {
                (0..12)
                    .map(|i| ((i * 7 + j * 3) % 11) as f64 + j as f64 * 0.1)
                    .collect()
            })
            .collect();
        let y: Vec<f64> = (0..12).map(|i| cols.iter().map(|c| c[i]).sum()).collect();
        let x = DesignMatrix::new((0..4).map(|j| format!("c{j}")).collect(), cols).unwrap();
        assert_eq!(sparse_fit(&x, &y, 0.0, 2).unwrap().support_size(), 2);
        assert_eq!(sparse_fit(&x, &y, 0.0, 8).unwrap().support_size(), 4);
    }

    #[test]
    fn matches_best_subset_on_pinned_instance() {
        // y ≈ 2·a − b with a small perturbation; c is noise.
        let rows = vec![
            vec![1.0, 4.0, 0.7],
            vec![2.0, 1.0, -1.1],
            vec![3.0, 5.0, 2.3],
            vec![4.0, 2.0, 0.4],
            vec![5.0, 7.0, -0.6],
            vec![6.0, 3.0, 1.9],
        ];
        let y = vec![-2.1, 3.2, 0.9, 6.1, 2.8, 9.2];
        let x = DesignMatrix::from_rows(&["a", "b", "c"], &rows).unwrap();
        let lambda = 0.5;
        let (oracle_support, oracle_obj) = best_subset(&x, &y, lambda);
        let m = sparse_fit(&x, &y, lambda, 8).unwrap();
        let obj = model_sse(&m, &x, &y).unwrap() + lambda * m.support_size() as f64;
        let support: Vec<usize> = m
            .weights
            .iter()
            .map(|(n, _)| x.names.iter().position(|x| x == n).unwrap())
            .collect();
        assert_eq!(support, oracle_support);
        assert!(obj <= oracle_obj + 1e-9, "{obj} vs oracle {oracle_obj}");
        assert!((obj - oracle_obj).abs() < 1e-9);
    }

    #[test]
    fn moments_fit_matches_direct_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 300;
        let cols: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..n).map(|_| rng.random_range(-1000.0..1000.0)).collect())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 3.0 * cols[1][i] - 0.5 * cols[4][i] + 7.0 + rng.random_range(-0.01..0.01))
            .collect();
        let shift: Vec<f64> = cols.iter().map(|c| mean(c)).chain([mean(&y)]).collect();
        let mut m = Moments::new(shift);
        let mut z = Vec::new();
        for i in 0..n {
            m.update(&cols, &y, i, 1.0, &mut z);
        }
        // Removing rows leaves the moments of the rest.
        for i in 200..n {
            m.update(&cols, &y, i, -1.0, &mut z);
        }
        let sub: Vec<Vec<f64>> = cols.iter().map(|c| c[..200].to_vec()).collect();
        let direct = fit_indexed(&sub, &y[..200], 1e-3, 8).unwrap();
        let from_moments = m.fit(1e-3, 8, 0.0);
        let js = |t: &IndexedModel| t.terms.iter().map(|p| p.0).collect::<Vec<_>>();
        assert_eq!(js(&direct), vec![1, 4]);
        assert_eq!(js(&from_moments), js(&direct));
        for (a, b) in direct.terms.iter().zip(&from_moments.terms) {
            assert!((a.1 - b.1).abs() < 1e-9);
        }
        assert!((direct.intercept - from_moments.intercept).abs() < 1e-6);
    }

    #[test]
    fn least_squares_solves_square_system() {
        // [[2, 1], [1, 3]] x = [3, 5] → x = [0.8, 1.4]
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = least_squares(&a, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!(least_squares(&[vec![1.0, 2.0], vec![2.0, 4.0]], &[1.0, 2.0]).is_none());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn larger_lambda_never_grows_support(
                seed_rows in proptest::collection::vec(
                    proptest::collection::vec(-50i32..50, 5), 8..30),
                noise in proptest::collection::vec(-1.0f64..1.0, 30),
                l1 in 0.0f64..50.0, dl in 0.0f64..500.0,
            ) {
                let rows: Vec<Vec<f64>> = seed_rows
                    .iter()
                    .map(|r| r.iter().map(|&v| v as f64).collect())
                    .collect();
                let y: Vec<f64> = rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| 3.0 * r[0] - r[2] + noise[i] * 4.0)
                    .collect();
                let x = DesignMatrix::from_rows(&["a", "b", "c", "d", "e"], &rows).unwrap();
                let small = sparse_fit(&x, &y, l1, 8).unwrap();
                let large = sparse_fit(&x, &y, l1 + dl, 8).unwrap();
                prop_assert!(large.support_size() <= small.support_size());
            }

            #[test]
            fn noiseless_support_is_recovered(
                s in 1usize..4,
                seed_rows in proptest::collection::vec(
                    proptest::collection::vec(-1000i32..1000, 6), 40..60),
                lambda in prop_oneof![Just(1e-3), Just(1.0), Just(100.0)],
            ) {
                let rows: Vec<Vec<f64>> = seed_rows
                    .iter()
                    .map(|r| r.iter().map(|&v| v as f64 / 100.0).collect())
                    .collect();
                let y: Vec<f64> = rows.iter().map(|r| r[..s].iter().sum::<f64>() + 2.5).collect();
                let x = DesignMatrix::from_rows(&["a", "b", "c", "d", "e", "f"], &rows).unwrap();
                let m = sparse_fit(&x, &y, lambda, 8).unwrap();
                let names: Vec<&str> = m.weights.iter().map(|(n, _)| n.as_str()).collect();
                prop_assert_eq!(names, ["a", "b", "c"][..s].to_vec());
                for (_, w) in &m.weights {
                    prop_assert!((w - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
