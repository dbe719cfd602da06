//! Exploratory factor analysis: principal-axis extraction with SMC starting
//! communalities, Kaiser-normalized varimax, KMO and Bartlett's sphericity
//! test, and regression-method factor scores.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::analysis::matrix::{correlation_of_columns, to_matrix, LabeledMatrix};
use crate::error::{Error, Result};

pub const WEAK_LOADING: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaOptions {
    /// Fixed factor count; `None` keeps eigenvalues > 1.
    pub n_factors: Option<usize>,
    pub paf_max_iter: usize,
    pub paf_tol: f64,
    pub varimax_tol: f64,
    pub varimax_max_sweeps: usize,
}

impl Default for FaOptions {
    fn default() -> Self {
        Self {
            n_factors: None,
            paf_max_iter: 1000,
            paf_tol: 1e-6,
            varimax_tol: 1e-6,
            varimax_max_sweeps: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSolution {
    /// Variables x factors, rotated.
    pub loadings: LabeledMatrix,
    /// Eigenvalues of the correlation matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// Share of total variance per rotated factor.
    pub variance_explained: Vec<f64>,
    pub communalities: Vec<f64>,
    pub k: usize,
    pub kmo: f64,
    pub kmo_per_variable: Vec<f64>,
    pub bartlett_stat: f64,
    pub bartlett_df: f64,
    pub bartlett_p: f64,
    /// Orthogonal k x k varimax rotation applied to the unrotated loadings.
    pub rotation: Vec<Vec<f64>>,
    pub varimax_sweeps: usize,
    /// `true` where |loading| < 0.3 (display hint only).
    pub weak: Vec<Vec<bool>>,
    /// Variables dropped because they were constant.
    pub dropped: Vec<String>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// Regression-method score weights R^-1 L (variables x factors).
    pub score_weights: Vec<Vec<f64>>,
}

fn invert_spd(r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    r.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Singular("correlation matrix is not positive definite".into()))
}

fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let e = SymmetricEigen::new(m.clone());
    let mut idx: Vec<usize> = (0..e.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[b].partial_cmp(&e.eigenvalues[a]).unwrap());
    let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m.nrows(), idx.len(), |r, c| e.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

/// Kaiser-Meyer-Olkin adequacy: overall and per variable.
pub fn kmo(r: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
    let inv = invert_spd(r)?;
    let p = r.nrows();
    let partial = |i: usize, j: usize| -inv[(i, j)] / (inv[(i, i)] * inv[(j, j)]).sqrt();
    let (mut r2, mut a2) = (0.0, 0.0);
    let mut per = Vec::with_capacity(p);
    for i in 0..p {
        let (mut ri, mut ai) = (0.0, 0.0);
        for j in 0..p {
            if i != j {
                ri += r[(i, j)].powi(2);
                ai += partial(i, j).powi(2);
            }
        }
        per.push(ri / (ri + ai));
        r2 += ri;
        a2 += ai;
    }
    Ok((r2 / (r2 + a2), per))
}

/// Bartlett's test of sphericity for `n` observations: (statistic, df, p).
pub fn bartlett(r: &DMatrix<f64>, n: usize) -> Result<(f64, f64, f64)> {
    let p = r.nrows() as f64;
    let chol = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("correlation matrix is not positive definite".into()))?;
    let ln_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let stat = (-(n as f64 - 1.0 - (2.0 * p + 5.0) / 6.0) * ln_det).max(0.0);
    let df = p * (p - 1.0) / 2.0;
    let pval = 1.0 - ChiSquared::new(df).map_err(|e| Error::Invalid(e.to_string()))?.cdf(stat);
    Ok((stat, df, pval))
}

/// Principal-axis factoring of correlation matrix `r` with `k` factors.
pub fn principal_axis(r: &DMatrix<f64>, k: usize, max_iter: usize, tol: f64) -> Result<DMatrix<f64>> {
    let p = r.nrows();
    let inv = invert_spd(r)?;
    let mut h: Vec<f64> = (0..p).map(|i| (1.0 - 1.0 / inv[(i, i)]).clamp(0.0, 1.0)).collect();
    let mut loadings = DMatrix::zeros(p, k);
    for _ in 0..max_iter {
        let mut rh = r.clone();
        for (i, &hi) in h.iter().enumerate() {
            rh[(i, i)] = hi;
        }
        let (vals, vecs) = sorted_eigen(&rh);
        loadings = DMatrix::from_fn(p, k, |i, j| vecs[(i, j)] * vals[j].max(0.0).sqrt());
        let next: Vec<f64> = (0..p)
            .map(|i| loadings.row(i).iter().map(|v| v * v).sum::<f64>().min(1.0))
            .collect();
        let change = next.iter().zip(&h).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        h = next;
        if change < tol {
            break;
        }
    }
    Ok(loadings)
}

/// Varimax rotation. With `normalize`, rows are scaled to unit length first
/// (Kaiser normalization) and scaled back afterwards. Stops when the
/// criterion improves by a relative amount below `tol`. Returns the rotated
/// loadings, the rotation matrix and the number of sweeps.
pub fn varimax(
    l: &DMatrix<f64>,
    normalize: bool,
    tol: f64,
    max_sweeps: usize,
) -> (DMatrix<f64>, DMatrix<f64>, usize) {
    let (p, k) = l.shape();
    if k < 2 {
        return (l.clone(), DMatrix::identity(k, k), 0);
    }
    let h: Vec<f64> = (0..p)
        .map(|i| l.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let x = if normalize {
        DMatrix::from_fn(p, k, |i, j| if h[i] > 0.0 { l[(i, j)] / h[i] } else { 0.0 })
    } else {
        l.clone()
    };
    let mut t = DMatrix::identity(k, k);
    let mut d = 0.0;
    let mut sweeps = 0;
    for it in 1..=max_sweeps {
        sweeps = it;
        let z = &x * &t;
        let cs: Vec<f64> = (0..k).map(|j| z.column(j).iter().map(|v| v * v).sum()).collect();
        let target = DMatrix::from_fn(p, k, |i, j| z[(i, j)].powi(3) - z[(i, j)] * cs[j] / p as f64);
        let b = x.transpose() * target;
        let svd = b.svd(true, true);
        t = svd.u.expect("u") * svd.v_t.expect("v_t");
        let d_past = d;
        d = svd.singular_values.sum();
        if d < d_past * (1.0 + tol) {
            break;
        }
    }
    let mut z = &x * &t;
    if normalize {
        for i in 0..p {
            for j in 0..k {
                z[(i, j)] *= h[i];
            }
        }
    }
    (z, t, sweeps)
}

/// Full pipeline on observations (rows) x variables (columns).
pub fn factor_analysis(data: &[Vec<f64>], labels: &[String], opts: &FaOptions) -> Result<FactorSolution> {
    let x = to_matrix(data)?;
    let (n, p_all) = x.shape();
    if p_all != labels.len() {
        return Err(Error::LengthMismatch(p_all, labels.len()));
    }
    if n < 3 {
        return Err(Error::TooFew {
            what: "observations",
            needed: 3,
            got: n,
        });
    }
    let corr_all = correlation_of_columns(&x);
    let keep: Vec<usize> = (0..p_all).filter(|&i| corr_all[i][i].is_some()).collect();
    let dropped: Vec<String> = (0..p_all)
        .filter(|i| !keep.contains(i))
        .map(|i| labels[i].clone())
        .collect();
    let p = keep.len();
    if p < 2 {
        return Err(Error::Degenerate("fewer than two non-constant variables".into()));
    }
    let r = DMatrix::from_fn(p, p, |i, j| corr_all[keep[i]][keep[j]].expect("kept"));
    let (eigenvalues, _) = sorted_eigen(&r);
    let (kmo_all, kmo_per) = kmo(&r)?;
    let (bstat, bdf, bp) = bartlett(&r, n)?;
    let k = opts
        .n_factors
        .unwrap_or_else(|| eigenvalues.iter().filter(|&&e| e > 1.0).count())
        .clamp(1, p);

    let unrotated = principal_axis(&r, k, opts.paf_max_iter, opts.paf_tol)?;
    let (mut rotated, mut rot, sweeps) = varimax(&unrotated, true, opts.varimax_tol, opts.varimax_max_sweeps);

    // order factors by explained variance, make each column sum positive
    let ss: Vec<f64> = (0..k).map(|j| rotated.column(j).iter().map(|v| v * v).sum()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| ss[b].partial_cmp(&ss[a]).unwrap());
    let signs: Vec<f64> = order
        .iter()
        .map(|&j| if rotated.column(j).sum() < 0.0 { -1.0 } else { 1.0 })
        .collect();
    rotated = DMatrix::from_fn(p, k, |i, c| rotated[(i, order[c])] * signs[c]);
    rot = DMatrix::from_fn(k, k, |i, c| rot[(i, order[c])] * signs[c]);

    let inv = invert_spd(&r)?;
    let w = &inv * &rotated;
    let means: Vec<f64> = keep.iter().map(|&j| x.column(j).mean()).collect();
    let sds: Vec<f64> = keep
        .iter()
        .zip(&means)
        .map(|(&j, m)| (x.column(j).iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt())
        .collect();
    let kept_labels: Vec<String> = keep.iter().map(|&i| labels[i].clone()).collect();
    let factor_labels: Vec<String> = (1..=k).map(|i| format!("F{i}")).collect();
    Ok(FactorSolution {
        loadings: LabeledMatrix::from_dense(kept_labels, factor_labels, &rotated)?,
        eigenvalues,
        variance_explained: (0..k)
            .map(|j| rotated.column(j).iter().map(|v| v * v).sum::<f64>() / p as f64)
            .collect(),
        communalities: (0..p).map(|i| rotated.row(i).iter().map(|v| v * v).sum()).collect(),
        k,
        kmo: kmo_all,
        kmo_per_variable: kmo_per,
        bartlett_stat: bstat,
        bartlett_df: bdf,
        bartlett_p: bp,
        rotation: (0..k).map(|i| rot.row(i).iter().copied().collect()).collect(),
        varimax_sweeps: sweeps,
        weak: (0..p)
            .map(|i| (0..k).map(|j| rotated[(i, j)].abs() < WEAK_LOADING).collect())
            .collect(),
        dropped,
        means,
        sds,
        score_weights: (0..p).map(|i| w.row(i).iter().copied().collect()).collect(),
    })
}

impl FactorSolution {
    /// Regression-method factor scores of one observation, given values of
    /// all original variables (dropped ones are ignored).
    pub fn scores(&self, row_by_label: &dyn Fn(&str) -> Option<f64>) -> Result<Vec<f64>> {
        let z: Vec<f64> = self
            .loadings
            .rows
            .iter()
            .enumerate()
            .map(|(i, l)| {
                row_by_label(l)
                    .map(|v| (v - self.means[i]) / self.sds[i])
                    .ok_or_else(|| Error::MissingDimensions(vec![l.clone()]))
            })
            .collect::<Result<_>>()?;
        Ok((0..self.k)
            .map(|j| z.iter().zip(&self.score_weights).map(|(a, w)| a * w[j]).sum())
            .collect())
    }

    /// Scores for rows aligned with `labels` (the labels passed to
    /// [`factor_analysis`]).
    pub fn scores_for(&self, labels: &[String], row: &[f64]) -> Result<Vec<f64>> {
        self.scores(&|l: &str| labels.iter().position(|x| x == l).map(|i| row[i]))
    }
}
