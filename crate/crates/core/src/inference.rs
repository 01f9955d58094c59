//! Cross-sectional OLS and autoregressive regression, with residual
//! diagnostics for the usual exogeneity/homoskedasticity/normality/
//! serial-independence assumptions.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dataset::PanelDataset;
use crate::error::{Error, Result};
use crate::linalg::{invert_upper, solve_upper, Qr};

/// Relative threshold on the diagonal of `R` below which a column counts as
/// collinear with the ones before it.
pub const RANK_TOLERANCE: f64 = 1e-10;

pub const INTERCEPT: &str = "const";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regressor {
    pub name: String,
    pub lag: u8,
}

impl Regressor {
    pub fn label(&self) -> String {
        match self.lag {
            0 => self.name.clone(),
            l => format!("{}[t-{l}]", self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionSpec {
    pub target: String,
    pub regressors: Vec<Regressor>,
    #[serde(default = "default_true")]
    pub intercept: bool,
}

fn default_true() -> bool {
    true
}

impl RegressionSpec {
    /// `terms` are `(column, lag)` pairs; an intercept is included.
    pub fn new(target: &str, terms: &[(&str, u8)]) -> Self {
        RegressionSpec {
            target: target.to_string(),
            regressors: terms.iter().map(|&(n, lag)| Regressor { name: n.to_string(), lag }).collect(),
            intercept: true,
        }
    }

    pub fn without_intercept(mut self) -> Self {
        self.intercept = false;
        self
    }

    fn has_lags(&self) -> bool {
        self.regressors.iter().any(|r| r.lag > 0)
    }

    fn validate(&self) -> Result<()> {
        if self.regressors.is_empty() && !self.intercept {
            return Err(Error::InvalidSpec("regression has no terms".into()));
        }
        if self.regressors.iter().any(|r| r.lag == 0 && r.name == self.target) {
            return Err(Error::InvalidSpec(format!("`{}` cannot explain itself contemporaneously", self.target)));
        }
        if self.regressors.iter().any(|r| r.lag > 1) {
            return Err(Error::InvalidSpec("only lags 0 and 1 are supported".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    /// Treat row order as time order even when the dataset says it is not.
    pub force_order: bool,
    /// Skip lag pairs that straddle a segment boundary.
    pub drop_segment_pairs: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { force_order: false, drop_segment_pairs: true }
    }
}

impl FitOptions {
    pub fn forced() -> Self {
        FitOptions { force_order: true, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub target: String,
    /// Term labels, e.g. `x1`, `y[t-1]`, `const`.
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub residual_variance: f64,
    pub n_used: usize,
    pub order_forced: bool,
    #[serde(default)]
    pub diagnostics: BTreeMap<String, f64>,
}

impl EstimateReport {
    pub fn coefficient(&self, term: &str) -> Option<f64> {
        self.terms.iter().position(|t| t == term).map(|i| self.coefficients[i])
    }

    pub fn standard_error(&self, term: &str) -> Option<f64> {
        self.terms.iter().position(|t| t == term).map(|i| self.standard_errors[i])
    }
}

struct Design {
    x: Array2<f64>,
    y: Array1<f64>,
    terms: Vec<String>,
    /// Dataset row of each design row.
    rows: Vec<usize>,
    forced: bool,
}

fn build_design(data: &PanelDataset, spec: &RegressionSpec, opts: FitOptions) -> Result<Design> {
    spec.validate()?;
    let target = data.column_index(&spec.target)?;
    let cols = spec
        .regressors
        .iter()
        .map(|r| data.column_index(&r.name))
        .collect::<Result<Vec<_>>>()?;
    let lagged = spec.has_lags();
    let mut forced = false;
    if lagged && !data.is_time_indexed() {
        if !opts.force_order {
            return Err(Error::NotTimeIndexed);
        }
        log::info!("treating row order of non-time-indexed data as time order for `{}`", spec.target);
        forced = true;
    }
    let start = usize::from(lagged);
    let rows: Vec<usize> = (start..data.nrows())
        .filter(|&t| !lagged || !opts.drop_segment_pairs || data.is_lag_pair(t))
        .collect();
    let p = spec.regressors.len() + usize::from(spec.intercept);
    if rows.len() <= p {
        return Err(Error::InvalidDataset(format!("{} usable rows for {p} coefficients", rows.len())));
    }
    let m = data.rows();
    let mut x = Array2::zeros((rows.len(), p));
    let mut y = Array1::zeros(rows.len());
    for (i, &t) in rows.iter().enumerate() {
        y[i] = m[[t, target]];
        for (j, (r, &c)) in spec.regressors.iter().zip(&cols).enumerate() {
            x[[i, j]] = m[[t - r.lag as usize, c]];
        }
        if spec.intercept {
            x[[i, p - 1]] = 1.0;
        }
    }
    let mut terms: Vec<String> = spec.regressors.iter().map(Regressor::label).collect();
    if spec.intercept {
        terms.push(INTERCEPT.to_string());
    }
    Ok(Design { x, y, terms, rows, forced })
}

/// Least squares via Householder QR with conventional standard errors.
pub fn ols_fit(data: &PanelDataset, spec: &RegressionSpec) -> Result<EstimateReport> {
    fit_with(data, spec, FitOptions::default())
}

pub fn fit_with(data: &PanelDataset, spec: &RegressionSpec, opts: FitOptions) -> Result<EstimateReport> {
    let d = build_design(data, spec, opts)?;
    let (n, p) = d.x.dim();
    let qr = Qr::new(d.x.view());
    if let Some(col) = qr.deficient_column(RANK_TOLERANCE) {
        return Err(Error::Collinear(d.terms[col].clone()));
    }
    let beta = solve_upper(&qr.r, &qr.qt_mul(d.y.view()));
    let resid = &d.y - &d.x.dot(&beta);
    let rss = resid.dot(&resid);
    let sigma2 = rss / (n - p) as f64;
    let r_inv = invert_upper(&qr.r);
    let se: Vec<f64> = (0..p).map(|j| (sigma2 * r_inv.row(j).dot(&r_inv.row(j))).sqrt()).collect();
    let y_mean = d.y.mean().unwrap_or(0.0);
    let tss = d.y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>();
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("r_squared".to_string(), if tss > 0.0 { 1.0 - rss / tss } else { 1.0 });
    Ok(EstimateReport {
        target: spec.target.clone(),
        terms: d.terms,
        coefficients: beta.to_vec(),
        standard_errors: se,
        residual_variance: sigma2,
        n_used: n,
        order_forced: d.forced,
        diagnostics,
    })
}

/// Autoregressive fit: `spec` must contain the target's own first lag.
pub fn ar_fit(data: &PanelDataset, spec: &RegressionSpec, opts: FitOptions) -> Result<EstimateReport> {
    if !spec.regressors.iter().any(|r| r.name == spec.target && r.lag == 1) {
        return Err(Error::InvalidSpec(format!("AR spec for `{}` lacks its own lag-1 term", spec.target)));
    }
    fit_with(data, spec, opts)
}

/// Residual diagnostics for a fitted report.
///
/// * `residual_mean`
/// * `heteroskedasticity_stat`: largest ratio of residual variances across
///   quartile bins of any regressor (1 = homoskedastic)
/// * `normality_stat`: Jarque-Bera statistic
/// * `residual_lag1_autocorr`: over consecutive usable rows
pub fn check_assumptions(
    data: &PanelDataset,
    spec: &RegressionSpec,
    report: &EstimateReport,
    opts: FitOptions,
) -> Result<BTreeMap<String, f64>> {
    let d = build_design(data, spec, opts)?;
    if d.terms != report.terms {
        return Err(Error::InvalidSpec("report does not belong to this regression".into()));
    }
    let beta = Array1::from_vec(report.coefficients.clone());
    let resid = &d.y - &d.x.dot(&beta);
    let n = resid.len() as f64;
    let mean = resid.sum() / n;

    let mut hetero: f64 = 1.0;
    for (j, r) in spec.regressors.iter().enumerate() {
        let _ = r;
        let mut idx: Vec<usize> = (0..resid.len()).collect();
        idx.sort_by(|&a, &b| d.x[[a, j]].total_cmp(&d.x[[b, j]]));
        let bins = 4;
        let vars: Vec<f64> = (0..bins)
            .map(|b| {
                let chunk = &idx[b * idx.len() / bins..(b + 1) * idx.len() / bins];
                let vals: Vec<f64> = chunk.iter().map(|&i| resid[i]).collect();
                crate::linalg::mean_sd(&vals).1.powi(2)
            })
            .collect();
        let max = vars.iter().cloned().fold(f64::MIN, f64::max);
        let min = vars.iter().cloned().fold(f64::MAX, f64::min);
        if min > 0.0 {
            hetero = hetero.max(max / min);
        }
    }

    let m2 = resid.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    let m3 = resid.iter().map(|e| (e - mean).powi(3)).sum::<f64>() / n;
    let m4 = resid.iter().map(|e| (e - mean).powi(4)).sum::<f64>() / n;
    let (skew, kurt) = if m2 > 0.0 { (m3 / m2.powf(1.5), m4 / (m2 * m2)) } else { (0.0, 3.0) };
    let jarque_bera = n / 6.0 * (skew * skew + (kurt - 3.0).powi(2) / 4.0);

    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..resid.len() {
        den += (resid[i] - mean).powi(2);
        if i > 0 && d.rows[i] == d.rows[i - 1] + 1 && data.is_lag_pair(d.rows[i]) {
            num += (resid[i] - mean) * (resid[i - 1] - mean);
        }
    }
    let autocorr = if den > 0.0 { num / den } else { 0.0 };

    Ok(BTreeMap::from([
        ("residual_mean".to_string(), mean),
        ("heteroskedasticity_stat".to_string(), hetero),
        ("normality_stat".to_string(), jarque_bera),
        ("residual_lag1_autocorr".to_string(), autocorr),
    ]))
}
