use ndarray::{s, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::ica::{fastica, IcaConfig};
use crate::dataset::PanelDataset;
use crate::error::{Error, Result};
use crate::graph::{Edge, WeightedDag};
use crate::linalg::{solve_upper, Qr};

/// Effects weaker than this are treated as absent.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 0.1;

/// Exhaustive permutation search is used up to this many variables.
const EXHAUSTIVE_LIMIT: usize = 8;

/// Orders scoring within this distance of the best are reported as ties.
const ORDER_TIE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LingamConfig {
    pub prune_threshold: f64,
    pub seed: u64,
    pub ica: IcaConfig,
}

impl Default for LingamConfig {
    fn default() -> Self {
        LingamConfig { prune_threshold: DEFAULT_PRUNE_THRESHOLD, seed: 0, ica: IcaConfig::default() }
    }
}

#[derive(Debug, Clone)]
pub struct LingamResult {
    pub nodes: Vec<String>,
    /// `b[to][from]`: least-squares effects of pruned parents, zero elsewhere.
    pub b_matrix: Array2<f64>,
    /// Connection strengths read directly off the ICA unmixing matrix.
    pub ica_b_matrix: Array2<f64>,
    /// Variable indices, causes first.
    pub causal_order: Vec<usize>,
    /// Other orders that scored within tolerance of the chosen one.
    pub tied_orders: Vec<Vec<usize>>,
    pub pruned_graph: WeightedDag,
    /// `x - B x` per row, so that `x = B x + e` holds exactly.
    pub residuals: Array2<f64>,
    pub identifiable: bool,
}

impl LingamResult {
    pub fn causal_order_names(&self) -> Vec<&str> {
        self.causal_order.iter().map(|&i| self.nodes[i].as_str()).collect()
    }
}

/// ICA-LiNGAM on the columns of `data` (row order is ignored).
pub fn lingam_fit(data: &PanelDataset, cfg: LingamConfig) -> Result<LingamResult> {
    fit_matrix(data.columns(), data.rows(), cfg)
}

fn fit_matrix(nodes: &[String], x: &Array2<f64>, cfg: LingamConfig) -> Result<LingamResult> {
    let k = x.ncols();
    let (ica_b, order, tied, identifiable) = if k == 1 {
        (Array2::zeros((1, 1)), vec![0], Vec::new(), true)
    } else {
        let ica = fastica(x.view(), cfg.seed, cfg.ica)?;
        if !ica.identifiable {
            log::warn!("noise looks Gaussian; the LiNGAM graph is not identified");
        }
        let w = ica.unmixing;
        let rows = assign_rows(&w);
        let mut w_perm = w.select(Axis(0), &rows);
        for i in 0..k {
            let d = w_perm[[i, i]];
            w_perm.row_mut(i).mapv_inplace(|v| v / d);
        }
        let b = Array2::<f64>::eye(k) - &w_perm;
        let (order, tied) = causal_order(&b);
        if !tied.is_empty() {
            log::warn!("{} causal orders tie with the chosen one", tied.len());
        }
        (b, order, tied, ica.identifiable)
    };

    let full = regress_on_predecessors(x, &order, |_, _| true)?;
    let keep = |to: usize, from: usize| full[[to, from]].abs() >= cfg.prune_threshold;
    let b_matrix = regress_on_predecessors(x, &order, keep)?;
    // refit can push a surviving weight under the threshold; drop those too
    let b_matrix = b_matrix.mapv(|v| if v.abs() < cfg.prune_threshold { 0.0 } else { v });
    let pruned_graph = WeightedDag::from_matrix(nodes, &b_matrix, cfg.prune_threshold)?;
    let residuals = x - &x.dot(&b_matrix.t());
    Ok(LingamResult {
        nodes: nodes.to_vec(),
        b_matrix,
        ica_b_matrix: ica_b,
        causal_order: order,
        tied_orders: tied,
        pruned_graph,
        residuals,
        identifiable,
    })
}

/// Row permutation of `w` minimizing `sum_i 1 / |w[perm[i], i]|`.
fn assign_rows(w: &Array2<f64>) -> Vec<usize> {
    let k = w.nrows();
    let cost = |perm: &[usize]| perm.iter().enumerate().map(|(i, &r)| 1.0 / w[[r, i]].abs()).sum::<f64>();
    if k <= EXHAUSTIVE_LIMIT {
        let mut best = (f64::INFINITY, Vec::new());
        for perm in permutations(k) {
            let c = cost(&perm);
            if c < best.0 {
                best = (c, perm);
            }
        }
        if best.1.is_empty() {
            (0..k).collect()
        } else {
            best.1
        }
    } else {
        let mut used = vec![false; k];
        let mut perm = vec![0; k];
        for i in 0..k {
            let r = (0..k)
                .filter(|&r| !used[r])
                .max_by(|&a, &b| w[[a, i]].abs().total_cmp(&w[[b, i]].abs()))
                .expect("rows remain");
            used[r] = true;
            perm[i] = r;
        }
        perm
    }
}

/// Order (causes first) whose permuted `b` is closest to strictly lower
/// triangular in squared mass above the diagonal.
fn causal_order(b: &Array2<f64>) -> (Vec<usize>, Vec<Vec<usize>>) {
    let k = b.nrows();
    let score = |order: &[usize]| {
        let mut s = 0.0;
        for a in 0..k {
            for c in a + 1..k {
                s += b[[order[a], order[c]]].powi(2);
            }
        }
        s
    };
    if k > EXHAUSTIVE_LIMIT {
        return (greedy_order(b), Vec::new());
    }
    let scored: Vec<(f64, Vec<usize>)> = permutations(k).into_iter().map(|p| (score(&p), p)).collect();
    let best = scored.iter().map(|(s, _)| *s).fold(f64::INFINITY, f64::min);
    // permutations are generated in lexicographic order, so the first tie wins
    let mut ties = scored.into_iter().filter(|(s, _)| *s - best <= ORDER_TIE).map(|(_, p)| p);
    let chosen = ties.next().expect("at least one order");
    (chosen, ties.collect())
}

/// Repeatedly picks the variable whose row of remaining causes is smallest.
fn greedy_order(b: &Array2<f64>) -> Vec<usize> {
    let k = b.nrows();
    let mut remaining: Vec<usize> = (0..k).collect();
    let mut order = Vec::with_capacity(k);
    while !remaining.is_empty() {
        let (pos, _) = remaining
            .iter()
            .enumerate()
            .map(|(pos, &v)| (pos, remaining.iter().map(|&c| b[[v, c]].powi(2)).sum::<f64>()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        order.push(remaining.remove(pos));
    }
    order
}

/// Least-squares effect of each earlier variable on each later one,
/// restricted to pairs accepted by `allow(to, from)`. An intercept is fitted
/// but not reported.
fn regress_on_predecessors(
    x: &Array2<f64>,
    order: &[usize],
    allow: impl Fn(usize, usize) -> bool,
) -> Result<Array2<f64>> {
    let (n, k) = x.dim();
    let mut b = Array2::zeros((k, k));
    for (pos, &to) in order.iter().enumerate() {
        let parents: Vec<usize> = order[..pos].iter().copied().filter(|&f| allow(to, f)).collect();
        if parents.is_empty() {
            continue;
        }
        let mut design = Array2::ones((n, parents.len() + 1));
        for (j, &p) in parents.iter().enumerate() {
            design.column_mut(j).assign(&x.column(p));
        }
        let qr = Qr::new(design.view());
        if let Some(col) = qr.deficient_column(1e-10) {
            let name = parents.get(col).map(|p| p.to_string()).unwrap_or_else(|| "const".into());
            return Err(Error::Collinear(name));
        }
        let coef = solve_upper(&qr.r, &qr.qt_mul(x.column(to)));
        for (j, &p) in parents.iter().enumerate() {
            b[[to, p]] = coef[j];
        }
    }
    Ok(b)
}

/// All permutations of `0..k` in lexicographic order.
fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (0..k.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            break;
        };
        let j = (i + 1..k).rev().find(|&j| cur[j] > cur[i]).expect("exists");
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    out
}

#[derive(Debug, Clone)]
pub struct VarLingamResult {
    pub contemporaneous: LingamResult,
    /// Reduced-form autoregression `x_t = M x_{t-1} + c + n_t`.
    pub var_coefficients: Array2<f64>,
    /// Structural lag effects `(I - B0) M`, pruned; `[to][from]`.
    pub lag_matrix: Array2<f64>,
    /// Edges from `from[t-1]` to `to[t]`.
    pub lagged_edges: Vec<Edge>,
}

/// Two-stage VAR(1)-LiNGAM: autoregression first, then LiNGAM on the
/// innovations.
pub fn var_lingam_fit(data: &PanelDataset, cfg: LingamConfig) -> Result<VarLingamResult> {
    if !data.is_time_indexed() {
        return Err(Error::NotTimeIndexed);
    }
    let x = data.rows();
    let k = data.ncols();
    let rows: Vec<usize> = (1..data.nrows()).filter(|&t| data.is_lag_pair(t)).collect();
    let n = rows.len();
    if n <= k + 1 {
        return Err(Error::InvalidDataset(format!("{n} lag pairs is too few for a VAR in {k} variables")));
    }
    let mut design = Array2::ones((n, k + 1));
    let mut target = Array2::zeros((n, k));
    for (i, &t) in rows.iter().enumerate() {
        design.slice_mut(s![i, ..k]).assign(&x.row(t - 1));
        target.row_mut(i).assign(&x.row(t));
    }
    let qr = Qr::new(design.view());
    if let Some(col) = qr.deficient_column(1e-10) {
        let name = data.columns().get(col).cloned().unwrap_or_else(|| "const".into());
        return Err(Error::Collinear(name));
    }
    let mut m = Array2::zeros((k, k));
    let mut innovations = Array2::zeros((n, k));
    for i in 0..k {
        let coef = solve_upper(&qr.r, &qr.qt_mul(target.column(i)));
        m.row_mut(i).assign(&coef.slice(s![..k]));
        let fitted: Array1<f64> = design.dot(&coef);
        innovations.column_mut(i).assign(&(&target.column(i) - &fitted));
    }
    let contemporaneous = fit_matrix(data.columns(), &innovations, cfg)?;
    let b1 = (Array2::<f64>::eye(k) - &contemporaneous.b_matrix).dot(&m);
    let lag_matrix = b1.mapv(|v| if v.abs() < cfg.prune_threshold { 0.0 } else { v });
    let mut lagged_edges = Vec::new();
    for to in 0..k {
        for from in 0..k {
            let w = lag_matrix[[to, from]];
            if w != 0.0 {
                lagged_edges.push(Edge { from: data.columns()[from].clone(), to: data.columns()[to].clone(), weight: w });
            }
        }
    }
    Ok(VarLingamResult { contemporaneous, var_coefficients: m, lag_matrix, lagged_edges })
}
