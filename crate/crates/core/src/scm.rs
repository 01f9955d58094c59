//! Linear structural causal models with known ground truth.
//!
//! Each variable is a linear function of contemporaneous (lag 0) and
//! previous-step (lag 1) parents plus an independent noise draw. The two
//! benchmark models live here as constructors: [`model_a`] (stationary,
//! only `y` carries a self-lag) and [`model_b`] (adds unit-root random
//! walks on both root variables).

use std::collections::BTreeSet;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::dataset::PanelDataset;
use crate::error::{Error, Result};

/// Distribution of an exogenous noise term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NoiseDist {
    Gaussian { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl NoiseDist {
    pub fn gaussian(mean: f64, sd: f64) -> Self {
        NoiseDist::Gaussian { mean, sd }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        NoiseDist::Uniform { lo, hi }
    }

    pub fn sd(&self) -> f64 {
        match *self {
            NoiseDist::Gaussian { sd, .. } => sd,
            NoiseDist::Uniform { lo, hi } => (hi - lo) / 12f64.sqrt(),
        }
    }

    pub fn variance(&self) -> f64 {
        self.sd() * self.sd()
    }

    fn validate(&self) -> Result<()> {
        match *self {
            NoiseDist::Gaussian { mean, sd } if mean.is_finite() && sd.is_finite() && sd >= 0.0 => Ok(()),
            NoiseDist::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && lo < hi => Ok(()),
            other => Err(Error::InvalidSpec(format!("bad noise distribution {other:?}"))),
        }
    }

    fn sampler(&self) -> Sampler {
        match *self {
            NoiseDist::Gaussian { mean, sd } => Sampler::Normal(Normal::new(mean, sd).expect("validated")),
            NoiseDist::Uniform { lo, hi } => Sampler::Uniform(Uniform::new(lo, hi).expect("validated")),
        }
    }
}

enum Sampler {
    Normal(Normal<f64>),
    Uniform(Uniform<f64>),
}

impl Sampler {
    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Normal(d) => d.sample(rng),
            Sampler::Uniform(d) => d.sample(rng),
        }
    }
}

/// One additive term `coef * parent[t - lag]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub parent: String,
    pub lag: u8,
    pub coef: f64,
}

impl Term {
    pub fn new(parent: &str, lag: u8, coef: f64) -> Self {
        Term { parent: parent.to_string(), lag, coef }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScmSpec {
    variables: Vec<String>,
    /// `equations[i]` lists the terms of `variables[i]`.
    equations: Vec<Vec<Term>>,
    noise: Vec<NoiseDist>,
    burn_in: usize,
    stationary: bool,
}

impl ScmSpec {
    pub fn new(
        variables: Vec<String>,
        equations: Vec<Vec<Term>>,
        noise: Vec<NoiseDist>,
        burn_in: usize,
        stationary: bool,
    ) -> Result<Self> {
        let spec = ScmSpec { variables, equations, noise, burn_in, stationary };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let k = self.variables.len();
        if k == 0 {
            return Err(Error::InvalidSpec("no variables".into()));
        }
        if self.equations.len() != k || self.noise.len() != k {
            return Err(Error::InvalidSpec("one equation and one noise law per variable required".into()));
        }
        let names: BTreeSet<&str> = self.variables.iter().map(String::as_str).collect();
        if names.len() != k {
            return Err(Error::InvalidSpec("duplicate variable name".into()));
        }
        for (v, terms) in self.variables.iter().zip(&self.equations) {
            for t in terms {
                if !names.contains(t.parent.as_str()) {
                    return Err(Error::InvalidSpec(format!("`{v}` references undeclared parent `{}`", t.parent)));
                }
                if t.lag > 1 {
                    return Err(Error::InvalidSpec(format!("lag {} on `{}` (only 0 or 1 supported)", t.lag, t.parent)));
                }
                if !t.coef.is_finite() {
                    return Err(Error::InvalidSpec(format!("non-finite coefficient in `{v}`")));
                }
                if self.stationary && t.lag == 1 && &t.parent == v && t.coef.abs() >= 1.0 {
                    return Err(Error::InvalidSpec(format!(
                        "self-lag coefficient {} on `{v}` breaks stationarity",
                        t.coef
                    )));
                }
            }
        }
        for n in &self.noise {
            n.validate()?;
        }
        self.topological_order()?;
        Ok(())
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn equation(&self, var: &str) -> Option<&[Term]> {
        self.index_of(var).map(|i| self.equations[i].as_slice())
    }

    pub fn noise(&self) -> &[NoiseDist] {
        &self.noise
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn is_stationary(&self) -> bool {
        self.stationary
    }

    pub fn index_of(&self, var: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == var)
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    /// Replaces the noise law of one variable.
    pub fn with_noise_for(mut self, var: &str, dist: NoiseDist) -> Result<Self> {
        dist.validate()?;
        let i = self.index_of(var).ok_or_else(|| Error::UnknownColumn(var.to_string()))?;
        self.noise[i] = dist;
        Ok(self)
    }

    /// Lag-0 edges as `(parent, child)` index pairs.
    pub fn contemporaneous_edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for (child, terms) in self.equations.iter().enumerate() {
            for t in terms.iter().filter(|t| t.lag == 0) {
                let parent = self.index_of(&t.parent).expect("validated");
                edges.push((parent, child));
            }
        }
        edges
    }

    /// Kahn's algorithm over lag-0 edges; ties resolve in declaration order.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let k = self.variables.len();
        let edges = self.contemporaneous_edges();
        let mut indegree = vec![0usize; k];
        for &(_, c) in &edges {
            indegree[c] += 1;
        }
        let mut order = Vec::with_capacity(k);
        let mut done = vec![false; k];
        while order.len() < k {
            let next = (0..k).find(|&i| !done[i] && indegree[i] == 0);
            let Some(i) = next else {
                let stuck = (0..k).filter(|&i| !done[i]).map(|i| self.variables[i].clone()).collect();
                return Err(Error::Cycle(stuck));
            };
            done[i] = true;
            order.push(i);
            for &(p, c) in &edges {
                if p == i {
                    indegree[c] -= 1;
                }
            }
        }
        Ok(order)
    }
}

/// Coefficients for the benchmark equations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub alpha: f64,
    pub betas: [f64; 5],
    /// Noise laws in variable order `y, x1, x2, z1, z2`.
    pub noise: [NoiseDist; 5],
}

impl ModelParams {
    pub fn with_noise(noise: NoiseDist) -> Self {
        ModelParams { alpha: 0.5, betas: [1.0; 5], noise: [noise; 5] }
    }
}

/// Column order used by both benchmark models.
pub const MODEL_VARIABLES: [&str; 5] = ["y", "x1", "x2", "z1", "z2"];

/// Stationary model: `y` has a self-lag, `z1` and `z2` are pure noise.
pub fn model_a(noise: NoiseDist) -> Result<ScmSpec> {
    model_a_with(&ModelParams::with_noise(noise))
}

pub fn model_a_with(p: &ModelParams) -> Result<ScmSpec> {
    let [b1, b2, b3, b4, b5] = p.betas;
    ScmSpec::new(
        MODEL_VARIABLES.iter().map(|s| s.to_string()).collect(),
        vec![
            vec![Term::new("y", 1, p.alpha), Term::new("x1", 0, b1), Term::new("x2", 0, b2)],
            vec![Term::new("z1", 0, b3), Term::new("z2", 0, b4)],
            vec![Term::new("z2", 0, b5)],
            vec![],
            vec![],
        ],
        p.noise.to_vec(),
        100,
        true,
    )
}

/// Model A plus unit-root self-lags on `z1` and `z2`. Nonstationary, no burn-in.
pub fn model_b() -> Result<ScmSpec> {
    model_b_with(&ModelParams::with_noise(NoiseDist::gaussian(0.0, 0.5)))
}

pub fn model_b_with(p: &ModelParams) -> Result<ScmSpec> {
    let a = model_a_with(p)?;
    let mut equations = a.equations.clone();
    equations[3] = vec![Term::new("z1", 1, 1.0)];
    equations[4] = vec![Term::new("z2", 1, 1.0)];
    ScmSpec::new(a.variables.clone(), equations, a.noise.clone(), 0, false)
}

/// The coefficients a benchmark spec was built with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueParams {
    pub alpha: f64,
    pub betas: [f64; 5],
    pub noise: Vec<NoiseDist>,
    pub noise_sd: Vec<f64>,
}

/// Reads the ground-truth coefficients back out of a Model A/B spec.
pub fn ground_truth(spec: &ScmSpec) -> Result<TrueParams> {
    let unknown = || Error::InvalidSpec("not a benchmark model (expected y, x1, x2, z1, z2)".into());
    let expect_vars: BTreeSet<&str> = MODEL_VARIABLES.iter().copied().collect();
    let vars: BTreeSet<&str> = spec.variables.iter().map(String::as_str).collect();
    if vars != expect_vars || spec.variables.len() != 5 {
        return Err(unknown());
    }
    let coef = |var: &str, parent: &str, lag: u8| -> Option<f64> {
        spec.equation(var)?.iter().find(|t| t.parent == parent && t.lag == lag).map(|t| t.coef)
    };
    let shape_ok = |var: &str, allowed: &[(&str, u8)]| -> bool {
        let eq = spec.equation(var).unwrap_or(&[]);
        eq.iter().all(|t| allowed.contains(&(t.parent.as_str(), t.lag)))
    };
    if !(shape_ok("y", &[("y", 1), ("x1", 0), ("x2", 0)])
        && shape_ok("x1", &[("z1", 0), ("z2", 0)])
        && shape_ok("x2", &[("z2", 0)])
        && shape_ok("z1", &[("z1", 1)])
        && shape_ok("z2", &[("z2", 1)]))
    {
        return Err(unknown());
    }
    let get = |var, parent, lag| coef(var, parent, lag).ok_or_else(unknown);
    let noise: Vec<NoiseDist> = MODEL_VARIABLES.iter().map(|v| spec.noise[spec.index_of(v).unwrap()]).collect();
    Ok(TrueParams {
        alpha: get("y", "y", 1)?,
        betas: [
            get("y", "x1", 0)?,
            get("y", "x2", 0)?,
            get("x1", "z1", 0)?,
            get("x1", "z2", 0)?,
            get("x2", "z2", 0)?,
        ],
        noise_sd: noise.iter().map(NoiseDist::sd).collect(),
        noise,
    })
}

/// A sampled path together with the noise draws that produced it.
#[derive(Debug, Clone)]
pub struct Sample {
    pub data: PanelDataset,
    /// Same shape and column order as `data`.
    pub noise: Array2<f64>,
}

/// Ancestral sampling: `n` kept rows after discarding `burn_in` steps.
pub fn sample(spec: &ScmSpec, n: usize, seed: u64) -> Result<PanelDataset> {
    sample_with_noise(spec, n, seed).map(|s| s.data)
}

pub fn sample_with_noise(spec: &ScmSpec, n: usize, seed: u64) -> Result<Sample> {
    if n < 2 {
        return Err(Error::InvalidDataset(format!("need at least 2 rows, got {n}")));
    }
    spec.validate()?;
    let order = spec.topological_order()?;
    let k = spec.variables.len();
    // resolve parent names once
    let resolved: Vec<Vec<(usize, u8, f64)>> = spec
        .equations
        .iter()
        .map(|terms| terms.iter().map(|t| (spec.index_of(&t.parent).unwrap(), t.lag, t.coef)).collect())
        .collect();
    let samplers: Vec<Sampler> = spec.noise.iter().map(NoiseDist::sampler).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut rows = Array2::zeros((n, k));
    let mut noise = Array2::zeros((n, k));
    let mut prev = vec![0.0; k];
    let mut cur = vec![0.0; k];
    let mut eps = vec![0.0; k];
    for step in 0..spec.burn_in + n {
        for (e, s) in eps.iter_mut().zip(&samplers) {
            *e = s.draw(&mut rng);
        }
        for &v in &order {
            let mut acc = 0.0;
            for &(p, lag, c) in &resolved[v] {
                acc += c * if lag == 0 { cur[p] } else { prev[p] };
            }
            cur[v] = acc + eps[v];
        }
        if step >= spec.burn_in {
            let t = step - spec.burn_in;
            for j in 0..k {
                rows[[t, j]] = cur[j];
                noise[[t, j]] = eps[j];
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let data = PanelDataset::new(spec.variables.clone(), rows, true)?;
    Ok(Sample { data, noise })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(spec: &ScmSpec, order: &[usize]) -> Vec<String> {
        order.iter().map(|&i| spec.variables()[i].clone()).collect()
    }

    #[test]
    fn model_a_coefficients() {
        let spec = model_a(NoiseDist::gaussian(0.0, 0.5)).unwrap();
        let truth = ground_truth(&spec).unwrap();
        assert_eq!(truth.alpha, 0.5);
        assert_eq!(truth.betas, [1.0; 5]);
        assert_eq!(truth.noise_sd, vec![0.5; 5]);
        assert!(spec.is_stationary());
        assert_eq!(spec.burn_in(), 100);

        let uni = model_a(NoiseDist::uniform(-1.0, 1.0)).unwrap();
        assert_eq!(ground_truth(&uni).unwrap().betas, [1.0; 5]);
        assert_eq!(uni.noise()[0], NoiseDist::uniform(-1.0, 1.0));
    }

    #[test]
    fn topological_order_roots_first() {
        let spec = model_a(NoiseDist::gaussian(0.0, 0.5)).unwrap();
        let order = names(&spec, &spec.topological_order().unwrap());
        let first: BTreeSet<_> = order[..2].iter().cloned().collect();
        assert_eq!(first, ["z1", "z2"].iter().map(|s| s.to_string()).collect());
        assert_eq!(order.last().unwrap(), "y");
    }

    #[test]
    fn model_b_adds_unit_roots() {
        let a = model_a(NoiseDist::gaussian(0.0, 0.5)).unwrap();
        let b = model_b().unwrap();
        assert_eq!(b.equation("z1").unwrap(), &[Term::new("z1", 1, 1.0)]);
        assert!(!b.is_stationary());
        assert_eq!(b.burn_in(), 0);
        assert_eq!(a.contemporaneous_edges(), b.contemporaneous_edges());
        assert_eq!(ground_truth(&b).unwrap().betas[4], 1.0);
    }

    #[test]
    fn rejects_cycles_and_undeclared_parents() {
        let vars = vec!["a".to_string(), "b".to_string()];
        let noise = vec![NoiseDist::gaussian(0.0, 1.0); 2];
        let cyc = ScmSpec::new(
            vars.clone(),
            vec![vec![Term::new("b", 0, 1.0)], vec![Term::new("a", 0, 1.0)]],
            noise.clone(),
            0,
            true,
        );
        assert!(matches!(cyc, Err(Error::Cycle(_))));
        let undeclared = ScmSpec::new(vars.clone(), vec![vec![Term::new("c", 0, 1.0)], vec![]], noise.clone(), 0, true);
        assert!(matches!(undeclared, Err(Error::InvalidSpec(_))));
        // lagged feedback is fine
        let lagged = ScmSpec::new(
            vars.clone(),
            vec![vec![Term::new("b", 1, 0.3)], vec![Term::new("a", 0, 1.0)]],
            noise.clone(),
            0,
            true,
        );
        assert!(lagged.is_ok());
        let explosive = ScmSpec::new(vars, vec![vec![Term::new("a", 1, 1.0)], vec![]], noise, 0, true);
        assert!(explosive.is_err());
    }

    #[test]
    fn ground_truth_rejects_foreign_shape() {
        let spec = ScmSpec::new(
            vec!["a".into()],
            vec![vec![]],
            vec![NoiseDist::gaussian(0.0, 1.0)],
            0,
            true,
        )
        .unwrap();
        assert!(ground_truth(&spec).is_err());
    }

    #[test]
    fn sample_shape_and_determinism() {
        let spec = model_a(NoiseDist::gaussian(0.0, 0.5)).unwrap();
        let a = sample(&spec, 10_000, 7).unwrap();
        let b = sample(&spec, 10_000, 7).unwrap();
        assert_eq!(a.nrows(), 10_000);
        assert_eq!(a.ncols(), 5);
        assert!(a.is_time_indexed());
        assert_eq!(a, b);
        let c = sample(&spec, 10_000, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_coefficients_give_iid_noise() {
        let mut p = ModelParams::with_noise(NoiseDist::gaussian(0.0, 1.0));
        p.alpha = 0.0;
        p.betas = [0.0; 5];
        let spec = model_a_with(&p).unwrap();
        let s = sample_with_noise(&spec, 500, 3).unwrap();
        assert_eq!(s.data.rows(), &s.noise);
    }
}
