//! Fixed-background estimation: explain unlabeled data as a frozen
//! background plus a Dirichlet mixture of novel components.
//!
//! The density is
//!
//! ```text
//! f(y) = lambda_0 f_B(y) + sum_j lambda_j f(y; beta_j),
//! ```
//!
//! with f_B completely frozen: EM re-estimates only the weights lambda
//! and the novel components beta_j. Both M-step updates are closed form
//! (lambda_j is the mean responsibility of column j; beta_j a weighted
//! MLE warm-started from the previous iterate), so the observed-data
//! log-likelihood is monotone. Runs whose novel components fail the
//! hard-assignment occupancy minimum are discarded; if every candidate
//! component count dies, the fit degrades to the pure background model
//! with a no-novelty flag.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirichlet::{mle_from_moments, DirichletParams, WeightedLogMoments};
use crate::error::{Error, Result};
use crate::inner_em::{EmConfig, FitReport, InnerMixture};
use crate::kmeans;
use crate::seed;
use crate::simplex::{common_dim, SimplexPoint};
use crate::special::log_sum_exp;
use crate::tsdm::TSDMModel;

/// Stream salt separating fixed-background seeding from stage-1 seeding.
const FB_SALT: u64 = 0x6662_6974;
const KMEANS_STREAM: u64 = 0x6B6D_6561_6E73;

/// Weight floor preventing absorbing zero states during iteration.
const LAMBDA_FLOOR: f64 = 1e-10;

/// Share of lowest-background-density points used to seed novel
/// components.
const SEED_QUANTILE: f64 = 0.10;

/// Initial background weight lambda_0 for every EM start.
const LAMBDA0_INIT: f64 = 0.9;

/// Fixed-background model: frozen background plus optional novelty part.
///
/// `lambda` is `[lambda_0, lambda_1, ..., lambda_J]`; the novel mixture's
/// weights are the renormalized kappa_j = lambda_j / (1 - lambda_0). A
/// model with no novelty part has `lambda == [1.0]` and `new_class ==
/// None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FBModel {
    background: TSDMModel,
    lambda: Vec<f64>,
    new_class: Option<InnerMixture>,
}

impl FBModel {
    /// Build and validate a model.
    pub fn new(
        background: TSDMModel,
        lambda: Vec<f64>,
        new_class: Option<InnerMixture>,
    ) -> Result<Self> {
        match &new_class {
            None => {
                if lambda != vec![1.0] {
                    return Err(Error::InvalidParameter(
                        "a model without novel components must have lambda = [1.0]".into(),
                    ));
                }
            }
            Some(mixture) => {
                if mixture.dim() != background.dim() {
                    return Err(Error::InvalidParameter(format!(
                        "novel components have dimension {}, background {}",
                        mixture.dim(),
                        background.dim()
                    )));
                }
                if lambda.len() != mixture.j() + 1 {
                    return Err(Error::InvalidParameter(format!(
                        "{} weights for {} novel components",
                        lambda.len(),
                        mixture.j()
                    )));
                }
                let sum: f64 = lambda.iter().sum();
                if (sum - 1.0).abs() > 1e-9 || lambda.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
                    return Err(Error::InvalidParameter(format!(
                        "lambda must lie in (0,1) and sum to 1, got sum {sum}"
                    )));
                }
                // kappa consistency: mixture weights must renormalize lambda.
                let rest = 1.0 - lambda[0];
                for (j, (&l, &kappa)) in
                    lambda[1..].iter().zip(mixture.weights()).enumerate()
                {
                    if (kappa * rest - l).abs() > 1e-9 {
                        return Err(Error::InvalidParameter(format!(
                            "novel weight {j} inconsistent with lambda"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            background,
            lambda,
            new_class,
        })
    }

    /// The frozen background model.
    pub fn background(&self) -> &TSDMModel {
        &self.background
    }

    /// Full weight vector [lambda_0, lambda_1, ...].
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Background weight lambda_0.
    pub fn lambda0(&self) -> f64 {
        self.lambda[0]
    }

    /// Novel-component mixture, if any survived fitting.
    pub fn new_class(&self) -> Option<&InnerMixture> {
        self.new_class.as_ref()
    }

    /// Simplex dimension D.
    pub fn dim(&self) -> usize {
        self.background.dim()
    }

    /// Per-column log terms: ln lambda_0 + log f_B(y), then
    /// ln lambda_j + log f(y; beta_j) for each novel component.
    pub fn log_terms(&self, y: &SimplexPoint) -> Vec<f64> {
        let mut terms = Vec::with_capacity(self.lambda.len());
        terms.push(self.lambda[0].ln() + self.background.log_density_background(y));
        if let Some(mixture) = &self.new_class {
            for (&l, c) in self.lambda[1..].iter().zip(mixture.components()) {
                terms.push(l.ln() + c.log_density(y));
            }
        }
        terms
    }

    /// log f(y) under the full fixed-background density. Without novel
    /// components this is exactly the background log-density.
    pub fn log_density_fb(&self, y: &SimplexPoint) -> f64 {
        if self.new_class.is_none() {
            return self.background.log_density_background(y);
        }
        log_sum_exp(&self.log_terms(y))
    }

    /// Recompute cached normalizers after deserialization.
    pub fn refresh_cache(&mut self) {
        self.background.refresh_cache();
        if let Some(m) = &mut self.new_class {
            m.refresh_cache();
        }
    }
}

/// Responsibilities over [background, novel components]: column 0 holds
/// w_0 = lambda_0 f_B / f, columns 1.. hold w_j; rows sum to one.
pub fn e_step_fb(m: &FBModel, data: &[SimplexPoint]) -> Vec<Vec<f64>> {
    data.iter()
        .map(|y| {
            let mut row = m.log_terms(y);
            let lse = log_sum_exp(&row);
            for r in &mut row {
                *r = (*r - lse).exp();
            }
            row
        })
        .collect()
}

/// Closed-form M-step: every lambda (background column included) is its
/// column's mean responsibility; novel components are weighted MLEs,
/// warm-started from `warm` when given. The background never changes.
pub fn m_step_fb(
    resp: &[Vec<f64>],
    data: &[SimplexPoint],
    warm: Option<&[DirichletParams]>,
) -> Result<(Vec<f64>, Vec<DirichletParams>)> {
    let n = data.len();
    let cols = resp.first().map_or(0, Vec::len);
    if n == 0 || cols < 2 || resp.len() != n {
        return Err(Error::InvalidParameter(
            "responsibility matrix must be n x (J+1) with J >= 1".into(),
        ));
    }
    let mut lambda = Vec::with_capacity(cols);
    let mut components = Vec::with_capacity(cols - 1);
    let mut column = vec![0.0; n];
    for c in 0..cols {
        for (w, row) in column.iter_mut().zip(resp) {
            *w = row[c];
        }
        lambda.push(column.iter().sum::<f64>() / n as f64);
        if c > 0 {
            let moments = WeightedLogMoments::compute(data, &column)?;
            let init = warm.map(|w| w[c - 1].alpha());
            components.push(mle_from_moments(&moments, init)?);
        }
    }
    Ok((lambda, components))
}

struct RunResult {
    lambda: Vec<f64>,
    components: Vec<DirichletParams>,
    ll: f64,
    iterations: usize,
    converged: bool,
    min_occupancy: usize,
    trace: Vec<f64>,
}

/// Log density terms and E-step against cached background densities.
fn e_step_cached(
    lambda: &[f64],
    components: &[DirichletParams],
    data: &[SimplexPoint],
    log_b: &[f64],
) -> (Vec<Vec<f64>>, f64) {
    let mut ll = 0.0;
    let resp = data
        .iter()
        .zip(log_b)
        .map(|(y, &lb)| {
            let mut row = Vec::with_capacity(lambda.len());
            row.push(lambda[0].ln() + lb);
            for (&l, c) in lambda[1..].iter().zip(components) {
                row.push(l.ln() + c.log_density(y));
            }
            let lse = log_sum_exp(&row);
            ll += lse;
            for r in &mut row {
                *r = (*r - lse).exp();
            }
            row
        })
        .collect();
    (resp, ll)
}

/// Hard-assignment counts of the novel columns (1..=J); ties toward the
/// lower column, with the background column first.
fn novel_occupancies(resp: &[Vec<f64>], j: usize) -> Vec<usize> {
    let mut counts = vec![0usize; j];
    for row in resp {
        let mut best = 0;
        for (c, &w) in row.iter().enumerate().skip(1) {
            if w > row[best] {
                best = c;
            }
        }
        if best > 0 {
            counts[best - 1] += 1;
        }
    }
    counts
}

/// Initial (lambda, beta) for candidate J and the given start index:
/// k-means over the lowest-background-density points, moment-matched per
/// cluster, perturbed multiplicatively for starts after the first.
fn initial_params(
    data: &[SimplexPoint],
    log_b: &[f64],
    j: usize,
    cfg: &EmConfig,
    run_idx: usize,
) -> Result<(Vec<f64>, Vec<DirichletParams>)> {
    let n = data.len();
    let m = ((SEED_QUANTILE * n as f64).ceil() as usize)
        .max(2 * j)
        .max(10)
        .min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| log_b[a].total_cmp(&log_b[b]).then(a.cmp(&b)));
    let subset: Vec<SimplexPoint> = order[..m].iter().map(|&i| data[i].clone()).collect();

    let coords: Vec<&[f64]> = subset.iter().map(|p| p.coords()).collect();
    let km_seed = seed::derive2(cfg.seed ^ FB_SALT, j as u64, KMEANS_STREAM);
    let clusters = kmeans::assign(&coords, j, km_seed);

    let fallback = WeightedLogMoments::compute(&subset, &vec![1.0; m])
        .and_then(|mo| mo.moment_match())
        .or_else(|_| {
            WeightedLogMoments::compute(data, &vec![1.0; n]).and_then(|mo| mo.moment_match())
        })?;

    let mut kappa = Vec::with_capacity(j);
    let mut alphas = Vec::with_capacity(j);
    for c in 0..j {
        let members: Vec<SimplexPoint> = subset
            .iter()
            .zip(&clusters)
            .filter(|(_, &cl)| cl == c)
            .map(|(p, _)| p.clone())
            .collect();
        kappa.push(members.len().max(1) as f64 / m as f64);
        let alpha = WeightedLogMoments::compute(&members, &vec![1.0; members.len()])
            .and_then(|mo| mo.moment_match())
            .unwrap_or_else(|_| fallback.clone());
        alphas.push(alpha);
    }
    let ksum: f64 = kappa.iter().sum();

    if run_idx > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive2(
            cfg.seed ^ FB_SALT,
            j as u64,
            run_idx as u64,
        ));
        let noise = Normal::<f64>::new(0.0, 0.5).expect("valid std");
        for alpha in &mut alphas {
            for a in alpha.iter_mut() {
                *a = (*a * noise.sample(&mut rng).exp()).clamp(1e-3, 1e6);
            }
        }
    }

    let mut lambda = Vec::with_capacity(j + 1);
    lambda.push(LAMBDA0_INIT);
    for k in &kappa {
        lambda.push((1.0 - LAMBDA0_INIT) * k / ksum);
    }
    let components = alphas
        .into_iter()
        .map(DirichletParams::new)
        .collect::<Result<Vec<_>>>()?;
    Ok((lambda, components))
}

fn run_em(
    data: &[SimplexPoint],
    log_b: &[f64],
    init: (Vec<f64>, Vec<DirichletParams>),
    cfg: &EmConfig,
) -> Result<RunResult> {
    let (mut lambda, mut components) = init;
    let j = components.len();
    let (mut resp, mut ll) = e_step_cached(&lambda, &components, data, log_b);
    let mut trace = vec![ll];
    let mut iterations = 0;
    let mut converged = false;
    for t in 1..=cfg.max_iter {
        let (next_lambda, next_components) = m_step_fb(&resp, data, Some(&components))?;
        lambda = next_lambda;
        // Floor without renormalizing: raising a weight can only increase
        // the unnormalized mixture density, so monotonicity is preserved;
        // the final model is renormalized once after the loop.
        for l in &mut lambda {
            *l = l.max(LAMBDA_FLOOR);
        }
        components = next_components;
        let (next_resp, next_ll) = e_step_cached(&lambda, &components, data, log_b);
        resp = next_resp;
        iterations = t;
        trace.push(next_ll);
        let gain = next_ll - ll;
        ll = next_ll;
        if gain <= cfg.epsilon {
            converged = true;
            break;
        }
    }
    let occ = novel_occupancies(&resp, j);
    let min_occupancy = occ.into_iter().min().unwrap_or(0);
    if min_occupancy < cfg.n_min {
        return Err(Error::DegenerateData(format!(
            "novel component occupancy {min_occupancy} below n_min {}",
            cfg.n_min
        )));
    }
    Ok(RunResult {
        lambda,
        components,
        ll,
        iterations,
        converged,
        min_occupancy,
        trace,
    })
}

/// BIC for the fixed-background fit: p = J*D + J free parameters (J
/// Dirichlet vectors plus J free weights; the background is frozen).
pub fn bic_fb(log_likelihood: f64, j: usize, d: usize, n: usize) -> f64 {
    let p = (j * d + j) as f64;
    -2.0 * log_likelihood + p * (n as f64).ln()
}

/// Fit novel components and weights over candidate component counts,
/// also returning the log-likelihood trace of every completed run.
///
/// If every candidate is discarded the pure-background model is returned
/// with the report's `no_novelty` flag set.
pub fn fit_traced(
    background: TSDMModel,
    data: &[SimplexPoint],
    candidates: &[usize],
    cfg: &EmConfig,
) -> Result<(FBModel, FitReport, Vec<Vec<f64>>)> {
    let n = data.len();
    let d = common_dim(data)?;
    if d != background.dim() {
        return Err(Error::Validation(format!(
            "data dimension {d} does not match background dimension {}",
            background.dim()
        )));
    }
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("empty candidate J range".into()));
    }
    if n < cfg.n_min {
        return Err(Error::InvalidParameter(format!(
            "need at least n_min = {} unlabeled points, got {n}",
            cfg.n_min
        )));
    }
    let log_b: Vec<f64> = data
        .iter()
        .map(|y| background.log_density_background(y))
        .collect();

    let feasible: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&j| j >= 1 && n >= j * cfg.n_min)
        .collect();

    let fits: Vec<(usize, Vec<Result<RunResult>>)> = feasible
        .par_iter()
        .map(|&j| {
            let runs: Vec<Result<RunResult>> = (0..cfg.n_starts)
                .into_par_iter()
                .map(|r| {
                    initial_params(data, &log_b, j, cfg, r)
                        .and_then(|init| run_em(data, &log_b, init, cfg))
                })
                .collect();
            (j, runs)
        })
        .collect();

    let mut traces = Vec::new();
    let mut candidate_bics = Vec::new();
    let mut best: Option<(usize, RunResult, f64)> = None;
    for (j, runs) in fits {
        let mut best_run: Option<RunResult> = None;
        for run in runs.into_iter().flatten() {
            traces.push(run.trace.clone());
            let better = best_run.as_ref().map_or(true, |b| run.ll > b.ll);
            if better {
                best_run = Some(run);
            }
        }
        if let Some(run) = best_run {
            let b = bic_fb(run.ll, j, d, n);
            candidate_bics.push((j, b));
            let better = best.as_ref().map_or(true, |(_, _, bb)| b < *bb);
            if better {
                best = Some((j, run, b));
            }
        }
    }

    let Some((j, run, _)) = best else {
        // Nothing survived: the unlabeled data is explained by the
        // background alone.
        let ll: f64 = log_b.iter().sum();
        let model = FBModel::new(background, vec![1.0], None)?;
        let report = FitReport {
            final_log_likelihood: ll,
            bic: -2.0 * ll,
            iterations: 0,
            n_starts_tried: cfg.n_starts,
            min_occupancy: 0,
            converged: true,
            candidate_bics,
            no_novelty: true,
        };
        return Ok((model, report, traces));
    };

    // Renormalize the floored weights once and derive kappa.
    let mut lambda = run.lambda;
    let total: f64 = lambda.iter().sum();
    for l in &mut lambda {
        *l /= total;
    }
    let rest = 1.0 - lambda[0];
    let kappa: Vec<f64> = lambda[1..].iter().map(|&l| l / rest).collect();
    let mixture = InnerMixture::new(kappa, run.components)?;
    let model = FBModel::new(background, lambda, Some(mixture))?;

    // Report the likelihood of the model actually returned.
    let ll: f64 = data.iter().map(|y| model.log_density_fb(y)).sum();
    let report = FitReport {
        final_log_likelihood: ll,
        bic: bic_fb(ll, j, d, n),
        iterations: run.iterations,
        n_starts_tried: cfg.n_starts,
        min_occupancy: run.min_occupancy,
        converged: run.converged,
        candidate_bics,
        no_novelty: false,
    };
    Ok((model, report, traces))
}

/// Fit novel components and weights over candidate component counts.
pub fn fit(
    background: TSDMModel,
    data: &[SimplexPoint],
    candidates: &[usize],
    cfg: &EmConfig,
) -> Result<(FBModel, FitReport)> {
    fit_traced(background, data, candidates, cfg).map(|(m, r, _)| (m, r))
}
