//! EM estimation of a single Dirichlet mixture with multi-start,
//! minimum-occupancy filtering, and BIC selection of the component count.
//!
//! One fit proceeds as:
//!
//! 1. partition the data with seeded k-means and moment-match a Dirichlet
//!    per cluster (additional starts perturb those concentrations),
//! 2. iterate E/M steps until the log-likelihood gain drops to `epsilon`,
//!    warm-starting each M-step's inner MLE from the previous parameters
//!    so the observed-data likelihood never decreases,
//! 3. discard runs where any component's hard-assignment occupancy falls
//!    below `n_min`, keep the surviving run with the best likelihood.
//!
//! `select_j` repeats this per candidate component count and keeps the BIC
//! minimizer. All candidate fits and starts run in parallel from
//! pre-derived seeds and merge in a fixed order, so results do not depend
//! on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirichlet::{mle_from_moments, DirichletParams, WeightedLogMoments};
use crate::error::{Error, Result};
use crate::kmeans;
use crate::seed;
use crate::simplex::{common_dim, SimplexPoint};
use crate::special::log_sum_exp;

/// Stream tag separating k-means seeding from start-perturbation seeding.
const KMEANS_STREAM: u64 = 0x6B6D_6561_6E73;

/// Knobs shared by every EM-style fit in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    /// Master seed; all per-run seeds derive from it.
    pub seed: u64,
    /// Number of EM starts per candidate component count.
    pub n_starts: usize,
    /// Absolute log-likelihood gain at which a run stops.
    pub epsilon: f64,
    /// EM iteration budget per run.
    pub max_iter: usize,
    /// Minimum hard-assignment occupancy a component must keep.
    pub n_min: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_starts: 10,
            epsilon: 1e-6,
            max_iter: 500,
            n_min: 3,
        }
    }
}

impl EmConfig {
    fn validate(&self) -> Result<()> {
        if self.n_starts < 1 || self.max_iter < 1 || self.n_min < 1 {
            return Err(Error::InvalidParameter(
                "n_starts, max_iter, and n_min must all be >= 1".into(),
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon {} must be a positive real",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// A finite mixture of Dirichlet components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerMixture {
    weights: Vec<f64>,
    components: Vec<DirichletParams>,
}

impl InnerMixture {
    /// Validate weights (positive, summing to one within 1e-9) and
    /// dimension consistency.
    pub fn new(weights: Vec<f64>, components: Vec<DirichletParams>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::InvalidParameter(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        let mut sum = 0.0;
        for (j, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "mixture weight {j} = {w} must be positive"
                )));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "mixture weights sum to {sum}"
            )));
        }
        let d = components[0].dim();
        if components.iter().any(|c| c.dim() != d) {
            return Err(Error::InvalidParameter(
                "components disagree on dimension".into(),
            ));
        }
        Ok(Self {
            weights,
            components,
        })
    }

    /// Number of components J.
    pub fn j(&self) -> usize {
        self.components.len()
    }

    /// Simplex dimension D.
    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    /// Mixing weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Dirichlet components.
    pub fn components(&self) -> &[DirichletParams] {
        &self.components
    }

    /// log sum_j pi_j f(y; alpha_j), via log-sum-exp.
    pub fn log_density(&self, y: &SimplexPoint) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w.ln() + c.log_density(y))
            .collect();
        log_sum_exp(&terms)
    }

    /// Per-component log terms ln pi_j + log f_j(y), written into `out`.
    pub(crate) fn log_terms(&self, y: &SimplexPoint, out: &mut [f64]) {
        for ((o, w), c) in out.iter_mut().zip(&self.weights).zip(&self.components) {
            *o = w.ln() + c.log_density(y);
        }
    }

    /// Recompute component normalizer caches after deserialization.
    pub fn refresh_cache(&mut self) {
        for c in &mut self.components {
            c.refresh_cache();
        }
    }
}

/// Outcome summary of a mixture fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub final_log_likelihood: f64,
    pub bic: f64,
    /// EM iterations of the winning run.
    pub iterations: usize,
    pub n_starts_tried: usize,
    /// Smallest hard-assignment component occupancy of the winning run.
    pub min_occupancy: usize,
    /// Whether the winning run reached the epsilon gain threshold within
    /// the iteration budget.
    pub converged: bool,
    /// (J, BIC) per successful candidate when selecting over J.
    pub candidate_bics: Vec<(usize, f64)>,
    /// Set by the fixed-background fit when no novel component survives.
    pub no_novelty: bool,
}

/// BIC with p = J*D + (J - 1) free parameters (J Dirichlet vectors plus
/// J - 1 free mixing weights), minimized over J.
pub fn bic(log_likelihood: f64, j: usize, d: usize, n: usize) -> f64 {
    let p = (j * d + j - 1) as f64;
    -2.0 * log_likelihood + p * (n as f64).ln()
}

/// Responsibilities w_ij = pi_j f_j(y_i) / sum_j' pi_j' f_j'(y_i),
/// computed in log space; each row sums to one.
pub fn e_step(m: &InnerMixture, data: &[SimplexPoint]) -> Vec<Vec<f64>> {
    e_step_ll(m, data).0
}

/// E-step plus the observed-data log-likelihood from the same pass.
fn e_step_ll(m: &InnerMixture, data: &[SimplexPoint]) -> (Vec<Vec<f64>>, f64) {
    let j = m.j();
    let mut ll = 0.0;
    let resp = data
        .iter()
        .map(|y| {
            let mut row = vec![0.0; j];
            m.log_terms(y, &mut row);
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

/// Closed-form M-step: pi_j = mean responsibility, alpha_j = weighted MLE
/// on column j. `warm` seeds each component's MLE from previous estimates.
fn m_step_impl(
    resp: &[Vec<f64>],
    data: &[SimplexPoint],
    warm: Option<&InnerMixture>,
) -> Result<InnerMixture> {
    let n = data.len();
    let j = resp.first().map_or(0, Vec::len);
    if n == 0 || j == 0 || resp.len() != n {
        return Err(Error::InvalidParameter(
            "responsibility matrix shape does not match data".into(),
        ));
    }
    let mut weights = Vec::with_capacity(j);
    let mut components = Vec::with_capacity(j);
    let mut column = vec![0.0; n];
    for c in 0..j {
        for (w, row) in column.iter_mut().zip(resp) {
            *w = row[c];
        }
        weights.push(column.iter().sum::<f64>() / n as f64);
        let moments = WeightedLogMoments::compute(data, &column)?;
        let init = warm.map(|m| m.components()[c].alpha());
        components.push(mle_from_moments(&moments, init)?);
    }
    InnerMixture::new(weights, components)
}

/// Public M-step surface (cold inner starts).
pub fn m_step(resp: &[Vec<f64>], data: &[SimplexPoint]) -> Result<InnerMixture> {
    m_step_impl(resp, data, None)
}

/// Observed-data log-likelihood of a mixture.
pub fn log_likelihood(m: &InnerMixture, data: &[SimplexPoint]) -> f64 {
    data.iter().map(|y| m.log_density(y)).sum()
}

struct RunResult {
    mixture: InnerMixture,
    ll: f64,
    iterations: usize,
    converged: bool,
    min_occupancy: usize,
    trace: Vec<f64>,
}

/// Hard-assignment occupancy per component (argmax responsibility, ties
/// toward the lower index).
fn occupancies(resp: &[Vec<f64>], j: usize) -> Vec<usize> {
    let mut counts = vec![0usize; j];
    for row in resp {
        let mut best = 0;
        for (c, &w) in row.iter().enumerate().skip(1) {
            if w > row[best] {
                best = c;
            }
        }
        counts[best] += 1;
    }
    counts
}

/// One EM run from a given initialization.
fn run_em(data: &[SimplexPoint], init: InnerMixture, cfg: &EmConfig) -> Result<RunResult> {
    let j = init.j();
    let (mut resp, mut ll) = e_step_ll(&init, data);
    let mut mixture = init;
    let mut trace = vec![ll];
    let mut iterations = 0;
    let mut converged = false;
    for t in 1..=cfg.max_iter {
        let next = m_step_impl(&resp, data, Some(&mixture))?;
        let (next_resp, next_ll) = e_step_ll(&next, data);
        mixture = next;
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
    let occ = occupancies(&resp, j);
    let min_occupancy = occ.into_iter().min().unwrap_or(0);
    if min_occupancy < cfg.n_min {
        return Err(Error::DegenerateData(format!(
            "component occupancy {min_occupancy} below n_min {}",
            cfg.n_min
        )));
    }
    Ok(RunResult {
        mixture,
        ll,
        iterations,
        converged,
        min_occupancy,
        trace,
    })
}

/// Build the k-means + method-of-moments initialization, optionally
/// perturbed (multiplicatively, log-normal with variance 0.25) for starts
/// after the first.
fn initial_mixture(
    data: &[SimplexPoint],
    j: usize,
    cfg: &EmConfig,
    run_idx: usize,
) -> Result<InnerMixture> {
    let n = data.len();
    let coords: Vec<&[f64]> = data.iter().map(|p| p.coords()).collect();
    let km_seed = seed::derive2(cfg.seed, j as u64, KMEANS_STREAM);
    let clusters = kmeans::assign(&coords, j, km_seed);

    let unit = vec![1.0; n];
    let global = WeightedLogMoments::compute(data, &unit)?.moment_match()?;

    let mut weights = Vec::with_capacity(j);
    let mut alphas = Vec::with_capacity(j);
    for c in 0..j {
        let members: Vec<SimplexPoint> = data
            .iter()
            .zip(&clusters)
            .filter(|(_, &cl)| cl == c)
            .map(|(p, _)| p.clone())
            .collect();
        weights.push((members.len().max(1)) as f64 / n as f64);
        let alpha = WeightedLogMoments::compute(&members, &vec![1.0; members.len()])
            .and_then(|m| m.moment_match())
            .unwrap_or_else(|_| global.clone());
        alphas.push(alpha);
    }
    let wsum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= wsum;
    }

    if run_idx > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive2(cfg.seed, j as u64, run_idx as u64));
        let noise = Normal::<f64>::new(0.0, 0.5).expect("valid std");
        for alpha in &mut alphas {
            for a in alpha.iter_mut() {
                *a = (*a * noise.sample(&mut rng).exp()).clamp(1e-3, 1e6);
            }
        }
    }

    let components = alphas
        .into_iter()
        .map(DirichletParams::new)
        .collect::<Result<Vec<_>>>()?;
    InnerMixture::new(weights, components)
}

/// Fit a J-component mixture with multi-start EM; also returns the
/// log-likelihood trace of every completed run (diagnostic surface).
pub fn fit_fixed_j_traced(
    data: &[SimplexPoint],
    j: usize,
    cfg: &EmConfig,
) -> Result<(InnerMixture, FitReport, Vec<Vec<f64>>)> {
    cfg.validate()?;
    let n = data.len();
    common_dim(data)?;
    if j < 1 || n < j * cfg.n_min {
        return Err(Error::InvalidParameter(format!(
            "J = {j} needs at least J*n_min = {} points, got {n}",
            j * cfg.n_min
        )));
    }

    let outcomes: Vec<Result<RunResult>> = (0..cfg.n_starts)
        .into_par_iter()
        .map(|r| initial_mixture(data, j, cfg, r).and_then(|init| run_em(data, init, cfg)))
        .collect();

    let mut traces = Vec::new();
    let mut best: Option<RunResult> = None;
    let mut first_err: Option<Error> = None;
    for outcome in outcomes {
        match outcome {
            Ok(run) => {
                traces.push(run.trace.clone());
                let better = best.as_ref().map_or(true, |b| run.ll > b.ll);
                if better {
                    best = Some(run);
                }
            }
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    let Some(winner) = best else {
        let reason = first_err.map(|e| e.to_string()).unwrap_or_default();
        return Err(Error::AllRunsDiscarded(format!(
            "J = {j}: all {} starts discarded ({reason})",
            cfg.n_starts
        )));
    };
    let d = winner.mixture.dim();
    let report = FitReport {
        final_log_likelihood: winner.ll,
        bic: bic(winner.ll, j, d, n),
        iterations: winner.iterations,
        n_starts_tried: cfg.n_starts,
        min_occupancy: winner.min_occupancy,
        converged: winner.converged,
        candidate_bics: Vec::new(),
        no_novelty: false,
    };
    Ok((winner.mixture, report, traces))
}

/// Fit a J-component mixture with multi-start EM.
pub fn fit_fixed_j(
    data: &[SimplexPoint],
    j: usize,
    cfg: &EmConfig,
) -> Result<(InnerMixture, FitReport)> {
    fit_fixed_j_traced(data, j, cfg).map(|(m, r, _)| (m, r))
}

/// Fit every feasible candidate J and keep the BIC minimizer; the winning
/// report lists all candidate BICs.
pub fn select_j(
    data: &[SimplexPoint],
    candidates: &[usize],
    cfg: &EmConfig,
) -> Result<(InnerMixture, FitReport)> {
    cfg.validate()?;
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("empty candidate J range".into()));
    }
    let n = data.len();
    let feasible: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&j| j >= 1 && n >= j * cfg.n_min)
        .collect();
    if feasible.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no candidate J in {candidates:?} is feasible for n = {n}, n_min = {}",
            cfg.n_min
        )));
    }

    let fits: Vec<(usize, Result<(InnerMixture, FitReport)>)> = feasible
        .par_iter()
        .map(|&j| (j, fit_fixed_j(data, j, cfg)))
        .collect();

    let mut candidate_bics = Vec::new();
    let mut best: Option<(InnerMixture, FitReport)> = None;
    let mut first_err: Option<Error> = None;
    for (j, fit) in fits {
        match fit {
            Ok((m, r)) => {
                candidate_bics.push((j, r.bic));
                let better = best.as_ref().map_or(true, |(_, b)| r.bic < b.bic);
                if better {
                    best = Some((m, r));
                }
            }
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    match best {
        Some((m, mut r)) => {
            r.candidate_bics = candidate_bics;
            Ok((m, r))
        }
        None => Err(first_err.expect("at least one feasible candidate ran")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::dirichlet::mle_weighted;

    fn two_blob_data(n_each: usize, seed: u64) -> (Vec<SimplexPoint>, [Vec<f64>; 2]) {
        let a1 = vec![40.0, 4.0, 4.0];
        let a2 = vec![4.0, 4.0, 40.0];
        let mut data = DirichletParams::new(a1.clone()).unwrap().sample_n(seed, n_each);
        data.extend(
            DirichletParams::new(a2.clone())
                .unwrap()
                .sample_n(seed ^ 0xDEAD, n_each),
        );
        (data, [a1, a2])
    }

    #[test]
    fn e_step_symmetry_cases() {
        let c = DirichletParams::new(vec![2.0, 3.0, 4.0]).unwrap();
        let data = c.sample_n(1, 20);
        let even = InnerMixture::new(vec![0.5, 0.5], vec![c.clone(), c.clone()]).unwrap();
        for row in e_step(&even, &data) {
            assert_relative_eq!(row[0], 0.5, max_relative = 1e-12);
            assert_relative_eq!(row[1], 0.5, max_relative = 1e-12);
        }
        let eps = 1e-3;
        let skew = InnerMixture::new(vec![1.0 - eps, eps], vec![c.clone(), c]).unwrap();
        for row in e_step(&skew, &data) {
            assert_relative_eq!(row[0], 1.0 - eps, max_relative = 1e-9);
            assert_relative_eq!(row[1], eps, max_relative = 1e-9);
        }
    }

    #[test]
    fn e_step_separates_distant_components() {
        let c1 = DirichletParams::new(vec![60.0, 6.0, 6.0]).unwrap();
        let c2 = DirichletParams::new(vec![6.0, 6.0, 60.0]).unwrap();
        let m = InnerMixture::new(vec![0.5, 0.5], vec![c1.clone(), c2]).unwrap();
        let at_mean = SimplexPoint::new(c1.mean()).unwrap();
        let resp = e_step(&m, &[at_mean]);
        assert!(resp[0][0] > 0.99);
    }

    #[test]
    fn e_step_rows_are_stochastic() {
        let (data, _) = two_blob_data(50, 3);
        let m = fit_fixed_j(&data, 2, &EmConfig::default()).unwrap().0;
        for row in e_step(&m, &data) {
            let s: f64 = row.iter().sum();
            assert_relative_eq!(s, 1.0, max_relative = 1e-12);
            assert!(row.iter().all(|&w| (0.0..=1.0).contains(&w)));
        }
    }

    #[test]
    fn m_step_weight_closed_forms() {
        let c = DirichletParams::new(vec![3.0, 3.0, 3.0]).unwrap();
        let data = c.sample_n(5, 9);
        // Hard assignment of 6 and 3 points: weights are the column means.
        let hard: Vec<Vec<f64>> = (0..9)
            .map(|i| if i < 6 { vec![1.0, 0.0] } else { vec![0.0, 1.0] })
            .collect();
        let m = m_step(&hard, &data).unwrap();
        assert_relative_eq!(m.weights()[0], 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(m.weights()[1], 1.0 / 3.0, max_relative = 1e-15);
        let uniform = vec![vec![0.5, 0.5]; 9];
        let m = m_step(&uniform, &data).unwrap();
        assert_relative_eq!(m.weights()[0], 0.5, max_relative = 1e-15);
        assert_relative_eq!(m.weights()[1], 0.5, max_relative = 1e-15);
    }

    #[test]
    fn single_component_reduces_to_mle() {
        let c = DirichletParams::new(vec![2.0, 6.0, 2.0]).unwrap();
        let data = c.sample_n(9, 200);
        let ones = vec![vec![1.0]; data.len()];
        let m = m_step(&ones, &data).unwrap();
        let direct = mle_weighted(&data, &vec![1.0; data.len()], None).unwrap();
        assert_eq!(m.weights(), &[1.0]);
        for (a, b) in m.components()[0].alpha().iter().zip(direct.alpha()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-10);
        }

        let (fit, report) = fit_fixed_j(&data, 1, &EmConfig::default()).unwrap();
        let direct_ll: f64 = data.iter().map(|y| direct.log_density(y)).sum();
        assert!((report.final_log_likelihood - direct_ll).abs() < 1e-6 * direct_ll.abs());
        assert_eq!(fit.j(), 1);
    }

    #[test]
    fn recovers_two_component_mixture() {
        let (data, truth) = two_blob_data(200, 11);
        let (m, report) = fit_fixed_j(&data, 2, &EmConfig::default()).unwrap();
        assert!(report.converged);
        // Match components to truth by mean distance (permutation of 2).
        let means: Vec<Vec<f64>> = m.components().iter().map(|c| c.mean()).collect();
        let t0 = DirichletParams::new(truth[0].clone()).unwrap().mean();
        let dist = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        };
        let (first, second) = if dist(&means[0], &t0) < dist(&means[1], &t0) {
            (0, 1)
        } else {
            (1, 0)
        };
        let t1 = DirichletParams::new(truth[1].clone()).unwrap().mean();
        assert!(dist(&means[first], &t0) < 0.05);
        assert!(dist(&means[second], &t1) < 0.05);
        assert!((m.weights()[first] - 0.5).abs() < 0.05);
    }

    #[test]
    fn fit_is_deterministic() {
        let (data, _) = two_blob_data(80, 21);
        let cfg = EmConfig {
            seed: 44,
            ..EmConfig::default()
        };
        let (m1, r1) = fit_fixed_j(&data, 2, &cfg).unwrap();
        let (m2, r2) = fit_fixed_j(&data, 2, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&m1).unwrap(),
            serde_json::to_string(&m2).unwrap()
        );
        assert_eq!(
            serde_json::to_string(&r1).unwrap(),
            serde_json::to_string(&r2).unwrap()
        );
    }

    #[test]
    fn traces_never_decrease() {
        let (data, _) = two_blob_data(100, 31);
        let cfg = EmConfig::default();
        let (_, _, traces) = fit_fixed_j_traced(&data, 2, &cfg).unwrap();
        assert!(!traces.is_empty());
        for trace in traces {
            for pair in trace.windows(2) {
                assert!(
                    pair[1] >= pair[0] - 1e-8,
                    "log-likelihood fell from {} to {}",
                    pair[0],
                    pair[1]
                );
            }
        }
    }

    #[test]
    fn permuting_components_keeps_likelihood_and_bic() {
        let (data, _) = two_blob_data(60, 41);
        let (m, report) = fit_fixed_j(&data, 2, &EmConfig::default()).unwrap();
        let permuted = InnerMixture::new(
            vec![m.weights()[1], m.weights()[0]],
            vec![m.components()[1].clone(), m.components()[0].clone()],
        )
        .unwrap();
        let ll = log_likelihood(&permuted, &data);
        assert_relative_eq!(ll, report.final_log_likelihood, max_relative = 1e-12);
        assert_relative_eq!(
            bic(ll, 2, m.dim(), data.len()),
            report.bic,
            max_relative = 1e-12
        );
    }

    #[test]
    fn bic_formula_matches_report() {
        let (data, _) = two_blob_data(70, 51);
        let (m, report) = fit_fixed_j(&data, 2, &EmConfig::default()).unwrap();
        let p = (2 * m.dim() + 1) as f64;
        let want = -2.0 * report.final_log_likelihood + p * (data.len() as f64).ln();
        assert_relative_eq!(report.bic, want, max_relative = 1e-12);
    }

    #[test]
    fn mixture_density_integrates_to_one() {
        let (data, _) = two_blob_data(120, 61);
        let (m, _) = fit_fixed_j(&data, 2, &EmConfig::default()).unwrap();
        let flat = DirichletParams::new(vec![1.0; 3]).unwrap();
        let log_gamma_d = crate::special::ln_gamma(3.0);
        let n = 300_000;
        let mut acc = 0.0;
        for y in flat.sample_n(4242, n) {
            acc += (m.log_density(&y) - log_gamma_d).exp();
        }
        let integral = acc / n as f64;
        assert!((integral - 1.0).abs() < 0.02, "integral {integral}");
    }

    #[test]
    fn singleton_range_equals_fixed_fit() {
        let (data, _) = two_blob_data(60, 71);
        let cfg = EmConfig::default();
        let (m_sel, r_sel) = select_j(&data, &[2], &cfg).unwrap();
        let (m_fix, r_fix) = fit_fixed_j(&data, 2, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&m_sel).unwrap(),
            serde_json::to_string(&m_fix).unwrap()
        );
        assert_eq!(r_sel.bic, r_fix.bic);
        assert_eq!(r_sel.candidate_bics, vec![(2, r_fix.bic)]);
    }

    #[test]
    fn select_j_prefers_true_component_count() {
        let (data, _) = two_blob_data(150, 81);
        let (m, report) = select_j(&data, &[1, 2, 3], &EmConfig::default()).unwrap();
        assert_eq!(m.j(), 2, "candidate BICs: {:?}", report.candidate_bics);
        assert_eq!(report.candidate_bics.len(), 3);
    }

    #[test]
    fn infeasible_inputs_are_rejected() {
        let (data, _) = two_blob_data(5, 91); // n = 10
        let cfg = EmConfig::default(); // n_min = 3
        assert!(matches!(
            fit_fixed_j(&data, 4, &cfg),
            Err(Error::InvalidParameter(_))
        ));
        // select_j skips the infeasible 4 but still fits 1..3.
        assert!(select_j(&data, &[4, 1], &cfg).is_ok());
        assert!(matches!(
            select_j(&data, &[4, 5], &cfg),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            select_j(&data, &[], &cfg),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn overlarge_n_min_discards_all_runs() {
        // Two clusters of 8 and 7 points cannot house three components of
        // five points each, whatever the start.
        let (data, _) = two_blob_data(8, 101);
        let data: Vec<SimplexPoint> = data.into_iter().take(15).collect();
        let cfg = EmConfig {
            n_min: 5,
            ..EmConfig::default()
        };
        match fit_fixed_j(&data, 3, &cfg) {
            Err(Error::AllRunsDiscarded(_)) => {}
            other => panic!("expected all-runs-discarded, got {other:?}"),
        }
    }
}
