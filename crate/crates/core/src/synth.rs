//! Ground-truth data generation: sample labeled datasets from explicit
//! mixture parameters so fitting, selection, and detection can be
//! verified against a known generator.
//!
//! Generation is strictly sequential in one seeded stream — the i-th
//! draw never depends on how many threads ran — and the latent
//! (class, component) indices are returned separately from the public
//! dataset so they cannot leak into fitting.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dirichlet::DirichletParams;
use crate::error::{Error, Result};
use crate::special::log_sum_exp;
use crate::tsdm::LabeledDataset;

fn default_novel_label() -> String {
    "NEW".to_string()
}

/// One background class: a Dirichlet mixture and its target sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthClass {
    pub label: String,
    pub size: usize,
    /// Mixture weights over `alphas`, summing to one.
    pub weights: Vec<f64>,
    pub alphas: Vec<Vec<f64>>,
}

/// Optional contamination: each drawn point is replaced by a draw from
/// this mixture with probability `rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthNovelty {
    pub rate: f64,
    #[serde(default = "default_novel_label")]
    pub label: String,
    pub weights: Vec<f64>,
    pub alphas: Vec<Vec<f64>>,
}

/// Full generator description; serializable so a dataset can always be
/// regenerated from its spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: Vec<SynthClass>,
    #[serde(default)]
    pub novelty: Option<SynthNovelty>,
    pub seed: u64,
}

/// Latent origin of one generated point, kept apart from the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiddenAssignment {
    /// Generating class index into `spec.classes`; `None` for novel
    /// points.
    pub class_index: Option<usize>,
    /// Component index within the generating mixture.
    pub component: usize,
}

fn validate_mixture(
    what: &str,
    weights: &[f64],
    alphas: &[Vec<f64>],
    dim: &mut Option<usize>,
) -> Result<()> {
    if weights.is_empty() || weights.len() != alphas.len() {
        return Err(Error::InvalidParameter(format!(
            "{what}: need one weight per component"
        )));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "{what}: weights must be positive and sum to 1, got sum {sum}"
        )));
    }
    for alpha in alphas {
        let d = *dim.get_or_insert(alpha.len());
        if alpha.len() != d {
            return Err(Error::InvalidParameter(format!(
                "{what}: component dimension {} differs from {d}",
                alpha.len()
            )));
        }
    }
    Ok(())
}

impl SynthSpec {
    /// Check structural invariants: unique labels, valid weights,
    /// consistent dimensions, positive class sizes, rate in (0,1).
    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::InvalidParameter("spec has no classes".into()));
        }
        let mut dim = None;
        let mut labels: Vec<&str> = self.classes.iter().map(|c| c.label.as_str()).collect();
        if let Some(nov) = &self.novelty {
            labels.push(&nov.label);
            if !(nov.rate > 0.0 && nov.rate < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "contamination rate must lie in (0,1), got {}",
                    nov.rate
                )));
            }
            validate_mixture("novelty", &nov.weights, &nov.alphas, &mut dim)?;
        }
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("duplicate labels in spec".into()));
        }
        for class in &self.classes {
            if class.size == 0 {
                return Err(Error::InvalidParameter(format!(
                    "class {} has size 0",
                    class.label
                )));
            }
            validate_mixture(&class.label, &class.weights, &class.alphas, &mut dim)?;
        }
        Ok(())
    }

    /// Total number of points the spec generates.
    pub fn total_size(&self) -> usize {
        self.classes.iter().map(|c| c.size).sum()
    }
}

struct Sampler {
    pick: WeightedIndex<f64>,
    components: Vec<DirichletParams>,
}

impl Sampler {
    fn new(weights: &[f64], alphas: &[Vec<f64>]) -> Result<Self> {
        let pick = WeightedIndex::new(weights.iter().copied())
            .map_err(|e| Error::InvalidParameter(format!("mixture weights: {e}")))?;
        let components = alphas
            .iter()
            .map(|a| DirichletParams::new(a.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { pick, components })
    }
}

/// Sample the dataset described by `spec`.
///
/// Points are generated class by class in spec order; with a novelty
/// block, each point is independently replaced by a novel draw with
/// probability `rate`, so the novel count is binomial. The second return
/// value records the latent origin of every point in dataset order.
pub fn generate(spec: &SynthSpec) -> Result<(LabeledDataset, Vec<HiddenAssignment>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let novelty = spec
        .novelty
        .as_ref()
        .map(|nov| Sampler::new(&nov.weights, &nov.alphas).map(|s| (nov, s)))
        .transpose()?;

    let mut points = Vec::with_capacity(spec.total_size());
    let mut labels = Vec::with_capacity(spec.total_size());
    let mut hidden = Vec::with_capacity(spec.total_size());
    for (c, class) in spec.classes.iter().enumerate() {
        let sampler = Sampler::new(&class.weights, &class.alphas)?;
        for _ in 0..class.size {
            let novel_draw = match &novelty {
                Some((nov, _)) => rng.gen_bool(nov.rate),
                None => false,
            };
            let (label, s, class_index) = if novel_draw {
                let (nov, s) = novelty.as_ref().expect("checked above");
                (nov.label.as_str(), s, None)
            } else {
                (class.label.as_str(), &sampler, Some(c))
            };
            let j = s.pick.sample(&mut rng);
            points.push(s.components[j].sample(&mut rng));
            labels.push(label.to_string());
            hidden.push(HiddenAssignment {
                class_index,
                component: j,
            });
        }
    }
    Ok((LabeledDataset::new(points, labels)?, hidden))
}

/// Log-likelihood of `data` under the generating density itself: classes
/// weighted by their size proportions, mixed with the novelty component
/// at the contamination rate. Empty data scores zero.
pub fn true_log_likelihood(spec: &SynthSpec, data: &[crate::simplex::SimplexPoint]) -> Result<f64> {
    spec.validate()?;
    let total = spec.total_size() as f64;
    let rate = spec.novelty.as_ref().map_or(0.0, |n| n.rate);
    let mut log_weights = Vec::new();
    let mut components = Vec::new();
    for class in &spec.classes {
        let p_class = (1.0 - rate) * class.size as f64 / total;
        for (w, alpha) in class.weights.iter().zip(&class.alphas) {
            log_weights.push((p_class * w).ln());
            components.push(DirichletParams::new(alpha.clone())?);
        }
    }
    if let Some(nov) = &spec.novelty {
        for (w, alpha) in nov.weights.iter().zip(&nov.alphas) {
            log_weights.push((rate * w).ln());
            components.push(DirichletParams::new(alpha.clone())?);
        }
    }
    let mut terms = vec![0.0; components.len()];
    let mut ll = 0.0;
    for y in data {
        for ((t, lw), c) in terms.iter_mut().zip(&log_weights).zip(&components) {
            *t = lw + c.log_density(y);
        }
        ll += log_sum_exp(&terms);
    }
    Ok(ll)
}

/// Seeded stratified split of label indices into (train, test): every
/// label group is shuffled and divided at `fraction`, so class
/// proportions carry over. Groups with a single point go to the training
/// side.
pub fn stratified_split(
    labels: &[String],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split fraction must lie in (0,1), got {fraction}"
        )));
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, label) in labels.iter().enumerate() {
        groups.entry(label).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for indices in groups.values() {
        let mut shuffled = indices.clone();
        // Fisher-Yates, explicit so the draw order is part of the
        // contract.
        for i in (1..shuffled.len()).rev() {
            let j = rng.gen_range(0..=i);
            shuffled.swap(i, j);
        }
        let n = shuffled.len();
        let take = ((fraction * n as f64).round() as usize).clamp(1, n.max(2) - 1).min(n);
        train.extend_from_slice(&shuffled[..take]);
        test.extend_from_slice(&shuffled[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_class_spec(seed: u64) -> SynthSpec {
        SynthSpec {
            classes: vec![
                SynthClass {
                    label: "a".into(),
                    size: 100,
                    weights: vec![1.0],
                    alphas: vec![vec![20.0, 3.0, 3.0]],
                },
                SynthClass {
                    label: "b".into(),
                    size: 200,
                    weights: vec![0.4, 0.6],
                    alphas: vec![vec![3.0, 20.0, 3.0], vec![3.0, 3.0, 20.0]],
                },
            ],
            novelty: None,
            seed,
        }
    }

    fn contaminated_spec(seed: u64) -> SynthSpec {
        let mut spec = two_class_spec(seed);
        spec.classes[0].size = 400;
        spec.classes[1].size = 600;
        spec.novelty = Some(SynthNovelty {
            rate: 0.1,
            label: "NEW".into(),
            weights: vec![1.0],
            alphas: vec![vec![10.0, 10.0, 1.0]],
        });
        spec
    }

    #[test]
    fn class_sizes_are_exact_without_novelty() {
        let spec = two_class_spec(1);
        let (data, hidden) = generate(&spec).unwrap();
        assert_eq!(data.len(), 300);
        assert_eq!(hidden.len(), 300);
        let count = |l: &str| data.labels().iter().filter(|x| *x == l).count();
        assert_eq!(count("a"), 100);
        assert_eq!(count("b"), 200);
        for (i, h) in hidden.iter().enumerate() {
            assert_eq!(h.class_index, Some(usize::from(i >= 100)));
        }
    }

    #[test]
    fn same_seed_reproduces_identical_data() {
        let spec = two_class_spec(42);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(
            serde_json::to_string(&a.0).unwrap(),
            serde_json::to_string(&b.0).unwrap()
        );
        assert_eq!(a.1, b.1);
        let other = generate(&two_class_spec(43)).unwrap();
        assert_ne!(
            serde_json::to_string(&a.0).unwrap(),
            serde_json::to_string(&other.0).unwrap()
        );
    }

    #[test]
    fn novel_counts_are_binomial() {
        // n = 1000 at rate 0.1: the mean novel count over 20 seeds must
        // land within 20 of the expectation 100.
        let mut total = 0usize;
        for seed in 0..20 {
            let (data, hidden) = generate(&contaminated_spec(seed)).unwrap();
            let flagged = data.labels().iter().filter(|l| *l == "NEW").count();
            let latent = hidden.iter().filter(|h| h.class_index.is_none()).count();
            assert_eq!(flagged, latent);
            total += flagged;
        }
        let mean = total as f64 / 20.0;
        assert!((mean - 100.0).abs() < 20.0, "mean novel count {mean}");
    }

    #[test]
    fn component_frequencies_match_weights() {
        let spec = SynthSpec {
            classes: vec![SynthClass {
                label: "only".into(),
                size: 10_000,
                weights: vec![0.3, 0.7],
                alphas: vec![vec![10.0, 2.0, 2.0], vec![2.0, 2.0, 10.0]],
            }],
            novelty: None,
            seed: 7,
        };
        let (_, hidden) = generate(&spec).unwrap();
        let first = hidden.iter().filter(|h| h.component == 0).count() as f64;
        let freq = first / 10_000.0;
        let se = (0.3f64 * 0.7 / 10_000.0).sqrt();
        assert!(
            (freq - 0.3).abs() <= 3.0 * se,
            "component frequency {freq} vs weight 0.3 (se {se})"
        );
    }

    #[test]
    fn single_component_likelihood_matches_direct_sum() {
        let spec = SynthSpec {
            classes: vec![SynthClass {
                label: "solo".into(),
                size: 50,
                weights: vec![1.0],
                alphas: vec![vec![4.0, 5.0, 6.0]],
            }],
            novelty: None,
            seed: 11,
        };
        let (data, _) = generate(&spec).unwrap();
        let direct: f64 = {
            let c = DirichletParams::new(vec![4.0, 5.0, 6.0]).unwrap();
            data.points().iter().map(|y| c.log_density(y)).sum()
        };
        let ll = true_log_likelihood(&spec, data.points()).unwrap();
        assert_relative_eq!(ll, direct, max_relative = 1e-12);
        assert_eq!(true_log_likelihood(&spec, &[]).unwrap(), 0.0);
    }

    #[test]
    fn own_spec_dominates_shuffled_parameters() {
        // Swapping the class mixtures misplaces every class's mass, so
        // the generating spec must win on its own data.
        let mut wins = 0;
        for seed in 0..20 {
            let spec = two_class_spec(seed);
            let (data, _) = generate(&spec).unwrap();
            let mut shuffled = spec.clone();
            let a = shuffled.classes[0].clone();
            let b = shuffled.classes[1].clone();
            shuffled.classes[0].weights = b.weights;
            shuffled.classes[0].alphas = b.alphas;
            shuffled.classes[1].weights = a.weights;
            shuffled.classes[1].alphas = a.alphas;
            let own = true_log_likelihood(&spec, data.points()).unwrap();
            let other = true_log_likelihood(&shuffled, data.points()).unwrap();
            if own > other {
                wins += 1;
            }
        }
        assert!(wins >= 19, "generating spec won only {wins}/20 seeds");
    }

    #[test]
    fn rejects_invalid_specs() {
        let mut spec = two_class_spec(1);
        spec.classes[0].size = 0;
        assert!(generate(&spec).is_err());

        let mut spec = two_class_spec(1);
        spec.classes[1].weights = vec![0.5, 0.6];
        assert!(generate(&spec).is_err());

        let mut spec = two_class_spec(1);
        spec.classes[1].alphas[1] = vec![1.0, 2.0];
        assert!(generate(&spec).is_err());

        let mut spec = two_class_spec(1);
        spec.classes[1].label = "a".into();
        assert!(generate(&spec).is_err());

        let mut spec = contaminated_spec(1);
        spec.novelty.as_mut().unwrap().rate = 1.5;
        assert!(generate(&spec).is_err());

        let mut spec = contaminated_spec(1);
        spec.novelty.as_mut().unwrap().label = "b".into();
        assert!(generate(&spec).is_err());

        assert!(generate(&SynthSpec {
            classes: vec![],
            novelty: None,
            seed: 0
        })
        .is_err());
    }

    #[test]
    fn split_is_stratified_and_deterministic() {
        let labels: Vec<String> = std::iter::repeat("a".to_string())
            .take(100)
            .chain(std::iter::repeat("b".to_string()).take(40))
            .collect();
        let (train, test) = stratified_split(&labels, 0.7, 5).unwrap();
        assert_eq!(train.len() + test.len(), 140);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..140).collect::<Vec<_>>());
        let train_a = train.iter().filter(|&&i| i < 100).count();
        let train_b = train.len() - train_a;
        assert_eq!(train_a, 70);
        assert_eq!(train_b, 28);

        let again = stratified_split(&labels, 0.7, 5).unwrap();
        assert_eq!((train.clone(), test.clone()), again);
        let other = stratified_split(&labels, 0.7, 6).unwrap();
        assert_ne!((train, test), other);

        // Tiny groups stay on the training side.
        let lone = vec!["x".to_string()];
        let (tr, te) = stratified_split(&lone, 0.5, 1).unwrap();
        assert_eq!(tr, vec![0]);
        assert!(te.is_empty());

        assert!(stratified_split(&lone, 0.0, 1).is_err());
        assert!(stratified_split(&lone, 1.0, 1).is_err());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = contaminated_spec(9);
        let json = serde_json::to_string_pretty(&spec).unwrap();
        let back: SynthSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
        // The novelty label defaults when omitted.
        let raw = r#"{
            "classes": [
                {"label": "a", "size": 5, "weights": [1.0], "alphas": [[2.0, 2.0]]}
            ],
            "novelty": {"rate": 0.2, "weights": [1.0], "alphas": [[3.0, 3.0]]},
            "seed": 3
        }"#;
        let parsed: SynthSpec = serde_json::from_str(raw).unwrap();
        assert_eq!(parsed.novelty.unwrap().label, "NEW");
    }
}
