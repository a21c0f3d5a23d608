//! Maximum-a-posteriori assignment of points to background classes or
//! the novel class, plus confusion-matrix evaluation and component
//! signatures.
//!
//! A point is flagged novel when the posterior novel mass
//! `sum_j lambda_j f_j / f` exceeds the background mass
//! `lambda_0 f_B / f`; otherwise it is assigned the background class
//! maximizing `rho_k f_k(y)`. Ties break toward background, then toward
//! the lower class index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fb::FBModel;
use crate::inner_em::InnerMixture;
use crate::simplex::SimplexPoint;
use crate::special::log_sum_exp;

/// Classification outcome for one point.
///
/// `class_posteriors` is the posterior over the background classes given
/// membership in the background; it always sums to one, whether or not
/// the point was flagged novel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub point_index: usize,
    pub is_new_class: bool,
    /// Winning background class; present exactly when not novel.
    pub class_label: Option<String>,
    /// Pr(background | y) under the fitted weights.
    pub posterior_background: f64,
    /// Pr(class k | y, background), one entry per background class.
    pub class_posteriors: Vec<f64>,
}

/// Classify one point under a fitted model.
pub fn classify(m: &FBModel, y: &SimplexPoint) -> Assignment {
    classify_indexed(m, y, 0)
}

fn classify_indexed(m: &FBModel, y: &SimplexPoint, point_index: usize) -> Assignment {
    let terms = m.log_terms(y);
    let lse = log_sum_exp(&terms);
    let posterior_background = (terms[0] - lse).exp();
    let novel_mass: f64 = terms[1..].iter().map(|t| (t - lse).exp()).sum();
    let is_new_class = !(posterior_background >= novel_mass);

    let class_terms = m.background().class_log_terms(y);
    let class_lse = log_sum_exp(&class_terms);
    let class_posteriors: Vec<f64> = class_terms.iter().map(|t| (t - class_lse).exp()).collect();

    let class_label = if is_new_class {
        None
    } else {
        let mut best = 0;
        for (k, &t) in class_terms.iter().enumerate() {
            if t > class_terms[best] {
                best = k;
            }
        }
        Some(m.background().classes()[best].clone())
    };

    Assignment {
        point_index,
        is_new_class,
        class_label,
        posterior_background,
        class_posteriors,
    }
}

/// Classify every point, preserving input order.
pub fn classify_batch(m: &FBModel, data: &[SimplexPoint]) -> Vec<Assignment> {
    data.par_iter()
        .enumerate()
        .map(|(i, y)| classify_indexed(m, y, i))
        .collect()
}

/// Square count matrix over the background classes plus the novel label
/// (always last). Rows are truth, columns are predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    /// Rebuild a matrix from labels and a square count table.
    pub fn from_parts(labels: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        if labels.len() < 2
            || counts.len() != labels.len()
            || counts.iter().any(|row| row.len() != labels.len())
        {
            return Err(Error::Validation(
                "confusion matrix must be square over at least two labels".into(),
            ));
        }
        Ok(Self { labels, counts })
    }

    /// All labels, the novel label last.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Count rows (truth) by columns (prediction).
    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    /// Total number of points.
    pub fn n(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn row_sum(&self, r: usize) -> u64 {
        self.counts[r].iter().sum()
    }
}

/// Evaluation metrics, all derived from the confusion matrix alone.
///
/// Ratios with an empty denominator are `None` (for instance the novel
/// sensitivity when the truth contains no novel points).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub overall_accuracy: f64,
    /// Per-label accuracy in matrix label order, `None` for labels
    /// absent from the truth.
    pub per_class_accuracy: Vec<(String, Option<f64>)>,
    pub new_class_sensitivity: Option<f64>,
    pub new_class_specificity: Option<f64>,
}

impl Metrics {
    /// Derive every metric from a confusion matrix. `evaluate` calls
    /// this on the matrix it returns, so recomputing from emitted counts
    /// reproduces the emitted metrics exactly.
    pub fn from_matrix(m: &ConfusionMatrix) -> Self {
        let k = m.labels.len();
        let novel = k - 1;
        let n = m.n();
        let trace: u64 = (0..k).map(|i| m.counts[i][i]).sum();
        let per_class_accuracy = m
            .labels
            .iter()
            .enumerate()
            .map(|(i, label)| {
                let row = m.row_sum(i);
                let acc = (row > 0).then(|| m.counts[i][i] as f64 / row as f64);
                (label.clone(), acc)
            })
            .collect();
        let novel_row = m.row_sum(novel);
        let known_rows: u64 = (0..novel).map(|i| m.row_sum(i)).sum();
        let known_kept: u64 = (0..novel).map(|i| m.row_sum(i) - m.counts[i][novel]).sum();
        Metrics {
            overall_accuracy: trace as f64 / n as f64,
            per_class_accuracy,
            new_class_sensitivity: (novel_row > 0)
                .then(|| m.counts[novel][novel] as f64 / novel_row as f64),
            new_class_specificity: (known_rows > 0)
                .then(|| known_kept as f64 / known_rows as f64),
        }
    }
}

/// Cross-tabulate predictions against truth labels and derive metrics.
///
/// `classes` are the background class labels in model order;
/// `novel_label` names the novel class in the truth (and must not
/// collide with a background class). Truth labels outside this set are
/// rejected.
pub fn evaluate(
    classes: &[String],
    assignments: &[Assignment],
    truth: &[String],
    novel_label: &str,
) -> Result<(ConfusionMatrix, Metrics)> {
    if assignments.len() != truth.len() {
        return Err(Error::Validation(format!(
            "{} assignments against {} truth labels",
            assignments.len(),
            truth.len()
        )));
    }
    if assignments.is_empty() {
        return Err(Error::Validation("nothing to evaluate".into()));
    }
    if classes.iter().any(|c| c == novel_label) {
        return Err(Error::Validation(format!(
            "novel label {novel_label:?} collides with a background class"
        )));
    }
    let mut labels: Vec<String> = classes.to_vec();
    labels.push(novel_label.to_string());
    let k = labels.len();
    let index_of = |label: &str| labels.iter().position(|l| l == label);

    let mut counts = vec![vec![0u64; k]; k];
    for (a, t) in assignments.iter().zip(truth) {
        let row = index_of(t).ok_or_else(|| Error::UnknownTruthLabel(t.clone()))?;
        let col = match &a.class_label {
            None => k - 1,
            Some(label) => index_of(label).ok_or_else(|| {
                Error::Validation(format!("assignment names unknown class {label:?}"))
            })?,
        };
        counts[row][col] += 1;
    }
    let matrix = ConfusionMatrix { labels, counts };
    let metrics = Metrics::from_matrix(&matrix);
    Ok((matrix, metrics))
}

/// Normalized mean vectors alpha_j / sum_d alpha_jd, one per component:
/// the broken-line signature of each component.
pub fn signatures(m: &InnerMixture) -> Vec<Vec<f64>> {
    m.components()
        .iter()
        .map(|c| {
            let total: f64 = c.alpha().iter().sum();
            c.alpha().iter().map(|a| a / total).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirichlet::DirichletParams;
    use crate::tsdm::TSDMModel;
    use approx::assert_relative_eq;

    fn single(alpha: &[f64]) -> InnerMixture {
        InnerMixture::new(
            vec![1.0],
            vec![DirichletParams::new(alpha.to_vec()).unwrap()],
        )
        .unwrap()
    }

    fn reference_model() -> FBModel {
        let background = TSDMModel::assemble(
            vec!["c1".into(), "c2".into()],
            vec![single(&[3.0, 4.0, 5.0]), single(&[6.0, 2.0, 2.0])],
            vec![0.4, 0.6],
            vec![0.5, 0.5],
            false,
            Vec::new(),
        )
        .unwrap();
        let mixture = InnerMixture::new(
            vec![0.25 / 0.4, 0.15 / 0.4],
            vec![
                DirichletParams::new(vec![1.5, 1.5, 9.0]).unwrap(),
                DirichletParams::new(vec![8.0, 1.0, 1.0]).unwrap(),
            ],
        )
        .unwrap();
        FBModel::new(background, vec![0.6, 0.25, 0.15], Some(mixture)).unwrap()
    }

    #[test]
    fn reference_assignment_values() {
        // Posteriors frozen against a 50-digit evaluation.
        let m = reference_model();
        let y = SimplexPoint::new(vec![0.2, 0.3, 0.5]).unwrap();
        let a = classify(&m, &y);
        assert_relative_eq!(
            a.posterior_background,
            0.88394221464305716784,
            max_relative = 1e-12
        );
        assert!(!a.is_new_class);
        assert_eq!(a.class_label.as_deref(), Some("c1"));
        assert_relative_eq!(
            a.class_posteriors[0],
            0.97725657427149964463,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            a.class_posteriors[1],
            0.022743425728500355366,
            max_relative = 1e-12
        );
        assert_relative_eq!(a.class_posteriors.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn pure_background_model_never_flags_novel() {
        let background = TSDMModel::assemble(
            vec!["a".into(), "b".into()],
            vec![single(&[5.0, 2.0, 2.0]), single(&[2.0, 2.0, 5.0])],
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            false,
            Vec::new(),
        )
        .unwrap();
        let m = FBModel::new(background, vec![1.0], None).unwrap();
        let probe = DirichletParams::new(vec![2.0, 2.0, 2.0])
            .unwrap()
            .sample_n(41, 50);
        for a in classify_batch(&m, &probe) {
            assert!(!a.is_new_class);
            assert_eq!(a.posterior_background, 1.0);
            assert!(a.class_label.is_some());
        }
    }

    #[test]
    fn exact_ties_go_to_background_then_first_class() {
        // Background class densities are identical, and the single novel
        // component equals them too with lambda split evenly: every
        // posterior is an exact tie.
        let alpha = [3.0, 2.0, 4.0];
        let background = TSDMModel::assemble(
            vec!["u".into(), "v".into()],
            vec![single(&alpha), single(&alpha)],
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            false,
            Vec::new(),
        )
        .unwrap();
        let m = FBModel::new(background, vec![0.5, 0.5], Some(single(&alpha))).unwrap();
        let probe = DirichletParams::new(alpha.to_vec()).unwrap().sample_n(43, 20);
        for a in classify_batch(&m, &probe) {
            assert!(!a.is_new_class, "tie must resolve to background");
            assert_eq!(a.class_label.as_deref(), Some("u"));
            assert_relative_eq!(a.class_posteriors[0], 0.5, max_relative = 1e-10);
            assert_relative_eq!(a.class_posteriors[1], 0.5, max_relative = 1e-10);
        }
    }

    #[test]
    fn separated_synthetic_points_classify_correctly() {
        // Three well-separated background classes plus one novel cluster;
        // the generating component of every draw is known.
        let cls = [
            ("a", [60.0, 4.0, 4.0, 4.0]),
            ("b", [4.0, 60.0, 4.0, 4.0]),
            ("c", [4.0, 4.0, 60.0, 4.0]),
        ];
        let background = TSDMModel::assemble(
            cls.iter().map(|(l, _)| l.to_string()).collect(),
            cls.iter().map(|(_, a)| single(a)).collect(),
            vec![1.0 / 3.0; 3],
            vec![1.0 / 3.0; 3],
            false,
            Vec::new(),
        )
        .unwrap();
        let novel = DirichletParams::new(vec![4.0, 4.0, 4.0, 60.0]).unwrap();
        let m = FBModel::new(
            background,
            vec![0.9, 0.1],
            Some(InnerMixture::new(vec![1.0], vec![novel.clone()]).unwrap()),
        )
        .unwrap();

        let mut data = Vec::new();
        let mut want: Vec<Option<&str>> = Vec::new();
        for (i, (label, alpha)) in cls.iter().enumerate() {
            data.extend(
                DirichletParams::new(alpha.to_vec())
                    .unwrap()
                    .sample_n(50 + i as u64, 100),
            );
            want.extend(std::iter::repeat(Some(*label)).take(100));
        }
        data.extend(novel.sample_n(99, 100));
        want.extend(std::iter::repeat(None).take(100));

        let correct = classify_batch(&m, &data)
            .iter()
            .zip(&want)
            .filter(|(a, w)| a.class_label.as_deref() == **w)
            .count();
        assert!(
            correct >= 380,
            "only {correct}/400 correct on separated clusters"
        );
    }

    #[test]
    fn batch_matches_sequential_and_keeps_order() {
        let m = reference_model();
        let data = DirichletParams::new(vec![2.0, 3.0, 4.0])
            .unwrap()
            .sample_n(47, 60);
        let batch = classify_batch(&m, &data);
        for (i, (got, y)) in batch.iter().zip(&data).enumerate() {
            let mut solo = classify(&m, y);
            solo.point_index = i;
            assert_eq!(got, &solo);
        }
    }

    fn known_assignment(label: &str) -> Assignment {
        Assignment {
            point_index: 0,
            is_new_class: false,
            class_label: Some(label.into()),
            posterior_background: 1.0,
            class_posteriors: vec![1.0],
        }
    }

    fn novel_assignment() -> Assignment {
        Assignment {
            point_index: 0,
            is_new_class: true,
            class_label: None,
            posterior_background: 0.0,
            class_posteriors: vec![1.0],
        }
    }

    #[test]
    fn perfect_predictions_score_one() {
        let classes = vec!["a".to_string(), "b".to_string()];
        let mut assignments = vec![known_assignment("a"), known_assignment("b")];
        assignments.push(novel_assignment());
        let truth = vec!["a".to_string(), "b".to_string(), "NEW".to_string()];
        let (matrix, metrics) = evaluate(&classes, &assignments, &truth, "NEW").unwrap();
        assert_eq!(matrix.n(), 3);
        assert_eq!(metrics.overall_accuracy, 1.0);
        assert_eq!(metrics.new_class_sensitivity, Some(1.0));
        assert_eq!(metrics.new_class_specificity, Some(1.0));
        for (_, acc) in &metrics.per_class_accuracy {
            assert_eq!(*acc, Some(1.0));
        }
    }

    #[test]
    fn sensitivity_and_specificity_definitions() {
        let classes = vec!["a".to_string()];
        // 10 truly novel points, 9 flagged; 100 known points, 1 flagged.
        let mut assignments = Vec::new();
        let mut truth = Vec::new();
        for i in 0..10 {
            assignments.push(if i < 9 {
                novel_assignment()
            } else {
                known_assignment("a")
            });
            truth.push("NEW".to_string());
        }
        for i in 0..100 {
            assignments.push(if i < 1 {
                novel_assignment()
            } else {
                known_assignment("a")
            });
            truth.push("a".to_string());
        }
        let (matrix, metrics) = evaluate(&classes, &assignments, &truth, "NEW").unwrap();
        assert_eq!(metrics.new_class_sensitivity, Some(0.9));
        assert_eq!(metrics.new_class_specificity, Some(0.99));
        // Row sums are per-class truth counts.
        assert_eq!(matrix.counts()[0].iter().sum::<u64>(), 100);
        assert_eq!(matrix.counts()[1].iter().sum::<u64>(), 10);
        assert_eq!(matrix.n(), 110);
    }

    #[test]
    fn metrics_recompute_exactly_from_matrix() {
        let classes = vec!["a".to_string(), "b".to_string()];
        let assignments = vec![
            known_assignment("a"),
            known_assignment("b"),
            known_assignment("a"),
            novel_assignment(),
            known_assignment("b"),
            novel_assignment(),
            known_assignment("a"),
        ];
        let truth: Vec<String> = ["a", "a", "b", "b", "b", "NEW", "NEW"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let (matrix, metrics) = evaluate(&classes, &assignments, &truth, "NEW").unwrap();
        assert_eq!(Metrics::from_matrix(&matrix), metrics);
        let total: u64 = truth.len() as u64;
        assert_eq!(matrix.n(), total);
    }

    #[test]
    fn unknown_truth_label_is_rejected() {
        let classes = vec!["a".to_string()];
        let assignments = vec![known_assignment("a")];
        let err = evaluate(&classes, &assignments, &["mystery".to_string()], "NEW")
            .unwrap_err();
        assert!(matches!(err, Error::UnknownTruthLabel(l) if l == "mystery"));
        // Novel label colliding with a class is ambiguous.
        assert!(evaluate(&classes, &assignments, &["a".to_string()], "a").is_err());
        // Length mismatch and empty input.
        assert!(evaluate(&classes, &assignments, &[], "NEW").is_err());
        assert!(evaluate(&classes, &[], &[], "NEW").is_err());
    }

    #[test]
    fn signatures_normalize_concentrations() {
        let m = InnerMixture::new(
            vec![0.2, 0.3, 0.5],
            vec![
                DirichletParams::new(vec![2.0, 2.0, 4.0]).unwrap(),
                DirichletParams::new(vec![1.0, 1.0, 1.0]).unwrap(),
                DirichletParams::new(vec![7.0, 11.0, 2.0]).unwrap(),
            ],
        )
        .unwrap();
        let sigs = signatures(&m);
        assert_eq!(sigs.len(), 3);
        assert_eq!(sigs[0], vec![0.25, 0.25, 0.5]);
        assert_eq!(sigs[1], vec![1.0 / 3.0; 3]);
        for s in &sigs {
            assert_relative_eq!(s.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn posterior_terms_are_scale_invariant() {
        // Doubling every unnormalized term leaves decisions unchanged;
        // normalization makes this automatic, so check posteriors are
        // genuinely normalized.
        let m = reference_model();
        let data = DirichletParams::new(vec![3.0, 3.0, 3.0])
            .unwrap()
            .sample_n(53, 30);
        for a in classify_batch(&m, &data) {
            assert!((0.0..=1.0).contains(&a.posterior_background));
            assert_relative_eq!(a.class_posteriors.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
            assert_eq!(a.class_label.is_none(), a.is_new_class);
        }
    }
}
