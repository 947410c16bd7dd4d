use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;

pub const DEFAULT_RATIOS: [f64; 3] = [0.7, 0.15, 0.15];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    Holdout {
        train: Vec<usize>,
        validation: Vec<usize>,
        test: Vec<usize>,
    },
    KFold {
        folds: Vec<Vec<usize>>,
    },
}

/// Partition of dataset indices, with how it was produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub stratified: bool,
    pub warnings: Vec<String>,
    pub kind: PlanKind,
}

impl SplitPlan {
    /// For a k-fold plan: (training indices, test indices) of fold `k`.
    pub fn fold(&self, k: usize) -> Option<(Vec<usize>, Vec<usize>)> {
        match &self.kind {
            PlanKind::KFold { folds } if k < folds.len() => {
                let train = folds
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != k)
                    .flat_map(|(_, f)| f.iter().copied())
                    .collect();
                Some((train, folds[k].clone()))
            }
            _ => None,
        }
    }

    pub fn fold_count(&self) -> usize {
        match &self.kind {
            PlanKind::KFold { folds } => folds.len(),
            PlanKind::Holdout { .. } => 0,
        }
    }
}

fn class_sizes(labels: &[usize], class_count: usize) -> Result<Vec<usize>, EvalError> {
    let mut sizes = vec![0; class_count];
    for &l in labels {
        if l >= class_count {
            return Err(EvalError::ClassOutOfRange {
                class: l,
                class_count,
            });
        }
        sizes[l] += 1;
    }
    Ok(sizes)
}

/// Shuffles within each class, then interleaves classes so that every
/// contiguous run of the result holds them in proportion.
fn stratified_order(labels: &[usize], class_count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut keyed: Vec<(f64, usize, usize)> = Vec::with_capacity(labels.len());
    for (c, members) in by_class.iter_mut().enumerate() {
        members.shuffle(rng);
        let n = members.len() as f64;
        for (j, &idx) in members.iter().enumerate() {
            keyed.push(((j as f64 + 0.5) / n, c, idx));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, _, idx)| idx).collect()
}

fn ordering(
    labels: &[usize],
    class_count: usize,
    seed: u64,
    min_per_class: usize,
) -> Result<(Vec<usize>, bool, Vec<String>), EvalError> {
    let sizes = class_sizes(labels, class_count)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut warnings = Vec::new();
    for (c, &n) in sizes.iter().enumerate() {
        if n < min_per_class {
            warnings.push(format!(
                "class {c} has {n} members (< {min_per_class}); falling back to an unstratified split"
            ));
        }
    }
    if warnings.is_empty() {
        Ok((stratified_order(labels, class_count, &mut rng), true, warnings))
    } else {
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.shuffle(&mut rng);
        Ok((order, false, warnings))
    }
}

/// Seeded train / validation / test partition in the given ratios.
pub fn split(
    labels: &[usize],
    class_count: usize,
    ratios: [f64; 3],
    seed: u64,
) -> Result<SplitPlan, EvalError> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| *r < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(EvalError::InvalidInput(format!(
            "split ratios {ratios:?} must be non-negative and sum to 1"
        )));
    }
    let (order, stratified, warnings) = ordering(labels, class_count, seed, 1)?;
    let n = order.len();
    let n_train = ((ratios[0] * n as f64).round() as usize).min(n);
    let n_val = ((ratios[1] * n as f64).round() as usize).min(n - n_train);
    Ok(SplitPlan {
        seed,
        stratified,
        warnings,
        kind: PlanKind::Holdout {
            train: order[..n_train].to_vec(),
            validation: order[n_train..n_train + n_val].to_vec(),
            test: order[n_train + n_val..].to_vec(),
        },
    })
}

/// Seeded k-fold partition; fold sizes differ by at most one.
pub fn k_fold(
    labels: &[usize],
    class_count: usize,
    k: usize,
    seed: u64,
) -> Result<SplitPlan, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidInput(format!("k = {k}; need at least 2 folds")));
    }
    if labels.len() < k {
        return Err(EvalError::InvalidInput(format!(
            "{} items cannot fill {k} folds",
            labels.len()
        )));
    }
    let (order, stratified, warnings) = ordering(labels, class_count, seed, k)?;
    let n = order.len();
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(SplitPlan {
        seed,
        stratified,
        warnings,
        kind: PlanKind::KFold { folds },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize, c: usize) -> Vec<usize> {
        (0..n).map(|i| i % c).collect()
    }

    #[test]
    fn four_hundred_into_ten() {
        let plan = k_fold(&labels(400, 4), 4, 10, 1).unwrap();
        assert!(plan.stratified);
        match &plan.kind {
            PlanKind::KFold { folds } => {
                assert!(folds.iter().all(|f| f.len() == 40));
                for f in folds {
                    let mut per = [0; 4];
                    for &i in f {
                        per[i % 4] += 1;
                    }
                    assert_eq!(per, [10; 4]);
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn leave_one_out() {
        let plan = k_fold(&labels(10, 2), 2, 10, 3).unwrap();
        match &plan.kind {
            PlanKind::KFold { folds } => assert!(folds.iter().all(|f| f.len() == 1)),
            _ => unreachable!(),
        }
        // 5 members per class < 10 folds
        assert!(!plan.stratified);
        assert!(!plan.warnings.is_empty());
    }

    #[test]
    fn seeded_plans_repeat() {
        let l = labels(57, 3);
        assert_eq!(k_fold(&l, 3, 5, 9).unwrap(), k_fold(&l, 3, 5, 9).unwrap());
        assert_eq!(
            split(&l, 3, DEFAULT_RATIOS, 9).unwrap(),
            split(&l, 3, DEFAULT_RATIOS, 9).unwrap()
        );
        assert_ne!(k_fold(&l, 3, 5, 9).unwrap(), k_fold(&l, 3, 5, 10).unwrap());
    }

    #[test]
    fn holdout_sizes_and_partition() {
        let plan = split(&labels(100, 4), 4, DEFAULT_RATIOS, 5).unwrap();
        match plan.kind {
            PlanKind::Holdout {
                train,
                validation,
                test,
            } => {
                assert_eq!((train.len(), validation.len(), test.len()), (70, 15, 15));
                let mut all: Vec<usize> = train.into_iter().chain(validation).chain(test).collect();
                all.sort();
                assert_eq!(all, (0..100).collect::<Vec<_>>());
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn empty_class_falls_back() {
        let plan = split(&[0, 0, 0, 2, 2], 3, DEFAULT_RATIOS, 1).unwrap();
        assert!(!plan.stratified);
        assert_eq!(plan.warnings.len(), 1);
    }

    #[test]
    fn bad_inputs() {
        assert!(k_fold(&labels(3, 1), 1, 5, 0).is_err());
        assert!(split(&labels(3, 1), 1, [0.5, 0.5, 0.5], 0).is_err());
        assert!(k_fold(&[0, 5], 2, 2, 0).is_err());
    }
}
