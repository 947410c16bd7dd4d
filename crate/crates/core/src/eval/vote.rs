use super::EvalError;

/// Modal class of per-patch predictions.
///
/// Ties go to the tied class with the largest summed probability when
/// per-patch probability vectors are supplied, then to the lowest index.
pub fn majority_vote(
    patch_predictions: &[usize],
    patch_probs: Option<&[Vec<f64>]>,
) -> Result<usize, EvalError> {
    if patch_predictions.is_empty() {
        return Err(EvalError::InvalidInput("majority vote over no patches".into()));
    }
    let classes = patch_predictions.iter().max().copied().unwrap_or(0) + 1;
    let mut counts = vec![0usize; classes];
    for &p in patch_predictions {
        counts[p] += 1;
    }
    let top = *counts.iter().max().unwrap_or(&0);
    let tied: Vec<usize> = (0..classes).filter(|&c| counts[c] == top).collect();
    if tied.len() == 1 {
        return Ok(tied[0]);
    }
    let Some(probs) = patch_probs else {
        return Ok(tied[0]);
    };
    if probs.len() != patch_predictions.len() {
        return Err(EvalError::LengthMismatch {
            predictions: patch_predictions.len(),
            labels: probs.len(),
        });
    }
    let mass = |c: usize| -> f64 { probs.iter().map(|p| p.get(c).copied().unwrap_or(0.0)).sum() };
    let mut best = tied[0];
    let mut best_mass = mass(best);
    for &c in &tied[1..] {
        let m = mass(c);
        if m > best_mass {
            best = c;
            best_mass = m;
        }
    }
    Ok(best)
}
