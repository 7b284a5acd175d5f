use rand::seq::index::sample;
use rand::Rng;

use super::NnError;

/// Denominator floor of the relative error, so that coordinates whose true
/// gradient is ~0 are judged on absolute error instead.
pub const RELATIVE_FLOOR: f64 = 1e-4;

/// Up to `k` distinct indices below `n`, all of them when `n <= k`.
pub fn sample_coordinates<R: Rng>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    if n <= k {
        return (0..n).collect();
    }
    let mut v = sample(rng, n, k).into_vec();
    v.sort_unstable();
    v
}

/// Largest relative error between `analytic` and central differences of
/// `loss` at `params`, over `coords`.
pub fn grad_check<F: FnMut(&[f64]) -> f64>(
    mut loss: F,
    params: &[f64],
    analytic: &[f64],
    epsilon: f64,
    coords: &[usize],
) -> Result<f64, NnError> {
    if analytic.len() != params.len() {
        return Err(NnError::ShapeMismatch {
            expected: vec![params.len()],
            found: vec![analytic.len()],
        });
    }
    if !loss(params).is_finite() {
        return Err(NnError::NonFiniteLoss);
    }
    let mut p = params.to_vec();
    let mut worst = 0.0f64;
    for &i in coords {
        let orig = p[i];
        p[i] = orig + epsilon;
        let up = loss(&p);
        p[i] = orig - epsilon;
        let down = loss(&p);
        p[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(NnError::NonFiniteLoss);
        }
        let numeric = (up - down) / (2.0 * epsilon);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_is_exact() {
        let p: Vec<f64> = (0..300).map(|i| (i as f64 * 0.37).sin()).collect();
        let g: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
        let coords = sample_coordinates(p.len(), 200, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(coords.len(), 200);
        let err = grad_check(|q| q.iter().map(|x| x * x).sum(), &p, &g, 1e-3, &coords).unwrap();
        assert!(err <= 1e-9, "{err}");
    }

    #[test]
    fn wrong_gradient_detected() {
        let p = vec![1.0, 2.0];
        let err = grad_check(|q| q[0] * q[0] + q[1], &p, &[2.0, 0.0], 1e-5, &[0, 1]).unwrap();
        assert!(err > 0.5);
    }

    #[test]
    fn non_finite() {
        assert_eq!(
            grad_check(|_| f64::NAN, &[0.0], &[0.0], 1e-5, &[0]),
            Err(NnError::NonFiniteLoss)
        );
    }
}
