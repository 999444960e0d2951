//! Small dense-vector helpers shared across the crate.

use crate::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity. Errors when either vector has zero norm, naming the
/// offending side via `context`.
pub fn cosine(a: &[f64], b: &[f64], context: &str) -> Result<f64> {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector(context.to_string()));
    }
    Ok(dot(a, b) / (na * nb))
}

/// Scale `v` so its Euclidean norm is 1.
pub fn unit(v: &[f64], context: &str) -> Result<Vec<f64>> {
    let n = norm(v);
    if n == 0.0 {
        return Err(Error::ZeroVector(context.to_string()));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_and_norm() {
        assert_eq!(dot(&[1.0, 2.0], &[3.0, 4.0]), 11.0);
        assert_eq!(norm(&[3.0, 4.0]), 5.0);
    }

    #[test]
    fn cosine_zero_vector_is_error() {
        assert!(cosine(&[0.0, 0.0], &[1.0, 0.0], "w").is_err());
    }

    #[test]
    fn unit_direction_preserved() {
        let u = unit(&[3.0, 4.0], "w").unwrap();
        assert!((u[0] - 0.6).abs() < 1e-15);
        assert!((u[1] - 0.8).abs() < 1e-15);
    }
}
