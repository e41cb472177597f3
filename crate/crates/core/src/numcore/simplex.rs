use crate::{Error, Result};

/// Euclidean projection onto `{v : vᵢ ≥ 0, Σ vᵢ = total}`.
///
/// Sort-based threshold search, `O(n log n)`.
pub fn project_simplex(h: &[f64], total: f64) -> Result<Vec<f64>> {
    if h.is_empty() {
        return Err(Error::shape("cannot project an empty vector onto the simplex"));
    }
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Precondition(format!("simplex total must be positive, got {total}")));
    }
    if let Some(x) = h.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("simplex input contains {x}")));
    }
    let mut sorted = h.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));

    let mut cumsum = 0.0;
    let mut threshold = 0.0;
    for (j, u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - total) / (j + 1) as f64;
        if u - candidate > 0.0 {
            threshold = candidate;
        }
    }
    Ok(h.iter().map(|x| (x - threshold).max(0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feasible_point_is_fixed() {
        assert_eq!(project_simplex(&[0.5, 0.5], 1.0).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn single_coordinate_is_forced() {
        assert_eq!(project_simplex(&[2.0], 1.0).unwrap(), vec![1.0]);
        assert_eq!(project_simplex(&[-3.0], 2.5).unwrap(), vec![2.5]);
    }

    #[test]
    fn empty_input_is_a_shape_error() {
        assert!(matches!(project_simplex(&[], 1.0), Err(Error::Shape(_))));
    }
}
