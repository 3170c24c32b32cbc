//! Seeded random subsets of sensor rows.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// `k` distinct indices out of `n`, ascending, reproducible from `seed`.
pub fn subsample_indices(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k > n {
        return Err(Error::InvalidInput(format!("cannot keep {k} of {n} rows")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

pub fn subsample<T: Clone>(rows: &[T], k: usize, seed: u64) -> Result<Vec<T>> {
    Ok(subsample_indices(rows.len(), k, seed)?
        .into_iter()
        .map(|i| rows[i].clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn distinct_sorted_in_range(n in 0usize..500, frac in 0.0f64..=1.0, seed in any::<u64>()) {
            let k = (n as f64 * frac) as usize;
            let idx = subsample_indices(n, k, seed).unwrap();
            prop_assert_eq!(idx.len(), k);
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(idx.iter().all(|&i| i < n));
            prop_assert_eq!(subsample_indices(n, k, seed).unwrap(), idx);
        }
    }

    #[test]
    fn too_many_rejected() {
        assert!(subsample_indices(3, 4, 0).is_err());
    }
}
