//! Random draws used by the samplers.

use rand::seq::index;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

/// `count` i.i.d. draws from `candidates` with probabilities `weights`
/// (unnormalized, all positive). Returns node ids.
pub fn with_replacement<R: Rng + ?Sized>(
    candidates: &[usize],
    weights: &[f64],
    count: usize,
    rng: &mut R,
) -> Vec<usize> {
    debug_assert_eq!(candidates.len(), weights.len());
    if candidates.len() == 1 {
        return vec![candidates[0]; count];
    }
    let table =
        WeightedAliasIndex::new(weights.to_vec()).expect("sampling weights must be finite, positive and non-empty");
    (0..count).map(|_| candidates[table.sample(rng)]).collect()
}

/// Up to `count` distinct draws, successively proportional to `weights`
/// (exponential-key method). Returns all candidates when there are fewer
/// than `count`.
pub fn without_replacement<R: Rng + ?Sized>(
    candidates: &[usize],
    weights: &[f64],
    count: usize,
    rng: &mut R,
) -> Vec<usize> {
    if candidates.len() <= count {
        return candidates.to_vec();
    }
    let mut keyed: Vec<(f64, usize)> = candidates
        .iter()
        .zip(weights)
        .map(|(&c, &w)| {
            let u: f64 = rng.random::<f64>();
            // Larger key wins; ln(u)/w is the log of u^(1/w).
            ((1.0 - u).ln() / w, c)
        })
        .collect();
    keyed.select_nth_unstable_by(count - 1, |a, b| b.0.total_cmp(&a.0));
    keyed.truncate(count);
    keyed.into_iter().map(|(_, c)| c).collect()
}

/// `count` distinct uniform draws from `pool` (all of it when smaller),
/// returned sorted.
pub fn uniform_subset<R: Rng + ?Sized>(pool: &[usize], count: usize, rng: &mut R) -> Vec<usize> {
    let mut out: Vec<usize> = if pool.len() <= count {
        pool.to_vec()
    } else {
        index::sample(rng, pool.len(), count)
            .into_iter()
            .map(|k| pool[k])
            .collect()
    };
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn with_replacement_frequencies_follow_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = with_replacement(&[3, 5, 9], &[1.0, 2.0, 7.0], 100_000, &mut rng);
        let freq = |v| draws.iter().filter(|&&d| d == v).count() as f64 / 1e5;
        assert!((freq(3) - 0.1).abs() < 0.005);
        assert!((freq(5) - 0.2).abs() < 0.005);
        assert!((freq(9) - 0.7).abs() < 0.005);
    }

    #[test]
    fn without_replacement_is_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cands: Vec<usize> = (10..30).collect();
        let w = vec![1.0; 20];
        let mut d = without_replacement(&cands, &w, 8, &mut rng);
        d.sort_unstable();
        d.dedup();
        assert_eq!(d.len(), 8);
        assert!(d.iter().all(|x| (10..30).contains(x)));
        assert_eq!(without_replacement(&cands, &w, 50, &mut rng).len(), 20);
    }

    #[test]
    fn uniform_subset_sorted_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pool: Vec<usize> = (0..100).map(|x| x * 2).collect();
        let s = uniform_subset(&pool, 10, &mut rng);
        assert_eq!(s.len(), 10);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(uniform_subset(&pool[..3], 10, &mut rng), vec![0, 2, 4]);
    }
}
