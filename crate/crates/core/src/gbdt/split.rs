//! Second-order split finding over histograms.
//!
//! ```text
//! gain = 1/2 [ G_L^2/(H_L+λ) + G_R^2/(H_R+λ) - (G_L+G_R)^2/(H_L+H_R+λ) ] - γ
//! ```
//!
//! Numeric features scan left-prefix cuts of their value bins. Categorical
//! features sort the categories present at the node by `G/(H + 1)` and scan
//! prefixes of that order. Ties keep the first candidate seen, i.e. the
//! lowest bin or the shortest category prefix.

use super::histogram::BinStats;

/// Hessian smoothing in the categorical ordering ratio `G / (H + ε)`.
pub const CAT_HESS_SMOOTHING: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitParams {
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    /// Categories with fewer rows at the node are pooled into one group
    /// for the ordering scan.
    pub min_category_count: u64,
}

#[inline]
fn score(grad: f64, hess: f64, lambda: f64) -> f64 {
    let denom = hess + lambda;
    if denom > 0.0 {
        grad * grad / denom
    } else {
        0.0
    }
}

/// Split gain for the given child sums.
#[inline]
pub fn split_gain(left: &BinStats, right: &BinStats, params: &SplitParams) -> f64 {
    let lambda = params.lambda;
    0.5 * (score(left.grad, left.hess, lambda) + score(right.grad, right.hess, lambda)
        - score(left.grad + right.grad, left.hess + right.hess, lambda))
        - params.gamma
}

/// Newton leaf weight `-G / (H + λ)`.
#[inline]
pub fn leaf_weight(grad: f64, hess: f64, lambda: f64) -> f64 {
    let denom = hess + lambda;
    if denom > 0.0 {
        -grad / denom
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NumericSplit {
    /// Rows with value bin `<= bin` go left.
    pub bin: u32,
    pub gain: f64,
    pub default_left: bool,
    pub left: BinStats,
    pub right: BinStats,
}

/// Best left-prefix cut over `value_bins`; `missing` rows follow the side
/// with the larger non-missing hessian mass. `None` when no cut has
/// positive gain.
pub fn best_numeric_split(value_bins: &[BinStats], missing: BinStats, params: &SplitParams) -> Option<NumericSplit> {
    let total = BinStats::sum(value_bins);
    let mut best: Option<NumericSplit> = None;
    let mut left = BinStats::default();
    for (bin, stats) in value_bins.iter().enumerate().take(value_bins.len().saturating_sub(1)) {
        left.merge(stats);
        let right = total.minus(&left);
        if left.count == 0 || right.count == 0 || stats.count == 0 {
            // Empty bins repeat the previous partition.
            continue;
        }
        let default_left = left.hess >= right.hess;
        let (mut l, mut r) = (left, right);
        if default_left {
            l.merge(&missing);
        } else {
            r.merge(&missing);
        }
        if l.hess < params.min_child_weight || r.hess < params.min_child_weight {
            continue;
        }
        let gain = split_gain(&l, &r, params);
        if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
            best = Some(NumericSplit {
                bin: bin as u32,
                gain,
                default_left,
                left: l,
                right: r,
            });
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalSplit {
    /// Category codes sent left, ascending.
    pub left_categories: Vec<u32>,
    pub gain: f64,
    /// Direction for categories never seen in training.
    pub default_left: bool,
    pub left: BinStats,
    pub right: BinStats,
}

/// Category codes present at the node in scan order: ascending
/// `G/(H + ε)`, ties by code.
pub fn category_order(per_category: &[BinStats]) -> Vec<u32> {
    let mut present: Vec<u32> = (0..per_category.len() as u32)
        .filter(|&c| per_category[c as usize].count > 0)
        .collect();
    let ratio = |c: u32| order_key(&per_category[c as usize]);
    present.sort_by(|&a, &b| ratio(a).total_cmp(&ratio(b)).then(a.cmp(&b)));
    present
}

#[inline]
fn order_key(s: &BinStats) -> f64 {
    s.grad / (s.hess + CAT_HESS_SMOOTHING)
}

/// A scan item: one frequent category, or the pool of rare ones.
struct Group {
    codes: Vec<u32>,
    stats: BinStats,
}

/// Fisher-style categorical split: best prefix of the categories present
/// at the node sorted by `G/(H + ε)`. With `min_category_count > 1`,
/// categories below that count are scanned as a single pooled group that
/// sorts after frequent categories on ties.
pub fn best_categorical_split(per_category: &[BinStats], params: &SplitParams) -> Option<CategoricalSplit> {
    let mut groups: Vec<Group> = Vec::new();
    let mut pool = Group {
        codes: Vec::new(),
        stats: BinStats::default(),
    };
    for code in category_order(per_category) {
        let stats = per_category[code as usize];
        if stats.count < params.min_category_count {
            pool.codes.push(code);
            pool.stats.merge(&stats);
        } else {
            groups.push(Group {
                codes: vec![code],
                stats,
            });
        }
    }
    if !pool.codes.is_empty() {
        let key = order_key(&pool.stats);
        let at = groups.partition_point(|g| order_key(&g.stats) <= key);
        groups.insert(at, pool);
    }
    if groups.len() < 2 {
        return None;
    }
    let total = BinStats::sum(groups.iter().map(|g| &g.stats));
    let mut left = BinStats::default();
    let mut best: Option<(usize, f64, BinStats, BinStats)> = None;
    for (i, group) in groups.iter().enumerate().take(groups.len() - 1) {
        left.merge(&group.stats);
        let right = total.minus(&left);
        if left.hess < params.min_child_weight || right.hess < params.min_child_weight {
            continue;
        }
        let gain = split_gain(&left, &right, params);
        if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.1) {
            best = Some((i + 1, gain, left, right));
        }
    }
    best.map(|(prefix, gain, left, right)| {
        let mut left_categories: Vec<u32> = groups[..prefix].iter().flat_map(|g| g.codes.iter().copied()).collect();
        left_categories.sort_unstable();
        CategoricalSplit {
            left_categories,
            gain,
            default_left: left.hess >= right.hess,
            left,
            right,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stats(grad: f64, hess: f64) -> BinStats {
        BinStats { grad, hess, count: 1 }
    }

    const PARAMS: SplitParams = SplitParams {
        lambda: 1.0,
        gamma: 0.0,
        min_child_weight: 0.0,
        min_category_count: 0,
    };

    #[test]
    fn two_bin_hand_example() {
        let split = best_numeric_split(&[stats(-2.0, 3.0), stats(1.0, 2.0)], BinStats::default(), &PARAMS).unwrap();
        assert_eq!(split.bin, 0);
        assert_abs_diff_eq!(split.gain, 0.5 * (4.0 / 4.0 + 1.0 / 3.0 - 1.0 / 6.0), epsilon = 1e-12);
        assert_abs_diff_eq!(split.gain, 0.58333, epsilon = 1e-5);
    }

    #[test]
    fn identical_children_do_not_split() {
        let bins = [stats(1.0, 2.0), stats(1.0, 2.0)];
        assert!(best_numeric_split(&bins, BinStats::default(), &PARAMS).is_none());
        let g = split_gain(&bins[0], &bins[1], &PARAMS);
        assert!(g <= 0.0);
    }

    #[test]
    fn gamma_and_min_child_weight() {
        let bins = [stats(-2.0, 3.0), stats(1.0, 2.0)];
        let strict = SplitParams { gamma: 1.0, ..PARAMS };
        assert!(best_numeric_split(&bins, BinStats::default(), &strict).is_none());
        let heavy = SplitParams {
            min_child_weight: 2.5,
            ..PARAMS
        };
        assert!(best_numeric_split(&bins, BinStats::default(), &heavy).is_none());
    }

    #[test]
    fn missing_follows_heavier_side() {
        let bins = [stats(-2.0, 3.0), stats(1.0, 2.0)];
        let missing = stats(1.0, 1.0);
        let split = best_numeric_split(&bins, missing, &PARAMS).unwrap();
        assert!(split.default_left);
        assert_eq!(split.left.count, 2);
        assert_abs_diff_eq!(split.left.grad, -1.0);
    }

    #[test]
    fn categorical_hand_example() {
        // A(G=-3,H=2), B(G=1,H=1), C(G=-0.5,H=1): order [A, C, B].
        let cats = [stats(-3.0, 2.0), stats(1.0, 1.0), stats(-0.5, 1.0)];
        assert_eq!(category_order(&cats), vec![0, 2, 1]);
        let split = best_categorical_split(&cats, &PARAMS).unwrap();
        assert_eq!(split.left_categories, vec![0, 2]);
        assert_abs_diff_eq!(split.gain, 1.15625, epsilon = 1e-12);
    }

    #[test]
    fn two_categories_match_numeric() {
        let cats = [stats(-2.0, 3.0), stats(1.0, 2.0)];
        let c = best_categorical_split(&cats, &PARAMS).unwrap();
        let n = best_numeric_split(&cats, BinStats::default(), &PARAMS).unwrap();
        assert_eq!(c.gain, n.gain);
        assert_eq!(c.left_categories, vec![0]);
    }

    #[test]
    fn absent_categories_are_ignored() {
        let cats = [stats(-2.0, 3.0), BinStats::default(), stats(1.0, 2.0)];
        let split = best_categorical_split(&cats, &PARAMS).unwrap();
        assert_eq!(split.left_categories, vec![0]);
        assert!(best_categorical_split(&[stats(1.0, 1.0), BinStats::default()], &PARAMS).is_none());
    }

    #[test]
    fn rare_categories_are_pooled() {
        // Two singletons with opposite gradients would be split apart on
        // their own; pooled they cancel and only the frequent split remains.
        let cats = [
            BinStats {
                grad: -4.0,
                hess: 5.0,
                count: 20,
            },
            BinStats {
                grad: 4.0,
                hess: 5.0,
                count: 20,
            },
            stats(-0.5, 0.25),
            stats(0.5, 0.25),
        ];
        let pooled = SplitParams {
            min_category_count: 5,
            ..PARAMS
        };
        let split = best_categorical_split(&cats, &pooled).unwrap();
        assert!(split.left_categories == vec![0] || split.left_categories == vec![0, 2, 3]);
        let unpooled = best_categorical_split(&cats, &PARAMS).unwrap();
        assert_eq!(unpooled.left_categories, vec![0, 2]);
        assert!(best_categorical_split(&cats[2..], &pooled).is_none());
    }

    #[test]
    fn numeric_matches_row_level_scan() {
        // Brute force over raw rows: every threshold between sorted distinct values.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let n = 200;
            let xs: Vec<u32> = (0..n).map(|_| rng.gen_range(0..12)).collect();
            let gs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let hs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.25)).collect();
            let mut bins = vec![BinStats::default(); 12];
            for i in 0..n {
                bins[xs[i] as usize].add(gs[i], hs[i]);
            }
            let params = SplitParams {
                min_child_weight: 1.0,
                ..PARAMS
            };
            let got = best_numeric_split(&bins, BinStats::default(), &params);
            let mut distinct: Vec<u32> = xs.clone();
            distinct.sort_unstable();
            distinct.dedup();
            let mut oracle: Option<(u32, f64)> = None;
            for &cut in &distinct[..distinct.len() - 1] {
                let mut l = BinStats::default();
                let mut r = BinStats::default();
                for i in 0..n {
                    if xs[i] <= cut {
                        l.add(gs[i], hs[i])
                    } else {
                        r.add(gs[i], hs[i])
                    }
                }
                if l.hess < 1.0 || r.hess < 1.0 {
                    continue;
                }
                let gain = split_gain(&l, &r, &params);
                if gain > 0.0 && oracle.is_none_or(|o| gain > o.1 + 1e-12) {
                    oracle = Some((cut, gain));
                }
            }
            match (got, oracle) {
                (Some(s), Some((cut, gain))) => {
                    assert_eq!(s.bin, cut);
                    assert_abs_diff_eq!(s.gain, gain, epsilon = 1e-9);
                }
                (None, None) => {}
                other => panic!("mismatch: {other:?}"),
            }
        }
    }
}
