use rayon::prelude::*;

use super::binning::BinnedMatrix;

/// Gradient, hessian and row count accumulated over one bin.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BinStats {
    pub grad: f64,
    pub hess: f64,
    pub count: u64,
}

impl BinStats {
    #[inline]
    pub fn add(&mut self, grad: f64, hess: f64) {
        self.grad += grad;
        self.hess += hess;
        self.count += 1;
    }

    #[inline]
    pub fn merge(&mut self, other: &BinStats) {
        self.grad += other.grad;
        self.hess += other.hess;
        self.count += other.count;
    }

    #[inline]
    pub fn minus(&self, other: &BinStats) -> BinStats {
        BinStats {
            grad: self.grad - other.grad,
            hess: self.hess - other.hess,
            count: self.count - other.count,
        }
    }

    pub fn sum<'a>(stats: impl IntoIterator<Item = &'a BinStats>) -> BinStats {
        let mut total = BinStats::default();
        for s in stats {
            total.merge(s);
        }
        total
    }
}

/// Per-feature, per-slot statistics for one tree node.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub features: Vec<Vec<BinStats>>,
}

impl Histogram {
    /// Accumulates `rows` into per-slot sums. Features are processed in
    /// parallel; each feature is summed sequentially in row order so the
    /// result does not depend on the thread count.
    pub fn build(rows: &[u32], matrix: &BinnedMatrix, grad: &[f64], hess: &[f64]) -> Histogram {
        let features = (0..matrix.n_features())
            .into_par_iter()
            .map(|f| {
                let column = matrix.column(f);
                let mut slots = vec![BinStats::default(); matrix.n_slots[f]];
                for &row in rows {
                    let r = row as usize;
                    slots[column[r] as usize].add(grad[r], hess[r]);
                }
                slots
            })
            .collect();
        Histogram { features }
    }

    /// Sibling histogram from `parent - self`.
    pub fn sibling_of(&self, parent: &Histogram) -> Histogram {
        Histogram {
            features: parent
                .features
                .iter()
                .zip(&self.features)
                .map(|(p, c)| p.iter().zip(c).map(|(p, c)| p.minus(c)).collect())
                .collect(),
        }
    }

    pub fn feature_total(&self, feature: usize) -> BinStats {
        BinStats::sum(&self.features[feature])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::gbdt::binning::fit_features;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(n: usize, seed: u64) -> (BinnedMatrix, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cats: Vec<String> = (0..n).map(|_| format!("c{}", rng.gen_range(0..7))).collect();
        let ds = Dataset::builder()
            .numerical("x", (0..n).map(|_| rng.gen_range(0.0..10.0)).collect())
            .numerical(
                "m",
                (0..n)
                    .map(|_| if rng.gen_bool(0.2) { f64::NAN } else { rng.gen() })
                    .collect(),
            )
            .categorical_values("c", &cats)
            .target("y", vec![0; n])
            .build()
            .unwrap();
        let features = fit_features(&ds, 16);
        let matrix = BinnedMatrix::new(&ds, &features).unwrap();
        let grad = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let hess = (0..n).map(|_| rng.gen_range(0.0..0.25)).collect();
        (matrix, grad, hess)
    }

    #[test]
    fn single_row_lands_in_one_slot_per_feature() {
        let (matrix, grad, hess) = random_instance(20, 1);
        let hist = Histogram::build(&[3], &matrix, &grad, &hess);
        for slots in &hist.features {
            assert_eq!(slots.iter().filter(|s| s.count > 0).count(), 1);
        }
    }

    #[test]
    fn totals_equal_direct_sums() {
        let (matrix, grad, hess) = random_instance(500, 2);
        let rows: Vec<u32> = (0..500).filter(|r| r % 3 != 0).collect();
        let hist = Histogram::build(&rows, &matrix, &grad, &hess);
        let g: f64 = rows.iter().map(|&r| grad[r as usize]).sum();
        let h: f64 = rows.iter().map(|&r| hess[r as usize]).sum();
        for f in 0..matrix.n_features() {
            let total = hist.feature_total(f);
            assert!((total.grad - g).abs() < 1e-9);
            assert!((total.hess - h).abs() < 1e-9);
            assert_eq!(total.count as usize, rows.len());
        }
    }

    #[test]
    fn sibling_subtraction_matches_direct() {
        let (matrix, grad, hess) = random_instance(500, 3);
        let all: Vec<u32> = (0..500).collect();
        let (left, right): (Vec<u32>, Vec<u32>) = all.iter().partition(|&&r| grad[r as usize] < 0.1);
        let parent = Histogram::build(&all, &matrix, &grad, &hess);
        let left_hist = Histogram::build(&left, &matrix, &grad, &hess);
        let direct = Histogram::build(&right, &matrix, &grad, &hess);
        let derived = left_hist.sibling_of(&parent);
        for (a, b) in derived.features.iter().flatten().zip(direct.features.iter().flatten()) {
            assert!((a.grad - b.grad).abs() < 1e-9);
            assert!((a.hess - b.hess).abs() < 1e-9);
            assert_eq!(a.count, b.count);
        }
    }
}
