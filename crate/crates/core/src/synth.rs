//! Seeded synthetic data generators used by tests, benches and the
//! experiment harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::gbdt::sigmoid;

/// Name of the time column in the stream generators.
pub const TIME_COLUMN: &str = "t";

/// A generator selection, usable as the data source of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum SynthSpec {
    CtrClone {
        n_rows: usize,
        #[serde(default = "default_cat_columns")]
        n_categorical: usize,
        #[serde(default)]
        seed: u64,
    },
    LeakageHazard {
        n_rows: usize,
        #[serde(default)]
        seed: u64,
    },
    StationaryStream {
        n_rows: usize,
        #[serde(default)]
        seed: u64,
    },
    DriftStream {
        n_rows: usize,
        /// Fraction of the stream after which the item effects flip.
        #[serde(default = "default_drift_at")]
        drift_at: f64,
        #[serde(default)]
        seed: u64,
    },
    Separable {
        n_rows: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_cat_columns() -> usize {
    10
}

fn default_drift_at() -> f64 {
    0.5
}

impl SynthSpec {
    pub fn generate(&self) -> Dataset {
        match *self {
            SynthSpec::CtrClone {
                n_rows,
                n_categorical,
                seed,
            } => ctr_clone(n_rows, n_categorical, seed),
            SynthSpec::LeakageHazard { n_rows, seed } => leakage_hazard(n_rows, seed),
            SynthSpec::StationaryStream { n_rows, seed } => stationary_stream(n_rows, seed),
            SynthSpec::DriftStream { n_rows, drift_at, seed } => drift_stream(n_rows, drift_at, seed),
            SynthSpec::Separable { n_rows, seed } => separable(n_rows, seed),
        }
    }

    /// The same generator with a different seed.
    pub fn with_seed(&self, seed: u64) -> SynthSpec {
        let mut out = self.clone();
        match &mut out {
            SynthSpec::CtrClone { seed: s, .. }
            | SynthSpec::LeakageHazard { seed: s, .. }
            | SynthSpec::StationaryStream { seed: s, .. }
            | SynthSpec::DriftStream { seed: s, .. }
            | SynthSpec::Separable { seed: s, .. } => *s = seed,
        }
        out
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z * sd
}

fn bernoulli(rng: &mut ChaCha8Rng, logit: f64) -> u8 {
    u8::from(rng.gen::<f64>() < sigmoid(logit))
}

/// One numeric feature, `y = 1` exactly when `x > 0.5`, with a gap
/// around the boundary.
pub fn separable(n_rows: usize, seed: u64) -> Dataset {
    let mut rng = rng(seed);
    let mut x = Vec::with_capacity(n_rows);
    let mut y = Vec::with_capacity(n_rows);
    for i in 0..n_rows {
        let positive = i % 2 == 1;
        let v: f64 = rng.gen_range(0.0..0.4);
        x.push(if positive { 0.6 + v } else { v });
        y.push(u8::from(positive));
    }
    Dataset::builder()
        .numerical("x", x)
        .target("y", y)
        .build()
        .expect("valid toy data")
}

/// XOR on two binary features, with the `(1, 0)` point repeated so the
/// first greedy split has positive gain.
pub fn xor() -> Dataset {
    Dataset::builder()
        .numerical("a", vec![0.0, 0.0, 1.0, 1.0, 1.0])
        .numerical("b", vec![0.0, 1.0, 0.0, 1.0, 0.0])
        .target("y", vec![0, 1, 1, 0, 1])
        .build()
        .expect("valid xor data")
}

/// Mixed numeric and categorical features with a nonlinear logistic label.
pub fn random_classification(n_rows: usize, seed: u64) -> Dataset {
    let mut rng = rng(seed);
    let n_cats = rng.gen_range(2..12);
    let effects: Vec<f64> = (0..n_cats).map(|_| normal(&mut rng, 1.0)).collect();
    let mut x1 = Vec::with_capacity(n_rows);
    let mut x2 = Vec::with_capacity(n_rows);
    let mut cat = Vec::with_capacity(n_rows);
    let mut y = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let a: f64 = rng.gen_range(-2.0..2.0);
        let b = if rng.gen_bool(0.1) {
            f64::NAN
        } else {
            rng.gen_range(-1.0..1.0)
        };
        let c = rng.gen_range(0..n_cats);
        let logit = a * a - 1.0 + effects[c] + if b.is_nan() { 0.5 } else { 2.0 * b };
        x1.push(a);
        x2.push(b);
        cat.push(format!("k{c}"));
        y.push(bernoulli(&mut rng, logit));
    }
    Dataset::builder()
        .numerical("x1", x1)
        .numerical("x2", x2)
        .categorical_values("cat", &cat)
        .target("y", y)
        .build()
        .expect("valid random data")
}

/// CTR-like table: `n_categorical` categorical columns with cardinalities
/// ranging from 4 up to about `n_rows / 50`, additive effects plus one
/// pairwise interaction, base rate around 20%.
pub fn ctr_clone(n_rows: usize, n_categorical: usize, seed: u64) -> Dataset {
    let mut rng = rng(seed);
    let max_card = (n_rows / 50).max(8);
    let cards: Vec<usize> = (0..n_categorical)
        .map(|j| {
            let frac = if n_categorical > 1 {
                j as f64 / (n_categorical - 1) as f64
            } else {
                0.0
            };
            (4.0 * (max_card as f64 / 4.0).powf(frac)).round() as usize
        })
        .collect();
    let effects: Vec<Vec<f64>> = cards
        .iter()
        .map(|&k| (0..k).map(|_| normal(&mut rng, 0.6)).collect())
        .collect();
    let inter_a = cards.first().copied().unwrap_or(1);
    let inter_b = cards.get(1).copied().unwrap_or(1);
    let interaction: Vec<f64> = (0..inter_a * inter_b).map(|_| normal(&mut rng, 0.8)).collect();

    let mut columns: Vec<Vec<String>> = vec![Vec::with_capacity(n_rows); n_categorical];
    let mut dense = Vec::with_capacity(n_rows);
    let mut y = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let codes: Vec<usize> = cards.iter().map(|&k| skewed_index(&mut rng, k)).collect();
        let x: f64 = rng.gen_range(0.0..1.0);
        let mut logit = -1.6 + 0.8 * x;
        for (j, &c) in codes.iter().enumerate() {
            logit += effects[j][c];
            columns[j].push(format!("c{j}_{c}"));
        }
        if n_categorical >= 2 {
            logit += interaction[codes[0] * inter_b + codes[1]];
        }
        dense.push(x);
        y.push(bernoulli(&mut rng, logit));
    }
    let mut builder = Dataset::builder();
    for (j, values) in columns.iter().enumerate() {
        builder = builder.categorical_values(&format!("cat{j}"), values);
    }
    builder
        .numerical("dense", dense)
        .target("click", y)
        .build()
        .expect("valid ctr clone")
}

/// Index in `[0, k)` with a heavier head, roughly like category
/// frequencies in click logs.
fn skewed_index(rng: &mut ChaCha8Rng, k: usize) -> usize {
    let u: f64 = rng.gen();
    ((u * u * k as f64) as usize).min(k - 1)
}

/// Label memorization hazard. The `id` column mixes a head of frequent
/// ids, whose effect enters mostly through an interaction with the binary
/// `ctx` column, with a long tail of rare ids that carry no signal. An
/// in-sample target mean of a rare id leaks that row's own label. `site`
/// and `x` carry ordinary additive signal.
pub fn leakage_hazard(n_rows: usize, seed: u64) -> Dataset {
    let mut rng = rng(seed);
    let n_head = 50;
    let n_tail = (n_rows / 4).max(2);
    let main_effect: Vec<f64> = (0..n_head).map(|_| normal(&mut rng, 0.4)).collect();
    let ctx_effect: Vec<f64> = (0..n_head).map(|_| normal(&mut rng, 1.2)).collect();
    let site_effect: Vec<f64> = (0..10).map(|_| normal(&mut rng, 0.8)).collect();
    let noise = Normal::new(0.0, 1.0).expect("valid normal");

    let mut id = Vec::with_capacity(n_rows);
    let mut ctx = Vec::with_capacity(n_rows);
    let mut site = Vec::with_capacity(n_rows);
    let mut x = Vec::with_capacity(n_rows);
    let mut y = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let c = rng.gen_bool(0.5);
        let s = rng.gen_range(0..10);
        let v: f64 = noise.sample(&mut rng);
        let sign = if c { 1.0 } else { -1.0 };
        let mut logit = -0.5 + site_effect[s] + 0.7 * v;
        if rng.gen_bool(0.6) {
            let i = rng.gen_range(0..n_head);
            logit += main_effect[i] + sign * ctx_effect[i];
            id.push(format!("h{i}"));
        } else {
            id.push(format!("t{}", rng.gen_range(0..n_tail)));
        }
        ctx.push(if c { "a" } else { "b" });
        site.push(format!("s{s}"));
        x.push(v);
        y.push(bernoulli(&mut rng, logit));
    }
    Dataset::builder()
        .categorical_values("id", &id)
        .categorical_values("ctx", &ctx)
        .categorical_values("site", &site)
        .numerical("x", x)
        .target("y", y)
        .build()
        .expect("valid leakage data")
}

fn stream(n_rows: usize, drift_at: Option<f64>, seed: u64) -> Dataset {
    let mut rng = rng(seed);
    let n_items = 40;
    let n_users = 20;
    let item_effect: Vec<f64> = (0..n_items).map(|_| normal(&mut rng, 1.5)).collect();
    let user_effect: Vec<f64> = (0..n_users).map(|_| normal(&mut rng, 0.5)).collect();
    let flip_row = drift_at.map(|f| (f * n_rows as f64).round() as usize);

    let mut t = Vec::with_capacity(n_rows);
    let mut item = Vec::with_capacity(n_rows);
    let mut user = Vec::with_capacity(n_rows);
    let mut y = Vec::with_capacity(n_rows);
    for row in 0..n_rows {
        let i = rng.gen_range(0..n_items);
        let u = rng.gen_range(0..n_users);
        let flipped = flip_row.is_some_and(|f| row >= f);
        let effect = if flipped { -item_effect[i] } else { item_effect[i] };
        t.push(row as f64);
        item.push(format!("item{i}"));
        user.push(format!("user{u}"));
        y.push(bernoulli(&mut rng, -0.3 + effect + user_effect[u]));
    }
    Dataset::builder()
        .numerical(TIME_COLUMN, t)
        .categorical_values("item", &item)
        .categorical_values("user", &user)
        .target("click", y)
        .build()
        .expect("valid stream")
}

/// Time-ordered click stream with a fixed item→click relationship.
pub fn stationary_stream(n_rows: usize, seed: u64) -> Dataset {
    stream(n_rows, None, seed)
}

/// Time-ordered click stream whose item effects change sign after
/// `drift_at · n_rows` events.
pub fn drift_stream(n_rows: usize, drift_at: f64, seed: u64) -> Dataset {
    stream(n_rows, Some(drift_at), seed)
}
