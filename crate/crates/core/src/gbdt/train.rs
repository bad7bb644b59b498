use std::time::Instant;

use log::{debug, warn};

use super::binning::{fit_features, BinnedMatrix};
use super::loss::{compute_grad_hess, logit, raw_logloss};
use super::model::{Model, PredictMatrix, TrainingMetadata};
use super::tree::{grow_tree, GrowParams};
use super::{CatMode, GbdtConfig};
use crate::data::Dataset;
use crate::encode::{fit_transform, EncoderMode, EncoderSpec};
use crate::error::{Error, Result};

/// The training positive rate is clipped to `[BASE_RATE_CLIP, 1 - BASE_RATE_CLIP]`
/// before taking the log-odds.
pub const BASE_RATE_CLIP: f64 = 1e-6;

/// State reported to a training observer after each iteration.
#[derive(Debug)]
pub struct Progress<'a> {
    /// Trees in the ensemble so far; 0 is the base-score model.
    pub iteration: usize,
    /// Training wall time so far, excluding time spent in the observer.
    pub train_seconds: f64,
    pub train_logloss: f64,
    pub valid_logloss: Option<f64>,
    pub valid_raw: Option<&'a [f64]>,
}

/// Trains a model. `valid` is required when early stopping is enabled.
pub fn train(train: &Dataset, valid: Option<&Dataset>, config: &GbdtConfig) -> Result<Model> {
    train_with_observer(train, valid, config, |_| {})
}

pub fn train_with_observer<F>(
    train: &Dataset,
    valid: Option<&Dataset>,
    config: &GbdtConfig,
    mut observer: F,
) -> Result<Model>
where
    F: FnMut(&Progress<'_>),
{
    config.validate()?;
    if train.n_rows() == 0 {
        return Err(Error::EmptyInput);
    }
    if config.early_stopping_rounds > 0 && valid.is_none_or(|v| v.n_rows() == 0) {
        return Err(Error::InvalidConfig(
            "early stopping requires a non-empty validation set".into(),
        ));
    }
    if config.cat_mode == CatMode::Encoded && train.has_categorical() {
        return Err(Error::InvalidConfig(
            "cat_mode = encoded needs categorical columns encoded first".into(),
        ));
    }

    let mut clock = Instant::now();
    let mut elapsed = 0.0;

    let y = train.target();
    let rate = train.positive_rate();
    if rate == 0.0 || rate == 1.0 {
        warn!("training targets are all one class; base score is clipped");
    }
    let base_score = logit(rate.clamp(BASE_RATE_CLIP, 1.0 - BASE_RATE_CLIP));
    let features = fit_features(train, config.max_bins);
    let matrix = BinnedMatrix::new(train, &features)?;
    let valid_matrix = valid.map(|v| PredictMatrix::new(v, &features)).transpose()?;
    let valid_y = valid.map(|v| v.target());

    let grow = GrowParams {
        max_depth: config.max_depth,
        split: config.split_params(),
    };
    let eta = config.learning_rate;
    let mut raw = vec![base_score; train.n_rows()];
    let mut valid_raw = valid.map(|v| vec![base_score; v.n_rows()]);
    let mut leaf_out = vec![0.0; train.n_rows()];
    let mut trees = Vec::new();
    let mut train_history = vec![raw_logloss(y, &raw)];
    let mut valid_history = Vec::new();
    if let (Some(vy), Some(vr)) = (valid_y, &valid_raw) {
        valid_history.push(raw_logloss(vy, vr));
    }
    let mut best_iteration = 0usize;
    let mut stopped_early = false;

    let mut report = |iteration: usize,
                      elapsed: &mut f64,
                      clock: &mut Instant,
                      train_history: &[f64],
                      valid_history: &[f64],
                      valid_raw: Option<&[f64]>| {
        *elapsed += clock.elapsed().as_secs_f64();
        observer(&Progress {
            iteration,
            train_seconds: *elapsed,
            train_logloss: train_history[iteration],
            valid_logloss: valid_history.get(iteration).copied(),
            valid_raw,
        });
        *clock = Instant::now();
    };
    report(
        0,
        &mut elapsed,
        &mut clock,
        &train_history,
        &valid_history,
        valid_raw.as_deref(),
    );

    let rows: Vec<u32> = (0..train.n_rows() as u32).collect();
    for iteration in 1..=config.n_trees {
        let (grad, hess) = compute_grad_hess(y, &raw);
        let tree = grow_tree(rows.clone(), &matrix, &features, &grad, &hess, &grow, &mut leaf_out);
        for (r, &w) in raw.iter_mut().zip(&leaf_out) {
            *r += eta * w;
        }
        train_history.push(raw_logloss(y, &raw));
        if let (Some(vm), Some(vr), Some(vy)) = (&valid_matrix, valid_raw.as_mut(), valid_y) {
            for (row, r) in vr.iter_mut().enumerate() {
                *r += eta * vm.tree_output(&tree, row);
            }
            let loss = raw_logloss(vy, vr);
            if loss < valid_history[best_iteration] {
                best_iteration = iteration;
            }
            valid_history.push(loss);
        } else {
            best_iteration = iteration;
        }
        trees.push(tree);
        report(
            iteration,
            &mut elapsed,
            &mut clock,
            &train_history,
            &valid_history,
            valid_raw.as_deref(),
        );
        if config.early_stopping_rounds > 0 && iteration - best_iteration >= config.early_stopping_rounds {
            stopped_early = true;
            break;
        }
    }

    let iterations_run = trees.len();
    if config.early_stopping_rounds > 0 {
        trees.truncate(best_iteration);
    } else {
        best_iteration = iterations_run;
    }
    debug!("trained {iterations_run} iterations, kept {}", trees.len());

    Ok(Model {
        config: config.clone(),
        base_score,
        features,
        encoder: None,
        trees,
        metadata: TrainingMetadata {
            seed: config.seed,
            n_train_rows: train.n_rows(),
            n_valid_rows: valid.map_or(0, Dataset::n_rows),
            train_positive_rate: rate,
            iterations_run,
            best_iteration,
            stopped_early,
            train_logloss: train_history,
            valid_logloss: valid_history,
        },
    })
}

/// Encodes (when the encoder mode asks for it) and trains, embedding the
/// fitted encoder in the model. `config.cat_mode` follows the encoder mode.
pub fn fit_pipeline<F>(
    train: &Dataset,
    valid: Option<&Dataset>,
    config: &GbdtConfig,
    encoder: &EncoderSpec,
    observer: F,
) -> Result<Model>
where
    F: FnMut(&Progress<'_>),
{
    let mut config = config.clone();
    if encoder.mode == EncoderMode::NativePassthrough || !train.has_categorical() {
        config.cat_mode = CatMode::Native;
        return train_with_observer(train, valid, &config, observer);
    }
    config.cat_mode = CatMode::Encoded;
    let (encoded_train, fitted) = fit_transform(train, encoder)?;
    let encoded_valid = valid.map(|v| fitted.apply(v)).transpose()?;
    let mut model = train_with_observer(&encoded_train, encoded_valid.as_ref(), &config, observer)?;
    model.encoder = Some(fitted);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbdt::loss::sigmoid;
    use crate::gbdt::tree::{Node, SplitRule};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn no_stop(n_trees: usize) -> GbdtConfig {
        GbdtConfig {
            n_trees,
            early_stopping_rounds: 0,
            ..Default::default()
        }
    }

    fn random_ds(rng: &mut ChaCha8Rng, n: usize) -> Dataset {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let cats: Vec<String> = (0..n).map(|_| format!("c{}", rng.gen_range(0..6))).collect();
        let y = x
            .iter()
            .zip(&cats)
            .map(|(&x, c)| {
                let bump = if c.ends_with('1') || c.ends_with('4') {
                    1.0
                } else {
                    -0.5
                };
                u8::from(rng.gen::<f64>() < sigmoid(x + bump))
            })
            .collect();
        Dataset::builder()
            .numerical("x", x)
            .categorical_values("c", &cats)
            .target("y", y)
            .build()
            .unwrap()
    }

    #[test]
    fn zero_learning_rate_predicts_base_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ds = random_ds(&mut rng, 200);
        let model = train(
            &ds,
            None,
            &GbdtConfig {
                learning_rate: 0.0,
                ..no_stop(5)
            },
        )
        .unwrap();
        let expected = sigmoid(logit(ds.positive_rate()));
        for p in model.predict(&ds).unwrap() {
            assert_eq!(p, expected);
        }
    }

    #[test]
    fn empty_ensemble_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ds = random_ds(&mut rng, 50);
        let model = train(&ds, None, &no_stop(0)).unwrap();
        assert_eq!(model.n_trees(), 0);
        let p = model.predict(&ds).unwrap();
        assert!(p.iter().all(|&v| v == sigmoid(model.base_score)));
    }

    #[test]
    fn training_predictions_match_incremental_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ds = random_ds(&mut rng, 300);
        let mut last = Vec::new();
        let model = train_with_observer(&ds, Some(&ds), &no_stop(15), |p| {
            last = p.valid_raw.unwrap().to_vec();
        })
        .unwrap();
        assert_eq!(model.predict_raw(&ds).unwrap(), last);
    }

    #[test]
    fn hand_traced_stump() {
        // x = [1,2,3,4], y = [0,0,1,1]; base 0, so g = [.5,.5,-.5,-.5], h = .25.
        let ds = Dataset::builder()
            .numerical("x", vec![1.0, 2.0, 3.0, 4.0])
            .target("y", vec![0, 0, 1, 1])
            .build()
            .unwrap();
        let config = GbdtConfig {
            max_depth: 1,
            min_child_weight: 0.0,
            ..no_stop(1)
        };
        let model = train(&ds, None, &config).unwrap();
        assert_eq!(model.base_score, 0.0);
        match &model.trees[0].nodes[0] {
            Node::Split {
                rule: SplitRule::Numeric { threshold, .. },
                ..
            } => assert_eq!(*threshold, 2.5),
            other => panic!("expected a split, got {other:?}"),
        }
        // Leaf weight -G/(H+λ) = ∓1/1.5, scaled by η = 0.1.
        let w = 1.0 / 1.5;
        let expected = [sigmoid(-0.1 * w), sigmoid(-0.1 * w), sigmoid(0.1 * w), sigmoid(0.1 * w)];
        for (p, e) in model.predict(&ds).unwrap().iter().zip(expected) {
            assert!((p - e).abs() < 1e-15);
        }
    }

    #[test]
    fn early_stopping_keeps_best_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tr = random_ds(&mut rng, 300);
        let va = random_ds(&mut rng, 300);
        let config = GbdtConfig {
            n_trees: 300,
            early_stopping_rounds: 5,
            learning_rate: 0.5,
            ..Default::default()
        };
        let model = train(&tr, Some(&va), &config).unwrap();
        let meta = &model.metadata;
        assert!(meta.stopped_early);
        assert_eq!(model.n_trees(), meta.best_iteration);
        let best = meta.valid_logloss[meta.best_iteration];
        assert!(meta.valid_logloss.iter().all(|&l| l >= best));
        let p = model.predict(&va).unwrap();
        let recomputed = crate::metrics::logloss(va.target(), &p, 1e-15).unwrap();
        assert!((recomputed - best).abs() < 1e-9);
    }

    #[test]
    fn early_stopping_requires_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ds = random_ds(&mut rng, 30);
        assert!(matches!(
            train(&ds, None, &GbdtConfig::default()),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn single_class_still_trains() {
        let ds = Dataset::builder()
            .numerical("x", vec![1.0, 2.0, 3.0])
            .target("y", vec![1, 1, 1])
            .build()
            .unwrap();
        let model = train(&ds, None, &no_stop(3)).unwrap();
        assert!(model.base_score.is_finite());
        assert!(model.predict(&ds).unwrap().iter().all(|&p| p > 0.99 && p < 1.0));
    }

    #[test]
    fn encoded_pipeline_embeds_encoder() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ds = random_ds(&mut rng, 200);
        let spec = EncoderSpec::new(EncoderMode::KfoldTarget);
        let model = fit_pipeline(&ds, None, &no_stop(10), &spec, |_| {}).unwrap();
        assert_eq!(model.config.cat_mode, CatMode::Encoded);
        assert!(model.encoder.is_some());
        assert!(model.features.iter().all(|f| !f.is_categorical()));
        let p = model.predict(&ds).unwrap();
        assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
        assert!(train(
            &ds,
            None,
            &GbdtConfig {
                cat_mode: CatMode::Encoded,
                ..no_stop(1)
            }
        )
        .is_err());
    }

    #[test]
    fn unseen_category_takes_default_direction() {
        let ds = Dataset::builder()
            .categorical_values("c", &["a", "a", "b", "b"])
            .target("y", vec![1, 1, 0, 0])
            .build()
            .unwrap();
        let config = GbdtConfig {
            max_depth: 1,
            min_child_weight: 0.0,
            min_category_count: 0,
            ..no_stop(1)
        };
        let model = train(&ds, None, &config).unwrap();
        let Node::Split { default_left, .. } = &model.trees[0].nodes[0] else {
            panic!("expected a split");
        };
        let test = Dataset::builder()
            .categorical_values("c", &["a", "b", "zzz"])
            .target("y", vec![0, 0, 0])
            .build()
            .unwrap();
        let p = model.predict(&test).unwrap();
        assert_ne!(p[0], p[1]);
        let left_is_a = matches!(
            &model.trees[0].nodes[0],
            Node::Split { rule: SplitRule::Categorical { left }, .. } if left == &vec![0]
        );
        let default_side = if *default_left == left_is_a { p[0] } else { p[1] };
        assert_eq!(p[2], default_side);
    }
}
