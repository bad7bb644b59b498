use ctrboost::experiment::{simulate_staleness, DataSource, ExperimentSpec, RetrainPolicy, StalenessSpec};
use ctrboost::gbdt::GbdtConfig;
use ctrboost::synth::SynthSpec;

fn policy_gap(data: SynthSpec, seed: u64) -> f64 {
    let mut exp = ExperimentSpec::new(DataSource::Synthetic(data));
    exp.seed = seed;
    exp.gbdt = GbdtConfig {
        n_trees: 100,
        max_depth: 4,
        early_stopping_rounds: 10,
        ..GbdtConfig::default()
    };
    let report = simulate_staleness(&StalenessSpec::default(), &exp).unwrap();
    let mean = |p| report.series(p).unwrap().mean_auroc(|_| true).unwrap();
    mean(RetrainPolicy::EveryWindow) - mean(RetrainPolicy::Never)
}

#[test]
fn stationary_stream_policies_agree() {
    let gaps: Vec<f64> = (0..3)
        .map(|seed| {
            policy_gap(
                SynthSpec::StationaryStream {
                    n_rows: 20_000,
                    seed: 40 + seed,
                },
                seed,
            )
        })
        .collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    assert!(mean.abs() < 0.02, "stationary gaps {gaps:?}");
}

#[test]
fn drift_stream_never_policy_decays() {
    let gap = policy_gap(
        SynthSpec::DriftStream {
            n_rows: 20_000,
            drift_at: 0.5,
            seed: 41,
        },
        1,
    );
    assert!(gap >= 0.05, "drift gap {gap}");
}

#[test]
fn report_windows_cover_the_stream() {
    let mut exp = ExperimentSpec::new(DataSource::Synthetic(SynthSpec::StationaryStream {
        n_rows: 1003,
        seed: 3,
    }));
    exp.gbdt = GbdtConfig {
        n_trees: 10,
        max_depth: 2,
        early_stopping_rounds: 0,
        ..GbdtConfig::default()
    };
    let spec = StalenessSpec {
        n_windows: 4,
        warmup_windows: 1,
        policies: vec![RetrainPolicy::Never],
        ..Default::default()
    };
    let report = simulate_staleness(&spec, &exp).unwrap();
    assert_eq!(report.windows.iter().map(|w| w.n_rows).sum::<usize>(), 1003);
    assert!(report.windows.windows(2).all(|w| w[0].t_end < w[1].t_start));
    assert_eq!(report.series.len(), 1);
    assert_eq!(report.series[0].points.len(), 3);
}
