mod common;

use calib_core::analytics::glmm::{write_plot_data, DrawMatrix, IterationEstimate};
use calib_core::analytics::{
    binomial_distribution, binomial_pmf, brute_force_posterior, compare_pre_post, detect_outlier_intervals,
    expected_score, fit_glmm, logistic, logit, simulate_cohort, summarize_scores, CredibleInterval,
    FitReport, FlagRule, GlmmFit, GlmmSpec, GridSpec, LongitudinalDataset, LongitudinalRecord, QuestionTally, ScoreMode,
    SigmaPrior, WidthTransform,
};
use calib_core::{Error, IntervalAnswer, ResponseSheet};
use common::{cheat_scenario, table1, CHEATER};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn dataset(rows: &[(&str, u32, u32)]) -> LongitudinalDataset {
    let records = rows
        .iter()
        .map(|&(s, r, y)| LongitudinalRecord { student_id: s.into(), iteration: r, covered: y, num_scored: 10 })
        .collect();
    LongitudinalDataset::new(records, None).unwrap()
}

#[test]
fn summary_examples() {
    let one = summarize_scores(&[7]).unwrap();
    assert_eq!((one.n, one.mode, one.median, one.mean, one.sd), (1, 7, 7.0, 7.0, 0.0));
    let three = summarize_scores(&[3, 6, 9]).unwrap();
    assert_eq!((three.mode, three.median, three.mean, three.sd), (3, 6.0, 6.0, 3.0));
    assert_eq!(summarize_scores(&[3, 3, 7, 7]).unwrap().mode, 3);
    assert_eq!(three.histogram.iter().sum::<usize>(), 3);
    assert!(matches!(summarize_scores(&[]), Err(Error::Argument(_))));
}

#[test]
fn binomial_examples_and_symmetry() {
    assert_eq!(binomial_pmf(10, 1.0, 10).unwrap(), 1.0);
    assert!((binomial_pmf(10, 0.9, 9).unwrap() - 0.387_420_489).abs() < 1e-12);
    assert!(binomial_pmf(10, 0.5, 11).is_err());
    for n in [1u64, 5, 10, 15, 40] {
        for p in [0.0, 0.05, 0.3, 0.5, 0.77, 0.9, 1.0] {
            let pmf = binomial_distribution(n, p).unwrap();
            assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let mean: f64 = pmf.iter().enumerate().map(|(k, q)| k as f64 * q).sum();
            assert!((mean - n as f64 * p).abs() < 1e-12, "n={n} p={p} mean={mean}");
            for k in 0..=n {
                let mirrored = binomial_pmf(n, 1.0 - p, n - k).unwrap();
                assert!((pmf[k as usize] - mirrored).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn expected_score_examples() {
    assert_eq!(expected_score(10, 0.9).unwrap(), 9.0);
    assert_eq!(expected_score(10, 0.5).unwrap(), 5.0);
    assert_eq!(expected_score(15, 0.9).unwrap(), 13.5);
}

#[test]
fn logistic_inverts_logit() {
    let mut ps: Vec<f64> = (0..=2000).map(|i| 1e-9 + (1.0 - 2e-9) * i as f64 / 2000.0).collect();
    ps.extend((0..=90).map(|i| 10f64.powf(-9.0 + i as f64 / 10.0)));
    ps.extend((0..=90).map(|i| 1.0 - 10f64.powf(-9.0 + i as f64 / 10.0)));
    for p in ps.into_iter().filter(|p| (1e-9..=1.0 - 1e-9).contains(p)) {
        assert!((logistic(logit(p)) - p).abs() < 1e-12, "p = {p}");
    }
}

#[test]
fn cheat_detector_flags_only_the_gamer() {
    let bank = table1();
    let flags = detect_outlier_intervals(&cheat_scenario(&bank, false), &bank, FlagRule::default()).unwrap();
    assert_eq!(flags.len(), 1);
    assert_eq!(flags[0].student_id, CHEATER);
    assert_eq!(flags[0].flagged_questions.len(), 9);
    assert!(flags[0].flagged_questions.iter().all(|(_, z)| *z > 2.0));

    let equal = detect_outlier_intervals(&cheat_scenario(&bank, true), &bank, FlagRule::default()).unwrap();
    assert!(equal.is_empty());
    let never = FlagRule { z_threshold: f64::INFINITY, ..FlagRule::default() };
    assert!(detect_outlier_intervals(&cheat_scenario(&bank, false), &bank, never).unwrap().is_empty());
}

#[test]
fn cheat_detector_rejects_bad_rules_and_thin_data() {
    let bank = table1();
    let sheets = cheat_scenario(&bank, false);
    let zero_z = FlagRule { z_threshold: 0.0, ..FlagRule::default() };
    assert!(matches!(detect_outlier_intervals(&sheets, &bank, zero_z), Err(Error::Argument(_))));
    let zero_count = FlagRule { count_threshold: 0, ..FlagRule::default() };
    assert!(matches!(detect_outlier_intervals(&sheets, &bank, zero_count), Err(Error::Argument(_))));
    assert!(detect_outlier_intervals(&sheets[..1], &bank, FlagRule::default()).is_err());
}

#[test]
fn shifting_one_question_leaves_flags_unchanged() {
    let bank = table1();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let sheets: Vec<ResponseSheet> = (0..12)
            .map(|s| {
                let answers = bank
                    .questions()
                    .iter()
                    .map(|q| {
                        let lo = rng.random_range(-50i32..50) as f64;
                        let w = if rng.random_bool(0.15) { rng.random_range(1000..100_000) } else { rng.random_range(0..40) };
                        IntervalAnswer::new(&q.id, lo, lo + w as f64).unwrap()
                    })
                    .collect();
                ResponseSheet::new(format!("s{s}"), answers).unwrap()
            })
            .collect();
        let target = bank.questions()[rng.random_range(0..bank.len())].id.clone();
        let shift = rng.random_range(-1000i32..1000) as f64;
        let shifted: Vec<ResponseSheet> = sheets
            .iter()
            .map(|sheet| {
                let answers = sheet
                    .answers()
                    .iter()
                    .map(|a| {
                        let c = if a.question_id == target { shift } else { 0.0 };
                        IntervalAnswer::new(&a.question_id, a.lower + c, a.upper + c).unwrap()
                    })
                    .collect();
                ResponseSheet::new(sheet.student_id.clone(), answers).unwrap()
            })
            .collect();
        for transform in [WidthTransform::Raw, WidthTransform::Log] {
            let rule = FlagRule { z_threshold: 1.5, count_threshold: 2, transform };
            assert_eq!(
                detect_outlier_intervals(&sheets, &bank, rule).unwrap(),
                detect_outlier_intervals(&shifted, &bank, rule).unwrap()
            );
        }
    }
}

#[test]
fn pre_post_edge_cases() {
    let tallies = vec![QuestionTally::new("a", 3, 10), QuestionTally::new("b", 7, 7)];
    let same = compare_pre_post(&tallies, &tallies).unwrap();
    assert!(same.per_question.iter().all(|r| r.pre_percent == r.post_percent));
    assert_eq!(same.pre_average, same.post_average);
    let other = vec![QuestionTally::new("a", 3, 10), QuestionTally::new("c", 7, 7)];
    assert!(matches!(compare_pre_post(&tallies, &other), Err(Error::Validation(_))));
    assert!(compare_pre_post(&[QuestionTally::new("a", 1, 0)], &[QuestionTally::new("a", 1, 1)]).is_err());
}

/// A fit holding hand-picked draws of `alpha[1]` and `sigma` in one chain.
fn synthetic_fit(alpha: &[f64], sigma: &[f64]) -> GlmmFit {
    let values = vec![alpha.iter().zip(sigma).flat_map(|(&a, &s)| [a, s]).collect()];
    let typical = CredibleInterval::from_draws(alpha.iter().map(|&a| 10.0 * logistic(a)).collect());
    GlmmFit {
        spec: GlmmSpec::default(),
        iterations: 1,
        students: Vec::new(),
        draws: DrawMatrix { names: vec!["alpha[1]".into(), "sigma".into()], values },
        per_iteration: vec![IterationEstimate { iteration: 1, interval: typical }],
        sigma: CredibleInterval::from_draws(sigma.to_vec()),
        diagnostics: Vec::new(),
        converged: true,
        warnings: Vec::new(),
    }
}

#[test]
fn population_mode_collapses_to_typical_without_spread() {
    let alpha: Vec<f64> = (0..50).map(|i| -2.0 + 0.08 * i as f64).collect();
    let fit = synthetic_fit(&alpha, &[0.0; 50]);
    assert_eq!(
        fit.marginal_expected_score(1, ScoreMode::Population).unwrap(),
        fit.marginal_expected_score(1, ScoreMode::Typical).unwrap()
    );

    let fixed = synthetic_fit(&[logit(0.6); 20], &[0.0; 20]);
    for mode in [ScoreMode::Typical, ScoreMode::Population] {
        let ci = fixed.marginal_expected_score(1, mode).unwrap();
        assert!((ci.median - 6.0).abs() < 1e-12);
        assert_eq!(ci.ci_upper - ci.ci_lower, 0.0);
    }
    assert!(matches!(fixed.marginal_expected_score(2, ScoreMode::Typical), Err(Error::Argument(_))));
    assert!(fixed.marginal_expected_score(0, ScoreMode::Typical).is_err());
}

#[test]
fn population_mode_matches_monte_carlo() {
    let alpha = [-1.2, -0.4, 0.0, 0.3, 0.7, 1.1, 1.6, 2.2, -2.0];
    let sigma = [0.3, 1.0, 2.0, 0.8, 1.5, 0.1, 1.2, 0.6, 1.8];
    let fit = synthetic_fit(&alpha, &sigma);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let samples = 1_000_000;
    let mc: Vec<f64> = alpha
        .iter()
        .zip(&sigma)
        .map(|(&a, &s)| {
            let total: f64 = (0..samples).map(|_| logistic(a + s * rng.sample::<f64, _>(StandardNormal))).sum();
            10.0 * total / samples as f64
        })
        .collect();
    let oracle = CredibleInterval::from_draws(mc);
    let quad = fit.marginal_expected_score(1, ScoreMode::Population).unwrap();
    assert!((quad.median - oracle.median).abs() < 0.01, "{quad:?} vs {oracle:?}");
    assert!((quad.ci_lower - oracle.ci_lower).abs() < 0.01);
    assert!((quad.ci_upper - oracle.ci_upper).abs() < 0.01);
}

fn summaries(fit: &GlmmFit) -> (Vec<IterationEstimate>, CredibleInterval) {
    (fit.per_iteration.clone(), fit.sigma)
}

#[test]
fn fit_ignores_labels_and_record_order() {
    let data = simulate_cohort(6, &[logit(0.4), logit(0.55), logit(0.6)], 0.8, 10, 3).unwrap();
    let spec = GlmmSpec::with_seed(17);
    let base = fit_glmm(&data, &spec).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut records: Vec<LongitudinalRecord> = data
        .records()
        .iter()
        .map(|r| LongitudinalRecord { student_id: format!("renamed-{}", r.student_id.chars().rev().collect::<String>()), ..r.clone() })
        .collect();
    records.shuffle(&mut rng);
    let relabeled = LongitudinalDataset::new(records, Some(data.iterations())).unwrap();
    let other = fit_glmm(&relabeled, &spec).unwrap();

    assert_eq!(summaries(&base), summaries(&other));
    assert_eq!(base.draws.values, other.draws.values);
}

#[test]
fn fit_is_deterministic_per_seed() {
    let data = simulate_cohort(5, &[0.0, 0.5], 1.0, 10, 8).unwrap();
    let a = fit_glmm(&data, &GlmmSpec::with_seed(5)).unwrap();
    let b = fit_glmm(&data, &GlmmSpec::with_seed(5)).unwrap();
    let c = fit_glmm(&data, &GlmmSpec::with_seed(6)).unwrap();
    assert_eq!(a.draws, b.draws);
    assert_ne!(a.draws, c.draws);
}

#[test]
fn fit_rejects_empty_data_and_single_chain() {
    let empty = LongitudinalDataset::new(Vec::new(), Some(1)).unwrap();
    assert!(fit_glmm(&empty, &GlmmSpec::default()).is_err());
    let data = dataset(&[("a", 1, 4)]);
    let one_chain = GlmmSpec { chains: 1, ..GlmmSpec::default() };
    assert!(matches!(fit_glmm(&data, &one_chain), Err(Error::Argument(_))));
}

#[test]
fn single_student_fit_warns() {
    let fit = fit_glmm(&dataset(&[("solo", 1, 5)]), &GlmmSpec::with_seed(2)).unwrap();
    assert!(fit.warnings.iter().any(|w| w.contains("one student")));
}

/// Posterior of one pooled logistic coefficient by a fine 1-D midpoint rule.
fn pooled_posterior_scores(successes: u32, trials: u32, prior_sd: f64) -> CredibleInterval {
    let (lo, hi, n) = (-12.0, 12.0, 48_000);
    let h = (hi - lo) / n as f64;
    let grid: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let a: f64 = lo + (i as f64 + 0.5) * h;
            let p: f64 = 1.0 / (1.0 + (-a).exp());
            let log_post = -0.5 * (a / prior_sd).powi(2) + successes as f64 * p.ln() + (trials - successes) as f64 * (1.0 - p).ln();
            (a, log_post)
        })
        .collect();
    let peak = grid.iter().map(|g| g.1).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = grid.iter().map(|g| (g.1 - peak).exp()).collect();
    let total: f64 = weights.iter().sum();
    let quantile = |q: f64| {
        let mut acc = 0.0;
        for (g, w) in grid.iter().zip(&weights) {
            acc += w / total;
            if acc >= q {
                return 10.0 / (1.0 + (-g.0).exp());
            }
        }
        10.0
    };
    CredibleInterval { median: quantile(0.5), ci_lower: quantile(0.05), ci_upper: quantile(0.95) }
}

#[test]
fn zero_spread_reduces_to_pooled_logistic_regression() {
    let rows = [
        ("a", 1, 3), ("b", 1, 5), ("c", 1, 4), ("d", 1, 2),
        ("a", 2, 6), ("b", 2, 8), ("c", 2, 5), ("d", 2, 7),
    ];
    let data = dataset(&rows);
    let spec = GlmmSpec { sigma_prior: SigmaPrior::Fixed { value: 0.0 }, ..GlmmSpec::with_seed(31) };
    let fit = fit_glmm(&data, &spec).unwrap();
    for (r, successes) in [(1u32, 14u32), (2, 26)] {
        let oracle = pooled_posterior_scores(successes, 40, 2.5);
        let got = fit.per_iteration[r as usize - 1].interval;
        assert!((got.median - oracle.median).abs() < 0.1, "round {r}: {got:?} vs {oracle:?}");
        assert!((got.ci_lower - oracle.ci_lower).abs() < 0.15, "round {r}: {got:?} vs {oracle:?}");
        assert!((got.ci_upper - oracle.ci_upper).abs() < 0.15, "round {r}: {got:?} vs {oracle:?}");
    }
    assert!(fit.sigma_draws().iter().all(|&s| s == 0.0));
}

#[test]
fn one_middling_record_tightens_alpha_around_zero() {
    let data = dataset(&[("solo", 1, 5)]);
    let spec = GlmmSpec::with_seed(12);
    let fit = fit_glmm(&data, &spec).unwrap();
    let alpha = fit.alpha_draws(1).unwrap();
    let mean = alpha.iter().sum::<f64>() / alpha.len() as f64;
    let sd = (alpha.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (alpha.len() - 1) as f64).sqrt();
    assert!(sd < 0.75 * spec.alpha_prior_scale, "posterior sd {sd}");
    let ci = CredibleInterval::from_draws(alpha);
    assert!(ci.median.abs() < 0.2);

    let grid = brute_force_posterior(&data, &spec, &GridSpec::default()).unwrap();
    assert!(grid.alpha[0].median.abs() < 0.1);
    assert!(grid.alpha[0].q95 - grid.alpha[0].q05 < 2.0 * 1.645 * spec.alpha_prior_scale);
}

#[test]
fn grid_oracle_examples() {
    let spec = GlmmSpec::default();
    let perfect = brute_force_posterior(&dataset(&[("s", 1, 10)]), &spec, &GridSpec::default()).unwrap();
    assert!(perfect.success_probability[0].median > 0.8);
    assert!((perfect.total_mass - 1.0).abs() < 1e-9);
    for marginal in &perfect.alpha_marginals {
        assert!((marginal.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    let flat = brute_force_posterior(&dataset(&[("s", 1, 5), ("s", 2, 5)]), &spec, &GridSpec::coarse()).unwrap();
    let step = (GridSpec::coarse().alpha_max - GridSpec::coarse().alpha_min) / GridSpec::coarse().alpha_points as f64;
    assert!((flat.alpha[0].median - flat.alpha[1].median).abs() <= step);

    let too_big = dataset(&[("s", 1, 5), ("s", 2, 5), ("s", 3, 5)]);
    assert!(brute_force_posterior(&too_big, &spec, &GridSpec::default()).is_err());
}

#[test]
fn all_nines_land_near_nine() {
    let rows: Vec<(String, u32, u32)> = (0..20).map(|i| (format!("s{i:02}"), 1, 9)).collect();
    let borrowed: Vec<(&str, u32, u32)> = rows.iter().map(|(s, r, y)| (s.as_str(), *r, *y)).collect();
    let data = dataset(&borrowed);
    let fit = fit_glmm(&data, &GlmmSpec::with_seed(99)).unwrap();
    let median = fit.per_iteration[0].interval.median;
    assert!((8.5..=9.3).contains(&median), "median {median}");
    let grid = brute_force_posterior(&data, &GlmmSpec::default(), &GridSpec::default()).unwrap();
    assert!((8.5..=9.3).contains(&(10.0 * grid.success_probability[0].median)));
}

#[test]
fn report_and_plot_outputs_have_the_documented_shape() {
    let data = dataset(&[("a", 1, 3), ("b", 1, 5), ("a", 2, 6), ("c", 2, 7)]);
    let fit = fit_glmm(&data, &GlmmSpec::with_seed(3)).unwrap();
    for est in &fit.per_iteration {
        let ci = est.interval;
        assert!(0.0 <= ci.ci_lower && ci.ci_lower <= ci.median && ci.median <= ci.ci_upper && ci.ci_upper <= 10.0);
    }

    let report = serde_json::to_value(FitReport::new(&fit, ScoreMode::Typical).unwrap()).unwrap();
    let first = &report["per_iteration"][0];
    for key in ["iteration", "median", "ci_lower", "ci_upper"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
    assert!(report["diagnostics"]["max_rhat"].is_number());
    assert!(report["diagnostics"]["min_ess"].is_number());
    assert!(report["sigma"]["median"].is_number());
    assert_eq!(report["spec"]["chains"], 4);

    let (mut students, mut rounds) = (Vec::new(), Vec::new());
    write_plot_data(&data, &fit, ScoreMode::Population, &mut students, &mut rounds).unwrap();
    let students = String::from_utf8(students).unwrap();
    let rounds = String::from_utf8(rounds).unwrap();
    assert_eq!(students.lines().next(), Some("student_id,iteration,score"));
    assert_eq!(students.lines().count(), 5);
    assert_eq!(rounds.lines().next(), Some("iteration,mean,posterior_median,ci_lower,ci_upper"));
    assert!(rounds.lines().nth(1).unwrap().starts_with("1,4.0,"));
}
