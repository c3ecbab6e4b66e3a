//! End-to-end acceptance suite: ten numbered criteria covering categorical
//! exactness, the stopping threshold, PAC error rates, distributional
//! fidelity, the four experiments' orderings, and termination/determinism.
//!
//! Each test asserts its criterion at the stated tolerance and prints one
//! `PASS criterion NN` line; a failed assertion is the corresponding FAIL.
//! Expensive experiment runs are shared between the criteria that examine
//! the same run.

use std::time::{Duration, Instant};

use once_cell::sync::Lazy;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use racing_bandits::harness::{
    summarize, to_csv, AgentSummary, ExperimentConfig, ExperimentId, Overrides, RunResult,
    SENSITIVITY_GRID,
};
use racing_bandits::{
    gumbel_max_select, m_max, race, run_experiment, threshold_beta, FamilyKind, GumbelNoise,
    PosteriorState, PriorSpec, RacingConfig,
};

fn resolve(experiment: ExperimentId, cli: Overrides) -> ExperimentConfig {
    let cli = Overrides {
        experiment: Some(experiment),
        ..cli
    };
    ExperimentConfig::resolve(None, &cli).expect("acceptance config resolves")
}

fn timed_run(config: &ExperimentConfig) -> (RunResult, Duration) {
    let start = Instant::now();
    let result = run_experiment(config).expect("experiment runs");
    (result, start.elapsed())
}

/// Criterion 5/6 run: the conjugate experiment at 20 replications.
static CONJUGATE_RUN: Lazy<(RunResult, Duration)> = Lazy::new(|| {
    let cfg = resolve(
        ExperimentId::Conjugate,
        Overrides {
            replications: Some(20),
            ..Overrides::default()
        },
    );
    timed_run(&cfg)
});

/// Criterion 7/10 run: the full sensitivity grid at its preset scale.
static GRID_RUN: Lazy<(ExperimentConfig, RunResult, Duration)> = Lazy::new(|| {
    let cfg = resolve(ExperimentId::Sensitivity, Overrides::default());
    let (result, elapsed) = timed_run(&cfg);
    (cfg, result, elapsed)
});

fn bands_overlap(a: &AgentSummary, b: &AgentSummary) -> bool {
    a.mean_final_regret - a.half_width <= b.mean_final_regret + b.half_width
        && b.mean_final_regret - b.half_width <= a.mean_final_regret + a.half_width
}

#[test]
fn criterion_01_gumbel_max_exactness() {
    let probs = [0.2, 0.3, 0.5];
    let log_weights: Vec<f64> = probs.iter().map(|p: &f64| p.ln()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let draws = 100_000u64;
    let mut counts = [0u64; 3];
    let start = Instant::now();
    for _ in 0..draws {
        counts[gumbel_max_select(&log_weights, &mut rng).unwrap()] += 1;
    }
    let elapsed = start.elapsed();
    let chi2: f64 = probs
        .iter()
        .zip(&counts)
        .map(|(&p, &c)| {
            let expect = p * draws as f64;
            (c as f64 - expect).powi(2) / expect
        })
        .sum();
    assert!(chi2 < 13.8, "chi-square {chi2} >= 13.8 (counts {counts:?})");
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!(
        "PASS criterion 01: chi-square {chi2:.3} < 13.8 over {draws} selections in {elapsed:?}"
    );
}

#[test]
fn criterion_02_threshold_formula() {
    // High-precision oracle evaluations of the deviation bound.
    let cases = [
        (100.0, 0.1, 0.189_634_005_920_114),
        (1.0, 0.1, 1.231_381_710_915_406_6),
    ];
    for (m, delta, want) in cases {
        let got = threshold_beta(m, delta);
        assert!(
            (got - want).abs() < 1e-5,
            "beta({m}, {delta}) = {got}, want {want}"
        );
    }
    let clamped = threshold_beta(1.0, 0.7);
    assert_eq!(clamped, 0.0, "beta(1, 0.7) must clamp to zero");
    println!(
        "PASS criterion 02: beta(100,0.1)={:.6}, beta(1,0.1)={:.6} within 1e-5; beta(1,0.7)=0",
        threshold_beta(100.0, 0.1),
        threshold_beta(1.0, 0.1)
    );
}

#[test]
fn criterion_03_pac_stopping() {
    // Static race: flat prior over [0,1]^3, proposals Beta(3,2), Beta(2,2),
    // Beta(2,3). Oracle per-arm win probabilities under the proposal come
    // from a 10^7-sample Monte Carlo evaluation (standard error 1.6e-4).
    const ORACLE_P: [f64; 3] = [0.535_894, 0.314_069, 0.150_036];
    let prior = PriorSpec::uniform_box(&[(0.0, 1.0); 3]).unwrap();
    let mut proposal = PosteriorState::new(FamilyKind::Bernoulli, 3).unwrap();
    for (arm, successes, failures) in [(0, 2, 1), (1, 1, 1), (2, 1, 2)] {
        for _ in 0..successes {
            proposal.update(arm, 1.0).unwrap();
        }
        for _ in 0..failures {
            proposal.update(arm, 0.0).unwrap();
        }
    }
    let (delta, sigma) = (0.05, 0.1);
    let config = RacingConfig::new(delta, sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let runs = 1000;
    let mut bad = 0;
    let start = Instant::now();
    for _ in 0..runs {
        let noise = GumbelNoise::draw(3, &mut rng);
        let out = race(&prior, &proposal, &noise, &config, &mut rng).unwrap();
        // With a flat prior the race's target values are exactly
        // exp(noise_i) * P_i; the returned arm is sigma-bad when it trails
        // the best target by more than sigma.
        let values: Vec<f64> = noise
            .values()
            .iter()
            .zip(&ORACLE_P)
            .map(|(&e, &p)| e.exp() * p)
            .collect();
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if values[out.chosen_arm] < best - sigma {
            bad += 1;
        }
    }
    let elapsed = start.elapsed();
    // Theorem bound: P(sigma-bad) <= K * delta = 0.15.
    assert!(
        bad <= 150,
        "{bad} of {runs} races returned a sigma-bad arm (bound 150)"
    );
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    println!(
        "PASS criterion 03: {bad}/{runs} sigma-bad returns <= 150 (K*delta bound) in {elapsed:?}"
    );
}

fn race_frequency(arm0_obs: &[f64], n_races: usize, seed: u64) -> f64 {
    let prior = PriorSpec::uniform_box(&[(0.0, 1.0); 2]).unwrap();
    let mut proposal = PosteriorState::new(FamilyKind::Bernoulli, 2).unwrap();
    for &x in arm0_obs {
        proposal.update(0, x).unwrap();
    }
    let config = RacingConfig::new(0.01, 0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut wins = 0usize;
    for _ in 0..n_races {
        let noise = GumbelNoise::draw(2, &mut rng);
        let out = race(&prior, &proposal, &noise, &config, &mut rng).unwrap();
        if out.chosen_arm == 0 {
            wins += 1;
        }
    }
    wins as f64 / n_races as f64
}

#[test]
fn criterion_04_distributional_fidelity() {
    let n = 10_000;
    // Proposals Beta(2,1) vs Beta(1,1): P(mu_0 > mu_1) = 2/3 by the double
    // integral of 2x over {x > y} on the unit square.
    let freq = race_frequency(&[1.0], n, 404);
    let want = 2.0 / 3.0;
    assert!(
        (freq - want).abs() <= 0.02,
        "asymmetric frequency {freq} vs {want} +- 0.02"
    );
    // Symmetric Beta(1,1) proposals: exactly 1/2 by exchangeability.
    let sym = race_frequency(&[], n, 405);
    assert!(
        (sym - 0.5).abs() <= 0.02,
        "symmetric frequency {sym} vs 0.5 +- 0.02"
    );
    println!(
        "PASS criterion 04: selection frequencies {freq:.4} (target 2/3) and {sym:.4} \
         (target 1/2) within 0.02 over {n} decisions"
    );
}

#[test]
fn criterion_05_conjugate_parity() {
    let (result, elapsed) = &*CONJUGATE_RUN;
    let summaries = summarize(result);
    let vanilla = &summaries[0];
    let racing = &summaries[1];
    assert_eq!(vanilla.agent, "vanilla-ts");
    assert!(racing.agent.starts_with("racing-ts"));
    let rel =
        (racing.mean_final_regret - vanilla.mean_final_regret).abs() / vanilla.mean_final_regret;
    assert!(
        rel <= 0.20,
        "racing {} vs vanilla {}: relative gap {rel:.3} > 20%",
        racing.mean_final_regret,
        vanilla.mean_final_regret
    );
    assert!(
        bands_overlap(racing, vanilla),
        "confidence bands do not overlap: racing {} +- {}, vanilla {} +- {}",
        racing.mean_final_regret,
        racing.half_width,
        vanilla.mean_final_regret,
        vanilla.half_width
    );
    assert!(*elapsed < Duration::from_secs(600), "took {elapsed:?}");
    println!(
        "PASS criterion 05: racing {:.2} within 20% of vanilla {:.2} (gap {:.1}%), bands \
         overlap, run took {elapsed:?}",
        racing.mean_final_regret,
        vanilla.mean_final_regret,
        100.0 * rel
    );
}

#[test]
fn criterion_06_sample_count_magnitude() {
    let (result, _) = &*CONJUGATE_RUN;
    let summaries = summarize(result);
    let racing = &summaries[1];
    let mean_samples = racing
        .mean_samples
        .expect("racing summary reports sample counts");
    assert!(
        (100.0..=1000.0).contains(&mean_samples),
        "mean samples per decision {mean_samples} outside [100, 1000]"
    );
    println!("PASS criterion 06: mean samples per decision {mean_samples:.1} lies in [100, 1000]");
}

/// Grid summaries keyed by (delta index, sigma index).
fn grid_cells(result: &RunResult) -> Vec<Vec<AgentSummary>> {
    let summaries = summarize(result);
    assert_eq!(summaries.len(), 16);
    (0..4)
        .map(|i| (0..4).map(|j| summaries[i * 4 + j].clone()).collect())
        .collect()
}

#[test]
fn criterion_07_sensitivity_trends() {
    let (_, result, elapsed) = &*GRID_RUN;
    let cells = grid_cells(result);
    // Sanity: the roster really is the row-major (delta, sigma) grid.
    for (i, &d) in SENSITIVITY_GRID.iter().enumerate() {
        for (j, &s) in SENSITIVITY_GRID.iter().enumerate() {
            assert!(cells[i][j].agent.contains(&format!("d{d}")));
            assert!(cells[i][j].agent.contains(&format!("s{s}")));
        }
    }
    let samples = |i: usize, j: usize| cells[i][j].mean_samples.expect("racing cell has samples");
    for i in 0..4 {
        for j in 0..3 {
            assert!(
                samples(i, j) + 1e-9 >= samples(i, j + 1),
                "row {i}: samples increase from sigma {} to {}: {} -> {}",
                SENSITIVITY_GRID[j],
                SENSITIVITY_GRID[j + 1],
                samples(i, j),
                samples(i, j + 1)
            );
        }
    }
    for j in 0..4 {
        for i in 0..3 {
            assert!(
                samples(i, j) + 1e-9 >= samples(i + 1, j),
                "column {j}: samples increase from delta {} to {}: {} -> {}",
                SENSITIVITY_GRID[i],
                SENSITIVITY_GRID[i + 1],
                samples(i, j),
                samples(i + 1, j)
            );
        }
    }
    let tight = cells[0][0].mean_final_regret;
    let loose = cells[3][3].mean_final_regret;
    assert!(
        tight <= loose,
        "regret at (0.1,0.1) = {tight} exceeds regret at (0.7,0.7) = {loose}"
    );
    assert!(*elapsed < Duration::from_secs(900), "took {elapsed:?}");
    println!(
        "PASS criterion 07: samples nonincreasing along all rows and columns; regret \
         {tight:.2} at (0.1,0.1) <= {loose:.2} at (0.7,0.7); run took {elapsed:?}"
    );
}

fn ordering_criterion(id: ExperimentId, label: &str) {
    let cfg = resolve(id, Overrides::default());
    assert_eq!(cfg.replications, 50);
    let (result, elapsed) = timed_run(&cfg);
    let summaries = summarize(&result);
    let vanilla = &summaries[0];
    let racing = &summaries[1];
    let smc = &summaries[2];
    assert_eq!(vanilla.agent, "vanilla-ts-beta50-50");
    assert_eq!(smc.agent, "smc-ts");
    assert!(
        racing.mean_final_regret < vanilla.mean_final_regret,
        "racing {} not below mismatched vanilla {}",
        racing.mean_final_regret,
        vanilla.mean_final_regret
    );
    assert!(
        !bands_overlap(racing, vanilla),
        "bands overlap: racing {} +- {}, vanilla {} +- {}",
        racing.mean_final_regret,
        racing.half_width,
        vanilla.mean_final_regret,
        vanilla.half_width
    );
    assert!(
        racing.mean_final_regret <= smc.mean_final_regret,
        "racing {} not <= smc {}",
        racing.mean_final_regret,
        smc.mean_final_regret
    );
    println!(
        "PASS criterion {label}: racing {:.2} < mismatched vanilla {:.2} (bands disjoint) \
         and <= smc {:.2}; run took {elapsed:?}",
        racing.mean_final_regret, vanilla.mean_final_regret, smc.mean_final_regret
    );
}

#[test]
fn criterion_08_nonconjugate_ordering() {
    ordering_criterion(ExperimentId::Nonconjugate, "08");
}

#[test]
fn criterion_09_dependent_ordering() {
    ordering_criterion(ExperimentId::Dependent, "09");
}

#[test]
fn criterion_10_termination_determinism() {
    let (cfg, result, _) = &*GRID_RUN;
    // Per-cell bound: min(m_max(delta, sigma), absolute_cap).
    let mut checked = 0u64;
    for (i, &d) in SENSITIVITY_GRID.iter().enumerate() {
        for (j, &s) in SENSITIVITY_GRID.iter().enumerate() {
            let agent = i * 4 + j;
            let bound = m_max(d, s).min(cfg.absolute_cap);
            for row in result.rows.iter().filter(|r| r.agent == agent) {
                if let Some(n) = row.samples_used {
                    assert!(
                        n <= bound,
                        "agent {agent} (delta {d}, sigma {s}): race used {n} > bound {bound}"
                    );
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 0, "no racing rows found");
    // Same seed, same bytes.
    let rerun = run_experiment(cfg).expect("rerun");
    assert_eq!(
        to_csv(result),
        to_csv(&rerun),
        "rerun with the same seed is not byte-identical"
    );
    println!("PASS criterion 10: {checked} races all within min(m_max, cap); rerun byte-identical");
}
