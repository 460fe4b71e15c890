//! Cross-checks of the evolution engines against the independent reference
//! implementations.

use ndarray::prelude::*;
use num_complex::Complex64 as C64;

use tempoloop::bath::{eta_coefficients, CorrelationKernel, SpectralDensity, SystemModel};
use tempoloop::feedback::{self, FeedbackConfig, SiteRef};
use tempoloop::oracles;
use tempoloop::tempo::{self, TempoConfig};
use tempoloop::tensor::TruncationPolicy;

fn excited() -> Array2<C64> {
    let mut rho = Array2::<C64>::zeros((2, 2));
    rho[[1, 1]] = C64::new(1.0, 0.0);
    rho
}

fn coherent_half() -> Array2<C64> {
    let mut rho = Array2::<C64>::zeros((2, 2));
    rho[[0, 0]] = C64::new(0.5, 0.0);
    rho[[1, 1]] = C64::new(0.5, 0.0);
    rho[[0, 1]] = C64::new(0.0, 0.5);
    rho[[1, 0]] = C64::new(0.0, -0.5);
    rho
}

fn ohmic_kernel(temperature: f64, alpha: f64) -> CorrelationKernel {
    CorrelationKernel::new(
        temperature,
        SpectralDensity::ohmic(alpha, 2.0),
        400,
        24,
        None,
    )
    .unwrap()
}

#[test]
fn tempo_agrees_with_path_sum_across_memory_depths() {
    let model = SystemModel::two_level(0.0, 0.5);
    let kernel = ohmic_kernel(77.0, 0.1);
    let rho0 = coherent_half();
    for n_c in [1usize, 2, 3] {
        let n_steps = 5usize;
        let table = eta_coefficients(&kernel, 0.1, n_steps, n_c).unwrap();
        let reference = oracles::brute_force_path_sum(&model, &table, rho0.view(), n_steps).unwrap();

        let mut adt = tempo::init(rho0.view()).unwrap();
        let policy = TruncationPolicy::with_cutoff(1e-15).unwrap();
        for n in 1..=n_steps {
            tempo::step(&mut adt, &table, &model, &policy).unwrap();
            let rho = tempo::reduced_state(&adt).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let dev = (rho[[i, j]] - reference[n][[i, j]]).norm();
                    assert!(
                        dev < 1e-10,
                        "n_c={n_c} step {n} element ({i},{j}) deviates by {dev:.2e}"
                    );
                }
            }
        }
    }
}

#[test]
fn tempo_matches_dephasing_solution_on_a_short_run() {
    // Modest configuration; the full sweep sits in the acceptance suite.
    let model = SystemModel::two_level(0.0, 0.0);
    let kernel = CorrelationKernel::new(
        77.0,
        SpectralDensity::super_ohmic_gaussian(0.02, 2.0),
        600,
        24,
        None,
    )
    .unwrap();
    let cfg = TempoConfig {
        dt: 0.1,
        n_c: 20,
        policy: TruncationPolicy::default(),
        total_steps: 30,
    };
    let series = tempo::run(&model, &kernel, &cfg, coherent_half().view()).unwrap();
    for row in &series.rows {
        let reference =
            oracles::ibm_analytic(&kernel, C64::new(0.0, 0.5), row.time).unwrap();
        let engine = C64::new(row.re_rho01, row.im_rho01);
        assert!(
            (engine - reference).norm() < 1e-6,
            "t={}: engine {engine} vs analytic {reference}",
            row.time
        );
    }
}

#[test]
fn tempo_without_coupling_shows_undamped_rabi_oscillations() {
    let model = SystemModel::two_level(0.0, 0.5);
    let kernel =
        CorrelationKernel::new(4.0, SpectralDensity::none(), 32, 8, Some(5.0)).unwrap();
    let cfg = TempoConfig {
        dt: 0.1,
        n_c: 3,
        policy: TruncationPolicy::default(),
        total_steps: 60,
    };
    let mut ground = Array2::<C64>::zeros((2, 2));
    ground[[0, 0]] = C64::new(1.0, 0.0);
    let series = tempo::run(&model, &kernel, &cfg, ground.view()).unwrap();
    for row in &series.rows {
        let expected = (0.5 * row.time).sin().powi(2);
        assert!(
            (row.rho11 - expected).abs() < 1e-10,
            "t={}: {} vs {}",
            row.time,
            row.rho11,
            expected
        );
    }
}

#[test]
fn feedback_chain_matches_dense_liouville_evolution() {
    let mut cfg = FeedbackConfig::new(0.9, 1.2, 2, 0.3);
    cfg.policy = TruncationPolicy::with_cutoff(1e-14).unwrap();
    let steps = 4usize;
    let rho0 = excited();

    let gate = feedback::step_gate(&cfg).unwrap();
    let mut state = feedback::init(rho0.view(), &cfg).unwrap();
    for n in 1..=steps {
        feedback::step(&mut state, &gate, &cfg.policy).unwrap();
        // The reference allocates exactly the bins present after n steps.
        let reference = oracles::dense_liouville_evolution(&cfg, n, rho0.view()).unwrap();

        // Engine sites run (memory bins, processed bins oldest first,
        // system); the oracle puts the system axis between memory and
        // processed bins.
        let dense = state.chain().to_dense().unwrap();
        let n_axes = state.len();
        let mut shape: Vec<usize> = Vec::with_capacity(n_axes);
        for i in 0..n_axes {
            shape.push(state.chain().phys_dim(i));
        }
        let engine_tensor = dense.reshape(&shape).unwrap();
        let mut perm = vec![0usize; n_axes];
        for (dest, item) in perm.iter_mut().enumerate() {
            // dest is the oracle axis; find the engine site holding it.
            *item = if dest < cfg.n_d {
                dest
            } else if dest == cfg.n_d {
                n_axes - 1
            } else {
                dest - 1
            };
        }
        let aligned = engine_tensor.permute(&perm).unwrap();
        let expected = reference.last().unwrap();
        assert_eq!(aligned.len(), expected.len());
        let mut worst = 0.0f64;
        for (a, b) in aligned.values().iter().zip(expected.iter()) {
            worst = worst.max((a - b).norm());
        }
        assert!(worst < 1e-8, "step {n}: max deviation {worst:.2e}");
    }
}

#[test]
fn feedback_population_follows_delayed_amplitude_series() {
    let mut cfg = FeedbackConfig::new(1.1 / 1.2, 1.2, 40, 3.0);
    cfg.policy = TruncationPolicy::with_cutoff(1e-12).unwrap();
    let steps = 2 * cfg.n_d;
    let omega0 = 2.0 * std::f64::consts::PI * cfg.phase / cfg.tau;
    let series = feedback::run(&cfg, steps, None).unwrap();
    for row in &series.rows {
        let amp = oracles::feedback_analytic(cfg.gamma_rate, cfg.tau, omega0, row.time).unwrap();
        let expected = amp.norm_sqr();
        assert!(
            (row.rho11 - expected).abs() < 1e-2,
            "t={}: {} vs {}",
            row.time,
            row.rho11,
            expected
        );
    }
}

#[test]
fn feedback_dephasing_leaves_early_decay_unchanged() {
    let mut with = FeedbackConfig::new(0.9, 1.2, 8, 1.0);
    with.dephasing = 0.4;
    let without = FeedbackConfig::new(0.9, 1.2, 8, 1.0);
    let a = feedback::run(&with, 7, None).unwrap();
    let b = feedback::run(&without, 7, None).unwrap();
    for (ra, rb) in a.rows.iter().zip(b.rows.iter()) {
        assert!(
            (ra.rho11 - rb.rho11).abs() < 1e-8,
            "t={}: {} vs {}",
            ra.time,
            ra.rho11,
            rb.rho11
        );
    }
}

#[test]
fn feedback_trapping_and_its_destruction() {
    // Constructive interference at an integer phase pins the population at
    // the delay-equation plateau; dephasing destroys the trapping; a
    // non-integer phase decays on its own.
    let mut trapped = FeedbackConfig::new(0.9, 1.2, 20, 1.0);
    trapped.policy = TruncationPolicy::with_cutoff(1e-12).unwrap();
    let steps = 12 * trapped.n_d;
    let series = feedback::run(&trapped, steps, None).unwrap();
    let plateau = series.rows.last().unwrap().rho11;
    let reference = oracles::delay_steady_state(0.9, 1.2, 1.0).unwrap();
    assert!(
        (plateau - reference).abs() / reference < 0.02,
        "trapped plateau {plateau} vs delay-equation {reference}"
    );

    let mut dephased = trapped.clone();
    dephased.dephasing = 0.5;
    let series_deph = feedback::run(&dephased, steps, None).unwrap();
    let tail = series_deph.rows.last().unwrap().rho11;
    assert!(
        tail < 0.25 * plateau,
        "dephasing failed to destroy trapping: {tail} vs plateau {plateau}"
    );

    let mut detuned = trapped.clone();
    detuned.phase = 1.17;
    let series_det = feedback::run(&detuned, steps, None).unwrap();
    let tail_det = series_det.rows.last().unwrap().rho11;
    assert!(
        tail_det < 0.3 * plateau,
        "non-integer phase failed to decay: {tail_det}"
    );
}

#[test]
fn feedback_revivals_appear_at_round_trip_multiples() {
    let mut cfg = FeedbackConfig::new(2.5, 1.2, 30, 2.0);
    cfg.policy = TruncationPolicy::with_cutoff(1e-12).unwrap();
    let series = feedback::run(&cfg, 2 * cfg.n_d, None).unwrap();
    // Population decays almost to zero just before the round trip, then
    // revives afterwards.
    let just_before = series.rows[cfg.n_d - 1].rho11;
    let after: f64 = series.rows[cfg.n_d + cfg.n_d / 2].rho11;
    assert!(just_before < 0.01, "pre-revival population {just_before}");
    assert!(
        after > 5.0 * just_before,
        "no revival: {just_before} -> {after}"
    );
}

#[test]
fn feedback_excitation_is_conserved_into_the_bins() {
    let cfg = FeedbackConfig::new(0.9, 1.2, 4, 1.17);
    let gate = feedback::step_gate(&cfg).unwrap();
    let mut state = feedback::init(excited().view(), &cfg).unwrap();
    let mut sigma11 = Array2::<C64>::zeros((2, 2));
    sigma11[[1, 1]] = C64::new(1.0, 0.0);
    for _ in 0..10 {
        feedback::step(&mut state, &gate, &cfg.policy).unwrap();
    }
    let sys = feedback::expectation(&state, SiteRef::System, sigma11.view())
        .unwrap()
        .re;
    let total = feedback::total_excitation(&state).unwrap();
    assert!(sys < 0.9, "population should have left the emitter: {sys}");
    assert!((total - 1.0).abs() < 1e-8, "total excitation {total}");
}

#[test]
fn tempo_memory_depth_deviations_shrink() {
    // Deeper memory windows change the trace less and less.
    let model = SystemModel::two_level(0.0, 0.0);
    let kernel = CorrelationKernel::new(
        4.0,
        SpectralDensity::super_ohmic_gaussian(0.15, 3.0),
        400,
        24,
        None,
    )
    .unwrap();
    let run_nc = |n_c: usize| {
        let cfg = TempoConfig {
            dt: 0.3,
            n_c,
            policy: TruncationPolicy::default(),
            total_steps: 24,
        };
        tempo::run(&model, &kernel, &cfg, coherent_half().view()).unwrap()
    };
    let coherence_dev = |a: &tempoloop::TimeSeries, b: &tempoloop::TimeSeries| {
        a.rows
            .iter()
            .zip(b.rows.iter())
            .map(|(x, y)| {
                ((x.re_rho01 - y.re_rho01).powi(2) + (x.im_rho01 - y.im_rho01).powi(2)).sqrt()
            })
            .fold(0.0f64, f64::max)
    };
    let s2 = run_nc(2);
    let s3 = run_nc(3);
    let s4 = run_nc(4);
    let s5 = run_nc(5);
    let early = coherence_dev(&s2, &s3);
    let late = coherence_dev(&s4, &s5);
    assert!(
        late < early,
        "memory convergence not monotone: dev(2,3)={early:.3e} dev(4,5)={late:.3e}"
    );
}
