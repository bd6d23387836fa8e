use spinread::detection::normal_cdf;
use spinread::pipeline::*;
use spinread::SpinState;

fn config(n: usize) -> ProtocolConfig {
    ProtocolConfig {
        n_trials: n,
        ..Default::default()
    }
}

fn fidelity(cfg: &ProtocolConfig) -> FidelityReport {
    let r = run_protocol(cfg).unwrap();
    assert_eq!(r.n_failed, 0, "{:?}", r.failures);
    r
}

#[test]
fn reports_are_reproducible() {
    let cfg = config(300);
    let a = run_protocol(&cfg).unwrap();
    let b = run_protocol(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn worker_count_does_not_change_the_report() {
    let cfg = config(200);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_protocol(&cfg).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn spin_down_mirrors_spin_up() {
    let cfg = config(300);
    let p = resolve(&cfg).unwrap();
    let (up, tu) = run_resolved(&p, &cfg, 300, 11, SpinState::UP);
    let (down, td) = run_resolved(&p, &cfg, 300, 11, SpinState::DOWN);
    assert_eq!(up.fidelity, down.fidelity);
    assert_eq!(up.histogram, down.histogram);
    for (u, d) in tu.iter().zip(&td) {
        assert_eq!(u.a0_amp, -d.a0_amp);
        assert_eq!(u.p_correct, d.p_correct);
    }
}

#[test]
fn gradient_free_drive_carries_no_information() {
    let mut cfg = config(4000);
    cfg.drive.gradient = 0.0;
    let r = fidelity(&cfg);
    assert!((r.fidelity - 0.5).abs() < 3.0 * r.fidelity_stderr, "{} ± {}", r.fidelity, r.fidelity_stderr);
}

#[test]
fn cold_harmonic_trap_is_deterministic() {
    let mut cfg = config(50);
    cfg.trap = TrapConfig::Harmonic {};
    cfg.cooling.scheme = None;
    cfg.cooling.t0 = Some(1e-6);
    let p = resolve(&cfg).unwrap();
    let (r, trials) = run_resolved(&p, &cfg, 50, 3, SpinState::UP);
    assert!((r.fidelity - normal_cdf(6.05)).abs() < 1e-6, "{}", r.fidelity);
    // the residual spread is the 1 μK thermal width against the driven amplitude
    let spread = 6.0 * spinread::dynamics::thermal_sigma(1e-6, p.omega) / trials[0].after_drive.amplitude();
    let s0 = trials[0].snr;
    for t in &trials {
        assert!((t.snr / s0 - 1.0).abs() < spread, "{} vs {s0}", t.snr);
        assert_eq!(t.p_correct, normal_cdf(t.snr));
    }
}

#[test]
fn default_timing_budget() {
    let t = timing_budget(&ProtocolConfig::default());
    assert!(t.total > 24e-6 && t.total < 25e-6, "{}", t.total);
    assert!(t.cooling < 1e-6 && t.amplification < 1e-6);
    assert_eq!(t.drive, 20e-6);
    assert!(!t.exceeds_budget);
}

#[test]
fn zero_length_stages_take_no_time() {
    let mut cfg = ProtocolConfig::default();
    cfg.cooling.duration = 0.0;
    cfg.drive.t_drive = 0.0;
    cfg.amplification.t_amp = 0.0;
    cfg.detection.gamma_t_det = 0.0;
    assert_eq!(timing_budget(&cfg).total, 0.0);
}

#[test]
fn dilution_refrigerator_variant_is_short() {
    // Skipping cooling at 10 mK shrinks the thermal spread by sqrt(40), so
    // the drive can shrink by the same factor; the amplifier then has to
    // make up that factor in gain.
    let mut cfg = ProtocolConfig::default();
    let k = (0.4f64 / 0.01).sqrt();
    let harmonic_gain = 16.9f64;
    cfg.cooling.scheme = None;
    cfg.cooling.t0 = Some(0.01);
    cfg.cooling.duration = 0.0;
    cfg.drive.t_drive /= k;
    cfg.amplification.t_amp *= 1.0 + k.ln() / harmonic_gain.ln();
    let t = timing_budget(&cfg);
    assert!(t.total > 6e-6 && t.total < 9e-6, "{}", t.total);
    cfg.n_trials = 2000;
    let short = fidelity(&cfg);
    assert!(short.fidelity > 0.99, "{}", short.fidelity);
}

#[test]
fn tiny_budget_is_flagged() {
    let mut cfg = ProtocolConfig::default();
    cfg.coherence_budget = 10e-6;
    assert!(timing_budget(&cfg).exceeds_budget);
}

#[test]
fn disjoint_seed_ranges_agree() {
    let cfg = config(3000);
    let p = resolve(&cfg).unwrap();
    let (a, _) = run_range(&p, &cfg, 0..3000, cfg.master_seed, SpinState::UP);
    let (b, _) = run_range(&p, &cfg, 3000..6000, cfg.master_seed, SpinState::UP);
    let tol = 3.0 * (a.fidelity_stderr.powi(2) + b.fidelity_stderr.powi(2)).sqrt();
    assert!((a.fidelity - b.fidelity).abs() <= tol, "{} vs {} (tol {tol})", a.fidelity, b.fidelity);
}

#[test]
fn trials_are_reproducible_in_isolation() {
    let cfg = config(100);
    let p = resolve(&cfg).unwrap();
    let (_, all) = run_range(&p, &cfg, 0..100, 5, SpinState::UP);
    let single = run_trial(&p, 5, 42, SpinState::UP).unwrap();
    assert_eq!(all[42], single);
}

/// Fidelity along a sweep must not fall (or rise) by more than the noise.
fn assert_monotone(name: &str, sweep: &[FidelityReport], increasing: bool) {
    for w in sweep.windows(2) {
        let slack = 2.0 * (w[0].fidelity_stderr.powi(2) + w[1].fidelity_stderr.powi(2)).sqrt();
        let step = if increasing {
            w[1].fidelity - w[0].fidelity
        } else {
            w[0].fidelity - w[1].fidelity
        };
        assert!(step >= -slack, "{name}: {} then {}", w[0].fidelity, w[1].fidelity);
    }
}

fn sweep(f: impl Fn(&mut ProtocolConfig, f64), values: &[f64]) -> Vec<FidelityReport> {
    values
        .iter()
        .map(|&v| {
            let mut cfg = config(10_000);
            f(&mut cfg, v);
            fidelity(&cfg)
        })
        .collect()
}

#[test]
fn fidelity_grows_with_gradient() {
    let s = sweep(|c, v| c.drive.gradient = v, &[45.0, 70.0, 91.0]);
    assert_monotone("gradient", &s, true);
}

#[test]
fn fidelity_grows_with_gain() {
    let s = sweep(|c, v| c.amplification.epsilon = v, &[0.06, 0.08, 0.1]);
    assert_monotone("epsilon", &s, true);
}

#[test]
fn fidelity_falls_with_initial_temperature() {
    let s = sweep(
        |c, v| {
            c.cooling.scheme = None;
            c.cooling.t0 = Some(v);
        },
        &[0.2, 0.4, 0.8],
    );
    assert_monotone("t0", &s, false);
}

#[test]
fn fidelity_falls_with_electronics_temperature() {
    // with T0 pinned, T_e only enters through the Johnson noise
    let s = sweep(
        |c, v| {
            c.cooling.scheme = None;
            c.cooling.t0 = Some(0.4);
            c.t_e = v;
        },
        &[2.0, 4.0, 8.0],
    );
    assert_monotone("t_e", &s, false);
}

#[test]
fn histogram_conserves_counts() {
    let r = fidelity(&config(500));
    assert_eq!(r.histogram.total(), 500);
    assert_eq!(r.histogram.edges.len(), r.histogram.counts.len() + 1);
    let one = fidelity(&config(1));
    assert_eq!(one.histogram.total(), 1);
    assert_eq!(one.histogram.counts.iter().filter(|c| **c > 0).count(), 1);
    assert!((0.0..=1.0).contains(&r.fidelity));
}

#[test]
fn histogram_csv_reports_cumulative_fractions() {
    let r = fidelity(&config(200));
    let csv = snr_histogram(&r);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "bin_lo,bin_hi,count,cumulative_fraction");
    let last = lines.last().unwrap();
    assert!(last.ends_with(",1"), "{last}");
}

#[test]
fn histogram_edges_align_with_bin_width() {
    let h = Histogram::build(&[-0.3, 0.1, 0.99, 1.0, 2.6], 0.25);
    assert_eq!(h.total(), 5);
    for e in &h.edges {
        assert!((e / 0.25 - (e / 0.25).round()).abs() < 1e-12);
    }
    assert_eq!(Histogram::build(&[], 0.25).total(), 0);
}

#[test]
fn trap_config_is_internally_tagged() {
    let t: TrapConfig = serde_json::from_str(r#"{"kind": "normalized", "c4": 1e-7, "c6": -2e-9}"#).unwrap();
    assert_eq!(t, TrapConfig::Normalized { c4: 1e-7, c6: -2e-9 });
    let h: TrapConfig = serde_json::from_str(r#"{"kind": "harmonic"}"#).unwrap();
    assert_eq!(h, TrapConfig::Harmonic {});
    assert!(serde_json::from_str::<TrapConfig>(r#"{"kind": "harmonic", "c4": 1}"#).is_err());
    assert!(serde_json::from_str::<TrapConfig>(r#"{"kind": "parabolic"}"#).is_err());
}

#[test]
fn config_round_trips_through_json() {
    let cfg = ProtocolConfig::default();
    let text = serde_json::to_string_pretty(&cfg).unwrap();
    let back: ProtocolConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(cfg, back);
    assert!(serde_json::from_str::<ProtocolConfig>(r#"{"omgea": 1}"#).is_err());
}

#[test]
fn inconsistent_cooling_is_rejected() {
    let mut cfg = ProtocolConfig::default();
    cfg.cooling.t0 = Some(1.0);
    assert!(matches!(resolve(&cfg), Err(PipelineError::Config(_))));
    cfg.cooling.t0 = None;
    let derived = cfg.initial_temperature().unwrap();
    assert!((derived - 0.4).abs() < 1e-3, "{derived}");
    cfg.cooling.t0 = Some(derived);
    assert!(resolve(&cfg).is_ok());
    cfg.cooling.scheme = None;
    cfg.cooling.t0 = None;
    assert!(resolve(&cfg).is_err());
}

#[test]
fn invalid_settings_are_rejected() {
    for f in [
        |c: &mut ProtocolConfig| c.n_trials = 0,
        |c: &mut ProtocolConfig| c.omega = -1.0,
        |c: &mut ProtocolConfig| c.schema_version = 99,
        |c: &mut ProtocolConfig| c.detection.resistance = 0.0,
        |c: &mut ProtocolConfig| c.histogram_bin_width = 0.0,
    ] {
        let mut cfg = ProtocolConfig::default();
        f(&mut cfg);
        assert!(resolve(&cfg).is_err());
    }
}

#[test]
fn one_omega_everywhere() {
    let p = resolve(&ProtocolConfig::default()).unwrap();
    assert_eq!(p.integrator.frame_omega, Some(p.omega));
    assert_eq!(p.detection.omega, p.omega);
    assert!((p.amplification_potential.omega / p.omega - 1.0).abs() < 1e-3);
}
