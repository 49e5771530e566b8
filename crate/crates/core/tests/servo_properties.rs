use opo_core::noise::NoiseBudget;
use opo_core::series::variance;
use opo_core::servo::{mean_locked_range, run, ElectroOpticLoop, RunConfig, RunMode};
use opo_core::Execution;

/// Noise budget with everything silenced except what the closure enables.
fn only(f: impl Fn(&mut NoiseBudget)) -> RunConfig {
    let mut cfg = RunConfig::paper(10.0);
    cfg.noise = NoiseBudget::quiet();
    f(&mut cfg.noise);
    // Ideal discriminator: isolates the loop's response to the plant noise.
    cfg.servo.error_signal_snr = 1e12;
    cfg
}

fn variances(cfg: &RunConfig, seed: u64) -> [(f64, f64); 2] {
    [RunMode::Locked, RunMode::Free].map(|mode| {
        let ts = run(cfg, mode, seed).unwrap();
        (variance(&ts.nu_plus_detuning), variance(&ts.nu_minus))
    })
}

#[test]
fn loop_suppresses_in_band_length_noise() {
    let cfg = only(|n| {
        n.length_sigma = 0.01e-9;
        n.length_bandwidth = 300.0;
    });
    for seed in [1, 2, 3] {
        let [(locked, _), (free, _)] = variances(&cfg, seed);
        assert!(free > 0.0);
        assert!(locked <= 0.1 * free, "seed {seed}: locked {locked:.3e} free {free:.3e}");
    }
}

#[test]
fn length_servo_barely_touches_the_beat() {
    let cfg = only(|n| {
        for line in &mut n.vibration_lines {
            line.amplitude = 1e-7;
        }
    });
    for seed in [4, 5] {
        let [(lp, lm), (fp, fm)] = variances(&cfg, seed);
        let plus_ratio = lp / fp;
        let minus_ratio = lm / fm;
        assert!(minus_ratio > 0.8, "seed {seed}: nu_minus ratio {minus_ratio}");
        assert!(
            minus_ratio >= 10.0 * plus_ratio,
            "seed {seed}: {minus_ratio} vs {plus_ratio}"
        );
    }
}

#[test]
fn electro_optic_loop_narrows_the_beat() {
    let base = RunConfig::paper(10.0);
    let mut eo = base.clone();
    eo.servo.electro_optic = Some(ElectroOpticLoop::default());
    for seed in [6, 7, 8] {
        let a = run(&base, RunMode::Locked, seed).unwrap().nu_minus_range();
        let b = run(&eo, RunMode::Locked, seed).unwrap().nu_minus_range();
        assert!(b < a, "seed {seed}: with loop {b:.0} Hz, without {a:.0} Hz");
    }
}

#[test]
fn locked_range_grows_with_vibration() {
    let base = RunConfig::paper(5.0);
    let seeds = [11, 12, 13];
    let ranges: Vec<f64> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&s| {
            let mut c = base.clone();
            c.noise = base.noise.with_vibration_scale(s);
            mean_locked_range(&c, &seeds, Execution::Sequential).unwrap()
        })
        .collect();
    assert!(ranges.windows(2).all(|w| w[1] > w[0]), "{ranges:?}");
}

#[test]
fn runs_are_bit_identical_and_policy_independent() {
    let cfg = RunConfig::paper(2.0);
    let a = run(&cfg, RunMode::Locked, 42).unwrap();
    let b = run(&cfg, RunMode::Locked, 42).unwrap();
    assert_eq!(a, b);
    let c = run(&cfg, RunMode::Locked, 43).unwrap();
    assert_ne!(a.nu_minus, c.nu_minus);
    let seeds = [1, 2, 3, 4];
    let s = mean_locked_range(&cfg, &seeds, Execution::Sequential).unwrap();
    let p = mean_locked_range(&cfg, &seeds, Execution::Parallel).unwrap();
    assert_eq!(s.to_bits(), p.to_bits());
}

#[test]
fn free_run_wanders_far_more_than_locked() {
    let cfg = RunConfig::paper(60.0);
    let locked = run(&cfg, RunMode::Locked, 9).unwrap();
    let free = run(&cfg, RunMode::Free, 9).unwrap();
    assert!(free.nu_minus_range() > 4.0 * locked.nu_minus_range());
    assert_eq!(locked.hop_count(), 0);
}
