//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers once its assertions hold (run with `--nocapture` to
//! see them).

mod common;

use common::*;
use num_complex::Complex64;
use ofdma_cfo::channel::CfoSet;
use ofdma_cfo::harness::{run_ber_experiment, run_sinr_comparison, RunOptions};
use ofdma_cfo::numerics::{dense_solve, RngStream};
use ofdma_cfo::receiver::{
    build_interference_matrix, default_band_halfwidth, extract_quasi_banded, window_spectrum,
};
use ofdma_cfo::scenario::Scenario;
use ofdma_cfo::solver::{
    complexity_cm, factorize_quasi_banded, solve_quasi_banded, ComplexityParams, Technique,
};
use ofdma_cfo::waveform::{Allocation, AllocationScheme, OfdmaConfig};

/// Off-band relative-energy threshold for the 32-subcarrier heatmap
/// configuration with the receiver window, recorded from this
/// implementation (measured 1.5677e-4).
const LOCALIZATION_THRESHOLD: f64 = 1.8e-4;

fn fig2_allocation() -> (OfdmaConfig, Allocation) {
    let cfg = OfdmaConfig::new(32, 4, 8, 4, 8).unwrap();
    let alloc = Allocation::build(
        AllocationScheme::Generalized,
        &cfg,
        &cfg.all_bins(),
        &RngStream::new(20240901, 0),
    )
    .unwrap();
    (cfg, alloc)
}

#[test]
fn criterion_1_zero_cfo_identity() {
    let mut worst: f64 = 0.0;
    for n in [32usize, 128, 512] {
        for n_w in [8usize, 14, 56] {
            if n_w >= n {
                continue;
            }
            let cfg = OfdmaConfig::new(n, 4, 32.min(n), n_w / 2, n_w).unwrap();
            let alloc = Allocation::build(
                AllocationScheme::Generalized,
                &cfg,
                &cfg.all_bins(),
                &RngStream::new(1, 0),
            )
            .unwrap();
            let lambda =
                build_interference_matrix(&CfoSet::zeros(4), &alloc, &cfg, true).unwrap();
            let mut dev: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let expected = if i == j {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::ZERO
                    };
                    dev = dev.max((lambda.mat[(i, j)] - expected).norm());
                }
            }
            assert!(dev < 1e-12, "n={n} n_w={n_w}: deviation {dev:.3e}");
            worst = worst.max(dev);
        }
    }
    println!("criterion 1 (zero-CFO identity): PASS (max deviation {worst:.3e})");
}

#[test]
fn criterion_2_complexity_ratios() {
    let p8 = ComplexityParams {
        n: 512,
        k: 8,
        d: 10,
        i: 32,
        n_w: 14,
    };
    let ratio8 = complexity_cm(Technique::QuasiBanded, &p8) / complexity_cm(Technique::Cg, &p8);
    assert!(
        (ratio8 - 0.1643).abs() <= 0.005,
        "K=8 cost ratio {ratio8:.4}"
    );
    let p16 = ComplexityParams { k: 16, ..p8 };
    let ratio16 = complexity_cm(Technique::QuasiBanded, &p16) / complexity_cm(Technique::Cg, &p16);
    assert!(
        (ratio16 - 0.0904).abs() <= 0.005,
        "K=16 cost ratio {ratio16:.4}"
    );
    println!(
        "criterion 2 (cost-model ratios): PASS (K=8: {ratio8:.4}, K=16: {ratio16:.4})"
    );
}

#[test]
fn criterion_3_band_halfwidth_rule() {
    assert_eq!(default_band_halfwidth(128, 14), 10);
    assert_eq!(default_band_halfwidth(32, 8), 4);
    println!("criterion 3 (band half-width rule): PASS (128/14 -> 10, 32/8 -> 4)");
}

#[test]
fn criterion_4_window_side_lobes() {
    let n_w = 14usize;
    let t_w = n_w as f64;
    let points = 10_000;
    let mut max_db = f64::NEG_INFINITY;
    for i in 1..=points {
        let x = 1.1 + (20.0 - 1.1) * i as f64 / points as f64;
        let (_, c) = window_spectrum(128, n_w, x / t_w);
        max_db = max_db.max(20.0 * c.log10());
    }
    assert!(max_db < -12.0, "max side lobe {max_db:.2} dB");
    println!("criterion 4 (window side-lobe bound): PASS (max {max_db:.2} dB < -12 dB)");
}

#[test]
fn criterion_5_solver_oracle_equivalence() {
    // 100 seeded diagonally dominant quasi-banded systems.
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let dense = random_quasi_banded_dense(64, 5, seed);
        let qb = extract_quasi_banded(&dense, 5).unwrap();
        let rhs = random_rhs(64, 500 + seed);
        let fact = factorize_quasi_banded(&qb).unwrap();
        let x_struct = solve_quasi_banded(&fact, &rhs).unwrap();
        let x_dense = dense_solve(&qb.to_dense(), &rhs).unwrap();
        worst = worst.max(relative_deviation(&x_struct, &x_dense));
    }
    assert!(worst < 1e-8, "random systems: worst deviation {worst:.3e}");

    // 20 systems built from real interference matrices of the heatmap
    // configuration under fresh CFO draws.
    let (cfg, alloc) = fig2_allocation();
    let d = default_band_halfwidth(cfg.n, cfg.n_w);
    let mut worst_real: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = RngStream::new(seed, 91).rng();
        let cfos = CfoSet::draw_uniform(cfg.users, &mut rng);
        let lambda = build_interference_matrix(&cfos, &alloc, &cfg, true).unwrap();
        let qb = extract_quasi_banded(&lambda.mat, d).unwrap();
        let rhs = random_rhs(cfg.n, 700 + seed);
        let fact = factorize_quasi_banded(&qb).unwrap();
        let x_struct = solve_quasi_banded(&fact, &rhs).unwrap();
        let x_dense = dense_solve(&qb.to_dense(), &rhs).unwrap();
        worst_real = worst_real.max(relative_deviation(&x_struct, &x_dense));
    }
    assert!(
        worst_real < 1e-8,
        "interference-matrix systems: worst deviation {worst_real:.3e}"
    );
    println!(
        "criterion 5 (structured-vs-dense solver equivalence): PASS \
         (random {worst:.3e}, interference {worst_real:.3e})"
    );
}

#[test]
fn criterion_6_ber_curve_shape() {
    let s = Scenario::load(&scenario_path("fig3.scn")).unwrap();
    assert!(
        s.trials * s.bits_per_trial() >= 1_000_000,
        "scenario must carry at least 1e6 bits per point"
    );
    let result = run_ber_experiment(&s, &RunOptions::default()).unwrap();
    let ber_of = |snr: f64, tech: &str| -> f64 {
        result
            .ber
            .iter()
            .find(|p| p.snr_db == snr && p.technique == tech)
            .unwrap_or_else(|| panic!("missing point {snr} {tech}"))
            .ber()
    };

    // (a) windowed quasi-banded tracks the dense full-matrix ZF everywhere.
    let mut worst_ratio: f64 = 0.0;
    for &snr in &s.snr_db {
        let qb = ber_of(snr, "quasi_banded_windowed");
        let dense = ber_of(snr, "direct_zf_windowed");
        assert!(dense > 0.0, "dense ZF has zero errors at {snr} dB");
        let ratio = qb / dense;
        assert!(
            ratio <= 3.0,
            "at {snr} dB: quasi-banded {qb:.3e} vs dense {dense:.3e} (x{ratio:.2})"
        );
        worst_ratio = worst_ratio.max(ratio);
    }

    // (b) the plain banded approximation floors out.
    let floor_ratio = ber_of(35.0, "banded_plain") / ber_of(25.0, "banded_plain");
    assert!(
        floor_ratio > 0.5,
        "banded error floor missing: BER(35)/BER(25) = {floor_ratio:.3}"
    );

    // The dense reference itself detects nearly cleanly at high SNR.
    assert!(
        ber_of(35.0, "direct_zf_windowed") < 1e-3,
        "dense ZF BER at 35 dB: {:.3e}",
        ber_of(35.0, "direct_zf_windowed")
    );

    // (c) curve ordering at 30 dB.
    let bp = ber_of(30.0, "banded_plain");
    let qp = ber_of(30.0, "quasi_banded_plain");
    let bw = ber_of(30.0, "banded_windowed");
    let qw = ber_of(30.0, "quasi_banded_windowed");
    assert!(
        bp >= qp && qp >= bw && bw >= qw,
        "ordering violated at 30 dB: {bp:.3e} / {qp:.3e} / {bw:.3e} / {qw:.3e}"
    );

    println!(
        "criterion 6 (BER curve shape): PASS (worst quasi-banded/dense ratio {worst_ratio:.2}, \
         banded floor ratio {floor_ratio:.2}, 30 dB ordering {bp:.2e} >= {qp:.2e} >= {bw:.2e} >= {qw:.2e})"
    );
}

#[test]
fn criterion_7_localization_contrast() {
    let (cfg, alloc) = fig2_allocation();
    let cfos = CfoSet::new(vec![0.20, -0.35, 0.45, -0.11]);
    let d = default_band_halfwidth(cfg.n, cfg.n_w);
    assert_eq!(d, 4);
    let windowed = build_interference_matrix(&cfos, &alloc, &cfg, true).unwrap();
    let plain = build_interference_matrix(&cfos, &alloc, &cfg, false).unwrap();
    let windowed_energy = off_band_rel_energy(&windowed.mat, d);
    let plain_energy = off_band_rel_energy(&plain.mat, d);
    assert!(
        windowed_energy < LOCALIZATION_THRESHOLD,
        "windowed off-band energy {windowed_energy:.3e}"
    );
    let gap_db = 10.0 * (plain_energy / LOCALIZATION_THRESHOLD).log10();
    assert!(
        gap_db >= 20.0,
        "plain off-band energy {plain_energy:.3e} only {gap_db:.1} dB above threshold"
    );
    println!(
        "criterion 7 (localization contrast): PASS (windowed {windowed_energy:.3e} < \
         {LOCALIZATION_THRESHOLD:.1e}, plain {plain_energy:.3e}, +{gap_db:.1} dB)"
    );
}

#[test]
fn criterion_8_sinr_gap() {
    let s = Scenario::load(&scenario_path("sec5.scn")).unwrap();
    assert_eq!(s.snr_db, vec![25.0]);
    assert_eq!(s.trials, 500);
    let result = run_sinr_comparison(&s, &RunOptions::default()).unwrap();
    let sinr_of = |tech: &str| -> f64 {
        result
            .sinr
            .iter()
            .find(|p| p.technique == tech)
            .unwrap_or_else(|| panic!("missing SINR row {tech}"))
            .sinr_db()
    };
    let qb = sinr_of("quasi_banded_windowed");
    let banded = sinr_of("banded_plain");
    assert!(
        qb - banded >= 5.0,
        "SINR gap {:.2} dB (quasi-banded {qb:.2}, banded {banded:.2})",
        qb - banded
    );
    assert!(
        (25.0 - qb).abs() <= 3.0,
        "windowed quasi-banded SINR {qb:.2} dB not within 3 dB of the 25 dB input SNR"
    );
    println!(
        "criterion 8 (SINR gap): PASS (windowed quasi-banded {qb:.2} dB, plain banded \
         {banded:.2} dB, gap {:.2} dB)",
        qb - banded
    );
}

#[test]
fn criterion_9_determinism() {
    let mut s = Scenario::load(&scenario_path("fig3.scn")).unwrap();
    s.snr_db = vec![5.0]; // cheapest point of the BER scenario
    let first = run_ber_experiment(
        &s,
        &RunOptions {
            workers: 1,
            seed_override: None,
        },
    )
    .unwrap();
    let second = run_ber_experiment(
        &s,
        &RunOptions {
            workers: 4,
            seed_override: None,
        },
    )
    .unwrap();
    assert_eq!(first.ber_csv(), second.ber_csv(), "CSV bytes differ");

    let dir1 = tempfile::tempdir().unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    first.write(dir1.path()).unwrap();
    second.write(dir2.path()).unwrap();
    let bytes1 = std::fs::read(dir1.path().join("ber.csv")).unwrap();
    let bytes2 = std::fs::read(dir2.path().join("ber.csv")).unwrap();
    assert_eq!(bytes1, bytes2);
    println!(
        "criterion 9 (determinism): PASS (1 vs 4 workers, {} identical CSV bytes)",
        bytes1.len()
    );
}
