use hctc_core::decoder::{Algorithm, DecodeConfig};
use hctc_core::modem::{ChannelKind, FadingGranularity, ModemConfig};
use hctc_core::numeric::q_function;
use hctc_core::sim::*;
use hctc_core::{ConcatScheme, ConvCodeSpec, Termination};
use std::collections::HashMap;

fn hctc(n1: usize) -> ConcatScheme {
    let t = Termination::Terminated;
    let par = ConvCodeSpec::from_octal(1, 2, 2, &[&["7", "5"]], &["7"], true, t).unwrap();
    let outer = ConvCodeSpec::from_octal(1, 2, 2, &[&["7", "5"]], &[], false, t).unwrap();
    let inner = ConvCodeSpec::from_octal(2, 3, 2, &[&["7", "0", "5"], &["0", "7", "3"]], &["7", "7"], true, t).unwrap();
    ConcatScheme::hctc("hctc", par, outer, inner, n1).unwrap()
}

fn link(scheme: LinkScheme, channel: ChannelKind, stop: StopRule) -> LinkConfig {
    LinkConfig {
        id: "t".into(),
        scheme,
        modem: ModemConfig::default(),
        channel,
        fading: FadingGranularity::PerBit,
        decode: DecodeConfig {
            iterations: 4,
            ..DecodeConfig::default()
        },
        interleaver: InterleaverKind::UniformRandomPerFrame,
        stop,
    }
}

#[test]
fn noiseless_point_has_no_errors() {
    let stop = StopRule {
        max_frames: 40,
        ..StopRule::default()
    };
    let cfg = link(LinkScheme::Coded(hctc(50)), ChannelKind::Rayleigh, stop);
    let r = run_point(&cfg, f64::INFINITY, 3, 0, 1).unwrap();
    assert_eq!(r.rows.len(), 4);
    for row in &r.rows {
        assert_eq!(row.errors, 0);
        assert_eq!(row.frames, 40);
        assert_eq!(row.bits, 2000);
        assert_eq!(row.ber, 0.0);
        assert_eq!(row.flag, "low_errors");
    }
}

#[test]
fn result_is_independent_of_worker_count() {
    let stop = StopRule {
        min_bit_errors: 50,
        max_bits: 200_000,
        max_frames: 200,
    };
    let cfg = link(LinkScheme::Coded(hctc(50)), ChannelKind::Awgn, stop);
    let a = run_point(&cfg, 1.5, 11, 7, 1).unwrap();
    let b = run_point(&cfg, 1.5, 11, 7, 2).unwrap();
    let c = run_point(&cfg, 1.5, 11, 7, 0).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.rows, c.rows);
    let mut x = Vec::new();
    let mut y = Vec::new();
    write_sim_csv(&a.rows, &mut x).unwrap();
    write_sim_csv(&b.rows, &mut y).unwrap();
    assert_eq!(x, y);
}

#[test]
fn uncoded_awgn_matches_closed_form() {
    let stop = StopRule {
        min_bit_errors: u64::MAX,
        max_bits: 2_000_000,
        max_frames: u64::MAX,
    };
    let cfg = link(LinkScheme::Uncoded { frame_bits: 10_000 }, ChannelKind::Awgn, stop);
    let r = run_point(&cfg, 6.0, 5, 0, 0).unwrap();
    let row = r.last();
    let g = 10f64.powf(0.6);
    let p = q_function((2.0 * g).sqrt());
    assert_eq!(row.bits, 2_000_000);
    assert!(row.ci_lo <= p && p <= row.ci_hi, "{p:e} not in [{:e}, {:e}]", row.ci_lo, row.ci_hi);
}

#[test]
fn uniform_interleaver_draws_are_uniform() {
    // Chi-square over the 24 permutations of length 4; 23 degrees of freedom,
    // 0.999 quantile 49.73.
    let mut rng = frame_rng(9, 9, 9);
    let draws = 100_000;
    let mut counts: HashMap<Vec<usize>, u64> = HashMap::new();
    for _ in 0..draws {
        let p = make_interleaver(InterleaverKind::UniformRandomPerFrame, 4, &mut rng).unwrap();
        *counts.entry(p.as_slice().to_vec()).or_default() += 1;
    }
    assert_eq!(counts.len(), 24);
    let e = draws as f64 / 24.0;
    let chi2: f64 = counts.values().map(|&c| (c as f64 - e).powi(2) / e).sum();
    assert!(chi2 < 49.73, "chi2 = {chi2}");
    let sigma = (e * (1.0 - 1.0 / 24.0)).sqrt();
    for &c in counts.values() {
        assert!((c as f64 - e).abs() < 4.0 * sigma);
    }
}

#[test]
fn empty_grid_gives_empty_output() {
    let plan = ExperimentPlan {
        id: "empty".into(),
        links: vec![link(LinkScheme::Coded(hctc(50)), ChannelKind::Awgn, StopRule::default())],
        snr_db: vec![],
        seed: 1,
        report_iterations: vec![],
        bounds: Some(BoundOverlay::default()),
    };
    let out = run_plan(&plan, 1);
    assert!(out.rows.is_empty() && out.bounds.is_empty() && out.failures.is_empty());
}

#[test]
fn identical_links_agree_statistically() {
    // Coded errors come in bursts per frame, which a per-bit interval does
    // not model, so the twins are uncoded links.
    let stop = StopRule {
        min_bit_errors: 2000,
        max_bits: 10_000_000,
        max_frames: u64::MAX,
    };
    let l = link(LinkScheme::Uncoded { frame_bits: 1000 }, ChannelKind::Rayleigh, stop);
    let plan = ExperimentPlan {
        id: "twins".into(),
        links: vec![l.clone(), l],
        snr_db: vec![1.0],
        seed: 21,
        report_iterations: vec![],
        bounds: None,
    };
    let out = run_plan(&plan, 0);
    assert_eq!(out.rows.len(), 2);
    let (a, b) = (&out.rows[0], &out.rows[1]);
    // Different point keys give different streams.
    assert_ne!(a.errors, b.errors);
    assert!(a.ci_lo <= b.ci_hi && b.ci_lo <= a.ci_hi, "{a:?} {b:?}");
}

#[test]
fn failures_are_recorded_and_plan_continues() {
    let mut bad = link(LinkScheme::Uncoded { frame_bits: 100 }, ChannelKind::Awgn, StopRule::default());
    bad.modem.mod_index = 0.35;
    let good = link(
        LinkScheme::Uncoded { frame_bits: 100 },
        ChannelKind::Awgn,
        StopRule {
            max_frames: 3,
            ..StopRule::default()
        },
    );
    let plan = ExperimentPlan {
        id: "mixed".into(),
        links: vec![bad, good],
        snr_db: vec![2.0, 4.0],
        seed: 1,
        report_iterations: vec![],
        bounds: None,
    };
    let out = run_plan(&plan, 1);
    assert_eq!(out.failures.len(), 2);
    assert_eq!(out.rows.len(), 2);
}

#[test]
fn iterations_do_not_hurt_and_max_log_is_close() {
    let stop = StopRule {
        min_bit_errors: 300,
        max_bits: 2_000_000,
        max_frames: u64::MAX,
    };
    let mut cfg = link(LinkScheme::Coded(hctc(100)), ChannelKind::Awgn, stop);
    cfg.decode.iterations = 6;
    let exact = run_point(&cfg, 1.5, 4, 0, 0).unwrap();
    let first = &exact.rows[0];
    let last = exact.last();
    assert!(last.ber < first.ber, "{} vs {}", last.ber, first.ber);
    cfg.decode.algorithm = Algorithm::MaxLogMap;
    cfg.decode.extrinsic_scale = 0.7;
    let approx = run_point(&cfg, 1.5, 4, 0, 0).unwrap();
    // Damped max-log loses a fraction of a dB; at this SNR that is well
    // within a factor of five in BER.
    let ratio = approx.last().ber / last.ber;
    assert!((0.5..5.0).contains(&ratio), "ratio {ratio}");
}
