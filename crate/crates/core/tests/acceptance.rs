//! Acceptance criteria. Each test prints one PASS/FAIL line; run with
//! `cargo test --test acceptance -- --nocapture --test-threads=1` to see them
//! in order.

mod common;

use arts_qkd::strategies::{
    compare_strategies, no_selection, optimize_count_threshold, ComparisonConfig, StrategyKind,
};
use arts_qkd::trace_io::{
    read_results, read_trace, write_results, write_trace, ResultsBody, ResultsDocument, TraceFile,
};
use arts_qkd::{binary_entropy, ChannelSpec, LognormalFade, ModelInputs, SearchRange};
use common::quadrature::tail_integral;

fn report(id: u32, name: &str, failures: &[String]) {
    if failures.is_empty() {
        println!("AC{id} {name}: PASS");
    } else {
        println!("AC{id} {name}: FAIL");
        for f in failures {
            println!("    {f}");
        }
        panic!("AC{id} failed: {}", failures.join("; "));
    }
}

#[test]
fn ac1_entropy_root() {
    let f = |q: f64| 1.0 - 2.0 * binary_entropy(q).unwrap();
    let (mut lo, mut hi) = (1e-9, 0.5);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    let mut failures = vec![];
    if (root - 0.1100).abs() > 1e-4 {
        failures.push(format!("root {root} not within 1e-4 of 0.1100"));
    }
    println!("    q* = {root:.9}");
    report(1, "entropy root", &failures);
}

#[test]
fn ac2_survival_vs_quadrature() {
    let mut failures = vec![];
    let mut worst: f64 = 0.0;
    for sigma_sq in [0.1, 0.5, 0.967, 1.0, 2.0] {
        let fade = LognormalFade::new(1.0, sigma_sq).unwrap();
        for k in 0..50 {
            let t = 0.01 * 1000f64.powf(k as f64 / 49.0);
            let (c, s) = (fade.log_location(), fade.sigma());
            let p = tail_integral(c, s, t, |v| fade.pdf(v).unwrap());
            let w = tail_integral(c, s, t, |v| v * fade.pdf(v).unwrap() / fade.mean_intensity());
            let dp = (fade.survival_fraction(t) - p).abs();
            let dw = (fade.intensity_weighted_survival(t) - w).abs();
            worst = worst.max(dp).max(dw);
            if dp > 1e-6 || dw > 1e-6 {
                failures.push(format!("sigma_sq={sigma_sq} T={t}: |dP|={dp:e} |dW|={dw:e}"));
            }
        }
    }
    println!("    worst deviation {worst:e}");
    report(2, "analytic survival vs quadrature", &failures);
}

#[test]
fn ac3_monte_carlo_vs_analytic() {
    let spec = ChannelSpec::new(10.0, 2.0, 0.03, 1.0).unwrap();
    let trace = spec.generate(1_000_000, 20_240_301).unwrap();
    let base = trace.select(0.0);
    let model = ModelInputs::new(
        spec.fade,
        spec.background_per_packet,
        spec.intrinsic_qber,
        base.sifted_total as f64,
        base.selected_packets as f64,
    )
    .unwrap();
    let mut thresholds = vec![0.0];
    thresholds.extend(
        [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
            .iter()
            .map(|p| spec.fade.quantile(*p)),
    );
    let mut failures = vec![];
    for (t, out) in thresholds.iter().zip(trace.empirical_curve(&thresholds).unwrap()) {
        let np = out.selected_packets as f64 / base.selected_packets as f64;
        let ns = out.sifted_total as f64 / base.sifted_total as f64;
        let q = out.qber.unwrap();
        let np_th = model.predict_packets(*t) / model.packets_total;
        let ns_th = model.predict_sifted(*t).unwrap() / model.sifted_total;
        let q_th = model.predict_qber(*t).unwrap();
        println!(
            "    T={t:.4}: N_P {np:.4}/{np_th:.4}  N_S {ns:.4}/{ns_th:.4}  Q {q:.5}/{q_th:.5}"
        );
        if (np - np_th).abs() > 0.01 || (ns - ns_th).abs() > 0.01 || (q - q_th).abs() > 0.002 {
            failures.push(format!("T={t}: deviation beyond tolerance"));
        }
    }
    report(3, "Monte Carlo vs analytic model", &failures);
}

#[test]
fn ac4_field_trial_regime() {
    let fade = LognormalFade::normalized(0.967).unwrap();
    let model = ModelInputs::from_initial_qber(fade, 35.17, 0.056, 0.1314, 2415.0).unwrap();
    let mut failures = vec![];

    let q0 = model.predict_qber(0.0).unwrap();
    if (q0 - 0.1314).abs() > 5e-4 {
        failures.push(format!("Q_th(0) = {q0}"));
    }
    let grid = SearchRange::default().grid(&fade).unwrap();
    let rates: Vec<f64> = grid.iter().map(|t| model.predict_rate(*t).unwrap()).collect();
    if rates[0] != 0.0 {
        failures.push(format!("R_th(0) = {} should be 0", rates[0]));
    }
    let positive: Vec<usize> = (0..grid.len()).filter(|i| rates[*i] > 0.0).collect();
    match (positive.first(), positive.last()) {
        (Some(&a), Some(&b)) => {
            if positive.len() != b - a + 1 {
                failures.push("positive-rate set is not a single window".into());
            }
            if a == 0 {
                failures.push("rate positive at T = 0".into());
            }
            println!("    key window opens at T = {:.4} <V>", grid[a]);
        }
        _ => failures.push("no positive-rate window".into()),
    }

    let best = model.optimize_threshold(&SearchRange::default()).unwrap();
    println!(
        "    T* = {:.4} <V>, R(T*) = {:.4e}, Q(T*) = {:.4e}",
        best.threshold, best.rate, best.qber
    );
    if !best.has_key || best.qber >= 0.11 {
        failures.push(format!("Q_th(T*) = {} not below 0.11", best.qber));
    }
    // unimodal: non-decreasing up to T*, non-increasing after
    for i in 1..grid.len() {
        let rising = grid[i] <= best.threshold;
        let (prev, cur) = (rates[i - 1], rates[i]);
        if rising && cur < prev - 1e-12 || !rising && grid[i - 1] >= best.threshold && cur > prev + 1e-12 {
            failures.push(format!("rate not unimodal near T = {}", grid[i]));
            break;
        }
    }
    report(4, "field-trial regime (qualitative + anchored)", &failures);
}

fn fig6_config() -> ComparisonConfig {
    ComparisonConfig {
        intrinsic_qber: 0.03,
        sigma_sq: 1.0,
        mu_grid: vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0],
        snr_grid: vec![2.0, 5.0, 10.0, 20.0, 50.0],
        packets_per_point: 100_000,
        seed: 6,
    }
}

#[test]
fn ac5_strategy_crossover() {
    let cmp = compare_strategies(&fig6_config()).unwrap();
    let arts = cmp.strategy(StrategyKind::Arts).unwrap();
    let counts = cmp.strategy(StrategyKind::CountThreshold).unwrap();
    let none = cmp.strategy(StrategyKind::None).unwrap();
    let mut failures = vec![];
    for i in 0..arts.points.len() {
        let (a, c, n) = (&arts.points[i], &counts.points[i], &none.points[i]);
        println!(
            "    mu={:>5} snr={:>4}: arts {:.5} (T={:.3})  counts {:.5} (k={})  none {:.5}",
            a.mu, a.snr, a.rate, a.threshold, c.rate, c.threshold, n.rate
        );
        if a.mu <= 10.0 && a.snr <= 20.0 && !(a.rate == 0.0 && c.rate == 0.0) && a.rate <= c.rate {
            failures.push(format!("mu={} snr={}: ARTS {} <= counts {}", a.mu, a.snr, a.rate, c.rate));
        }
        if a.mu == 100.0 && a.snr == 50.0 {
            let hi = a.rate.max(c.rate).max(n.rate);
            let lo = a.rate.min(c.rate).min(n.rate);
            if (hi - lo) > 0.1 * hi {
                failures.push(format!("mu=100 snr=50: spread {} exceeds 10% of {hi}", hi - lo));
            }
        }
    }
    report(5, "strategy crossover", &failures);
}

fn trace_bytes(file: &TraceFile) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trace(&mut buf, file).unwrap();
    buf
}

#[test]
fn ac6_property_suite() {
    let mut failures = vec![];
    let spec = ChannelSpec::from_snr(5.0, 5.0, 0.03, 1.0).unwrap();
    let trace = spec.generate(100_000, 99).unwrap();

    // subset monotonicity
    let ts: Vec<f64> = (0..200).map(|k| 0.03 * k as f64).collect();
    let curve = trace.empirical_curve(&ts).unwrap();
    if curve.windows(2).any(|w| {
        w[1].selected_packets > w[0].selected_packets
            || w[1].sifted_total > w[0].sifted_total
            || w[1].error_total > w[0].error_total
    }) {
        failures.push("selection not monotone in threshold".into());
    }

    // dominance over no selection
    for (mu, snr, seed) in [(1.0, 2.0, 1), (5.0, 5.0, 2), (20.0, 10.0, 3), (100.0, 50.0, 4)] {
        let t = ChannelSpec::from_snr(mu, snr, 0.03, 1.0).unwrap().generate(20_000, seed).unwrap();
        let base = no_selection(&t).rate;
        if t.best_probe_threshold().rate < base || optimize_count_threshold(&t).1.rate < base {
            failures.push(format!("optimized strategy below no selection at mu={mu} snr={snr}"));
        }
    }

    // MLE round trip
    for (mean, sigma_sq) in [(1.0, 1.0), (0.35, 0.967), (4.0, 0.3)] {
        let truth = LognormalFade::new(mean, sigma_sq).unwrap();
        let fit = LognormalFade::fit_mle(&truth.sample(77, 100_000)).unwrap();
        let (dm, ds) = (
            (fit.mean_intensity() - mean).abs() / mean,
            (fit.sigma_sq() - sigma_sq).abs() / sigma_sq,
        );
        if dm > 0.02 || ds > 0.02 {
            failures.push(format!("MLE off by {dm:.4}/{ds:.4} for ({mean}, {sigma_sq})"));
        }
    }

    // seed determinism, byte for byte
    let a = trace_bytes(&TraceFile::simulated(spec.generate(100_000, 99).unwrap(), spec, 99));
    let b = trace_bytes(&TraceFile::simulated(trace.clone(), spec, 99));
    if a != b {
        failures.push("same seed produced different trace bytes".into());
    }
    let mut cfg = fig6_config();
    cfg.mu_grid = vec![2.0, 50.0];
    cfg.snr_grid = vec![5.0];
    cfg.packets_per_point = 10_000;
    let json = |c: &ComparisonConfig| {
        let mut buf = Vec::new();
        let doc = ResultsDocument::new(ResultsBody::Comparison(compare_strategies(c).unwrap()));
        write_results(&mut buf, &doc).unwrap();
        buf
    };
    let first = json(&cfg);
    if first != json(&cfg) {
        failures.push("same seed produced different comparison bytes".into());
    }

    // format round trips
    let back = read_trace(a.as_slice()).unwrap();
    if back.trace != trace || trace_bytes(&back) != a {
        failures.push("trace write/read is not an identity".into());
    }
    let doc = read_results(first.as_slice()).unwrap();
    let mut again = Vec::new();
    write_results(&mut again, &doc).unwrap();
    if again != first {
        failures.push("results read/write is not an identity".into());
    }
    report(6, "property suite", &failures);
}
