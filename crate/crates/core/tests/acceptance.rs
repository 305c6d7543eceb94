//! Acceptance gate: one test per criterion, each printing a PASS line with
//! the measured margin (visible under `--nocapture`).
//!
//! Tolerances are pinned in the assertions; seeds are fixed so every run is
//! bit-reproducible.

use std::time::Instant;

use bridge_core::*;

fn wiener_bridge() -> BridgeSpec64 {
    BridgeSpec::Alpha(AlphaBridge::new(CoefficientFn::constant(1.0), 1.0).unwrap())
}

fn ou_recip_bridge(c_tilde: f64) -> BridgeSpec64 {
    let ou = OuSpec::new(
        families::q_recip(c_tilde),
        CoefficientFn::constant(1.0),
        1.0,
    )
    .unwrap();
    BridgeSpec::Ou(OuBridge::new(ou, 0.0, 0.0))
}

fn coth_family_constant(q0: f64, horizon: f64) -> f64 {
    1.0 / (q0 * (1.0 + 1.0 / (q0 * horizon).tanh()))
}

fn uniform_in(rng: &mut RngStream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_uniform()
}

fn ensemble_variance(ens: &PathEnsemble64, j: usize) -> f64 {
    let n = ens.n_paths() as f64;
    let col = ens.at_time_index(j);
    let mean: f64 = col.iter().sum::<f64>() / n;
    col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// Criterion 1: Wiener-bridge identification: the α ≡ 1 bridge has the same law as
/// the 0→0 bridge of dZ = Z/(t+c̃) dt + dB for every c̃ outside [-T, 0].
#[test]
fn criterion_01_wiener_bridge_identification() {
    let start = Instant::now();
    let grid = TimeGrid::interior(32, 1.0).unwrap();
    let mut worst = 0.0f64;
    for &c_tilde in &[1.0, 2.0, -3.0] {
        let report =
            analytic_equivalence(&wiener_bridge(), &ou_recip_bridge(c_tilde), &grid, 1e-5)
                .unwrap();
        assert_eq!(report.verdict, Verdict::Equivalent, "c_tilde={c_tilde}");
        assert!(
            report.max_cov_gap_rel <= 1e-6,
            "c_tilde={c_tilde}: covariance gap {}",
            report.max_cov_gap_rel
        );
        worst = worst.max(report.max_cov_gap_rel);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "acceptance 01 PASS wiener identification: max cov gap {worst:.2e} (<= 1e-6), {elapsed:?}"
    );
}

/// Criterion 2: With the matched constant C, identification of the coth-drift α
/// returns the constant drift q₀ itself.
#[test]
fn criterion_02_coth_drift_identification() {
    for &q0 in &[-1.0, 0.5, 2.0] {
        let start = Instant::now();
        let horizon = 1.0;
        let c = coth_family_constant(q0, horizon);
        let alpha = families::alpha_coth(q0, horizon);
        let ident = identify(&alpha, horizon, c).unwrap();
        let mut worst = 0.0f64;
        let n = 2_000;
        for i in 0..=n {
            let t = (1.0 - 1e-6) * i as f64 / n as f64;
            worst = worst.max((ident.q_c().eval(t) - q0).abs());
        }
        let elapsed = start.elapsed();
        assert!(worst <= 1e-8, "q0={q0}: max deviation {worst:.3e}");
        assert!(elapsed.as_secs_f64() < 5.0, "q0={q0}: took {elapsed:?}");
        println!(
            "acceptance 02 PASS coth drift q0={q0}: max |q_C - q0| = {worst:.2e} (<= 1e-8), {elapsed:?}"
        );
    }
}

/// Criterion 3: Existence threshold for α = 1 ± (T-t)^β: the drift extends
/// continuously to the horizon iff β > 1.
#[test]
fn criterion_03_poly_family_threshold() {
    let start = Instant::now();
    let horizon = 1.0;
    for &sign in &[1.0, -1.0] {
        for &beta in &[0.5, 1.0] {
            let ident = identify(&families::alpha_poly(sign, beta, horizon), horizon, 1.0)
                .unwrap();
            assert_eq!(
                ident.limit_at_horizon(),
                LimitProbe::Diverges,
                "sign={sign} beta={beta}"
            );
        }
        for &beta in &[1.5, 2.0] {
            let ident = identify(&families::alpha_poly(sign, beta, horizon), horizon, 1.0)
                .unwrap();
            assert!(
                ident.limit_at_horizon().is_finite(),
                "sign={sign} beta={beta}: {:?}",
                ident.limit_at_horizon()
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "acceptance 03 PASS poly threshold: beta 0.5/1.0 diverge, 1.5/2.0 finite (both signs), {elapsed:?}"
    );
}

/// Criterion 4: Impossibility gate: constant α ≠ 1 admits no generating OU-type
/// process; α ≡ 1 admits the whole family.
#[test]
fn criterion_04_impossibility_gate() {
    for &a in &[0.0, 0.5, 2.0] {
        let verdict = classify_identical_bridge(&CoefficientFn::constant(a), 1.0).unwrap();
        assert!(
            matches!(verdict, BridgeVerdict::ImpossibleLimitNotOne { .. }),
            "alpha={a}: {verdict:?}"
        );
    }
    let verdict = classify_identical_bridge(&CoefficientFn::constant(1.0), 1.0).unwrap();
    assert!(matches!(verdict, BridgeVerdict::ExistsWithFamily { .. }));
    println!("acceptance 04 PASS impossibility gate: alpha in {{0, 0.5, 2}} impossible, alpha = 1 exists");
}

/// Criterion 5: Every identified drift satisfies the Riccati equation
/// q' = -q² + (α(α-1) - α'(T-t))/(T-t)² to 1e-5 at random interior times.
#[test]
fn criterion_05_riccati_residual() {
    let horizon = 1.0;
    // (alpha, C) fixtures from criteria 1-3 that have finite q_C.
    let mut fixtures: Vec<(CoefficientFn64, f64, String)> = Vec::new();
    for &c_tilde in &[1.0f64, 2.0, -3.0] {
        // c_tilde = CT/(T-C)  =>  C = c̃T/(T + c̃).
        let c = c_tilde * horizon / (horizon + c_tilde);
        fixtures.push((
            CoefficientFn::constant(1.0),
            c,
            format!("alpha=1, C={c:.4}"),
        ));
    }
    for &q0 in &[-1.0, 0.5, 2.0] {
        fixtures.push((
            families::alpha_coth(q0, horizon),
            coth_family_constant(q0, horizon),
            format!("coth q0={q0}"),
        ));
    }
    for &sign in &[1.0, -1.0] {
        for &beta in &[1.5, 2.0] {
            fixtures.push((
                families::alpha_poly(sign, beta, horizon),
                1.0,
                format!("poly sign={sign} beta={beta}"),
            ));
        }
    }

    let mut rng = RngStream::new(501, 0);
    let mut worst = 0.0f64;
    for (alpha, c, name) in &fixtures {
        let ident = identify(alpha, horizon, *c).unwrap();
        assert!(ident.limit_at_horizon().is_finite(), "{name}");
        for _ in 0..50 {
            let t = uniform_in(&mut rng, 0.01, 0.95);
            let r = riccati_residual(alpha, horizon, ident.q_c(), t).unwrap();
            assert!(r.abs() <= 1e-5, "{name} t={t}: residual {r:.3e}");
            worst = worst.max(r.abs());
        }
    }
    println!(
        "acceptance 05 PASS riccati residual: {} fixtures x 50 points, max |residual| = {worst:.2e} (<= 1e-5)",
        fixtures.len()
    );
}

/// Criterion 6: The three-density ratio defining the bridge transition is the
/// Gaussian with mean n_{x,b}(s,t) and variance σ(s,t).
#[test]
fn criterion_06_bridge_density_identity() {
    let mut rng = RngStream::new(602, 0);
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let q0 = uniform_in(&mut rng, -2.0, 2.0);
        let sigma0 = uniform_in(&mut rng, 0.3, 2.5);
        let ou = OuSpec::new(
            CoefficientFn::constant(q0),
            CoefficientFn::constant(sigma0),
            1.0,
        )
        .unwrap();
        let s = uniform_in(&mut rng, 0.0, 0.8);
        let t = uniform_in(&mut rng, s + 0.01, 0.97);
        let b = uniform_in(&mut rng, -2.0, 2.0);
        let x = uniform_in(&mut rng, -2.0, 2.0);
        let law = ou.bridge_transition(b, s, t, x).unwrap();
        // Keep y within the well-conditioned zone of the ratio.
        let y = law.mean + law.sd() * uniform_in(&mut rng, -3.0, 3.0);
        let gauss_form = law.log_pdf(y);
        let ratio_form = ou.bridge_transition_log_ratio(b, s, t, x, y).unwrap();
        let gap = (gauss_form - ratio_form).abs();
        assert!(
            gap <= 1e-10,
            "trial {trial}: q0={q0} sigma0={sigma0} s={s} t={t}: log gap {gap:.3e}"
        );
        worst = worst.max(gap);
    }
    println!(
        "acceptance 06 PASS bridge density identity: 100 random specs, max log gap {worst:.2e} (<= 1e-10)"
    );
}

/// Criterion 7: Chapman-Kolmogorov: ∫ p_{s,u}(x,y) p_{u,t}(y,z) dy = p_{s,t}(x,z).
#[test]
fn criterion_07_chapman_kolmogorov() {
    let mut rng = RngStream::new(703, 0);
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let horizon = 1.0;
        // Alternate constant and linear drift/diffusion shapes.
        let (q, sigma): (CoefficientFn64, CoefficientFn64) = if trial % 2 == 0 {
            (
                CoefficientFn::constant(uniform_in(&mut rng, -1.5, 1.5)),
                CoefficientFn::constant(uniform_in(&mut rng, 0.4, 2.0)),
            )
        } else {
            let (a0, a1) = (
                uniform_in(&mut rng, -1.0, 1.0),
                uniform_in(&mut rng, -1.0, 1.0),
            );
            let (b0, b1) = (
                uniform_in(&mut rng, 0.5, 1.5),
                uniform_in(&mut rng, -0.3, 0.3),
            );
            (
                CoefficientFn::new(move |t: f64| a0 + a1 * t).with_primitive(move |s, t| {
                    a0 * (t - s) + 0.5 * a1 * (t * t - s * s)
                }),
                CoefficientFn::new(move |t: f64| b0 + b1 * t),
            )
        };
        let ou = OuSpec::new(q, sigma, horizon).unwrap();
        let s = uniform_in(&mut rng, 0.0, 0.4);
        let u = uniform_in(&mut rng, s + 0.05, 0.7);
        let t = uniform_in(&mut rng, u + 0.05, 0.99);
        let x = uniform_in(&mut rng, -1.5, 1.5);
        let z = uniform_in(&mut rng, -1.5, 1.5);

        let direct = ou.transition(s, t, x).unwrap().pdf(z);
        let first = ou.transition(s, u, x).unwrap();
        // Integration window covering both factors.
        let peak2 = |y: f64| ou.transition(u, t, y).unwrap();
        let lo = (first.mean - 10.0 * first.sd()).min(z - 10.0 * peak2(0.0).sd());
        let hi = (first.mean + 10.0 * first.sd()).max(z + 10.0 * peak2(0.0).sd());
        let integrand = |y: f64| first.pdf(y) * peak2(y).pdf(z);
        let total = quad::adaptive(
            &integrand,
            lo,
            hi,
            quad::QuadTol::absolute(1e-10),
            quad::EVAL_BUDGET,
        )
        .unwrap()
        .value;
        let gap = (total - direct).abs();
        assert!(gap <= 1e-6, "trial {trial}: gap {gap:.3e}");
        worst = worst.max(gap);
    }
    println!(
        "acceptance 07 PASS chapman-kolmogorov: 20 random specs, max density gap {worst:.2e} (<= 1e-6)"
    );
}

/// Criterion 8: Endpoint regimes, empirically: α ≡ 1 pins the path to 0, α ≡ -1
/// blows the second moment up, α ≡ 0 stays a Wiener process.
#[test]
fn criterion_08_endpoint_regimes() {
    let start = Instant::now();
    let n = 100_000;
    let seed = 31337;

    let pinned = AlphaBridge::new(CoefficientFn::constant(1.0), 1.0).unwrap();
    let rows = endpoint_study(&pinned, n, seed).unwrap();
    let tail = rows[17].mean_square;
    assert!(tail < 1e-4, "alpha=1: mean X^2 at k=18 is {tail:.3e}");

    let exploding = AlphaBridge::new(CoefficientFn::constant(-1.0), 1.0).unwrap();
    let rows = endpoint_study(&exploding, n, seed).unwrap();
    let growth = rows[17].mean_square / rows[9].mean_square;
    assert!(
        growth >= 10.0,
        "alpha=-1: k=18/k=10 second-moment ratio {growth:.2}"
    );

    let wiener = AlphaBridge::new(CoefficientFn::constant(0.0), 1.0).unwrap();
    let rows = endpoint_study(&wiener, n, seed).unwrap();
    let mut worst_z = 0.0f64;
    for row in &rows {
        let se = row.t * (2.0 / n as f64).sqrt();
        worst_z = worst_z.max((row.mean_square - row.t).abs() / se);
    }
    assert!(worst_z <= 4.0, "alpha=0: worst z-score {worst_z:.2}");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "acceptance 08 PASS endpoint regimes: pinned tail {tail:.2e}, growth x{growth:.0}, wiener worst z {worst_z:.2}, {elapsed:?}"
    );
}

/// Criterion 9: Exact and Euler samplers agree with each other and with the
/// closed-form variance t(1-t) of the Wiener bridge.
#[test]
fn criterion_09_sampler_agreement() {
    let spec = wiener_bridge();
    let grid = TimeGrid::uniform(31, 0.75, 1.0).unwrap();
    let n = 100_000;
    let seed = 2024;
    let exact = sample_exact(&spec, &grid, n, seed).unwrap();
    let euler = sample_euler(&spec, &grid, n, seed, 64).unwrap();
    let mut report = String::new();
    for (j, t) in [(10usize, 0.25), (20, 0.5), (30, 0.75)] {
        let want = t * (1.0 - t);
        let ve = ensemble_variance(&exact, j);
        let vu = ensemble_variance(&euler, j);
        let four_se = 4.0 * want * (2.0 / n as f64).sqrt();
        let pair_gap = (ve - vu).abs() / want;
        assert!(pair_gap <= 0.02, "t={t}: exact/euler gap {pair_gap:.4}");
        assert!((ve - want).abs() <= four_se, "t={t}: exact var {ve:.5}");
        assert!((vu - want).abs() <= four_se, "t={t}: euler var {vu:.5}");
        report.push_str(&format!(" t={t}: gap {:.2}%;", 100.0 * pair_gap));
    }
    println!("acceptance 09 PASS sampler agreement (N=1e5, substeps=64):{report}");
}

/// Criterion 10: KS calibration: self-vs-self sampled comparisons reject at the
/// nominal 0.01 level -- empirical rate over 200 repetitions in
/// [0.002, 0.03].
#[test]
fn criterion_10_ks_calibration() {
    let spec = wiener_bridge();
    let grid = TimeGrid::new(vec![0.25, 0.75], 1.0, 1e-9).unwrap();
    let mut rejects = 0;
    for rep in 0..200u64 {
        let report = mc_equivalence(&spec, &spec, &grid, 10_000, 11_000 + rep).unwrap();
        if report.ks_family_reject == Some(true) {
            rejects += 1;
        }
    }
    let rate = rejects as f64 / 200.0;
    assert!(
        (0.002..=0.03).contains(&rate),
        "empirical rejection rate {rate}"
    );
    println!(
        "acceptance 10 PASS ks calibration: {rejects}/200 rejections (rate {rate:.3} in [0.002, 0.03])"
    );
}
