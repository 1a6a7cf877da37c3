//! Acceptance suite: every criterion at its pinned tolerance.
//!
//! Each criterion prints one `PASS` or `FAIL` line with its measured
//! values. A criterion that cannot be met at desk scale is reported as a
//! `FAIL` and does not abort the run; only errors in the harness itself
//! panic.

use std::f64::consts::PI;
use std::io::Write as _;
use std::process::Command;
use std::time::Instant;

use nalgebra::Matrix3;
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wildflow::builder::base::m_l;
use wildflow::builder::residual::residual;
use wildflow::builder::{base_pair, determinism_check, iterate, BasePair, Forcing, StageConfig, DEFAULT_STEP};
use wildflow::geometry::{random_admissible, DirectionSet};
use wildflow::jets::scaling::{scaling_sweep, JetQuantity, SweepAxis};
use wildflow::jets::{verify_jet_identities, CutoffProfiles, JetFamily, JetScales, ShiftMode};
use wildflow::ledger::search::{search, SearchRequest};
use wildflow::ledger::{alpha, derive, p_star, LedgerContext, NoiseMode};
use wildflow::noise::holder::{stopping_time, StopPath};
use wildflow::noise::regularity::regularity_report;
use wildflow::noise::{ou_convolve, probe_mode, sample_wiener, AdditivePath, ModeSet, NoiseConfig, NoisePath, ScalarPath};
use wildflow::spectral::norms::l2_parseval;
use wildflow::spectral::ops::{coeff_l2, inverse_divergence, tensor_divergence};
use wildflow::spectral::{FourierField3, Grid3, SpectralData};
use wildflow::tolerances::*;
use wildflow::Result;

/// Outcome of one criterion.
struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn trivial(mode: NoiseMode) -> Forcing<'static> {
    match mode {
        NoiseMode::Additive => Forcing::Additive(None),
        NoiseMode::Multiplicative => Forcing::Multiplicative(None),
    }
}

/// Mean-zero field with `modes` random cosine modes, |k_i| ≤ kmax.
fn random_band_limited(g: Grid3, rng: &mut ChaCha8Rng, modes: usize, kmax: i64) -> FourierField3 {
    let terms: Vec<([f64; 3], [f64; 3], f64)> = (0..modes)
        .map(|_| {
            let k = loop {
                let k = [rng.gen_range(-kmax..=kmax), rng.gen_range(-kmax..=kmax), rng.gen_range(-kmax..=kmax)];
                if k != [0, 0, 0] {
                    break k.map(|x| x as f64);
                }
            };
            let a = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            (k, a, rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    FourierField3::from_fn(g, |x| {
        let mut v = [0.0; 3];
        for (k, a, ph) in &terms {
            let c = (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + ph).cos();
            for i in 0..3 {
                v[i] += a[i] * c;
            }
        }
        v
    })
}

fn inverse_divergence_criterion() -> Result<Verdict> {
    let g = Grid3::new(64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_div, mut worst_trace, mut worst_sym) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let v = random_band_limited(g, &mut rng, 12, 31);
        let r = inverse_divergence(&v);
        let mut d = tensor_divergence(&r);
        d.axpy(-1.0, &v);
        worst_div = worst_div.max(coeff_l2(&d) / coeff_l2(&v));
        let tr = r.trace().physical();
        worst_trace = worst_trace.max(tr.iter().fold(0.0, |m, x| m.max(x.abs())));
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let a = r.entry(i, j);
            let b = r.entry(j, i);
            let s = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()));
            worst_sym = worst_sym.max(s);
        }
    }
    Ok(Verdict::new(
        worst_div < SPECTRAL_IDENTITY && worst_trace < SPECTRAL_EXACT && worst_sym < SPECTRAL_EXACT,
        format!("max ‖div ℛv − v‖/‖v‖ = {worst_div:.2e}, max |tr ℛv| = {worst_trace:.2e}, asymmetry = {worst_sym:.1e} over 100 fields at n = 64"),
    ))
}

fn geometry_criterion() -> Result<Verdict> {
    let set = DirectionSet::build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut positive = true;
    for _ in 0..1000 {
        let r: Matrix3<f64> = random_admissible(&set, &mut rng);
        let g = set.gamma(&r)?;
        positive &= g.iter().all(|x| *x > 0.0);
        worst = worst.max((set.reconstruct(&g) - r).norm());
    }
    let cert = set.certify_positivity(2000, 3);
    Ok(Verdict::new(
        worst < GEOMETRY_RECONSTRUCTION && positive && cert.radius > 0.0 && cert.certified,
        format!("max reconstruction error = {worst:.2e} over 1000 matrices, positivity radius = {:.6} (certified: {})", cert.radius, cert.certified),
    ))
}

fn profile_criterion() -> Result<Verdict> {
    let set = DirectionSet::build()?;
    let profiles = CutoffProfiles::build(4)?;
    let c = profiles.checks.clone();
    let norms = c.phi_sq_rel_error < PROFILE_NORMALIZATION && c.psi_sq_rel_error < PROFILE_NORMALIZATION;

    // A per-direction resolvable family for the grid average of W⊗W.
    let fat = JetScales { r_perp: 0.9, r_par: 0.95, lambda: 1.0 / 0.9, mu: 1.0 };
    let fam = JetFamily::build(profiles.clone(), &set, fat, ShiftMode::Centered)?;
    let rep = verify_jet_identities(&fam, &set, &Grid3::new(128)?, 0.0)?;

    // A thin family whose supports are pairwise disjoint.
    let thin = JetScales { r_perp: 1.0 / 6.0, r_par: 0.5, lambda: 6.0, mu: 5.0 };
    let fam = JetFamily::build(profiles, &set, thin, ShiftMode::Disjoint)?;
    let overlaps: usize = [0.0, 0.3, 0.71]
        .iter()
        .flat_map(|&t| fam.grid_overlaps(t, 48))
        .map(|(_, n)| n)
        .sum();
    Ok(Verdict::new(
        norms && rep.mean_ww < JET_MEAN_QUADRATURE && overlaps == 0,
        format!(
            "∫φ² rel = {:.1e}, ∫ψ² rel = {:.1e}, ‖⨍W⊗W − ξ⊗ξ‖ = {:.1e} at n = 128, overlapping samples = {overlaps}",
            c.phi_sq_rel_error, c.psi_sq_rel_error, rep.mean_ww
        ),
    ))
}

fn jet_identity_criterion() -> Result<Verdict> {
    let set = DirectionSet::build()?;
    let profiles = CutoffProfiles::build(4)?;
    let g = Grid3::new(32)?;
    let cases = [
        (JetScales { r_perp: 0.25, r_par: 0.5, lambda: 8.0, mu: 3.0 }, ShiftMode::Centered),
        (JetScales { r_perp: 1.0 / 6.0, r_par: 0.5, lambda: 6.0, mu: 18.0 }, ShiftMode::Disjoint),
    ];
    let (mut lin, mut quad) = (0.0f64, 0.0f64);
    for (s, mode) in cases {
        let fam = JetFamily::build(profiles.clone(), &set, s, mode)?;
        let r = verify_jet_identities(&fam, &set, &g, 0.1)?;
        lin = lin.max(r.div_free).max(r.curl_curl);
        quad = quad.max(r.quadratic);
    }
    let base = JetScales { r_perp: 0.25, r_par: 0.5, lambda: 4.0, mu: 1.0 };
    let sweep = scaling_sweep(&profiles, &set, base, SweepAxis::Lambda, &[4.0, 8.0, 16.0], None, 1, 0, 2.0)?;
    let fit = sweep
        .fits
        .iter()
        .find(|f| f.quantity == JetQuantity::W)
        .expect("the sweep fits W");
    let fit_ok = (fit.fitted_cell - fit.predicted).abs() <= SCALING_EXPONENT_REL * fit.predicted.abs();
    Ok(Verdict::new(
        lin < JET_LINEAR_IDENTITY && quad < JET_QUADRATIC_IDENTITY && fit_ok,
        format!(
            "linear = {lin:.1e}, quadratic = {quad:.1e}, ‖∇W‖ λ-exponent {:.4} vs {:.4}",
            fit.fitted_cell, fit.predicted
        ),
    ))
}

fn base_pair_criterion() -> Result<Verdict> {
    let g = Grid3::new(32)?;
    let big_l = 2.0;
    let mut pass = true;
    let mut parts = Vec::new();
    for mode in [NoiseMode::Additive, NoiseMode::Multiplicative] {
        let b = BasePair::new(mode, big_l, 1.0, g)?;
        let f = trivial(mode);
        let p = base_pair(&b, &f, 0.1, 1e-3)?;
        let res = residual(&p)?;
        let mut norm_err = 0.0f64;
        for t in [0.0, 0.1, 0.25] {
            let expect = match mode {
                NoiseMode::Additive => big_l * big_l * (2.0 * big_l * t).exp(),
                NoiseMode::Multiplicative => m_l(big_l) * (2.0 * big_l * t + big_l).exp(),
            } / 2f64.sqrt();
            let got = l2_parseval(&b.eval(t, &f)?.v);
            norm_err = norm_err.max((got - expect).abs() / expect);
        }
        let grad = res.gradient_relative.unwrap_or(0.0);
        pass &= res.relative < BASE_PAIR_RESIDUAL && grad < BASE_PAIR_RESIDUAL && norm_err < BASE_PAIR_RESIDUAL;
        parts.push(format!("{mode}: residual {:.1e}, ‖v₀‖ rel error {norm_err:.1e}", res.relative.max(grad)));
    }
    Ok(Verdict::new(pass, parts.join("; ")))
}

fn stage_criterion() -> Result<Verdict> {
    let g = Grid3::new(64)?;
    let set = DirectionSet::build()?;
    let cfg = StageConfig { allow_underresolved: true, ..StageConfig::default() };
    let mcfg = NoiseConfig { seed: 11, dt: DEFAULT_STEP, t_end: 0.004, ..NoiseConfig::multiplicative() };
    let NoisePath::Multiplicative(bm) = sample_wiener(&mcfg)? else {
        unreachable!("multiplicative configuration")
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for (mode, forcing, t0) in [
        (NoiseMode::Additive, Forcing::Additive(None), 0.0),
        (NoiseMode::Multiplicative, Forcing::Multiplicative(Some(&bm)), 0.003),
    ] {
        let base = BasePair::new(mode, 2.0, 1.0, g)?;
        let start = Instant::now();
        let (_, rep) = iterate(&base, &forcing, &set, &cfg, t0, DEFAULT_STEP)?;
        let failed: Vec<String> = rep
            .identities
            .iter()
            .filter(|c| !c.pass && !c.informational)
            .map(|c| format!("{} = {:.2e}", c.name, c.value))
            .collect();
        let worst_ok = rep
            .identities
            .iter()
            .filter(|c| c.pass && !c.informational)
            .map(|c| c.value)
            .fold(0.0, f64::max);
        pass &= rep.pass();
        parts.push(format!(
            "{mode} ({:.0} s, resolved: {}): {} identities, largest passing {worst_ok:.1e}, failing [{}]",
            start.elapsed().as_secs_f64(),
            rep.resolved,
            rep.identities.iter().filter(|c| !c.informational).count(),
            failed.join(", ")
        ));
    }
    Ok(Verdict::new(pass, parts.join("; ")))
}

fn determinism_criterion() -> Result<Verdict> {
    let g = Grid3::new(32)?;
    let set = DirectionSet::build()?;
    let cfg = StageConfig { allow_underresolved: true, ..StageConfig::default() };
    let base = BasePair::new(NoiseMode::Additive, 2.0, 1.0, g)?;
    let mut paths = Vec::new();
    for seed in [1u64, 2] {
        let c = NoiseConfig { seed, dt: DEFAULT_STEP, t_end: 0.001, n: 8, ..NoiseConfig::additive() };
        let NoisePath::Additive(w) = sample_wiener(&c)? else {
            unreachable!("additive configuration")
        };
        paths.push(ou_convolve(&w, 1.0));
    }
    let rep = determinism_check(
        &base,
        &Forcing::Additive(Some(&paths[0])),
        &Forcing::Additive(Some(&paths[1])),
        &set,
        &cfg,
        DEFAULT_STEP,
    )?;
    Ok(Verdict::new(
        rep.pass && rep.velocity <= DETERMINISM_T0 && rep.stress <= DETERMINISM_T0,
        format!("v differs by {:.1e}, R̊ by {:.1e} at t = 0 across seeds 1 and 2", rep.velocity, rep.stress),
    ))
}

fn ledger_criterion() -> Result<Verdict> {
    let ctx = LedgerContext::with_geometry()?;
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, d) in [(7, 10), (1, 1), (6, 5)] {
        let m = ratio(n, d);
        let expected_alpha = (ratio(5, 1) - ratio(4, 1) * &m) / ratio(480, 1);
        for mode in [NoiseMode::Additive, NoiseMode::Multiplicative] {
            let out = search(&SearchRequest::new(m.clone(), mode, ctx.clone()))?;
            let s = derive(&out.ledger)?;
            let ok = out.report.pass && s.alpha == expected_alpha && alpha(&m) == expected_alpha;
            pass &= ok;
            if !ok {
                parts.push(format!("m = {m} {mode}: failed {:?}", out.report.failed));
            }
        }
        parts.push(format!("m = {m}: α = {expected_alpha}"));
    }
    let one = ratio(1, 1);
    let out = search(&SearchRequest::new(one.clone(), NoiseMode::Additive, ctx))?;
    let s = derive(&out.ledger)?;
    let ps = p_star(&one, &alpha(&one)).expect("p* exists for m = 1");
    let exact = s.exponents.r_par == "-7/12"
        && s.exponents.r_perp == "-19/24"
        && s.exponents.mu == "29/24"
        && s.p_star == ratio(1248, 1217)
        && ps == s.p_star;
    pass &= exact;
    parts.push(format!(
        "m = 1: r_∥ {}, r_⊥ {}, μ {}, p* {}",
        s.exponents.r_par, s.exponents.r_perp, s.exponents.mu, s.p_star
    ));
    Ok(Verdict::new(pass, parts.join("; ")))
}

fn noise_criterion() -> Result<Verdict> {
    let mut parts = Vec::new();

    // Stationary OU variance of single modes.
    let mut ou_ok = true;
    for (k, s0, m) in [([1, 0, 0], 1.0, 1.0), ([1, 1, 0], 2.0, 0.8), ([2, 1, 1], 1.5, 1.2)] {
        let cfg = NoiseConfig { s0, m, dt: 0.5, t_end: 20.0, seed: 5, ..NoiseConfig::additive() };
        let p = probe_mode(&cfg, k, 10_000)?;
        let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
        let stationary = k2.powf(-s0) / (2.0 * k2.powf(m));
        let dev = (p.var_z - stationary).abs() / p.var_z_se;
        ou_ok &= dev <= MC_SIGMA_WINDOW;
        parts.push(format!("k = {k:?}: {dev:.2}σ"));
    }

    // Stopping time of the zero path.
    let big_l = 3.0;
    let b = ScalarPath { dt: 0.01, values: vec![0.0; 301] };
    let tm = stopping_time(&StopPath::Multiplicative(&b), big_l, 1.0 / 24.0)?;
    let z = ou_convolve(&AdditivePath::zero(ModeSet::new(8, 4.0)?, 0.1, 30), 1.0);
    let ta = stopping_time(&StopPath::Additive { z: &z, sigma: 0.1, c_s: 1.0 }, big_l, 1.0 / 60.0)?;
    let stop_ok = ta.time == big_l && tm.time == big_l;
    parts.push(format!("zero-path stopping times {} and {} (L = {big_l})", ta.time, tm.time));

    // Moments across truncations, with and without the trace hypothesis.
    let truncations = [32, 48, 64];
    let good = NoiseConfig { s0: 4.0, dt: 1.0 / 8.0, t_end: 1.0, seed: 1, ..NoiseConfig::additive() };
    let rg = regularity_report(&good, 100, &truncations)?;
    let bad = NoiseConfig { s0: 2.0, ..good };
    let rb = regularity_report(&bad, 100, &truncations)?;
    let reg_ok = rg.trace_hypothesis && rg.bounded && !rb.trace_hypothesis && !rb.bounded;
    parts.push(format!(
        "drift s₀ = 4: {:.1}% / {:.1}%, s₀ = 2: {:.1}% / {:.1}%",
        100.0 * rg.drift_sup,
        100.0 * rg.drift_holder,
        100.0 * rb.drift_sup,
        100.0 * rb.drift_holder
    ));
    Ok(Verdict::new(ou_ok && stop_ok && reg_ok, parts.join("; ")))
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_wildflow"))
        .args(args)
        .env("WILDFLOW_THREADS", "1")
        .output()
        .expect("the binary runs");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn reproducibility_criterion() -> Result<Verdict> {
    let runs: [&[&str]; 5] = [
        &["--json", "geometry", "dump"],
        &["--json", "jets", "verify", "--n", "16"],
        &["--json", "ledger", "search", "--m", "1"],
        &["--json", "noise", "simulate", "--mode", "additive", "--seed", "9", "--samples", "4"],
        &["--json", "stage", "run", "--mode", "multiplicative", "--n", "16", "--t0", "0.003", "--noise", "--seed", "4", "--allow-underresolved"],
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for args in runs {
        let (c1, a) = run_cli(args);
        let (c2, b) = run_cli(args);
        let same = a == b && c1 == c2 && !a.is_empty();
        pass &= same;
        parts.push(format!("{} {}: {}", args[1], args[2], if same { "identical" } else { "differs" }));
    }
    Ok(Verdict::new(pass, parts.join(", ")))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Result<Verdict>); 10] = [
        ("inverse divergence", inverse_divergence_criterion),
        ("geometric reconstruction", geometry_criterion),
        ("jet normalizations", profile_criterion),
        ("jet identities", jet_identity_criterion),
        ("base pairs", base_pair_criterion),
        ("stage exactness", stage_criterion),
        ("determinism at t = 0", determinism_criterion),
        ("ledger search", ledger_criterion),
        ("noise", noise_criterion),
        ("reproducibility", reproducibility_criterion),
    ];
    let mut out = std::io::stdout().lock();
    let mut passed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = f().unwrap_or_else(|e| Verdict::new(false, format!("error: {e}")));
        passed += usize::from(v.pass);
        let _ = writeln!(
            out,
            "criterion {:2} {:<26} {} ({:.1} s) {}",
            i + 1,
            name,
            if v.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
        let _ = out.flush();
    }
    let _ = writeln!(out, "acceptance: {passed}/{} criteria pass", criteria.len());
}
