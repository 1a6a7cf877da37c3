//! Subcommand implementations.
//!
//! Each command builds its configuration in three layers: built-in
//! defaults, then the `--config` file (which may only set keys the
//! defaults know), then flags. The resolved configuration is what the
//! report embeds, and feeding it back through `--config` reproduces the
//! run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use serde_json::{json, Value};

use super::config::{parse_real, Config};
use super::output::{Artifact, Outcome};
use crate::builder::{
    iterate, residual, BasePair, Forcing, StageAux, StageConfig, StagePair, StageReport, ToyScales,
    DEFAULT_STEP, STENCIL,
};
use crate::error::{Error, Result};
use crate::geometry::DirectionSet;
use crate::jets::{verify_jet_identities, CutoffProfiles, JetFamily, JetScales, ShiftMode, GRID_POINTS_PER_FEATURE};
use crate::ledger::search::{default_delta, DEFAULT_MAX_ITERATIONS};
use crate::ledger::{check_feasibility, search, AValue, LedgerContext, NoiseMode, ParameterLedger, SearchRequest};
use crate::noise::{
    ou_convolve, regularity::simulate, regularity_report, sample_wiener, Moment, NoiseConfig, NoisePath, OuPath, ScalarPath,
    StopReason,
};
use crate::spectral::snapshot::Snapshot;
use crate::spectral::{FourierField3, Grid3};
use crate::tolerances::{LEDGER_MUCH_LESS, PROFILE_NORMALIZATION, STAGE_TOTAL_RESIDUAL};

/// Defaults overlaid with the config file and then the flags.
fn resolve(mut defaults: Config, file: Option<&Config>, flags: &Config) -> Result<Config> {
    if let Some(f) = file {
        defaults.merge(f, true)?;
    }
    defaults.merge(flags, true)?;
    Ok(defaults)
}

/// A value as given by the flags, else the file, else `default`.
fn hint<'a>(file: Option<&'a Config>, flags: &'a Config, section: &str, key: &str, default: &'a str) -> &'a str {
    flags.raw(section, key).or_else(|| file.and_then(|f| f.raw(section, key))).unwrap_or(default)
}

fn mode_hint(file: Option<&Config>, flags: &Config, section: &str) -> Result<NoiseMode> {
    hint(file, flags, section, "mode", "additive").parse()
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

fn mark(pass: bool) -> &'static str {
    if pass {
        "ok"
    } else {
        "FAIL"
    }
}

// ---------------------------------------------------------------- geometry

/// `geometry dump`.
pub fn geometry_dump(set: &DirectionSet, file: Option<&Config>, flags: &Config) -> Result<(Config, Outcome)> {
    let mut d = Config::new();
    d.set("geometry", "m_samples", 2000);
    let cfg = resolve(d, file, flags)?;
    let samples = cfg.usize("geometry", "m_samples")?;
    if samples == 0 {
        return Err(Error::InvalidArgument("m_samples must be positive".into()));
    }
    let dump = set.dump(samples);
    let pass = dump.positivity_certified && dump.positivity_radius > 0.0;
    let mut t = String::new();
    let _ = writeln!(t, "direction set (n* = {})", dump.n_star);
    for (k, ((xi, a), b)) in dump.directions.iter().zip(&dump.frames_a).zip(&dump.frames_b).enumerate() {
        let _ = writeln!(t, "  xi_{k} = {xi}   A = {a}   B = {b}   c(Id) = {}", dump.coefficients_at_identity[k]);
    }
    let _ = writeln!(t, "positivity radius   {:.12e}  certified: {}", dump.positivity_radius, dump.positivity_certified);
    let _ = writeln!(t, "admissible radius   {:.12e}", dump.admissible_radius);
    let _ = writeln!(t, "C_Lambda            {:.12e}", dump.c_lambda);
    let _ = writeln!(
        t,
        "M                   {:.12e}  ({} samples, change on doubling {:.3e})",
        dump.m, dump.m_samples, dump.m_relative_change_on_doubling
    );
    Ok((cfg, Outcome { pass, text: t, result: to_value(&dump), artifacts: Vec::new() }))
}

// -------------------------------------------------------------------- jets

fn jets_defaults() -> Config {
    let mut d = Config::new();
    for (k, v) in [
        ("lambda", "8"),
        ("r_perp", "1/4"),
        ("r_par", "1/2"),
        ("mu", "3"),
        ("n", "32"),
        ("t", "0.1"),
        ("profile_order", "4"),
        ("shift", "centered"),
    ] {
        d.set("jets", k, v);
    }
    d
}

/// `jets build` (with snapshots) and `jets verify` (report only).
pub fn jets(set: &DirectionSet, file: Option<&Config>, flags: &Config, snapshots: bool) -> Result<(Config, Outcome)> {
    let cfg = resolve(jets_defaults(), file, flags)?;
    let scales = JetScales {
        r_perp: cfg.f64("jets", "r_perp")?,
        r_par: cfg.f64("jets", "r_par")?,
        lambda: cfg.f64("jets", "lambda")?,
        mu: cfg.f64("jets", "mu")?,
    };
    let shift = match cfg.string("jets", "shift")?.as_str() {
        "centered" => ShiftMode::Centered,
        "disjoint" => ShiftMode::Disjoint,
        other => return Err(Error::InvalidArgument(format!("shift must be centered or disjoint, got '{other}'"))),
    };
    let t = cfg.f64("jets", "t")?;
    let grid = Grid3::new(cfg.usize("jets", "n")?)?;
    let family = JetFamily::build(CutoffProfiles::build(cfg.usize("jets", "profile_order")?)?, set, scales, shift)?;
    let rep = verify_jet_identities(&family, set, &grid, t)?;
    let pc = &family.profiles.checks;
    let profiles_pass = pc.phi_sq_rel_error < PROFILE_NORMALIZATION && pc.psi_sq_rel_error < PROFILE_NORMALIZATION;
    // Grid averages are only meaningful when the grid resolves the jets.
    let moments = rep.grid_resolved.then(|| rep.moments_pass());
    let pass = rep.linear_pass() && rep.quadratic_pass() && rep.structure_pass() && profiles_pass && moments.unwrap_or(true);

    let mut tx = String::new();
    let _ = writeln!(
        tx,
        "jets: lambda = {}, r_perp = {}, r_par = {}, mu = {}, kappa = {}, tube radius = {:.6e}",
        scales.lambda,
        scales.r_perp,
        scales.r_par,
        scales.mu,
        family.kappa,
        family.tube_radius()
    );
    let _ = writeln!(tx, "grid n = {} (resolving n = {})", grid.n(), family.min_resolving_n(GRID_POINTS_PER_FEATURE));
    let _ = writeln!(tx, "  {:<34} {:>12}  verdict", "check", "value");
    let rows: [(&str, f64, Option<bool>); 10] = [
        ("profile |int phi^2 - 4pi^2|", pc.phi_sq_rel_error, Some(profiles_pass)),
        ("profile |int psi^2 - 2pi|", pc.psi_sq_rel_error, Some(profiles_pass)),
        ("div(W + Wc)", rep.div_free, Some(rep.linear_pass())),
        ("curl curl V - (W + Wc)", rep.curl_curl, Some(rep.linear_pass())),
        ("div(W x W) - dt(phi^2 psi^2 xi)/mu", rep.quadratic, Some(rep.quadratic_pass())),
        ("periodicity defect", rep.periodicity, Some(rep.structure_pass())),
        ("support overlaps", rep.overlaps as f64, Some(rep.structure_pass())),
        ("grid mean of W", rep.mean_w, moments),
        ("grid mean of W x W - xi x xi", rep.mean_ww, moments),
        ("reconstruction", rep.reconstruction, None),
    ];
    for (name, v, ok) in rows {
        let verdict = ok.map_or("info", mark);
        let _ = writeln!(tx, "  {name:<34} {v:>12.3e}  {verdict}");
    }

    let mut artifacts = Vec::new();
    if snapshots {
        let n = grid.n();
        for k in 0..family.len() {
            for (name, pick) in [("w", 0usize), ("wc", 1)] {
                let d = family.dense_vector(k, t, n, |f| if pick == 0 { f.w } else { f.wc });
                let field = FourierField3::from_physical(grid, [&d[0], &d[1], &d[2]])?;
                artifacts.push(Artifact { name: format!("{name}_{k}.wnf"), bytes: Snapshot::of(&field, Some(t)).to_bytes() });
            }
        }
    }
    let result = json!({
        "scales": to_value(&scales),
        "shift": cfg.string("jets", "shift")?,
        "kappa": family.kappa,
        "tube_radius": family.tube_radius(),
        "resolving_n": family.min_resolving_n(GRID_POINTS_PER_FEATURE),
        "profiles": to_value(pc),
        "identities": to_value(&rep),
        "checks": {
            "profiles": profiles_pass,
            "linear": rep.linear_pass(),
            "quadratic": rep.quadratic_pass(),
            "structure": rep.structure_pass(),
            "moments": moments,
        },
    });
    Ok((cfg, Outcome { pass, text: tx, result, artifacts }))
}

// ------------------------------------------------------------------ ledger

fn ledger_context(cfg: &Config) -> Result<LedgerContext> {
    let mut ctx = LedgerContext::with_geometry()?;
    ctx.k_target = cfg.f64("ledger", "k_target")?;
    ctx.t_target = cfg.f64("ledger", "t_target")?;
    ctx.q_max = cfg.usize("ledger", "q_max")? as u32;
    ctx.epsilon = cfg.f64("ledger", "epsilon")?;
    Ok(ctx)
}

fn ledger_common(d: &mut Config) {
    for (k, v) in [
        ("mode", "additive".to_string()),
        ("m", "1".to_string()),
        ("sigma", "1".to_string()),
        ("delta", "auto".to_string()),
        ("epsilon", LEDGER_MUCH_LESS.to_string()),
        ("q_max", "2".to_string()),
        ("k_target", "2".to_string()),
        ("t_target", "1".to_string()),
    ] {
        d.set("ledger", k, v);
    }
}

fn delta_value(cfg: &Config, mode: NoiseMode) -> Result<num_rational::BigRational> {
    match cfg.string("ledger", "delta")?.as_str() {
        "auto" => Ok(default_delta(mode)),
        _ => cfg.rational("ledger", "delta"),
    }
}

/// `ledger check`.
pub fn ledger_check(file: Option<&Config>, flags: &Config) -> Result<(Config, Outcome)> {
    let mut d = Config::new();
    ledger_common(&mut d);
    for k in ["a", "b", "beta", "big_l", "c_r"] {
        d.set("ledger", k, "");
    }
    let cfg = resolve(d, file, flags)?;
    let mode = cfg.mode("ledger", "mode")?;
    let b: BigUint = cfg
        .string("ledger", "b")?
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("b must be a positive integer, got '{}'", cfg.raw("ledger", "b").unwrap_or(""))))?;
    let ledger = ParameterLedger {
        m: cfg.rational("ledger", "m")?,
        a: AValue::parse(&cfg.string("ledger", "a")?)?,
        b,
        beta: cfg.rational("ledger", "beta")?,
        big_l: cfg.f64("ledger", "big_l")?,
        c_r: cfg.f64("ledger", "c_r")?,
        sigma: cfg.f64("ledger", "sigma")?,
        delta_holder: delta_value(&cfg, mode)?,
        mode,
        q: 0,
    };
    let report = check_feasibility(&ledger, &ledger_context(&cfg)?);
    Ok((cfg, Outcome { pass: report.pass, text: report.render_text(), result: to_value(&report), artifacts: Vec::new() }))
}

/// `ledger search`.
pub fn ledger_search(file: Option<&Config>, flags: &Config) -> Result<(Config, Outcome)> {
    let mut d = Config::new();
    ledger_common(&mut d);
    d.set("ledger", "c_r", "auto");
    d.set("ledger", "max_iterations", DEFAULT_MAX_ITERATIONS);
    let cfg = resolve(d, file, flags)?;
    let mode = cfg.mode("ledger", "mode")?;
    let mut req = SearchRequest::new(cfg.rational("ledger", "m")?, mode, ledger_context(&cfg)?);
    req.c_r = match cfg.string("ledger", "c_r")?.as_str() {
        "auto" => None,
        _ => Some(cfg.f64("ledger", "c_r")?),
    };
    req.delta_holder = Some(delta_value(&cfg, mode)?);
    req.sigma = cfg.f64("ledger", "sigma")?;
    req.max_iterations = cfg.usize("ledger", "max_iterations")?;
    let out = search(&req)?;
    let text = format!("{}\n{}", out.render_text(), out.report.render_text());
    let result = json!({ "search": to_value(&out.summary()), "report": to_value(&out.report) });
    Ok((cfg, Outcome { pass: out.report.pass, text, result, artifacts: Vec::new() }))
}

// ------------------------------------------------------------------- stage

fn stage_defaults() -> Config {
    let s = ToyScales::default();
    let c = StageConfig::default();
    let n = NoiseConfig::additive();
    let mut d = Config::new();
    d.set("grid", "n", 32);
    d.set("scales", "kind", "toy");
    d.set("scales", "lambda_q", s.lambda_q);
    d.set("scales", "lambda_q1", s.lambda_q1);
    d.set("scales", "r_perp", "1/6");
    d.set("scales", "r_par", s.r_par);
    d.set("scales", "mu", s.mu);
    d.set("scales", "l", s.l);
    d.set("stage", "mode", "additive");
    d.set("stage", "q", 0);
    d.set("stage", "t0", 0);
    d.set("stage", "h", DEFAULT_STEP);
    d.set("stage", "big_l", 2);
    d.set("stage", "m", 1);
    d.set("stage", "c_r", c.c_r);
    d.set("stage", "delta_next", c.delta_next);
    d.set("stage", "profile_order", c.profile_order);
    d.set("stage", "allow_underresolved", c.allow_underresolved);
    d.set("noise", "enabled", false);
    d.set("noise", "seed", n.seed);
    d.set("noise", "s0", n.s0);
    d.set("noise", "sigma", n.sigma);
    d.set("noise", "n", 8);
    d
}

enum Driving {
    Additive(Option<OuPath>),
    Multiplicative(Option<ScalarPath>),
}

impl Driving {
    fn forcing(&self) -> Forcing<'_> {
        match self {
            Driving::Additive(p) => Forcing::Additive(p.as_ref()),
            Driving::Multiplicative(p) => Forcing::Multiplicative(p.as_ref()),
        }
    }
}

/// Sample the noise on the step grid t = i·h, far enough to cover every
/// time the step reads.
fn driving(cfg: &Config, mode: NoiseMode, m: f64, t0: f64, h: f64) -> Result<Driving> {
    if !cfg.bool("noise", "enabled")? {
        return Ok(match mode {
            NoiseMode::Additive => Driving::Additive(None),
            NoiseMode::Multiplicative => Driving::Multiplicative(None),
        });
    }
    let steps = (t0 / h).round();
    if t0 < 0.0 || (steps * h - t0).abs() > 1e-9 * h.max(t0) {
        return Err(Error::InvalidArgument(format!("with noise, t0 = {t0} must be a non-negative multiple of h = {h}")));
    }
    let base = match mode {
        NoiseMode::Additive => NoiseConfig::additive(),
        NoiseMode::Multiplicative => NoiseConfig::multiplicative(),
    };
    let ncfg = NoiseConfig {
        seed: cfg.u64("noise", "seed")?,
        s0: cfg.f64("noise", "s0")?,
        sigma: cfg.f64("noise", "sigma")?,
        n: cfg.usize("noise", "n")?,
        m,
        dt: h,
        t_end: (steps + 8.0) * h,
        ..base
    };
    Ok(match sample_wiener(&ncfg)? {
        NoisePath::Additive(w) => Driving::Additive(Some(ou_convolve(&w, m))),
        NoisePath::Multiplicative(b) => Driving::Multiplicative(Some(b)),
    })
}

fn stage_text(rep: &StageReport) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "stage {} -> {} ({} noise), t0 = {}, h = {:e}, n = {}", rep.q - 1, rep.q, rep.mode, rep.t0, rep.h, rep.n);
    let _ = writeln!(
        t,
        "jets: kappa = {}, tube radius = {:.6e}, resolving n = {}{}",
        rep.kappa,
        rep.tube_radius,
        rep.resolving_n,
        if rep.resolved { "" } else { "  (UNDER-RESOLVED: toy grid, jets not resolved)" }
    );
    let _ = writeln!(
        t,
        "pump: sigma = {:.6e}, radius = {:.6e}, rho in [{:.6e}, {:.6e}], max |R_l|/rho = {:.6e}",
        rep.stress_scale, rep.domain_radius, rep.rho_min, rep.rho_max, rep.stress_ratio_max
    );
    let _ = writeln!(t, "\nidentities at t0:");
    let _ = writeln!(t, "  {:<42} {:>12} {:>10}  verdict", "identity", "relative", "tolerance");
    for c in &rep.identities {
        let verdict = if c.informational { "info" } else { mark(c.pass) };
        let tol = if c.informational { "-".to_string() } else { format!("{:.0e}", c.tolerance) };
        let _ = writeln!(t, "  {:<42} {:>12.3e} {:>10}  {verdict}", c.name, c.value, tol);
    }
    let _ = writeln!(t, "\nnew stress, L2 norms of the pieces:");
    for p in &rep.decomposition {
        let _ = writeln!(t, "  {:<42} {:>12.3e}", p.name, p.value);
    }
    let _ = writeln!(t, "\nsizes (toy scales; not proof-scale bounds):");
    let _ = writeln!(t, "  |v1 - v0|_L2 = {:.3e}   (M0 delta)^1/2 = {:.3e}", rep.increment_l2, rep.increment_scale);
    let _ = writeln!(t, "  |R0|_L1 = {:.3e}   |R1|_L1 = {:.3e}", rep.stress_l1_before, rep.stress_l1_after);
    let _ = writeln!(
        t,
        "  residual before: {:.3e}   after: {:.3e} (relative)",
        rep.residual_before.relative, rep.residual_after.relative
    );
    t
}

fn pair_artifacts(pair: &StagePair) -> Vec<Artifact> {
    let times = crate::builder::stencil_times(pair.t0, pair.h);
    let mut out = Vec::new();
    let mut meta = Config::new();
    meta.set("pair", "mode", pair.mode);
    meta.set("pair", "q", pair.q);
    meta.set("pair", "m", pair.m);
    meta.set("pair", "t0", pair.t0);
    meta.set("pair", "h", pair.h);
    for j in 0..STENCIL {
        let tag = Some(times[j]);
        out.push(Artifact { name: format!("v_{j}.wnf"), bytes: Snapshot::of(&pair.v[j], tag).to_bytes() });
        out.push(Artifact { name: format!("r_{j}.wnf"), bytes: Snapshot::of(&pair.r[j], tag).to_bytes() });
        out.push(Artifact { name: format!("pi_{j}.wnf"), bytes: Snapshot::of(&pair.pi[j], tag).to_bytes() });
    }
    match &pair.aux {
        StageAux::Additive { z } => {
            for (j, zj) in z.iter().enumerate() {
                out.push(Artifact { name: format!("z_{j}.wnf"), bytes: Snapshot::of(zj, Some(times[j])).to_bytes() });
            }
        }
        StageAux::Multiplicative { upsilon } => {
            meta.set("pair", "upsilon", upsilon.iter().map(|u| u.to_string()).collect::<Vec<_>>().join(","));
        }
    }
    out.push(Artifact { name: "pair.cfg".into(), bytes: meta.render().into_bytes() });
    out
}

/// `stage run`.
pub fn stage_run(set: &DirectionSet, file: Option<&Config>, flags: &Config, keep_pair: bool) -> Result<(Config, Outcome)> {
    let cfg = resolve(stage_defaults(), file, flags)?;
    if cfg.string("scales", "kind")? != "toy" {
        return Err(Error::InvalidArgument(
            "only toy scales can be run on a grid; ledger-scale frequencies are checked with `ledger check`".into(),
        ));
    }
    let q = cfg.usize("stage", "q")?;
    if q != 0 {
        return Err(Error::InvalidArgument(format!(
            "stage q = {q}: only the step from the base pair (q = 0 -> 1) is supported; the next jets would not fit on any grid that resolves these"
        )));
    }
    let mode = cfg.mode("stage", "mode")?;
    let m = cfg.f64("stage", "m")?;
    let t0 = cfg.f64("stage", "t0")?;
    let h = cfg.f64("stage", "h")?;
    let scales = ToyScales {
        lambda_q: cfg.f64("scales", "lambda_q")?,
        lambda_q1: cfg.f64("scales", "lambda_q1")?,
        r_perp: cfg.f64("scales", "r_perp")?,
        r_par: cfg.f64("scales", "r_par")?,
        mu: cfg.f64("scales", "mu")?,
        l: cfg.f64("scales", "l")?,
    };
    let stage_cfg = StageConfig {
        scales,
        c_r: cfg.f64("stage", "c_r")?,
        delta_next: cfg.f64("stage", "delta_next")?,
        profile_order: cfg.usize("stage", "profile_order")?,
        allow_underresolved: cfg.bool("stage", "allow_underresolved")?,
    };
    let grid = Grid3::new(cfg.usize("grid", "n")?)?;
    let base = BasePair::new(mode, cfg.f64("stage", "big_l")?, m, grid)?;
    let drive = driving(&cfg, mode, m, t0, h)?;
    let (pair, rep) = iterate(&base, &drive.forcing(), set, &stage_cfg, t0, h)?;
    let artifacts = if keep_pair { pair_artifacts(&pair) } else { Vec::new() };
    Ok((cfg, Outcome { pass: rep.pass(), text: stage_text(&rep), result: to_value(&rep), artifacts }))
}

fn read_pair(dir: &Path) -> Result<StagePair> {
    let meta = Config::parse(&fs::read_to_string(dir.join("pair.cfg"))?)?;
    let mode = meta.mode("pair", "mode")?;
    let read = |name: String| Snapshot::read(&dir.join(name));
    let mut v = Vec::new();
    let mut r = Vec::new();
    let mut pi = Vec::new();
    for j in 0..STENCIL {
        v.push(read(format!("v_{j}.wnf"))?.into_vector()?);
        let mut rj = read(format!("r_{j}.wnf"))?.into_tensor()?;
        rj.trace_free = true;
        r.push(rj);
        pi.push(read(format!("pi_{j}.wnf"))?.into_scalar()?);
    }
    let aux = match mode {
        NoiseMode::Additive => StageAux::Additive {
            z: (0..STENCIL).map(|j| read(format!("z_{j}.wnf"))?.into_vector()).collect::<Result<_>>()?,
        },
        NoiseMode::Multiplicative => {
            let raw = meta.string("pair", "upsilon")?;
            let upsilon = raw
                .split(',')
                .map(|s| parse_real(s.trim()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| Error::Snapshot(format!("bad upsilon list '{raw}'")))?;
            StageAux::Multiplicative { upsilon }
        }
    };
    let pair = StagePair {
        mode,
        q: meta.usize("pair", "q")?,
        m: meta.f64("pair", "m")?,
        t0: meta.f64("pair", "t0")?,
        h: meta.f64("pair", "h")?,
        v,
        r,
        pi,
        aux,
    };
    pair.validate()?;
    Ok(pair)
}

/// `stage residual`.
pub fn stage_residual(input: &Path, flags: &Config) -> Result<(Config, Outcome)> {
    let mut d = Config::new();
    d.set("residual", "in", input.display());
    let cfg = resolve(d, None, flags)?;
    let pair = read_pair(input)?;
    let rep = residual(&pair)?;
    let grad = rep.gradient_relative.unwrap_or(f64::INFINITY);
    let pass = rep.relative <= STAGE_TOTAL_RESIDUAL && grad <= STAGE_TOTAL_RESIDUAL;
    let mut t = String::new();
    let _ = writeln!(t, "residual of the stage-{} pair at t = {} (n = {})", rep.q, rep.t, pair.grid().n());
    for term in &rep.terms {
        let _ = writeln!(t, "  {:<24} {:>12.3e}", term.name, term.value);
    }
    let _ = writeln!(t, "  projected residual  L2 = {:.3e}  H^-1 = {:.3e}  relative = {:.3e}  {}", rep.l2, rep.h_minus1, rep.relative, mark(rep.relative <= STAGE_TOTAL_RESIDUAL));
    let _ = writeln!(t, "  gradient residual   relative = {:.3e}  {}", grad, mark(grad <= STAGE_TOTAL_RESIDUAL));
    Ok((cfg, Outcome { pass, text: t, result: to_value(&rep), artifacts: Vec::new() }))
}

/// The base pair's own stencil, for `stage residual` round trips in tests.
#[cfg(test)]
pub(crate) fn base_pair_artifacts(n: usize, mode: NoiseMode) -> Vec<Artifact> {
    use crate::builder::base_pair;
    let b = BasePair::new(mode, 2.0, 1.0, Grid3::new(n).unwrap()).unwrap();
    let f = match mode {
        NoiseMode::Additive => Forcing::Additive(None),
        NoiseMode::Multiplicative => Forcing::Multiplicative(None),
    };
    pair_artifacts(&base_pair(&b, &f, 0.1, 1e-3).unwrap())
}

// ------------------------------------------------------------------- noise

/// `noise simulate`.
pub fn noise_simulate(file: Option<&Config>, flags: &Config) -> Result<(Config, Outcome)> {
    let mode = mode_hint(file, flags, "noise")?;
    let n = match mode {
        NoiseMode::Additive => NoiseConfig::additive(),
        NoiseMode::Multiplicative => NoiseConfig::multiplicative(),
    };
    let mut d = Config::new();
    d.set("noise", "mode", mode);
    d.set("noise", "m", n.m);
    d.set("noise", "s0", n.s0);
    d.set("noise", "sigma", n.sigma);
    d.set("noise", "dt", n.dt);
    d.set("noise", "t_end", n.t_end);
    d.set("noise", "seed", n.seed);
    d.set("noise", "n", n.n);
    d.set("noise", "c_s", n.c_s);
    d.set("noise", "delta", n.delta);
    d.set("noise", "samples", 8);
    d.set("noise", "big_l", "none");
    d.set("noise", "l", "1/8");
    d.set("noise", "regularity", false);
    d.set("noise", "truncations", "32,48,64");
    let cfg = resolve(d, file, flags)?;
    let ncfg = NoiseConfig {
        mode,
        s0: cfg.f64("noise", "s0")?,
        sigma: cfg.f64("noise", "sigma")?,
        m: cfg.f64("noise", "m")?,
        dt: cfg.f64("noise", "dt")?,
        t_end: cfg.f64("noise", "t_end")?,
        seed: cfg.u64("noise", "seed")?,
        n: cfg.usize("noise", "n")?,
        c_s: cfg.f64("noise", "c_s")?,
        delta: cfg.f64("noise", "delta")?,
    };
    let samples = cfg.usize("noise", "samples")?;
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be positive".into()));
    }
    let big_l = match cfg.string("noise", "big_l")?.as_str() {
        "none" => None,
        _ => Some(cfg.f64("noise", "big_l")?),
    };
    let summaries = simulate(&ncfg, samples, big_l, cfg.f64("noise", "l")?)?;
    let sup = Moment::of(&summaries.iter().map(|s| s.sup_level).collect::<Vec<_>>());
    let hol = Moment::of(&summaries.iter().map(|s| s.holder).collect::<Vec<_>>());
    let stopped = summaries.iter().filter(|s| s.stop.is_some_and(|t| t.reason != StopReason::Cap)).count();
    let ups: Vec<bool> = summaries.iter().filter_map(|s| s.upsilon.as_ref().map(|u| u.pass)).collect();
    let ups_pass = ups.iter().all(|&p| p);
    let mut pass = ups_pass;

    let (level, holder) = match mode {
        NoiseMode::Additive => ("sup |z|_H^((5+s)/2)", "|z|_C^(2/5-2d) H^((3+s)/2)"),
        NoiseMode::Multiplicative => ("sup |B|", "|B|_C^(1/2-2d)"),
    };
    let mut t = String::new();
    let _ = writeln!(t, "{samples} {mode} paths, dt = {}, T = {}, seed = {}", ncfg.dt, ncfg.t_end, ncfg.seed);
    let _ = writeln!(t, "  {:<4} {:>14} {:>14} {:>10}", "path", "level", "holder", "T_L");
    for s in &summaries {
        let stop = s.stop.map_or("-".to_string(), |st| format!("{:.4}", st.time));
        let _ = writeln!(t, "  {:<4} {:>14.6e} {:>14.6e} {:>10}", s.sample, s.sup_level, s.holder, stop);
    }
    let _ = writeln!(t, "E {level} = {:.6e} +- {:.2e}", sup.mean, sup.se);
    let _ = writeln!(t, "E {holder} = {:.6e} +- {:.2e}", hol.mean, hol.se);
    if big_l.is_some() {
        let _ = writeln!(t, "stopped before L: {stopped} of {samples}");
    }
    if !ups.is_empty() {
        let _ = writeln!(t, "Upsilon bounds hold on {} of {} paths  {}", ups.iter().filter(|&&p| p).count(), ups.len(), mark(ups_pass));
    }
    let regularity = if cfg.bool("noise", "regularity")? {
        let r = regularity_report(&ncfg, samples, &cfg.usize_list("noise", "truncations")?)?;
        // The prediction: bounded under refinement exactly when the trace
        // hypothesis holds.
        let agrees = r.bounded == r.trace_hypothesis;
        pass &= agrees;
        let _ = writeln!(t, "\nregularity across truncations (trace hypothesis: {}):", r.trace_hypothesis);
        for tm in &r.truncations {
            let _ = writeln!(
                t,
                "  n = {:>3}  E sup H^((5+s)/2) = {:.4e}   E C^(2/5-d) = {:.4e}   E C^(1/2-d) = {:.4e}",
                tm.n, tm.sup_high.mean, tm.holder.mean, tm.holder_contrast.mean
            );
        }
        let _ = writeln!(
            t,
            "  drift: sup {:.3}, holder {:.3}, contrast {:.3} -> {}  {}",
            r.drift_sup, r.drift_holder, r.drift_contrast, r.verdict, mark(agrees)
        );
        Some(r)
    } else {
        None
    };
    let result = json!({
        "samples": to_value(&summaries),
        "aggregate": {
            "level": to_value(&sup),
            "holder": to_value(&hol),
            "stopped_before_l": big_l.map(|_| stopped),
            "upsilon_checked": ups.len(),
            "upsilon_pass": ups_pass,
        },
        "regularity": regularity.as_ref().map(to_value),
    });
    Ok((cfg, Outcome { pass, text: t, result, artifacts: Vec::new() }))
}

// ------------------------------------------------------------------ report

fn collect_reports(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let top = dir.join("report.json");
    if top.is_file() {
        found.push(top);
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    for s in subdirs {
        let p = s.join("report.json");
        if p.is_file() {
            found.push(p);
        }
    }
    Ok(found)
}

/// `report`: one row per run report found in `dir` or its immediate
/// subdirectories. Earlier aggregates are skipped, so rerunning with
/// `--out` into the same directory gives the same table.
pub fn report(dir: &Path, flags: &Config) -> Result<(Config, Outcome)> {
    let mut d = Config::new();
    d.set("report", "dir", dir.display());
    let cfg = resolve(d, None, flags)?;
    let mut rows = Vec::new();
    for path in collect_reports(dir)? {
        let v: Value = serde_json::from_str(&fs::read_to_string(&path)?)
            .map_err(|e| Error::InvalidArgument(format!("{}: not a report ({e})", path.display())))?;
        let command = v["command"].as_str().unwrap_or("?").to_string();
        if command == "report" {
            continue;
        }
        let rel = path.parent().and_then(|p| p.strip_prefix(dir).ok()).map(|p| p.display().to_string()).unwrap_or_default();
        let failed: Vec<String> = match command.as_str() {
            "stage run" => v["result"]["identities"]
                .as_array()
                .map(|a| {
                    a.iter()
                        .filter(|c| c["pass"] == Value::Bool(false) && c["informational"] == Value::Bool(false))
                        .filter_map(|c| c["name"].as_str().map(str::to_string))
                        .collect()
                })
                .unwrap_or_default(),
            "ledger check" | "ledger search" => {
                let r = if command == "ledger check" { &v["result"]["failed"] } else { &v["result"]["report"]["failed"] };
                r.as_array().map(|a| a.iter().filter_map(|x| x.as_str().map(str::to_string)).collect()).unwrap_or_default()
            }
            _ => Vec::new(),
        };
        rows.push(json!({
            "run": if rel.is_empty() { ".".to_string() } else { rel },
            "command": command,
            "pass": v["pass"].as_bool().unwrap_or(false),
            "failed": failed,
        }));
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument(format!("no run reports under {}", dir.display())));
    }
    let pass = rows.iter().all(|r| r["pass"] == Value::Bool(true));
    let mut t = String::new();
    let _ = writeln!(t, "  {:<28} {:<16} {:<7} failed checks", "run", "command", "verdict");
    for r in &rows {
        let failed: Vec<&str> = r["failed"].as_array().map(|a| a.iter().filter_map(|x| x.as_str()).collect()).unwrap_or_default();
        let _ = writeln!(
            t,
            "  {:<28} {:<16} {:<7} {}",
            r["run"].as_str().unwrap_or(""),
            r["command"].as_str().unwrap_or(""),
            if r["pass"] == Value::Bool(true) { "PASS" } else { "FAIL" },
            failed.join(", ")
        );
    }
    let n_pass = rows.iter().filter(|r| r["pass"] == Value::Bool(true)).count();
    let _ = writeln!(t, "{n_pass} of {} runs pass", rows.len());
    let count = rows.len();
    let result = json!({ "runs": rows, "count": count, "passed": n_pass });
    Ok((cfg, Outcome { pass, text: t, result, artifacts: Vec::new() }))
}
