//! Subcommand dispatch. Every run writes `<name>.csv` (plus any secondary
//! tables) and `<name>.manifest.json` into the output directory.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;
use sg2d_core::chaos::{chaos_moments, chaos_regularity_scan};
use sg2d_core::dynamics::{
    chaos_path, dpd_check, evolve_hyperbolic, evolve_parabolic, invariance_experiment, parabolic_invariance_experiment,
    picard_diagnostic, DpdConfig, InvarianceConfig, InvarianceReport, ObservableSet,
};
use sg2d_core::fourier::GreenKernel;
use sg2d_core::gaussian::sample_mu1;
use sg2d_core::gibbs::{estimate_logz_mc, optimize_drift, sample_gibbs, variational_objective, DriftControl, GibbsConfig, OptimizeConfig};
use sg2d_core::io::write_field_snapshot;
use sg2d_core::rng::label;
use sg2d_core::stats::ols_slope;
use sg2d_core::{build_linear_tables, compute_gamma_n, compute_sigma_n, sample_mu, LinearModel, PhaseState, RngStream, SpectralGrid};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::{RunManifest, RunStatus};

pub const SUBCOMMANDS: &[&str] = &[
    "sigma",
    "green",
    "chaos-moments",
    "chaos-scan",
    "gibbs-sample",
    "logz",
    "evolve",
    "invariance",
    "invariance-parabolic",
    "dpd-check",
    "picard",
];

/// Result of one subcommand: the manifest that was written and the process
/// exit status (0 ok, 1 breached check, 2 error).
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub exit_code: i32,
}

/// Minimal CSV table; fields containing commas or quotes are quoted.
struct Table {
    text: String,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        let mut t = Self { text: String::new() };
        t.row(header.iter().map(|s| s.to_string()));
        t
    }

    fn row(&mut self, fields: impl IntoIterator<Item = String>) {
        let cells: Vec<String> = fields
            .into_iter()
            .map(|f| if f.contains([',', '"']) { format!("\"{}\"", f.replace('"', "\"\"")) } else { f })
            .collect();
        let _ = writeln!(self.text, "{}", cells.join(","));
    }
}

struct Context<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    name: &'a str,
    outputs: Vec<String>,
    failures: Vec<String>,
    details: serde_json::Value,
}

impl Context<'_> {
    fn write(&mut self, file: &str, table: Table) -> Result<(), CliError> {
        std::fs::write(self.out.join(file), table.text)?;
        self.outputs.push(file.to_string());
        Ok(())
    }

    fn main_csv(&self) -> String {
        format!("{}.csv", self.name)
    }

    fn check(&mut self, ok: bool, what: String) {
        if !ok {
            self.failures.push(what);
        }
    }

    fn grid(&self) -> Result<std::sync::Arc<SpectralGrid>, CliError> {
        Ok(SpectralGrid::with_profile(self.cfg.grid_spec(), self.cfg.cutoff_profile()?)?)
    }

    fn gibbs_config(&self, samples: usize) -> GibbsConfig {
        GibbsConfig {
            samples,
            burn_in: self.cfg.burn_in,
            thin: self.cfg.thin,
            chains: self.cfg.chains,
            scale: self.cfg.s,
            ..GibbsConfig::default()
        }
    }

    fn invariance_config(&self) -> InvarianceConfig {
        let mut inv = InvarianceConfig::new(self.cfg.t_final, self.cfg.h, self.cfg.replicas);
        inv.step_halving = self.cfg.step_halving;
        inv.from_prior = self.cfg.from_prior;
        inv.gibbs = GibbsConfig {
            chains: self.cfg.chains,
            ..self.gibbs_config(self.cfg.replicas)
        };
        inv
    }
}

fn f(x: f64) -> String {
    format!("{x:.12e}")
}

/// Runs one subcommand and always writes its manifest (also on error).
pub fn run(subcommand: &str, cfg: Option<&RunConfig>, out: &Path) -> RunOutcome {
    let start = Instant::now();
    let mut manifest = RunManifest::new(subcommand, cfg);
    let manifest_path = out.join(format!("{subcommand}.manifest.json"));
    let result = match cfg {
        None => Err(CliError::Invalid("no valid configuration".into())),
        Some(cfg) => std::fs::create_dir_all(out).map_err(CliError::from).and_then(|_| {
            let mut ctx = Context {
                cfg,
                out,
                name: subcommand,
                outputs: Vec::new(),
                failures: Vec::new(),
                details: json!({}),
            };
            dispatch(&mut ctx).map(|_| ctx)
        }),
    };
    let exit_code = match result {
        Ok(ctx) => {
            manifest.outputs = ctx.outputs;
            manifest.details = ctx.details;
            if ctx.failures.is_empty() {
                0
            } else {
                manifest.status = RunStatus::Failed;
                manifest.failures = ctx.failures;
                1
            }
        }
        Err(e) => {
            manifest.status = RunStatus::Error;
            manifest.error = Some(e.to_string());
            e.exit_code()
        }
    };
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    let _ = std::fs::create_dir_all(out);
    if let Err(e) = manifest.write(&manifest_path) {
        eprintln!("sg2d: could not write manifest {}: {e}", manifest_path.display());
    }
    RunOutcome { manifest, exit_code }
}

fn dispatch(ctx: &mut Context) -> Result<(), CliError> {
    match ctx.name {
        "sigma" => sigma(ctx),
        "green" => green(ctx),
        "chaos-moments" => chaos(ctx),
        "chaos-scan" => scan(ctx),
        "gibbs-sample" => gibbs(ctx),
        "logz" => logz(ctx),
        "evolve" => evolve(ctx),
        "invariance" => invariance(ctx, LinearModel::Hyperbolic),
        "invariance-parabolic" => invariance(ctx, LinearModel::Parabolic),
        "dpd-check" => dpd(ctx),
        "picard" => picard(ctx),
        other => Err(CliError::Invalid(format!("unknown subcommand `{other}`"))),
    }
}

fn sigma(ctx: &mut Context) -> Result<(), CliError> {
    let profile = ctx.cfg.cutoff_profile()?;
    let ns = &ctx.cfg.ns;
    let sig: Vec<f64> = ns.iter().map(|&n| compute_sigma_n(n, profile)).collect();
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let target = 1.0 / (2.0 * PI);
    let slope = (ns.len() >= 2).then(|| ols_slope(&xs, &sig).slope);
    let mut t = Table::new(&["N", "sigma_n", "gamma_n", "log_n", "fitted_slope", "target_slope"]);
    for (k, &n) in ns.iter().enumerate() {
        t.row([
            n.to_string(),
            f(sig[k]),
            f(compute_gamma_n(n, ctx.cfg.beta_sq, profile)),
            f(xs[k]),
            slope.map_or_else(String::new, f),
            f(target),
        ]);
    }
    if let Some(s) = slope {
        let rel = (s - target).abs() / target;
        ctx.check(rel <= 0.1, format!("sigma slope {s:.6} deviates from 1/2π by {:.1}%", 100.0 * rel));
        ctx.details = json!({"fitted_slope": s, "target_slope": target});
    }
    let name = ctx.main_csv();
    ctx.write(&name, t)
}

fn green(ctx: &mut Context) -> Result<(), CliError> {
    let profile = ctx.cfg.cutoff_profile()?;
    let mut t = Table::new(&["N", "r", "angle", "green", "shifted"]);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &n in &ctx.cfg.ns {
        let kernel = GreenKernel::new(n, profile);
        for k in 0..12 {
            let r = 0.05 * (PI / 2.0 / 0.05).powf(k as f64 / 11.0);
            for a in 0..4 {
                let angle = a as f64 * PI / 8.0;
                let g = kernel.eval((r * angle.cos(), r * angle.sin()));
                let shifted = g + (r + 1.0 / n as f64).ln() / (2.0 * PI);
                lo = lo.min(shifted);
                hi = hi.max(shifted);
                t.row([n.to_string(), f(r), f(angle), f(g), f(shifted)]);
            }
        }
    }
    ctx.check(hi - lo <= 0.5, format!("Green band width {:.4} exceeds 0.5", hi - lo));
    ctx.details = json!({"c1": lo, "c2": hi, "band_width": hi - lo});
    let name = ctx.main_csv();
    ctx.write(&name, t)
}

fn chaos(ctx: &mut Context) -> Result<(), CliError> {
    let grid = ctx.grid()?;
    let m = grid.m();
    let offsets: Vec<(usize, usize)> = std::iter::successors(Some(1usize), |k| Some(k * 2))
        .take_while(|&k| k <= m / 2)
        .map(|k| (k, 0))
        .collect();
    let mom = chaos_moments(&grid, grid.constants(), &offsets, ctx.cfg.samples, ctx.cfg.seed)?;
    let mut t = Table::new(&["statistic", "offset_i", "offset_j", "r", "value", "std_error", "target", "z"]);
    t.row([
        "mean_re".into(),
        "0".into(),
        "0".into(),
        f(0.0),
        f(mom.mean.mean.re),
        f(mom.mean.std_error),
        f(1.0),
        f(mom.mean_one_z()),
    ]);
    t.row([
        "mean_im".into(),
        "0".into(),
        "0".into(),
        f(0.0),
        f(mom.mean.mean.im),
        f(mom.mean.std_error),
        f(0.0),
        String::new(),
    ]);
    ctx.check(mom.mean_one_z() <= 3.0, format!("mean-one z = {:.2}", mom.mean_one_z()));
    for tp in &mom.two_point {
        let z = tp.log_z();
        t.row([
            "two_point_log".into(),
            tp.offset.0.to_string(),
            tp.offset.1.to_string(),
            f(tp.x.0.hypot(tp.x.1)),
            f(tp.estimate.mean.ln()),
            f(tp.estimate.std_error / tp.estimate.mean),
            f(tp.log_theory),
            f(z),
        ]);
        ctx.check(z.abs() <= 3.0, format!("two-point z = {z:.2} at offset {:?}", tp.offset));
    }
    let name = ctx.main_csv();
    ctx.write(&name, t)
}

fn scan(ctx: &mut Context) -> Result<(), CliError> {
    let profile = ctx.cfg.cutoff_profile()?;
    let s = chaos_regularity_scan(ctx.cfg.beta_sq, &ctx.cfg.alphas, &ctx.cfg.ns, ctx.cfg.samples, ctx.cfg.seed, profile)?;
    let mut t = Table::new(&["alpha", "N", "M", "norm", "mean", "std_error"]);
    for r in &s.rows {
        t.row([f(r.alpha), r.n.to_string(), r.m.to_string(), r.norm.name().into(), f(r.estimate.mean), f(r.estimate.std_error)]);
    }
    let threshold = ctx.cfg.beta_sq / (4.0 * PI);
    let mut trends = Table::new(&["alpha", "norm", "slope", "std_error", "above_threshold"]);
    for tr in &s.trends {
        let above = tr.alpha > threshold;
        trends.row([f(tr.alpha), tr.norm.name().into(), f(tr.fit.slope), f(tr.fit.std_error), above.to_string()]);
        if tr.norm == sg2d_core::chaos::RegularityNorm::Besov && ctx.cfg.ns.len() >= 3 {
            if above {
                ctx.check(tr.fit.non_positive_within(2.0), format!("alpha {} above threshold but slope {:.4} > 2 SE", tr.alpha, tr.fit.slope));
            } else {
                ctx.check(
                    tr.fit.significantly_positive(3.0),
                    format!("alpha {} below threshold but slope {:.4} not significantly positive", tr.alpha, tr.fit.slope),
                );
            }
        }
    }
    ctx.details = json!({"threshold": threshold});
    let name = ctx.main_csv();
    ctx.write(&name, t)?;
    ctx.write("chaos-scan-trends.csv", trends)
}

fn gibbs(ctx: &mut Context) -> Result<(), CliError> {
    let grid = ctx.grid()?;
    let cfg = ctx.gibbs_config(ctx.cfg.samples);
    let out = sample_gibbs(&grid, &cfg, ctx.cfg.seed)?;
    let per_chain = cfg.samples.div_ceil(cfg.chains);
    let mut t = Table::new(&["chain", "index", "rn"]);
    for (i, rn) in out.rn.iter().enumerate() {
        t.row([(i / per_chain).to_string(), (i % per_chain).to_string(), f(*rn)]);
    }
    let name = ctx.main_csv();
    ctx.write(&name, t)?;
    let meta = json!({"chains": out.chains, "gelman_rubin": out.gelman_rubin, "thin": cfg.thin, "burn_in": cfg.burn_in});
    let file = std::fs::File::create(ctx.out.join("gibbs-sample.bin"))?;
    write_field_snapshot(std::io::BufWriter::new(file), &grid, ctx.cfg.seed, &out.samples, meta.clone())?;
    ctx.outputs.push("gibbs-sample.bin".into());
    ctx.details = json!({"sampler": meta, "warnings": out.warnings});
    Ok(())
}

fn logz(ctx: &mut Context) -> Result<(), CliError> {
    let grid = ctx.grid()?;
    let seed = ctx.cfg.seed;
    let mc = estimate_logz_mc(&grid, ctx.cfg.samples.max(1000), seed)?;
    let zero = DriftControl::zero(&grid, ctx.cfg.slabs, ctx.cfg.n_drift, ctx.cfg.bands)?;
    let opt_cfg = OptimizeConfig {
        iterations: ctx.cfg.iterations.max(1),
        samples: ctx.cfg.samples,
        ..OptimizeConfig::default()
    };
    let best = if ctx.cfg.iterations > 0 {
        Some(optimize_drift(&grid, &zero, &opt_cfg, seed.wrapping_add(1))?)
    } else {
        None
    };
    let eval_seed = seed.wrapping_add(2);
    let mut t = Table::new(&["quantity", "value", "std_error"]);
    t.row(["log_z_mc".into(), f(mc.log_z), f(mc.std_error)]);
    for m in &mc.moments {
        t.row([format!("log_norm_p{}", m.p), f(m.log_norm.mean), f(m.log_norm.std_error)]);
    }
    t.row(["rn_min".into(), f(mc.min_rn), String::new()]);
    t.row(["rn_max".into(), f(mc.max_rn), String::new()]);
    let mut drifts = vec![("zero", zero.clone())];
    if let Some(b) = &best {
        drifts.push(("optimized", b.drift.clone()));
    }
    let mut objectives = Vec::new();
    for (tag, d) in &drifts {
        let v = variational_objective(&grid, d, ctx.cfg.samples, eval_seed)?;
        let se = v.objective.std_error.hypot(mc.std_error);
        let gap = mc.log_z + v.objective.mean;
        t.row([format!("objective_{tag}"), f(v.objective.mean), f(v.objective.std_error)]);
        t.row([format!("gap_{tag}"), f(gap), f(se)]);
        t.row([format!("y8_ratio_{tag}"), f(v.y8_max_ratio), String::new()]);
        ctx.check(gap >= -3.0 * se, format!("{tag} drift: −F = {:.4} exceeds log Ẑ = {:.4} by more than 3 SE", -v.objective.mean, mc.log_z));
        ctx.check(v.y8_holds(), format!("{tag} drift: Y8 ratio {:.4} > 1", v.y8_max_ratio));
        objectives.push(v.objective.mean);
    }
    let name = ctx.main_csv();
    ctx.write(&name, t)?;
    if let Some(b) = best {
        let mut trace = Table::new(&["iteration", "objective", "y8_ratio"]);
        for (k, (o, r)) in b.trace.iter().zip(&b.y8_ratios).enumerate() {
            trace.row([k.to_string(), f(*o), f(*r)]);
        }
        ctx.write("logz-trace.csv", trace)?;
        ctx.details = json!({"optimized_gains": b.drift.gains, "objectives": objectives});
    }
    Ok(())
}

fn initial_positions(ctx: &Context, grid: &SpectralGrid) -> Result<Vec<sg2d_core::FourierField>, CliError> {
    let seed = ctx.cfg.seed;
    if ctx.cfg.coupling == 0.0 || ctx.cfg.from_prior {
        return Ok((0..ctx.cfg.replicas)
            .map(|i| sample_mu1(grid, &mut RngStream::derive(seed, label::FIELD, i as u64)))
            .collect());
    }
    Ok(sample_gibbs(grid, &ctx.gibbs_config(ctx.cfg.replicas), seed)?.samples)
}

fn evolve(ctx: &mut Context) -> Result<(), CliError> {
    let grid = ctx.grid()?;
    let model = ctx.cfg.linear_model()?;
    let tables = build_linear_tables(&grid, ctx.cfg.h, model)?;
    let obs = ObservableSet::new(&grid, ctx.cfg.epsilon);
    let steps = (ctx.cfg.t_final / ctx.cfg.h).round() as usize;
    let seed = ctx.cfg.seed;
    let every = ctx.cfg.record_every;
    let keep = ctx.cfg.snapshots;
    let positions = initial_positions(ctx, &grid)?;
    let runs = positions
        .into_par_iter()
        .enumerate()
        .map(|(i, u)| {
            let mut rng = RngStream::derive(seed, label::NOISE, i as u64);
            match model {
                LinearModel::Hyperbolic => {
                    let v = sample_mu(&grid, 0.0, &mut RngStream::derive(seed, label::VELOCITY, i as u64));
                    evolve_hyperbolic(&grid, &PhaseState { u, v, t: 0.0 }, &tables, steps, every, keep, &obs, &mut rng)
                }
                LinearModel::Parabolic => evolve_parabolic(&grid, &u, &tables, steps, every, keep, &obs, &mut rng),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(&["t", "replica", "observable", "value"]);
    for (i, traj) in runs.iter().enumerate() {
        for (time, values) in traj.times.iter().zip(&traj.observables) {
            for (name, v) in traj.names.iter().zip(values) {
                t.row([f(*time), i.to_string(), name.clone(), f(*v)]);
            }
        }
    }
    let name = ctx.main_csv();
    ctx.write(&name, t)?;
    if keep {
        for (i, traj) in runs.iter().enumerate() {
            let file = format!("evolve-replica{i}.bin");
            let fields: Vec<_> = traj.snapshots.iter().map(|s| s.u.clone()).collect();
            let meta = json!({"replica": i, "times": traj.times, "scheme": traj.scheme, "h": traj.h});
            let out = std::fs::File::create(ctx.out.join(&file))?;
            write_field_snapshot(std::io::BufWriter::new(out), &grid, seed, &fields, meta)?;
            ctx.outputs.push(file);
        }
    }
    ctx.details = json!({
        "scheme": runs.first().map(|r| r.scheme.clone()),
        "h": ctx.cfg.h,
        "epsilon": ctx.cfg.epsilon,
    });
    Ok(())
}

fn report_table(report: &InvarianceReport) -> Table {
    let mut t = Table::new(&[
        "observable",
        "mean_initial",
        "se_initial",
        "mean_final",
        "se_final",
        "var_initial",
        "var_final",
        "z_mean",
        "z_var",
        "halving_ratio",
        "halving_resolved",
    ]);
    for o in &report.observables {
        t.row([
            o.name.clone(),
            f(o.mean_initial.mean),
            f(o.mean_initial.std_error),
            f(o.mean_final.mean),
            f(o.mean_final.std_error),
            f(o.var_initial),
            f(o.var_final),
            f(o.z_mean),
            f(o.z_var),
            o.halving.map_or_else(String::new, |h| f(h.ratio)),
            o.halving.map_or_else(String::new, |h| h.resolved.to_string()),
        ]);
    }
    t
}

fn invariance(ctx: &mut Context, model: LinearModel) -> Result<(), CliError> {
    let grid = ctx.grid()?;
    let obs = ObservableSet::new(&grid, ctx.cfg.epsilon);
    let inv = ctx.invariance_config();
    let report = match model {
        LinearModel::Hyperbolic => invariance_experiment(&grid, &inv, &obs, ctx.cfg.seed)?,
        LinearModel::Parabolic => parabolic_invariance_experiment(&grid, &inv, &obs, ctx.cfg.seed)?,
    };
    for o in &report.observables {
        ctx.check(o.z_mean.abs() <= 3.0, format!("{}: mean z = {:.2}", o.name, o.z_mean));
        ctx.check(o.z_var.abs() <= 3.0, format!("{}: variance z = {:.2}", o.name, o.z_var));
        if let Some(h) = o.halving {
            ctx.check(h.consistent_with_first_order(), format!("{}: halving ratio {:.3} outside [0.25, 0.75]", o.name, h.ratio));
        }
    }
    ctx.details = json!({
        "scheme": format!("exponential_euler_{}", model.name()),
        "epsilon": ctx.cfg.epsilon,
        "gelman_rubin": report.gelman_rubin,
        "warnings": report.warnings,
        "max_abs_z": report.max_abs_z(),
    });
    let name = ctx.main_csv();
    ctx.write(&name, report_table(&report))
}

fn dpd(ctx: &mut Context) -> Result<(), CliError> {
    let grid = ctx.grid()?;
    let cfg = DpdConfig {
        t_final: ctx.cfg.t_final,
        coarse_exp: ctx.cfg.coarse_exp,
        fine_exp: ctx.cfg.fine_exp,
        alpha: ctx.cfg.alpha,
        replicas: ctx.cfg.replicas,
    };
    let report = dpd_check(&grid, &cfg, ctx.cfg.seed)?;
    let mut t = Table::new(&["h", "error", "euler_defect"]);
    for l in &report.levels {
        t.row([f(l.h), f(l.error), f(l.euler_defect)]);
    }
    ctx.check(report.order.slope >= 0.8, format!("observed order {:.3} < 0.8", report.order.slope));
    ctx.details = json!({"order": report.order, "full_scheme": "exponential_euler", "residual_scheme": "exponential_heun"});
    let name = ctx.main_csv();
    ctx.write(&name, t)
}

fn picard(ctx: &mut Context) -> Result<(), CliError> {
    let grid = ctx.grid()?;
    let path = chaos_path(&grid, ctx.cfg.t_final, ctx.cfg.h, ctx.cfg.seed)?;
    let report = picard_diagnostic(&grid, &path, ctx.cfg.h, ctx.cfg.picard_iterations, ctx.cfg.alpha)?;
    let mut t = Table::new(&["iteration", "difference", "ratio"]);
    for (k, d) in report.differences.iter().enumerate() {
        let prev = k.checked_sub(1).map(|j| report.differences[j]).filter(|&p| p > 0.0);
        let ratio = prev.map_or_else(String::new, |p| f(d / p));
        t.row([k.to_string(), f(*d), ratio]);
    }
    let need = report.ratios.len().min(4);
    ctx.check(
        report.contracting_iterations() >= need,
        format!("only {} of the first {need} ratios are below 1", report.contracting_iterations()),
    );
    ctx.details = json!({"contracting_iterations": report.contracting_iterations(), "t_final": report.t_final});
    let name = ctx.main_csv();
    ctx.write(&name, t)
}

/// Output directory precedence: explicit flag, environment, config, `./sg2d-out`.
pub fn resolve_out_dir(flag: Option<PathBuf>, env: Option<PathBuf>, cfg: Option<&RunConfig>) -> PathBuf {
    flag.or(env)
        .or_else(|| cfg.and_then(|c| c.out_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("sg2d-out"))
}
