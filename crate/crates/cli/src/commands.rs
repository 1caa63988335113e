//! One function per subcommand. Each builds its payload and CSV tables; the
//! caller persists them.

use anyhow::{bail, Context as _, Result};
use mploc_core::decay::GROWTH_EPS;
use mploc_core::geometry::{canonical_decomposition, is_completely_separable, is_fully_interactive, is_separable, is_weakly_separable};
use mploc_core::model::{sample_potential, stream_rng};
use mploc_core::schedule::constraint_table;
use mploc_core::spectral::{minkowski_spectrum, pi_subsystems, spectral_mismatch};
use mploc_core::stochastics::{
    coupling_probe, mc_joint_singularity, mc_single_volume_stollmann, mc_two_volume_stollmann, CouplingOutcome, EnergyGrid, CSV_HEADER,
};
use mploc_core::{
    assemble, classify, decay_table, eigenpairs, localization_center, poisson_residual, Cube, EnsembleResult, Error, FitOptions,
    LatticePoint, McOptions, ModelParams, Schedule, ScheduleMode, SiteBox, SpectralTolerances,
};
use rand::Rng;
use serde_json::json;

use crate::config::{ExperimentConfig, StollmannVariant};
use crate::record::{Outcome, Status, Table};

/// Everything a subcommand needs besides its own config table.
pub struct Context {
    pub config: ExperimentConfig,
    pub params: ModelParams,
    pub schedule: Schedule,
    pub opts: McOptions,
}

impl Context {
    pub fn new(config: ExperimentConfig, opts: McOptions) -> Result<Self> {
        let params = config.model_params().context("invalid [model]")?;
        let schedule = config.build_schedule().context("invalid [schedule]")?;
        Ok(Context { config, params, schedule, opts })
    }

    fn outcome(&self, status: Status, truncated: bool, payload: serde_json::Value, tables: Vec<Table>, summary: Vec<String>) -> Outcome {
        Outcome { schedule_hash: self.schedule.hash(), status, truncated, payload, tables, summary }
    }

    fn cubes(&self, cfgs: &[crate::config::CubeConfig], want: std::ops::RangeInclusive<usize>) -> Result<Vec<Cube>> {
        if !want.contains(&cfgs.len()) {
            bail!("expected {} to {} cubes, got {}", want.start(), want.end(), cfgs.len());
        }
        let cubes = cfgs.iter().map(|c| c.cube()).collect::<Result<Vec<_>>>()?;
        for c in &cubes {
            if c.n() != self.params.n || c.d() != self.params.d {
                bail!("cube centered at {} does not match model n = {}, d = {}", c.center, self.params.n, self.params.d);
            }
        }
        Ok(cubes)
    }
}

fn sci(x: f64) -> String {
    format!("{x:e}")
}

fn ensemble_table(res: &EnsembleResult) -> Table {
    let mut t = Table::new("ensemble", CSV_HEADER);
    for row in res.csv_rows() {
        t.push(row);
    }
    t
}

fn ensemble_summary(res: &EnsembleResult) -> Vec<String> {
    let mut lines = vec![format!("{}: {} samples{}", res.experiment, res.samples, if res.truncated { " (truncated)" } else { "" })];
    for row in res.csv_rows() {
        lines.push(format!("  threshold {}  count {}  p {}  wilson {}  bound {}  {}", row[0], row[1], row[2], row[3], row[4], row[5]));
    }
    lines
}

pub fn cmd_params(ctx: &Context) -> Result<Outcome> {
    let checks = constraint_table(&ctx.schedule, ctx.config.schedule.global_r);
    let mut table = Table::new("constraints", ["id", "n", "satisfied", "margin", "informational"]);
    let mut summary = vec![format!("{:<44} {:>4} {:>6} {:>14}", "constraint", "n", "ok", "margin")];
    for c in &checks {
        let n = c.n.map(|n| n.to_string()).unwrap_or_default();
        table.push([c.id.clone(), n.clone(), c.satisfied.to_string(), sci(c.margin), c.informational.to_string()]);
        let flag = if c.satisfied { "yes" } else if c.informational { "info" } else { "NO" };
        summary.push(format!("{:<44} {:>4} {:>6} {:>14.6e}", c.id, n, flag, c.margin));
    }
    let violations: Vec<String> = checks.iter().filter(|c| c.is_violation()).map(|c| c.label()).collect();
    let status = if ctx.schedule.mode == ScheduleMode::Strict && !violations.is_empty() {
        Status::Violation
    } else {
        Status::Ok
    };
    if !violations.is_empty() {
        summary.push(format!("{} violation(s):", violations.len()));
        summary.extend(violations.iter().map(|v| format!("  {v}")));
    }
    let payload = json!({ "schedule": ctx.schedule, "checks": checks, "violations": violations });
    Ok(ctx.outcome(status, false, payload, vec![table], summary))
}

pub fn cmd_classify(ctx: &Context) -> Result<Outcome> {
    let cfg = ctx.config.classify.as_ref().context("missing [classify] table")?;
    let cubes = ctx.cubes(&cfg.cubes, 1..=16)?;
    let window = cubes
        .iter()
        .map(Cube::projection_hull)
        .reduce(|a, b| a.hull(&b))
        .expect("at least one cube");
    let pot = sample_potential(&window, &ctx.params.disorder, cfg.realization);
    let tol = ctx.opts.tol;
    let r0 = ctx.params.r0;

    let mut per_cube = Vec::new();
    let mut overview = Table::new(
        "classify",
        ["cube", "center", "radius", "dist_to_spectrum", "resonant", "singular", "fully_interactive", "minkowski_mismatch"],
    );
    let mut profile = Table::new("norm_profile", ["cube", "s", "log_norm", "log_threshold", "ns"]);
    let mut status = Status::Ok;
    let mut summary = Vec::new();
    for (i, cube) in cubes.iter().enumerate() {
        let h = assemble(cube, &ctx.params, &pot, ctx.opts.max_dim)?;
        let c = classify(&h, cfg.energy, &ctx.schedule, &tol)?;
        let fi = is_fully_interactive(cube, r0);
        let mismatch = if fi { None } else { Some(pi_mismatch(&h, r0, ctx.opts.max_dim)?) };
        if mismatch.is_some_and(|m| m.is_nan() || m > 1e-9) {
            status = Status::AssertionFailed;
        }
        for k in 0..c.norm_profile.s_values.len() {
            profile.push([
                i.to_string(),
                sci(c.norm_profile.s_values[k]),
                sci(c.norm_profile.log_norms[k]),
                sci(c.log_thresholds[k]),
                c.grid_ns[k].to_string(),
            ]);
        }
        overview.push([
            i.to_string(),
            cube.center.to_string(),
            cube.radius.to_string(),
            sci(c.dist_to_spectrum),
            c.resonant.to_string(),
            c.singular.to_string(),
            fi.to_string(),
            mismatch.map(sci).unwrap_or_default(),
        ]);
        summary.push(format!(
            "cube {i} at {} L={}: {} {}{}",
            cube.center,
            cube.radius,
            if c.singular { "S" } else { "NS" },
            if c.resonant { "R" } else { "NR" },
            mismatch.map(|m| format!(", PI split mismatch {m:.3e}")).unwrap_or_else(|| ", FI".into())
        ));
        per_cube.push(json!({ "classification": c, "fully_interactive": fi, "minkowski_mismatch": mismatch }));
    }

    let mut pairs = Vec::new();
    for i in 0..cubes.len() {
        for j in i + 1..cubes.len() {
            let (a, b) = (&cubes[i], &cubes[j]);
            let both_fi = is_fully_interactive(a, r0) && is_fully_interactive(b, r0);
            let n = a.n() as i64;
            let far = a.radius == b.radius && a.center.dist(&b.center) > n * (10 * a.radius + 8 * r0);
            let complete = is_completely_separable(a, b, r0);
            let confirmed = (both_fi && far).then_some(complete);
            if confirmed == Some(false) {
                status = Status::AssertionFailed;
            }
            if let Some(ok) = confirmed {
                summary.push(format!("pair ({i}, {j}): far FI pair, completely separable: {ok}"));
            }
            pairs.push(json!({
                "cubes": [i, j],
                "weakly_separable": is_weakly_separable(a, b, r0).is_some(),
                "separable": is_separable(a, b, r0),
                "completely_separable": complete,
                "far_fully_interactive": both_fi && far,
                "complete_separability_confirmed": confirmed,
            }));
        }
    }
    let payload = json!({ "energy": cfg.energy, "realization": cfg.realization, "cubes": per_cube, "pairs": pairs });
    Ok(ctx.outcome(status, false, payload, vec![overview, profile], summary))
}

/// `max |σ(H) - (σ(H') + σ(H'') + shift)|` along the canonical split.
fn pi_mismatch(h: &mploc_core::HamiltonianMatrix, r0: i64, max_dim: usize) -> Result<f64> {
    let (first, _) = canonical_decomposition(&h.cube, r0)?;
    let split = pi_subsystems(h, &first, max_dim)?;
    let full = eigenpairs(&h.matrix)?.eigenvalues;
    let a = eigenpairs(&split.h_first.matrix)?.eigenvalues;
    let b: Vec<f64> = eigenpairs(&split.h_second.matrix)?.eigenvalues.iter().map(|x| x + split.shift).collect();
    Ok(spectral_mismatch(&full, &minkowski_spectrum(&a, &b)))
}

pub fn cmd_stollmann(ctx: &Context) -> Result<Outcome> {
    let cfg = ctx.config.stollmann.as_ref().context("missing [stollmann] table")?;
    let res = match cfg.variant {
        StollmannVariant::Single => {
            let cubes = ctx.cubes(&cfg.cubes, 1..=1)?;
            mc_single_volume_stollmann(&cubes[0], &ctx.params, cfg.energy, &cfg.eps, cfg.samples, &ctx.opts)?
        }
        StollmannVariant::Two => {
            let cubes = ctx.cubes(&cfg.cubes, 2..=2)?;
            mc_two_volume_stollmann(&cubes[0], &cubes[1], &ctx.params, &cfg.eps, cfg.samples, &ctx.opts)?
        }
    };
    let status = if res.all_pass() { Status::Ok } else { Status::AssertionFailed };
    Ok(ctx.outcome(status, res.truncated, json!(res), vec![ensemble_table(&res)], ensemble_summary(&res)))
}

pub fn cmd_joint(ctx: &Context) -> Result<Outcome> {
    let cfg = ctx.config.joint.as_ref().context("missing [joint] table")?;
    let cubes = ctx.cubes(&cfg.cubes, 2..=2)?;
    let grid = EnergyGrid { step: cfg.grid_step.value() };
    let res = mc_joint_singularity(&cubes[0], &cubes[1], &ctx.params, &ctx.schedule, &grid, cfg.samples, &ctx.opts)?;
    let status = if res.all_pass() { Status::Ok } else { Status::AssertionFailed };
    Ok(ctx.outcome(status, res.truncated, json!(res), vec![ensemble_table(&res)], ensemble_summary(&res)))
}

pub fn cmd_coupling(ctx: &Context) -> Result<Outcome> {
    let cfg = ctx.config.coupling.as_ref().context("missing [coupling] table")?;
    let center = LatticePoint::from_rows(&cfg.center)?;
    let rep = coupling_probe(
        cfg.l,
        &center,
        &ctx.params,
        &ctx.schedule,
        cfg.energy,
        cfg.cover_radius.value(),
        cfg.samples,
        &ctx.opts,
    )?;
    let mut table = Table::new("coupling", ["sample", "singular_centers", "clusters", "outcome"]);
    for s in &rep.per_sample {
        let outcome = serde_json::to_value(s.outcome)?.as_str().unwrap_or_default().to_string();
        table.push([s.index.to_string(), s.singular_centers.to_string(), s.clusters.to_string(), outcome]);
    }
    let fails = rep.per_sample.iter().filter(|s| s.outcome == CouplingOutcome::Fails).count();
    let status = if fails == 0 { Status::Ok } else { Status::AssertionFailed };
    let summary = vec![format!(
        "coupling l={} L={}: {} samples, hypotheses held in {}, conclusion held in {}{}",
        rep.l,
        rep.big_l,
        rep.samples,
        rep.hypotheses_held,
        rep.implication_held,
        if rep.truncated { " (truncated)" } else { "" }
    )];
    Ok(ctx.outcome(status, rep.truncated, json!(rep), vec![table], summary))
}

pub fn cmd_decay(ctx: &Context) -> Result<Outcome> {
    let cfg = ctx.config.decay.as_ref().context("missing [decay] table")?;
    let cube = ctx.cubes(std::slice::from_ref(&cfg.cube), 1..=1)?.remove(0);
    let defaults = FitOptions::default();
    let fit = FitOptions { floor_tol: cfg.floor_tol.or(defaults.floor_tol), exp_cap: cfg.exp_cap.or(defaults.exp_cap) };
    let pot = sample_potential(&cube.projection_hull(), &ctx.params.disorder, cfg.realization);
    let h = assemble(&cube, &ctx.params, &pot, ctx.opts.max_dim)?;
    let eig = eigenpairs(&h.matrix)?;
    let table = decay_table(&h, &eig, &fit);
    let target = ctx.params.r / 300.0;
    let deep: Vec<_> = table.fits.iter().filter(|f| 4 * f.boundary_margin >= cube.radius).collect();
    let below: Vec<usize> = deep.iter().filter(|f| f.exponent < target).map(|f| f.eigen_index).collect();
    let status = if below.is_empty() { Status::Ok } else { Status::AssertionFailed };
    let median = table.median_exponent();
    let mut csv = Table::new("decay", mploc_core::DecayTable::csv_header());
    for row in table.csv_rows() {
        csv.push(row);
    }
    let summary = vec![format!(
        "decay L={}: {} fits ({} skipped), {} deep; exponent >= r/300 = {:.4} on {}/{}; median exponent {}",
        cube.radius,
        table.fits.len(),
        table.skipped.len(),
        deep.len(),
        target,
        deep.len() - below.len(),
        deep.len(),
        median.map(|m| format!("{m:.3}")).unwrap_or_else(|| "n/a".into())
    )];
    let payload = json!({
        "realization": cfg.realization,
        "fit_options": fit,
        "target_exponent": target,
        "deep_count": deep.len(),
        "below_target": below,
        "median_exponent": median,
        "table": table,
    });
    Ok(ctx.outcome(status, false, payload, vec![csv], summary))
}

pub fn cmd_poisson(ctx: &Context) -> Result<Outcome> {
    let cfg = ctx.config.poisson.as_ref().context("missing [poisson] table")?;
    let big = ctx.cubes(std::slice::from_ref(&cfg.big), 1..=1)?.remove(0);
    if cfg.sub_radius < 0 || cfg.sub_radius + 1 > big.radius {
        bail!("sub_radius must lie in [0, {}]", big.radius - 1);
    }
    big.check_budget(ctx.opts.max_dim)?;
    let tol: SpectralTolerances = ctx.opts.tol;
    let window: SiteBox = big.projection_hull();
    let slack = big.radius - cfg.sub_radius - 1;
    let mut table = Table::new(
        "poisson",
        ["attempt", "eigen_index", "E", "center", "sub_center", "residual", "truncation_bound", "passes"],
    );
    let mut checks = Vec::new();
    let mut singular = 0u64;
    let max_attempts = 20 * cfg.pairs.max(1);
    let mut attempt = 0u64;
    while (checks.len() as u64) < cfg.pairs && attempt < max_attempts {
        let pot = sample_potential(&window, &ctx.params.disorder, attempt);
        let h = assemble(&big, &ctx.params, &pot, ctx.opts.max_dim)?;
        let eig = eigenpairs(&h.matrix)?;
        let k = stream_rng(ctx.params.disorder.seed ^ 0x5bd1_e995, attempt).random_range(0..h.dim());
        let phi = eig.eigenvectors.column(k).into_owned();
        let v: Vec<f64> = phi.iter().copied().collect();
        let center = localization_center(&v, &h.sites)?;
        let rows: Vec<Vec<i64>> = center
            .particles()
            .zip(big.center.particles())
            .map(|(x, c)| x.iter().zip(c).map(|(&xi, &ci)| xi.clamp(ci - slack, ci + slack)).collect())
            .collect();
        let sub = Cube::new(LatticePoint::from_rows(&rows)?, cfg.sub_radius);
        match poisson_residual(&h, eig.eigenvalues[k], &phi, &sub, &tol) {
            Ok(chk) => {
                table.push([
                    attempt.to_string(),
                    k.to_string(),
                    sci(chk.energy),
                    center.to_string(),
                    sub.center.to_string(),
                    sci(chk.max_abs_residual),
                    sci(chk.truncation_bound),
                    chk.passes.to_string(),
                ]);
                checks.push(chk);
            }
            Err(Error::SingularEnergy { .. }) => singular += 1,
            Err(e) => return Err(e.into()),
        }
        attempt += 1;
    }
    let failed = checks.iter().filter(|c| !c.passes).count();
    let complete = checks.len() as u64 == cfg.pairs;
    let status = if failed == 0 && complete { Status::Ok } else { Status::AssertionFailed };
    let worst = checks.iter().map(|c| c.max_abs_residual).fold(0.0, f64::max);
    let summary = vec![format!(
        "poisson: {}/{} eigenpairs checked ({} skipped: E within the singular tolerance of the sub-cube spectrum), {} failed, worst residual {:.3e}",
        checks.len(),
        cfg.pairs,
        singular,
        failed,
        worst
    )];
    let payload = json!({
        "growth_eps": GROWTH_EPS,
        "requested": cfg.pairs,
        "skipped_singular": singular,
        "failed": failed,
        "checks": checks,
    });
    Ok(ctx.outcome(status, false, payload, vec![table], summary))
}
