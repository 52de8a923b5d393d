use crate::config::{ComplexValue, CouplingArg, RunConfig, SolverArg};
use crate::output::RunDir;
use manyscat_core::convergence::{
    compare_with_limit, evaluate_reference, exterior_probe_plane, reference_solution, strictly_decreasing,
};
use manyscat_core::io::{grid_slice_csv, points_csv, read_grid, Manifest, SolutionRecord};
use manyscat_core::kernels::REFERENCE_SURFACE_ORDER;
use manyscat_core::manybody::far_field_amplitude;
use manyscat_core::oracle::MIN_ORDER_MARGIN;
use manyscat_core::recipe::{round_trip, RoundTripOptions};
use manyscat_core::{
    classify_regime, evaluate_field, extract_monopole, ls_solve, monopole_charge, p_to_hn, pde_residual,
    place_particles, sphere_series, surface_self_integral, target_to_p, validity_ratio, Aabb, Complex64, CouplingMode,
    DensityProfile, DomainBox, Error, Execution, GridField, ImpedanceProfile, LsOptions, LsSolver, ManyBodyOptions,
    PlacementOptions, Point, Profile, RealGrid, Result, ScalingLaw, SolverChoice, SolverKind, WaveContext,
};
use serde_json::{json, Value};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

pub const DEFAULT_K: f64 = 1.0;
pub const DEFAULT_KAPPA: f64 = 0.5;
pub const DEFAULT_A: f64 = 0.02;
pub const DEFAULT_A_SWEEP: [f64; 3] = [0.04, 0.02, 0.01];
/// Radii for `validate`, small enough that `ka` stays in the Rayleigh range.
pub const DEFAULT_VALIDATE_SWEEP: [f64; 3] = [0.02, 0.01, 0.005];
pub const DEFAULT_SPACING_PREFACTOR: f64 = 0.8;
pub const DEFAULT_CUBE_SIDE: f64 = 0.5;
pub const DEFAULT_RESOLUTION: usize = 16;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_PROBE_OFFSET: f64 = 0.5;
pub const DEFAULT_PROBE_POINTS: usize = 8;
pub const MAX_RESOLUTION: usize = 128;
pub const MAX_PROBE_POINTS: usize = 256;
/// Above this `a^(1-κ₁)` the monopole reduction is flagged as rough.
pub const VALIDITY_WARNING: f64 = 0.5;
/// Oracle agreement `validate` requires at the largest radius, relative.
pub const ORACLE_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Homogenize,
    Design,
    Converge,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Homogenize => "homogenize",
            Command::Design => "design",
            Command::Converge => "converge",
            Command::Validate => "validate",
        }
    }
}

/// Spacing exponent that admits a limit for `κ`: `(2-κ)/3` below 1, `1/3` from 1 up.
pub fn default_kappa1(kappa: f64) -> f64 {
    if kappa < 1.0 {
        (2.0 - kappa) / 3.0
    } else {
        1.0 / 3.0
    }
}

fn domain_err(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

fn load_grid(path: &Path) -> Result<GridField> {
    let f = File::open(path)?;
    read_grid(BufReader::new(f)).map(|(g, _)| g)
}

/// The configuration with every default filled in, checked for ranges.
pub fn resolve(mut c: RunConfig, cmd: Command) -> Result<RunConfig> {
    let k = *c.k.get_or_insert(DEFAULT_K);
    if !(k.is_finite() && k >= 0.0) {
        return Err(domain_err(format!("k must be finite and >= 0, got {k}")));
    }
    if cmd == Command::Validate && k == 0.0 {
        return Err(domain_err("validate needs k > 0"));
    }
    let alpha = *c.alpha.get_or_insert([0.0, 0.0, 1.0]);
    let an = Point::from(alpha).norm();
    if !(an.is_finite() && an > 0.0) {
        return Err(domain_err("alpha must be a finite nonzero vector"));
    }
    let kappa = *c.kappa.get_or_insert(DEFAULT_KAPPA);
    if !kappa.is_finite() {
        return Err(domain_err("kappa must be finite"));
    }
    let kappa1 = *c.kappa1.get_or_insert(default_kappa1(kappa));
    if !(kappa1.is_finite() && kappa1 >= 0.0) {
        return Err(domain_err(format!("kappa1 must be finite and >= 0, got {kappa1}")));
    }
    let a = *c.a.get_or_insert(DEFAULT_A);
    let sweep = c.a_sweep.get_or_insert_with(|| match cmd {
        Command::Simulate => vec![a],
        Command::Validate => DEFAULT_VALIDATE_SWEEP.to_vec(),
        _ => DEFAULT_A_SWEEP.to_vec(),
    });
    if sweep.is_empty() {
        return Err(domain_err("a_sweep must not be empty"));
    }
    for &r in std::iter::once(&a).chain(sweep.iter()) {
        if !(r.is_finite() && r > 0.0 && r < 1.0) {
            return Err(domain_err(format!("particle radius must lie in (0, 1), got {r}")));
        }
    }
    if c.h.is_some() && c.h_file.is_some() {
        return Err(domain_err("give h or h_file, not both"));
    }
    if c.h_file.is_none() {
        let h = c.h.get_or_insert(ComplexValue::Real(1.0)).value();
        if !h.is_finite() || h.im > 0.0 {
            return Err(Error::Passivity(format!("h must be finite with Im h <= 0, got {h}")));
        }
    }
    if c.density.is_some() && c.density_file.is_some() {
        return Err(domain_err("give density or density_file, not both"));
    }
    if c.density_file.is_none() {
        let n = *c.density.get_or_insert(1.0);
        if !(n.is_finite() && n >= 0.0) {
            return Err(Error::InvalidDensity {
                value: n,
                x: f64::NAN,
                y: f64::NAN,
                z: f64::NAN,
            });
        }
    }
    if c.p.is_some() && c.p_file.is_some() {
        return Err(domain_err("give p or p_file, not both"));
    }
    if let Some(p) = c.p {
        let p = p.value();
        if !p.is_finite() || p.im > 0.0 {
            return Err(Error::Passivity(format!("p must be finite with Im p <= 0, got {p}")));
        }
    }
    if c.nsq.is_some() && c.nsq_file.is_some() {
        return Err(domain_err("give nsq or nsq_file, not both"));
    }
    for (name, v) in [("nsq", c.nsq), ("n0sq", c.n0sq)] {
        if let Some(v) = v {
            let v = v.value();
            if !v.is_finite() || v.im < 0.0 {
                return Err(Error::Passivity(format!("{name} must be finite with Im >= 0, got {v}")));
            }
        }
    }
    if cmd == Command::Design && c.nsq.is_none() && c.nsq_file.is_none() {
        return Err(domain_err("design needs a target nsq or nsq_file"));
    }
    let n_const = *c.n_const.get_or_insert(1.0);
    if !(n_const.is_finite() && n_const > 0.0) {
        return Err(domain_err(format!("n_const must be positive, got {n_const}")));
    }
    if c.domain.is_none() {
        let from_file = [&c.h_file, &c.density_file, &c.p_file, &c.nsq_file]
            .into_iter()
            .flatten()
            .next()
            .cloned();
        let bounds = match from_file {
            Some(path) => load_grid(&path)?.bounds,
            None => Aabb::unit(),
        };
        c.domain = Some(crate::config::BoxSpec {
            lo: bounds.lo.into(),
            hi: bounds.hi.into(),
        });
    }
    let b = c.domain.unwrap();
    Aabb::new(Point::from(b.lo), Point::from(b.hi))?;
    let cube = *c.cube_side.get_or_insert(DEFAULT_CUBE_SIDE);
    if !(cube.is_finite() && cube > 0.0) {
        return Err(domain_err(format!("cube_side must be positive, got {cube}")));
    }
    let cd = *c.spacing_prefactor.get_or_insert(DEFAULT_SPACING_PREFACTOR);
    if !(cd.is_finite() && cd > 0.0) {
        return Err(domain_err(format!("spacing_prefactor must be positive, got {cd}")));
    }
    let res = *c.resolution.get_or_insert(DEFAULT_RESOLUTION);
    if !(2..=MAX_RESOLUTION).contains(&res) {
        return Err(domain_err(format!(
            "resolution must lie in 2..={MAX_RESOLUTION}, got {res}"
        )));
    }
    let seed = *c.seed.get_or_insert(DEFAULT_SEED);
    if c.seeds.get_or_insert_with(|| vec![seed]).is_empty() {
        return Err(domain_err("seeds must not be empty"));
    }
    let tol = *c.tol.get_or_insert(DEFAULT_TOL);
    if !(tol > 0.0 && tol < 1.0) {
        return Err(domain_err(format!("tol must lie in (0, 1), got {tol}")));
    }
    c.coupling.get_or_insert(CouplingArg::Full);
    c.solver.get_or_insert(SolverArg::Auto);
    c.dense_threshold
        .get_or_insert(manyscat_core::manybody::DEFAULT_DENSE_THRESHOLD);
    let guard = *c
        .near_field_guard
        .get_or_insert(manyscat_core::manybody::DEFAULT_NEAR_FIELD_GUARD);
    if !(guard.is_finite() && guard >= 1.0) {
        return Err(domain_err(format!("near_field_guard must be >= 1, got {guard}")));
    }
    let off = *c.probe_offset.get_or_insert(DEFAULT_PROBE_OFFSET);
    if !(off.is_finite() && off > 0.0) {
        return Err(domain_err(format!("probe_offset must be positive, got {off}")));
    }
    let np = *c.probe_points.get_or_insert(DEFAULT_PROBE_POINTS);
    if !(1..=MAX_PROBE_POINTS).contains(&np) {
        return Err(domain_err(format!(
            "probe_points must lie in 1..={MAX_PROBE_POINTS}, got {np}"
        )));
    }
    if c.threads == Some(0) {
        return Err(domain_err("threads must be at least 1"));
    }
    c.deterministic.get_or_insert(false);
    c.output_dir
        .get_or_insert_with(|| Path::new("manyscat-output").join(cmd.name()));
    regime_gate(&c, cmd)?;
    Ok(c)
}

/// Refuses exponent pairs the command cannot honour, before any computation.
fn regime_gate(c: &RunConfig, cmd: Command) -> Result<()> {
    let law = ScalingLaw::new(
        c.kappa.unwrap(),
        c.kappa1.unwrap(),
        c.a.unwrap(),
        Profile::Constant(Complex64::new(0.0, 0.0)),
        Profile::Constant(0.0),
    )?;
    let report = classify_regime(&law);
    match cmd {
        Command::Simulate | Command::Validate => report.require_approximation(),
        Command::Converge => report.require_limit(c.kappa1.unwrap()),
        Command::Homogenize if c.p.is_none() && c.p_file.is_none() => report.require_limit(c.kappa1.unwrap()),
        Command::Homogenize | Command::Design => Ok(()),
    }
}

struct Setup {
    ctx: WaveContext,
    bounds: Aabb,
    resolution: [usize; 3],
    execution: Execution,
}

fn setup(c: &RunConfig) -> Result<Setup> {
    let ctx = WaveContext::with_direction(c.k.unwrap(), Point::from(c.alpha.unwrap()))?;
    let b = c.domain.unwrap();
    let bounds = Aabb::new(Point::from(b.lo), Point::from(b.hi))?;
    let n = c.resolution.unwrap();
    Ok(Setup {
        ctx,
        bounds,
        resolution: [n, n, n],
        execution: Execution::deterministic(c.deterministic.unwrap()),
    })
}

fn law_for(c: &RunConfig, a: f64) -> Result<ScalingLaw> {
    let h: ImpedanceProfile = match &c.h_file {
        Some(p) => Profile::from(load_grid(p)?),
        None => Profile::Constant(c.h.unwrap().value()),
    };
    let n: DensityProfile = match &c.density_file {
        Some(p) => Profile::from(load_grid(p)?.map(|v| v.re)),
        None => Profile::Constant(c.density.unwrap()),
    };
    ScalingLaw::new(c.kappa.unwrap(), c.kappa1.unwrap(), a, h, n)
}

fn manybody_options(c: &RunConfig, execution: Execution) -> ManyBodyOptions {
    ManyBodyOptions {
        tol: c.tol.unwrap(),
        dense_threshold: c.dense_threshold.unwrap(),
        solver: match c.solver.unwrap() {
            SolverArg::Auto => SolverChoice::Auto,
            SolverArg::Dense => SolverChoice::Dense,
            SolverArg::Iterative => SolverChoice::Iterative,
        },
        coupling: match c.coupling.unwrap() {
            CouplingArg::Full => CouplingMode::Full,
            CouplingArg::Leading => CouplingMode::LeadingOrder,
        },
        execution,
        ..ManyBodyOptions::default()
    }
}

fn ls_options(c: &RunConfig) -> LsOptions {
    LsOptions {
        tol: c.tol.unwrap(),
        solver: match c.solver.unwrap() {
            SolverArg::Auto => LsSolver::Auto,
            SolverArg::Dense => LsSolver::Dense,
            SolverArg::Iterative => LsSolver::Iterative,
        },
        ..LsOptions::default()
    }
}

fn placement(c: &RunConfig) -> PlacementOptions {
    PlacementOptions {
        spacing_prefactor: c.spacing_prefactor.unwrap(),
        ..PlacementOptions::default()
    }
}

fn c2(v: Complex64) -> Value {
    json!([v.re, v.im])
}

fn regime_json(law: &ScalingLaw) -> Value {
    let r = classify_regime(law);
    json!({
        "case": format!("{:?}", r.case_label),
        "limit_exists": r.limit_exists,
        "approximation_valid": r.approximation_valid,
        "matched_kappa1": r.matched_kappa1,
        "volume_fraction_exponent": r.volume_fraction_exponent,
    })
}

fn manifest_text(ens: &manyscat_core::ParticleEnsemble) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    manyscat_core::io::write_manifest(&mut buf, &Manifest::from_ensemble(ens))?;
    Ok(buf)
}

fn grid_text(grid: &GridField, k: f64) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    manyscat_core::io::write_grid(&mut buf, grid, k)?;
    Ok(buf)
}

fn real_to_complex(g: &RealGrid) -> GridField {
    g.map(|v| Complex64::new(*v, 0.0))
}

pub fn run(c: &RunConfig, cmd: Command, out: &RunDir) -> Result<Value> {
    match cmd {
        Command::Simulate => simulate(c, out),
        Command::Homogenize => homogenize(c, out),
        Command::Design => design(c, out),
        Command::Converge => converge(c, out),
        Command::Validate => validate(c, out),
    }
}

fn simulate(c: &RunConfig, out: &RunDir) -> Result<Value> {
    let s = setup(c)?;
    let a = c.a.unwrap();
    let law = law_for(c, a)?;
    let domain = DomainBox::new(s.bounds, c.cube_side.unwrap())?;
    let ens = place_particles(&law, &domain, c.seed.unwrap(), &placement(c)).map_err(|e| e.in_stage("ensemble"))?;
    out.write("manifest.txt", &manifest_text(&ens)?)?;
    let opts = manybody_options(c, s.execution);
    let sol = manyscat_core::solve_effective_field(&ens, &s.ctx, &opts).map_err(|e| e.in_stage("manybody"))?;
    let mut buf = Vec::new();
    manyscat_core::io::write_solution(&mut buf, &SolutionRecord::new(&sol, &ens))?;
    out.write("solution.txt", &buf)?;

    let probes = exterior_probe_plane(&s.bounds, c.probe_offset.unwrap(), c.probe_points.unwrap())?;
    let guard = c.near_field_guard.unwrap();
    let values = probes
        .iter()
        .map(|x| evaluate_field(&sol, &ens, &s.ctx, x, guard))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("evaluate"))?;
    out.write("probes.csv", points_csv(&probes, &values).as_bytes())?;

    let ratio = validity_ratio(&ens);
    let mut warnings = Vec::new();
    if ratio > VALIDITY_WARNING {
        warnings.push(format!("validity ratio a^(1-kappa1) = {ratio} is large"));
    }
    let forward = far_field_amplitude(&sol, &ens, s.ctx.k(), &s.ctx.alpha());
    Ok(json!({
        "a": a,
        "kappa": law.kappa(),
        "kappa1": law.kappa1(),
        "regime": regime_json(&law),
        "particles": ens.len(),
        "spacing": ens.spacing,
        "volume_fraction": ens.volume_fraction(),
        "solver": match sol.solver_kind { SolverKind::Dense => "dense", SolverKind::Iterative => "iterative" },
        "iterations": sol.iterations,
        "residual": sol.residual_norm,
        "validity_ratio": ratio,
        "forward_amplitude": c2(forward),
        "warnings": warnings,
    }))
}

fn homogenized_potential(c: &RunConfig, s: &Setup) -> Result<GridField> {
    if let Some(path) = &c.p_file {
        return load_grid(path);
    }
    if let Some(p) = c.p {
        return GridField::filled(s.bounds, s.resolution, p.value());
    }
    let law = law_for(c, c.a.unwrap())?;
    manyscat_core::convergence::limit_potential_grid(&law, s.bounds, s.resolution)
}

fn homogenize(c: &RunConfig, out: &RunDir) -> Result<Value> {
    let s = setup(c)?;
    let p = homogenized_potential(c, &s).map_err(|e| e.in_stage("potential"))?;
    let ctx = match c.n0sq {
        Some(v) => s
            .ctx
            .clone()
            .with_background(GridField::filled(p.bounds, p.resolution, v.value())?)?,
        None => s.ctx.clone(),
    };
    let sol = ls_solve(&p, &ctx, &ls_options(c)).map_err(|e| e.in_stage("homogenized"))?;
    out.write("potential.grid", &grid_text(&p, ctx.k())?)?;
    out.write("field.grid", &grid_text(&sol.field, ctx.k())?)?;
    out.write("slice.csv", grid_slice_csv(&sol.field, p.resolution[2] / 2)?.as_bytes())?;
    let probes = exterior_probe_plane(&p.bounds, c.probe_offset.unwrap(), c.probe_points.unwrap())?;
    let values = evaluate_reference(&sol, &probes)?;
    out.write("probes.csv", points_csv(&probes, &values).as_bytes())?;

    let residual = if p
        .resolution
        .iter()
        .all(|&n| n >= manyscat_core::homogenized::MIN_RESIDUAL_RESOLUTION)
    {
        Some(pde_residual(&sol.field, &p, &ctx)?)
    } else {
        None
    };
    let energy = sol.energy_balance(16);
    let mut warnings = Vec::new();
    if sol.stability_warning {
        warnings.push("k times voxel spacing exceeds the stable range; refine the grid".to_string());
    }
    Ok(json!({
        "resolution": p.resolution,
        "solver": if sol.dense { "dense" } else { "iterative" },
        "iterations": sol.iterations,
        "residual": sol.residual,
        "pde_residual": residual,
        "stability_warning": sol.stability_warning,
        "energy": {
            "extinction": energy.extinction,
            "scattering": energy.scattering,
            "absorption": energy.absorption,
        },
        "forward_amplitude": c2(sol.far_field_amplitude(&ctx.alpha())),
        "warnings": warnings,
    }))
}

fn design(c: &RunConfig, out: &RunDir) -> Result<Value> {
    let s = setup(c)?;
    let nsq = match &c.nsq_file {
        Some(path) => load_grid(path)?,
        None => GridField::filled(s.bounds, s.resolution, c.nsq.unwrap().value())?,
    };
    let n0 = c.n0sq.map(ComplexValue::value).unwrap_or(Complex64::new(1.0, 0.0));
    let n0sq = GridField::filled(nsq.bounds, nsq.resolution, n0)?;
    let p = target_to_p(&n0sq, &nsq, s.ctx.k()).map_err(|e| e.in_stage("target"))?;
    let kappa = c.kappa.unwrap();
    let d = p_to_hn(&p, c.n_const.unwrap(), kappa).map_err(|e| e.in_stage("split"))?;
    let k = s.ctx.k();
    out.write("p.grid", &grid_text(&d.p, k)?)?;
    out.write("h.grid", &grid_text(&d.h(), k)?)?;
    out.write("n.grid", &grid_text(&real_to_complex(&d.n), k)?)?;

    let sweep = c.a_sweep.clone().unwrap();
    let seeds = c.seeds.clone().unwrap();
    let mut per_seed = Vec::new();
    let mut reference_residual = 0.0;
    for &seed in &seeds {
        let opts = RoundTripOptions {
            cube_side: c.cube_side.unwrap(),
            seed,
            placement: placement(c),
            manybody: manybody_options(c, s.execution),
            ls: ls_options(c),
            probe_offset: c.probe_offset.unwrap(),
            probe_points: c.probe_points.unwrap(),
        };
        let report = round_trip(&d, &sweep, &s.ctx, &opts).map_err(|e| e.in_stage("round_trip"))?;
        reference_residual = report.reference_residual;
        per_seed.push(report);
    }
    if !d.is_empty() {
        for (i, &a) in sweep.iter().enumerate() {
            let ens = manyscat_core::design_ensemble(&d, a, c.cube_side.unwrap(), seeds[0], &placement(c))?;
            out.write(&format!("manifest_{i}.txt"), &manifest_text(&ens)?)?;
        }
    }
    let rows = table(&sweep, &seeds, |si, ai| {
        let r = &per_seed[si].rows[ai];
        (r.discrepancy, r.particles, r.validity_ratio)
    });
    let means: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    let non_increasing = manyscat_core::convergence::non_increasing(&means, manyscat_core::recipe::ROUND_TRIP_SLACK);
    out.write("round_trip.csv", table_csv(&rows, &seeds).as_bytes())?;
    let mut warnings = Vec::new();
    if !non_increasing {
        warnings.push("round-trip discrepancy grows as a decreases".to_string());
    }
    Ok(json!({
        "kappa": kappa,
        "n_const": d.n_const,
        "empty": d.is_empty(),
        "reconstruction_error": d.reconstruction_error()?,
        "reference_residual": reference_residual,
        "rows": rows.iter().map(TableRow::to_json).collect::<Vec<_>>(),
        "non_increasing": non_increasing,
        "warnings": warnings,
    }))
}

struct TableRow {
    a: f64,
    particles: usize,
    validity_ratio: f64,
    discrepancies: Vec<f64>,
    mean: f64,
}

impl TableRow {
    fn to_json(&self) -> Value {
        json!({
            "a": self.a,
            "particles": self.particles,
            "validity_ratio": self.validity_ratio,
            "discrepancy": self.mean,
            "per_seed": self.discrepancies,
        })
    }
}

fn table(sweep: &[f64], seeds: &[u64], cell: impl Fn(usize, usize) -> (f64, usize, f64)) -> Vec<TableRow> {
    sweep
        .iter()
        .enumerate()
        .map(|(ai, &a)| {
            let cells: Vec<_> = (0..seeds.len()).map(|si| cell(si, ai)).collect();
            let discrepancies: Vec<f64> = cells.iter().map(|c| c.0).collect();
            TableRow {
                a,
                particles: cells[0].1,
                validity_ratio: cells[0].2,
                mean: discrepancies.iter().sum::<f64>() / discrepancies.len() as f64,
                discrepancies,
            }
        })
        .collect()
}

fn table_csv(rows: &[TableRow], seeds: &[u64]) -> String {
    let mut s = String::from("a,particles,validity_ratio,mean_discrepancy");
    for seed in seeds {
        s.push_str(&format!(",seed_{seed}"));
    }
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{},{},{},{}", r.a, r.particles, r.validity_ratio, r.mean));
        for d in &r.discrepancies {
            s.push_str(&format!(",{d}"));
        }
        s.push('\n');
    }
    s
}

fn converge(c: &RunConfig, out: &RunDir) -> Result<Value> {
    let s = setup(c)?;
    let sweep = c.a_sweep.clone().unwrap();
    let seeds = c.seeds.clone().unwrap();
    let law0 = law_for(c, sweep[0])?;
    classify_regime(&law0).require_limit(law0.kappa1())?;
    let reference = reference_solution(&law0, s.bounds, s.resolution, &s.ctx, &ls_options(c))?;
    let probes = exterior_probe_plane(&s.bounds, c.probe_offset.unwrap(), c.probe_points.unwrap())?;
    let ref_values = evaluate_reference(&reference, &probes)?;
    out.write("reference_probes.csv", points_csv(&probes, &ref_values).as_bytes())?;
    let domain = DomainBox::new(s.bounds, c.cube_side.unwrap())?;
    let opts = manybody_options(c, s.execution);
    let mut grid = vec![vec![(0.0, 0, 0.0); sweep.len()]; seeds.len()];
    for (ai, &a) in sweep.iter().enumerate() {
        let law = law0.with_radius(a)?;
        for (si, &seed) in seeds.iter().enumerate() {
            let cmp = compare_with_limit(&law, &domain, seed, &placement(c), &s.ctx, &opts, &probes, &ref_values)?;
            out.write(
                &format!("manifest_{ai}_seed_{seed}.txt"),
                &manifest_text(&cmp.ensemble)?,
            )?;
            grid[si][ai] = (cmp.discrepancy, cmp.particles, cmp.validity_ratio);
        }
    }
    let rows = table(&sweep, &seeds, |si, ai| grid[si][ai]);
    out.write("convergence.csv", table_csv(&rows, &seeds).as_bytes())?;
    let means: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    let decreasing = strictly_decreasing(&means);
    let mut warnings = Vec::new();
    if !decreasing {
        warnings.push("discrepancy is not monotonically decreasing in a".to_string());
    }
    if reference.stability_warning {
        warnings.push("reference grid is coarse relative to the wavelength".to_string());
    }
    Ok(json!({
        "kappa": law0.kappa(),
        "kappa1": law0.kappa1(),
        "regime": regime_json(&law0),
        "coupling": c.coupling.unwrap(),
        "reference_residual": reference.residual,
        "rows": rows.iter().map(TableRow::to_json).collect::<Vec<_>>(),
        "monotone": decreasing,
        "warnings": warnings,
    }))
}

fn validate(c: &RunConfig, out: &RunDir) -> Result<Value> {
    let s = setup(c)?;
    let k = s.ctx.k();
    let center = Point::zeros();
    let mut rows = Vec::new();
    let mut csv = String::from(
        "a,surface_identity_error,oracle_charge_re,oracle_charge_im,formula_re,formula_im,relative_error\n",
    );
    let sweep = c.a_sweep.clone().unwrap();
    let mut errors = Vec::with_capacity(sweep.len());
    for &a in &sweep {
        let t = Point::new(0.0, 0.0, a);
        let surface = surface_self_integral(&center, a, &t, REFERENCE_SURFACE_ORDER)?;
        let surface_err = (surface - a).abs() / a;
        let law = law_for(c, a)?;
        let zeta = law.impedance_at(&center)?;
        let need = (k * a).ceil() as usize + MIN_ORDER_MARGIN;
        let l_max = c.l_max.unwrap_or(need).max(need);
        let series = sphere_series(&center, a, &s.ctx, zeta, l_max).map_err(|e| e.in_stage("oracle"))?;
        let q_exact = extract_monopole(&series);
        let q_formula = monopole_charge(&law, &center, s.ctx.plane_wave(&center))?;
        let rel = (q_exact - q_formula).norm() / q_exact.norm().max(f64::MIN_POSITIVE);
        errors.push(rel);
        csv.push_str(&format!(
            "{a},{surface_err},{},{},{},{},{rel}\n",
            q_exact.re, q_exact.im, q_formula.re, q_formula.im
        ));
        rows.push(json!({
            "a": a,
            "zeta": c2(zeta),
            "surface_identity_error": surface_err,
            "oracle_charge": c2(q_exact),
            "formula_charge": c2(q_formula),
            "relative_error": rel,
            "boundary_residual": series.boundary_residual(64),
        }));
    }
    out.write("validation.csv", csv.as_bytes())?;
    // deviation is O(a): it must shrink along a decreasing sweep
    let largest = sweep.iter().cloned().fold(0.0, f64::max);
    let at_largest = sweep
        .iter()
        .zip(&errors)
        .find(|(a, _)| **a == largest)
        .map(|(_, e)| *e)
        .unwrap();
    let mut order: Vec<usize> = (0..sweep.len()).collect();
    order.sort_by(|&i, &j| sweep[j].total_cmp(&sweep[i]));
    let shrinking = strictly_decreasing(&order.iter().map(|&i| errors[i]).collect::<Vec<_>>());
    Ok(json!({
        "tolerance": ORACLE_TOLERANCE,
        "rows": rows,
        "within_tolerance": at_largest <= ORACLE_TOLERANCE,
        "error_decreasing": shrinking,
    }))
}
