//! The five subcommands. Each returns an [`Outcome`] whose `passed` flag
//! decides between exit codes 0 and 1; hard errors map through
//! [`HarnessError::exit_code`].

use std::path::{Path, PathBuf};

use chemobound_core::bound::{
    corollary_bound, integrate_reciprocal, lower_bound_integral, BoundError, BoundReport, GrowthFunction,
};
use chemobound_core::constants::{BoundConstants, ConstantsError};
use chemobound_core::exponents::ExponentConfig;
use chemobound_core::field::{Grid, Snapshot};
use chemobound_core::solver::{simulate, BlowupVerdict, SolverConfig, SolverError, Trajectory, VerdictKind};
use chemobound_core::verify::{
    check_lemma_u, check_lemma_v_convex, check_ode_inequality, CheckResult, VerifyError, VerifyReport,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Loaded};
use crate::plot::{Chart, Scale, Series};
use crate::report::Report;
use crate::{audit, num, opt_audit, opt_num, HarnessError};

type Result<T> = std::result::Result<T, HarnessError>;

pub const ENERGY_HEADER: [&str; 5] = ["t", "phi", "u_max", "mass", "gradv_energy"];
pub const SNAPSHOT_HEADER: [&str; 3] = ["x", "u", "v"];
pub const SWEEP_HEADER: [&str; 11] = ["m1", "p", "q", "phi0", "A", "B", "C", "D", "t_lb", "t_star_observed", "verdict"];

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub frozen_constants: bool,
    pub no_plots: bool,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    /// what the CLI prints
    pub stdout: String,
    pub report_sha256: String,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Bound,
    Simulate,
    Verify,
    Sweep,
}

/// Loads the config, folds the flags into it (so they are echoed and
/// hashed) and runs the command.
pub fn run(command: Command, config_path: &Path, opts: &Options) -> Result<Outcome> {
    let mut loaded = crate::config::load(config_path)?;
    apply_options(&mut loaded.config, command, opts)?;
    let out = opts
        .out
        .clone()
        .or_else(|| loaded.config.output.dir.as_ref().map(|d| loaded.base_dir.join(d)))
        .unwrap_or_else(|| PathBuf::from("out"));
    match command {
        Command::Validate => validate(&loaded),
        Command::Bound => bound(&loaded, &out),
        Command::Simulate => simulate_cmd(&loaded, &out),
        Command::Verify => verify(&loaded, &out),
        Command::Sweep => sweep(&loaded, &out),
    }
}

pub fn apply_options(config: &mut ExperimentConfig, command: Command, opts: &Options) -> Result<()> {
    if let Some(tol) = opts.tol {
        if !(tol > 0.0) {
            return Err(HarnessError::Config(format!("--tol must be > 0, got {tol}")));
        }
        if command == Command::Verify {
            config.verify.tol = tol;
        } else {
            config.bound.tol = tol;
        }
    }
    if opts.frozen_constants {
        config.sweep.frozen_constants = true;
    }
    if opts.no_plots {
        config.output.plots = false;
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io { path: path.display().to_string(), source }
}

fn write_csv<const N: usize>(path: &Path, header: [&str; N], rows: impl IntoIterator<Item = [String; N]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let csv_err = |e: csv::Error| HarnessError::Runtime(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn exponent_block(r: &mut Report, cfg: &ExponentConfig) {
    r.section("exponents");
    r.kv("n", cfg.n);
    r.kv("m1", audit(cfg.m1));
    r.kv("m2", audit(cfg.m2));
    r.kv("p", audit(cfg.p));
    r.kv("q", audit(cfg.q));
    r.kv("eta", audit(cfg.eta));
    r.kv("r", audit(cfg.r));
    r.kv("f_r", audit(cfg.f_r));
    r.kv("f_1", audit(cfg.f_1));
    r.kv("a", audit(cfg.a));
    r.kv("a_r_eta", audit(cfg.a_r_eta()));
    match cfg.betas {
        Some((b1, b2)) => {
            r.kv("beta1", audit(b1));
            r.kv("beta2", audit(b2));
        }
        None => r.kv("betas", "undefined"),
    }
    r.section("conditions");
    for v in [&cfg.c1, &cfg.c2] {
        let b = v.binding_term();
        r.kv(&format!("{}", v.condition), if v.passes() { "pass" } else { "fail" });
        r.kv(&format!("{}.binding", v.condition), format!("{} = {}", b.label, audit(b.value)));
        r.kv(&format!("{}.margin", v.condition), audit(v.margin));
        for t in &v.terms {
            r.kv(&format!("{}.term", v.condition), format!("{} = {}", t.label, audit(t.value)));
        }
    }
    let q_min = 1.0 / (cfg.eta - 1.0);
    r.kv("q_condition", format!("q = {} > 1/(eta-1) = {}: {}", audit(cfg.q), audit(q_min), cfg.q > q_min));
    let problems = cfg.problems();
    r.kv("admissible", problems.is_empty());
    for p in problems {
        r.kv("problem", p);
    }
}

fn constants_block(r: &mut Report, bc: &BoundConstants) {
    r.section("constants");
    r.kv("delta", audit(bc.delta));
    r.kv("D_delta", audit(bc.d_delta));
    r.kv("epsilon", audit(bc.epsilon.epsilon));
    r.kv("epsilon.binding", bc.epsilon.binding.label());
    for (i, c) in bc.epsilon.caps.iter().enumerate() {
        r.kv(&format!("epsilon.cap{}", i + 1), audit(*c));
    }
    r.kv("epsilon.alt_cap2", audit(bc.epsilon.alt_cap2));
    for (i, c) in bc.cfactors.c.iter().enumerate() {
        r.kv(&format!("C{}", i + 1), audit(*c));
    }
    r.kv("C2_alt", audit(bc.cfactors.c2_alt));
    r.kv("E1", audit(bc.efactors.e1));
    r.kv("E2", audit(bc.efactors.e2));
    r.kv("A", audit(bc.coeffs.a));
    r.kv("B", audit(bc.coeffs.b));
    r.kv("C", audit(bc.coeffs.c));
    r.kv("D", audit(bc.coeffs.d));
    r.kv("c1", audit(bc.provenance.gn.c1));
    r.kv("c2", audit(bc.provenance.gn.c2));
    for line in bc.provenance.describe() {
        r.kv("conditional_on", line);
    }
}

fn constants_err(e: ConstantsError) -> HarnessError {
    match e {
        ConstantsError::MissingDDelta
        | ConstantsError::InvalidDDelta(_)
        | ConstantsError::UnexpectedDDelta(_)
        | ConstantsError::InvalidDelta { .. }
        | ConstantsError::InvalidGn { .. } => HarnessError::Config(format!("bound: {e}")),
        other => HarnessError::Inadmissible(other.to_string()),
    }
}

fn bound_err(e: BoundError) -> HarnessError {
    match e {
        BoundError::Inadmissible(x) => HarnessError::Inadmissible(x.to_string()),
        BoundError::InvalidTolerance(_) | BoundError::InvalidPhi0(_) => HarnessError::Config(e.to_string()),
        other => HarnessError::Runtime(other.to_string()),
    }
}

fn admissible_exponents(cfgx: &ExperimentConfig) -> Result<ExponentConfig> {
    let params = cfgx.params()?;
    match cfgx.exponents_for(&params)? {
        None => Err(HarnessError::Inadmissible("exponent search found no admissible (p, q)".into())),
        Some(cfg) if !cfg.is_admissible() => Err(HarnessError::Inadmissible(cfg.problems().join("; "))),
        Some(cfg) => Ok(cfg),
    }
}

fn assemble(cfgx: &ExperimentConfig, params_m1: f64, cfg: &ExponentConfig) -> Result<BoundConstants> {
    let params = cfgx.params_with_m1(params_m1)?;
    let gn = cfgx.gn_constants(cfg)?;
    BoundConstants::assemble(cfg, &params, &gn, cfgx.bound.delta, cfgx.bound.d_delta).map_err(constants_err)
}

pub fn validate(loaded: &Loaded) -> Result<Outcome> {
    let cfgx = &loaded.config;
    let params = cfgx.params()?;
    let mut r = Report::new("validate", cfgx);
    let chosen = match cfgx.exponents_for(&params) {
        Ok(x) => x,
        Err(HarnessError::Inadmissible(msg)) => {
            r.section("exponents");
            r.kv("admissible", false);
            r.kv("problem", &msg);
            let (text, hash) = r.finish();
            return Ok(Outcome { passed: false, stdout: text, report_sha256: hash });
        }
        Err(e) => return Err(e),
    };
    if let crate::config::ExponentsSection::Search { .. } = cfgx.exponents {
        r.section("search");
        r.kv("found", chosen.is_some());
    }
    let passed = match &chosen {
        Some(cfg) => {
            exponent_block(&mut r, cfg);
            cfg.is_admissible()
        }
        None => false,
    };
    let (text, hash) = r.finish();
    Ok(Outcome { passed, stdout: text, report_sha256: hash })
}

pub fn bound(loaded: &Loaded, out: &Path) -> Result<Outcome> {
    let cfgx = &loaded.config;
    let cfg = admissible_exponents(cfgx)?;
    let bc = assemble(cfgx, cfgx.model.m1, &cfg)?;
    let phi0 = cfgx.phi0(&loaded.base_dir, &cfg)?;
    let quad = lower_bound_integral(phi0, &bc, &cfg, cfgx.bound.tol).map_err(bound_err)?;

    let mut r = Report::new("bound", cfgx);
    exponent_block(&mut r, &cfg);
    constants_block(&mut r, &bc);
    r.section("bound");
    bound_lines(&mut r, &quad);
    let mut passed = true;
    if phi0 < 1.0 {
        let cor: BoundReport = corollary_bound(phi0, &bc, &cfg).map_err(bound_err)?;
        let ok = cor.t_lower <= quad.t_lower + quad.quadrature_error_estimate;
        r.kv("corollary", audit(cor.t_lower));
        r.kv("corollary.method", cor.method.label());
        r.kv("corollary_le_quadrature", ok);
        passed &= ok;
    }
    let (text, hash) = r.finish();
    write_file(&out.join("bound_report.txt"), &text)?;
    let stdout = format!(
        "t_lower = {} (phi0 = {}, quadrature error <= {})\ncheck = {}\nreport_sha256 = {hash}\n",
        audit(quad.t_lower),
        audit(phi0),
        audit(quad.quadrature_error_estimate),
        if passed { "pass" } else { "fail" }
    );
    Ok(Outcome { passed, stdout, report_sha256: hash })
}

fn bound_lines(r: &mut Report, b: &BoundReport) {
    r.kv("phi0", audit(b.phi0));
    r.kv("t_lower", audit(b.t_lower));
    r.kv("method", b.method.label());
    r.kv("quadrature_error_estimate", audit(b.quadrature_error_estimate));
    for c in &b.conditional_on {
        r.kv("conditional_on", c);
    }
}

fn run_simulation(cfgx: &ExperimentConfig, base_dir: &Path, m1: f64, solver: &SolverConfig) -> Result<(Grid, Trajectory, BlowupVerdict)> {
    let params = cfgx.params_with_m1(m1)?;
    let grid = cfgx.grid()?;
    let s0 = cfgx.initial_state(base_dir, &grid)?;
    let (traj, verdict) = simulate(&s0, &params, &grid, solver).map_err(|e| match e {
        SolverError::InvalidConfig(m) => HarnessError::Config(m),
        other => HarnessError::Runtime(format!("simulation: {other}")),
    })?;
    Ok((grid, traj, verdict))
}

fn verdict_block(r: &mut Report, traj: &Trajectory, v: &BlowupVerdict) {
    r.section("verdict");
    r.kv("kind", v.kind.label());
    r.kv("t_star_estimate", opt_audit(v.t_star_estimate));
    r.kv("t_star_phi", opt_audit(v.t_star_phi));
    r.kv("low_confidence", v.low_confidence);
    r.kv("final_time", audit(v.final_time));
    r.kv("final_u_max", audit(v.final_u_max));
    r.kv("final_phi", audit(v.final_phi));
    r.kv("max_grad_v", audit(v.max_grad_v));
    r.section("run");
    let s = &traj.stats;
    r.kv("samples", traj.energy.len());
    r.kv("accepted_steps", s.accepted_steps);
    r.kv("rejected_steps", s.rejected_steps);
    r.kv("clip_events", s.clip_events);
    r.kv("min_u", audit(s.min_u));
    r.kv("min_dt", audit(s.min_dt));
    r.kv("max_dt", audit(s.max_dt));
    r.kv("max_cap_ratio", audit(s.max_cap_ratio));
    r.kv("mass_drift", audit(traj.mass_drift()));
}

fn energy_rows(traj: &Trajectory) -> impl Iterator<Item = [String; 5]> + '_ {
    traj.energy
        .samples()
        .iter()
        .map(|s| [num(s.t), num(s.phi), num(s.u_max), num(s.mass), num(s.gradv_energy)])
}

/// Indices of `count` samples spread evenly from first to last.
fn snapshot_indices(len: usize, count: usize) -> Vec<usize> {
    if len == 0 || count == 0 {
        return Vec::new();
    }
    if count == 1 || len == 1 {
        return vec![len - 1];
    }
    let mut idx: Vec<usize> = (0..count).map(|k| (k * (len - 1) + (count - 1) / 2) / (count - 1)).collect();
    idx.dedup();
    idx
}

pub fn simulate_cmd(loaded: &Loaded, out: &Path) -> Result<Outcome> {
    let cfgx = &loaded.config;
    let (grid, traj, verdict) = run_simulation(cfgx, &loaded.base_dir, cfgx.model.m1, &cfgx.solver)?;
    write_csv(&out.join("energy.csv"), ENERGY_HEADER, energy_rows(&traj))?;
    let mut r = Report::new("simulate", cfgx);
    verdict_block(&mut r, &traj, &verdict);
    r.section("snapshots");
    for (k, i) in snapshot_indices(traj.states.len(), cfgx.output.snapshots).into_iter().enumerate() {
        let snap = Snapshot::of(&traj.states[i], &grid);
        let name = format!("snapshot_{k:03}.csv");
        write_csv(&out.join("snapshots").join(&name), SNAPSHOT_HEADER, snap.rows().map(|(x, u, v)| [num(x), num(u), num(v)]))?;
        r.kv(&name, format!("t = {}", audit(snap.t)));
    }
    if cfgx.output.plots {
        let samples = traj.energy.samples();
        let phi = Chart { title: "energy functional", x_label: "t", y_label: "phi", y_scale: Scale::Log };
        let umax = Chart { title: "density maximum", x_label: "t", y_label: "max u", y_scale: Scale::Log };
        let s_phi = Series { name: "phi", points: samples.iter().map(|s| (s.t, s.phi)).collect() };
        let s_u = Series { name: "max u", points: samples.iter().map(|s| (s.t, s.u_max)).collect() };
        write_file(&out.join("phi.svg"), &phi.render(&[s_phi]))?;
        write_file(&out.join("u_max.svg"), &umax.render(&[s_u]))?;
    }
    let (text, hash) = r.finish();
    write_file(&out.join("simulate_report.txt"), &text)?;
    let stdout = format!(
        "verdict = {} at t = {}\nsamples = {}\nreport_sha256 = {hash}\n",
        verdict.kind.label(),
        audit(verdict.final_time),
        traj.energy.len()
    );
    // step underflow is a verdict, not a failure
    Ok(Outcome { passed: true, stdout, report_sha256: hash })
}

fn check_line(c: &CheckResult) -> String {
    let mut s = format!(
        "{}: samples {}, worst {} at t = {}, tol {}",
        c.verdict(),
        c.samples,
        audit(c.worst_residual),
        audit(c.worst_t),
        audit(c.tolerance)
    );
    if c.conditional {
        s.push_str(", conditional");
    }
    if let Some(why) = &c.skipped {
        s.push_str(&format!(", skipped: {why}"));
    }
    s
}

fn verify_err(e: VerifyError) -> HarnessError {
    match e {
        VerifyError::InsufficientData(n) => HarnessError::Runtime(format!("trajectory has only {n} samples")),
        other => HarnessError::Runtime(other.to_string()),
    }
}

pub fn verify(loaded: &Loaded, out: &Path) -> Result<Outcome> {
    let cfgx = &loaded.config;
    let tol = cfgx.verify.tol;
    let params = cfgx.params()?;
    let cfg = cfgx
        .exponents_for(&params)?
        .ok_or_else(|| HarnessError::Inadmissible("exponent search found no admissible (p, q)".into()))?;
    let solver = SolverConfig { energy_p: cfg.p, energy_q: cfg.q, ..cfgx.solver.clone() };
    let (_, traj, verdict) = run_simulation(cfgx, &loaded.base_dir, cfgx.model.m1, &solver)?;

    let mut rep = VerifyReport::default();
    rep.push(check_lemma_u(&traj, cfg.p, tol).map_err(verify_err)?);
    rep.push(check_lemma_v_convex(&traj, cfg.q, tol).map_err(verify_err)?);
    let constants = if cfg.is_admissible() && cfgx.gn.is_some() {
        Some(assemble(cfgx, cfgx.model.m1, &cfg)?)
    } else {
        None
    };
    match &constants {
        Some(bc) => {
            let mut c = check_ode_inequality(&traj.energy, bc, &cfg, tol).map_err(verify_err)?;
            c.conditional = true;
            rep.push(c);
            for line in bc.provenance.describe() {
                rep.conditional_flags.push(format!("ode_inequality: {line}"));
            }
        }
        None => {
            let why = if cfg.is_admissible() { "no [gn] section" } else { "inadmissible exponents" };
            rep.push(CheckResult::skipped("ode_inequality", tol, why.into()));
        }
    }

    let mut r = Report::new("verify", cfgx);
    verdict_block(&mut r, &traj, &verdict);
    r.section("checks");
    for c in &rep.checks {
        r.kv(&c.name, check_line(c));
    }
    for f in &rep.conditional_flags {
        r.kv("conditional_on", f);
    }
    let passed = rep.all_passed();
    r.kv("all_passed", passed);
    let (text, hash) = r.finish();
    write_file(&out.join("verify_report.txt"), &text)?;
    let mut stdout = String::new();
    for c in &rep.checks {
        stdout.push_str(&format!("{} {}\n", c.name, check_line(c)));
    }
    stdout.push_str(&format!("report_sha256 = {hash}\n"));
    Ok(Outcome { passed, stdout, report_sha256: hash })
}

/// One row of the `m1` sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub m1: f64,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub f_r: Option<f64>,
    pub phi0: Option<f64>,
    pub coeffs: Option<[f64; 4]>,
    pub t_lb: Option<f64>,
    pub t_star_observed: Option<f64>,
    pub verdict: String,
}

impl SweepRow {
    fn empty(m1: f64, verdict: String) -> Self {
        SweepRow { m1, p: None, q: None, f_r: None, phi0: None, coeffs: None, t_lb: None, t_star_observed: None, verdict }
    }

    fn csv(&self) -> [String; 11] {
        let c = |i: usize| opt_num(self.coeffs.map(|c| c[i]));
        [
            num(self.m1),
            opt_num(self.p),
            opt_num(self.q),
            opt_num(self.phi0),
            c(0),
            c(1),
            c(2),
            c(3),
            opt_num(self.t_lb),
            opt_num(self.t_star_observed),
            self.verdict.clone(),
        ]
    }
}

fn sweep_row(cfgx: &ExperimentConfig, base_dir: &Path, m1: f64, frozen: Option<&(BoundConstants, ExponentConfig)>) -> SweepRow {
    let attempt = || -> Result<SweepRow> {
        let params = cfgx.params_with_m1(m1)?;
        let cfg = match cfgx.exponents_for(&params) {
            Ok(Some(c)) => c,
            Ok(None) => return Ok(SweepRow::empty(m1, "skipped: no admissible (p, q)".into())),
            Err(e) => return Ok(SweepRow::empty(m1, format!("skipped: {e}"))),
        };
        let mut row = SweepRow::empty(m1, String::new());
        row.p = Some(cfg.p);
        row.q = Some(cfg.q);
        row.f_r = Some(cfg.f_r);
        let problems = cfg.problems();
        if !problems.is_empty() {
            row.verdict = format!("skipped: {}", problems.join("; "));
            return Ok(row);
        }
        let phi0 = cfgx.phi0(base_dir, &cfg)?;
        row.phi0 = Some(phi0);
        let t_lb = match frozen {
            // A..D and f(η,1) held fixed; only f(η, r(m1)) moves
            Some((bc, base_cfg)) => {
                row.coeffs = Some([bc.coeffs.a, bc.coeffs.b, bc.coeffs.c, bc.coeffs.d]);
                let g = GrowthFunction::from_parts(&bc.coeffs, cfg.f_r, base_cfg.f_1, base_cfg.eta);
                integrate_reciprocal(&g, phi0, cfgx.bound.tol).map_err(bound_err)?.value
            }
            None => {
                let bc = assemble(cfgx, m1, &cfg)?;
                row.coeffs = Some([bc.coeffs.a, bc.coeffs.b, bc.coeffs.c, bc.coeffs.d]);
                lower_bound_integral(phi0, &bc, &cfg, cfgx.bound.tol).map_err(bound_err)?.t_lower
            }
        };
        row.t_lb = Some(t_lb);
        row.verdict = "bound_only".into();
        if cfgx.sweep.simulate {
            let (_, _, v) = run_simulation(cfgx, base_dir, m1, &cfgx.solver)?;
            row.verdict = v.kind.label().into();
            if v.kind == VerdictKind::BlowupDetected {
                row.t_star_observed = v.t_star_estimate;
            }
        }
        Ok(row)
    };
    attempt().unwrap_or_else(|e| SweepRow::empty(m1, format!("error: {e}")))
}

pub fn sweep(loaded: &Loaded, out: &Path) -> Result<Outcome> {
    let cfgx = &loaded.config;
    if cfgx.sweep.m1.is_empty() {
        return Err(HarnessError::Config("sweep.m1 must list at least one value".into()));
    }
    let mut m1s = cfgx.sweep.m1.clone();
    m1s.sort_by(|a, b| a.total_cmp(b));
    let frozen = if cfgx.sweep.frozen_constants {
        let cfg = admissible_exponents(cfgx)?;
        Some((assemble(cfgx, cfgx.model.m1, &cfg)?, cfg))
    } else {
        None
    };
    // share-nothing rows; collect keeps the sorted order
    let rows: Vec<SweepRow> = m1s.par_iter().map(|&m1| sweep_row(cfgx, &loaded.base_dir, m1, frozen.as_ref())).collect();

    let mut r = Report::new("sweep", cfgx);
    if let Some((bc, cfg)) = &frozen {
        r.section("frozen_constants");
        r.kv("base_m1", audit(cfg.m1));
        r.kv("f_1", audit(cfg.f_1));
        r.kv("A", audit(bc.coeffs.a));
        r.kv("B", audit(bc.coeffs.b));
        r.kv("C", audit(bc.coeffs.c));
        r.kv("D", audit(bc.coeffs.d));
    }
    r.section("rows");
    for row in &rows {
        r.line(row.csv().join(","));
    }
    r.section("checks");
    let bounded: Vec<&SweepRow> = rows.iter().filter(|x| x.t_lb.is_some()).collect();
    let mut passed = true;
    let positive = bounded.iter().all(|x| x.t_lb.is_some_and(|t| t > 0.0));
    r.kv("t_lb_positive", positive);
    passed &= positive;
    if frozen.is_some() {
        let mono = bounded.windows(2).all(|w| w[1].t_lb >= w[0].t_lb && w[1].f_r < w[0].f_r);
        r.kv("frozen_t_lb_nondecreasing", mono);
        passed &= mono;
    }
    if cfgx.sweep.simulate {
        let below = rows.iter().all(|x| match (x.t_lb, x.t_star_observed) {
            (Some(lb), Some(ts)) => lb <= ts,
            _ => true,
        });
        r.kv("t_lb_le_t_star", below);
        passed &= below;
    }
    r.kv("all_passed", passed);

    write_csv(&out.join("sweep.csv"), SWEEP_HEADER, rows.iter().map(SweepRow::csv))?;
    if cfgx.output.plots {
        let chart = Chart { title: "lower bound versus m1", x_label: "m1", y_label: "time", y_scale: Scale::Log };
        let mut series = vec![Series { name: "t_lb", points: rows.iter().filter_map(|x| x.t_lb.map(|t| (x.m1, t))).collect() }];
        if cfgx.sweep.simulate {
            series.push(Series {
                name: "t* observed",
                points: rows.iter().filter_map(|x| x.t_star_observed.map(|t| (x.m1, t))).collect(),
            });
        }
        write_file(&out.join("sweep_t_lb.svg"), &chart.render(&series))?;
    }
    let (text, hash) = r.finish();
    write_file(&out.join("sweep_report.txt"), &text)?;
    let mut stdout = format!("{}\n", SWEEP_HEADER.join(","));
    for row in &rows {
        stdout.push_str(&row.csv().join(","));
        stdout.push('\n');
    }
    stdout.push_str(&format!("checks = {}\nreport_sha256 = {hash}\n", if passed { "pass" } else { "fail" }));
    Ok(Outcome { passed, stdout, report_sha256: hash })
}
