use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use robust_detect::density::{Grid, GridDensity, GridFunction};
use robust_detect::detector::{
    asymptotic_exponents, roc_from_distributions, statistic_distributions, test_error_probs,
    LlrDistribution, RandomizedTest, DEFAULT_BINS,
};
use robust_detect::lfd::{
    breakdown_point, solve_band_lfds, solve_contamination_lfds, solve_fball_lfds,
    verify_lfd_criteria, LfdPair, RegionLabel,
};
use robust_detect::sampling::RNG_ALGORITHM;
use robust_detect::sequential::{
    design, design_sprt, DesignOptions, LfdOptions, SequentialDesign, TruthModel, ZGrid,
};
use robust_detect::uncertainty::{contamination_to_band, DensityBand, UncertaintySet};
use serde::Serialize;

use crate::config::{build_density, Command, Evaluation, ExperimentConfig, TruthSpec};
use crate::error::{exit, CliError};
use crate::output::{flag, int, num, opt_int, parse_num, FileRecord, OutputDir, Table};

pub struct RunOptions {
    pub out: PathBuf,
    /// Overrides the config seed.
    pub seed: Option<u64>,
    pub quiet: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// The LFDs coincide: the hypotheses cannot be distinguished.
    Breakdown,
    /// At least one verification criterion failed.
    VerifyFailed,
}

impl Status {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Ok => exit::OK,
            Self::Breakdown => exit::BREAKDOWN,
            Self::VerifyFailed => exit::VERIFY_FAILED,
        }
    }
}

#[derive(Debug)]
pub struct RunSummary {
    pub status: Status,
    pub files: Vec<FileRecord>,
    pub pass: BTreeMap<String, bool>,
}

impl RunSummary {
    pub fn exit_code(&self) -> u8 {
        self.status.exit_code()
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: Option<u64>,
    rng_algorithm: &'static str,
    threads: usize,
    status: Status,
    exit_code: u8,
    pass: &'a BTreeMap<String, bool>,
    timings_ms: &'a BTreeMap<String, f64>,
    files: &'a [FileRecord],
    config: &'a ExperimentConfig,
}

/// What a command leaves behind besides its files.
struct Outcome {
    status: Status,
    pass: BTreeMap<String, bool>,
}

impl Outcome {
    fn ok() -> Self {
        Self {
            status: Status::Ok,
            pass: BTreeMap::new(),
        }
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    base: &'a Path,
    grid: Grid<f64>,
    out: OutputDir,
    quiet: bool,
    timings: BTreeMap<String, f64>,
}

impl Ctx<'_> {
    fn log(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    fn timed<R>(&mut self, what: &str, f: impl FnOnce(&Self) -> R) -> R {
        let t = Instant::now();
        let r = f(self);
        self.timings
            .insert(what.to_string(), t.elapsed().as_secs_f64() * 1e3);
        r
    }

    fn seed(&self) -> u64 {
        self.cfg
            .seed
            .expect("validated: stochastic commands carry a seed")
    }

    fn sets(&self) -> Result<Vec<UncertaintySet<f64>>, CliError> {
        self.cfg
            .hypotheses
            .iter()
            .map(|h| h.build(&self.grid))
            .collect()
    }
}

/// Loads the config at `config_path` and runs `command`, writing into `opts.out`.
pub fn run(
    command: Command,
    config_path: &Path,
    opts: &RunOptions,
) -> Result<RunSummary, CliError> {
    let cfg = ExperimentConfig::load(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    run_config(command, cfg, base, opts)
}

/// Runs an already parsed config; relative paths inside it resolve against `base`.
pub fn run_config(
    command: Command,
    mut cfg: ExperimentConfig,
    base: &Path,
    opts: &RunOptions,
) -> Result<RunSummary, CliError> {
    let start = Instant::now();
    if opts.seed.is_some() {
        cfg.seed = opts.seed;
    }
    cfg.validate(command)?;
    let grid = cfg.build_grid()?;
    let out = OutputDir::create(&opts.out)?;
    let mut ctx = Ctx {
        cfg: &cfg,
        base,
        grid,
        out,
        quiet: opts.quiet,
        timings: BTreeMap::new(),
    };
    ctx.log(&format!(
        "robust-detect {}: grid of {} points on [{}, {}]",
        command.as_str(),
        cfg.grid.n,
        cfg.grid.x_min,
        cfg.grid.x_max
    ));
    let outcome = match command {
        Command::Lfd => cmd_lfd(&mut ctx)?,
        Command::Roc => cmd_roc(&mut ctx)?,
        Command::Breakdown => cmd_breakdown(&mut ctx)?,
        Command::SeqDesign => cmd_seq_design(&mut ctx)?,
        Command::SeqSimulate => cmd_seq_simulate(&mut ctx)?,
        Command::Verify => cmd_verify(&mut ctx)?,
    };
    ctx.timings
        .insert("total".into(), start.elapsed().as_secs_f64() * 1e3);
    let files = ctx.out.files().to_vec();
    let manifest = Manifest {
        tool: "robust-detect",
        version: env!("CARGO_PKG_VERSION"),
        command: command.as_str(),
        seed: cfg.seed,
        rng_algorithm: RNG_ALGORITHM,
        threads: rayon::current_num_threads(),
        status: outcome.status,
        exit_code: outcome.status.exit_code(),
        pass: &outcome.pass,
        timings_ms: &ctx.timings,
        files: &files,
        config: &cfg,
    };
    ctx.out.write_json("manifest.json", &manifest)?;
    ctx.log(&format!(
        "wrote {} files to {}",
        files.len() + 1,
        ctx.out.path().display()
    ));
    Ok(RunSummary {
        status: outcome.status,
        files,
        pass: outcome.pass,
    })
}

fn to_band(set: &UncertaintySet<f64>) -> Result<DensityBand<f64>, CliError> {
    match set {
        UncertaintySet::Band(b) => Ok(b.clone()),
        UncertaintySet::Contamination(c) => Ok(contamination_to_band(c)),
        UncertaintySet::Ball(_) => Err(CliError::Config(
            "an f-divergence ball can only be paired with another ball".into(),
        )),
    }
}

fn solve_pair(ctx: &Ctx, sets: &[UncertaintySet<f64>]) -> Result<LfdPair<f64>, CliError> {
    let tol = ctx.cfg.tolerances;
    Ok(match (&sets[0], &sets[1]) {
        (UncertaintySet::Contamination(a), UncertaintySet::Contamination(b)) => {
            solve_contamination_lfds(a.nominal(), b.nominal(), a.eps(), b.eps())?
        }
        (UncertaintySet::Ball(a), UncertaintySet::Ball(b)) => solve_fball_lfds(a, b)?,
        (s0, s1) => solve_band_lfds(
            &to_band(s0)?,
            &to_band(s1)?,
            tol.lfd_tol.unwrap_or(1e-11),
            tol.lfd_max_iter.unwrap_or(1000),
        )?,
    })
}

#[derive(Serialize)]
struct LfdScalars {
    c0: f64,
    c1: f64,
    breakdown: bool,
    iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    band_scalars: Option<[f64; 4]>,
}

fn lfd_table(pair: &LfdPair<f64>) -> Table {
    let g = pair.grid();
    let mut t = Table::new(&["x", "q0", "q1", "llr", "region"]);
    for i in 0..g.len() {
        t.push(vec![
            num(g.x(i)),
            num(pair.q0.values()[i]),
            num(pair.q1.values()[i]),
            num(pair.llr.values()[i]),
            pair.labels[i].as_str().into(),
        ]);
    }
    t
}

fn cmd_lfd(ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let sets = ctx.sets()?;
    let pair = ctx.timed("solve", |c| solve_pair(c, &sets))?;
    ctx.log(&format!(
        "c0 = {:e}, c1 = {:e}, {} iterations",
        pair.c0, pair.c1, pair.iterations
    ));
    ctx.out.write_csv("lfds.csv", &lfd_table(&pair))?;
    ctx.out.write_json(
        "scalars.json",
        &LfdScalars {
            c0: pair.c0,
            c1: pair.c1,
            breakdown: pair.breakdown,
            iterations: pair.iterations,
            band_scalars: pair.band_scalars,
        },
    )?;
    let mut o = Outcome::ok();
    o.pass.insert("distinguishable".into(), !pair.breakdown);
    if pair.breakdown {
        ctx.log("breakdown: the least favorable densities coincide");
        o.status = Status::Breakdown;
    }
    Ok(o)
}

fn distribution_rows(t: &mut Table, n: usize, hypothesis: usize, d: &LlrDistribution<f64>) {
    for &(v, m) in d.atoms() {
        t.push(vec![
            int(n),
            int(hypothesis),
            "atom".into(),
            num(v),
            num(v),
            num(m),
        ]);
    }
    for (k, &m) in d.bins().iter().enumerate() {
        if m > 0.0 {
            t.push(vec![
                int(n),
                int(hypothesis),
                "bin".into(),
                num(d.bin_edge(k)),
                num(d.bin_edge(k + 1)),
                num(m),
            ]);
        }
    }
}

#[derive(Serialize)]
struct RocScalars {
    c0: f64,
    c1: f64,
    breakdown: bool,
    /// Error exponents in bits per observation under the evaluation pair.
    exponent_false_alarm: f64,
    exponent_miss: f64,
    exponents_valid: bool,
}

fn cmd_roc(ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let spec = ctx.cfg.roc.clone().expect("validated");
    let sets = ctx.sets()?;
    let pair = ctx.timed("solve", |c| solve_pair(c, &sets))?;
    let (e0, e1) = match spec.evaluate {
        Evaluation::LeastFavorable => (pair.q0.clone(), pair.q1.clone()),
        Evaluation::Nominal => {
            let specs = match &ctx.cfg.nominals {
                Some([a, b]) => [a.clone(), b.clone()],
                None => {
                    let nom = |k: usize| {
                        ctx.cfg.hypotheses[k].nominal().cloned().ok_or_else(|| {
                            CliError::Config(format!(
                                "hypothesis {k} has no nominal; set 'nominals'"
                            ))
                        })
                    };
                    [nom(0)?, nom(1)?]
                }
            };
            (
                build_density(&specs[0], &ctx.grid)?,
                build_density(&specs[1], &ctx.grid)?,
            )
        }
    };
    let mut roc = Table::new(&["n", "alpha", "power", "log_threshold", "gamma"]);
    let mut dist = Table::new(&["n", "hypothesis", "kind", "lo", "hi", "mass"]);
    let mut tests = Table::new(&["n", "log_threshold", "gamma", "alpha", "beta"]);
    let t0 = Instant::now();
    for &n in &spec.samples {
        let (d0, d1) = statistic_distributions(&pair, &e0, &e1, n, DEFAULT_BINS)?;
        for p in roc_from_distributions(&d0, &d1, n).points {
            roc.push(vec![
                int(n),
                num(p.alpha),
                num(p.power),
                num(p.log_threshold),
                num(p.gamma),
            ]);
        }
        distribution_rows(&mut dist, n, 0, &d0);
        distribution_rows(&mut dist, n, 1, &d1);
        for t in &spec.tests {
            let (a, b) = test_error_probs(&d0, &d1, RandomizedTest::new(t.log_threshold, t.gamma)?);
            tests.push(vec![
                int(n),
                num(t.log_threshold),
                num(t.gamma),
                num(a),
                num(b),
            ]);
        }
        ctx.log(&format!("n = {n}: {} operating points", roc.len()));
    }
    ctx.timings
        .insert("roc".into(), t0.elapsed().as_secs_f64() * 1e3);
    let ex = asymptotic_exponents(&e0, &e1, &pair.q0, &pair.q1)?;
    ctx.out.write_csv("roc.csv", &roc)?;
    ctx.out.write_csv("distribution.csv", &dist)?;
    if !tests.is_empty() {
        ctx.out.write_csv("tests.csv", &tests)?;
    }
    ctx.out.write_json(
        "scalars.json",
        &RocScalars {
            c0: pair.c0,
            c1: pair.c1,
            breakdown: pair.breakdown,
            exponent_false_alarm: ex.e0,
            exponent_miss: ex.e1,
            exponents_valid: ex.valid,
        },
    )?;
    Ok(Outcome::ok())
}

fn cmd_breakdown(ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let [a, b] = ctx.cfg.nominals.clone().expect("validated");
    let (p0, p1) = (build_density(&a, &ctx.grid)?, build_density(&b, &ctx.grid)?);
    let eps = ctx.timed("solve", |_| breakdown_point(&p0, &p1))?;
    ctx.log(&format!("breakdown point {eps:.6}"));
    #[derive(Serialize)]
    struct Scalars {
        breakdown_point: f64,
    }
    ctx.out.write_json(
        "scalars.json",
        &Scalars {
            breakdown_point: eps,
        },
    )?;
    Ok(Outcome::ok())
}

/// Reads an LFD table as written by `lfd` back into a pair on `grid`.
pub fn read_lfd_table(path: &Path, grid: &Grid<f64>) -> Result<LfdPair<f64>, CliError> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != ["x", "q0", "q1", "llr", "region"] {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let (mut q0, mut q1, mut llr, mut labels) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let tol = 1e-9 * (grid.x_max() - grid.x_min());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |k: usize| {
            parse_num(&rec[k])
                .ok_or_else(|| bad(format!("row {}: bad number '{}'", i + 1, &rec[k])))
        };
        if i >= grid.len() || (field(0)? - grid.x(i)).abs() > tol {
            return Err(bad(format!(
                "row {} does not match the configured grid",
                i + 1
            )));
        }
        q0.push(field(1)?);
        q1.push(field(2)?);
        llr.push(field(3)?);
        labels.push(
            RegionLabel::parse(&rec[4])
                .ok_or_else(|| bad(format!("unknown region '{}'", &rec[4])))?,
        );
    }
    if labels.len() != grid.len() {
        return Err(bad(format!(
            "{} rows for a grid of {} points",
            labels.len(),
            grid.len()
        )));
    }
    let level = |label: RegionLabel| labels.iter().position(|&l| l == label).map(|i| llr[i]);
    let c0 = level(RegionLabel::ConstInvC0).map_or(f64::NAN, |v| (-v).exp());
    let c1 = level(RegionLabel::ConstC1).map_or(f64::NAN, |v| v.exp());
    Ok(LfdPair {
        q0: GridDensity::new(*grid, q0)?,
        q1: GridDensity::new(*grid, q1)?,
        c0,
        c1,
        llr: GridFunction::new(*grid, llr)?,
        labels,
        breakdown: false,
        iterations: 0,
        band_scalars: None,
    })
}

fn cmd_verify(ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let spec = ctx.cfg.verify.clone().expect("validated");
    let path = ctx.base.join(&spec.lfd_file);
    let pair = read_lfd_table(&path, &ctx.grid)?;
    let sets = ctx.sets()?;
    let seed = ctx.seed();
    let reports = ctx.timed("verify", |_| {
        verify_lfd_criteria(&pair, &sets[0], &sets[1], spec.samples, seed)
    })?;
    let mut t = Table::new(&[
        "criterion",
        "worst_violation",
        "tolerance",
        "samples",
        "pass",
    ]);
    let mut o = Outcome::ok();
    for r in &reports {
        t.push(vec![
            int(r.criterion as usize),
            num(r.worst_violation),
            num(r.tolerance),
            int(r.samples),
            flag(r.pass),
        ]);
        o.pass.insert(format!("criterion_{}", r.criterion), r.pass);
        ctx.log(&format!(
            "criterion {}: worst violation {:e} ({})",
            r.criterion,
            r.worst_violation,
            if r.pass { "pass" } else { "FAIL" }
        ));
        if !r.pass {
            o.status = Status::VerifyFailed;
        }
    }
    ctx.out.write_csv("criteria.csv", &t)?;
    Ok(o)
}

fn build_design(ctx: &mut Ctx) -> Result<SequentialDesign<f64>, CliError> {
    let seq = ctx.cfg.sequential.clone().expect("validated");
    let zgrid = ZGrid::new(seq.half_width, seq.points)?;
    let sets = ctx.sets()?;
    let d = match seq.sprt {
        Some(s) => {
            let dens = |set: &UncertaintySet<f64>| match set {
                UncertaintySet::Band(b) => b
                    .degenerate()
                    .ok_or_else(|| CliError::Config("SPRT needs single densities".into())),
                _ => Err(CliError::Config("SPRT needs single densities".into())),
            };
            let (p1, p2) = (dens(&sets[0])?, dens(&sets[1])?);
            let (log_a, log_b) = design_sprt(&p1, &p2, s.alpha, s.beta)?;
            ctx.log(&format!(
                "SPRT thresholds log A = {log_a:.6}, log B = {log_b:.6}"
            ));
            SequentialDesign::from_sprt(&p1, &p2, log_a, log_b, zgrid)?
        }
        None => {
            let tol = ctx.cfg.tolerances;
            let mut opts = DesignOptions::default();
            opts.tol = tol.design_tol.unwrap_or(opts.tol);
            opts.max_sweeps = tol.max_sweeps.unwrap_or(opts.max_sweeps);
            opts.max_alternations = tol.max_alternations.unwrap_or(opts.max_alternations);
            let defaults = LfdOptions::<f64>::default();
            opts.lfd = LfdOptions {
                tol: tol.state_lfd_tol.unwrap_or(defaults.tol),
                max_cycles: tol.state_lfd_max_cycles.unwrap_or(defaults.max_cycles),
            };
            ctx.log(&format!(
                "designing on {}^{} states",
                seq.points,
                sets.len().saturating_sub(1).min(2)
            ));
            ctx.timed("design", |_| design(&sets, &seq.lambda, zgrid, &opts))?
        }
    };
    let r = d.report();
    ctx.log(&format!(
        "{} alternations, {} sweeps, {} unconverged states",
        r.alternations, r.sweeps, r.unconverged_states
    ));
    Ok(d)
}

#[derive(Serialize)]
struct DesignScalars {
    initial_rho: f64,
    initial_g: f64,
    initial_stop: bool,
    unconverged_states: usize,
}

fn write_design(ctx: &mut Ctx, d: &SequentialDesign<f64>) -> Result<(), CliError> {
    let export = d.export();
    let mut t = Table::new(&["log_z1", "log_z2", "rho", "g", "stop", "decision"]);
    for r in &export.states {
        t.push(vec![
            num(r.log_z1),
            num(r.log_z2),
            num(r.rho),
            num(r.g),
            flag(r.stop),
            opt_int(r.decision),
        ]);
    }
    ctx.out.write_csv("policy.csv", &t)?;
    ctx.out.write_json("design.json", &export)?;
    let s = d.initial_state();
    ctx.out.write_json(
        "scalars.json",
        &DesignScalars {
            initial_rho: d.rho().values()[s],
            initial_g: d.g()[s],
            initial_stop: d.stop_mask()[s],
            unconverged_states: d.report().unconverged_states,
        },
    )
}

fn cmd_seq_design(ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let d = build_design(ctx)?;
    write_design(ctx, &d)?;
    let mut o = Outcome::ok();
    o.pass.insert(
        "state_lfds_converged".into(),
        d.report().unconverged_states == 0,
    );
    Ok(o)
}

fn cmd_seq_simulate(ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let sim = ctx.cfg.simulate.clone().expect("validated");
    let d = build_design(ctx)?;
    write_design(ctx, &d)?;
    let k = ctx.cfg.decision_count();
    let seed = ctx.seed();
    let mut summary = Table::new(&[
        "hypothesis",
        "runs",
        "error_rate",
        "censored",
        "mean_run_length",
        "run_length_q10",
        "run_length_q50",
        "run_length_q90",
        "immediate_stop",
    ]);
    let mut runs = Table::new(&["hypothesis", "run", "tau", "decision"]);
    let t0 = Instant::now();
    for h in 1..=k {
        let truth = match sim.truth.get(h - 1) {
            None | Some(TruthSpec::LeastFavorable(_)) => TruthModel::LeastFavorable(h),
            Some(TruthSpec::Density(spec)) => TruthModel::Density(build_density(spec, &ctx.grid)?),
        };
        let r = robust_detect::sequential::simulate(
            &d,
            h,
            &truth,
            sim.runs,
            seed.wrapping_add(h as u64),
            sim.horizon,
        )?;
        ctx.log(&format!(
            "hypothesis {h}: error rate {:.4}, mean run length {:.2}, {} censored",
            r.error_rate, r.mean_run_length, r.censored
        ));
        let q = r.run_length_quantiles;
        summary.push(vec![
            int(h),
            int(sim.runs),
            num(r.error_rate),
            int(r.censored),
            num(r.mean_run_length),
            num(q[0]),
            num(q[1]),
            num(q[2]),
            flag(r.immediate_stop),
        ]);
        if sim.per_run {
            for (i, run) in r.runs.iter().enumerate() {
                runs.push(vec![int(h), int(i), int(run.tau), opt_int(run.decision)]);
            }
        }
    }
    ctx.timings
        .insert("simulate".into(), t0.elapsed().as_secs_f64() * 1e3);
    ctx.out.write_csv("summary.csv", &summary)?;
    if sim.per_run {
        ctx.out.write_csv("runs.csv", &runs)?;
    }
    Ok(Outcome::ok())
}
