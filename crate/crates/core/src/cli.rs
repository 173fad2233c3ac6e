//! The `ruinlab` command line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::asymptotics::{
    brownian_limit, decay_exponent, dhs_kernel_estimate, tail_constant_three, KernelQuery,
};
use crate::chop::{chip_proportional, chop};
use crate::error::{Error, Result};
use crate::exact::{exact_orders, exact_orders_3_rational, poisson_kernel, ExactChain};
use crate::interp::{interp_distribution, q_to_f64, DEFAULT_REF_FOUR, DEFAULT_REF_THREE};
use crate::jacobi::{jacobi_solve_3, jacobi_solve_4, JacobiOptions, SweepMode};
use crate::model::{
    canonicalize, icm_distribution, identity_residuals, CapitalVector, EliminationOrder, Engine,
    OrderDistribution, PayoutSchedule,
};
use crate::montecarlo::{estimate_orders, estimate_variant, SimMode, SimulationEstimate, Variant};
use crate::regression::{RegressionModel, RegressionModels, FITTED_ORDERS, SEXTIC};
use crate::table::{
    generate_table_with, load_table, load_table_file, table_dir, table_path, ReferenceTable,
    TableMethod,
};

#[derive(Parser, Debug)]
#[command(
    name = "ruinlab",
    version,
    about = "Elimination-order probabilities for 3- and 4-player gambler's ruin",
    after_help = "Stacks are comma-separated integers. Scale fractional stacks to integers first, e.g. multiply 1.2,3.4,5 by 5."
)]
pub struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,

    /// Worker threads for parallel engines (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Reference table directory (else $RUINLAB_TABLES, else ./tables).
    #[arg(long, global = true)]
    pub tables: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Exact absorbing-chain solve.
    Exact {
        #[arg(long)]
        stacks: CapitalVector,
    },
    /// Two-sided Jacobi bounds over the whole grid.
    Jacobi {
        #[arg(long)]
        stacks: CapitalVector,
        #[command(flatten)]
        iter: IterArgs,
    },
    /// Plackett-Luce (ICM) baseline.
    Icm {
        #[arg(long)]
        stacks: CapitalVector,
    },
    /// Barycentric interpolation from a reference table.
    Interp {
        #[arg(long)]
        stacks: CapitalVector,
        #[command(flatten)]
        table: TableArgs,
    },
    /// Monte Carlo estimate.
    Mc {
        #[arg(long)]
        stacks: CapitalVector,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// ICM ratio regression.
    Regress {
        #[command(subcommand)]
        action: RegressCommand,
    },
    /// Kernel estimates, tail constants, decay exponents, continuum limits.
    Asym {
        #[command(subcommand)]
        action: AsymCommand,
    },
    /// Expected-payout settlement of a prize pool.
    Chop {
        #[arg(long)]
        stacks: CapitalVector,
        /// Payouts from first place down, in dollars.
        #[arg(long)]
        payouts: PayoutSchedule,
        #[arg(long, default_value = "icm")]
        engine: Engine,
        /// Also print the chip-proportional split for comparison.
        #[arg(long)]
        chip_proportional: bool,
        #[command(flatten)]
        table: TableArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        iter: IterArgs,
        /// Directory of fitted models for the regression engine.
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Reference tables.
    Table {
        #[command(subcommand)]
        action: TableCommand,
    },
}

#[derive(Args, Debug, Clone)]
pub struct IterArgs {
    /// Stop once the certified gap is below this.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Sweep limit (default 2N²).
    #[arg(long)]
    pub max_iter: Option<u64>,
    /// In-place sweeps; faster, but the gap is no longer a certificate.
    #[arg(long)]
    pub gauss_seidel: bool,
}

impl IterArgs {
    fn options(&self, k: usize) -> JacobiOptions {
        let base = if k == 3 {
            JacobiOptions::three()
        } else {
            JacobiOptions::four()
        };
        JacobiOptions {
            max_iter: self.max_iter.or(base.max_iter),
            tol: self.tol.unwrap_or(base.tol),
            mode: if self.gauss_seidel {
                SweepMode::GaussSeidel
            } else {
                SweepMode::Jacobi
            },
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct TableArgs {
    /// Explicit table file; overrides --tables.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Table total (default 300 for k=3, 100 for k=4).
    #[arg(long)]
    pub n_ref: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct SimArgs {
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "consolidated")]
    pub mode: SimMode,
    /// Betting variant instead of unit bets.
    #[arg(long)]
    pub variant: Option<Variant>,
}

#[derive(Subcommand, Debug)]
pub enum RegressCommand {
    /// Fit the ratio polynomials on a 3-player table.
    Fit {
        #[command(flatten)]
        table: TableArgs,
        #[arg(long, default_value_t = SEXTIC)]
        degree: u32,
        /// Write one model file per fitted order here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict all six orders.
    Predict {
        #[arg(long)]
        stacks: CapitalVector,
        /// Directory written by `regress fit --out`; otherwise fit from the table.
        #[arg(long)]
        models: Option<PathBuf>,
        #[command(flatten)]
        table: TableArgs,
        #[arg(long, default_value_t = SEXTIC)]
        degree: u32,
    },
}

#[derive(Subcommand, Debug)]
pub enum AsymCommand {
    /// N³·P_{1,1,N-2}(321) against the tail constant.
    Tail {
        #[arg(long, value_delimiter = ',', default_value = "10,20,50,100")]
        n: Vec<u64>,
        #[command(flatten)]
        iter: IterArgs,
    },
    /// Fitted decay exponent of the corner start where all but the last player hold one chip.
    Decay {
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_value = "10,20,40")]
        n: Vec<u64>,
        #[command(flatten)]
        iter: IterArgs,
    },
    /// Kernel estimate along the face where player 2 is broke.
    Kernel {
        #[arg(long)]
        x1: u64,
        #[arg(long)]
        x2: u64,
        #[arg(long)]
        n: u64,
    },
    /// Extrapolated continuum limit of a sum of order probabilities.
    Limit {
        #[arg(long)]
        stacks: CapitalVector,
        #[arg(long, value_delimiter = ',', default_value = "312,321")]
        orders: Vec<EliminationOrder>,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
        levels: Vec<u64>,
        #[command(flatten)]
        iter: IterArgs,
    },
}

#[derive(Subcommand, Debug)]
pub enum TableCommand {
    /// Solve and write `k{k}-N{n}`.
    Gen {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value = "jacobi")]
        method: TableMethod,
        /// Output file (default: the table directory).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        iter: IterArgs,
    },
}

enum Cell {
    Text(String),
    Num(f64),
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Default)]
struct Report {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
    notes: Vec<(String, String)>,
}

impl Report {
    fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            ..Self::default()
        }
    }

    fn row(&mut self, cells: Vec<Cell>) {
        self.rows.push(cells);
    }

    fn note(&mut self, key: impl Into<String>, value: impl ToString) {
        self.notes.push((key.into(), value.to_string()));
    }

    fn render(&self, format: Format) -> String {
        let mut out = String::new();
        for (k, v) in &self.notes {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|c| match (c, format) {
                        (Cell::Text(s), _) => s.clone(),
                        (Cell::Num(v), Format::Csv) => format!("{v:.16e}"),
                        (Cell::Num(v), Format::Text) => format!("{v}"),
                    })
                    .collect()
            })
            .collect();
        match format {
            Format::Csv => {
                let _ = writeln!(out, "{}", self.columns.join(","));
                for r in &cells {
                    let _ = writeln!(out, "{}", r.join(","));
                }
            }
            Format::Text => {
                let mut width: Vec<usize> = self.columns.iter().map(|c| c.len()).collect();
                for r in &cells {
                    for (w, c) in width.iter_mut().zip(r) {
                        *w = (*w).max(c.len());
                    }
                }
                let line = |r: &[String]| {
                    r.iter()
                        .zip(&width)
                        .map(|(c, w)| format!("{c:<w$}"))
                        .collect::<Vec<_>>()
                        .join("  ")
                        .trim_end()
                        .to_string()
                };
                let head: Vec<String> = self.columns.iter().map(|c| c.to_string()).collect();
                let _ = writeln!(out, "{}", line(&head));
                for r in &cells {
                    let _ = writeln!(out, "{}", line(r));
                }
            }
        }
        out
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// status: 0 on success, 2 on a usage error, 1 on a runtime error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    if let Some(n) = cli.threads {
        // A pool built earlier in this process stays in place.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match execute(&cli) {
        Ok(report) => {
            let _ = out.write_all(report.render(cli.format).as_bytes());
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn execute(cli: &Cli) -> Result<Report> {
    let dir = table_dir(cli.tables.as_deref());
    match &cli.command {
        Command::Exact { stacks } => cmd_exact(stacks),
        Command::Jacobi { stacks, iter } => cmd_jacobi(stacks, iter),
        Command::Icm { stacks } => {
            let d = icm_distribution(stacks)?;
            let mut r = dist_report(&d, stacks);
            r.note("engine", "icm");
            Ok(r)
        }
        Command::Interp { stacks, table } => cmd_interp(stacks, table, &dir),
        Command::Mc { stacks, sim } => {
            let est = simulate(stacks, sim)?;
            Ok(mc_report(&est))
        }
        Command::Regress { action } => match action {
            RegressCommand::Fit { table, degree, out } => cmd_fit(table, *degree, out.as_deref(), &dir),
            RegressCommand::Predict {
                stacks,
                models,
                table,
                degree,
            } => {
                let m = load_models(models.as_deref(), table, *degree, &dir)?;
                let d = m.predict_distribution(stacks)?;
                let mut r = dist_report(&d, stacks);
                r.note("engine", "regression");
                r.note("training N", m.iter().next().map_or(0, |m| m.training_n));
                Ok(r)
            }
        },
        Command::Asym { action } => cmd_asym(action),
        Command::Chop {
            stacks,
            payouts,
            engine,
            chip_proportional: naive,
            table,
            sim,
            iter,
            models,
        } => {
            let probs = match engine {
                Engine::Exact => exact_orders(stacks)?,
                Engine::Icm => icm_distribution(stacks)?,
                Engine::Jacobi => jacobi_distribution(stacks, iter)?.0,
                Engine::Interp => {
                    let t = resolve_table(table, stacks.players(), &dir)?;
                    interp_distribution(&t, stacks)?.0
                }
                Engine::MonteCarlo => mc_distribution(&simulate(stacks, sim)?)?,
                Engine::Regression => load_models(models.as_deref(), table, SEXTIC, &dir)?
                    .predict_distribution(stacks)?,
            };
            let res = chop(stacks, payouts, &probs)?;
            let naive = if *naive {
                Some(chip_proportional(stacks, payouts)?)
            } else {
                None
            };
            let mut cols = vec!["player", "stack", "payout", "expected"];
            if naive.is_some() {
                cols.push("chip_proportional");
            }
            let mut r = Report::new(&cols);
            for p in 0..stacks.players() {
                let mut row: Vec<Cell> = vec![
                    format!("{}", p + 1).into(),
                    stacks.stack(p).into(),
                    dollars(res.payouts_cents[p]).into(),
                    (res.expected_cents[p] / 100.0).into(),
                ];
                if let Some(n) = &naive {
                    row.push(dollars(n[p]).into());
                }
                r.row(row);
            }
            r.note("engine", res.engine);
            r.note("pool", dollars(res.pool_cents()));
            Ok(r)
        }
        Command::Table { action } => match action {
            TableCommand::Gen {
                k,
                n,
                method,
                out,
                iter,
            } => {
                let t = generate_table_with(*k, *n, *method, Some(iter.options(*k)))?;
                let path = match out {
                    Some(p) => p.clone(),
                    None => {
                        std::fs::create_dir_all(&dir)?;
                        table_path(&dir, *k, *n)
                    }
                };
                t.write(&path)?;
                let mut r = Report::new(&["path", "k", "N", "entries"]);
                r.row(vec![
                    path.display().to_string().into(),
                    (*k as u64).into(),
                    (*n).into(),
                    (t.len() as u64).into(),
                ]);
                r.note("method", t.method());
                if let Some(note) = t.note() {
                    r.note("solver", note);
                }
                Ok(r)
            }
        },
    }
}

fn dollars(cents: u64) -> String {
    format!("{}.{:02}", cents / 100, cents % 100)
}

fn dist_report(d: &OrderDistribution, capitals: &CapitalVector) -> Report {
    let mut r = Report::new(&["order", "probability"]);
    for (o, p) in d.iter() {
        r.row(vec![o.to_string().into(), (*p).into()]);
    }
    r.note("stacks", capitals);
    if capitals.players() == 3 {
        let res = identity_residuals(d, capitals);
        let worst = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        r.note("max identity residual", format!("{worst:.3e}"));
    }
    r
}

fn cmd_exact(stacks: &CapitalVector) -> Result<Report> {
    let d = exact_orders(stacks)?;
    let engine = ExactChain::shared();
    let rational = stacks.players() == 3 && stacks.total() <= engine.config().rational_cap;
    let mut r = if rational {
        let q = exact_orders_3_rational(stacks)?;
        let mut r = Report::new(&["order", "probability", "rational"]);
        for (o, p) in d.iter() {
            r.row(vec![o.to_string().into(), (*p).into(), q[o].to_string().into()]);
        }
        r
    } else {
        dist_report(&d, stacks)
    };
    let space = engine.solver(stacks.players(), stacks.total())?;
    r.note("engine", "exact");
    r.note("interior states", space.space().interior().len());
    r.note("boundary states", space.space().boundary().len());
    if rational {
        r.note("stacks", stacks);
    }
    Ok(r)
}

/// Midpoint distribution with per-order bounds and the solve diagnostics.
fn jacobi_distribution(
    stacks: &CapitalVector,
    iter: &IterArgs,
) -> Result<(OrderDistribution, Vec<(f64, f64)>, u64, f64, SweepMode)> {
    let k = stacks.players();
    let opts = iter.options(k);
    let n = stacks.total();
    let grid = match k {
        3 => jacobi_solve_3(n, &EliminationOrder::identity(3), &opts)?,
        4 => jacobi_solve_4(n, &opts)?,
        _ => return Err(Error::DimensionMismatch { expected: 3, got: k }),
    };
    let orders = EliminationOrder::all(k);
    let mut bounds = Vec::with_capacity(orders.len());
    for o in &orders {
        let (canon, _) = canonicalize(stacks, o)?;
        bounds.push(grid.bounds(canon.stacks())?);
    }
    let d = OrderDistribution::from_parts(
        k,
        orders
            .iter()
            .zip(&bounds)
            .map(|(o, (l, u))| (*o, 0.5 * (l + u))),
        Engine::Jacobi,
    )?;
    Ok((d, bounds, grid.iterations(), grid.gap(), grid.mode()))
}

fn cmd_jacobi(stacks: &CapitalVector, iter: &IterArgs) -> Result<Report> {
    let (d, bounds, sweeps, gap, mode) = jacobi_distribution(stacks, iter)?;
    let mut r = Report::new(&["order", "probability", "lower", "upper"]);
    for ((o, p), (l, u)) in d.iter().zip(&bounds) {
        r.row(vec![o.to_string().into(), (*p).into(), (*l).into(), (*u).into()]);
    }
    r.note("engine", "jacobi");
    r.note("stacks", stacks);
    r.note("sweeps", sweeps);
    let certified = if mode == SweepMode::Jacobi {
        "certified gap"
    } else {
        "gap (not certified)"
    };
    r.note(certified, format!("{gap:.3e}"));
    Ok(r)
}

fn resolve_table(args: &TableArgs, k: usize, dir: &Path) -> Result<ReferenceTable> {
    let n = args.n_ref.unwrap_or(if k == 3 {
        DEFAULT_REF_THREE
    } else {
        DEFAULT_REF_FOUR
    });
    match &args.table {
        Some(p) => {
            // Take N from the file header when no --n-ref was given.
            if args.n_ref.is_none() {
                if !p.exists() {
                    return Err(Error::MissingTable {
                        path: p.clone(),
                        k,
                        n,
                    });
                }
                let t = ReferenceTable::read(p)?;
                if t.players() != k {
                    return Err(Error::DimensionMismatch {
                        expected: k,
                        got: t.players(),
                    });
                }
                return Ok(t);
            }
            load_table_file(p, k, n)
        }
        None => load_table(dir, k, n),
    }
}

fn cmd_interp(stacks: &CapitalVector, args: &TableArgs, dir: &Path) -> Result<Report> {
    let t = resolve_table(args, stacks.players(), dir)?;
    let (d, w) = interp_distribution(&t, stacks)?;
    let mut r = dist_report(&d, stacks);
    r.note("engine", "interp");
    r.note("reference N", t.total());
    for (v, l) in w.vertices().iter().zip(w.lambdas()) {
        let v: Vec<String> = v.iter().map(u64::to_string).collect();
        r.note(
            format!("vertex ({})", v.join(",")),
            format!("lambda {l} = {}", q_to_f64(l)),
        );
    }
    Ok(r)
}

fn simulate(stacks: &CapitalVector, sim: &SimArgs) -> Result<SimulationEstimate> {
    match sim.variant {
        Some(v) => estimate_variant(stacks, v, sim.samples, sim.seed),
        None => estimate_orders(stacks, sim.samples, sim.seed, sim.mode),
    }
}

fn mc_distribution(est: &SimulationEstimate) -> Result<OrderDistribution> {
    OrderDistribution::new(
        est.players,
        est.estimates.iter().map(|(o, p)| (*o, *p)),
        Engine::MonteCarlo,
    )
}

fn mc_report(est: &SimulationEstimate) -> Report {
    let mut r = Report::new(&["order", "estimate", "std_error"]);
    for (o, p) in &est.estimates {
        let se = est.std_errors.get(o).copied().unwrap_or(0.0);
        r.row(vec![o.to_string().into(), (*p).into(), se.into()]);
    }
    r.note("engine", "mc");
    r.note("mode", &est.mode);
    r.note("samples", est.samples);
    r.note("seed", est.seed);
    if let Some((t, se)) = est.first_elimination_time {
        r.note("mean rounds to first elimination", format!("{t} ± {se}"));
    }
    r
}

fn model_path(dir: &Path, order: &str) -> PathBuf {
    dir.join(format!("model-{order}"))
}

fn load_models(
    models: Option<&Path>,
    table: &TableArgs,
    degree: u32,
    dir: &Path,
) -> Result<RegressionModels> {
    match models {
        Some(m) => {
            let loaded = FITTED_ORDERS
                .iter()
                .map(|o| {
                    let p = model_path(m, o);
                    if !p.exists() {
                        return Err(Error::ModelMissing(format!(
                            "{o} (no {}; run `ruinlab regress fit --out {}`)",
                            p.display(),
                            m.display()
                        )));
                    }
                    RegressionModel::read(&p)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(RegressionModels::new(loaded))
        }
        None => RegressionModels::fit(&resolve_table(table, 3, dir)?, degree),
    }
}

fn cmd_fit(table: &TableArgs, degree: u32, out: Option<&Path>, dir: &Path) -> Result<Report> {
    let t = resolve_table(table, 3, dir)?;
    let models = RegressionModels::fit(&t, degree)?;
    let mut r = Report::new(&["order", "i", "j", "beta"]);
    for m in models.iter() {
        for (&(i, j), b) in crate::regression::monomials(m.degree).iter().zip(&m.coefficients) {
            r.row(vec![
                m.order.to_string().into(),
                u64::from(i).into(),
                u64::from(j).into(),
                (*b).into(),
            ]);
        }
        r.note(
            format!("{} residuals", m.order),
            format!(
                "rms {:.3e}, max {:.3e}, det(XtX) {:.3e}",
                m.rms_residual, m.max_residual, m.normal_det
            ),
        );
        if let Some(dir) = out {
            std::fs::create_dir_all(dir)?;
            m.write(&model_path(dir, &m.order.to_string()))?;
        }
    }
    r.note("training N", t.total());
    r.note("degree", degree);
    if let Some(dir) = out {
        r.note("written to", dir.display());
    }
    Ok(r)
}

/// `P(sigma)` at a single start, exact under the cap, Jacobi above it.
fn corner_probability(stacks: &CapitalVector, sigma: &EliminationOrder, iter: &IterArgs) -> Result<(f64, &'static str)> {
    let engine = ExactChain::shared();
    let k = stacks.players();
    let cap = if k == 3 {
        engine.config().cap_three
    } else {
        engine.config().cap_four
    };
    if stacks.total() <= cap {
        return Ok((exact_orders(stacks)?.get(sigma), "exact"));
    }
    let (canon, id) = canonicalize(stacks, sigma)?;
    let opts = iter.options(k);
    let grid = if k == 3 {
        jacobi_solve_3(canon.total(), &id, &opts)?
    } else {
        jacobi_solve_4(canon.total(), &opts)?
    };
    Ok((grid.value_at(&canon)?, "jacobi"))
}

fn corner(k: usize, n: u64) -> Result<(CapitalVector, EliminationOrder)> {
    if !(3..=4).contains(&k) {
        return Err(Error::DimensionMismatch { expected: 3, got: k });
    }
    if n <= k as u64 {
        return Err(Error::TotalTooSmall { k, n });
    }
    let mut stacks = vec![1; k];
    stacks[k - 1] = n - (k as u64 - 1);
    let rev: Vec<usize> = (0..k).rev().collect();
    Ok((CapitalVector::new(stacks)?, EliminationOrder::new(&rev)?))
}

fn cmd_asym(action: &AsymCommand) -> Result<Report> {
    match action {
        AsymCommand::Tail { n, iter } => {
            let c = tail_constant_three();
            let mut r = Report::new(&["N", "probability", "scaled", "engine"]);
            for &n in n {
                let (cv, sigma) = corner(3, n)?;
                let (p, eng) = corner_probability(&cv, &sigma, iter)?;
                let nf = n as f64;
                r.row(vec![n.into(), p.into(), (nf * nf * nf * p).into(), eng.into()]);
            }
            r.note("tail constant", c);
            Ok(r)
        }
        AsymCommand::Decay { k, n, iter } => {
            let mut pts = Vec::with_capacity(n.len());
            let mut rows = Vec::with_capacity(n.len());
            for &n in n {
                let (cv, sigma) = corner(*k, n)?;
                let (p, eng) = corner_probability(&cv, &sigma, iter)?;
                pts.push((n, p));
                rows.push((n, p, eng));
            }
            let fit = decay_exponent(&pts)?;
            let mut r = Report::new(&["N", "probability", "scaled", "engine"]);
            for (n, p, eng) in rows {
                r.row(vec![
                    n.into(),
                    p.into(),
                    ((n as f64).powf(fit.kappa) * p).into(),
                    eng.into(),
                ]);
            }
            r.note("kappa", fit.kappa);
            r.note("amplitude", fit.amplitude);
            Ok(r)
        }
        AsymCommand::Kernel { x1, x2, n } => {
            let cv = CapitalVector::new(vec![*x1, *x2, n.saturating_sub(x1 + x2)])?;
            let engine = ExactChain::shared();
            let exact = if *n <= engine.config().cap_three {
                Some(poisson_kernel(&cv)?)
            } else {
                None
            };
            let mut r = Report::new(&["y", "estimate", "exact", "ratio"]);
            let mut band = (f64::INFINITY, 0.0f64);
            for y in 1..*n {
                let est = dhs_kernel_estimate(&KernelQuery::new(*x1, *x2, y, *n)?);
                let ex = exact.as_ref().and_then(|k| {
                    k.iter()
                        .find(|(s, _)| s[0] == y && s[1] == 0)
                        .map(|(_, p)| *p)
                });
                let (exc, ratio): (Cell, Cell) = match ex {
                    Some(p) if p > 0.0 => {
                        band = (band.0.min(est / p), band.1.max(est / p));
                        (p.into(), (est / p).into())
                    }
                    Some(p) => (p.into(), "".into()),
                    None => ("".into(), "".into()),
                };
                r.row(vec![y.into(), est.into(), exc, ratio]);
            }
            if band.1 > 0.0 {
                r.note("ratio band", format!("[{:.4e}, {:.4e}]", band.0, band.1));
            }
            Ok(r)
        }
        AsymCommand::Limit {
            stacks,
            orders,
            levels,
            iter,
        } => {
            let est = brownian_limit(stacks, orders, levels, &iter.options(3))?;
            let mut r = Report::new(&["n", "N", "value", "scaled"]);
            for l in &est.levels {
                let scaled = (l.value - est.limit) * (l.total as f64).powi(4);
                r.row(vec![l.multiplier.into(), l.total.into(), l.value.into(), scaled.into()]);
            }
            let names: Vec<String> = orders.iter().map(|o| o.to_string()).collect();
            r.note("orders", names.join("+"));
            r.note("limit", est.limit);
            Ok(r)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("ruinlab").chain(args.iter().copied());
        let code = run_with(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn exact_prints_rationals() {
        let (code, out, _) = call(&["exact", "--stacks", "1,2,3"]);
        assert_eq!(code, 0);
        let row = out.lines().find(|l| l.starts_with("321")).unwrap();
        assert!(row.contains("569/9456"), "{out}");
    }

    #[test]
    fn icm_equal_stacks() {
        let (code, out, _) = call(&["icm", "--stacks", "1,1,1", "--format", "csv"]);
        assert_eq!(code, 0);
        let rows: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
        assert_eq!(rows.len(), 6);
        for r in rows {
            let v: f64 = r.split(',').nth(1).unwrap().parse().unwrap();
            assert!((v - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn usage_and_runtime_codes() {
        assert_eq!(call(&["bogus"]).0, 2);
        assert_eq!(call(&["exact", "--stacks", "1,x,3"]).0, 2);
        let (code, _, err) = call(&["exact", "--stacks", "100,100,100"]);
        assert_eq!(code, 1);
        assert!(err.contains("cap"), "{err}");
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().to_str().unwrap();
        let (code, _, err) = call(&["interp", "--stacks", "1,2,3", "--tables", d]);
        assert_eq!(code, 1);
        assert!(err.contains("table gen"), "{err}");
        assert_eq!(call(&["--help"]).0, 0);
    }

    #[test]
    fn mc_is_reproducible() {
        let args = ["mc", "--stacks", "2,3,5", "--samples", "2000", "--seed", "9"];
        let a = call(&args);
        assert_eq!(a.0, 0);
        assert_eq!(a, call(&args));
    }

    #[test]
    fn csv_numbers_round_trip() {
        let (_, out, _) = call(&["jacobi", "--stacks", "2,3,5", "--format", "csv"]);
        for line in out.lines().filter(|l| !l.starts_with('#')).skip(1) {
            for f in line.split(',').skip(1) {
                let v: f64 = f.parse().unwrap();
                assert_eq!(format!("{v:.16e}"), f);
            }
        }
    }

    #[test]
    fn table_gen_then_interp() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().to_str().unwrap();
        let (code, _, err) = call(&["table", "gen", "--k", "3", "--n", "30", "--method", "exact", "--tables", d]);
        assert_eq!(code, 0, "{err}");
        let (code, out, err) = call(&["interp", "--stacks", "2,3,5", "--n-ref", "30", "--tables", d]);
        assert_eq!(code, 0, "{err}");
        assert!(out.contains("lambda 1 ="), "{out}");
        let (code, out, _) = call(&["regress", "fit", "--tables", d, "--n-ref", "30", "--degree", "2"]);
        assert_eq!(code, 0);
        assert!(out.contains("training N: 30"));
    }

    #[test]
    fn chop_with_diagnostic() {
        let (code, out, _) = call(&[
            "chop",
            "--stacks",
            "169,301,817",
            "--payouts",
            "10000000,6000000,4000000",
            "--chip-proportional",
        ]);
        assert_eq!(code, 0);
        let leader = out.lines().find(|l| l.starts_with('3')).unwrap();
        assert!(leader.contains("12696"), "{out}");
    }

    #[test]
    fn asym_subcommands() {
        let (code, out, _) = call(&["asym", "decay", "--n", "10,20,40"]);
        assert_eq!(code, 0);
        assert!(out.contains("kappa"));
        let (code, out, _) = call(&["asym", "kernel", "--x1", "3", "--x2", "5", "--n", "20"]);
        assert_eq!(code, 0);
        assert!(out.contains("ratio band"));
    }
}
