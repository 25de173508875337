//! Command-line front end: parameter grids in, CSV or JSON tables out.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::asymptotics::{partial_report, sandwich_report, trace_bound_report, BoundReport};
use crate::error::{KpzError, Result};
use crate::fredholm::{
    discretization_for, laplace_transform_value, nystrom_matrix, spectrum, trace_exact,
};
use crate::kernel::KernelParams;
use crate::ldp::{nonuniqueness_demo, rate_report};
use crate::moments::{
    leading_term, leading_term_hat, moment_order, LaplaceProfile, MomentSettings, T_MAX_PIPELINE,
};
use crate::verify::{leading_ratio, partial_grid, sandwich_grid, Suite, CRITERIA};

/// A scalar, a comma-separated list, or an inclusive `start:stop:step` range.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let num = |v: &str| -> std::result::Result<f64, String> {
            let x: f64 = v
                .trim()
                .parse()
                .map_err(|_| format!("not a number: {v:?}"))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(format!("not finite: {v:?}"))
            }
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.len() {
            1 => s
                .split(',')
                .map(num)
                .collect::<std::result::Result<_, _>>()
                .map(Grid),
            3 => {
                let (a, b, h) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
                if !(h > 0.0) {
                    return Err(format!("step must be positive, got {h}"));
                }
                if b < a {
                    return Err(format!("range end {b} below start {a}"));
                }
                let k = ((b - a) / h + 1e-9).floor();
                if k > 1e6 {
                    return Err("range has more than 10^6 points".into());
                }
                Ok(Grid((0..=k as usize).map(|i| a + i as f64 * h).collect()))
            }
            _ => Err(format!("expected a scalar or start:stop:step, got {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Base Nystrom node count.
    #[arg(long, global = true, default_value_t = 300)]
    pub nodes: usize,
    /// Highest exterior power in decompositions.
    #[arg(long, global = true, default_value_t = 6)]
    pub lmax: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file (standard output when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Add a wall-clock timestamp to JSON metadata.
    #[arg(long, global = true)]
    pub timestamp: bool,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Laplace transform det(I - K) and the top eigenvalue.
    Laplace {
        #[arg(long, default_value = "1", allow_hyphen_values = true)]
        s: Grid,
        #[arg(long, default_value = "1", allow_hyphen_values = true)]
        t: Grid,
    },
    /// Nystrom trace of the order-n kernel against the exact integral.
    Trace {
        #[arg(long, default_value = "1", allow_hyphen_values = true)]
        s: Grid,
        #[arg(long, default_value = "1", allow_hyphen_values = true)]
        t: Grid,
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        order: Grid,
    },
    /// Fractional moments with leading terms.
    Moment {
        #[arg(long, default_value = "1", allow_hyphen_values = true)]
        p: Grid,
        #[arg(long, default_value = "1", allow_hyphen_values = true)]
        t: Grid,
    },
    /// Moment decomposition into leading, tail and exterior terms.
    Decompose {
        #[arg(long, default_value = "1", allow_hyphen_values = true)]
        p: Grid,
        #[arg(long, default_value = "1", allow_hyphen_values = true)]
        t: Grid,
    },
    /// Rate functions.
    Rate {
        #[arg(long, default_value = "1", allow_hyphen_values = true)]
        y: Grid,
    },
    /// Calibrated bound reports on the built-in grids.
    Bounds,
    /// Variational values of the rate and its corridor perturbations.
    Nonunique {
        #[arg(long, default_value = "0.05,0.2,0.5,1,3", allow_hyphen_values = true)]
        y: Grid,
        #[arg(long, default_value = "0,0.25,0.5,0.75", allow_hyphen_values = true)]
        blend: Grid,
    },
    /// Acceptance criteria.
    Verify {
        /// `all` or a comma-separated list of criterion numbers.
        #[arg(long, default_value = "all", allow_hyphen_values = true)]
        suite: String,
    },
    /// Large-t sweep of the closed-form leading term.
    Sweep {
        #[arg(long, default_value = "0.5,1,2,3", allow_hyphen_values = true)]
        p: Grid,
        #[arg(long, default_value = "10:200:10", allow_hyphen_values = true)]
        t: Grid,
    },
    /// Airy-kernel determinant against the Laplace transform at large t.
    Crossover {
        #[arg(long, default_value = "-1:2:1", allow_hyphen_values = true)]
        sigma: Grid,
        #[arg(long, default_value = "1000", allow_hyphen_values = true)]
        t: Grid,
    },
}

#[derive(Parser, Debug, Clone)]
#[command(name = "kpzlab", version, about = "KPZ upper-tail numerics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) if v.is_nan() => "NaN".into(),
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(v) => v.clone(),
            Cell::Bool(v) => v.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => json!(v),
            Cell::Int(v) => json!(v),
            Cell::Text(v) => json!(v),
            Cell::Bool(v) => json!(v),
        }
    }
}

/// Output rows plus the metadata that goes into the JSON header.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub constants: BTreeMap<String, f64>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            ..Default::default()
        }
    }

    pub fn to_csv(&self) -> io::Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::csv))?;
        }
        w.into_inner().map_err(|e| e.into_error())
    }

    pub fn to_json(&self, command: &str, common: &Common) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let mut m = Map::new();
                for (c, v) in self.columns.iter().zip(r) {
                    m.insert(c.to_string(), v.json());
                }
                Value::Object(m)
            })
            .collect();
        let mut meta = json!({
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "node_count": common.nodes,
            "l_max": common.lmax,
            "calibrated_constants": self.constants,
        });
        if common.timestamp {
            let secs = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            meta["timestamp"] = json!(secs);
        }
        json!({ "metadata": meta, "rows": rows })
    }
}

fn num(v: f64) -> Cell {
    Cell::Num(v)
}

fn at(e: KpzError, point: String) -> KpzError {
    e.context(point)
}

fn orders(g: &Grid) -> Result<Vec<usize>> {
    g.0.iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(KpzError::Parameter(format!(
                    "order must be a non-negative integer, got {v}"
                )))
            }
        })
        .collect()
}

fn pairs(a: &Grid, b: &Grid) -> Vec<(f64, f64)> {
    a.0.iter()
        .flat_map(|&x| b.0.iter().map(move |&y| (x, y)))
        .collect()
}

fn laplace(s: &Grid, t: &Grid, nodes: usize) -> Result<Table> {
    let mut table = Table::new(&["s", "t", "det", "largest_eigenvalue"]);
    table.rows = pairs(s, t)
        .par_iter()
        .map(|&(s, t)| {
            let params = KernelParams::new(s, t, 0)?;
            let disc = discretization_for(t, s.max(1.0), nodes)?;
            let det = laplace_transform_value(params, &disc)?;
            let top = spectrum(params, &disc)?
                .eigenvalues
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(vec![num(s), num(t), num(det), num(top)])
        })
        .collect::<Result<_>>()?;
    Ok(table)
}

fn trace(s: &Grid, t: &Grid, order: &Grid, nodes: usize) -> Result<Table> {
    let mut table = Table::new(&[
        "s",
        "t",
        "order",
        "matrix_trace",
        "exact_trace",
        "rel_error",
    ]);
    let ords = orders(order)?;
    let pts: Vec<(f64, f64, usize)> = pairs(s, t)
        .into_iter()
        .flat_map(|(s, t)| ords.iter().map(move |&n| (s, t, n)))
        .collect();
    table.rows = pts
        .par_iter()
        .map(|&(s, t, n)| {
            let params = KernelParams::new(s, t, n)?;
            let disc = discretization_for(t, s.max(1.0), nodes)?;
            let m = nystrom_matrix(params, &disc)?.trace();
            let e = trace_exact(params)?;
            Ok(vec![
                num(s),
                num(t),
                Cell::Int(n as i64),
                num(m),
                num(e),
                num((m - e).abs() / e.abs()),
            ])
        })
        .collect::<Result<_>>()?;
    Ok(table)
}

fn build_profile(
    t: f64,
    ps: &[f64],
    l_max: usize,
    settings: MomentSettings,
) -> Result<LaplaceProfile> {
    let mut n_max = 1;
    for &p in ps {
        n_max = n_max.max(moment_order(p)?.0);
    }
    let start = Instant::now();
    let prof =
        LaplaceProfile::build(t, n_max, l_max, settings).map_err(|e| at(e, format!("t={t}")))?;
    eprintln!("profile t={t}: {:.1} s", start.elapsed().as_secs_f64());
    Ok(prof)
}

fn moments_table(p: &Grid, t: &Grid, settings: MomentSettings) -> Result<Table> {
    let mut table = Table::new(&[
        "p",
        "t",
        "log_moment",
        "log_leading",
        "log_leading_hat",
        "log_remainder_sum",
    ]);
    for &t in &t.0 {
        let prof = if t <= T_MAX_PIPELINE {
            Some(build_profile(t, &p.0, 0, settings)?)
        } else {
            None
        };
        let rows =
            p.0.par_iter()
                .map(|&p| {
                    let point = format!("p={p}, t={t}");
                    let lead = leading_term(p, t)
                        .map_err(|e| at(e, point.clone()))?
                        .value();
                    let hat = leading_term_hat(p, t).map_err(|e| at(e, point.clone()))?;
                    let (lm, lr) = match &prof {
                        Some(prof) => {
                            let m = prof.moment(p).map_err(|e| at(e, point.clone()))?;
                            (m.ln(), (m - lead + hat).abs().ln())
                        }
                        None => (f64::NAN, f64::NAN),
                    };
                    Ok(vec![
                        num(p),
                        num(t),
                        num(lm),
                        num(lead.ln()),
                        num(hat.ln()),
                        num(lr),
                    ])
                })
                .collect::<Result<Vec<_>>>()?;
        table.rows.extend(rows);
    }
    Ok(table)
}

fn decompose_table(p: &Grid, t: &Grid, l_max: usize, settings: MomentSettings) -> Result<Table> {
    let mut table = Table::new(&[
        "p",
        "t",
        "n",
        "alpha",
        "leading",
        "leading_hat",
        "tail_term",
        "higher_sum",
        "total",
        "recombined",
    ]);
    if l_max < 2 {
        return Err(KpzError::Parameter(format!(
            "decompose needs lmax >= 2, got {l_max}"
        )));
    }
    for &t in &t.0 {
        let prof = build_profile(t, &p.0, l_max, settings)?;
        let rows =
            p.0.par_iter()
                .map(|&p| {
                    let d = prof
                        .decompose(p)
                        .map_err(|e| at(e, format!("p={p}, t={t}")))?;
                    Ok(vec![
                        num(p),
                        num(t),
                        Cell::Int(d.n as i64),
                        num(d.alpha),
                        num(d.leading),
                        num(d.leading_hat),
                        num(d.tail_term),
                        num(d.higher.iter().sum()),
                        num(d.total),
                        num(d.recombined()),
                    ])
                })
                .collect::<Result<Vec<_>>>()?;
        table.rows.extend(rows);
    }
    Ok(table)
}

fn rate(y: &Grid) -> Result<Table> {
    let mut table = Table::new(&["y", "phi", "chernoff", "crossover"]);
    for &y in &y.0 {
        let r = rate_report(y).map_err(|e| at(e, format!("y={y}")))?;
        table
            .rows
            .push(vec![num(y), num(r.phi), num(r.chernoff), num(r.crossover)]);
    }
    Ok(table)
}

/// `(sigma, t)` grid of the trace bounds.
pub fn trace_bound_grid() -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    for sigma in [0.0, 0.05, 0.25, 0.5, 1.0, 2.0] {
        for t in [1.0, 4.0, 10.0] {
            pts.push((sigma, t));
        }
    }
    pts
}

fn push_report(table: &mut Table, r: &BoundReport, keys: &[&str]) {
    let c = r.calibrated_constant;
    for ((g, l), rh) in r.grid.iter().zip(&r.lhs).zip(&r.rhs) {
        let point = keys
            .iter()
            .zip(g)
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        let pass = *l <= c * rh && (!r.two_sided || *rh <= c * l);
        table.rows.push(vec![
            Cell::Text(r.name.clone()),
            Cell::Text(point),
            num(*l),
            num(*rh),
            num(c),
            Cell::Bool(pass),
        ]);
    }
    table.constants.insert(r.name.clone(), c);
}

fn bounds() -> Result<Table> {
    let mut table = Table::new(&["name", "point", "lhs", "rhs", "constant", "pass"]);
    push_report(&mut table, &sandwich_report(&sandwich_grid())?, &["q", "t"]);
    push_report(
        &mut table,
        &partial_report(&partial_grid())?,
        &["q", "t", "y"],
    );
    for n in 0..=2 {
        push_report(
            &mut table,
            &trace_bound_report(n, &trace_bound_grid())?,
            &["sigma", "t"],
        );
    }
    Ok(table)
}

fn nonunique(y: &Grid, blend: &Grid) -> Result<Table> {
    let mut table = Table::new(&[
        "y",
        "blend",
        "value_phi_plus",
        "value_blend",
        "difference",
        "target",
    ]);
    for &b in &blend.0 {
        for r in nonuniqueness_demo(&y.0, b)? {
            table.rows.push(vec![
                num(r.y),
                num(r.blend),
                num(r.value_phi_plus),
                num(r.value_blend),
                num(r.difference),
                num(r.target),
            ]);
        }
    }
    Ok(table)
}

fn verify(suite: &str, settings: MomentSettings) -> Result<Table> {
    let ids: Vec<usize> = if suite == "all" {
        CRITERIA.iter().map(|c| c.0).collect()
    } else {
        suite
            .split(',')
            .map(|v| {
                v.trim()
                    .parse()
                    .ok()
                    .filter(|id| CRITERIA.iter().any(|c| c.0 == *id))
                    .ok_or_else(|| KpzError::Parameter(format!("unknown criterion {v:?}")))
            })
            .collect::<Result<_>>()?
    };
    let mut table = Table::new(&[
        "criterion",
        "title",
        "result",
        "passed",
        "required",
        "failing",
    ]);
    let runner = Suite::new(settings);
    for id in ids {
        let start = Instant::now();
        let r = runner
            .run(id)
            .map_err(|e| at(e, format!("criterion {id}")))?;
        eprintln!("{} ({:.1} s)", r.line(), start.elapsed().as_secs_f64());
        let required = r.checks.iter().filter(|c| !c.diagnostic).count();
        let failing = r.failing();
        let detail = failing
            .iter()
            .map(|c| format!("{}: {:.6e} vs {:.6e}", c.label, c.measured, c.target))
            .collect::<Vec<_>>()
            .join("; ");
        table.rows.push(vec![
            Cell::Int(id as i64),
            Cell::Text(r.title.clone()),
            Cell::Text(if r.pass() { "PASS" } else { "FAIL" }.into()),
            Cell::Int((required - failing.len()) as i64),
            Cell::Int(required as i64),
            Cell::Text(detail),
        ]);
        for (k, v) in &r.constants {
            table.constants.insert(k.clone(), *v);
        }
    }
    Ok(table)
}

fn sweep(p: &Grid, t: &Grid) -> Result<Table> {
    let mut table = Table::new(&["p", "t", "log_leading", "leading_ratio", "growth_gap"]);
    let pts = pairs(p, t);
    let total = pts.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    table.rows = pts
        .par_iter()
        .map(|&(p, t)| {
            let point = format!("p={p}, t={t}");
            let la = leading_term(p, t)
                .map_err(|e| at(e, point.clone()))?
                .log_abs;
            let ratio = leading_ratio(p, t).map_err(|e| at(e, point))?;
            let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
            if k.is_multiple_of(50) || k == total {
                eprintln!("sweep: {k}/{total}");
            }
            Ok(vec![
                num(p),
                num(t),
                num(la),
                num(ratio),
                num(la / t - p * p * p / 12.0),
            ])
        })
        .collect::<Result<_>>()?;
    Ok(table)
}

fn crossover(sigma: &Grid, t: &Grid, nodes: usize) -> Result<Table> {
    let mut table = Table::new(&["sigma", "t", "laplace", "airy_kernel_det", "difference"]);
    table.rows = pairs(sigma, t)
        .par_iter()
        .map(|&(sg, t)| {
            let c = crate::validation::tw_limit_compare(sg, t, nodes)
                .map_err(|e| at(e, format!("sigma={sg}, t={t}")))?;
            Ok(vec![
                num(sg),
                num(t),
                num(c.pipeline_value),
                num(c.oracle_value),
                num(c.pipeline_value - c.oracle_value),
            ])
        })
        .collect::<Result<_>>()?;
    Ok(table)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Laplace { .. } => "laplace",
        Command::Trace { .. } => "trace",
        Command::Moment { .. } => "moment",
        Command::Decompose { .. } => "decompose",
        Command::Rate { .. } => "rate",
        Command::Bounds => "bounds",
        Command::Nonunique { .. } => "nonunique",
        Command::Verify { .. } => "verify",
        Command::Sweep { .. } => "sweep",
        Command::Crossover { .. } => "crossover",
    }
}

/// Execute a parsed command and return its table.
pub fn execute(cli: &Cli) -> Result<Table> {
    let c = &cli.common;
    if c.nodes < 20 || c.nodes > 2000 {
        return Err(KpzError::Parameter(format!(
            "nodes {} outside 20..=2000",
            c.nodes
        )));
    }
    let settings = MomentSettings {
        nodes: c.nodes,
        ..MomentSettings::default()
    };
    match &cli.command {
        Command::Laplace { s, t } => laplace(s, t, c.nodes),
        Command::Trace { s, t, order } => trace(s, t, order, c.nodes),
        Command::Moment { p, t } => moments_table(p, t, settings),
        Command::Decompose { p, t } => decompose_table(p, t, c.lmax, settings),
        Command::Rate { y } => rate(y),
        Command::Bounds => bounds(),
        Command::Nonunique { y, blend } => nonunique(y, blend),
        Command::Verify { suite } => verify(suite, settings),
        Command::Sweep { p, t } => sweep(p, t),
        Command::Crossover { sigma, t } => crossover(sigma, t, c.nodes),
    }
}

fn is_usage(e: &KpzError) -> bool {
    match e {
        KpzError::Parameter(_) | KpzError::Domain { .. } => true,
        KpzError::Context { source, .. } => is_usage(source),
        _ => false,
    }
}

/// Parse arguments, run, write output. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Some(n) = cli.common.threads {
        if n == 0
            || rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .is_err()
        {
            eprintln!("error: could not start {n} worker threads");
            return 2;
        }
    }
    let table = match execute(&cli) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return if is_usage(&e) { 2 } else { 1 };
        }
    };
    let bytes = match cli.common.format {
        Format::Csv => table.to_csv(),
        Format::Json => {
            let v = table.to_json(command_name(&cli.command), &cli.common);
            serde_json::to_vec_pretty(&v)
                .map_err(io::Error::from)
                .map(|mut b| {
                    b.push(b'\n');
                    b
                })
        }
    };
    let written = bytes.and_then(|b| match &cli.common.out {
        Some(path) => File::create(path).and_then(|mut f| f.write_all(&b)),
        None => io::stdout().lock().write_all(&b),
    });
    match written {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        assert_eq!("2.5".parse::<Grid>().unwrap().0, vec![2.5]);
        assert_eq!("1,2".parse::<Grid>().unwrap().0, vec![1.0, 2.0]);
        let g: Grid = "0:1:0.25".parse().unwrap();
        assert_eq!(g.0.len(), 5);
        assert!((g.0[4] - 1.0).abs() < 1e-15);
        assert!("1:0:0.1".parse::<Grid>().is_err());
        assert!("0:1:0".parse::<Grid>().is_err());
        assert!("0:1".parse::<Grid>().is_err());
        assert!("nan".parse::<Grid>().is_err());
    }

    #[test]
    fn floats_carry_17_digits() {
        let s = Cell::Num(1.0 / 3.0).csv();
        assert_eq!(s, "3.3333333333333331e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
