//! Argument parsing and the subcommands.
use std::fmt::Write as _;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;
use tropic_core::aep::homogeneous_approximation;
use tropic_core::config::Configuration;
use tropic_core::infoopt::{
    entropic_sample, full_arity, hull_vertices, intro_problem, io_solve, io_stabilized, rectangle_partition_optimum,
    shannon_violation, describe_blocks, IoOptions, IoProblem, LinearForm,
};
use tropic_core::metric::{aikd_interval, coupling_kd, entropy_gap, intrinsic_k_with, Coupling, HeuristicOptions, Mode};
use tropic_core::rational::{self, Rational};
use tropic_core::shape::DiagramShape;
use tropic_core::space::SpaceFan;
use tropic_core::types;

use crate::error::CliError;
use crate::format;
use crate::report::{fmt_f64, fmt_list, Report};
use crate::{audit, data};

#[derive(Debug, Parser)]
#[command(name = "tropic", version, about = "Entropy, Kolmogorov-Sinai distances and types of configurations of finite probability spaces")]
pub struct Cli {
    /// Seed for every randomized procedure.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Exact,
    Heuristic,
    Auto,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    Intro,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Entropies of every object of a space or configuration.
    Entropy { file: String },
    /// kd of a two-fan file, or of a coupling between two configurations.
    Kd {
        file: String,
        other: Option<String>,
        #[arg(long, requires = "other")]
        coupling: Option<String>,
    },
    /// Intrinsic Kolmogorov-Sinai distance with an optimal coupling.
    K {
        x: String,
        y: String,
        #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
        mode: ModeArg,
        /// Where to write the coupling as JSON.
        #[arg(long)]
        witness: Option<String>,
        #[arg(long, default_value_t = 32)]
        starts: usize,
    },
    /// Interval for the asymptotic distance from tensor powers up to N.
    Aikd {
        x: String,
        y: String,
        #[arg(long, default_value_t = 4)]
        n_max: usize,
    },
    /// Rate table of homogeneous approximations.
    Aep {
        file: String,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
        n: Vec<u64>,
    },
    /// Type class of the initial distribution, snapped to denominator N.
    Types {
        file: String,
        #[arg(long)]
        n: u64,
        /// Divergence radius for the Sanov tail.
        #[arg(long)]
        r: Option<f64>,
    },
    /// Information-optimization over extensions.
    Io {
        file: String,
        #[arg(long, value_enum, conflicts_with = "objective")]
        preset: Option<Preset>,
        /// Terms `subset:coef` separated by spaces or `;`, subsets as comma-joined indices.
        #[arg(long)]
        objective: Option<String>,
        /// A form followed by `=0`, `<=0` or `>=0`; repeatable.
        #[arg(long)]
        constraints: Vec<String>,
        #[arg(long)]
        maximize: bool,
        /// Alphabet size of each new variable (default: support of the initial space).
        #[arg(long, value_delimiter = ',')]
        new_sizes: Option<Vec<usize>>,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        /// Also bound the values on tensor powers up to this exponent.
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Sampled entropy vectors of extensions.
    Entset {
        file: String,
        #[arg(short = 'l')]
        l: usize,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Alphabet size of each new variable.
        #[arg(long, default_value_t = 2)]
        size: usize,
        #[arg(long)]
        hull: bool,
    },
    /// Past-future information and entropy rate of a stationary chain.
    Markov {
        #[arg(long)]
        spec: String,
        /// Window `m,n`.
        #[arg(long)]
        mi: Option<String>,
        #[arg(long)]
        rate: bool,
        #[arg(long, default_value_t = 4)]
        horizon: usize,
    },
    /// Randomized checks of the inequalities and bounds; reports max residuals.
    Audit {
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Entropy { .. } => "entropy",
            Command::Kd { .. } => "kd",
            Command::K { .. } => "k",
            Command::Aikd { .. } => "aikd",
            Command::Aep { .. } => "aep",
            Command::Types { .. } => "types",
            Command::Io { .. } => "io",
            Command::Entset { .. } => "entset",
            Command::Markov { .. } => "markov",
            Command::Audit { .. } => "audit",
        }
    }
}

fn document(path: &str) -> Result<Value, CliError> {
    format::parse_document(&data::read(path)?).map_err(|e| e.within(path))
}

pub fn load_configuration(path: &str) -> Result<Configuration, CliError> {
    format::configuration_from_json(&document(path)?).map_err(|e| e.within(path))
}

pub fn run(cli: &Cli) -> Result<Report, CliError> {
    let mut r = Report::new(cli.command.name(), cli.seed);
    let jobs = cli.jobs.max(1);
    match &cli.command {
        Command::Entropy { file } => entropy(&mut r, &load_configuration(file)?),
        Command::Kd { file, other, coupling } => kd(&mut r, file, other.as_deref(), coupling.as_deref())?,
        Command::K { x, y, mode, witness, starts } => {
            let (cx, cy) = (load_configuration(x)?, load_configuration(y)?);
            let mode = match mode {
                ModeArg::Exact => Mode::Exact,
                ModeArg::Heuristic => Mode::Heuristic,
                ModeArg::Auto => Mode::Auto,
            };
            let opts = HeuristicOptions { starts: *starts, seed: cli.seed, jobs, ..HeuristicOptions::default() };
            let (k, w) = intrinsic_k_with(&cx, &cy, mode, &opts)?;
            r.num("k", k);
            r.row("method", w.optimality.tag());
            r.num("gap", entropy_gap(&cx, &cy));
            match witness {
                Some(path) => {
                    let text = format::to_pretty(&format::witness_to_json(&cx, &cy, &w));
                    std::fs::write(path, text).map_err(|e| CliError::Io { path: path.clone(), reason: e.to_string() })?;
                    r.row("witness-file", path);
                }
                None => r.row("witness-file", "none"),
            }
            r.say(format!("k({x}, {y}) = {} [{}], {} coupling cells", fmt_f64(k), w.optimality.tag(), w.coupling.cells.len()));
        }
        Command::Aikd { x, y, n_max } => {
            let (cx, cy) = (load_configuration(x)?, load_configuration(y)?);
            let iv = aikd_interval(&cx, &cy, *n_max)?;
            r.num("lower", iv.lower);
            r.num("upper", iv.upper);
            r.row("closed_form", iv.closed_form.map_or("none".to_string(), fmt_f64));
            r.row("method", if iv.closed_form.is_some() { "closed-form" } else { "interval" });
            for n in &iv.notes {
                r.say(n);
            }
        }
        Command::Aep { file, n } => aep(&mut r, &load_configuration(file)?, n)?,
        Command::Types { file, n, r: radius } => type_report(&mut r, &load_configuration(file)?, *n, *radius)?,
        Command::Io { file, preset, objective, constraints, maximize, new_sizes, restarts, n_max } => {
            let base = load_configuration(file)?;
            let problem = match (preset, objective) {
                (Some(Preset::Intro), _) => intro_problem(),
                (None, Some(obj)) => {
                    let mut p = IoProblem::minimize(parse_form(obj)?);
                    p.maximize = *maximize;
                    for c in constraints {
                        let (form, equality) = parse_constraint(c)?;
                        if equality {
                            p.equalities.push(form);
                        } else {
                            p.inequalities.push(form);
                        }
                    }
                    p
                }
                (None, None) => return Err(CliError::Parse("io needs --preset or --objective".into())),
            };
            let opts = IoOptions { restarts: *restarts, seed: cli.seed, jobs, ..IoOptions::default() };
            io(&mut r, &base, &problem, new_sizes.clone(), &opts, *n_max, preset.is_some())?;
        }
        Command::Entset { file, l, samples, size, hull } => {
            entset(&mut r, &load_configuration(file)?, *l, *samples, *size, *hull, cli.seed)?
        }
        Command::Markov { spec, mi, rate, horizon } => {
            let chain = format::markov_from_json(&document(spec)?).map_err(|e| e.within(spec))?;
            markov(&mut r, &chain, mi.as_deref(), *rate, *horizon)?;
        }
        Command::Audit { samples } => audit::run(&mut r, *samples, cli.seed)?,
    }
    Ok(r)
}

fn entropy(r: &mut Report, x: &Configuration) {
    let names = x.shape().names();
    let ev = x.entropy_vector();
    if names.len() == 1 {
        r.num("H", ev.values[0]);
    } else {
        for (n, h) in names.iter().zip(&ev.values) {
            r.num(format!("H.{n}"), *h);
        }
    }
    for (n, h) in names.iter().zip(&ev.values) {
        r.say(format!("{n:>8}  {}", fmt_f64(*h)));
    }
}

fn kd(r: &mut Report, file: &str, other: Option<&str>, coupling: Option<&str>) -> Result<(), CliError> {
    let x = load_configuration(file)?;
    let value = match (other, coupling) {
        (Some(y_path), Some(c_path)) => {
            let y = load_configuration(y_path)?;
            let m = format::coupling_from_json(&document(c_path)?, &x, &y).map_err(|e| e.within(c_path))?;
            let (rows, cols) = (x.initial_space()?.len(), y.initial_space()?.len());
            r.row("method", "given-coupling");
            coupling_kd(&x, &y, &Coupling::from_dense(rows, cols, &m))?
        }
        (Some(_), None) => return Err(CliError::Parse("kd of two configurations needs --coupling".into())),
        _ => {
            let shape = x.shape();
            let sinks = shape.sinks();
            let o = x.initial()?;
            if shape.len() != 3 || sinks.len() != 2 {
                return Err(CliError::Format(format!("{file}: kd of one file needs a two-fan")));
            }
            let (a, b) = (sinks[0], sinks[1]);
            let (left, right) = (x.space(a), x.space(b));
            let (ma, mb) = (x.map(o, a).expect("complete"), x.map(o, b).expect("complete"));
            let mut joint = vec![Rational::from_integer(0.into()); left.len() * right.len()];
            for (z, w) in x.space(o).weights().iter().enumerate() {
                joint[ma[z] * right.len() + mb[z]] += w;
            }
            r.row("method", "fan");
            SpaceFan::from_joint(left, right, &joint)?.kd()
        }
    };
    r.num("kd", value);
    r.say(format!("kd = {}", fmt_f64(value)));
    Ok(())
}

fn aep(r: &mut Report, x: &Configuration, ns: &[u64]) -> Result<(), CliError> {
    let mut table = String::new();
    let _ = writeln!(table, "{:>6} {:>14} {:>14} {:>10} {:>14} {:>14} {:>14}", "n", "upper", "budget", "ratio", "slicing", "off_ball", "in_ball");
    for &n in ns {
        let c = homogeneous_approximation(x, n)?;
        let ratio = c.upper_bound / c.budget_bound;
        r.num(format!("upper_bound.{n}"), c.upper_bound);
        r.num(format!("budget_bound.{n}"), c.budget_bound);
        r.num(format!("ratio.{n}"), ratio);
        r.num(format!("ledger.{n}"), c.ledger.total());
        let _ = writeln!(
            table,
            "{n:>6} {:>14} {:>14} {:>10.4} {:>14} {:>14} {:>14}",
            fmt_f64(c.upper_bound),
            fmt_f64(c.budget_bound),
            ratio,
            fmt_f64(c.ledger.slicing),
            fmt_f64(c.ledger.off_ball),
            fmt_f64(c.ledger.in_ball)
        );
    }
    r.human.push_str(&table);
    Ok(())
}

fn type_report(r: &mut Report, x: &Configuration, n: u64, radius: Option<f64>) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Parse("--n must be positive".into()));
    }
    let p = x.initial_space()?.weights().to_vec();
    let counts = types::snap_to_lattice(&p, n);
    let pi = types::from_counts(&counts);
    let ts = types::type_space(&pi, n, 0)?;
    let (lo, hi) = ts.log_bounds();
    let mass = types::type_mass(&p, &pi, n)?;
    r.row("lattice_size", types::lattice_count(p.len(), n));
    r.row("type", counts.iter().map(u64::to_string).collect::<Vec<_>>().join(","));
    r.row("cardinality", &ts.cardinality);
    r.num("log_cardinality", ts.entropy());
    r.num("log_lower", lo);
    r.num("log_upper", hi);
    r.row("type_mass", rational::format(&mass));
    r.num("divergence", types::divergence(&pi, &p));
    if x.shape().len() > 1 {
        let names = x.shape().names();
        for (name, h) in names.iter().zip(types::type_entropies(x, &pi, n)?) {
            r.num(format!("H_type.{name}"), h);
        }
    }
    if let Some(rad) = radius {
        let s = types::sanov_report(&p, rad, n)?;
        r.row("sanov_tail", rational::format(&s.tail));
        r.num("sanov_tail_f64", rational::to_f64(&s.tail));
        r.num("sanov_bound", s.bound);
    }
    r.say(format!("type {:?} of size {} at n = {n}", counts, ts.cardinality));
    Ok(())
}

/// Parses `subset:coef` terms into a linear form over entropy masks.
pub fn parse_form(text: &str) -> Result<LinearForm, CliError> {
    let mut form = LinearForm::new();
    for term in text.split(|c: char| c == ';' || c.is_whitespace()).filter(|t| !t.is_empty()) {
        let (subset, coef) = term.split_once(':').ok_or_else(|| CliError::Parse(format!("term {term} is not subset:coef")))?;
        let mut mask = 0u32;
        for idx in subset.split(',') {
            let i: u32 = idx.trim().parse().map_err(|_| CliError::Parse(format!("bad variable index {idx:?} in {term}")))?;
            if i >= 31 {
                return Err(CliError::Parse(format!("variable index {i} too large")));
            }
            mask |= 1 << i;
        }
        let c: f64 = coef.trim().parse().map_err(|_| CliError::Parse(format!("bad coefficient {coef:?} in {term}")))?;
        form.push((mask, c));
    }
    if form.is_empty() {
        return Err(CliError::Parse(format!("empty form {text:?}")));
    }
    Ok(form)
}

/// Returns the form and whether it is an equality.
pub fn parse_constraint(text: &str) -> Result<(LinearForm, bool), CliError> {
    let t = text.trim();
    if let Some(f) = t.strip_suffix("<=0") {
        return Ok((parse_form(f)?, false));
    }
    if let Some(f) = t.strip_suffix(">=0") {
        return Ok((parse_form(f)?.into_iter().map(|(m, c)| (m, -c)).collect(), false));
    }
    Ok((parse_form(t.strip_suffix("=0").unwrap_or(t))?, true))
}

fn io(
    r: &mut Report,
    base: &Configuration,
    problem: &IoProblem,
    new_sizes: Option<Vec<usize>>,
    opts: &IoOptions,
    n_max: Option<usize>,
    preset: bool,
) -> Result<(), CliError> {
    let k = full_arity(base.shape()).ok_or_else(|| CliError::Format("io needs a full configuration".into()))?;
    let top = problem
        .objective
        .iter()
        .chain(problem.equalities.iter().flatten())
        .chain(problem.inequalities.iter().flatten())
        .map(|&(m, _)| 32 - m.leading_zeros() as usize)
        .max()
        .unwrap_or(0);
    if top <= k {
        return Err(CliError::Parse(format!("the problem mentions no variable beyond the {k} base variables")));
    }
    let sizes = new_sizes.unwrap_or_else(|| vec![base.trim().initial_space().map(|s| s.len()).unwrap_or(1); top - k]);
    if sizes.len() != top - k {
        return Err(CliError::Parse(format!("expected {} new sizes, got {}", top - k, sizes.len())));
    }
    let sol = io_solve(base, &sizes, problem, opts)?;
    r.num("value", sol.value);
    r.row("lp_bound", sol.lp_bound.map_or("none".to_string(), fmt_f64));
    r.row("method", sol.method);
    r.row("enumerated", sol.enumerated);
    r.row("new_sizes", sizes.iter().map(usize::to_string).collect::<Vec<_>>().join(","));
    r.row("point", fmt_list(&sol.point.values));
    r.say(format!("{} = {} by {}", if problem.maximize { "max" } else { "min" }, fmt_f64(sol.value), sol.method));
    if preset && base.shape() == &DiagramShape::two_fan() {
        let rect = rectangle_partition_optimum(base)?;
        r.num("rectangle_value", rect.value);
        r.row("rectangle_blocks", rect.blocks.len());
        r.say(format!("rectangles: {}", describe_blocks(&rect.blocks)));
    }
    if let Some(n_max) = n_max {
        let st = io_stabilized(base, &sizes, problem, n_max, opts)?;
        r.row("normalized", fmt_list(&st.normalized));
        r.num("stabilized", st.best);
    }
    Ok(())
}

fn entset(r: &mut Report, base: &Configuration, l: usize, samples: usize, size: usize, hull: bool, seed: u64) -> Result<(), CliError> {
    let k = full_arity(base.shape()).ok_or_else(|| CliError::Format("entset needs a full configuration".into()))?;
    if l <= k || l > 5 {
        return Err(CliError::Parse(format!("-l must be between {} and 5", k + 1)));
    }
    let points = entropic_sample(base, &vec![size; l - k], samples, seed)?;
    let worst = points.iter().map(shannon_violation).fold(f64::NEG_INFINITY, f64::max);
    r.row("l", l);
    r.row("points", points.len());
    r.num("max_shannon_violation", worst);
    if hull {
        let v = hull_vertices(&points)?;
        r.row("hull_size", v.len());
        r.row("hull", v.iter().map(usize::to_string).collect::<Vec<_>>().join(","));
    }
    for (i, p) in points.iter().enumerate() {
        r.row(format!("point.{i}"), fmt_list(&p.values));
    }
    r.say(format!("{} entropic points in dimension {}", points.len(), (1usize << l) - 1));
    Ok(())
}

fn markov(r: &mut Report, chain: &tropic_core::tropical::MarkovChain, mi: Option<&str>, rate: bool, horizon: usize) -> Result<(), CliError> {
    r.row("states", chain.len());
    r.row("stationary", chain.initial.iter().map(rational::format).collect::<Vec<_>>().join(","));
    if let Some(w) = mi {
        let (m, n) = w
            .split_once(',')
            .and_then(|(a, b)| Some((a.trim().parse::<usize>().ok()?, b.trim().parse::<usize>().ok()?)))
            .ok_or_else(|| CliError::Parse(format!("--mi expects m,n, got {w:?}")))?;
        r.num("mi", chain.past_future_mi(m, n)?);
    }
    if rate {
        r.num("rate", chain.entropy_rate(horizon)?);
        r.num("rate_formula", chain.entropy_rate_formula());
    }
    let v = chain.verdict(horizon)?;
    r.num("sup_mi", v.sup);
    r.num("ceiling", v.ceiling);
    r.row("certified", v.certified);
    let table = chain.mi_table(horizon)?;
    for (m, row) in table.iter().enumerate() {
        r.say(format!("m={:<3} {}", m + 1, row.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ")));
    }
    Ok(())
}
