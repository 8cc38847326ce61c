use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context as _};
use clap::{Parser, ValueEnum};

use combdiff::blaserize::blaserize;
use combdiff::combinator::decompose;
use combdiff::frontend::load;
use combdiff::ir::{eval_all, Context, Expr, ExprKind};
use combdiff::numeric::{check_gradient, check_pullback, objective_shape, strip_markers, CheckConfig, CheckReport};
use combdiff::pullback::{pp, vdiff};
use combdiff::render::{to_latex, to_sexpr, to_text};
use combdiff::simplify::{check_contractions, redux_report, RuleSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Settings {
    Plain,
    Symmetry,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    Text,
    Latex,
    Sexpr,
    /// The input after abstraction elimination.
    Combinators,
    /// The derivative before simplification.
    Pullback,
}

/// Symbolic derivatives of functionals written as lambda terms.
#[derive(Debug, Parser)]
#[command(name = "combdiff", version)]
pub struct RunConfig {
    /// Input program (.pct).
    pub input: PathBuf,
    /// Eliminate abstractions into B/C combinators.
    #[arg(long)]
    pub decompose: bool,
    /// Pullback (x, k) -> P(f)(x, k) of the marked lambda.
    #[arg(long, conflicts_with = "vdiff")]
    pub pullback: bool,
    /// Gradient of a real scalar objective.
    #[arg(long)]
    pub vdiff: bool,
    /// Simplify with or without the declared tensor symmetries.
    #[arg(long, value_enum)]
    pub settings: Option<Settings>,
    /// Inline let bindings before simplifying.
    #[arg(long)]
    pub eval_all: bool,
    /// Rewrite index contractions as matrix algebra.
    #[arg(long)]
    pub blaserize: bool,
    #[arg(long, value_enum, default_value = "text")]
    pub emit: Emit,
    /// Compare the result against finite differences.
    #[arg(long)]
    pub check: bool,
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Domain extent for checks, as NAME=K. Repeatable.
    #[arg(long, value_parser = parse_extent)]
    pub extent: Vec<(String, usize)>,
    #[arg(long, default_value_t = 50)]
    pub max_passes: usize,
    /// Write the result here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_extent(s: &str) -> Result<(String, usize), String> {
    let (name, k) = s.split_once('=').ok_or_else(|| format!("expected NAME=K, got `{s}`"))?;
    let k: usize = k.parse().map_err(|_| format!("extent `{k}` is not a positive integer"))?;
    if name.is_empty() || k == 0 {
        return Err(format!("bad extent `{s}`"));
    }
    Ok((name.to_string(), k))
}

/// How a run ended, for the exit code.
pub enum Outcome {
    Ok,
    CheckFailed,
}

/// Errors that map to exit code 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn front_error(path: &std::path::Path, e: combdiff::Error) -> anyhow::Error {
    let at = match e.span() {
        Some(s) => format!("{}:{}", path.display(), s),
        None => path.display().to_string(),
    };
    anyhow!(Usage(format!("{at}: {}", e.message())))
}

enum Mode {
    Objective,
    Pullback,
}

pub fn run(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    if cfg.check && !(cfg.vdiff || cfg.pullback) {
        bail!(Usage("--check needs --vdiff or --pullback".into()));
    }
    if cfg.decompose && (cfg.vdiff || cfg.pullback) {
        bail!(Usage("--decompose is a stage of its own; drop --vdiff/--pullback".into()));
    }
    if let Some(p) = &cfg.out {
        std::fs::write(p, "").with_context(|| format!("writing {}", p.display()))?;
    }
    let src = std::fs::read_to_string(&cfg.input)
        .map_err(|e| anyhow!(Usage(format!("{}: {e}", cfg.input.display()))))?;
    let (f, ctx) = load(&src).map_err(|e| front_error(&cfg.input, e))?;
    let stage = |e: combdiff::Error| front_error(&cfg.input, e);
    let f = if cfg.eval_all { eval_all(&f).map_err(stage)? } else { f };

    let mut warnings = Vec::new();
    let (raw, mode) = if cfg.vdiff {
        let g = vdiff(&f, &ctx).map_err(stage)?;
        warnings.extend(g.warnings);
        (g.expr, Some(Mode::Objective))
    } else if cfg.pullback {
        (pp(&f, &ctx).map_err(stage)?.expr, Some(Mode::Pullback))
    } else if cfg.decompose || cfg.emit == Emit::Combinators {
        (decompose(&f).map_err(stage)?, None)
    } else {
        (f.clone(), None)
    };

    let mut out = match cfg.emit {
        Emit::Combinators => decompose(&f).map_err(stage)?,
        Emit::Pullback => {
            if mode.is_none() {
                bail!(Usage("--emit pullback needs --vdiff or --pullback".into()));
            }
            raw.clone()
        }
        _ => raw.clone(),
    };
    if !matches!(cfg.emit, Emit::Combinators | Emit::Pullback) {
        if let Some(s) = cfg.settings {
            let rules = RuleSet {
                use_symmetries: s == Settings::Symmetry,
                max_passes: cfg.max_passes,
                ..RuleSet::default()
            };
            let r = redux_report(&out, &rules, &ctx).map_err(stage)?;
            warnings.extend(r.warnings);
            out = r.expr;
            if mode.is_some() {
                check_contractions(&f, &out).map_err(stage)?;
            }
        }
        if cfg.blaserize {
            out = blaserize(&out);
        }
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let text = match cfg.emit {
        Emit::Latex => to_latex(&out),
        Emit::Sexpr => to_sexpr(&out),
        _ => to_text(&out),
    };
    emit(cfg, &format!("{text}\n"))?;

    let mut outcome = Outcome::Ok;
    if cfg.check {
        let mut check = CheckConfig {
            trials: cfg.trials,
            tol: cfg.tol,
            seed: cfg.seed,
            extents: BTreeMap::new(),
            ..CheckConfig::default()
        };
        for (n, k) in &cfg.extent {
            check = check.with_extent(n, *k);
        }
        let report = match mode {
            Some(Mode::Objective) => check_gradient::<f64>(&f, &out, &ctx, &check),
            _ => check_outer_pullback(&f, &out, &ctx, &check),
        }
        .map_err(|e| anyhow!("check could not run: {e}"))?;
        let mut text = report.to_string();
        if !text.ends_with('\n') {
            text.push('\n');
        }
        emit(cfg, &text)?;
        if !report.passed() {
            outcome = Outcome::CheckFailed;
        }
    }
    Ok(outcome)
}

fn emit(cfg: &RunConfig, text: &str) -> anyhow::Result<()> {
    match &cfg.out {
        Some(p) => {
            let mut f = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .with_context(|| format!("opening {}", p.display()))?;
            f.write_all(text.as_bytes()).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Peel the held-fixed outer parameter groups off both terms, then check
/// the pullback of the target lambda.
fn check_outer_pullback(
    f: &Expr,
    pb: &Expr,
    ctx: &Context,
    cfg: &CheckConfig,
) -> combdiff::Result<CheckReport> {
    let f = strip_markers(&eval_all(f)?);
    let pb = eval_all(pb)?;
    let shape = objective_shape(&f)?;
    let mut free = Vec::new();
    let (mut a, mut b) = (f, pb);
    for g in &shape.outer {
        free.extend(g.iter().cloned());
        a = body_of(&a);
        b = body_of(&b);
    }
    check_pullback::<f64>(&a, &b, &free, ctx, cfg)
}

fn body_of(e: &Expr) -> Expr {
    match e.kind() {
        ExprKind::Lambda(_, body) => body.clone(),
        _ => e.clone(),
    }
}
