use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sabap::oracle::{grid_project, grid_project_operators, GridBox};
use sabap::strings::{check_m_star, check_weights, Fitness, MStarBounds};
use sabap::{Operator, OperatorFamily, Point, PolyhedralSpec, RunOptions, Solver, StringFamily};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{point, FamilyConfig, GeneratorConfig, RunConfig, VariantConfig};
use crate::error::{exit, CliError};
use crate::trace::{output_paths, Trace, TraceMeta};

/// Env var naming the default output directory of `run`.
pub const OUT_DIR_ENV: &str = "SABAP_OUT_DIR";

/// Slack for the sampled firm nonexpansiveness check.
const SAMPLED_FNE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleArg {
    Auto,
    None,
    Point(Vec<f64>),
}

impl FromStr for OracleArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Self::Auto),
            "none" => Ok(Self::None),
            _ => s
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map(Self::Point)
                .map_err(|_| format!("expected auto, none or a comma-separated point, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub oracle: OracleArg,
    pub max_iter: Option<u64>,
    pub record_every: Option<u64>,
    pub epsilon: Option<f64>,
}

impl RunArgs {
    pub fn new(config: impl Into<PathBuf>) -> Self {
        Self {
            config: config.into(),
            out: None,
            out_dir: None,
            oracle: OracleArg::Auto,
            max_iter: None,
            record_every: None,
            epsilon: None,
        }
    }
}

/// Loads a config and applies command-line overrides.
pub fn load_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(n) = args.max_iter {
        cfg.max_iter = n;
    }
    if let Some(n) = args.record_every {
        cfg.record_every = n;
    }
    if let Some(eps) = args.epsilon {
        match cfg.problem.countable.as_mut() {
            Some(c) => c.epsilon = eps,
            None => {
                return Err(CliError::Config(
                    "--epsilon applies to countable families only".into(),
                ))
            }
        }
    }
    if cfg.max_iter == 0 {
        return Err(CliError::Config("max_iter: must be at least 1".into()));
    }
    if cfg.record_every == 0 {
        return Err(CliError::Config("record_every: must be at least 1".into()));
    }
    Ok(cfg.normalized())
}

pub fn config_hash(cfg: &RunConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_toml().as_bytes()))
}

/// A reference value of `P_F(u)` and how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleValue {
    pub method: &'static str,
    pub projection: Vec<f64>,
}

/// Picks the best available oracle for `P_F(u)`: active-set KKT for
/// polyhedral families, the closed form for shrinking halfspaces, a grid
/// search when `[oracle.grid]` is set, then a point given in `[oracle]`.
pub fn resolve_oracle(cfg: &RunConfig) -> Result<Option<OracleValue>, CliError> {
    let u = point("problem.anchor", &cfg.problem.anchor)?;
    let value = |method, p: Point| {
        Some(OracleValue {
            method,
            projection: p.into_vec(),
        })
    };
    let ops = match &cfg.problem.countable {
        None => Some(finite_operators(cfg)?),
        Some(c) => match &c.generator {
            GeneratorConfig::ShrinkingHalfspaces { a, b, scale } => {
                // ⋂_i {<a, x> ≤ b + scale/i} = {<a, x> ≤ b + min(scale, 0)}.
                let limit = Operator::halfspace(
                    point("problem.countable.generator.a", a)?,
                    b + scale.min(0.0),
                )
                .map_err(|e| CliError::Config(format!("problem.countable.generator: {e}")))?;
                let p = limit
                    .apply(&u)
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
                return Ok(value("closed-form-halfspace", p));
            }
            GeneratorConfig::Cycle { operators } => Some(
                operators
                    .iter()
                    .enumerate()
                    .map(|(i, op)| op.build(&format!("problem.countable.generator.operators[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
        },
    };
    let oracle_cfg = cfg.oracle.as_ref();
    if let Some(ops) = &ops {
        if let Some(spec) = PolyhedralSpec::from_operators(ops) {
            let spec = spec.map_err(|e| CliError::Config(format!("problem.operators: {e}")))?;
            match spec.kkt_project(&u) {
                Ok(p) => return Ok(value("kkt-active-set", p)),
                Err(e) if oracle_cfg.is_none_or(|o| o.grid.is_none() && o.point.is_none()) => {
                    return Err(CliError::Runtime(e.to_string()))
                }
                Err(_) => {}
            }
        }
        if let Some(grid) = oracle_cfg.and_then(|o| o.grid.as_ref()) {
            let bounds = GridBox {
                lo: point("oracle.grid.lo", &grid.lo)?,
                hi: point("oracle.grid.hi", &grid.hi)?,
            };
            let p = match PolyhedralSpec::from_operators(ops) {
                Some(Ok(spec)) => grid_project(&spec, &u, grid.resolution, &bounds),
                _ => grid_project_operators(ops, &u, grid.resolution, &bounds),
            }
            .map_err(|e| CliError::Runtime(e.to_string()))?;
            return Ok(value("grid", p));
        }
    }
    match oracle_cfg.and_then(|o| o.point.as_ref()) {
        Some(p) => Ok(value("config", point("oracle.point", p)?)),
        None => Ok(None),
    }
}

fn finite_operators(cfg: &RunConfig) -> Result<Vec<Operator>, CliError> {
    match cfg.problem.family()? {
        OperatorFamily::Finite(ops) => Ok(ops),
        OperatorFamily::Countable(_) => unreachable!("checked by the caller"),
    }
}

fn default_output(args: &RunArgs, cfg: &RunConfig) -> PathBuf {
    if let Some(out) = &args.out {
        return out.clone();
    }
    if let Some(out) = &cfg.output {
        return out.clone();
    }
    let stem = args
        .config
        .file_stem()
        .map(|s| s.to_os_string())
        .unwrap_or_else(|| "trace".into());
    args.out_dir.clone().unwrap_or_default().join(stem)
}

/// Runs the configured solver and writes CSV and JSON traces.
pub fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    let cfg = load_config(args)?;
    let built = cfg.build()?;
    let dim = built.problem.dim();
    let oracle = match &args.oracle {
        OracleArg::None => None,
        OracleArg::Point(p) => Some(OracleValue {
            method: "command-line",
            projection: p.clone(),
        }),
        OracleArg::Auto => match resolve_oracle(&cfg) {
            Ok(v) => v,
            Err(CliError::Runtime(e)) => {
                writeln!(out, "warning: no oracle ({e})").ok();
                None
            }
            Err(e) => return Err(e),
        },
    };
    let mut opts = RunOptions::new(cfg.max_iter, cfg.record_every);
    if let Some(o) = &oracle {
        let p = point("--oracle", &o.projection)?;
        p.check_dim(dim)
            .map_err(|e| CliError::Config(format!("--oracle: {e}")))?;
        opts = opts.with_oracle(p);
    }
    let solver = Solver::new(built.problem, built.variant, built.steering)
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    let (run, error) = match solver.run(&opts) {
        Ok(run) => (run, None),
        Err(e) => (*e.partial, Some(e.error.to_string())),
    };
    let meta = TraceMeta {
        variant: run.variant.clone(),
        steering: run.steering.to_string(),
        dim,
        max_iter: run.max_iter,
        record_every: run.record_every,
        epsilon: run.epsilon,
        tail_mass: run.tail_mass,
        truncated_terms: run.truncated_terms,
        stopped_at: run.stopped_at,
        oracle: oracle.as_ref().map(|o| o.projection.clone()),
        config_sha256: config_hash(&cfg),
        error: error.clone(),
    };
    let trace = Trace::from_run(&run, meta);
    let (csv_path, json_path) = output_paths(&default_output(args, &cfg));
    trace.write_csv(&csv_path)?;
    trace.write_json(&json_path)?;
    writeln!(
        out,
        "wrote {} and {} ({} rows)",
        csv_path.display(),
        json_path.display(),
        trace.rows.len()
    )
    .ok();
    if let Some(last) = trace.rows.last() {
        write!(
            out,
            "k = {}: x = {}",
            last.k,
            Point::new(last.x.clone()).map_or_else(|_| format!("{:?}", last.x), |p| p.to_string())
        )
        .ok();
        if let Some(d) = last.oracle_dist {
            write!(
                out,
                ", distance to {} oracle = {d:e}",
                oracle.as_ref().map_or("", |o| o.method)
            )
            .ok();
        }
        writeln!(out).ok();
    }
    match error {
        Some(e) => Err(CliError::Runtime(e)),
        None => Ok(exit::OK),
    }
}

/// Prints `P_F(u)` as JSON.
pub fn cmd_oracle(config: &Path, out: &mut dyn Write) -> Result<u8, CliError> {
    let cfg = RunConfig::load(config)?;
    let Some(value) = resolve_oracle(&cfg)? else {
        return Err(CliError::Invalid(
            "no oracle applies: the family is not polyhedral and no [oracle] grid or point is given"
                .into(),
        ));
    };
    #[derive(Serialize)]
    struct Report<'a> {
        anchor: &'a [f64],
        #[serde(flatten)]
        value: &'a OracleValue,
        distance: f64,
    }
    let distance = sabap::Point::new(cfg.problem.anchor.clone())
        .and_then(|u| Ok(u.distance(&Point::new(value.projection.clone())?)))
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let report = Report {
        anchor: &cfg.problem.anchor,
        value: &value,
        distance,
    };
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(&report).expect("serializable")
    )
    .ok();
    Ok(exit::OK)
}

#[derive(Debug, Clone)]
pub struct CheckArgs {
    pub config: PathBuf,
    pub emit_normalized: bool,
}

/// Collects pass/fail lines of the validation report.
#[derive(Debug, Default)]
pub struct Report {
    pub lines: Vec<(bool, String)>,
}

impl Report {
    fn check(&mut self, ok: bool, msg: impl Into<String>) {
        self.lines.push((ok, msg.into()));
    }

    fn result<T, E: std::fmt::Display>(&mut self, ctx: &str, r: Result<T, E>) -> Option<T> {
        match r {
            Ok(v) => {
                self.check(true, format!("{ctx}: ok"));
                Some(v)
            }
            Err(e) => {
                self.check(false, format!("{ctx}: {e}"));
                None
            }
        }
    }

    fn note(&mut self, msg: impl Into<String>) {
        self.lines.push((true, msg.into()));
    }

    pub fn passed(&self) -> bool {
        self.lines.iter().all(|(ok, _)| *ok)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (ok, msg) in &self.lines {
            s.push_str(if *ok { "PASS " } else { "FAIL " });
            s.push_str(msg);
            s.push('\n');
        }
        s
    }
}

/// Validates a config: fitness, weights, `M*` membership, steering prefix,
/// solver preconditions and sampled firm nonexpansiveness.
pub fn check_config(cfg: &RunConfig) -> Report {
    let mut r = Report::default();
    let family = r.result("problem", cfg.problem.family());
    let m = match &family {
        Some(OperatorFamily::Finite(ops)) => Some(ops.len()),
        _ => None,
    };
    let problem = family
        .as_ref()
        .and_then(|_| r.result("problem: anchor, x0 and witness", cfg.problem.build()));

    let bounds = match (&cfg.check, m) {
        (Some(c), Some(m)) => r.result(
            &format!("M* bounds Δ = {}, q̄ = {}", c.delta, c.q_bar),
            MStarBounds::new(c.delta, c.q_bar, m),
        ),
        _ => None,
    };
    match &cfg.variant {
        VariantConfig::StaticSa { strings, weights }
        | VariantConfig::StaticProjectionSa { strings, weights } => {
            check_family(&mut r, "variant", strings, weights, m, bounds.as_ref());
        }
        VariantConfig::QuasiDynamicSa { schedule } => {
            check_schedule(&mut r, schedule, m, bounds.as_ref());
        }
        VariantConfig::SimultaneousSa {
            schedule,
            outer_weights,
        } => {
            check_schedule(&mut r, schedule, m, bounds.as_ref());
            weight_line(&mut r, "variant.outer_weights", outer_weights);
            r.check(
                outer_weights.len() == schedule.len(),
                format!(
                    "variant.outer_weights: {} weights for {} families",
                    outer_weights.len(),
                    schedule.len()
                ),
            );
        }
        VariantConfig::FullySimultaneous { weights } => {
            weight_line(&mut r, "variant.weights", weights);
            if let Some(m) = m {
                r.check(
                    weights.len() == m,
                    format!(
                        "variant.weights: {} weights for {m} operators",
                        weights.len()
                    ),
                );
            }
        }
        VariantConfig::HalpernWittman
        | VariantConfig::InfiniteStaticSa
        | VariantConfig::Combettes => {}
    }
    if let Some(OperatorFamily::Countable(fam)) = &family {
        let fitness = match fam.string_generator().fitness() {
            Fitness::Certified => "certified by the string generator",
            Fitness::AssertedByUser => "asserted by the caller",
        };
        r.note(format!("countable family: fitness {fitness}"));
        if let Some(t) = r.result("countable family: truncation", fam.truncate()) {
            r.note(format!(
                "countable family: ε = {:e} keeps N = {} terms, tail mass {:e}",
                fam.epsilon(),
                t.len(),
                t.tail_mass
            ));
        }
    }

    let steering = r.result("steering", cfg.steering.build());
    if let Some(seq) = &steering {
        r.check(
            seq.is_verified(),
            format!(
                "steering: {seq} is {}",
                if seq.is_verified() {
                    "verified"
                } else {
                    "not verified (values outside [0, 1])"
                }
            ),
        );
        let horizon = cfg
            .check
            .as_ref()
            .map_or(crate::config::DEFAULT_PREFIX, |c| c.prefix)
            .max(2);
        let p = seq.validate_prefix(horizon);
        let line = |name: &str, c: &sabap::steering::Condition, rel: &str| {
            let at = c
                .first_violation
                .map_or(String::new(), |k| format!(", first violation at k = {k}"));
            format!(
                "steering prefix K = {horizon}: {name} {:.12} {rel} {:.12}{at}",
                c.value, c.bound
            )
        };
        r.check(
            p.range.passed,
            format!(
                "steering prefix K = {horizon}: λ_k in [0, 1]{}",
                p.range
                    .first_violation
                    .map_or(String::new(), |k| format!(", first violation at k = {k}"))
            ),
        );
        r.check(p.divergence.passed, line("Σ λ_k", &p.divergence, "≥"));
        r.check(p.summability.passed, line("Σ |Δλ_k|", &p.summability, "≤"));
    }

    if let (Some(problem), Some(steering)) = (problem, steering) {
        if let Ok(variant) = cfg.variant.build() {
            r.result(
                &format!("{} preconditions", variant.name()),
                Solver::new(problem.clone(), variant, steering),
            );
        }
        let ops = match problem.operators() {
            OperatorFamily::Finite(ops) => Some(ops.clone()),
            OperatorFamily::Countable(c) => {
                c.truncated_average().ok().map(|t| t.operators().to_vec())
            }
        };
        if let (Some(ops), Some(c)) = (ops, &cfg.check) {
            sampled_fne(&mut r, &ops, problem.anchor(), c.samples, cfg.seed);
        }
    }
    r
}

fn weight_line(r: &mut Report, path: &str, weights: &[f64]) -> bool {
    match check_weights(weights) {
        Ok(()) => {
            let sum: f64 = weights.iter().sum();
            r.check(true, format!("{path}: weights sum to {sum}"));
            true
        }
        Err(sabap::Error::InvalidWeights(msg)) => {
            r.check(false, format!("{path}: {msg}"));
            false
        }
        Err(e) => {
            r.check(false, format!("{path}: {e}"));
            false
        }
    }
}

fn check_schedule(
    r: &mut Report,
    schedule: &[FamilyConfig],
    m: Option<usize>,
    bounds: Option<&MStarBounds>,
) {
    r.check(
        !schedule.is_empty(),
        format!("variant.schedule: {} families", schedule.len()),
    );
    for (i, f) in schedule.iter().enumerate() {
        check_family(
            r,
            &format!("variant.schedule[{i}]"),
            &f.strings,
            &f.weights,
            m,
            bounds,
        );
    }
}

fn check_family(
    r: &mut Report,
    path: &str,
    strings: &[Vec<usize>],
    weights: &[f64],
    m: Option<usize>,
    bounds: Option<&MStarBounds>,
) {
    let weights_ok = weight_line(r, path, weights);
    if strings.len() != weights.len() {
        r.check(
            false,
            format!(
                "{path}: {} strings but {} weights",
                strings.len(),
                weights.len()
            ),
        );
    }
    let Some(vectors) = r.result(
        &format!("{path}.strings"),
        crate::config::index_vectors(path, strings),
    ) else {
        return;
    };
    if let Some(m) = m {
        for t in vectors.iter().filter(|t| t.max_index() > m) {
            r.check(
                false,
                format!("{path}: string {t} refers past operator {m}"),
            );
        }
        let present: BTreeSet<usize> = vectors
            .iter()
            .flat_map(|t| t.indices().iter().copied())
            .collect();
        let missing: Vec<usize> = (1..=m).filter(|i| !present.contains(i)).collect();
        if missing.is_empty() {
            r.check(
                true,
                format!("{path}: fit (every index in 1..={m} appears)"),
            );
        } else {
            r.check(
                false,
                format!("{path}: not fit, missing indices {missing:?}"),
            );
        }
    }
    if let (true, Some(bounds)) = (weights_ok && strings.len() == weights.len(), bounds) {
        if let Some(family) = r.result(path, StringFamily::new(vectors, weights.to_vec())) {
            let report = check_m_star(&family, bounds);
            if report.is_member() {
                r.check(
                    true,
                    format!(
                        "{path}: in M* (Δ = {}, q̄ = {})",
                        bounds.delta(),
                        bounds.q_bar()
                    ),
                );
            }
            for v in &report.violations {
                r.check(false, format!("{path}: not in M*: {v}"));
            }
        }
    }
}

fn sampled_fne(r: &mut Report, ops: &[Operator], anchor: &Point, samples: usize, seed: u64) {
    if samples == 0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = 1.0 + anchor.coords().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut worst = (f64::INFINITY, 0usize);
    for (i, op) in ops.iter().enumerate() {
        for _ in 0..samples {
            let mut draw = || {
                Point::new(
                    anchor
                        .coords()
                        .iter()
                        .map(|c| c + rng.gen_range(-2.0 * radius..=2.0 * radius))
                        .collect(),
                )
                .expect("finite sample")
            };
            let (x, y) = (draw(), draw());
            let Ok(res) = op.fne_residual(&x, &y) else {
                continue;
            };
            if res < worst.0 {
                worst = (res, i + 1);
            }
        }
    }
    r.check(
        worst.0 >= -SAMPLED_FNE_SLACK,
        format!(
            "firm nonexpansiveness on {samples} random pairs per operator (seed {seed}): min residual {:e} at operator {}",
            worst.0, worst.1
        ),
    );
}

pub fn cmd_check(
    args: &CheckArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<u8, CliError> {
    let cfg = RunConfig::load(&args.config)?;
    let report = check_config(&cfg);
    if args.emit_normalized {
        write!(out, "{}", cfg.normalized().to_toml()).ok();
        write!(err, "{}", report.render()).ok();
    } else {
        write!(out, "{}", report.render()).ok();
    }
    if report.passed() {
        Ok(exit::OK)
    } else {
        let failed = report.lines.iter().filter(|(ok, _)| !ok).count();
        Err(CliError::Invalid(format!("{failed} check(s) failed")))
    }
}

/// Largest row-wise `||x_A − x_B||_∞` and the `k` where it occurs.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub max: f64,
    pub at: u64,
}

pub fn compare_traces(a: &Trace, b: &Trace) -> Result<Comparison, CliError> {
    if a.rows.is_empty() || b.rows.is_empty() {
        return Err(CliError::Invalid("trace has no rows".into()));
    }
    if a.rows.len() != b.rows.len() {
        return Err(CliError::Invalid(format!(
            "k-grids differ: {} rows vs {} rows",
            a.rows.len(),
            b.rows.len()
        )));
    }
    let mut cmp = Comparison {
        max: 0.0,
        at: a.rows[0].k,
    };
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        if ra.k != rb.k {
            return Err(CliError::Invalid(format!(
                "k-grids differ: k = {} vs k = {}",
                ra.k, rb.k
            )));
        }
        if ra.x.len() != rb.x.len() {
            return Err(CliError::Invalid(format!(
                "dimensions differ at k = {}: {} vs {}",
                ra.k,
                ra.x.len(),
                rb.x.len()
            )));
        }
        let d =
            ra.x.iter()
                .zip(&rb.x)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, |m: f64, v| {
                    if v.is_nan() || m.is_nan() {
                        f64::NAN
                    } else {
                        m.max(v)
                    }
                });
        if d.is_nan() || d > cmp.max {
            cmp = Comparison { max: d, at: ra.k };
            if d.is_nan() {
                break;
            }
        }
    }
    Ok(cmp)
}

pub fn cmd_compare(a: &Path, b: &Path, tol: f64, out: &mut dyn Write) -> Result<u8, CliError> {
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(CliError::Config(format!(
            "--tol must be a finite nonnegative number, got {tol}"
        )));
    }
    let cmp = compare_traces(&Trace::read(a)?, &Trace::read(b)?)?;
    let ok = cmp.max <= tol;
    writeln!(
        out,
        "{} max ||x_A - x_B||_inf = {:e} at k = {} (tol {tol:e})",
        if ok { "PASS" } else { "FAIL" },
        cmp.max,
        cmp.at
    )
    .ok();
    Ok(if ok { exit::OK } else { exit::COMPARE_FAILED })
}
