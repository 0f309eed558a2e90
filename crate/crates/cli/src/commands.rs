use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use qvalued::campanato::{campanato_report, campanato_seminorm, excess_profile, Ladder};
use qvalued::decay::{
    certified_exponent, certified_exponent_stratified, certify_hypothesis, CertifyConfig,
    CertifyOutcome, DecayHypothesis, Stratification,
};
use qvalued::harmonic::{
    average_symmetric_split, branch_set_detect, frequency_function, good_decay_check, library,
    BranchPower, Components, LinearTuple, ZeroTraceBranch,
};
use qvalued::io::{read_samples, to_csv_string};
use qvalued::{best_fit, Domain, DomainSpec, Error, FitConfig, QField, Region, SampledQFunction};

use crate::output::{pairs_csv, write_atomic, Sink};

pub enum Failure {
    Input(String),
    Numeric(String),
    Refused(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}

type Res<T> = std::result::Result<T, Failure>;

#[derive(Parser)]
#[command(name = "aqc", version, about = "Q-valued function numerics")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Sample file (CSV with an `n,m,Q` header, or `.json`). Repeat for
    /// several components in `certify`.
    #[arg(long = "in", global = true)]
    pub input: Vec<PathBuf>,
    /// Output `.json` file or directory; JSON goes to stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Domain as inline JSON, a JSON file, or a kind (`ball`, `half_ball`,
    /// `annulus`, `box`).
    #[arg(long, global = true)]
    pub domain: Option<String>,
    /// Polynomial degree.
    #[arg(long, global = true, default_value_t = 1)]
    pub k: u32,
    /// Integrability exponent.
    #[arg(long, global = true, default_value_t = 2.0)]
    pub q: f64,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long = "ladder-depth", global = true, default_value_t = 6)]
    pub ladder_depth: usize,
    /// Top ladder radius; `min{1, diam}` when omitted.
    #[arg(long, global = true)]
    pub rho0: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true)]
    pub resolution: Option<f64>,
    /// Center as comma-separated coordinates; repeatable.
    #[arg(long, global = true, value_parser = parse_point)]
    pub center: Vec<Vec<f64>>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Best Q-valued polynomial on a ball.
    Fit {
        /// Region radius; large enough to hold every sample when omitted.
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Excess along the dyadic ladder at each center.
    Excess,
    /// Campanato seminorm at exponent `--lambda`.
    Seminorm,
    /// Decay exponent and Hölder exponent.
    Exponent,
    /// Hölder certificate from a hypothesis file, audited against samples
    /// when `--in` is given.
    Certify {
        #[arg(long)]
        hypothesis: PathBuf,
    },
    #[command(subcommand)]
    Lab(Lab),
}

#[derive(Subcommand)]
pub enum Lab {
    /// Samples a closed-form field to CSV.
    Generate(FieldArgs),
    /// Branch set, decay and frequency diagnostics.
    Audit {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
    },
}

#[derive(Args, Clone)]
pub struct FieldArgs {
    /// `branch_power`, `linear_tuple`, `zero_trace`, or a library name.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long = "Q", default_value_t = 2)]
    pub branches: usize,
    #[arg(long, default_value_t = 3)]
    pub p: i32,
    #[arg(long, value_enum, default_value_t = Parts::Re)]
    pub components: Parts,
    /// Comma-separated slopes for `linear_tuple`.
    #[arg(long)]
    pub slopes: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    pub c: f64,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Parts {
    Re,
    Im,
    Both,
}

fn parse_point(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
        .collect()
}

pub fn run(cli: Cli) -> Res<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Fit { radius } => cmd_fit(c, *radius),
        Command::Excess => cmd_excess(c),
        Command::Seminorm => cmd_seminorm(c),
        Command::Exponent => cmd_exponent(c),
        Command::Certify { hypothesis } => cmd_certify(c, hypothesis),
        Command::Lab(Lab::Generate(f)) => cmd_generate(c, f),
        Command::Lab(Lab::Audit { field, tol }) => cmd_audit(c, field, *tol),
    }
}

fn fit_config(c: &Common) -> FitConfig {
    FitConfig {
        seed: c.seed,
        ..FitConfig::default()
    }
}

fn load(c: &Common) -> Res<SampledQFunction> {
    let path = c
        .input
        .first()
        .ok_or_else(|| Failure::Input("missing --in sample file".into()))?;
    read_path(path)
}

fn read_path(path: &Path) -> Res<SampledQFunction> {
    read_samples(path).map_err(|e| match Failure::from(e) {
        Failure::Input(m) => Failure::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn parse_domain(c: &Common, n: usize) -> Res<Option<(Domain, Option<f64>)>> {
    let Some(text) = c.domain.as_deref() else {
        return Ok(None);
    };
    let trimmed = text.trim();
    let json: serde_json::Value = if trimmed.starts_with('{') {
        serde_json::from_str(trimmed).map_err(|e| Failure::Input(format!("--domain: {e}")))?
    } else if Path::new(trimmed).is_file() {
        let s = std::fs::read_to_string(trimmed).map_err(|e| Failure::Input(format!("{trimmed}: {e}")))?;
        serde_json::from_str(&s).map_err(|e| Failure::Input(format!("{trimmed}: {e}")))?
    } else {
        serde_json::json!({ "kind": trimmed, "n": n })
    };
    let spec: DomainSpec = serde_json::from_value(json).map_err(|e| Failure::Input(format!("--domain: {e}")))?;
    Ok(Some((spec.to_domain()?, spec.resolution)))
}

fn data_diameter(u: &SampledQFunction) -> f64 {
    let n = u.n();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for p in u.grid().points() {
        for j in 0..n {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    lo.iter().zip(&hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
}

fn ladder(c: &Common, u: &SampledQFunction) -> Res<Ladder> {
    if let Some(r) = c.rho0 {
        return Ok(Ladder::new(r, c.ladder_depth));
    }
    let diam = match parse_domain(c, u.n())? {
        Some((d, _)) => d.diameter(),
        None => data_diameter(u),
    };
    Ok(Ladder::capped(diam, c.ladder_depth))
}

fn centers(c: &Common, n: usize) -> Res<Vec<Vec<f64>>> {
    if c.center.is_empty() {
        return Ok(vec![vec![0.0; n]]);
    }
    if let Some(p) = c.center.iter().find(|p| p.len() != n) {
        return Err(Failure::Input(format!("center {p:?} has {} coordinates, expected {n}", p.len())));
    }
    Ok(c.center.clone())
}

#[derive(Serialize)]
struct FitOutput {
    poly: qvalued::qpoly::PolyJson,
    residual: f64,
    converged: bool,
    samples: usize,
}

fn cmd_fit(c: &Common, radius: Option<f64>) -> Res<()> {
    let u = load(c)?;
    let center = centers(c, u.n())?.remove(0);
    let radius = radius.unwrap_or_else(|| {
        let far = u
            .grid()
            .points()
            .map(|p| p.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        far + u.grid().resolution()
    });
    let fit = best_fit(&u, &Region::new(&center, radius), c.k, c.q, &fit_config(c))?;
    let out = FitOutput {
        poly: fit.poly.to_json(),
        residual: fit.residual,
        converged: fit.converged,
        samples: fit.samples,
    };
    Sink::new(c.out.clone(), "fit").emit(&out, None)
}

#[derive(Serialize)]
struct ExcessOutput {
    k: u32,
    q_exp: f64,
    ladder: Ladder,
    profiles: Vec<Profile>,
}

#[derive(Serialize)]
struct Profile {
    center: Vec<f64>,
    radii: Vec<f64>,
    excess: Vec<f64>,
}

fn cmd_excess(c: &Common) -> Res<()> {
    let u = load(c)?;
    let lad = ladder(c, &u)?;
    let cfg = fit_config(c);
    let mut profiles = Vec::new();
    for x in centers(c, u.n())? {
        let p = excess_profile(&u, &x, c.k, c.q, &lad, &cfg)?;
        profiles.push(Profile {
            center: x,
            radii: p.radii,
            excess: p.excess,
        });
    }
    let csv = pairs_csv(
        "center,rho,excess",
        profiles.iter().enumerate().flat_map(|(i, p)| {
            p.radii.iter().zip(&p.excess).map(move |(&r, &e)| (i.to_string(), r, e))
        }),
    );
    let out = ExcessOutput {
        k: c.k,
        q_exp: c.q,
        ladder: lad,
        profiles,
    };
    Sink::new(c.out.clone(), "excess").emit(&out, Some(csv))
}

fn cmd_seminorm(c: &Common) -> Res<()> {
    let u = load(c)?;
    let lambda = c
        .lambda
        .ok_or_else(|| Failure::Input("seminorm needs --lambda".into()))?;
    let lad = ladder(c, &u)?;
    let cfg = fit_config(c);
    let cs = centers(c, u.n())?;
    let s = campanato_seminorm(&u, c.k, c.q, lambda, &cs, &lad, &cfg)?;
    let mut rows = Vec::new();
    for (i, x) in cs.iter().enumerate() {
        let p = excess_profile(&u, x, c.k, c.q, &lad, &cfg)?;
        for (&r, &e) in p.radii.iter().zip(&p.excess) {
            rows.push((i.to_string(), r, (r.powf(-lambda) * e.max(0.0)).powf(1.0 / c.q)));
        }
    }
    Sink::new(c.out.clone(), "seminorm").emit(&s, Some(pairs_csv("center,rho,value", rows)))
}

fn cmd_exponent(c: &Common) -> Res<()> {
    let u = load(c)?;
    let lad = ladder(c, &u)?;
    let report = campanato_report(&u, &centers(c, u.n())?, c.k, c.q, &lad, c.lambda, &fit_config(c))?;
    let csv = pairs_csv(
        "center,rho,excess",
        report.centers.iter().enumerate().flat_map(|(i, r)| {
            r.radii.iter().zip(&r.excess).map(move |(&rho, &e)| (i.to_string(), rho, e))
        }),
    );
    Sink::new(c.out.clone(), "exponent").emit(&report, Some(csv))
}

#[derive(Deserialize)]
struct HypothesisFile {
    #[serde(flatten)]
    hypothesis: DecayHypothesis,
    #[serde(default)]
    stratification: Option<Stratification>,
}

fn cmd_certify(c: &Common, path: &Path) -> Res<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let file: HypothesisFile =
        serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let h = file.hypothesis;
    let sink = Sink::new(c.out.clone(), "certificate");
    if c.input.is_empty() {
        let cert = if h.strata.is_empty() {
            certified_exponent(&h)?
        } else {
            certified_exponent_stratified(&h)?
        };
        return sink.emit(&cert, Some(csv_factors(&cert.factors)));
    }
    let comps = c
        .input
        .iter()
        .map(|p| read_path(p))
        .collect::<Res<Vec<_>>>()?;
    let n = comps[0].n();
    if h.n != n {
        return Err(Failure::Input(format!("hypothesis has n = {}, samples have n = {n}", h.n)));
    }
    let strat = file
        .stratification
        .unwrap_or_else(|| Stratification::single(vec![vec![0.0; n]]));
    let mut cfg = CertifyConfig::default();
    cfg.audit.fit.seed = c.seed;
    cfg.ladder = ladder(c, &comps[0])?;
    let outcome = certify_hypothesis(&comps, &strat, &h, &cfg)?;
    let csv = match &outcome {
        CertifyOutcome::Certified { soundness, .. } => Some(pairs_csv(
            "center,lambda_hat",
            soundness
                .lambda_hat
                .iter()
                .enumerate()
                .map(|(i, l)| (String::new(), i as f64, l.unwrap_or(f64::INFINITY))),
        )),
        CertifyOutcome::Refused { .. } => None,
    };
    sink.emit(&outcome, csv)?;
    match outcome {
        CertifyOutcome::Refused { audit } => Err(Failure::Refused(format!(
            "{} violation(s) in {} checked inequalities",
            audit.violations.len(),
            audit.checked
        ))),
        CertifyOutcome::Certified { .. } => Ok(()),
    }
}

fn csv_factors(f: &[qvalued::decay::Factor]) -> String {
    let mut s = String::from("factor,value\n");
    for x in f {
        s.push_str(&format!("\"{}\",{}\n", x.name, x.value));
    }
    s
}

fn build_field(f: &FieldArgs, n: usize) -> Res<(String, Arc<dyn QField>)> {
    let kind = f.kind.clone().unwrap_or_else(|| "branch_power".into());
    let parts = match f.components {
        Parts::Re => Components::Re,
        Parts::Im => Components::Im,
        Parts::Both => Components::Both,
    };
    let field: Arc<dyn QField> = match kind.as_str() {
        "branch_power" => Arc::new(BranchPower::new(n, f.branches, f.p, parts)?),
        "linear_tuple" => Arc::new(LinearTuple::new(
            n,
            match &f.slopes {
                Some(s) => parse_point(s).map_err(Failure::Input)?,
                None => vec![1.0, -1.0],
            },
        )?),
        "zero_trace" => Arc::new(ZeroTraceBranch { c: f.c }),
        other => library()
            .into_iter()
            .find(|(name, _)| *name == other)
            .map(|(_, fld)| fld)
            .ok_or_else(|| Failure::Input(format!("unknown field kind `{other}`")))?,
    };
    if field.dim() != n {
        return Err(Failure::Input(format!("field `{kind}` lives in dimension {}, domain in {n}", field.dim())));
    }
    Ok((kind, field))
}

fn lab_grid(c: &Common) -> Res<qvalued::QuadratureGrid> {
    let (domain, res) = parse_domain(c, 2)?.unwrap_or((Domain::unit_ball(2), None));
    let h = c.resolution.or(res).unwrap_or(1.0 / 64.0);
    Ok(domain.sample(h)?)
}

fn cmd_generate(c: &Common, f: &FieldArgs) -> Res<()> {
    let grid = lab_grid(c)?;
    let (_, field) = build_field(f, grid.dim())?;
    let u = SampledQFunction::from_field(grid, field)?;
    let csv = to_csv_string(&u)?;
    match &c.out {
        Some(p) => write_atomic(p, csv.as_bytes()),
        None => crate::output::print_stdout(&csv),
    }
}

#[derive(Serialize)]
struct LabAudit {
    field: String,
    samples: usize,
    branch_samples: usize,
    branch_points: Vec<Vec<f64>>,
    average_norm: f64,
    symmetric_norm: f64,
    good_decay: Option<qvalued::harmonic::GoodDecayReport>,
    frequency: Vec<qvalued::harmonic::FrequencyRung>,
}

fn cmd_audit(c: &Common, f: &FieldArgs, tol: f64) -> Res<()> {
    let (name, u, field) = if c.input.is_empty() {
        let grid = lab_grid(c)?;
        let (name, field) = build_field(f, grid.dim())?;
        let u = SampledQFunction::from_field(grid, field.clone())?;
        (name, u, Some(field))
    } else {
        (c.input[0].display().to_string(), load(c)?, None)
    };
    let branch = branch_set_detect(&u, 1e-6)?;
    let (avg, sym) = average_symmetric_split(&u)?;
    let l2 = |v: &SampledQFunction| {
        (0..v.len())
            .map(|i| v.grid().weight(i) * v.raw(i).iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    };
    let center = centers(c, u.n())?.remove(0);
    let (good_decay, frequency) = match field.as_ref().filter(|fl| fl.dim() == 2) {
        Some(fl) => {
            let pairs: Vec<(f64, f64)> = [0.5, 0.25, 0.125]
                .iter()
                .flat_map(|&r| (1..=3).map(move |l| (r * 0.5f64.powi(l), r)))
                .collect();
            let gd = good_decay_check(fl.as_ref(), &center, &pairs, tol)?;
            let fr = frequency_function(fl.as_ref(), &center, &[0.5, 0.25, 0.125], 1e-5)?;
            (Some(gd), fr)
        }
        None => (None, Vec::new()),
    };
    let csv = pairs_csv(
        "rho,frequency",
        frequency
            .iter()
            .map(|r| (String::new(), r.rho, r.value.unwrap_or(f64::NAN))),
    );
    let out = LabAudit {
        field: name,
        samples: u.len(),
        branch_samples: branch.len(),
        branch_points: branch.iter().take(32).map(|&i| u.grid().point(i).to_vec()).collect(),
        average_norm: l2(&avg),
        symmetric_norm: l2(&sym),
        good_decay,
        frequency,
    };
    Sink::new(c.out.clone(), "audit").emit(&out, Some(csv))
}
