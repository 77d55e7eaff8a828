//! `wfock`: file-based experiments on weighted Fock spaces.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use wfock::dilation::{self, BlhOptions, PoissonOptions, ScalarSetting, Subspace};
use wfock::io::{self, ExperimentJson, MatrixJson};
use wfock::kernel::{self, Kernel, KernelOptions};
use wfock::sampling;
use wfock::tuple::{self, ClassifyOptions};
use wfock::weights::{self, RadialData};
use wfock::{linalg, CMat, Error, OperatorTuple, WeightSequence};

const EXIT_FAIL: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NOT_PURE: u8 = 3;
const EXIT_NOT_INVARIANT: u8 = 4;
const EXIT_CAP: u8 = 5;

#[derive(Parser)]
#[command(name = "wfock", version, about = "Weighted Fock space experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Radial weights R_k, Z_k and the admissibility report.
    Weights(Common),
    /// CSV of Phi_z(1) over a real grid in C^2.
    Domain {
        #[command(flatten)]
        common: Common,
        /// MIN:MAX:STEP, used for both coordinates.
        #[arg(long, default_value = "-1:1:0.05", allow_hyphen_values = true)]
        grid: Grid,
    },
    /// Poisson dilation of a tuple.
    Dilate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tuple: Option<PathBuf>,
    },
    /// Factorization of an invariant subspace. Without --tuple the ambient
    /// tuple is the shift W ⊗ I_m on F_N(R) ⊗ C^m.
    Blh {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tuple: Option<PathBuf>,
        #[arg(long)]
        subspace: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// Number of sample points for the symbol Θ (shift model only).
        #[arg(long, default_value_t = 0)]
        points: usize,
    },
    /// Choi/Gram positivity and contractivity of a built-in kernel family.
    KernelCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kernel: Family,
        #[arg(long, default_value_t = 4)]
        points: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// Subtract 10 R_1² from the first KB/KC weight.
        #[arg(long)]
        corrupt: bool,
    },
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Experiment file bundling weights, tuple, subspace, N, tol and seed.
    #[arg(long)]
    experiment: Option<PathBuf>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum Family {
    #[value(name = "KR")]
    #[serde(rename = "KR")]
    Kr,
    #[value(name = "KB")]
    #[serde(rename = "KB")]
    Kb,
    #[value(name = "KC")]
    #[serde(rename = "KC")]
    Kc,
}

#[derive(Clone, Copy, Debug, Serialize)]
struct Grid {
    min: f64,
    max: f64,
    step: f64,
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err("expected MIN:MAX:STEP".into());
        }
        let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
        let g = Grid {
            min: num(parts[0])?,
            max: num(parts[1])?,
            step: num(parts[2])?,
        };
        if !(g.step > 0.0) || !(g.max >= g.min) || !g.min.is_finite() || !g.max.is_finite() {
            return Err("need MIN <= MAX and STEP > 0".into());
        }
        Ok(g)
    }
}

impl Grid {
    fn values(&self) -> Vec<f64> {
        let count = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.min + i as f64 * self.step).collect()
    }
}

enum Failure {
    Lib(Error),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Run = Result<u8, Failure>;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NotPure { .. } => EXIT_NOT_PURE,
        Error::NotInvariant(_) => EXIT_NOT_INVARIANT,
        Error::Cap { .. } => EXIT_CAP,
        _ => EXIT_INPUT,
    }
}

/// Inputs resolved from flags, falling back to the experiment file.
struct Resolved {
    exp: Option<ExperimentJson>,
    common: Common,
}

impl Resolved {
    fn new(common: &Common) -> Result<Self, Failure> {
        let exp = match &common.experiment {
            Some(p) => Some(io::read_json::<ExperimentJson>(p)?),
            None => None,
        };
        Ok(Resolved {
            exp,
            common: common.clone(),
        })
    }

    fn weights(&self) -> Result<WeightSequence, Failure> {
        match (&self.common.weights, &self.exp) {
            (Some(p), _) => Ok(io::read_weights(p)?),
            (None, Some(e)) => Ok(e.weights.to_weights()?),
            _ => Err(Failure::Input("--weights or --experiment is required".into())),
        }
    }

    fn admissible_weights(&self) -> Result<WeightSequence, Failure> {
        let x = self.weights()?;
        let rep = weights::validate_admissible(&x);
        match rep.first_failure() {
            Some(c) => Err(Failure::Lib(Error::NotAdmissible(format!(
                "{} (witness {:e}, tolerance {:e})",
                c.name, c.witness, c.tolerance
            )))),
            None => Ok(x),
        }
    }

    fn tuple(&self, path: &Option<PathBuf>) -> Result<Option<OperatorTuple>, Failure> {
        match (path, self.exp.as_ref().and_then(|e| e.tuple.as_ref())) {
            (Some(p), _) => Ok(Some(io::read_tuple(p)?)),
            (None, Some(t)) => Ok(Some(t.to_tuple()?)),
            _ => Ok(None),
        }
    }

    fn subspace(&self, path: &Option<PathBuf>) -> Result<Option<Subspace>, Failure> {
        match (path, self.exp.as_ref().and_then(|e| e.subspace.as_ref())) {
            (Some(p), _) => Ok(Some(io::read_subspace(p)?)),
            (None, Some(s)) => Ok(Some(s.to_subspace()?)),
            _ => Ok(None),
        }
    }

    fn n(&self) -> Option<usize> {
        self.common.n.or(self.exp.as_ref().and_then(|e| e.n))
    }

    fn tol(&self) -> Option<f64> {
        self.common.tol.or(self.exp.as_ref().and_then(|e| e.tol))
    }

    fn seed(&self) -> u64 {
        self.common.seed.or(self.exp.as_ref().and_then(|e| e.seed)).unwrap_or(0)
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Lib(e.into())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json(out: &Option<PathBuf>, v: &Value) -> Result<(), Failure> {
    let mut text = io::to_json_string(v)?;
    text.push('\n');
    emit(out, &text)
}

fn mats(ms: &[CMat]) -> Vec<MatrixJson> {
    ms.iter().map(io::encode_matrix).collect()
}

fn cmd_weights(common: &Common) -> Run {
    let r = Resolved::new(common)?;
    let x = r.weights()?;
    let n = r.n().unwrap_or(4);
    let adm = weights::validate_admissible(&x);
    let mut report = json!({
        "command": "weights",
        "seed": r.seed(),
        "d": x.d(),
        "Kmax": x.kmax(),
        "N": n,
        "admissibility": adm,
    });
    if let Some(c) = adm.first_failure() {
        eprintln!(
            "inadmissible weights: {} failed (witness {:e}, tolerance {:e})",
            c.name, c.witness, c.tolerance
        );
        emit_json(&r.common.out, &report)?;
        return Ok(EXIT_INPUT);
    }
    let rec = weights::radial_from_recursion(&x, n)?;
    let comp = weights::radial_from_compositions(&x, n)?;
    let obj = report.as_object_mut().expect("object literal");
    obj.insert("zbound".into(), json!(rec.zbound));
    obj.insert("z_norms".into(), json!(rec.z_norms));
    obj.insert("r_min_eig".into(), json!(rec.r_min_eig));
    obj.insert("R2".into(), json!(mats(&rec.r2)));
    obj.insert("R".into(), json!(mats(&rec.r)));
    obj.insert("Z".into(), json!(mats(&rec.z)));
    obj.insert(
        "cross_check".into(),
        json!({ "recursion_vs_compositions": weights::radial_discrepancy(&rec, &comp) }),
    );
    emit_json(&r.common.out, &report)?;
    Ok(0)
}

fn cmd_domain(common: &Common, grid: Grid) -> Run {
    let r = Resolved::new(common)?;
    let x = r.admissible_weights()?;
    if x.d() != 2 {
        return Err(Failure::Input(format!("domain slices need d = 2, got d = {}", x.d())));
    }
    let vals = grid.values();
    let pts: Vec<(f64, f64)> = vals.iter().flat_map(|&a| vals.iter().map(move |&b| (a, b))).collect();
    let phis: Vec<f64> = pts
        .par_iter()
        .map(|&(a, b)| {
            let p = OperatorTuple::point(&[linalg::c(a, 0.0), linalg::c(b, 0.0)])?;
            Ok(tuple::phi(&p, &x, &linalg::identity(1))?[(0, 0)].re)
        })
        .collect::<Result<_, Error>>()?;
    let mut text = String::from("z1,z2,phi,in_domain\n");
    for ((a, b), phi) in pts.iter().zip(&phis) {
        writeln!(text, "{a},{b},{phi},{}", *phi < 1.0).expect("string write");
    }
    emit(&r.common.out, &text)?;
    Ok(0)
}

fn poisson_options(r: &Resolved) -> PoissonOptions {
    PoissonOptions {
        tol: r.tol().unwrap_or(1e-8),
        n: r.n(),
        n_cap: None,
        classify: ClassifyOptions::default(),
    }
}

fn cmd_dilate(common: &Common, tuple_path: &Option<PathBuf>) -> Run {
    let r = Resolved::new(common)?;
    let x = r.admissible_weights()?;
    let t = r
        .tuple(tuple_path)?
        .ok_or_else(|| Failure::Input("--tuple or an experiment tuple is required".into()))?;
    if t.d() != x.d() {
        return Err(Failure::Input(format!("tuple has d = {}, weights d = {}", t.d(), x.d())));
    }
    let opts = poisson_options(&r);
    let membership = tuple::classify(&t, &x, opts.classify)?;
    let mut report = json!({
        "command": "dilate",
        "seed": r.seed(),
        "options": opts,
        "classification": membership,
    });
    let rd = weights::radial_from_recursion(&x, 1)?;
    let code = match dilation::poisson(&t, &x, &rd, opts) {
        Ok(po) => {
            let inter = dilation::intertwine_residual(&po, &t);
            let obj = report.as_object_mut().expect("object literal");
            obj.insert("N".into(), json!(po.n));
            obj.insert("converged".into(), json!(po.converged));
            obj.insert("history".into(), json!(po.history));
            obj.insert("isometry_residual".into(), json!(po.isometry_residual));
            obj.insert("intertwine".into(), json!(inter));
            obj.insert("defect_rank".into(), json!(po.rank()));
            obj.insert("defect_values".into(), json!(po.defect.values));
            if po.converged {
                0
            } else {
                eprintln!("isometry residual {:e} above tol at the degree cap N = {}", po.isometry_residual, po.n);
                EXIT_CAP
            }
        }
        Err(e @ Error::NotPure { .. }) => {
            eprintln!("{e}");
            report["error"] = json!(e.to_string());
            exit_code(&e)
        }
        Err(e) => return Err(e.into()),
    };
    emit_json(&r.common.out, &report)?;
    Ok(code)
}

fn cmd_blh(common: &Common, tuple_path: &Option<PathBuf>, sub_path: &Option<PathBuf>, g: usize, points: usize) -> Run {
    let r = Resolved::new(common)?;
    let x = r.admissible_weights()?;
    let seed = r.seed();
    let mut rng = sampling::rng(seed);
    let given = r.tuple(tuple_path)?;
    let setting = match given {
        Some(_) => None,
        None => Some(ScalarSetting::new(&x, r.n().unwrap_or(6), g.max(1))?),
    };
    let t = match (&given, &setting) {
        (Some(t), _) => t.clone(),
        (None, Some(s)) => s.tuple.clone(),
        _ => unreachable!(),
    };
    let (s, source) = match (r.subspace(sub_path)?, &setting) {
        (Some(sub), _) => (sub.isometry()?, "file"),
        (None, Some(set)) => {
            // cyclic subspace of a random vector without vacuum component
            let start = set.frame.offsets[1] * set.g;
            let mut v = sampling::complex_gaussian(&mut rng, set.dim(), 1);
            v.rows_mut(0, start).fill(linalg::ZERO);
            (dilation::cyclic_subspace(&t, &v), "cyclic")
        }
        (None, None) => return Err(Failure::Input("--subspace is required with --tuple".into())),
    };
    if s.nrows() != t.m() {
        return Err(Failure::Input(format!("subspace lives in dimension {}, tuple acts on {}", s.nrows(), t.m())));
    }
    let mut poisson = poisson_options(&r);
    poisson.n = None;
    let opts = BlhOptions {
        poisson,
        ..BlhOptions::default()
    };
    let mut report = json!({
        "command": "blh",
        "seed": seed,
        "options": opts,
        "ambient_dim": t.m(),
        "subspace_dim": s.ncols(),
        "subspace_source": source,
    });
    let f = match dilation::invariant_subspace_factor(&t, &x, &rd_seed(&x)?, &s, opts) {
        Ok(f) => f,
        Err(e @ (Error::NotInvariant(_) | Error::NotPure { .. })) => {
            eprintln!("{e}");
            report["error"] = json!(e.to_string());
            if let Error::NotInvariant(w) = e {
                report["witness"] = json!(w);
            }
            emit_json(&r.common.out, &report)?;
            return Ok(exit_code(&e));
        }
        Err(e) => return Err(e.into()),
    };
    let obj = report.as_object_mut().expect("object literal");
    obj.insert("N".into(), json!(f.n));
    obj.insert("D_dim".into(), json!(f.d_dim));
    obj.insert("residuals".into(), json!(f.residuals));
    obj.insert("poisson_converged".into(), json!(f.poisson.converged));
    obj.insert("purity_ambient".into(), json!(f.purity_ambient));
    obj.insert("purity_restricted".into(), json!(f.purity_restricted));
    obj.insert("restriction_purity_ok".into(), json!(f.restriction_purity_ok));
    if let (Some(set), true) = (&setting, points > 0) {
        let ws: Vec<Vec<_>> = (0..points)
            .map(|_| sampling::point_in_ball(&mut rng, x.d(), 0.1))
            .collect();
        let mut samples = Vec::with_capacity(points);
        for w in &ws {
            let sym = dilation::multiplier_symbol(&f, set, w)?;
            samples.push(json!({
                "w": w.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
                "theta": io::encode_matrix(&sym.theta),
                "eigen_residual": sym.eigen_residual,
                "tail": sym.tail,
            }));
        }
        obj.insert("symbol_tail_tol".into(), json!(dilation::SYMBOL_TAIL_TOL));
        obj.insert("symbol".into(), json!(samples));
        obj.insert("symbol_defect_gram".into(), json!(dilation::symbol_defect_gram(&f, set, &ws)?));
    }
    emit_json(&r.common.out, &report)?;
    Ok(if f.poisson.converged { 0 } else { EXIT_CAP })
}

fn rd_seed(x: &WeightSequence) -> Result<RadialData, Failure> {
    Ok(weights::radial_from_recursion(x, 1)?)
}

fn cmd_kernel_check(common: &Common, family: Family, points: usize, m: usize, corrupt: bool) -> Run {
    let r = Resolved::new(common)?;
    let x = r.admissible_weights()?;
    let seed = r.seed();
    let n = r.n().unwrap_or(8);
    if points == 0 || m == 0 {
        return Err(Failure::Input("--points and --m must be positive".into()));
    }
    if points * m > kernel::CHOI_CAP {
        return Err(Failure::Lib(Error::Cap {
            what: "points*m in Choi assembly",
            needed: (points * m) as u128,
            cap: kernel::CHOI_CAP as u128,
        }));
    }
    let opts = KernelOptions {
        tol: r.tol().unwrap_or(1e-12),
        ..KernelOptions::default()
    };
    let rd = weights::radial_from_recursion(&x, n)?;
    let kern = match family {
        Family::Kr => Kernel::Reproducing {
            x: x.clone(),
            rd: rd.clone(),
            opts,
        },
        Family::Kb | Family::Kc => {
            let mut squares = match family {
                Family::Kb => rd.r2.clone(),
                _ => kernel::kc_weights(&rd, &rd.r2, n)?,
            };
            if corrupt {
                kernel::corrupt_weights(&mut squares, &rd);
            }
            Kernel::Weighted { squares }
        }
    };
    let mut rng = sampling::rng(seed);
    let mut pts = Vec::with_capacity(points);
    for _ in 0..points {
        let target = rng.random_range(0.1..0.5);
        pts.push(sampling::commuting_tuple(&mut rng, x.d(), m, &x, target)?);
    }
    let sample = kernel::sample_kernel(&kern, &pts)?;
    let cp = kernel::choi_cp_check(&sample)?;
    let contract = kernel::contractivity_check(&kern, &x, &rd, &pts, None, opts)?;
    let pass = cp.pass && contract.pass;
    let report = json!({
        "command": "kernel-check",
        "seed": seed,
        "kernel": family,
        "corrupt": corrupt,
        "N": n,
        "points": points,
        "m": m,
        "options": opts,
        "cp_tol": kernel::CP_TOL,
        "hermitian_defect": sample.hermitian_defect(),
        "cp": cp,
        "contractivity": contract,
        "pass": pass,
    });
    if !pass {
        eprintln!(
            "kernel check failed: Choi min eigenvalue {:e}, contractivity min eigenvalue {:e}",
            cp.choi_min_eig, contract.route_phi.choi_min_eig
        );
    }
    emit_json(&r.common.out, &report)?;
    Ok(if pass { 0 } else { EXIT_FAIL })
}

fn run(cli: Cli) -> Run {
    match &cli.command {
        Command::Weights(c) => cmd_weights(c),
        Command::Domain { common, grid } => cmd_domain(common, *grid),
        Command::Dilate { common, tuple } => cmd_dilate(common, tuple),
        Command::Blh {
            common,
            tuple,
            subspace,
            m,
            points,
        } => cmd_blh(common, tuple, subspace, *m, *points),
        Command::KernelCheck {
            common,
            kernel,
            points,
            m,
            corrupt,
        } => cmd_kernel_check(common, *kernel, *points, *m, *corrupt),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
