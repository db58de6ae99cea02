//! `prolong`: run prolongation analyses on subspace and family files and
//! emit deterministic reports.

mod table;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};

use prolong_core::config::{DEFAULT_JET_DEGREE, DEFAULT_K_MAX, DEFAULT_RESTARTS};
use prolong_core::linalg;
use prolong_core::manifolds::{
    augmented_jet_space, builtin_family, sample_analysis, tangent_space, AugmentedJson,
    AugmentedSubspace, ConstraintFamily, DefiningFunction,
};
use prolong_core::matspace::SubspaceJson;
use prolong_core::obstruct::{
    classify_delta, find_complex_pair, find_rank_one, ClassifyOptions, ObstructionWitness,
    SearchOptions,
};
use prolong_core::polyspace::{reduced_basis, solution_basis, verify_membership};
use prolong_core::symtensor::{PolyJson, PolyMap};
use prolong_core::{chain, Error, MatrixSubspace, Tolerances};

#[derive(Parser, Debug)]
#[command(
    name = "prolong",
    version,
    about = "Prolongation analysis of linear constraints on Jacobians"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Output format; the table is a projection of the JSON report.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    rank_rel: Option<f64>,
    #[arg(long, global = true)]
    membership_tol: Option<f64>,
    #[arg(long, global = true)]
    subspace_tol: Option<f64>,
    #[arg(long, global = true)]
    rank_one_gate: Option<f64>,
    #[arg(long, global = true)]
    certificate_tol: Option<f64>,
    #[arg(long, global = true)]
    constraint_tol: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Prolongation chain of a subspace.
    Chain {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_K_MAX)]
        kmax: usize,
    },
    /// Run the rank-one and complex-pair detectors.
    Detect {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_RESTARTS)]
        restarts: usize,
    },
    /// Chain plus detectors: decide delta(V).
    Classify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_K_MAX)]
        kmax: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_RESTARTS)]
        restarts: usize,
    },
    /// Polynomial solution bases P(V) and P*(V).
    Polysolve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_K_MAX)]
        kmax: usize,
    },
    /// Sampled analysis of a constraint family.
    Manifold {
        #[arg(long)]
        family: String,
        #[arg(long)]
        dim: usize,
        /// Subspace file for `custom-linear`.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_K_MAX)]
        kmax: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        restarts: usize,
        /// Emit the tangent space at the base point as a subspace file.
        #[arg(long)]
        emit_tangent: bool,
    },
    /// Check DF(x) in V on random points of a ball.
    Verify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        poly: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Truncated jet space of an augmented constraint.
    Jet {
        #[arg(long = "input-augmented")]
        input_augmented: PathBuf,
        /// JSON file with the m x n matrix A as nested rows.
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = DEFAULT_JET_DEGREE)]
        degree: usize,
    },
}

/// Failure modes mapped to exit codes.
enum Failure {
    Input(String),
    Inconsistent(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Inconsistent(msg) => Failure::Inconsistent(msg),
            other => Failure::Input(other.to_string()),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn invalid<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure::Input(msg.into()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Outcome<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Input(format!("malformed {}: {e}", path.display())))
}

fn read_subspace(path: &Path) -> Outcome<MatrixSubspace> {
    let j: SubspaceJson = read_json(path)?;
    Ok(MatrixSubspace::try_from(&j)?)
}

fn tolerances(c: &Common) -> Outcome<Tolerances> {
    let mut t = Tolerances::default();
    let overrides = [
        (c.rank_rel, &mut t.rank_rel),
        (c.membership_tol, &mut t.membership),
        (c.subspace_tol, &mut t.subspace_equal),
        (c.rank_one_gate, &mut t.rank_one_gate),
        (c.certificate_tol, &mut t.certificate),
        (c.constraint_tol, &mut t.constraint_set),
    ];
    for (value, slot) in overrides {
        if let Some(v) = value {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("tolerances must be positive, got {v}"));
            }
            *slot = v;
        }
    }
    Ok(t)
}

fn check_positive(name: &str, v: usize) -> Outcome<()> {
    if v == 0 {
        return invalid(format!("--{name} must be at least 1"));
    }
    Ok(())
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn subspace_summary(v: &MatrixSubspace) -> Value {
    json!({ "n": v.n(), "m": v.m(), "dim": v.dim() })
}

fn detector_json<W>(found: Option<&W>, best: f64, to_json: impl Fn(&W) -> Value) -> Value {
    json!({
        "status": if found.is_some() { "certified" } else { "inconclusive" },
        "best_objective": best,
        "witness": found.map(to_json),
    })
}

/// Runs the subcommand; returns the effective configuration and the result.
fn execute(cmd: &Command, tol: &Tolerances) -> Outcome<(Value, Value)> {
    match cmd {
        Command::Chain { input, kmax } => {
            check_positive("kmax", *kmax)?;
            let v = read_subspace(input)?;
            let report = chain(&v, *kmax, tol)?;
            let config = json!({ "input": path_str(input), "k_max": kmax });
            Ok((
                config,
                serde_json::to_value(report.to_json()).expect("serializable"),
            ))
        }
        Command::Detect {
            input,
            seed,
            restarts,
        } => {
            check_positive("restarts", *restarts)?;
            let v = read_subspace(input)?;
            let opts = SearchOptions::with_seed(*seed, *restarts);
            let rank_one = if v.dim() >= 1 {
                let o = find_rank_one(&v, &opts, tol)?;
                detector_json(o.witness.as_ref(), o.best_objective, |w| {
                    serde_json::to_value(ObstructionWitness::RankOne(w.clone()).to_json())
                        .expect("serializable")
                })
            } else {
                json!({ "status": "not_applicable" })
            };
            let complex_pair = if v.dim() >= 2 && v.n() >= 2 && v.m() >= 2 {
                let o = find_complex_pair(&v, &opts, tol)?;
                detector_json(o.witness.as_ref(), o.best_objective, |w| {
                    serde_json::to_value(ObstructionWitness::ComplexPair(w.clone()).to_json())
                        .expect("serializable")
                })
            } else {
                json!({ "status": "not_applicable" })
            };
            let config = json!({
                "input": path_str(input),
                "seed": seed,
                "restarts": restarts,
                "max_evals": opts.max_evals,
                "polish_candidates": opts.polish_candidates,
            });
            let result = json!({
                "subspace": subspace_summary(&v),
                "rank_one": rank_one,
                "complex_pair": complex_pair,
            });
            Ok((config, result))
        }
        Command::Classify {
            input,
            kmax,
            seed,
            restarts,
        } => {
            check_positive("kmax", *kmax)?;
            check_positive("restarts", *restarts)?;
            let v = read_subspace(input)?;
            let opts = ClassifyOptions {
                k_max: *kmax,
                search: SearchOptions::with_seed(*seed, *restarts),
                cross_check: true,
            };
            let report = classify_delta(&v, &opts, tol)?;
            let config = json!({
                "input": path_str(input),
                "k_max": kmax,
                "seed": seed,
                "restarts": restarts,
                "max_evals": opts.search.max_evals,
                "polish_candidates": opts.search.polish_candidates,
                "cross_check": opts.cross_check,
            });
            let chain_json = report.chain.to_json();
            let result = json!({
                "subspace": subspace_summary(&v),
                "alpha": chain_json.alpha,
                "alpha_total": chain_json.alpha_total,
                "alpha_total_is_lower_bound": chain_json.alpha_total_is_lower_bound,
                "delta": report.delta.to_json(),
                "rank_one": report.rank_one,
                "complex_pair": report.complex_pair,
                "witnesses": report.witnesses.iter().map(|w| w.to_json()).collect::<Vec<_>>(),
            });
            Ok((config, result))
        }
        Command::Polysolve { input, kmax } => {
            check_positive("kmax", *kmax)?;
            let v = read_subspace(input)?;
            let report = chain(&v, *kmax, tol)?;
            let config = json!({ "input": path_str(input), "k_max": kmax });
            let mut result = json!({
                "subspace": subspace_summary(&v),
                "alpha": report.alpha,
                "delta": report.delta.to_json(),
            });
            match solution_basis(&report) {
                Ok(basis) => {
                    let reduced = reduced_basis(&basis, tol)?;
                    result["solutions"] =
                        serde_json::to_value(basis.to_json()).expect("serializable");
                    result["reduced"] =
                        serde_json::to_value(reduced.to_json()).expect("serializable");
                }
                Err(Error::NonFiniteDelta) => {
                    result["solutions"] = Value::Null;
                    result["reduced"] = Value::Null;
                    result["note"] = json!("chain did not terminate within k_max; solution space not finite-dimensional as computed");
                }
                Err(e) => return Err(e.into()),
            }
            Ok((config, result))
        }
        Command::Manifold {
            family,
            dim,
            input,
            samples,
            kmax,
            seed,
            restarts,
            emit_tangent,
        } => {
            check_positive("kmax", *kmax)?;
            check_positive("restarts", *restarts)?;
            let fam = match (family.as_str(), input) {
                ("custom-linear", Some(path)) => {
                    let v = read_subspace(path)?;
                    if v.n() != *dim {
                        return invalid(format!(
                            "--dim {dim} does not match subspace n = {}",
                            v.n()
                        ));
                    }
                    ConstraintFamily::custom_linear(v)
                }
                (_, Some(_)) => return invalid("--input is only used with --family custom-linear"),
                (name, None) => builtin_family(name, *dim)?,
            };
            let mut config = json!({
                "family": family,
                "dim": dim,
                "input": input.as_deref().map(path_str),
            });
            if *emit_tangent {
                let v = tangent_space(&fam, &fam.base_point(), tol)?;
                config["emit_tangent"] = json!(true);
                return Ok((
                    config,
                    serde_json::to_value(v.to_json()).expect("serializable"),
                ));
            }
            let search = SearchOptions::with_seed(*seed, *restarts);
            let report = sample_analysis(&fam, *samples, *kmax, *seed, &search, tol)?;
            config["samples"] = json!(samples);
            config["k_max"] = json!(kmax);
            config["seed"] = json!(seed);
            config["restarts"] = json!(restarts);
            config["max_evals"] = json!(search.max_evals);
            Ok((config, serde_json::to_value(report).expect("serializable")))
        }
        Command::Verify {
            input,
            poly,
            samples,
            radius,
            tol: vtol,
            seed,
        } => {
            check_positive("samples", *samples)?;
            if !(*radius > 0.0 && radius.is_finite()) {
                return invalid("--radius must be positive");
            }
            let v = read_subspace(input)?;
            let pj: PolyJson = read_json(poly)?;
            let f = PolyMap::try_from(&pj)?;
            let report = verify_membership(&f, &v, *samples, *radius, *vtol, *seed)?;
            let config = json!({
                "input": path_str(input),
                "poly": path_str(poly),
                "samples": samples,
                "radius": radius,
                "tol": vtol,
                "seed": seed,
            });
            Ok((config, serde_json::to_value(report).expect("serializable")))
        }
        Command::Jet {
            input_augmented,
            matrix,
            degree,
        } => {
            check_positive("degree", *degree)?;
            let aj: AugmentedJson = read_json(input_augmented)?;
            let aug = AugmentedSubspace::try_from(&aj)?;
            let rows: Vec<Vec<f64>> = read_json(matrix)?;
            let a: DMatrix<f64> = linalg::matrix_from_rows(&rows)
                .ok_or_else(|| Failure::Input("matrix rows are ragged or empty".into()))?;
            let jet = augmented_jet_space(&aug, &a, *degree, tol)?;
            let config = json!({
                "input_augmented": path_str(input_augmented),
                "matrix": path_str(matrix),
                "degree": degree,
            });
            let result = json!({
                "augmented": { "n": aug.n(), "m": aug.m(), "dim": aug.dim() },
                "consistent": jet.consistent,
                "dimension": jet.dimension,
                "residual": jet.residual,
                "particular": jet.particular.as_ref().map(PolyJson::from),
                "basis": jet.basis.iter().map(PolyJson::from).collect::<Vec<_>>(),
            });
            Ok((config, result))
        }
    }
}

fn subcommand_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Chain { .. } => "chain",
        Command::Detect { .. } => "detect",
        Command::Classify { .. } => "classify",
        Command::Polysolve { .. } => "polysolve",
        Command::Manifold { .. } => "manifold",
        Command::Verify { .. } => "verify",
        Command::Jet { .. } => "jet",
    }
}

fn run(cli: &Cli) -> Outcome<String> {
    let tol = tolerances(&cli.common)?;
    let (mut config, result) = execute(&cli.command, &tol)?;
    // an emitted tangent space is a plain subspace file
    if let Command::Manifold {
        emit_tangent: true, ..
    } = cli.command
    {
        let text = serde_json::to_string_pretty(&result).expect("serializable");
        return Ok(text + "\n");
    }
    config["subcommand"] = json!(subcommand_name(&cli.command));
    config["format"] = json!(cli.common.format);
    config["tolerances"] = serde_json::to_value(tol).expect("serializable");
    let report = json!({ "config": config, "result": result });
    Ok(match cli.common.format {
        Format::Json => serde_json::to_string_pretty(&report).expect("serializable") + "\n",
        Format::Table => table::render(&report),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(text) => {
            match &cli.common.out {
                Some(path) => {
                    if let Err(e) = fs::write(path, text) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return ExitCode::from(1);
                    }
                }
                None => print!("{text}"),
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Inconsistent(msg)) => {
            eprintln!("numerical inconsistency: {msg}");
            ExitCode::from(2)
        }
    }
}
