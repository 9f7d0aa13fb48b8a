use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use nonlocal_h::block_schur::{
    block_inverse, inversion_duality, lu_factorization_residual, random_coercive, random_split, BlockOperator,
};
use nonlocal_h::coeff::{
    admissibility_check, convolution_coefficient, layered_coefficient, multiplication_coefficient, random_coercive as random_coefficient,
    Coefficient, ConvolutionKernel, TensorField, DEFAULT_COND_CAP,
};
use nonlocal_h::derham::{hodge_nullity, GridComplex, VoxelDomain};
use nonlocal_h::electro::{solve_electrostatics, ElectrostaticData, Formulation};
use nonlocal_h::lab::config::{DataKind, Seeds};
use nonlocal_h::lab::scenarios::scenario_data;
use nonlocal_h::lab::{self, ScenarioConfig, Status, Table, Verdict};
use nonlocal_h::linalg;
use nonlocal_h::operator::{rank, HilbertSpace, DEFAULT_RANK_TOL, DENSE_LIMIT};
use nonlocal_h::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Electrostatics on voxel domains and homogenisation experiments. Every command prints CSV
/// and exits with status 0 iff all verdicts pass.
#[derive(Parser)]
#[command(name = "nlh", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// DOF counts, exactness and harmonic-field dimension of a domain
    ComplexInfo { domain: String },
    /// Checks invertibility of a coefficient and of its two compressions
    Admissibility {
        domain: String,
        /// identity | diag:a,b,c | layered:minus,plus,n | conv:l1,n | random:alpha,seed | tensor JSON path
        coeff: String,
        #[arg(long, default_value_t = DEFAULT_COND_CAP)]
        cap: f64,
    },
    /// Solves the electrostatic problem for generated data
    Solve {
        domain: String,
        coeff: String,
        /// zero | full:SEED | potential:SEED
        data: String,
        /// writes the field as a JSON array (edge dofs ordered by direction, then z, y, x)
        #[arg(long)]
        field_out: Option<PathBuf>,
        #[arg(long, default_value = "pid")]
        formulation: String,
    },
    /// Runs a homogenisation scenario
    Homogenise { config: PathBuf },
    /// Div-curl pairings of a scenario
    Divcurl { config: PathBuf },
    /// Strong convergence with the coercivity sandwich
    Compactness { config: PathBuf },
    /// Schur distances of an interleaved sequence under two splits
    Incomparable { config: PathBuf },
    /// Block factorization and inversion identities on random operators
    SchurIdentities {
        seed: u64,
        #[arg(long, default_value_t = 20)]
        count: usize,
    },
}

fn parse_numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number {t:?}")))).collect()
}

fn coefficient(complex: &Arc<GridComplex>, spec: &str) -> Result<Coefficient> {
    let (kind, args) = spec.split_once(':').unwrap_or((spec, ""));
    let nums = || parse_numbers(args);
    let need = |v: &[f64], k: usize| -> Result<()> {
        if v.len() == k {
            Ok(())
        } else {
            Err(Error::Config(format!("coefficient {spec:?} needs {k} parameters")))
        }
    };
    let shape = complex.domain().shape();
    match kind {
        "identity" => Coefficient::identity(complex),
        "diag" => {
            let v = nums()?;
            need(&v, 3)?;
            multiplication_coefficient(complex, &TensorField::diagonal(shape, [v[0], v[1], v[2]]), v[0].min(v[1]).min(v[2]))
        }
        "layered" => {
            let v = nums()?;
            need(&v, 3)?;
            layered_coefficient(complex, v[0], v[1], v[2] as usize)
        }
        "conv" => {
            let v = nums()?;
            need(&v, 2)?;
            let k = ConvolutionKernel::gaussian_with_l1(complex.h(), 2.0, v[0]);
            convolution_coefficient(complex, &k, v[1] as usize)
        }
        "random" => {
            let v = nums()?;
            need(&v, 2)?;
            random_coefficient(complex, v[0], v[1] as u64)
        }
        _ if Path::new(spec).is_file() => {
            let field = TensorField::from_json(&std::fs::read_to_string(spec)?, shape)?;
            lab::scenarios::SequenceFamily::Custom(field).limit(complex)
        }
        _ => Err(Error::Config(format!("unknown coefficient {spec:?}"))),
    }
}

fn data(complex: &GridComplex, spec: &str, formulation: Formulation) -> Result<ElectrostaticData> {
    let (kind, seed) = spec.split_once(':').unwrap_or((spec, "1"));
    let seed: u64 = seed.parse().map_err(|_| Error::Config(format!("bad seed in {spec:?}")))?;
    let seeds = Seeds { f: seed, g: seed + 1, x: seed + 2, test: seed + 3 };
    let mut d = match kind {
        "zero" => ElectrostaticData::zero(complex, formulation),
        "full" => scenario_data(complex, seeds, DataKind::Full)?,
        "potential" => scenario_data(complex, seeds, DataKind::Potential)?,
        _ => return Err(Error::Config(format!("unknown data {spec:?}"))),
    };
    d.formulation = formulation;
    Ok(d)
}

fn key_value(rows: &[(&str, String)], verdicts: Vec<Verdict>) -> Table {
    let mut t = Table::new(vec![]);
    for (k, v) in rows {
        t.note(k, v);
    }
    t.verdicts = verdicts;
    t
}

fn complex_info(domain: &str) -> Result<Table> {
    let c = GridComplex::build(VoxelDomain::load(domain)?)?;
    let product = linalg::matmul(c.ccirc_csc(), c.g_csc());
    let defect = linalg::triplets(&product).iter().fold(0.0f64, |m, t| m.max(t.val.abs()));
    let hd = c.harmonic_dirichlet()?.basis.dim();
    let nullity = hodge_nullity(&c)?;
    let cavities = c.domain().cavity_count();
    let mut rows = vec![
        ("shape", format!("{:?}", c.domain().shape())),
        ("h", format!("{}", c.h())),
        ("n0", c.n0().to_string()),
        ("n1", c.n1().to_string()),
        ("n2", c.n2().to_string()),
        ("exactness_defect", format!("{defect:e}")),
        ("dim_harmonic", hd.to_string()),
        ("hodge_nullity", nullity.to_string()),
        ("cavities", cavities.to_string()),
    ];
    let mut verdicts = vec![
        Verdict::new("exactness", Status::from_bool(defect == 0.0)),
        Verdict::new("harmonic_count", Status::from_bool(hd == nullity && hd == cavities)),
    ];
    if c.n1() <= DENSE_LIMIT {
        let rg = rank(c.g(), DEFAULT_RANK_TOL)?;
        let rc = rank(c.ccirc(), DEFAULT_RANK_TOL)?;
        rows.push(("rank_g", rg.to_string()));
        rows.push(("rank_ccirc", rc.to_string()));
        verdicts.push(Verdict::new("rank_sum", Status::from_bool(rg + rc + hd == c.n1())));
    }
    Ok(key_value(&rows, verdicts))
}

fn admissibility(domain: &str, spec: &str, cap: f64) -> Result<Table> {
    let c = GridComplex::build(VoxelDomain::load(domain)?)?;
    let eps = coefficient(&c, spec)?;
    let r = admissibility_check(&eps, cap);
    let rows = [
        ("method", r.method.to_string()),
        ("cond_eps", format!("{:.6e}", r.conds[0])),
        ("cond_gradients", format!("{:.6e}", r.conds[1])),
        ("cond_curls", format!("{:.6e}", r.conds[2])),
        ("alpha", format!("{:.6e}", r.alpha)),
        ("beta", format!("{:.6e}", r.beta)),
    ];
    let verdicts = vec![
        Verdict::new("invertible", Status::from_bool(r.a1_ok)),
        Verdict::new("gradients", Status::from_bool(r.a2_ok)),
        Verdict::new("curls", Status::from_bool(r.a3_ok)),
    ];
    Ok(key_value(&rows, verdicts))
}

fn solve(domain: &str, spec: &str, data_spec: &str, formulation: &str, out: Option<&Path>) -> Result<Table> {
    let formulation = match formulation {
        "primal" => Formulation::Primal,
        "dual" => Formulation::Dual,
        "pid" => Formulation::PiDNormalized,
        f => return Err(Error::Config(format!("unknown formulation {f:?} (primal | dual | pid)"))),
    };
    let c = GridComplex::build(VoxelDomain::load(domain)?)?;
    let eps = coefficient(&c, spec)?;
    let d = data(&c, data_spec, formulation)?;
    let r = solve_electrostatics(&eps, &d)?;
    if let Some(path) = out {
        let v: Vec<f64> = r.field.iter().copied().collect();
        std::fs::write(path, serde_json::to_string(&v).expect("serializable"))?;
    }
    let w = c.h().powi(3);
    let rows = [
        ("n1", c.n1().to_string()),
        ("field_norm", format!("{:.9e}", (w * linalg::dot(&r.field, &r.field)).sqrt())),
        ("energy", format!("{:.9e}", w * linalg::dot(&eps.apply(&r.field), &r.field))),
        ("res_div", format!("{:.3e}", r.residuals.div)),
        ("res_curl", format!("{:.3e}", r.residuals.curl)),
        ("res_harm", format!("{:.3e}", r.residuals.harmonic)),
    ];
    Ok(key_value(&rows, vec![Verdict::new("residuals", Status::from_bool(r.residuals.max() <= 1e-9))]))
}

fn schur_identities(seed: u64, count: usize) -> Result<Table> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Table::new(vec!["n", "dim", "d0", "lu", "inverse", "duality"]);
    for i in 0..count {
        let n = rng.random_range(10..=100usize);
        let d0 = rng.random_range(1..n);
        let mass: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let space = HilbertSpace::new(mass)?;
        let a = random_coercive(&space, 0.5, &mut rng);
        let b = BlockOperator::new(&a, random_split(&space, d0, &mut rng)?)?;
        let inv = block_inverse(&b)?.to_dense();
        let prod = &inv * a.to_dense() - faer::Mat::<f64>::identity(n, n);
        t.rows.push(vec![
            i as f64,
            n as f64,
            d0 as f64,
            lu_factorization_residual(&b)?,
            linalg::spectral_norm(&prod),
            inversion_duality(&b)?.max(),
        ]);
    }
    let ok = |name: &str, tol: f64| t.column(name).iter().all(|v| *v <= tol);
    let verdicts = vec![
        Verdict::new("lu", Status::from_bool(ok("lu", 1e-10))),
        Verdict::new("inverse", Status::from_bool(ok("inverse", 1e-10))),
        Verdict::new("duality", Status::from_bool(ok("duality", 1e-9))),
    ];
    t.verdicts = verdicts;
    Ok(t)
}

fn emit(table: &Table, output: Option<&str>) -> Result<()> {
    let csv = table.to_csv();
    print!("{csv}");
    if let Some(path) = output {
        std::fs::write(path, &csv)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let (table, output) = match cli.command {
        Command::ComplexInfo { domain } => (complex_info(&domain)?, None),
        Command::Admissibility { domain, coeff, cap } => (admissibility(&domain, &coeff, cap)?, None),
        Command::Solve { domain, coeff, data, field_out, formulation } => {
            (solve(&domain, &coeff, &data, &formulation, field_out.as_deref())?, None)
        }
        Command::Homogenise { config } => {
            let cfg = ScenarioConfig::load(&config)?;
            (lab::run_homogenisation(&cfg)?, cfg.output)
        }
        Command::Divcurl { config } => {
            let cfg = ScenarioConfig::load(&config)?;
            (lab::run_divcurl(&cfg)?, cfg.output)
        }
        Command::Compactness { config } => {
            let cfg = ScenarioConfig::load(&config)?;
            (lab::compactness_demo(&cfg)?, cfg.output)
        }
        Command::Incomparable { config } => {
            let cfg = ScenarioConfig::load(&config)?;
            (lab::incomparable_demo(&cfg)?, cfg.output)
        }
        Command::SchurIdentities { seed, count } => (schur_identities(seed, count)?, None),
    };
    emit(&table, output.as_deref())?;
    Ok(table.all_pass())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
