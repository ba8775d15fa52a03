use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levsketch::experiments::{oracle_params, run_bench, run_compare, run_concentration, BenchConfig, CompareConfig};
use levsketch::io::{read_matrix, read_sketch, write_matrix, write_report, write_sketch};
use levsketch::oracle::{analyze, Family, GeneratorSpec, DEFAULT_RANK_TOL};
use levsketch::rng::seeded;
use levsketch::{qisls_all, qisvd, Error, MatrixSampleStore, ScoreMode};

#[derive(Parser, Debug)]
#[command(name = "levsketch", version, about = "Sampling-based leverage score estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic test matrix.
    Gen(GenArgs),
    /// Approximate leverage scores over several trials and compare with exact ones.
    Compare(CompareArgs),
    /// Build one sketch and save it.
    Sketch(SketchArgs),
    /// Score rows from a saved sketch.
    Score(ScoreArgs),
    /// Monte Carlo check of the two sampling concentration bounds.
    Concentration(ConcentrationArgs),
    /// Time the scoring pass and count store queries across matrix sizes.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    family: Family,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    /// Number of zeroed columns (example1).
    #[arg(long, default_value_t = 0)]
    zero: usize,
    /// Rank (example2).
    #[arg(long, default_value_t = 1)]
    r: usize,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    /// Lower end of the largest singular value's range (example2).
    #[arg(long, default_value_t = 1)]
    a: u64,
    /// Upper end of the largest singular value's range (example2).
    #[arg(long, default_value_t = 1000)]
    b: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct ParamArgs {
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Practical sample count; the theoretical value is used when absent.
    #[arg(long)]
    p: Option<u64>,
    /// Smaller admissible theta.
    #[arg(long)]
    theta: Option<f64>,
    /// Practical precision for the sampled inner-product estimator.
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long, default_value = "exact-dot")]
    mode: ScoreMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// 1-based row indices, comma separated.
    #[arg(long, value_delimiter = ',')]
    rows: Option<Vec<usize>>,
}

impl ParamArgs {
    fn rows0(&self) -> Result<Option<Vec<usize>>, Error> {
        self.rows
            .as_ref()
            .map(|rows| {
                rows.iter()
                    .map(|&i| {
                        i.checked_sub(1)
                            .ok_or_else(|| Error::InvalidParameter("rows are 1-based".into()))
                    })
                    .collect()
            })
            .transpose()
    }

    fn compare_config(&self, trials: usize) -> Result<CompareConfig, Error> {
        Ok(CompareConfig {
            epsilon: self.epsilon,
            delta: self.delta,
            k: self.k,
            p: self.p,
            theta: self.theta,
            xi: self.xi,
            mode: self.mode,
            trials,
            seed: self.seed,
            rows: self.rows0()?,
            rank_tol: DEFAULT_RANK_TOL,
        })
    }
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(short = 'i', long = "input")]
    input: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct SketchArgs {
    #[arg(short = 'i', long = "input")]
    input: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(short = 'i', long = "input")]
    input: PathBuf,
    #[arg(long)]
    sketch: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct ConcentrationArgs {
    #[arg(short = 'i', long = "input")]
    input: PathBuf,
    #[arg(long)]
    theta: f64,
    #[arg(long)]
    p: u64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Row counts to sweep, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1000,4000,16000")]
    m: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Rank of the generated matrices.
    #[arg(long, default_value_t = 30)]
    r: usize,
    #[arg(long, default_value_t = 60)]
    p: u64,
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long, default_value = "exact-dot")]
    mode: ScoreMode,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long, default_value_t = 8)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rows scored per trial.
    #[arg(long, default_value_t = 256)]
    score_rows: usize,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    Ok(BufWriter::new(File::create(path)?))
}

fn distinct(input: &Path, output: &Path) -> Result<(), Error> {
    if input == output {
        return Err(Error::InvalidParameter("input and output paths must differ".into()));
    }
    Ok(())
}

fn load_matrix(path: &Path) -> Result<levsketch::DenseMatrix, Error> {
    Ok(read_matrix(BufReader::new(File::open(path)?))?.matrix)
}

fn cmd_gen(args: GenArgs) -> Result<(), Error> {
    let spec = GeneratorSpec {
        family: args.family,
        m: args.m,
        n: args.n,
        n_zero: args.zero,
        r: args.r,
        kappa: args.kappa,
        a: args.a,
        b: args.b,
        seed: args.seed,
    };
    let a = spec.generate()?;
    let exact = analyze(&a, DEFAULT_RANK_TOL)?;
    let mut meta = spec.metadata();
    meta.push(("rank".into(), exact.rank.to_string()));
    meta.push(("frob_norm".into(), exact.frob_norm.to_string()));
    meta.push(("spectral_norm".into(), exact.spectral_norm.to_string()));
    meta.push(("measured_kappa".into(), exact.kappa.to_string()));
    let mut w = create(&args.output)?;
    write_matrix(&mut w, &a, &meta)?;
    w.flush()?;
    println!(
        "rank={} frob_norm={:.6} kappa={:.6}",
        exact.rank, exact.frob_norm, exact.kappa
    );
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<(), Error> {
    distinct(&args.input, &args.output)?;
    let a = load_matrix(&args.input)?;
    let cfg = args.params.compare_config(args.trials)?;
    let out = run_compare(&a, &cfg)?;
    let summary = out.report.error_summary().expect("exact scores attached");
    let extra = vec![
        ("trials".to_string(), args.trials.to_string()),
        ("oracle_assisted".to_string(), "true".to_string()),
        ("rank".to_string(), out.exact.rank.to_string()),
    ];
    let mut w = create(&args.output)?;
    write_report(&mut w, &out.report, &extra)?;
    w.flush()?;
    let (row, score) = out.report.coherence();
    println!(
        "rows={} max={:.6e} mean={:.6e} median={:.6e} coherence_row={} coherence={:.6} coherence_agree={} \
         (oracle-assisted: norm={:.6}, kappa={:.6}, rank={})",
        out.report.rows.len(),
        summary.max,
        summary.mean,
        summary.median,
        row + 1,
        score,
        out.coherence_agrees(),
        out.exact.spectral_norm,
        out.exact.kappa,
        out.exact.rank
    );
    Ok(())
}

fn cmd_sketch(args: SketchArgs) -> Result<(), Error> {
    distinct(&args.input, &args.output)?;
    let a = load_matrix(&args.input)?;
    let cfg = args.params.compare_config(1)?;
    let params = oracle_params(&analyze(&a, DEFAULT_RANK_TOL)?, &cfg)?;
    let store = MatrixSampleStore::from_dense(&a)?;
    let sketch = qisvd(&store, &params, &mut seeded(cfg.seed))?;
    let mut w = create(&args.output)?;
    write_sketch(&mut w, &sketch)?;
    w.flush()?;
    println!(
        "p={} distinct_cols={} distinct_rows={} k={}",
        sketch.p,
        sketch.cols.len(),
        sketch.rows.len(),
        sketch.k()
    );
    Ok(())
}

fn cmd_score(args: ScoreArgs) -> Result<(), Error> {
    distinct(&args.input, &args.output)?;
    let a = load_matrix(&args.input)?;
    let sketch = read_sketch(BufReader::new(File::open(&args.sketch)?))?;
    let cfg = args.params.compare_config(1)?;
    let exact = analyze(&a, DEFAULT_RANK_TOL)?;
    let params = oracle_params(&exact, &cfg)?;
    let store = MatrixSampleStore::from_dense(&a)?;
    if sketch.cols.iter().any(|c| c.index >= store.cols()) || sketch.rows.iter().any(|r| r.index >= store.rows()) {
        return Err(Error::DimensionMismatch("sketch does not match the matrix".into()));
    }
    let mut report = qisls_all(
        &store,
        &sketch,
        cfg.rows.as_deref(),
        cfg.mode,
        &params,
        &mut seeded(cfg.seed),
    )?
    .with_exact(&exact.scores);
    report.seed = Some(cfg.seed);
    let mut w = create(&args.output)?;
    write_report(&mut w, &report, &[])?;
    w.flush()?;
    let s = report.error_summary().expect("exact scores attached");
    println!(
        "rows={} max={:.6e} mean={:.6e} median={:.6e}",
        report.rows.len(),
        s.max,
        s.mean,
        s.median
    );
    Ok(())
}

fn cmd_concentration(args: ConcentrationArgs) -> Result<(), Error> {
    distinct(&args.input, &args.output)?;
    let a = load_matrix(&args.input)?;
    let stats = run_concentration(&a, args.theta, args.p, args.trials, args.seed)?;
    let mut w = create(&args.output)?;
    writeln!(
        w,
        "# theta={} p={} trials={} seed={}",
        args.theta, args.p, args.trials, args.seed
    )?;
    writeln!(w, "# bound={}", stats.bound())?;
    writeln!(w, "# outer_exceedance={}", stats.outer_exceedance())?;
    writeln!(w, "# inner_exceedance={}", stats.inner_exceedance())?;
    writeln!(w, "trial,outer,inner")?;
    for (t, trial) in stats.trials.iter().enumerate() {
        writeln!(w, "{},{},{}", t + 1, trial.outer, trial.inner)?;
    }
    w.flush()?;
    println!(
        "bound={:.4} outer_exceedance={:.4} inner_exceedance={:.4}",
        stats.bound(),
        stats.outer_exceedance(),
        stats.inner_exceedance()
    );
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), Error> {
    if args.r == 0 || args.r > args.n {
        return Err(Error::InvalidParameter(format!("r = {} must be in 1..=n", args.r)));
    }
    let cfg = BenchConfig {
        k: args.k,
        p: args.p,
        mode: args.mode,
        xi: args.xi,
        trials: args.trials,
        seed: args.seed,
        score_rows: args.score_rows,
    };
    let mut rows = Vec::new();
    for &m in &args.m {
        let spec = GeneratorSpec {
            family: Family::Example1,
            m,
            n: args.n,
            n_zero: args.n - args.r,
            r: args.r,
            kappa: 1.0,
            a: 1,
            b: 1,
            seed: args.seed,
        };
        rows.push(run_bench(&spec.generate()?, &cfg)?);
    }
    let mut w = create(&args.output)?;
    writeln!(w, "m,n,queries,wall_ms")?;
    for r in &rows {
        writeln!(w, "{},{},{},{:.3}", r.m, r.n, r.queries, r.wall_ms)?;
        println!("m={} queries_per_score={:.2} wall_ms={:.3}", r.m, r.queries, r.wall_ms);
    }
    w.flush()?;
    Ok(())
}

fn configure_threads() -> Result<(), Error> {
    if let Ok(v) = std::env::var("LEVSKETCH_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::InvalidParameter(format!("LEVSKETCH_THREADS={v:?} is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Sketch(a) => cmd_sketch(a),
        Command::Score(a) => cmd_score(a),
        Command::Concentration(a) => cmd_concentration(a),
        Command::Bench(a) => cmd_bench(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
