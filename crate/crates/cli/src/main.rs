use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use visco_surrogate::analytic::Branch;
use visco_surrogate::continuum::DeformationState;
use visco_surrogate::gpr::{FitOptions, DEFAULT_ALPHA};
use visco_surrogate::harness::{
    evaluate_dataset, generate_dataset, run_experiment, size_sweep, sweep_csv, ErrorReport, ExperimentId,
    ExperimentSpec,
};
use visco_surrogate::io::{read_dataset_file, read_states, write_atomic, write_dataset};
use visco_surrogate::surrogate::{train_branch, train_classical, BranchDataset, TrainedModel};

/// Gaussian-process surrogates for visco-hyperelastic stress response.
#[derive(Parser)]
#[command(name = "visco", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the training dataset of an experiment as CSV.
    Generate {
        #[command(flatten)]
        source: SpecSource,
        /// Output CSV (stdout when omitted).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Fit a surrogate or classical model to a dataset CSV.
    Train(TrainArgs),
    /// Predict stresses for the states in a CSV.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// CSV with F11..F33 and Fdot11..Fdot33 columns.
        #[arg(long)]
        states: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Compare a trained model with a labelled dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Write the full evaluation as JSON.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run an experiment described by a JSON config.
    Run {
        #[command(flatten)]
        source: SpecSource,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Repeat an experiment over several training sizes.
    Sweep {
        #[command(flatten)]
        source: SpecSource,
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated training sizes (default: the experiment's ladder).
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
    },
    /// Run one of the three reference experiments with default settings.
    Reproduce {
        /// hydrostatic, quasistatic or dynamic.
        experiment: ExperimentId,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SpecSource {
    /// Reference experiment with default settings.
    #[arg(long)]
    experiment: Option<ExperimentId>,
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl SpecSource {
    fn load(&self) -> Result<ExperimentSpec> {
        match (&self.experiment, &self.config) {
            (Some(id), _) => Ok(ExperimentSpec::default_for(*id)),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
            }
            (None, None) => bail!("either --experiment or --config is required"),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Seed for the hyperparameter start points.
    #[arg(long)]
    seed: Option<u64>,
    /// Report directory; overrides the config value.
    #[arg(long, env = "VISCO_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
}

impl RunArgs {
    fn apply(&self, spec: &mut ExperimentSpec) {
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if let Some(dir) = &self.output_dir {
            spec.output_dir = Some(dir.clone());
        }
        if spec.output_dir.is_none() {
            spec.output_dir = Some(PathBuf::from("visco-output").join(spec.experiment.name()));
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Stress branch of the data (vol, h_iso or v_iso); required for surrogates.
    #[arg(long)]
    branch: Option<Branch>,
    /// Fit the black-box strain-to-stress baseline instead of a surrogate.
    #[arg(long)]
    classical: bool,
    /// Feed strain rates to the classical baseline (default: when the data has rates).
    #[arg(long)]
    rate_dependent: Option<bool>,
    /// States at which the viscous surrogate must dissipate (default: training states).
    #[arg(long)]
    constraints: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, short)]
    out: PathBuf,
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { source, out } => {
            let data = generate_dataset(&source.load()?)?;
            let mut buf = Vec::new();
            write_dataset(&mut buf, &data.records)?;
            emit(out.as_deref(), &buf)
        }
        Command::Train(args) => train(args),
        Command::Predict { model, states, out } => {
            let model = load_model(&model)?;
            let states = read_states(File::open(&states).with_context(|| format!("opening {}", states.display()))?)?;
            let records: Vec<_> = states.iter().map(|s| (*s, model.predict_stress(s))).collect();
            let mut buf = Vec::new();
            write_dataset(&mut buf, &records)?;
            emit(out.as_deref(), &buf)
        }
        Command::Evaluate { model, data, out } => {
            let model = load_model(&model)?;
            let data = read_dataset_file(&data)?;
            let ev = evaluate_dataset(&model, &data);
            println!("points            {}", ev.n_points);
            println!("excluded (~0)     {}", ev.excluded_near_zero);
            println!("mean err [%]      {}", opt(ev.mean_err));
            println!("max err [%]       {}", opt(ev.max_err));
            if ev.min_dissipation.is_some() {
                println!("min dissipation   {}", opt(ev.min_dissipation));
            }
            if let Some(path) = out {
                write_atomic(&path, serde_json::to_string_pretty(&ev)?.as_bytes())?;
            }
            Ok(())
        }
        Command::Run { source, run } => {
            let mut spec = source.load()?;
            run.apply(&mut spec);
            let report = run_experiment(&spec)?;
            print_report(&report);
            println!("report written to {}", spec.output_dir.as_ref().unwrap().display());
            Ok(())
        }
        Command::Sweep { source, run, sizes } => {
            let mut spec = source.load()?;
            run.apply(&mut spec);
            let sizes = if sizes.is_empty() {
                spec.experiment.default_sizes()
            } else {
                sizes
            };
            let rows = size_sweep(&spec, &sizes)?;
            print!("{}", String::from_utf8(sweep_csv(&rows)?)?);
            Ok(())
        }
        Command::Reproduce { experiment, run } => {
            let mut spec = ExperimentSpec::default_for(experiment);
            run.apply(&mut spec);
            let report = run_experiment(&spec)?;
            print_report(&report);
            println!("report written to {}", spec.output_dir.as_ref().unwrap().display());
            Ok(())
        }
    }
}

fn train(args: TrainArgs) -> Result<()> {
    let records = read_dataset_file(&args.data).with_context(|| format!("reading {}", args.data.display()))?;
    let has_rates = records.iter().any(|(s, _)| !s.is_rate_free());
    let opts = FitOptions {
        alpha: args.alpha,
        seed: args.seed,
        restarts: args.restarts,
        ..FitOptions::default()
    };
    let model = if args.classical {
        let branch = args.branch.unwrap_or(if has_rates { Branch::VIso } else { Branch::HIso });
        let data = BranchDataset::new(branch, records)?;
        TrainedModel::Classical(train_classical(&data, args.rate_dependent.unwrap_or(has_rates), &opts)?)
    } else {
        let Some(branch) = args.branch else {
            bail!("--branch is required when training a surrogate");
        };
        let data = BranchDataset::new(branch, records)?;
        let constraints: Option<Vec<DeformationState>> = match &args.constraints {
            Some(p) => Some(read_states(File::open(p).with_context(|| format!("opening {}", p.display()))?)?),
            None => None,
        };
        let (_, model) = train_branch(&data, &opts, constraints.as_deref())?;
        TrainedModel::Surrogate(model)
    };
    write_atomic(&args.out, model.to_json()?.as_bytes())?;
    let diag = match &model {
        TrainedModel::Surrogate(m) => m.gp.diagnostics(),
        TrainedModel::Classical(m) => m.gp.diagnostics(),
    };
    eprintln!(
        "trained on {} records; log likelihood {:.6} (start {:.6}), converged: {}",
        diag_records(&model),
        diag.log_likelihood,
        diag.initial_log_likelihood,
        diag.converged
    );
    Ok(())
}

fn diag_records(model: &TrainedModel) -> usize {
    match model {
        TrainedModel::Surrogate(m) => m.provenance.n_records,
        TrainedModel::Classical(m) => m.provenance.n_records,
    }
}

fn load_model(path: &Path) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    TrainedModel::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

fn print_report(report: &ErrorReport) {
    println!(
        "experiment {} ({} branch, {} training records)",
        report.experiment.name(),
        report.branch,
        report.training_size
    );
    if let Some(m) = &report.conventional {
        println!("calibrated conventional model: {}", serde_json::to_string(m).unwrap_or_default());
    }
    println!(
        "{:<14}{:>12}{:>12}{:>12}{:>12}",
        "model", "train [%]", "same [%]", "cross [%]", "test [%]"
    );
    for m in &report.models {
        let c = m.class_means;
        println!(
            "{:<14}{:>12}{:>12}{:>12}{:>12}",
            m.name,
            opt(c.training),
            opt(c.same_mode),
            opt(c.cross_mode),
            opt(c.testing)
        );
    }
    for m in &report.models {
        for r in &m.regions {
            let mut notes = Vec::new();
            if let Some(d) = r.min_dissipation {
                notes.push(format!("min dissipation {d:.4e}"));
            }
            if r.shear12_identically_zero == Some(true) {
                notes.push("S12 identically zero".into());
            }
            if r.excluded_near_zero > 0 {
                notes.push(format!("{} near-zero excluded", r.excluded_near_zero));
            }
            println!(
                "  {:<13}{:<13} mean {:>10}  max {:>10}  {}",
                m.name,
                r.name,
                opt(r.mean_err),
                opt(r.max_err),
                notes.join(", ")
            );
        }
    }
}
