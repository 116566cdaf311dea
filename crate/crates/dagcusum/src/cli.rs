//! The `dagcusum` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dagcusum_core::signal::SimulatedBits;
use dagcusum_core::topology::build_laplacian_weights_with;
use dagcusum_core::{validate_condition1, BitSource, CertificateMode, FalseAlarmCertificate, RunKind};

use crate::config::{redirect_output, ConfigFile, Overrides, WeightsChoice};
use crate::csv_io::{results_to_string, write_results};
use crate::error::{HarnessError, Result};
use crate::experiment::run_experiment;
use crate::topology_file::load_topology;

#[derive(Debug, Parser)]
#[command(name = "dagcusum", version, about = "Quickest detection of data-injection attacks on one-bit sensor networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte Carlo experiment and write the results as CSV.
    Simulate(SimulateArgs),
    /// Print the false-alarm certificate for a threshold target.
    Bounds(BoundsArgs),
    /// Check a network file and the weights built from it.
    TopologyCheck(TopologyArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV (defaults to the config's `experiment.output`, else stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    pub parallel: Option<usize>,
    /// Secure phase of 5000 samples and 2000 replications.
    #[arg(long)]
    pub paper_scale: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Toml,
    Json,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["q", "from_config"]))]
pub struct BoundsArgs {
    /// Bit-0 probability q(theta).
    #[arg(long)]
    pub q: Option<f64>,
    /// Take q, M and N from an experiment config.
    #[arg(long, value_name = "FILE")]
    pub from_config: Option<PathBuf>,
    #[arg(long)]
    pub kappa: f64,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Estimate q from simulated secure-phase bits (needs --from-config).
    #[arg(long, requires = "from_config")]
    pub deployment: bool,
    #[arg(long, value_enum, default_value = "text")]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct TopologyArgs {
    #[arg(long)]
    pub topology: PathBuf,
    #[arg(long, value_enum, default_value = "squared-spectrum")]
    pub weights: WeightsArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightsArg {
    SquaredSpectrum,
    BestConstant,
}

impl From<WeightsArg> for WeightsChoice {
    fn from(w: WeightsArg) -> Self {
        match w {
            WeightsArg::SquaredSpectrum => WeightsChoice::SquaredSpectrum,
            WeightsArg::BestConstant => WeightsChoice::BestConstant,
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(&a, out),
        Command::Bounds(a) => bounds(&a, out),
        Command::TopologyCheck(a) => topology_check(&a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() });
            let _ = writeln!(err, "{line}");
            e.exit_code()
        }
    }
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = ConfigFile::load(&a.config)?;
    cfg.apply(Overrides { seed: a.seed, paper_scale: a.paper_scale });
    let mut plan = cfg.resolve(&base_dir(&a.config))?;
    if let Some(p) = a.out.as_ref() {
        plan.output = Some(p.clone());
    }
    if a.parallel == Some(0) {
        return Err(HarnessError::config("parallel", "must be at least 1"));
    }
    log::info!(
        "simulating {} replications, N = {}, M = {}, horizon {}",
        plan.replications,
        plan.spec.topology.n_sensors(),
        plan.spec.scenario.secure_len,
        plan.spec.horizon
    );
    let outcome = run_experiment(&plan, a.parallel)?;
    if outcome.degenerate_events > 0 {
        log::warn!("{} degenerate steps held a distributed statistic", outcome.degenerate_events);
    }
    match plan.output {
        Some(path) => {
            let path = redirect_output(&path);
            write_results(&path, &outcome.results)?;
            log::info!("wrote {}", path.display());
        }
        None => out.write_all(results_to_string(&outcome.results).as_bytes()).map_err(|e| HarnessError::io("<stdout>", e))?,
    }
    Ok(())
}

fn bounds(a: &BoundsArgs, out: &mut dyn Write) -> Result<()> {
    let cert = match (&a.from_config, a.q) {
        (Some(path), _) => {
            let cfg = ConfigFile::load(path)?;
            let topo = cfg.topology(&base_dir(path))?;
            let m = a.m.unwrap_or(cfg.scenario.secure_len);
            let n = a.n.unwrap_or(topo.n_sensors());
            if a.deployment {
                let plan = cfg.resolve(&base_dir(path))?;
                let mut src = SimulatedBits::new(&plan.spec.scenario, &plan.spec.noise, &topo, 0, RunKind::Null);
                let mut row = vec![0u8; topo.n_sensors()];
                let mut ones = 0u64;
                for t in 1..=plan.spec.scenario.secure_len {
                    src.secure_bits(t, &mut row);
                    ones += row.iter().map(|&b| b as u64).sum::<u64>();
                }
                let total = (plan.spec.scenario.secure_len * topo.n_sensors()) as u64;
                FalseAlarmCertificate::from_secure_bits(ones, total, a.kappa, m, n)?
            } else {
                FalseAlarmCertificate::new(CertificateMode::Benchmark, cfg.q(), a.kappa, m, n)?
            }
        }
        (None, Some(q)) => {
            let (Some(m), Some(n)) = (a.m, a.n) else {
                return Err(HarnessError::config("bounds", "--m and --n are required with --q"));
            };
            FalseAlarmCertificate::new(CertificateMode::Benchmark, q, a.kappa, m, n)?
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    let text = match a.format {
        OutputFormat::Text => certificate_text(&cert),
        OutputFormat::Toml => toml::to_string(&certificate_table(&cert)).expect("certificate serializes"),
        OutputFormat::Json => format!("{}\n", serde_json::to_string_pretty(&certificate_table(&cert)).expect("json")),
    };
    out.write_all(text.as_bytes()).map_err(|e| HarnessError::io("<stdout>", e))
}

fn certificate_table(c: &FalseAlarmCertificate) -> serde_json::Value {
    serde_json::json!({
        "mode": c.mode.label(),
        "q": c.q,
        "eps1": c.eps1,
        "eps2": c.eps2,
        "eps_star": c.eps_star,
        "upsilon1": c.upsilon1,
        "upsilon2": c.upsilon2,
        "upsilon_star": c.upsilon_star,
        "mn_min": c.mn_min,
        "probability_floor": c.probability_floor,
        "kappa": c.kappa,
        "m": c.m,
        "n": c.n,
        "h_min": c.h_min,
    })
}

/// Aligned `name  value` lines.
pub fn certificate_text(c: &FalseAlarmCertificate) -> String {
    let rows: Vec<(&str, String)> = vec![
        ("mode", c.mode.label().to_string()),
        ("q", format!("{:.6}", c.q)),
        ("eps1", format!("{:.6}", c.eps1)),
        ("eps2", format!("{:.6}", c.eps2)),
        ("eps*", format!("{:.6}", c.eps_star)),
        ("upsilon1", format!("{:.6}", c.upsilon1)),
        ("upsilon2", format!("{:.6}", c.upsilon2)),
        ("upsilon*", format!("{:.6}", c.upsilon_star)),
        ("MN", format!("{}", c.m * c.n)),
        ("MN must exceed", format!("{:.6}", c.mn_min)),
        ("1 - 2 exp(-upsilon* MN)", format!("{:.6}", c.probability_floor)),
        ("kappa", format!("{}", c.kappa)),
        ("h_min", format!("{:.3}", c.h_min)),
    ];
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
}

fn topology_check(a: &TopologyArgs, out: &mut dyn Write) -> Result<()> {
    let t = load_topology(&a.topology)?;
    let choice: WeightsChoice = a.weights.into();
    let w = build_laplacian_weights_with(&t, choice.scaling()).map_err(|e| HarnessError::config("topology", e.to_string()))?;
    let r = validate_condition1(w.dense(), Some(&t));
    let yes = |b: bool| if b { "yes" } else { "no" };
    let secure: Vec<String> = t.secure_sensors().map(|j| (j + 1).to_string()).collect();
    let text = format!(
        "sensors            {}\n\
         edges              {}\n\
         secure             {}\n\
         weights            {}\n\
         σ₂ = {:.6}\n\
         row stochastic     {} (max deviation {:.2e})\n\
         column stochastic  {} (max deviation {:.2e})\n\
         sparsity           {}\n\
         spectral gap       {}\n",
        t.n_sensors(),
        t.edges().len(),
        if secure.is_empty() { "none".to_string() } else { secure.join(", ") },
        match choice {
            WeightsChoice::SquaredSpectrum => "squared-spectrum",
            WeightsChoice::BestConstant => "best-constant",
        },
        r.sigma2,
        yes(r.row_stochastic),
        r.max_row_deviation,
        yes(r.column_stochastic),
        r.max_column_deviation,
        yes(r.sparsity_ok.unwrap_or(true)),
        yes(r.spectral_gap_ok),
    );
    out.write_all(text.as_bytes()).map_err(|e| HarnessError::io("<stdout>", e))?;
    if r.passed() {
        Ok(())
    } else {
        Err(HarnessError::config("topology", "weights fail the consensus condition"))
    }
}
