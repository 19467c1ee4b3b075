//! Command-line front end. Every command writes CSV/JSON into the output
//! directory together with a `manifest.json` listing the files produced.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 model/domain error,
//! 4 non-convergence (outputs are still written).

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use crate::calibration::{
    combine_losses, fit_imperfections_with, read_observations, residual_loss, FitBounds, FitOptions, LossBudget,
};
use crate::cavity::{branch_amplitudes, cooperativity, f1_max, xi, CavityParams};
use crate::distillation::{
    distill_coherent, relative_multi_photon_suppression, sweep, DistillationConfig, Parity, SweepRow,
    PAPER_DOWNSTREAM_LOSS,
};
use crate::error::{Error, Result};
use crate::fockspace::{wigner_grid, wigner_minimum, DensityMatrix, WignerPoint};
use crate::photonstats::{
    bandwidth_check, g2_curve, hbt_monte_carlo, G2Method, G2Row, HbtConfig, PulseKind, PulseShape,
};
use crate::tomography::{
    default_phases, loss_correct, mle_reconstruct, read_samples_csv, sample_homodyne, write_samples_csv,
};
use crate::Complex64;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MODEL: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "photon-distill", version, about = "Heralded single-photon distillation simulator")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Flat `key = value` configuration file; overrides --preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Preset::Paper)]
    pub preset: Preset,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Fock truncation dimension.
    #[arg(long, global = true)]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Experimental cavity with the fitted imperfections.
    Paper,
    /// Fiber-cavity outlook parameters, no extra imperfections.
    Fiber,
    /// Paper cavity with the atom decoupled (g = 0).
    Uncoupled,
}

#[derive(Debug, Args)]
pub struct Correction {
    /// Remove the downstream propagation and detection loss (default).
    #[arg(long, conflicts_with = "uncorrected")]
    pub corrected: bool,
    /// Keep the downstream loss on the state.
    #[arg(long)]
    pub uncorrected: bool,
}

impl Correction {
    fn apply(&self, config: DistillationConfig) -> DistillationConfig {
        if self.uncorrected {
            config
        } else {
            config.corrected()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParityArg {
    Odd,
    Even,
}

impl From<ParityArg> for Parity {
    fn from(p: ParityArg) -> Self {
        match p {
            ParityArg::Odd => Parity::Odd,
            ParityArg::Even => Parity::Even,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PulseArg {
    Gaussian,
    DoublePeak,
    Rectangular,
}

impl From<PulseArg> for PulseKind {
    fn from(p: PulseArg) -> Self {
        match p {
            PulseArg::Gaussian => PulseKind::Gaussian,
            PulseArg::DoublePeak => PulseKind::DoublePeak,
            PulseArg::Rectangular => PulseKind::Rectangular,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cavity figures of merit.
    Params,
    /// Herald probability, fidelity and populations over a range of α².
    Sweep {
        #[arg(long, default_value = "0.01:2.5:250", allow_hyphen_values = true)]
        grid: String,
        #[command(flatten)]
        correction: Correction,
    },
    /// Wigner function of the heralded state on a square phase-space grid.
    Wigner {
        #[arg(long, default_value_t = 0.31, allow_negative_numbers = true)]
        alpha_sq: f64,
        /// Phase-space axis, used for both q and p.
        #[arg(long, default_value = "-3:3:121", allow_hyphen_values = true)]
        grid: String,
        #[arg(long, value_enum, default_value_t = ParityArg::Odd)]
        parity: ParityArg,
        #[command(flatten)]
        correction: Correction,
    },
    /// g²(0) of the heralded pulse, analytic or Monte Carlo.
    G2 {
        /// Single point; with --mc also writes g²(τ) over run offsets.
        #[arg(long, conflicts_with = "grid", allow_negative_numbers = true)]
        alpha_sq: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Run the HBT Monte Carlo instead of the analytic expectation.
        #[arg(long)]
        mc: bool,
        #[arg(long, default_value_t = 1_000_000)]
        trials: usize,
        #[arg(long, default_value_t = 20.0)]
        dark_rate: f64,
        #[arg(long, default_value_t = 0.5)]
        efficiency: f64,
        #[arg(long, value_enum, default_value_t = PulseArg::Gaussian)]
        pulse: PulseArg,
        /// Pulse duration in seconds.
        #[arg(long, default_value_t = 2.3e-6)]
        duration: f64,
        /// Coincidence window in seconds (default three pulse durations).
        #[arg(long)]
        window: Option<f64>,
        #[arg(long, default_value_t = 5)]
        max_offset: usize,
    },
    /// Synthetic homodyne data and maximum-likelihood reconstruction.
    #[command(subcommand)]
    Tomography(TomographyCommand),
    /// Fits loss, detection error and cavity detuning to measured populations.
    Fit {
        /// CSV with columns `alpha_sq,p0,p1,p2`.
        #[arg(long)]
        observations: PathBuf,
        /// Loss already removed from the data.
        #[arg(long, default_value_t = PAPER_DOWNSTREAM_LOSS)]
        correction: f64,
    },
    /// Combines a loss budget.
    Budget {
        /// CSV with columns `label,loss`; defaults to the bundled experimental budget.
        #[arg(long)]
        budget: Option<PathBuf>,
        /// Total fitted loss; reports the part not covered by the budget.
        #[arg(long)]
        l_fit: Option<f64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum TomographyCommand {
    /// Samples quadratures of the heralded state.
    Simulate {
        #[arg(long, default_value_t = 0.31, allow_negative_numbers = true)]
        alpha_sq: f64,
        /// Total number of samples.
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
        #[arg(long, default_value_t = 12)]
        phases: usize,
        #[arg(long, default_value_t = 0.749)]
        efficiency: f64,
        #[command(flatten)]
        correction: Correction,
    },
    /// Reconstructs a state from a `theta,x` sample file.
    Reconstruct {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.749)]
        efficiency: f64,
        #[arg(long, default_value_t = 2000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Additionally invert this known loss on the reconstructed state.
        #[arg(long)]
        loss_correct: Option<f64>,
    },
}

/// Record of one invocation, written last into the output directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    pub preset: String,
    pub seed: u64,
    pub output_dir: String,
    pub outputs: Vec<String>,
    pub versions: BTreeMap<String, String>,
}

enum Failure {
    Usage(String),
    Model(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => Failure::Usage(e.to_string()),
            other => Failure::Model(other),
        }
    }
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    /// Writes through a temporary file in the target directory, then renames.
    fn write(&mut self, name: &str, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        fill(tmp.as_file_mut())?;
        tmp.as_file_mut().flush()?;
        tmp.persist(self.dir.join(name)).map_err(|e| Error::Io(e.error))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        self.write(name, |w| {
            let mut writer = csv::Writer::from_writer(w);
            for row in rows {
                writer.serialize(row)?;
            }
            writer.flush()?;
            Ok(())
        })
    }
}

/// Parses `MIN:MAX:STEPS` into an inclusive linear grid.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::Config(format!("grid `{text}` must be MIN:MAX:STEPS"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let min: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let max: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if steps == 0 || !min.is_finite() || !max.is_finite() || max < min {
        return Err(bad());
    }
    if steps == 1 {
        return Ok(vec![min]);
    }
    Ok((0..steps).map(|i| min + (max - min) * i as f64 / (steps - 1) as f64).collect())
}

fn load_config(common: &CommonArgs) -> Result<DistillationConfig> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            DistillationConfig::from_config_str(&text)?
        }
        None => match common.preset {
            Preset::Paper => DistillationConfig::paper(),
            Preset::Fiber => DistillationConfig::ideal(CavityParams::fiber()),
            Preset::Uncoupled => DistillationConfig::ideal(CavityParams::paper().with_g(0.0)?),
        },
    };
    if let Some(dim) = common.dim {
        config = config.with_dim(dim);
    }
    config.validate()?;
    Ok(config)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))
}

#[derive(Serialize)]
struct ParamsReport {
    g: f64,
    kappa: f64,
    kappa_r: f64,
    kappa_t: f64,
    kappa_m: f64,
    gamma: f64,
    delta_a: f64,
    delta_c: f64,
    cooperativity: f64,
    xi: f64,
    f1_max: f64,
    /// Largest deviation from unit output power over both atomic branches.
    energy_conservation_error: f64,
}

#[derive(Serialize)]
struct SweepCsvRow {
    alpha_sq: f64,
    p_up: Option<f64>,
    f1: Option<f64>,
    coherent_f1: f64,
    p0: Option<f64>,
    p1: Option<f64>,
    p2: Option<f64>,
    p3: Option<f64>,
    suppression: Option<f64>,
    relative_suppression: Option<f64>,
    status: String,
}

impl SweepCsvRow {
    fn new(row: SweepRow, config: &DistillationConfig) -> Self {
        let relative = row.f1.and_then(|_| {
            distill_coherent(config, row.alpha_sq.sqrt(), Parity::Odd)
                .ok()
                .and_then(|rho| relative_multi_photon_suppression(&rho, row.alpha_sq))
        });
        Self {
            alpha_sq: row.alpha_sq,
            p_up: row.p_up,
            f1: row.f1,
            coherent_f1: row.alpha_sq * (-row.alpha_sq).exp(),
            p0: row.p0,
            p1: row.p1,
            p2: row.p2,
            p3: row.p3,
            suppression: row.suppression,
            relative_suppression: relative,
            status: row.status,
        }
    }
}

#[derive(Serialize)]
struct WignerSummary {
    alpha_sq: f64,
    parity: Parity,
    corrected: bool,
    minimum: f64,
    q_at_minimum: f64,
    p_at_minimum: f64,
    value_at_origin: f64,
}

#[derive(Serialize)]
struct BudgetReport {
    items: usize,
    total: f64,
    l_fit: Option<f64>,
    residual: Option<f64>,
}

#[derive(Serialize)]
struct TruthReport {
    alpha_sq: f64,
    dim: usize,
    populations: Vec<f64>,
}

/// Runs the CLI on the given arguments (program name first) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(converged) => {
            if converged {
                EXIT_OK
            } else {
                eprintln!("warning: optimization did not converge; best result written");
                EXIT_NOT_CONVERGED
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Model(e)) => {
            eprintln!("error: {e}");
            EXIT_MODEL
        }
    }
}

/// Returns whether every iterative step converged.
fn execute(cli: &Cli) -> std::result::Result<bool, Failure> {
    let common = &cli.common;
    let config = load_config(common)?;
    let mut out = Outputs::new(&common.out)?;
    let mut converged = true;
    let name = match &cli.command {
        Command::Params => {
            let p = config.params;
            let one = Complex64::new(1.0, 0.0);
            let energy = [true, false]
                .iter()
                .map(|&c| (branch_amplitudes(&p, c, one).output_power() - 1.0).abs())
                .fold(0.0, f64::max);
            let report = ParamsReport {
                g: p.g(),
                kappa: p.kappa(),
                kappa_r: p.kappa_r(),
                kappa_t: p.kappa_t(),
                kappa_m: p.kappa_m(),
                gamma: p.gamma(),
                delta_a: p.delta_a(),
                delta_c: p.delta_c(),
                cooperativity: cooperativity(&p)?,
                xi: xi(&p)?,
                f1_max: f1_max(&p)?,
                energy_conservation_error: energy,
            };
            println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
            out.json("params.json", &report)?;
            "params"
        }
        Command::Sweep { grid, correction } => {
            let grid = parse_grid(grid)?;
            let config = correction.apply(config);
            let rows: Vec<SweepCsvRow> = sweep(&config, &grid)
                .into_iter()
                .map(|r| SweepCsvRow::new(r, &config))
                .collect();
            out.csv("sweep.csv", &rows)?;
            "sweep"
        }
        Command::Wigner {
            alpha_sq,
            grid,
            parity,
            correction,
        } => {
            let axis = parse_grid(grid)?;
            let config = correction.apply(config);
            let parity = Parity::from(*parity);
            let rho = distill_coherent(&config, checked_alpha(*alpha_sq)?, parity)?;
            let points = wigner_grid(&rho, &axis, &axis);
            let min = wigner_minimum(&points).ok_or_else(|| Failure::Usage("empty Wigner grid".into()))?;
            out.csv::<WignerPoint>("wigner.csv", &points)?;
            out.json(
                "wigner_summary.json",
                &WignerSummary {
                    alpha_sq: *alpha_sq,
                    parity,
                    corrected: !correction.uncorrected,
                    minimum: min.w,
                    q_at_minimum: min.q,
                    p_at_minimum: min.p,
                    value_at_origin: crate::fockspace::wigner(&rho, 0.0, 0.0),
                },
            )?;
            "wigner"
        }
        Command::G2 {
            alpha_sq,
            grid,
            mc,
            trials,
            dark_rate,
            efficiency,
            pulse,
            duration,
            window,
            max_offset,
        } => {
            // Photon counting runs with the cavity locked on resonance.
            let config = if common.config.is_none() && common.preset == Preset::Paper {
                DistillationConfig::paper_photon_counting().with_dim(config.dim)
            } else {
                config
            };
            let grid = match (alpha_sq, grid) {
                (Some(a), None) => vec![*a],
                (None, Some(g)) => parse_grid(g)?,
                (None, None) => parse_grid("0.01:2.5:100")?,
                (Some(_), Some(_)) => unreachable!("clap rejects --alpha-sq with --grid"),
            };
            let hbt = HbtConfig {
                detector_efficiency: *efficiency,
                dark_count_rate: *dark_rate,
                coincidence_window: *window,
                trials: *trials,
                seed: common.seed,
                max_offset: *max_offset,
            };
            let shape = PulseShape::new((*pulse).into(), *duration, grid[0], 500.0)?;
            match (alpha_sq, mc) {
                (Some(a), true) => {
                    // Single point: one run gives both g²(0) and g²(τ).
                    let rho = distill_coherent(&config, checked_alpha(*a)?, Parity::Odd)?;
                    let res = hbt_monte_carlo(&rho, &shape, &hbt)?;
                    let row = G2Row {
                        alpha_sq: *a,
                        g2_zero: res.g2_zero,
                        stderr: res.stderr,
                        status: if res.g2_zero.is_some() { "ok" } else { "undefined" }.into(),
                    };
                    out.csv("g2.csv", &[row])?;
                    out.csv("g2_tau.csv", &res.g2_tau)?;
                }
                _ => {
                    let method = if *mc { G2Method::MonteCarlo } else { G2Method::Analytic };
                    out.csv("g2.csv", &g2_curve(&config, &grid, &hbt, &shape, method)?)?;
                }
            }
            out.json("bandwidth.json", &bandwidth_check(&shape, &config.params))?;
            "g2"
        }
        Command::Tomography(TomographyCommand::Simulate {
            alpha_sq,
            samples,
            phases,
            efficiency,
            correction,
        }) => {
            if *phases == 0 {
                return Err(Failure::Usage("--phases must be positive".into()));
            }
            let config = correction.apply(config);
            let rho = distill_coherent(&config, checked_alpha(*alpha_sq)?, Parity::Odd)?;
            let data = sample_homodyne(&rho, &default_phases(*phases), samples / phases, *efficiency, common.seed)?;
            out.write("samples.csv", |w| write_samples_csv(w, &data))?;
            out.json(
                "truth.json",
                &TruthReport {
                    alpha_sq: *alpha_sq,
                    dim: rho.dim(),
                    populations: rho.populations(),
                },
            )?;
            "tomography simulate"
        }
        Command::Tomography(TomographyCommand::Reconstruct {
            input,
            efficiency,
            max_iter,
            tol,
            loss_correct: extra_loss,
        }) => {
            let samples = read_samples_csv(open(input)?)?;
            let dim = common.dim.unwrap_or(10);
            let res = mle_reconstruct(&samples, dim, *efficiency, *max_iter, *tol)?;
            converged = res.converged;
            out.json("reconstruction.json", &res.report())?;
            if let Some(loss) = extra_loss {
                let fixed: DensityMatrix = loss_correct(&res.rho, *loss)?;
                let report = crate::tomography::ReconstructionResult { rho: fixed, ..res };
                out.json("reconstruction_loss_corrected.json", &report.report())?;
            }
            "tomography reconstruct"
        }
        Command::Fit {
            observations,
            correction,
        } => {
            let rows = read_observations(open(observations)?)?;
            let opts = FitOptions {
                bounds: FitBounds::default(),
                correction: *correction,
                dim: config.dim,
                ..FitOptions::default()
            };
            let fit = fit_imperfections_with(&rows, &config.params, &opts)?;
            converged = fit.converged;
            out.json("fit.json", &fit)?;
            "fit"
        }
        Command::Budget { budget, l_fit } => {
            let budget = match budget {
                Some(path) => LossBudget::from_csv(open(path)?)?,
                None => LossBudget::experiment(),
            };
            let total = combine_losses(&budget);
            let residual = l_fit.map(|l| residual_loss(l, total)).transpose()?;
            let report = BudgetReport {
                items: budget.items.len(),
                total,
                l_fit: *l_fit,
                residual,
            };
            println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
            out.json("budget.json", &report)?;
            "budget"
        }
    };
    let manifest = RunManifest {
        command: name.to_string(),
        config_path: common.config.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        preset: format!("{:?}", common.preset).to_lowercase(),
        seed: common.seed,
        output_dir: common.out.display().to_string(),
        outputs: out.files.clone(),
        versions: BTreeMap::from([(env!("CARGO_PKG_NAME").to_string(), env!("CARGO_PKG_VERSION").to_string())]),
    };
    out.json("manifest.json", &manifest)?;
    Ok(converged)
}

fn checked_alpha(alpha_sq: f64) -> Result<f64> {
    if !(alpha_sq >= 0.0 && alpha_sq.is_finite()) {
        return Err(Error::Domain(format!("alpha_sq = {alpha_sq} must be a finite nonnegative number")));
    }
    Ok(alpha_sq.sqrt())
}
