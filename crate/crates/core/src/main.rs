use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use pwaquant::bounds::{BoundsAnalyzer, NormMode};
use pwaquant::harness::{
    default_band_width, dominance_summary, facet_report_with, run_sweep_with, write_facet_csv, write_reports,
    ExperimentConfig, ExportFormat, SamplingMode, DEFAULT_DROP_THRESHOLD, DEFAULT_SAMPLE_COUNT,
};
use pwaquant::norms::{mat_norm_inf, vec_norm_inf};
use pwaquant::partition::{
    continuity_residuals, PartitionDocument, PwaPartition, ScalingRecord, DEFAULT_CONTINUITY_TOL,
};
use pwaquant::quantize::{quantize_partition, FixedPointFormat, Formats};
use pwaquant::rescale::{compute_scaling, rescale_partition};
use pwaquant::{Error, Result};

#[derive(Parser)]
#[command(name = "pwaquant", version, about = "Fixed-point sizing for piecewise-affine control laws")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a partition document and list its shared facets.
    Validate { input: PathBuf },
    /// Quantize a partition and write the fixed-point controller.
    Quantize {
        input: PathBuf,
        #[command(flatten)]
        formats: FormatArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bound the control error at a single state.
    Bounds {
        input: PathBuf,
        #[command(flatten)]
        formats: FormatArgs,
        /// Comma-separated state vector.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        state: Vec<f64>,
        #[arg(long, value_enum, default_value_t = NormArg::State)]
        norm_mode: NormArg,
    },
    /// Sample states and compare bounds with actual errors.
    Sweep {
        input: PathBuf,
        #[command(flatten)]
        formats: FormatArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::Box)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
    },
    /// Per-facet maxima of bounds and errors from near-facet samples.
    Facets {
        input: PathBuf,
        #[command(flatten)]
        formats: FormatArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Rescale the state so the box fits the unit box and rows are normalized.
    Rescale {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct FormatArgs {
    /// Total bits for every data class.
    #[arg(long, default_value_t = 16)]
    a: u32,
    /// Fraction bits for every data class.
    #[arg(long, default_value_t = 9)]
    b: u32,
    #[arg(long)]
    regions_a: Option<u32>,
    #[arg(long)]
    regions_b: Option<u32>,
    #[arg(long)]
    laws_a: Option<u32>,
    #[arg(long)]
    laws_b: Option<u32>,
    #[arg(long)]
    state_a: Option<u32>,
    #[arg(long)]
    state_b: Option<u32>,
}

impl FormatArgs {
    fn formats(&self) -> Result<Formats> {
        let one = |a: Option<u32>, b: Option<u32>| FixedPointFormat::new(a.unwrap_or(self.a), b.unwrap_or(self.b));
        Ok(Formats {
            regions: one(self.regions_a, self.regions_b)?,
            laws: one(self.laws_a, self.laws_b)?,
            state: one(self.state_a, self.state_b)?,
        })
    }
}

#[derive(Args)]
struct RunArgs {
    /// Number of sampled states.
    #[arg(long, default_value_t = DEFAULT_SAMPLE_COUNT)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Near-facet band width; defaults to twice the widest jump zone.
    #[arg(long)]
    band: Option<f64>,
    /// Drop reports whose a posteriori bound and actual error are both below this.
    #[arg(long, default_value_t = DEFAULT_DROP_THRESHOLD)]
    drop: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 uses all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, value_enum, default_value_t = NormArg::State)]
    norm_mode: NormArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    State,
    Box,
}

impl From<NormArg> for NormMode {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::State => NormMode::State,
            NormArg::Box => NormMode::Box,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Box,
    Facets,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
    Svg,
}

impl From<OutputFormat> for ExportFormat {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Csv => ExportFormat::Csv,
            OutputFormat::Json => ExportFormat::Json,
            OutputFormat::Svg => ExportFormat::SvgScatter,
        }
    }
}

fn read_document(path: &Path) -> Result<PartitionDocument> {
    PartitionDocument::from_reader(BufReader::new(File::open(path)?))
}

fn load(path: &Path) -> Result<(PartitionDocument, PwaPartition, Vec<pwaquant::partition::FacetPair>)> {
    let doc = read_document(path)?;
    let mut p = doc.to_partition()?;
    let pairs = p.validate(DEFAULT_CONTINUITY_TOL)?;
    Ok((doc, p, pairs))
}

/// Runs `f` with a writer for `out`, or stdout when absent.
fn with_output(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = std::io::BufWriter::new(File::create(path)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(pool.install(f))
}

fn experiment(
    run: &RunArgs,
    formats: Formats,
    mode: ModeArg,
    p: &PwaPartition,
    pairs: &[pwaquant::partition::FacetPair],
) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(formats);
    cfg.sample_count = run.n;
    cfg.seed = run.seed;
    cfg.drop_threshold = run.drop;
    cfg.norm_mode = run.norm_mode.into();
    cfg.mode = match mode {
        ModeArg::Box => SamplingMode::BoxUniform,
        ModeArg::Facets => SamplingMode::NearFacets {
            band_width: run.band.unwrap_or_else(|| default_band_width(p, pairs, &formats)),
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { input } => {
            let (_, p, pairs) = load(&input)?;
            println!(
                "{} regions, n = {}, m = {}: {} facet pairs",
                p.num_regions(),
                p.n(),
                p.m(),
                pairs.len()
            );
            for (fp, (res, _)) in pairs.iter().zip(continuity_residuals(&p, &pairs)) {
                println!("  ({}, {}) continuity residual {res:e}", fp.i, fp.j);
            }
        }
        Command::Quantize { input, formats, out } => {
            let (_, p, _) = load(&input)?;
            let qp = quantize_partition(&p, formats.formats()?)?;
            let worst = (0..p.num_regions())
                .map(|i| (mat_norm_inf(&qp.delta_f(i)), vec_norm_inf(&qp.delta_g(i))))
                .fold((0.0f64, 0.0f64), |a, b| (a.0.max(b.0), a.1.max(b.1)));
            eprintln!("max |dF| row sum {:e}, max |dG| {:e}", worst.0, worst.1);
            let json = qp.to_document().to_json_pretty();
            with_output(out.as_deref(), |w| Ok(writeln!(w, "{json}")?))?;
        }
        Command::Bounds {
            input,
            formats,
            state,
            norm_mode,
        } => {
            let (_, p, pairs) = load(&input)?;
            if state.len() != p.n() {
                return Err(Error::DimensionMismatch(format!(
                    "state has {} entries, expected {}",
                    state.len(),
                    p.n()
                )));
            }
            let x = DVector::from_vec(state);
            if !p.state_box().contains(&x) {
                return Err(Error::StateOutsidePartition(x.iter().copied().collect()));
            }
            let qp = quantize_partition(&p, formats.formats()?)?;
            let report = BoundsAnalyzer::with_pairs(&p, &qp, pairs)
                .norm_mode(norm_mode.into())
                .report(&x)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Sweep {
            input,
            formats,
            run,
            mode,
            format,
        } => {
            let (_, p, pairs) = load(&input)?;
            let formats = formats.formats()?;
            let qp = quantize_partition(&p, formats)?;
            let cfg = experiment(&run, formats, mode, &p, &pairs)?;
            let analyzer = BoundsAnalyzer::with_pairs(&p, &qp, pairs).norm_mode(cfg.norm_mode);
            let sweep = in_pool(run.threads, || run_sweep_with(&analyzer, &cfg))??;
            let s = dominance_summary(&sweep.reports);
            eprintln!(
                "sampled {}, dropped {}, kept {}; claimed {} with {} violations, unclaimed {}",
                sweep.sampled,
                sweep.dropped,
                sweep.reports.len(),
                s.claimed,
                s.violations,
                s.unclaimed
            );
            with_output(run.out.as_deref(), |w| write_reports(&sweep.reports, p.n(), format.into(), w))?;
        }
        Command::Facets { input, formats, run } => {
            let (_, p, pairs) = load(&input)?;
            let formats = formats.formats()?;
            let qp = quantize_partition(&p, formats)?;
            let cfg = experiment(&run, formats, ModeArg::Facets, &p, &pairs)?;
            let analyzer = BoundsAnalyzer::with_pairs(&p, &qp, pairs).norm_mode(cfg.norm_mode);
            let rows = in_pool(run.threads, || facet_report_with(&analyzer, &cfg))??;
            with_output(run.out.as_deref(), |w| write_facet_csv(&rows, w))?;
        }
        Command::Rescale { input, out } => {
            let (doc, p, _) = load(&input)?;
            let s = compute_scaling(p.state_box());
            let scaled = rescale_partition(&p, &s)?;
            let mut diag: Vec<f64> = s.diag().iter().copied().collect();
            if let Some(prev) = &doc.scaling {
                for (d, e) in diag.iter_mut().zip(&prev.diag) {
                    *d *= e;
                }
            }
            let mut out_doc = PartitionDocument::from_partition(&scaled);
            out_doc.scaling = Some(ScalingRecord { diag });
            let json = out_doc.to_json_pretty();
            with_output(out.as_deref(), |w| Ok(writeln!(w, "{json}")?))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
