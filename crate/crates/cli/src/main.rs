use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pcs_core::bench::{run_suite, SuiteConfig};
use pcs_core::io::{self, CubeProfile, ImageProfile, SampleFormat};
use pcs_core::metrics::write_compressibility_csv;
use pcs_core::recon::{reconstruct, IterateAxis};
use pcs_core::sensing::{read_measurements, write_measurements};
use pcs_core::{
    acquire_bands_3d, acquire_rows_2d, acquire_spectral_rows_3d, slice_basis, AxisTransform, Error, InitStrategy,
    Layout, Predictor, ReconConfig, RowFilter, SeededSensingEnsemble, Signal,
};

#[derive(Parser)]
#[command(name = "pcs", version, about = "Progressive compressed-sensing acquisition and reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure an image or cube slice by slice and write a measurement file.
    Acquire(AcquireArgs),
    /// Recover an image or cube from a measurement file.
    Reconstruct(ReconstructArgs),
    /// Run a benchmark suite and write its CSV tables.
    Benchmark(BenchmarkArgs),
    /// Write a synthetic test image or cube.
    Synth(SynthArgs),
}

#[derive(Args)]
struct AcquireArgs {
    /// P5 graymap or PCS3 cube file.
    #[arg(long)]
    input: PathBuf,
    /// Slicing: rows2d for images; bands3d or spectral-rows3d for cubes.
    #[arg(long)]
    layout: Option<String>,
    /// Measurements per slice.
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Allow m ≥ slice length.
    #[arg(long)]
    non_compressive: bool,
    /// Use one sensing matrix for every slice.
    #[arg(long)]
    shared_matrix: bool,
    /// Crop origin `r,c[,b]` applied before acquisition.
    #[arg(long, requires = "crop_shape")]
    crop_origin: Option<String>,
    /// Crop shape `rows,cols[,bands]`.
    #[arg(long, requires = "crop_origin")]
    crop_shape: Option<String>,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    measurements: PathBuf,
    #[arg(long, default_value = "separate")]
    init: String,
    /// p1, p2, p3 or blockls. Defaults to p3 for image rows, blockls for
    /// bands and p1 for spectral rows.
    #[arg(long)]
    filter: Option<String>,
    /// Maximum outer iterations.
    #[arg(long, default_value_t = 40)]
    iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value = "dct")]
    basis: String,
    /// Per-slice solver iteration budget.
    #[arg(long, default_value_t = 300)]
    solver_iters: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Predict from slices already updated in the current iteration.
    #[arg(long)]
    gauss_seidel: bool,
    /// Ground truth (same format as the acquired input) for the MSE trace.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Reconstruction: `.pgm` writes a 16-bit graymap, anything else a PCS3 cube.
    #[arg(long)]
    out: PathBuf,
    /// Report CSV (iteration, mse, relative_change, elapsed_seconds).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Compressibility CSV (iteration, mean_compressibility); image rows only.
    #[arg(long)]
    compressibility: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Suite file of `key = value` lines.
    #[arg(long)]
    suite: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Grid cells run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Image,
    Cube,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(value_enum)]
    kind: SynthKind,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// `RxC` for images, `RxCxB` for cubes.
    #[arg(long)]
    dims: String,
    #[arg(long)]
    out: PathBuf,
    /// Cube sample format: u8, u16 or f64.
    #[arg(long, default_value = "f64")]
    format: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Acquire(a) => acquire(a),
        Command::Reconstruct(a) => reconstruct_cmd(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Synth(a) => synth(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // one line, tab-separated, for scripts
            let msg = e.to_string().replace(['\n', '\t'], " ");
            eprintln!("error\tkind={}\tmessage={msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}

type Result<T> = pcs_core::Result<T>;

fn parse_list(s: &str) -> Result<Vec<usize>> {
    s.split([',', 'x'])
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("cannot parse '{v}' in '{s}'")))
        })
        .collect()
}

fn load_signal(path: &Path) -> Result<Signal<f64>> {
    let mut magic = [0u8; 4];
    {
        use std::io::Read;
        let mut f = File::open(path)?;
        let n = f.read(&mut magic)?;
        if n < 2 {
            return Err(Error::Format(format!("{} is too short", path.display())));
        }
    }
    if magic.starts_with(b"P5") {
        Ok(Signal::Image(io::load_image(path)?))
    } else if magic == io::CUBE_MAGIC {
        Ok(Signal::Cube(io::load_cube(path)?))
    } else {
        Err(Error::Format(format!(
            "{}: neither a P5 graymap nor a cube file",
            path.display()
        )))
    }
}

fn crop(signal: Signal<f64>, origin: &str, shape: &str) -> Result<Signal<f64>> {
    let (o, s) = (parse_list(origin)?, parse_list(shape)?);
    match signal {
        Signal::Image(im) if o.len() >= 2 && s.len() >= 2 => Ok(Signal::Image(im.crop(o[0], o[1], s[0], s[1])?)),
        Signal::Cube(c) if o.len() == 3 && s.len() == 3 => {
            Ok(Signal::Cube(c.crop((o[0], o[1], o[2]), (s[0], s[1], s[2]))?))
        }
        _ => Err(Error::Config("crop needs r,c for images and r,c,b for cubes".into())),
    }
}

fn acquire(a: AcquireArgs) -> Result<()> {
    let mut signal = load_signal(&a.input)?;
    if let (Some(o), Some(s)) = (&a.crop_origin, &a.crop_shape) {
        signal = crop(signal, o, s)?;
    }
    let layout: Layout = match (&a.layout, &signal) {
        (Some(l), _) => l.parse()?,
        (None, Signal::Image(_)) => Layout::Rows2D,
        (None, Signal::Cube(_)) => Layout::Bands3D,
    };
    let dims = match &signal {
        Signal::Image(im) => pcs_core::SignalDims::image(im.rows(), im.cols()),
        Signal::Cube(c) => pcs_core::SignalDims::cube(c.rows(), c.cols(), c.bands()),
    };
    let (slices, n) = layout.slicing(dims);
    let ens = if a.non_compressive {
        SeededSensingEnsemble::non_compressive(a.seed, slices, a.m, n)?
    } else {
        SeededSensingEnsemble::new(a.seed, slices, a.m, n)?
    }
    .with_shared_matrix(a.shared_matrix);
    let ms = match (&signal, layout) {
        (Signal::Image(im), Layout::Rows2D) => acquire_rows_2d(im, &ens)?,
        (Signal::Cube(c), Layout::Bands3D) => acquire_bands_3d(c, &ens)?,
        (Signal::Cube(c), Layout::SpectralRows3D) => acquire_spectral_rows_3d(c, &ens)?,
        _ => {
            return Err(Error::Config(format!(
                "layout {} does not fit the input",
                layout.name()
            )))
        }
    };
    let mut w = BufWriter::new(File::create(&a.out)?);
    write_measurements(&ms, &mut w)?;
    w.flush()?;
    println!(
        "layout={} slices={slices} m={} n={n} compression_ratio={:.6}",
        layout.name(),
        a.m,
        ens.compression_ratio()
    );
    Ok(())
}

fn reconstruct_cmd(a: ReconstructArgs) -> Result<()> {
    let ms = read_measurements::<f64, _>(BufReader::new(File::open(&a.measurements)?))?;
    let predictor: Predictor = match (&a.filter, ms.layout) {
        (Some(f), _) => f.parse()?,
        (None, Layout::Rows2D) => Predictor::Row(RowFilter::P3),
        (None, Layout::Bands3D) => "blockls".parse()?,
        (None, Layout::SpectralRows3D) => Predictor::Row(RowFilter::P1),
    };
    let init: InitStrategy = a.init.parse()?;
    let factor: AxisTransform = a.basis.parse()?;
    let mut cfg = ReconConfig {
        init,
        predictor,
        max_outer_iters: a.iters,
        convergence_tol: a.tol,
        gauss_seidel: a.gauss_seidel,
        threads: a.threads,
        iterate_axis: if ms.layout == Layout::SpectralRows3D {
            IterateAxis::SpectralRows
        } else {
            IterateAxis::Bands
        },
        ..ReconConfig::default()
    };
    cfg.solver.max_solver_iters = a.solver_iters;
    cfg.check_layout(ms.layout)?;
    let basis = slice_basis(ms.layout, ms.dims, factor)?;
    let truth = a.truth.as_deref().map(load_signal).transpose()?;
    let (signal, report) = reconstruct(&ms, &basis, &cfg, truth.as_ref())?;

    match &signal {
        Signal::Image(im) if a.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) => {
            io::save_image(im, &a.out, 65535)?
        }
        Signal::Image(im) => io::save_cube(&pcs_core::Cube3D::from_bands(std::slice::from_ref(im))?, &a.out, SampleFormat::F64Le)?,
        Signal::Cube(c) => io::save_cube(c, &a.out, SampleFormat::F64Le)?,
    }
    if let Some(p) = &a.report {
        let mut w = BufWriter::new(File::create(p)?);
        report.write_csv(&mut w)?;
        w.flush()?;
    }
    if let Some(p) = &a.compressibility {
        let values = report
            .compressibility
            .as_ref()
            .ok_or_else(|| Error::Unsupported("compressibility is tracked for image rows only".into()))?;
        let mut w = BufWriter::new(File::create(p)?);
        write_compressibility_csv(values, &mut w)?;
        w.flush()?;
    }
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "-".into());
    println!(
        "iterations={} converged={} init_mse={} final_mse={} gain_db={} seconds={:.2}",
        report.iterations_run,
        report.converged,
        fmt(report.init_mse()),
        fmt(report.final_mse()),
        report.gain_db().map(|g| format!("{g:.3}")).unwrap_or_else(|| "-".into()),
        report.wall_seconds
    );
    Ok(())
}

fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.suite)?;
    let suite = SuiteConfig::parse(&text)?;
    let results = run_suite(&suite, "benchmark", a.jobs)?;
    let written = results.write(&a.out_dir, suite.save_reconstructions)?;
    let failed = results.cells.iter().filter(|c| c.result.is_err()).count();
    println!(
        "manifest={} cells={} failed={failed} files={}",
        results.manifest.short(),
        results.cells.len(),
        written.len()
    );
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let d = parse_list(&a.dims)?;
    match (a.kind, d.as_slice()) {
        (SynthKind::Image, &[rows, cols]) => {
            let im = io::synth_image(a.seed, rows, cols, &ImageProfile::default())?;
            io::save_image(&im, &a.out, 65535)
        }
        (SynthKind::Cube, &[rows, cols, bands]) => {
            let cube = io::synth_cube(a.seed, rows, cols, bands, &CubeProfile::default())?;
            io::save_cube(&cube, &a.out, a.format.parse()?)
        }
        _ => Err(Error::Config(format!("dims '{}' do not fit the requested kind", a.dims))),
    }
}
