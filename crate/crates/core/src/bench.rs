//! Benchmark grids.
//!
//! A suite is a flat `key = value` text file. Every combination of
//! measurement count, initialization, predictor and seed is one cell; cells
//! sharing (M, seed, init) share the initial estimate and the per-slice
//! solver factorizations. Results go to four CSV tables, each of which carries
//! the run's manifest digest in its first column:
//!
//! * `mse_vs_iter.csv`: `manifest,m,init,filter,seed,iteration,mse,relative_change`
//! * `mse_vs_m.csv`: `manifest,m,init,filter,seed,init_mse,final_mse,gain_db,iterations,converged,status`
//! * `mse_per_band.csv`: `manifest,m,init,filter,seed,band,init_mse,final_mse` (cubes only)
//! * `compressibility_vs_iter.csv`: `manifest,m,init,filter,seed,iteration,mean_compressibility` (row layouts only)
//!
//! Nothing timing-dependent is written, so the same suite and input reproduce
//! every file byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{self, CubeProfile, ImageProfile, SampleFormat, SYNTH_VERSION};
use crate::metrics::{mse, per_band_mse};
use crate::recon::{par_map, slice_basis, InitStrategy, Predictor, ReconConfig, ReconReport, Reconstructor, Signal};
use crate::sensing::{
    acquire_bands_3d, acquire_rows_2d, acquire_spectral_rows_3d, slice_operator, Layout, MeasurementSet,
    SeededSensingEnsemble,
};
use crate::signal::{Cube3D, Image2D};
use crate::solvers::{solve_omp, OmpConfig};
use crate::transforms::AxisTransform;

pub const MSE_VS_ITER: &str = "mse_vs_iter.csv";
pub const MSE_VS_M: &str = "mse_vs_m.csv";
pub const MSE_PER_BAND: &str = "mse_per_band.csv";
pub const COMPRESSIBILITY_VS_ITER: &str = "compressibility_vs_iter.csv";
pub const MANIFEST: &str = "manifest.txt";

/// Where the ground-truth signal comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// Synthetic image, regenerated per seed.
    SynthImage { rows: usize, cols: usize },
    /// Synthetic cube with the default profile, regenerated per seed.
    SynthCube { rows: usize, cols: usize, bands: usize },
    /// P5 graymap.
    Pgm(PathBuf),
    /// Cube file with its own header.
    Cube(PathBuf),
}

impl Source {
    fn parse(v: &str) -> Result<Self> {
        let (kind, arg) = v
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("source '{v}' should be kind:argument")))?;
        let arg = arg.trim();
        match kind.trim() {
            "synth-image" => match parse_dims(arg)?[..] {
                [rows, cols] => Ok(Source::SynthImage { rows, cols }),
                _ => Err(Error::Config(format!("synth-image wants RxC, got '{arg}'"))),
            },
            "synth-cube" => match parse_dims(arg)?[..] {
                [rows, cols, bands] => Ok(Source::SynthCube { rows, cols, bands }),
                _ => Err(Error::Config(format!("synth-cube wants RxCxB, got '{arg}'"))),
            },
            "pgm" => Ok(Source::Pgm(PathBuf::from(arg))),
            "cube" => Ok(Source::Cube(PathBuf::from(arg))),
            k => Err(Error::Config(format!("unknown source kind '{k}'"))),
        }
    }

    fn render(&self) -> String {
        match self {
            Source::SynthImage { rows, cols } => format!("synth-image:{rows}x{cols}"),
            Source::SynthCube { rows, cols, bands } => format!("synth-cube:{rows}x{cols}x{bands}"),
            Source::Pgm(p) => format!("pgm:{}", p.display()),
            Source::Cube(p) => format!("cube:{}", p.display()),
        }
    }
}

fn parse_dims(s: &str) -> Result<Vec<usize>> {
    s.split('x')
        .map(|d| {
            d.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad dimension '{d}' in '{s}'")))
        })
        .collect()
}

/// Sub-volume taken from a file source before acquisition. Image sources
/// ignore the band components; a band count of 0 keeps every band from the
/// origin on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Crop {
    pub origin: (usize, usize, usize),
    pub shape: (usize, usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub name: String,
    pub source: Source,
    pub crop: Option<Crop>,
    pub layout: Layout,
    pub basis: AxisTransform,
    pub m: Vec<usize>,
    pub inits: Vec<InitStrategy>,
    pub filters: Vec<Predictor>,
    pub seeds: Vec<u64>,
    pub max_outer_iters: usize,
    pub convergence_tol: f64,
    pub solver_iters: usize,
    /// Adds a per-slice OMP baseline cell (init `omp`, filter `none`) with
    /// this sparsity budget for every (M, seed).
    pub omp_sparsity: Option<usize>,
    /// Also write every final reconstruction as an `f64le` cube file.
    pub save_reconstructions: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            name: "suite".into(),
            source: Source::SynthImage { rows: 128, cols: 128 },
            crop: None,
            layout: Layout::Rows2D,
            basis: AxisTransform::Dct,
            m: Vec::new(),
            inits: vec![InitStrategy::Separate],
            filters: vec![Predictor::Row(crate::predictors::RowFilter::P3)],
            seeds: vec![1],
            max_outer_iters: 10,
            convergence_tol: 1e-4,
            solver_iters: 300,
            omp_sparsity: None,
            save_reconstructions: false,
        }
    }
}

fn list<T>(v: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(item).collect()
}

fn number<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

impl SuiteConfig {
    /// Parse `key = value` lines; `#` starts a comment, blank lines are
    /// skipped, unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut crop_origin = None;
        let mut crop_shape = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, v) = (key.trim(), v.trim());
            match key {
                "name" => cfg.name = v.to_string(),
                "source" => cfg.source = Source::parse(v)?,
                "layout" => cfg.layout = v.parse()?,
                "basis" => cfg.basis = v.parse()?,
                "m" => cfg.m = list(v, |s| number(key, s))?,
                "init" => cfg.inits = list(v, str::parse)?,
                "filter" => cfg.filters = list(v, str::parse)?,
                "seeds" => cfg.seeds = list(v, |s| number(key, s))?,
                "max_iters" => cfg.max_outer_iters = number(key, v)?,
                "tol" => cfg.convergence_tol = number(key, v)?,
                "solver_iters" => cfg.solver_iters = number(key, v)?,
                "omp_sparsity" => cfg.omp_sparsity = Some(number(key, v)?),
                "save_reconstructions" => cfg.save_reconstructions = number(key, v)?,
                "crop_origin" => crop_origin = Some(list(v, |s| number::<usize>(key, s))?),
                "crop_shape" => crop_shape = Some(list(v, |s| number::<usize>(key, s))?),
                _ => return Err(Error::Config(format!("line {}: unknown key '{key}'", lineno + 1))),
            }
        }
        cfg.crop = match (crop_origin, crop_shape) {
            (None, None) => None,
            (Some(o), Some(s)) => {
                let triple = |v: &[usize]| match v {
                    [a, b] => Ok((*a, *b, 0)),
                    [a, b, c] => Ok((*a, *b, *c)),
                    _ => Err(Error::Config("crop values need 2 or 3 components".into())),
                };
                Some(Crop {
                    origin: triple(&o)?,
                    shape: triple(&s)?,
                })
            }
            _ => return Err(Error::Config("crop_origin and crop_shape go together".into())),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 || self.solver_iters == 0 {
            return Err(Error::Config("max_iters and solver_iters must be ≥ 1".into()));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::Config("tol must be positive".into()));
        }
        let cube_source = matches!(self.source, Source::SynthCube { .. } | Source::Cube(_));
        if cube_source == (self.layout == Layout::Rows2D) {
            return Err(Error::Config(format!(
                "layout {} does not fit source {}",
                self.layout.name(),
                self.source.render()
            )));
        }
        if self.omp_sparsity == Some(0) {
            return Err(Error::Config("omp_sparsity must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Normalized text of the suite: fixed key order, one key per line.
    pub fn canonical(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "source = {}", self.source.render());
        if let Some(c) = self.crop {
            let _ = writeln!(s, "crop_origin = {},{},{}", c.origin.0, c.origin.1, c.origin.2);
            let _ = writeln!(s, "crop_shape = {},{},{}", c.shape.0, c.shape.1, c.shape.2);
        }
        let _ = writeln!(s, "layout = {}", self.layout.name());
        let _ = writeln!(s, "basis = {}", self.basis.name());
        let _ = writeln!(s, "m = {}", join(self.m.iter().map(|v| v.to_string()).collect()));
        let _ = writeln!(s, "init = {}", join(self.inits.iter().map(|v| v.name().to_string()).collect()));
        let _ = writeln!(s, "filter = {}", join(self.filters.iter().map(|v| v.name()).collect()));
        let _ = writeln!(s, "seeds = {}", join(self.seeds.iter().map(|v| v.to_string()).collect()));
        let _ = writeln!(s, "max_iters = {}", self.max_outer_iters);
        let _ = writeln!(s, "tol = {:e}", self.convergence_tol);
        let _ = writeln!(s, "solver_iters = {}", self.solver_iters);
        if let Some(k) = self.omp_sparsity {
            let _ = writeln!(s, "omp_sparsity = {k}");
        }
        let _ = writeln!(s, "save_reconstructions = {}", self.save_reconstructions);
        s
    }

    fn recon_config(&self, init: InitStrategy, predictor: Predictor) -> ReconConfig {
        let mut cfg = ReconConfig {
            init,
            predictor,
            max_outer_iters: self.max_outer_iters,
            convergence_tol: self.convergence_tol,
            ..ReconConfig::default()
        };
        cfg.solver.max_solver_iters = self.solver_iters;
        if self.layout == Layout::SpectralRows3D {
            cfg.iterate_axis = crate::recon::IterateAxis::SpectralRows;
        }
        cfg
    }
}

/// Traceability record written next to the tables.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config: String,
    pub seeds: Vec<u64>,
    pub input_digest: String,
    pub outputs: Vec<String>,
    pub versions: String,
    /// SHA-256 over everything above.
    pub digest: String,
}

impl RunManifest {
    fn new(command: &str, suite: &SuiteConfig, input_digest: String) -> Self {
        let versions = format!("pcs-core {} synth {}", env!("CARGO_PKG_VERSION"), SYNTH_VERSION);
        let outputs: Vec<String> = [MSE_VS_ITER, MSE_VS_M, MSE_PER_BAND, COMPRESSIBILITY_VS_ITER]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut h = Sha256::new();
        for part in [command, &suite.canonical(), &input_digest, &outputs.join(","), &versions] {
            h.update(part.as_bytes());
            h.update([0u8]);
        }
        Self {
            command: command.to_string(),
            config: suite.canonical(),
            seeds: suite.seeds.clone(),
            input_digest,
            outputs,
            versions,
            digest: hex(&h.finalize()),
        }
    }

    /// First 16 hex digits, as written into every table row.
    pub fn short(&self) -> &str {
        &self.digest[..16]
    }

    pub fn render(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
        format!(
            "digest = {}\ncommand = {}\nseeds = {}\ninput = {}\noutputs = {}\nversions = {}\n[config]\n{}",
            self.digest,
            self.command,
            seeds.join(","),
            self.input_digest,
            self.outputs.join(","),
            self.versions,
            self.config
        )
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Identity of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellKey {
    pub m: usize,
    /// `separate`, `kcs`, or `omp` for the baseline.
    pub init: String,
    /// Predictor name, or `none` for the baseline.
    pub filter: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub key: CellKey,
    pub result: std::result::Result<CellData, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellData {
    pub report: ReconReport,
    /// Cubes only: per-band MSE of the initial and final estimates.
    pub band_mse: Option<(Vec<f64>, Vec<f64>)>,
    pub reconstruction: Signal<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResults {
    pub manifest: RunManifest,
    pub cells: Vec<CellOutcome>,
}

enum Truth {
    Fixed(Signal<f64>),
    PerSeed,
}

fn load_truth(suite: &SuiteConfig) -> Result<(Truth, String)> {
    let crop_image = |im: Image2D<f64>| match suite.crop {
        Some(c) => im.crop(c.origin.0, c.origin.1, c.shape.0, c.shape.1),
        None => Ok(im),
    };
    let crop_cube = |cube: Cube3D<f64>| match suite.crop {
        Some(c) => {
            let bands = match c.shape.2 {
                0 => cube.bands().saturating_sub(c.origin.2),
                b => b,
            };
            cube.crop(c.origin, (c.shape.0, c.shape.1, bands))
        }
        None => Ok(cube),
    };
    match &suite.source {
        Source::Pgm(p) => {
            let digest = file_digest(p)?;
            Ok((Truth::Fixed(Signal::Image(crop_image(io::load_image(p)?)?)), digest))
        }
        Source::Cube(p) => {
            let digest = file_digest(p)?;
            Ok((Truth::Fixed(Signal::Cube(crop_cube(io::load_cube(p)?)?)), digest))
        }
        s => Ok((Truth::PerSeed, format!("{} v{SYNTH_VERSION}", s.render()))),
    }
}

fn file_digest(p: &Path) -> Result<String> {
    Ok(format!("sha256:{}", hex(&Sha256::digest(fs::read(p)?))))
}

fn synth_truth(source: &Source, seed: u64) -> Result<Signal<f64>> {
    match *source {
        Source::SynthImage { rows, cols } => Ok(Signal::Image(io::synth_image(seed, rows, cols, &ImageProfile::default())?)),
        Source::SynthCube { rows, cols, bands } => Ok(Signal::Cube(io::synth_cube(
            seed,
            rows,
            cols,
            bands,
            &CubeProfile::default(),
        )?)),
        _ => unreachable!("file sources are loaded once"),
    }
}

fn acquire(truth: &Signal<f64>, layout: Layout, m: usize, seed: u64) -> Result<MeasurementSet<f64>> {
    match (truth, layout) {
        (Signal::Image(im), Layout::Rows2D) => {
            acquire_rows_2d(im, &SeededSensingEnsemble::new(seed, im.rows(), m, im.cols())?)
        }
        (Signal::Cube(c), Layout::Bands3D) => acquire_bands_3d(
            c,
            &SeededSensingEnsemble::new(seed, c.bands(), m, c.rows() * c.cols())?,
        ),
        (Signal::Cube(c), Layout::SpectralRows3D) => acquire_spectral_rows_3d(
            c,
            &SeededSensingEnsemble::new(seed, c.rows(), m, c.cols() * c.bands())?,
        ),
        _ => Err(Error::Config(format!("layout {} does not fit the source", layout.name()))),
    }
}

/// One group of cells sharing (M, seed, init): every filter, plus the OMP
/// baseline when `init` is `None`.
struct Group {
    m: usize,
    seed: u64,
    init: Option<InitStrategy>,
}

/// Run every cell of `suite` on up to `jobs` threads. Cell failures are
/// recorded in the results; only problems with the suite itself (unreadable
/// input, bad layout) are returned as errors.
pub fn run_suite(suite: &SuiteConfig, command: &str, jobs: usize) -> Result<SuiteResults> {
    suite.validate()?;
    let (truth, input_digest) = load_truth(suite)?;
    let manifest = RunManifest::new(command, suite, input_digest);

    let mut groups = Vec::new();
    for &m in &suite.m {
        for &seed in &suite.seeds {
            for &init in &suite.inits {
                groups.push(Group { m, seed, init: Some(init) });
            }
            if suite.omp_sparsity.is_some() {
                groups.push(Group { m, seed, init: None });
            }
        }
    }
    let idx: Vec<usize> = (0..groups.len()).collect();
    let per_group = par_map(jobs.max(1), &idx, |g| run_group(suite, &truth, &groups[g]));
    Ok(SuiteResults {
        manifest,
        cells: per_group.into_iter().flatten().collect(),
    })
}

fn run_group(suite: &SuiteConfig, truth: &Truth, g: &Group) -> Vec<CellOutcome> {
    let keys: Vec<CellKey> = match g.init {
        Some(init) => suite
            .filters
            .iter()
            .map(|f| CellKey {
                m: g.m,
                init: init.name().into(),
                filter: f.name(),
                seed: g.seed,
            })
            .collect(),
        None => vec![CellKey {
            m: g.m,
            init: "omp".into(),
            filter: "none".into(),
            seed: g.seed,
        }],
    };
    match group_results(suite, truth, g) {
        Ok(results) => keys
            .into_iter()
            .zip(results)
            .map(|(key, result)| CellOutcome { key, result })
            .collect(),
        Err(e) => keys
            .into_iter()
            .map(|key| CellOutcome {
                key,
                result: Err(e.to_string()),
            })
            .collect(),
    }
}

type CellResult = std::result::Result<CellData, String>;

fn group_results(suite: &SuiteConfig, truth: &Truth, g: &Group) -> Result<Vec<CellResult>> {
    let owned;
    let truth = match truth {
        Truth::Fixed(t) => t,
        Truth::PerSeed => {
            owned = synth_truth(&suite.source, g.seed)?;
            &owned
        }
    };
    let ms = acquire(truth, suite.layout, g.m, g.seed)?;
    let basis = slice_basis(suite.layout, ms.dims, suite.basis)?;
    let defaults = ReconConfig::default();
    let rec = Reconstructor::new(&ms, &basis, defaults.cache_budget_bytes)?;
    let truth_slices = rec.slices_of(truth)?;

    let Some(init) = g.init else {
        let k = suite.omp_sparsity.unwrap_or(1);
        return Ok(vec![omp_baseline(&rec, &ms, &basis, k, truth, &truth_slices).map_err(|e| e.to_string())]);
    };
    let base_cfg = suite.recon_config(init, suite.filters.first().copied().unwrap_or(defaults.predictor));
    let start = match init {
        InitStrategy::Separate => rec.init_separate(&base_cfg.solver)?,
        InitStrategy::Kcs => rec.init_kcs(&base_cfg.solver, base_cfg.kcs_max_unknowns)?,
    };
    Ok(suite
        .filters
        .iter()
        .map(|&f| {
            let cfg = suite.recon_config(init, f);
            let run = || -> Result<CellData> {
                let (slices, mut report) = rec.iterate(start.slices.clone(), &cfg, Some(&truth_slices))?;
                report.init_converged = start.converged;
                report.max_slice_residual[0] = start.max_residual;
                report.solver_failures[0] = start.unconverged_slices.len();
                let first = rec.assemble(&start.slices)?;
                let reconstruction = rec.assemble(&slices)?;
                let band_mse = band_errors(truth, &first, &reconstruction)?;
                Ok(CellData {
                    report,
                    band_mse,
                    reconstruction,
                })
            };
            run().map_err(|e| e.to_string())
        })
        .collect())
}

fn band_errors(truth: &Signal<f64>, first: &Signal<f64>, last: &Signal<f64>) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    match (truth, first, last) {
        (Signal::Cube(t), Signal::Cube(a), Signal::Cube(b)) => Ok(Some((per_band_mse(a, t)?, per_band_mse(b, t)?))),
        _ => Ok(None),
    }
}

fn omp_baseline(
    rec: &Reconstructor<'_, f64>,
    ms: &MeasurementSet<f64>,
    basis: &crate::transforms::SparsityBasis<f64>,
    k: usize,
    truth: &Signal<f64>,
    truth_slices: &[Vec<f64>],
) -> Result<CellData> {
    let cfg = OmpConfig::budget(k);
    let mut slices = Vec::with_capacity(ms.ensemble.num_slices);
    for i in 0..ms.ensemble.num_slices {
        let op = slice_operator::<f64>(&ms.ensemble, i)?;
        let r = solve_omp(&op, basis, ms.slice(i), &cfg)?;
        slices.push(basis.synthesize(&r.theta_hat)?);
    }
    let flat_rec: Vec<f64> = slices.iter().flatten().copied().collect();
    let flat_truth: Vec<f64> = truth_slices.iter().flatten().copied().collect();
    let err = mse(&flat_rec, &flat_truth)?;
    let reconstruction = rec.assemble(&slices)?;
    let band_mse = band_errors(truth, &reconstruction, &reconstruction)?;
    Ok(CellData {
        report: ReconReport {
            mse: Some(vec![err]),
            relative_change: vec![f64::NAN],
            elapsed_seconds: vec![0.0],
            max_slice_residual: vec![f64::NAN],
            solver_failures: vec![0],
            init_converged: true,
            converged: true,
            ..ReconReport::default()
        },
        band_mse,
        reconstruction,
    })
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn num(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:e}"),
        _ => String::new(),
    }
}

impl SuiteResults {
    /// The four tables, as (file name, contents).
    pub fn tables(&self) -> Vec<(&'static str, String)> {
        let d = self.manifest.short();
        let mut iter = String::from("manifest,m,init,filter,seed,iteration,mse,relative_change\n");
        let mut by_m = String::from(
            "manifest,m,init,filter,seed,init_mse,final_mse,gain_db,iterations,converged,status\n",
        );
        let mut bands = String::from("manifest,m,init,filter,seed,band,init_mse,final_mse\n");
        let mut comp = String::from("manifest,m,init,filter,seed,iteration,mean_compressibility\n");
        for cell in &self.cells {
            let k = &cell.key;
            let prefix = format!("{d},{},{},{},{}", k.m, quote(&k.init), quote(&k.filter), k.seed);
            match &cell.result {
                Err(e) => {
                    let _ = writeln!(by_m, "{prefix},,,,,,{}", quote(&format!("error: {e}")));
                }
                Ok(data) => {
                    let r = &data.report;
                    for it in 0..=r.iterations_run {
                        let _ = writeln!(
                            iter,
                            "{prefix},{it},{},{}",
                            num(r.mse.as_ref().and_then(|m| m.get(it).copied())),
                            num(r.relative_change.get(it).copied())
                        );
                    }
                    let _ = writeln!(
                        by_m,
                        "{prefix},{},{},{},{},{},ok",
                        num(r.init_mse()),
                        num(r.final_mse()),
                        num(r.gain_db()),
                        r.iterations_run,
                        r.converged
                    );
                    if let Some((a, b)) = &data.band_mse {
                        for (band, (x, y)) in a.iter().zip(b).enumerate() {
                            let _ = writeln!(bands, "{prefix},{band},{},{}", num(Some(*x)), num(Some(*y)));
                        }
                    }
                    if let Some(c) = &r.compressibility {
                        for (it, v) in c.iter().enumerate() {
                            let _ = writeln!(comp, "{prefix},{it},{}", num(Some(*v)));
                        }
                    }
                }
            }
        }
        vec![
            (MSE_VS_ITER, iter),
            (MSE_VS_M, by_m),
            (MSE_PER_BAND, bands),
            (COMPRESSIBILITY_VS_ITER, comp),
        ]
    }

    /// Write the tables, the manifest and (when the suite asks for them) the
    /// reconstructions into `dir`. Returns the paths written.
    pub fn write(&self, dir: &Path, save_reconstructions: bool) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, text) in self.tables() {
            let p = dir.join(name);
            fs::write(&p, text)?;
            written.push(p);
        }
        let p = dir.join(MANIFEST);
        fs::write(&p, self.manifest.render())?;
        written.push(p);
        if save_reconstructions {
            for cell in &self.cells {
                let Ok(data) = &cell.result else { continue };
                let k = &cell.key;
                let p = dir.join(format!("recon_m{}_{}_{}_s{}.pcs3", k.m, k.init, k.filter, k.seed));
                let cube = match &data.reconstruction {
                    Signal::Cube(c) => c.clone(),
                    Signal::Image(im) => Cube3D::from_bands(std::slice::from_ref(im))?,
                };
                io::save_cube(&cube, &p, SampleFormat::F64Le)?;
                written.push(p);
            }
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_canonical_round_trip() {
        let text = "# demo\nname = t\nsource = synth-image:16x16\nlayout = rows2d\nm = 8, 12\n\
                    init = separate,kcs\nfilter = p1,p3\nseeds = 3\nmax_iters = 2\nomp_sparsity = 4\n";
        let cfg = SuiteConfig::parse(text).unwrap();
        assert_eq!(cfg.m, vec![8, 12]);
        assert_eq!(cfg.inits, vec![InitStrategy::Separate, InitStrategy::Kcs]);
        assert_eq!(SuiteConfig::parse(&cfg.canonical()).unwrap(), cfg);
    }

    #[test]
    fn bad_suites_are_refused() {
        assert!(SuiteConfig::parse("colour = blue\n").is_err());
        assert!(SuiteConfig::parse("source = synth-cube:8x8x4\nlayout = rows2d\n").is_err());
        assert!(SuiteConfig::parse("crop_origin = 0,0\n").is_err());
        assert!(SuiteConfig::parse("m = eight\n").is_err());
    }

    #[test]
    fn empty_grid_writes_headers_only() {
        let cfg = SuiteConfig::parse("source = synth-image:8x8\nm =\n").unwrap();
        let res = run_suite(&cfg, "test", 1).unwrap();
        assert!(res.cells.is_empty());
        for (_, text) in res.tables() {
            assert_eq!(text.lines().count(), 1);
            assert!(text.starts_with("manifest,m,init,filter,seed,"));
        }
    }

    #[test]
    fn failing_cells_are_recorded() {
        // blockls cannot iterate over image rows; the grid still completes
        let cfg = SuiteConfig::parse(
            "source = synth-image:8x8\nm = 4\nfilter = p1, blockls\nmax_iters = 1\nsolver_iters = 50\n",
        )
        .unwrap();
        let res = run_suite(&cfg, "test", 2).unwrap();
        assert_eq!(res.cells.len(), 2);
        assert!(res.cells[0].result.is_ok());
        assert!(res.cells[1].result.is_err());
        let table = &res.tables()[1].1;
        assert!(table.lines().nth(2).unwrap().contains("error:"));
    }
}
