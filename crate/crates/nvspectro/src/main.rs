//! Command-line front end: ODMR lines, field sweeps, thermal-model fits,
//! ZFS tensors, and peak extraction, emitting plot-ready CSV/JSON.
//!
//! Exit codes: 0 success, 2 usage or parse failure, 3 numerical failure.

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;

use nvspectro::config::RunConfig;
use nvspectro::fit::{self, FitError, FitOptions, FitResult};
use nvspectro::spectra::{self, format_float, AxisKind, Spectrum};
use nvspectro::spin::{self, HamiltonianParams, MagneticField, TransitionSet};
use nvspectro::thermal;
use nvspectro::zfs::{self, OrbitalGrid, SpinAlignment, ZfsTensor};

#[derive(Parser)]
#[command(
    name = "nvspectro",
    version,
    about = "NV- center ODMR resonances, ZFS tensors, and thermal spectroscopy fits"
)]
struct Cli {
    /// JSON run configuration; falls back to $NV_CONFIG, then to the
    /// bundled defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Print the active configuration as JSON and exit.
    #[arg(long, global = true)]
    dump_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// ODMR transition frequencies at a fixed magnetic field.
    Lines(LinesArgs),
    /// Branch-tracked resonance table over a field-magnitude sweep.
    Sweep(SweepArgs),
    /// Fit a thermal model to an x,y[,sigma] CSV series.
    Fit(FitArgs),
    /// Zero-field-splitting tensor from orbital grids or a point dipole.
    Zfs(ZfsArgs),
    /// Peak or dip extraction from a spectrum CSV.
    Peaks(PeaksArgs),
}

#[derive(Args)]
struct LinesArgs {
    /// Field vector Bx,By,Bz in Tesla.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_triple)]
    field: Triple,
    /// Evaluate D from the configured D(T) polynomial at this temperature.
    #[arg(long)]
    temp: Option<f64>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Override the configured sweep direction (x,y,z).
    #[arg(long, allow_hyphen_values = true, value_parser = parse_triple)]
    direction: Option<Triple>,
    /// Override the configured minimum field (T).
    #[arg(long)]
    min: Option<f64>,
    /// Override the configured maximum field (T).
    #[arg(long)]
    max: Option<f64>,
    /// Override the configured step count.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_enum)]
    model: FitModelKind,
    /// Data file with header x,y or x,y,sigma.
    #[arg(long)]
    data: PathBuf,
    /// Polynomial degree for --model dpoly (<= 3).
    #[arg(long, default_value_t = 3)]
    degree: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ZfsSource {
    /// Two orbital grid files (psi_i, psi_j).
    #[arg(long, num_args = 2, value_names = ["PSI_I", "PSI_J"])]
    orbitals: Option<Vec<PathBuf>>,
    /// Point-dipole separation x,y,z in Angstrom.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_triple)]
    point_dipole: Option<Triple>,
}

#[derive(Args)]
struct ZfsArgs {
    #[command(flatten)]
    source: ZfsSource,
    /// Spin alignment: +1 parallel, -1 anti-parallel.
    #[arg(long, allow_hyphen_values = true, default_value_t = 1)]
    chi: i32,
    /// Spin quantum number.
    #[arg(long, default_value_t = 1.0)]
    spin: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PeaksArgs {
    /// Spectrum CSV file.
    #[arg(long)]
    input: PathBuf,
    /// Search window lo,hi in axis units; defaults to the configured
    /// peak window for wavelength spectra, the full axis otherwise.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_pair)]
    window: Option<Pair>,
    /// Extract ODMR dips instead of the emission maximum.
    #[arg(long)]
    dips: bool,
    /// Expected dip count (with --dips).
    #[arg(long, default_value_t = 8)]
    expected: usize,
    /// Prominence threshold (with --dips); defaults from the config.
    #[arg(long)]
    prominence: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitModelKind {
    MottSeitz,
    Phonon,
    Dpoly,
}

#[derive(Clone, Copy)]
struct Triple([f64; 3]);

fn parse_triple(s: &str) -> Result<Triple, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got '{s}'"));
    }
    let mut out = [0.0f64; 3];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| format!("bad number '{part}'"))?;
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(format!("components must be finite, got '{s}'"));
    }
    Ok(Triple(out))
}

#[derive(Clone, Copy)]
struct Pair([f64; 2]);

fn parse_pair(s: &str) -> Result<Pair, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected lo,hi, got '{s}'"));
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| format!("bad number '{}'", parts[0]))?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| format!("bad number '{}'", parts[1]))?;
    if !(lo < hi) {
        return Err(format!("window must satisfy lo < hi, got '{s}'"));
    }
    Ok(Pair([lo, hi]))
}

enum CliError {
    /// Bad input: usage, config, or file parsing. Exit 2.
    Input(String),
    /// Numerical failure: rank deficiency, non-convergence. Exit 3.
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => m,
        }
    }
}

fn input<E: Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

fn numerical<E: Display>(e: E) -> CliError {
    CliError::Numerical(e.to_string())
}

fn fit_error(e: FitError) -> CliError {
    match e {
        FitError::InvalidData(_) => CliError::Input(e.to_string()),
        _ => CliError::Numerical(e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = load_config(cli.config.as_deref())?;
    for warning in config.validate().map_err(input)? {
        eprintln!("warning: {warning}");
    }
    if cli.dump_config {
        println!("{}", config.to_json());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(CliError::Input(
            "a subcommand is required (try --help); use --dump-config to inspect the \
             active configuration"
                .into(),
        ));
    };
    match command {
        Command::Lines(args) => cmd_lines(&config, args),
        Command::Sweep(args) => cmd_sweep(&config, args),
        Command::Fit(args) => cmd_fit(&config, args),
        Command::Zfs(args) => cmd_zfs(&config, args),
        Command::Peaks(args) => cmd_peaks(&config, args),
    }
}

fn load_config(explicit: Option<&Path>) -> Result<RunConfig, CliError> {
    let path = explicit
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("NV_CONFIG").map(PathBuf::from));
    match path {
        Some(path) => RunConfig::load(&path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => Ok(RunConfig::defaults()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes()).map_err(input)?;
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable output");
    text.push('\n');
    text
}

fn effective_params(config: &RunConfig, temp: Option<f64>) -> Result<HamiltonianParams, CliError> {
    let mut params = config.hamiltonian;
    if let Some(t) = temp {
        params.d_hz = thermal::d_of_t(&config.thermal.d_poly, t).map_err(input)?;
    }
    Ok(params)
}

fn cmd_lines(config: &RunConfig, args: LinesArgs) -> Result<(), CliError> {
    let params = effective_params(config, args.temp)?;
    let field = MagneticField(Vector3::from_column_slice(&args.field.0));
    let set = spin::odmr_lines(&params, &field, config.tolerances.degeneracy_hz)
        .map_err(numerical)?;
    let text = match args.format {
        OutputFormat::Json => to_json(&set),
        OutputFormat::Csv => lines_csv(&set),
    };
    emit(args.out.as_deref(), &text)
}

fn lines_csv(set: &TransitionSet) -> String {
    let mut out = String::from("frequency_MHz,orientation,branch,multiplicity\n");
    for line in &set.lines {
        out.push_str(&format!(
            "{},{},{},{}\n",
            format_float(line.frequency_hz / 1e6),
            line.orientation,
            line.branch,
            line.multiplicity
        ));
    }
    out
}

fn cmd_sweep(config: &RunConfig, args: SweepArgs) -> Result<(), CliError> {
    let direction = args
        .direction
        .map(|t| Vector3::from_column_slice(&t.0))
        .unwrap_or_else(|| Vector3::from_column_slice(&config.sweep.direction));
    let b_min = args.min.unwrap_or(config.sweep.b_min_t);
    let b_max = args.max.unwrap_or(config.sweep.b_max_t);
    let steps = args.steps.unwrap_or(config.sweep.steps);
    let rows = spin::field_sweep(
        &config.hamiltonian,
        direction,
        b_min,
        b_max,
        steps,
        config.tolerances.degeneracy_hz,
    )
    .map_err(numerical)?;

    let mut out = String::from("B_T");
    for orientation in 1..=4 {
        out.push_str(&format!(",f{orientation}_lower_MHz,f{orientation}_upper_MHz"));
    }
    out.push('\n');
    for row in &rows {
        out.push_str(&format_float(row.field_t));
        for pair in &row.branch_frequencies_hz {
            out.push_str(&format!(
                ",{},{}",
                format_float(pair[0] / 1e6),
                format_float(pair[1] / 1e6)
            ));
        }
        out.push('\n');
    }
    emit(args.out.as_deref(), &out)
}

fn cmd_fit(config: &RunConfig, args: FitArgs) -> Result<(), CliError> {
    let data = spectra::load_data_series(&args.data)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.data.display())))?;
    let options = FitOptions {
        gtol: config.tolerances.fit_gtol,
        xtol: config.tolerances.fit_xtol,
        max_iterations: config.tolerances.fit_max_iterations,
        ..FitOptions::default()
    };
    let result: FitResult = match args.model {
        FitModelKind::MottSeitz => fit::fit_mott_seitz_with(&data, &options),
        FitModelKind::Phonon => fit::fit_phonon_shift_with(&data, &options),
        FitModelKind::Dpoly => fit::fit_d_poly(&data, args.degree),
    }
    .map_err(fit_error)?;

    emit(args.out.as_deref(), &to_json(&result))?;
    if !result.converged {
        return Err(CliError::Numerical(format!(
            "fit did not converge within {} iterations",
            result.iterations
        )));
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct ZfsReport {
    components_ghz: [[f64; 3]; 3],
    principal_values_ghz: [f64; 3],
    d_ghz: f64,
    e_ghz: f64,
}

impl From<&ZfsTensor> for ZfsReport {
    fn from(t: &ZfsTensor) -> Self {
        let mut components_ghz = t.components_hz;
        for row in &mut components_ghz {
            for v in row {
                *v /= 1e9;
            }
        }
        Self {
            components_ghz,
            principal_values_ghz: t.principal_values_hz.map(|v| v / 1e9),
            d_ghz: t.d_scalar_hz / 1e9,
            e_ghz: t.e_scalar_hz / 1e9,
        }
    }
}

fn cmd_zfs(_config: &RunConfig, args: ZfsArgs) -> Result<(), CliError> {
    let chi = SpinAlignment::from_sign(args.chi).map_err(input)?;
    let tensor = if let Some(paths) = &args.source.orbitals {
        let psi_i = OrbitalGrid::load(&paths[0])
            .map_err(|e| CliError::Input(format!("{}: {e}", paths[0].display())))?;
        let psi_j = OrbitalGrid::load(&paths[1])
            .map_err(|e| CliError::Input(format!("{}: {e}", paths[1].display())))?;
        zfs::zfs_from_orbitals(&psi_i, &psi_j, chi, args.spin).map_err(|e| match e {
            zfs::ZfsError::GridMismatch | zfs::ZfsError::NotNormalized { .. } => input(e),
            other => numerical(other),
        })?
    } else {
        let r12 = args.source.point_dipole.expect("clap group guarantees one source").0;
        zfs::zfs_point_dipole(r12, chi, args.spin).map_err(input)?
    };
    emit(args.out.as_deref(), &to_json(&ZfsReport::from(&tensor)))
}

fn cmd_peaks(config: &RunConfig, args: PeaksArgs) -> Result<(), CliError> {
    let spectrum = spectra::load_spectrum(&args.input)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.input.display())))?;
    let spectrum = apply_exclusion(config, spectrum)?;
    if args.dips {
        let prominence = args.prominence.unwrap_or(config.tolerances.dip_prominence);
        let found = spectra::find_odmr_dips(&spectrum, args.expected, prominence)
            .map_err(numerical)?;
        if !found.complete {
            eprintln!(
                "warning: found {} of {} expected dips",
                found.dips.len(),
                args.expected
            );
        }
        return emit(args.out.as_deref(), &to_json(&found));
    }
    let window = match args.window {
        Some(p) => (p.0[0], p.0[1]),
        None => match spectrum.axis_kind {
            AxisKind::WavelengthNm => {
                (config.io.peak_window_nm[0], config.io.peak_window_nm[1])
            }
            AxisKind::FrequencyHz => {
                let first = spectrum.samples.first().expect("validated non-empty").0;
                let last = spectrum.samples.last().expect("validated non-empty").0;
                (first, last)
            }
        },
    };
    let peak = spectra::find_peak(&spectrum, window).map_err(numerical)?;
    emit(args.out.as_deref(), &to_json(&peak))
}

/// Drop samples inside the configured wavelength exclusion window (known
/// instrument artifacts, e.g. second-order diffraction).
fn apply_exclusion(config: &RunConfig, spectrum: Spectrum) -> Result<Spectrum, CliError> {
    let Some([lo, hi]) = config.io.exclude_window_nm else {
        return Ok(spectrum);
    };
    if spectrum.axis_kind != AxisKind::WavelengthNm {
        return Ok(spectrum);
    }
    let temperature = spectrum.temperature_k;
    let metadata = spectrum.metadata.clone();
    let kept: Vec<(f64, f64)> = spectrum
        .samples
        .into_iter()
        .filter(|&(x, _)| x < lo || x > hi)
        .collect();
    let mut filtered = Spectrum::new(AxisKind::WavelengthNm, kept, temperature)
        .map_err(|e| CliError::Input(format!("exclusion window removed too much: {e}")))?;
    filtered.metadata = metadata;
    Ok(filtered)
}
