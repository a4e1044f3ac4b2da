//! Command-line front end. Every output is a file written atomically.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::codec::{
    decode_to_z, encode, reconstruct_ancestral, reconstruct_flow, AnalyticSource, Bitstream, DiffusionSchedule,
    SchedulePreset, SmoothedLaplace, DEFAULT_CHUNK_BITS, DEFAULT_ODE_STEPS, DEFAULT_STEPS,
};
use crate::error::{Error, Result};
use crate::gaussian_rd::{
    fit_spectrum, format_sig, log_space, parse_matrix, sweep_curve, write_curves_csv, write_snr_csv, Spectrum,
    Variant,
};
use crate::harness::suite::{GAnchor, LAPLACE_SMOOTHING};
use crate::harness::{estimate_g_at, init_threads, run_suite, SuiteConfig, TheoremId, TheoremReport};
use crate::rng::{labelled, StreamKey};

/// Rate at which `rd-curve` reports per-component SNR.
pub const DEFAULT_SNR_RATE: f64 = 0.391;
pub const DEFAULT_RD_SOURCE: &str = "power:256:2";
pub const DEFAULT_ENCODE_SIGMA: f64 = 0.5;

#[derive(Debug, Parser)]
#[command(name = "diffc", version, about = "Rate-distortion analytics and a progressive diffusion codec")]
pub struct Cli {
    /// TOML file with defaults for any flag (flags win).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form rate-distortion curves and per-component SNR for a Gaussian source.
    RdCurve(Settings),
    /// Compress one vector into a bitstream and write its rate ledger.
    Encode(Settings),
    /// Rebuild `z_{t_stop}` from a bitstream and reconstruct.
    Decode(Settings),
    /// Run theorem checks and write report files.
    Verify(Settings),
    /// Estimate the smoothness statistic `G` at a grid of noise levels.
    G(Settings),
}

/// Every option; each subcommand accepts the subset listed in [`allowed`].
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// normal[:DIM], pair:MU:VAR, gmm:W/M/V,..., power:DIM:EXP or laplace[:SMOOTHING].
    #[arg(long)]
    pub source: Option<String>,
    /// Eigenvalue file, one per line.
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
    /// Sample matrix (one row per sample) to fit a Gaussian to.
    #[arg(long)]
    pub sample_matrix: Option<PathBuf>,
    /// cosine or linear.
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Comma list, or log:LO:HI:N / lin:LO:HI:N.
    #[arg(long)]
    pub sigma_grid: Option<String>,
    #[arg(long)]
    pub theta_grid: Option<String>,
    #[arg(long)]
    pub chunk_bits: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma list of 1, 2, 3, lemma1, g, realism, or all.
    #[arg(long)]
    pub theorem: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub t_stop: Option<usize>,
    /// Single noise level; shorthand for a one-point grid.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Rate in bits per dimension for the per-component SNR file.
    #[arg(long)]
    pub rate: Option<f64>,
    /// flow, ancestral or z.
    #[arg(long)]
    pub recon: Option<String>,
}

impl Settings {
    /// Fills every unset field from `base`.
    pub fn or(self, base: Settings) -> Settings {
        Settings {
            source: self.source.or(base.source),
            spectrum: self.spectrum.or(base.spectrum),
            sample_matrix: self.sample_matrix.or(base.sample_matrix),
            schedule: self.schedule.or(base.schedule),
            steps: self.steps.or(base.steps),
            sigma_grid: self.sigma_grid.or(base.sigma_grid),
            theta_grid: self.theta_grid.or(base.theta_grid),
            chunk_bits: self.chunk_bits.or(base.chunk_bits),
            seed: self.seed.or(base.seed),
            out: self.out.or(base.out),
            theorem: self.theorem.or(base.theorem),
            samples: self.samples.or(base.samples),
            input: self.input.or(base.input),
            t_stop: self.t_stop.or(base.t_stop),
            sigma: self.sigma.or(base.sigma),
            rate: self.rate.or(base.rate),
            recon: self.recon.or(base.recon),
        }
    }

    pub fn from_toml(text: &str) -> Result<Settings> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    fn present(&self) -> Vec<&'static str> {
        let flags = [
            ("source", self.source.is_some()),
            ("spectrum", self.spectrum.is_some()),
            ("sample-matrix", self.sample_matrix.is_some()),
            ("schedule", self.schedule.is_some()),
            ("steps", self.steps.is_some()),
            ("sigma-grid", self.sigma_grid.is_some()),
            ("theta-grid", self.theta_grid.is_some()),
            ("chunk-bits", self.chunk_bits.is_some()),
            ("seed", self.seed.is_some()),
            ("out", self.out.is_some()),
            ("theorem", self.theorem.is_some()),
            ("samples", self.samples.is_some()),
            ("input", self.input.is_some()),
            ("t-stop", self.t_stop.is_some()),
            ("sigma", self.sigma.is_some()),
            ("rate", self.rate.is_some()),
            ("recon", self.recon.is_some()),
        ];
        flags.into_iter().filter(|f| f.1).map(|f| f.0).collect()
    }

    fn seed(&self, command: &str) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config(format!("{command} is stochastic and needs --seed")))
    }

    fn out(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| Error::Config("--out is required".into()))
    }

    fn input(&self) -> Result<&Path> {
        self.input.as_deref().ok_or_else(|| Error::Config("--input is required".into()))
    }

    fn schedule(&self) -> Result<DiffusionSchedule> {
        let preset = match &self.schedule {
            Some(name) => SchedulePreset::parse(name)?,
            None => SchedulePreset::Cosine,
        };
        DiffusionSchedule::new(preset, self.steps.unwrap_or(DEFAULT_STEPS))
    }

    fn sigma_grid(&self) -> Result<Option<Vec<f64>>> {
        match (&self.sigma_grid, self.sigma) {
            (Some(_), Some(_)) => Err(Error::Config("give either --sigma or --sigma-grid".into())),
            (Some(g), None) => parse_grid(g).map(Some),
            (None, Some(s)) => Ok(Some(vec![s])),
            (None, None) => Ok(None),
        }
    }

    fn source(&self) -> Result<Option<SourceSpec>> {
        let given = [self.source.is_some(), self.spectrum.is_some(), self.sample_matrix.is_some()];
        match given.iter().filter(|g| **g).count() {
            0 => return Ok(None),
            1 => {}
            _ => return Err(Error::Config("give exactly one of --source, --spectrum, --sample-matrix".into())),
        }
        if let Some(desc) = &self.source {
            return parse_source(desc).map(Some);
        }
        if let Some(path) = &self.spectrum {
            let spectrum = Spectrum::read(path)?;
            return Ok(Some(SourceSpec::gaussian(path.display().to_string(), spectrum)?));
        }
        let path = self.sample_matrix.as_ref().expect("one source given");
        let fit = fit_spectrum(&parse_matrix(&std::fs::read_to_string(path)?)?)?;
        let mean_basis: Vec<f64> = (0..fit.mean.len())
            .map(|c| (0..fit.mean.len()).map(|r| fit.rotation[(r, c)] * fit.mean[r]).sum())
            .collect();
        let source = AnalyticSource::mixture(
            vec![1.0],
            vec![mean_basis],
            vec![fit.spectrum.lambdas().to_vec()],
            Some(fit.rotation),
        )?;
        Ok(Some(SourceSpec {
            name: path.display().to_string(),
            model: Model::Analytic(source),
            spectrum: Some(fit.spectrum),
        }))
    }
}

/// Flags each subcommand understands.
fn allowed(command: &Command) -> (&'static str, &'static [&'static str]) {
    const SOURCE: [&str; 3] = ["source", "spectrum", "sample-matrix"];
    match command {
        Command::RdCurve(_) => ("rd-curve", &[SOURCE[0], SOURCE[1], SOURCE[2], "sigma-grid", "theta-grid", "rate", "out"]),
        Command::Encode(_) => (
            "encode",
            &[SOURCE[0], SOURCE[1], SOURCE[2], "schedule", "steps", "t-stop", "sigma", "chunk-bits", "seed", "input", "out"],
        ),
        Command::Decode(_) => ("decode", &[SOURCE[0], SOURCE[1], SOURCE[2], "recon", "seed", "input", "out"]),
        Command::Verify(_) => (
            "verify",
            &[SOURCE[0], SOURCE[1], SOURCE[2], "schedule", "steps", "sigma-grid", "sigma", "theorem", "samples", "seed", "out"],
        ),
        Command::G(_) => ("g", &[SOURCE[0], SOURCE[1], SOURCE[2], "sigma-grid", "sigma", "samples", "seed", "out"]),
    }
}

#[derive(Debug, Clone)]
pub enum Model {
    Analytic(AnalyticSource),
    Laplace(SmoothedLaplace),
}

#[derive(Debug, Clone)]
pub struct SourceSpec {
    pub name: String,
    pub model: Model,
    /// Set for Gaussian sources.
    pub spectrum: Option<Spectrum>,
}

impl SourceSpec {
    fn gaussian(name: String, spectrum: Spectrum) -> Result<Self> {
        Ok(SourceSpec {
            name,
            model: Model::Analytic(AnalyticSource::gaussian(&spectrum, None)?),
            spectrum: Some(spectrum),
        })
    }

    fn analytic(&self) -> Result<&AnalyticSource> {
        match &self.model {
            Model::Analytic(s) => Ok(s),
            Model::Laplace(_) => Err(Error::Config(format!("source {} has no closed-form posterior", self.name))),
        }
    }

    fn spectrum(&self) -> Result<&Spectrum> {
        self.spectrum
            .as_ref()
            .ok_or_else(|| Error::Config(format!("source {} is not Gaussian", self.name)))
    }
}

fn number(field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {what} {field:?}")))
}

fn count(field: &str, what: &str) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {what} {field:?}")))
}

pub fn parse_source(desc: &str) -> Result<SourceSpec> {
    let parts: Vec<&str> = desc.split(':').collect();
    let bad = || Error::Config(format!("cannot parse source {desc:?}"));
    let name = desc.to_string();
    match parts[0] {
        "normal" => {
            let dim = match parts.len() {
                1 => 1,
                2 => count(parts[1], "dimension")?,
                _ => return Err(bad()),
            };
            SourceSpec::gaussian(name, Spectrum::white(dim)?)
        }
        "power" => {
            if parts.len() != 3 {
                return Err(bad());
            }
            SourceSpec::gaussian(name, Spectrum::power_law(count(parts[1], "dimension")?, number(parts[2], "exponent")?)?)
        }
        "pair" => {
            if parts.len() != 3 {
                return Err(bad());
            }
            let source = AnalyticSource::symmetric_pair(number(parts[1], "mean")?, number(parts[2], "variance")?)?;
            Ok(SourceSpec { name, model: Model::Analytic(source), spectrum: None })
        }
        "gmm" => {
            if parts.len() != 2 {
                return Err(bad());
            }
            let (mut w, mut m, mut v) = (Vec::new(), Vec::new(), Vec::new());
            for component in parts[1].split(',') {
                let f: Vec<&str> = component.split('/').collect();
                if f.len() != 3 {
                    return Err(bad());
                }
                w.push(number(f[0], "weight")?);
                m.push(vec![number(f[1], "mean")?]);
                v.push(vec![number(f[2], "variance")?]);
            }
            let source = AnalyticSource::mixture(w, m, v, None)?;
            Ok(SourceSpec { name, model: Model::Analytic(source), spectrum: None })
        }
        "laplace" => {
            let smoothing = match parts.len() {
                1 => LAPLACE_SMOOTHING,
                2 => number(parts[1], "smoothing")?,
                _ => return Err(bad()),
            };
            if !(smoothing > 0.0 && smoothing.is_finite()) {
                return Err(Error::Config(format!("laplace smoothing {smoothing} must be positive")));
            }
            Ok(SourceSpec { name, model: Model::Laplace(SmoothedLaplace::unit_variance(smoothing)), spectrum: None })
        }
        _ => Err(bad()),
    }
}

pub fn parse_grid(desc: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = desc.split(':').collect();
    let grid = match parts[0] {
        "log" | "lin" if parts.len() == 4 => {
            let (lo, hi, n) = (number(parts[1], "grid start")?, number(parts[2], "grid end")?, count(parts[3], "grid size")?);
            if n == 0 || !(lo.is_finite() && hi.is_finite()) || (parts[0] == "log" && !(lo > 0.0 && hi > 0.0)) {
                return Err(Error::Config(format!("bad grid {desc:?}")));
            }
            if parts[0] == "log" {
                log_space(lo, hi, n)
            } else if n == 1 {
                vec![lo]
            } else {
                (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
            }
        }
        _ => desc.split(',').map(|f| number(f, "grid value")).collect::<Result<Vec<_>>>()?,
    };
    if grid.is_empty() {
        return Err(Error::Config("empty grid".into()));
    }
    Ok(grid)
}

/// Writes through a temporary file in the destination directory, then renames.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<&mut std::fs::File>) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// What a finished command reports back to the process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    AssertionFailure,
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let file = match &cli.config {
        Some(path) => Settings::from_toml(&std::fs::read_to_string(path)?)?,
        None => Settings::default(),
    };
    let (name, accepted) = allowed(&cli.command);
    let (Command::RdCurve(flags) | Command::Encode(flags) | Command::Decode(flags) | Command::Verify(flags) | Command::G(flags)) =
        &cli.command;
    if let Some(bad) = flags.present().into_iter().find(|f| !accepted.contains(f)) {
        return Err(Error::Config(format!("--{bad} does not apply to {name}")));
    }
    // Config files may carry keys for other subcommands; only accepted keys are merged.
    let mut base = Settings::default();
    for key in file.present() {
        if accepted.contains(&key) {
            base = copy_key(base, &file, key);
        }
    }
    let settings = flags.clone().or(base);
    init_threads();
    match &cli.command {
        Command::RdCurve(_) => cmd_rd_curve(&settings),
        Command::Encode(_) => cmd_encode(&settings),
        Command::Decode(_) => cmd_decode(&settings),
        Command::Verify(_) => cmd_verify(&settings),
        Command::G(_) => cmd_g(&settings),
    }
}

fn copy_key(mut to: Settings, from: &Settings, key: &str) -> Settings {
    match key {
        "source" => to.source.clone_from(&from.source),
        "spectrum" => to.spectrum.clone_from(&from.spectrum),
        "sample-matrix" => to.sample_matrix.clone_from(&from.sample_matrix),
        "schedule" => to.schedule.clone_from(&from.schedule),
        "steps" => to.steps = from.steps,
        "sigma-grid" => to.sigma_grid.clone_from(&from.sigma_grid),
        "theta-grid" => to.theta_grid.clone_from(&from.theta_grid),
        "chunk-bits" => to.chunk_bits = from.chunk_bits,
        "seed" => to.seed = from.seed,
        "out" => to.out.clone_from(&from.out),
        "theorem" => to.theorem.clone_from(&from.theorem),
        "samples" => to.samples = from.samples,
        "input" => to.input.clone_from(&from.input),
        "t-stop" => to.t_stop = from.t_stop,
        "sigma" => to.sigma = from.sigma,
        "rate" => to.rate = from.rate,
        "recon" => to.recon.clone_from(&from.recon),
        _ => unreachable!("unknown key {key}"),
    }
    to
}

/// Writes `<slug>.csv` per variant and `component_snr.csv` into `--out`.
pub fn cmd_rd_curve(s: &Settings) -> Result<Outcome> {
    let source = match s.source()? {
        Some(src) => src,
        None => parse_source(DEFAULT_RD_SOURCE)?,
    };
    let spectrum = source.spectrum()?;
    let dir = s.out()?;
    ensure_dir(dir)?;
    let sigma_grid = s.sigma_grid.as_deref().map(parse_grid).transpose()?;
    let theta_grid = s.theta_grid.as_deref().map(parse_grid).transpose()?;
    for variant in Variant::ALL {
        let grid = match variant.control() {
            crate::gaussian_rd::Control::Sigma => sigma_grid.clone(),
            crate::gaussian_rd::Control::Theta => theta_grid.clone(),
        }
        .unwrap_or_else(|| variant.default_grid(spectrum));
        let curve = sweep_curve(spectrum, variant, &grid)?;
        write_atomic(&dir.join(format!("{}.csv", variant.slug())), |w| {
            write_curves_csv(w, std::slice::from_ref(&curve))?;
            Ok(())
        })?;
    }
    let coding: Vec<Variant> = Variant::ALL.into_iter().filter(|v| !matches!(v, Variant::Rd | Variant::RdHalf)).collect();
    let rate = s.rate.unwrap_or(DEFAULT_SNR_RATE);
    write_atomic(&dir.join("component_snr.csv"), |w| write_snr_csv(w, spectrum, &coding, rate))?;
    Ok(Outcome::Success)
}

fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let mut rows = parse_matrix(&std::fs::read_to_string(path)?)?;
    if rows.len() != 1 {
        return Err(Error::Format(format!("{} must hold exactly one vector, found {} rows", path.display(), rows.len())));
    }
    Ok(rows.remove(0))
}

fn write_vector<W: Write>(w: &mut W, v: &[f64]) -> Result<()> {
    let line: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    writeln!(w, "{}", line.join(","))?;
    Ok(())
}

fn ledger_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(".ledger.csv");
    PathBuf::from(name)
}

/// Writes the bitstream to `--out` and the rate ledger next to it.
pub fn cmd_encode(s: &Settings) -> Result<Outcome> {
    let seed = s.seed("encode")?;
    let source = s.source()?.ok_or_else(|| Error::Config("encode needs a source".into()))?;
    let schedule = s.schedule()?;
    if s.t_stop.is_some() && s.sigma.is_some() {
        return Err(Error::Config("give either --t-stop or --sigma".into()));
    }
    let t_stop = s
        .t_stop
        .unwrap_or_else(|| schedule.nearest_step(s.sigma.unwrap_or(DEFAULT_ENCODE_SIGMA)));
    let x = read_vector(s.input()?)?;
    let out = s.out()?;
    let encoded = encode(
        &x,
        source.analytic()?,
        &schedule,
        t_stop,
        s.chunk_bits.unwrap_or(DEFAULT_CHUNK_BITS),
        StreamKey::from_seed(seed),
    )?;
    let bytes = encoded.bitstream.to_bytes()?;
    write_atomic(out, |w| Ok(w.write_all(&bytes)?))?;
    write_atomic(&ledger_path(out), |w| encoded.ledger.write_csv(w))?;
    println!(
        "{}: {} bytes, kl {} bits, t_stop {t_stop}",
        out.display(),
        bytes.len(),
        format_sig(encoded.ledger.total_kl_bits())
    );
    Ok(Outcome::Success)
}

/// Decodes `--input` and writes the reconstruction (or `z`) as one comma-separated row.
pub fn cmd_decode(s: &Settings) -> Result<Outcome> {
    let bitstream = Bitstream::from_bytes(&std::fs::read(s.input()?)?)?;
    let source = s.source()?.ok_or_else(|| Error::Config("decode needs the encoder's source".into()))?;
    let source = source.analytic()?;
    let schedule = DiffusionSchedule::new(bitstream.preset, bitstream.steps as usize)?;
    let z = decode_to_z(&bitstream, source, &schedule)?;
    let t = bitstream.t_stop as usize;
    let out = match s.recon.as_deref().unwrap_or("flow") {
        "flow" => reconstruct_flow(&z, source, &schedule, t, DEFAULT_ODE_STEPS)?,
        "ancestral" => {
            let mut rng = labelled(s.seed("ancestral decode")?, "decode/ancestral");
            reconstruct_ancestral(&z, source, &schedule, t, &mut rng)?
        }
        "z" => z,
        other => return Err(Error::Config(format!("unknown reconstruction {other:?} (flow, ancestral or z)"))),
    };
    write_atomic(s.out()?, |w| write_vector(w, &out))?;
    Ok(Outcome::Success)
}

fn apply_source(config: &mut SuiteConfig, source: &SourceSpec, theorems: &[TheoremId], sigma_grid: Option<&[f64]>) -> Result<()> {
    for &theorem in theorems {
        match theorem {
            TheoremId::GAnchors => {
                config.g_anchors = vec![match &source.model {
                    Model::Laplace(l) => GAnchor::Laplace { smoothing: l.smoothing },
                    Model::Analytic(a) if source.spectrum.as_ref().is_some_and(Spectrum::is_white) => {
                        let sigmas = match sigma_grid {
                            Some(g) => g.to_vec(),
                            None => match &config.g_anchors[0] {
                                GAnchor::Normal { sigmas, .. } => sigmas.clone(),
                                GAnchor::Laplace { .. } => vec![0.0],
                            },
                        };
                        let lambda = source.spectrum.as_ref().expect("white").lambdas()[0];
                        if lambda != 1.0 {
                            return Err(Error::Config(format!("G anchor needs a unit-variance source, got {}", source.name)));
                        }
                        GAnchor::Normal { dim: a.dim(), sigmas }
                    }
                    _ => return Err(Error::Config(format!("no known G value for source {}", source.name))),
                }];
            }
            TheoremId::RateBound => config.rate_bound_sources = vec![(source.name.clone(), source.analytic()?.clone())],
            _ => config.source = source.analytic()?.clone(),
        }
    }
    Ok(())
}

/// Writes `theorem_<id>.csv` per selected check into `--out`; fails with exit 1 on any failed assertion.
pub fn cmd_verify(s: &Settings) -> Result<Outcome> {
    let seed = s.seed("verify")?;
    let theorems = TheoremId::parse(s.theorem.as_deref().unwrap_or("all"))?;
    let mut config = SuiteConfig::new(seed);
    config.samples = s.samples;
    let grid = s.sigma_grid()?;
    if let Some(g) = &grid {
        config.rate_bound_sigmas = g.clone();
        config.ratio_sigmas = g.clone();
        config.realism_sigmas = g.clone();
        config.optimality_sigma = g[0];
        for anchor in &mut config.g_anchors {
            if let GAnchor::Normal { sigmas, .. } = anchor {
                sigmas.clone_from(g);
            }
        }
    }
    if s.schedule.is_some() || s.steps.is_some() {
        config.schedule = s.schedule()?;
        let steps = config.schedule.steps();
        let points = steps.min(10);
        config.smoothness_grid = (0..points).map(|k| 1 + k * (steps - 1) / (points - 1).max(1)).collect();
    }
    if let Some(source) = s.source()? {
        apply_source(&mut config, &source, &theorems, grid.as_deref())?;
    }
    let dir = s.out()?;
    ensure_dir(dir)?;
    let mut all_pass = true;
    for &theorem in &theorems {
        let reports = run_suite(&config, &[theorem])?;
        write_atomic(&dir.join(format!("theorem_{}.csv", theorem.id())), |w| {
            writeln!(w, "{}", TheoremReport::HEADER)?;
            for r in &reports {
                r.write_csv(w, false)?;
            }
            Ok(())
        })?;
        for r in &reports {
            for a in &r.assertions {
                println!("{} {}: {}", if a.pass { "PASS" } else { "FAIL" }, a.theorem, a.condition);
            }
            all_pass &= r.pass();
        }
    }
    Ok(if all_pass { Outcome::Success } else { Outcome::AssertionFailure })
}

pub const DEFAULT_G_SAMPLES: usize = 100_000;

/// Writes one row per noise level with `G`, `G̃` and their standard errors.
pub fn cmd_g(s: &Settings) -> Result<Outcome> {
    let seed = s.seed("g")?;
    let source = match s.source()? {
        Some(src) => src,
        None => parse_source("normal")?,
    };
    let grid = s.sigma_grid()?.unwrap_or_else(|| vec![0.0]);
    let n = s.samples.unwrap_or(DEFAULT_G_SAMPLES);
    let estimates = grid
        .iter()
        .map(|&sigma| match &source.model {
            Model::Analytic(a) => estimate_g_at(a, sigma, n, seed),
            Model::Laplace(l) => estimate_g_at(l, sigma, n, seed),
        })
        .collect::<Result<Vec<_>>>()?;
    write_atomic(s.out()?, |w| {
        writeln!(w, "sigma,n,dim,g,g_stderr,g_per_dim,g_tilde,g_tilde_stderr")?;
        for g in &estimates {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                format_sig(g.sigma),
                g.n,
                g.dim,
                format_sig(g.g_value),
                format_sig(g.std_error),
                format_sig(g.per_dim()),
                format_sig(g.g_tilde),
                format_sig(g.g_tilde_std_error())
            )?;
        }
        Ok(())
    })?;
    Ok(Outcome::Success)
}

/// Process entry point: 0 on success, 1 when an assertion fails, 2 on any error.
pub fn main() -> std::process::ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return std::process::ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Outcome::Success) => std::process::ExitCode::SUCCESS,
        Ok(Outcome::AssertionFailure) => std::process::ExitCode::from(1),
        Err(e) => {
            eprintln!("diffc: {e}");
            std::process::ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_parse_in_all_forms() {
        assert_eq!(parse_grid("0.1,0.5").unwrap(), vec![0.1, 0.5]);
        assert_eq!(parse_grid("lin:0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        let g = parse_grid("log:0.01:1:3").unwrap();
        assert!((g[1] - 0.1).abs() < 1e-15);
        assert!(parse_grid("log:0:1:3").is_err());
        assert!(parse_grid("a,b").is_err());
    }

    #[test]
    fn sources_parse() {
        assert_eq!(parse_source("normal:3").unwrap().analytic().unwrap().dim(), 3);
        assert_eq!(parse_source("power:8:2").unwrap().spectrum().unwrap().lambdas()[1], 0.25);
        let pair = parse_source("pair:2:0.25").unwrap();
        assert_eq!(pair.analytic().unwrap().means(), &[vec![-2.0], vec![2.0]]);
        let gmm = parse_source("gmm:0.25/-1/0.5,0.75/2/1").unwrap();
        assert_eq!(gmm.analytic().unwrap().weights(), &[0.25, 0.75]);
        assert!(matches!(parse_source("laplace").unwrap().model, Model::Laplace(_)));
        for bad in ["cauchy", "normal:x", "pair:1", "gmm:1/2", "laplace:-1"] {
            assert!(matches!(parse_source(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn flags_override_config_file() {
        let file = Settings::from_toml("seed = 3\nsamples = 10\nout = \"a\"").unwrap();
        let flags = Settings { seed: Some(9), ..Settings::default() };
        let merged = flags.or(file);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.samples, Some(10));
        assert!(Settings::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn unknown_flags_for_a_subcommand_are_rejected() {
        let cli = Cli::try_parse_from(["diffc", "rd-curve", "--seed", "1", "--out", "x"]).unwrap();
        assert!(matches!(run(cli), Err(Error::Config(_))));
    }

    #[test]
    fn seed_is_mandatory_for_stochastic_commands() {
        let s = Settings::default();
        assert!(matches!(s.seed("g"), Err(Error::Config(_))));
    }
}
