//! Command-line surface: extract, shift-mel, shift-audio, analyze,
//! eval-curve, and transforms --check.
//!
//! Results go to standard output or files; diagnostics are JSON lines on
//! standard error. Exit codes: 0 success, 2 I/O or malformed files,
//! 3 invalid configuration or flags, 4 empty input set.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::audio::{read_wav, write_wav_f32, write_wav_pcm16};
use crate::config::MelConfig;
use crate::error::{Error, Result};
use crate::features::mel_spectrogram;
use crate::melf::{read_melf, write_melf};
use crate::metrics::{curve_to_csv, eval_curve, EvalConfig};
use crate::pitch::{estimate_f0, F0Params};
use crate::shift::{pitch_shift_mel, Interpolation, ShiftSpec};
use crate::transforms::TransformSet;
use crate::vocoder::{mel_to_audio_with, DEFAULT_ITERATIONS, DEFAULT_MOMENTUM};

#[derive(Debug, Parser)]
#[command(
    name = "melshift",
    version,
    about = "Pitch shifting directly on mel spectrograms via the pseudo-cepstrum"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract a mel log-spectrogram from a WAV file into a MELF file.
    Extract(ExtractArgs),
    /// Pitch-shift a MELF file in the mel domain.
    ShiftMel(ShiftMelArgs),
    /// Pitch-shift a WAV file end to end (extract, shift, Griffin-Lim).
    ShiftAudio(ShiftAudioArgs),
    /// Estimate the F0 contour of a WAV file and emit it as CSV.
    Analyze(AnalyzeArgs),
    /// Sweep a semitone grid over a directory of WAV files and report
    /// GPE/VDE/FFE curves.
    EvalCurve(EvalCurveArgs),
    /// Inspect the linear operators built from a config.
    Transforms(TransformsArgs),
}

/// Analysis-config loading shared by the commands that extract features.
/// File values come first, then any --set overrides.
#[derive(Debug, Args, Default)]
pub struct ConfigArgs {
    /// Config file with one `key = value` per line.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. --set n_mels=100. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    pub fn load(&self) -> Result<MelConfig> {
        let mut config = match &self.config {
            Some(path) => MelConfig::from_key_values(&fs::read_to_string(path)?)?,
            None => MelConfig::default(),
        };
        for item in &self.overrides {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                Error::Config(format!("--set expects KEY=VALUE, got {item:?}"))
            })?;
            config.apply_key(key, value)?;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    pub wav_in: PathBuf,
    pub melf_out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct ShiftArgs {
    /// Pitch shift in semitones; fractional values allowed.
    #[arg(long, allow_hyphen_values = true)]
    pub semitones: f64,
    /// Highest F0 assumed present; sets the source/envelope cutoff.
    #[arg(long = "f0max", default_value_t = 500.0)]
    pub f0_max: f64,
    /// Raised-cosine transition width at the cutoff, in quefrency bins.
    #[arg(long, default_value_t = 0)]
    pub smoothing: usize,
    /// Interpolation for relocated coefficients: nearest or linear.
    #[arg(long, default_value = "nearest", value_parser = Interpolation::parse)]
    pub interpolation: Interpolation,
}

impl ShiftArgs {
    fn spec(&self) -> ShiftSpec {
        ShiftSpec {
            semitones: self.semitones,
            f0_max: self.f0_max,
            smoothing_quefrency_bins: self.smoothing,
            interpolation: self.interpolation,
        }
    }
}

#[derive(Debug, Args)]
pub struct ShiftMelArgs {
    pub melf_in: PathBuf,
    pub melf_out: PathBuf,
    #[command(flatten)]
    pub shift: ShiftArgs,
}

#[derive(Debug, Args)]
pub struct ShiftAudioArgs {
    pub wav_in: PathBuf,
    pub wav_out: PathBuf,
    #[command(flatten)]
    pub shift: ShiftArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Griffin-Lim iterations.
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    pub iterations: usize,
    /// Griffin-Lim momentum, in [0, 1).
    #[arg(long, default_value_t = DEFAULT_MOMENTUM)]
    pub momentum: f64,
    /// Write 32-bit float samples instead of 16-bit PCM.
    #[arg(long)]
    pub float: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub wav_in: PathBuf,
    /// Write the contour CSV here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct EvalCurveArgs {
    /// Directory of WAV utterances.
    pub wav_dir: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    pub csv: PathBuf,
    /// Output JSON path; defaults to the CSV path with a .json extension.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Semitone grid: "lo:hi", "lo:hi:step", or a comma list like "-6,0,6".
    #[arg(long, default_value = "-12:12", allow_hyphen_values = true)]
    pub grid: String,
    /// Worker threads for utterance-level parallelism (0 = rayon default).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long = "f0max", default_value_t = 500.0)]
    pub f0_max: f64,
    #[arg(long, default_value_t = 0)]
    pub smoothing: usize,
    #[arg(long, default_value = "nearest", value_parser = Interpolation::parse)]
    pub interpolation: Interpolation,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    pub iterations: usize,
    #[arg(long, default_value_t = DEFAULT_MOMENTUM)]
    pub momentum: f64,
}

#[derive(Debug, Args)]
pub struct TransformsArgs {
    /// Print the operator invariant residuals as JSON.
    #[arg(long, required = true)]
    pub check: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
}

/// Parse a semitone grid spec: "lo:hi", "lo:hi:step", comma list, or a
/// single value.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |msg: String| Error::Config(msg);
    let spec = spec.trim();
    if spec.is_empty() {
        return Err(bad("empty grid spec".into()));
    }
    if spec.contains(',') {
        return spec
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(format!("bad grid value {s:?}")))
            })
            .collect();
    }
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() > 3 {
            return Err(bad(format!("bad grid range {spec:?}")));
        }
        let lo: f64 = parts[0]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad grid bound {:?}", parts[0])))?;
        let hi: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad grid bound {:?}", parts[1])))?;
        let step: f64 = if parts.len() == 3 {
            parts[2]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad grid step {:?}", parts[2])))?
        } else {
            1.0
        };
        if !(step > 0.0) || lo > hi {
            return Err(bad(format!("bad grid range {spec:?}")));
        }
        let mut values = Vec::new();
        let mut i = 0usize;
        loop {
            let v = lo + step * i as f64;
            if v > hi + 1e-9 {
                break;
            }
            values.push(v);
            i += 1;
        }
        return Ok(values);
    }
    Ok(vec![spec
        .parse::<f64>()
        .map_err(|_| bad(format!("bad grid value {spec:?}")))?])
}

/// Run a parsed command. Errors bubble up for the binary to report.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract(args) => cmd_extract(args),
        Command::ShiftMel(args) => cmd_shift_mel(args),
        Command::ShiftAudio(args) => cmd_shift_audio(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::EvalCurve(args) => cmd_eval_curve(args),
        Command::Transforms(args) => cmd_transforms(args),
    }
}

fn cmd_extract(args: ExtractArgs) -> Result<()> {
    let config = args.config.load()?;
    let audio = read_wav(&args.wav_in)?;
    let mel = mel_spectrogram(&audio, &config)?;
    write_melf(&mel, &args.melf_out)?;
    println!(
        "{}",
        json!({ "frames": mel.n_frames(), "bands": mel.n_mels() })
    );
    Ok(())
}

fn cmd_shift_mel(args: ShiftMelArgs) -> Result<()> {
    let mel = read_melf(&args.melf_in)?;
    let transforms = TransformSet::build(mel.config())?;
    let shifted = pitch_shift_mel(&mel, &args.shift.spec(), &transforms)?;
    write_melf(&shifted, &args.melf_out)?;
    Ok(())
}

fn cmd_shift_audio(args: ShiftAudioArgs) -> Result<()> {
    let config = args.config.load()?;
    let audio = read_wav(&args.wav_in)?;
    let mel = mel_spectrogram(&audio, &config)?;
    let transforms = TransformSet::build(&config)?;
    let shifted = pitch_shift_mel(&mel, &args.shift.spec(), &transforms)?;
    let out = mel_to_audio_with(&shifted, &transforms, args.iterations, args.momentum)?;
    if args.float {
        write_wav_f32(&args.wav_out, &out)?;
    } else {
        write_wav_pcm16(&args.wav_out, &out)?;
    }
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let config = args.config.load()?;
    let audio = read_wav(&args.wav_in)?;
    let params = F0Params {
        hop_length: config.hop_length,
        ..F0Params::default()
    };
    let contour = estimate_f0(&audio, &params)?;
    let mut csv = String::from("frame_index,time_sec,f0_hz,voiced\n");
    for i in 0..contour.len() {
        csv.push_str(&format!(
            "{},{:.6},{:.3},{}\n",
            i,
            contour.time_of_frame(i),
            contour.f0_hz[i],
            contour.voiced[i]
        ));
    }
    match &args.output {
        Some(path) => fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_eval_curve(args: EvalCurveArgs) -> Result<()> {
    let mel = args.config.load()?;
    let grid = parse_grid(&args.grid)?;

    let mut entries: Vec<PathBuf> = fs::read_dir(&args.wav_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
        })
        .collect();
    entries.sort();

    let mut utterances = Vec::new();
    let mut skipped = 0usize;
    for path in &entries {
        match read_wav(path) {
            Ok(audio) => utterances.push((path.display().to_string(), audio)),
            Err(e) => {
                skipped += 1;
                eprintln!("{}", json!({ "warning": format!("skipping {}: {e}", path.display()) }));
            }
        }
    }
    if utterances.is_empty() {
        return Err(Error::EmptyInputSet(args.wav_dir.clone()));
    }

    let eval_config = EvalConfig {
        f0: F0Params {
            hop_length: mel.hop_length,
            ..F0Params::default()
        },
        mel,
        f0_max: args.f0_max,
        smoothing_quefrency_bins: args.smoothing,
        interpolation: args.interpolation,
        gl_iterations: args.iterations,
        gl_momentum: args.momentum,
    };

    let run_eval = || eval_curve(&utterances, &grid, &eval_config);
    let (rows, warnings) = if args.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?
            .install(run_eval)?
    } else {
        run_eval()?
    };
    for w in &warnings {
        eprintln!("{}", json!({ "warning": w }));
    }

    fs::write(&args.csv, curve_to_csv(&rows))?;
    let json_path = args
        .json
        .clone()
        .unwrap_or_else(|| args.csv.with_extension("json"));
    fs::write(&json_path, serde_json::to_string_pretty(&rows)? + "\n")?;

    println!(
        "{}",
        json!({
            "processed": utterances.len() - warnings.len(),
            "skipped": skipped + warnings.len(),
            "rows": rows.len(),
        })
    );
    Ok(())
}

fn cmd_transforms(args: TransformsArgs) -> Result<()> {
    let config = args.config.load()?;
    let transforms = TransformSet::build(&config)?;
    if args.check {
        println!("{}", serde_json::to_string_pretty(&transforms.residuals())?);
    }
    Ok(())
}

/// Binary entry point: parse, run, map errors to exit codes with a JSON
/// diagnostic line on standard error.
pub fn main() -> ! {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprintln!(
                "{}",
                json!({ "kind": "config", "message": e.to_string().trim() })
            );
            std::process::exit(3);
        }
    };
    match run(cli) {
        Ok(()) => std::process::exit(0),
        Err(e) => {
            eprintln!(
                "{}",
                json!({ "kind": e.kind(), "message": e.to_string() })
            );
            std::process::exit(e.exit_code());
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(std::io::Error::other(e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing_covers_the_documented_forms() {
        assert_eq!(parse_grid("-12:12").unwrap().len(), 25);
        assert_eq!(parse_grid("-6,0,6").unwrap(), vec![-6.0, 0.0, 6.0]);
        assert_eq!(parse_grid("0").unwrap(), vec![0.0]);
        assert_eq!(parse_grid("-6:6:3").unwrap(), vec![-6.0, -3.0, 0.0, 3.0, 6.0]);
        assert!(parse_grid("6:-6").is_err());
        assert!(parse_grid("a:b").is_err());
        assert!(parse_grid("1:5:0").is_err());
        assert!(parse_grid("").is_err());
    }

    #[test]
    fn grid_range_is_inclusive_of_the_upper_bound() {
        let grid = parse_grid("-12:12").unwrap();
        assert_eq!(grid.first(), Some(&-12.0));
        assert_eq!(grid.last(), Some(&12.0));
    }

    #[test]
    fn config_args_apply_file_then_overrides() {
        let dir = std::env::temp_dir().join("melshift-cli-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("config.txt");
        std::fs::write(&path, "n_mels = 40\nf_max = 8000\n").unwrap();
        let args = ConfigArgs {
            config: Some(path),
            overrides: vec!["n_mels=64".into()],
        };
        let config = args.load().unwrap();
        assert_eq!(config.n_mels, 64);
        assert_eq!(config.f_max, 8000.0);
    }
}
