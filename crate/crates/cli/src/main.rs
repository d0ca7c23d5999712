use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use ltewatch::cellsim::{ScenarioConfig, Simulator};
use ltewatch::dcilog::{parse_log, render_log};
use ltewatch::grid::FileSource;
use ltewatch::pdcch::{DecodeMode, Direction};
use ltewatch::pipeline::{compare_modes, decode_monolithic, run_pipeline, stats, stats_csv, DecodeOutput, PipelineConfig};
use ltewatch::verifier::detection_stats;
use ltewatch::Error;

#[derive(Parser)]
#[command(name = "ltewatch", version, about = "LTE downlink control channel decoder")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic trace and its ground truth from a scenario file
    Simulate {
        scenario: PathBuf,
        /// Trace output (f32 I/Q); metadata goes next to it
        #[arg(short, long)]
        output: PathBuf,
        /// Ground-truth file [default: <output>.truth]
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Decode a trace into a control-message log
    Decode {
        trace: PathBuf,
        #[command(flatten)]
        decode: DecodeArgs,
    },
    /// Check a log against the shared-channel power measured in the trace
    Verify {
        trace: PathBuf,
        log: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Data-rate and MCS time series from a log
    Stats {
        log: PathBuf,
        /// Bin width in seconds
        #[arg(long, default_value_t = 1.0)]
        bin: f64,
        /// Users reported individually; the rest are pooled
        #[arg(long, default_value_t = 5)]
        top: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Segmented record/decode/fine-tune flow over a trace
    Pipeline {
        trace: PathBuf,
        #[command(flatten)]
        decode: DecodeArgs,
        /// Number of segment buffers
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Segment length in seconds
        #[arg(long, default_value_t = 0.5)]
        segment: f64,
        /// Tuner time budget per segment in seconds [default: (k-2) x segment]
        #[arg(long)]
        deadline: Option<f64>,
    },
    /// Per-frame detection of the full decoder against re-encode-only decoding
    Compare {
        trace: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DecodeArgs {
    /// DCI log output [default: stdout]
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Error log [default: <trace>.errlog]
    #[arg(long)]
    errlog: Option<PathBuf>,
    #[arg(long, default_value = "owl", value_parser = ["owl", "lteye"])]
    mode: String,
    /// Skip timing fine-tuning of undecoded locations
    #[arg(long)]
    no_finetune: bool,
    /// RNTIs known before the trace starts, one hex value per line
    #[arg(long, value_name = "FILE")]
    rnti_warmstart: Option<PathBuf>,
}

impl DecodeArgs {
    fn config(&self) -> Result<PipelineConfig, Error> {
        Ok(PipelineConfig {
            mode: self.mode.parse::<DecodeMode>()?,
            finetune: !self.no_finetune,
            warmstart: self.rnti_warmstart.as_deref().map(fs::read_to_string).transpose()?,
            ..PipelineConfig::default()
        })
    }

    fn write(&self, trace: &Path, out: &DecodeOutput) -> Result<(), Error> {
        emit(self.output.as_deref(), &render_log(&out.records))?;
        let errlog = self.errlog.clone().unwrap_or_else(|| trace.with_extension("errlog"));
        out.log.write(&errlog)?;
        Ok(())
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn summary(out: &DecodeOutput) {
    let s = &out.summary;
    eprintln!(
        "{} subframes, {} messages ({} from fine-tuning), {} uncertain locations, {} lost, {} tuner timeouts",
        s.subframes,
        out.records.len(),
        s.tuner_dcis,
        s.uncertain_locations,
        s.lost_locations,
        s.tuner_timeouts
    );
}

fn run(cmd: Cmd) -> Result<(), Error> {
    match cmd {
        Cmd::Simulate { scenario, output, truth } => {
            let s = ScenarioConfig::parse(&fs::read_to_string(&scenario)?)?;
            let gt = Simulator::new(&s)?.write_trace(&output)?;
            let truth = truth.unwrap_or_else(|| output.with_extension("truth"));
            fs::write(&truth, gt.render())?;
            eprintln!("{} frames, {} control messages, {} random accesses", s.frames, gt.dcis.len(), gt.rars.len());
        }
        Cmd::Decode { trace, decode } => {
            let out = decode_monolithic(&mut FileSource::open(&trace)?, &decode.config()?)?;
            decode.write(&trace, &out)?;
            summary(&out);
        }
        Cmd::Verify { trace, log, output } => {
            let records = parse_log(&fs::read_to_string(&log)?)?;
            let pcfg = PipelineConfig {
                finetune: false,
                measure_power: true,
                ..PipelineConfig::default()
            };
            let measured = decode_monolithic(&mut FileSource::open(&trace)?, &pcfg)?;
            let power = measured.power.expect("power requested");
            let mut per_sf = std::collections::HashMap::<u64, u32>::new();
            for r in records.iter().filter(|r| r.direction == Direction::Downlink) {
                *per_sf.entry(r.index).or_default() += u32::from(r.n_rb);
            }
            let det = detection_stats(&power, |i| per_sf.get(&i).copied().unwrap_or(0));
            emit(output.as_deref(), &det.to_csv())?;
            let (complete, frames) = det.complete_frames();
            eprintln!(
                "{complete}/{frames} frames fully decoded, block ratio {}",
                det.ratio().map_or("-".into(), |r| format!("{r:.4}"))
            );
        }
        Cmd::Stats { log, bin, top, output } => {
            let records = parse_log(&fs::read_to_string(&log)?)?;
            emit(output.as_deref(), &stats_csv(&stats(&records, bin, top)?))?;
        }
        Cmd::Pipeline { trace, decode, k, segment, deadline } => {
            let mut pcfg = decode.config()?;
            pcfg.k = k;
            pcfg.segment_s = segment;
            pcfg.finetune_deadline = Some(deadline.map_or_else(|| pcfg.max_deadline(), Duration::from_secs_f64));
            let out = run_pipeline(&mut FileSource::open(&trace)?, &pcfg)?;
            decode.write(&trace, &out)?;
            summary(&out);
        }
        Cmd::Compare { trace, output } => {
            let cmp = compare_modes(|| FileSource::open(&trace), &PipelineConfig::default())?;
            emit(output.as_deref(), &cmp.to_csv())?;
            let (worse, better) = cmp.worse_better();
            eprintln!("{} frames with traffic, full decoder below re-encode-only in {worse}, above in {better}", cmp.frame_pairs().len());
            for (lo, n) in cmp.ratio_histogram() {
                eprintln!("ratio {lo:.2}: {n}");
            }
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoCell { .. } | Error::SssAmbiguous { .. } | Error::MibFailure => 2,
        Error::Io(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
