//! Scenario description, read from and written to `key = value` text.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::CellConfig;
use crate::pdcch::DciFormat;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub cfg: CellConfig,
    /// MIB PHICH resource code (0..3 for Ng 1/6, 1/2, 1, 2).
    pub phich_code: u8,
    pub frames: usize,
    pub initial_sfn: u16,
    /// Random accesses per second (Poisson).
    pub ue_arrival_rate: f64,
    /// Mean session length after random access, seconds.
    pub ue_lifetime_s: f64,
    /// UEs active from the start, never seen on random access.
    pub initial_ues: usize,
    /// Control messages per UE per second.
    pub dci_rate: f64,
    /// Share of UE messages that are uplink grants.
    pub ul_fraction: f64,
    /// Relative weights of downlink UE formats.
    pub format_mix: Vec<(DciFormat, f64)>,
    /// Relative weights of aggregation levels 1, 2, 4, 8.
    pub aggregation_mix: [f64; 4],
    pub mcs_max: u8,
    pub n_rb_min: usize,
    pub n_rb_max: usize,
    /// System information (format 1C) every this many frames, 0 = never.
    pub si_period_frames: usize,
    /// Paging messages per second.
    pub paging_rate: f64,
    /// Shared-channel power relative to CRS.
    pub pdsch_power: f64,
    pub impairments: Impairments,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Impairments {
    /// Per-RE SNR relative to CRS power; `None` = noiseless.
    pub snr_db: Option<f64>,
    pub cfo_hz: f64,
    /// `(frame, samples)`: the stream is delayed (positive) or advanced
    /// (negative) from the start of that frame on.
    pub shifts: Vec<(usize, i64)>,
    /// Slow timing drift in samples per frame, realised as one-sample steps.
    pub drift_per_frame: f64,
    /// Share of subframes whose control symbols are transmitted late.
    pub ctrl_offset_fraction: f64,
    pub ctrl_offset_samples: i64,
    /// Blocks loaded with foreign power and no control message.
    pub interference_rbs: Vec<usize>,
    pub interference_power: f64,
}

impl Default for Impairments {
    fn default() -> Self {
        Impairments {
            snr_db: None,
            cfo_hz: 0.0,
            shifts: Vec::new(),
            drift_per_frame: 0.0,
            ctrl_offset_fraction: 0.0,
            ctrl_offset_samples: 8,
            interference_rbs: Vec::new(),
            interference_power: 1.0,
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            cfg: CellConfig::with_default_fft(25, 1, 1).expect("default cell"),
            phich_code: 2,
            frames: 100,
            initial_sfn: 0,
            ue_arrival_rate: 5.0,
            ue_lifetime_s: 4.0,
            initial_ues: 0,
            dci_rate: 100.0,
            ul_fraction: 0.3,
            format_mix: vec![
                (DciFormat::F1A, 4.0),
                (DciFormat::F1, 3.0),
                (DciFormat::F1B, 1.0),
                (DciFormat::F1D, 1.0),
                (DciFormat::F2, 1.0),
                (DciFormat::F2A, 1.0),
            ],
            aggregation_mix: [4.0, 3.0, 2.0, 1.0],
            mcs_max: 28,
            n_rb_min: 1,
            n_rb_max: 6,
            si_period_frames: 2,
            paging_rate: 0.5,
            pdsch_power: 1.0,
            impairments: Impairments::default(),
            seed: 1,
        }
    }
}

fn bad(key: &str, value: &str) -> Error {
    Error::Config(format!("scenario key `{key}`: bad value `{value}`"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value))
}

impl ScenarioConfig {
    /// Parses `key = value` lines; unknown keys are an error, missing keys
    /// keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for line in text.lines().map(|l| l.split('#').next().unwrap_or("").trim()).filter(|l| !l.is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config(format!("scenario line `{line}`")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut s = ScenarioConfig::default();
        let (mut n_rb, mut pci, mut ports, mut fft) = (25usize, 1u16, 1usize, None);
        for (k, v) in &kv {
            let (k, v) = (k.as_str(), v.as_str());
            match k {
                "n_rb_dl" => n_rb = num(k, v)?,
                "pci" => pci = num(k, v)?,
                "n_ports" => ports = num(k, v)?,
                "fft_size" => fft = Some(num(k, v)?),
                "phich_code" => s.phich_code = num(k, v)?,
                "frames" => s.frames = num(k, v)?,
                "duration_s" => s.frames = (num::<f64>(k, v)? * 100.0).round() as usize,
                "initial_sfn" => s.initial_sfn = num(k, v)?,
                "ue_arrival_rate" => s.ue_arrival_rate = num(k, v)?,
                "ue_lifetime_s" => s.ue_lifetime_s = num(k, v)?,
                "initial_ues" => s.initial_ues = num(k, v)?,
                "dci_rate" => s.dci_rate = num(k, v)?,
                "ul_fraction" => s.ul_fraction = num(k, v)?,
                "format_mix" => {
                    s.format_mix = v
                        .split(',')
                        .map(|p| {
                            let (f, w) = p.split_once(':').ok_or_else(|| bad(k, v))?;
                            Ok((f.trim().parse()?, num(k, w.trim())?))
                        })
                        .collect::<Result<_>>()?
                }
                "aggregation_mix" => {
                    let w: Vec<f64> = v.split(',').map(|x| num(k, x.trim())).collect::<Result<_>>()?;
                    s.aggregation_mix = w.try_into().map_err(|_| bad(k, v))?;
                }
                "mcs_max" => s.mcs_max = num(k, v)?,
                "n_rb_min" => s.n_rb_min = num(k, v)?,
                "n_rb_max" => s.n_rb_max = num(k, v)?,
                "si_period_frames" => s.si_period_frames = num(k, v)?,
                "paging_rate" => s.paging_rate = num(k, v)?,
                "pdsch_power" => s.pdsch_power = num(k, v)?,
                "seed" => s.seed = num(k, v)?,
                "snr_db" => s.impairments.snr_db = if v == "inf" || v == "none" { None } else { Some(num(k, v)?) },
                "cfo_hz" => s.impairments.cfo_hz = num(k, v)?,
                "shifts" => {
                    s.impairments.shifts = v
                        .split(',')
                        .filter(|p| !p.trim().is_empty())
                        .map(|p| {
                            let (f, d) = p.split_once(':').ok_or_else(|| bad(k, v))?;
                            Ok((num(k, f.trim())?, num(k, d.trim().trim_start_matches('+'))?))
                        })
                        .collect::<Result<_>>()?
                }
                "drift_per_frame" => s.impairments.drift_per_frame = num(k, v)?,
                "ctrl_offset_fraction" => s.impairments.ctrl_offset_fraction = num(k, v)?,
                "ctrl_offset_samples" => s.impairments.ctrl_offset_samples = num(k, v)?,
                "interference_rbs" => {
                    s.impairments.interference_rbs = v.split(',').filter(|p| !p.trim().is_empty()).map(|p| num(k, p.trim())).collect::<Result<_>>()?
                }
                "interference_power" => s.impairments.interference_power = num(k, v)?,
                _ => return Err(Error::Config(format!("unknown scenario key `{k}`"))),
            }
        }
        s.cfg = match fft {
            Some(n) => CellConfig::new(n_rb, pci, ports, n)?,
            None => CellConfig::with_default_fft(n_rb, pci, ports)?,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn render(&self) -> String {
        let mut o = String::new();
        let c = &self.cfg;
        let i = &self.impairments;
        let join = |v: Vec<String>| v.join(",");
        let _ = writeln!(o, "n_rb_dl = {}\npci = {}\nn_ports = {}\nfft_size = {}", c.n_rb_dl, c.pci, c.n_ports, c.fft_size);
        let _ = writeln!(o, "phich_code = {}\nframes = {}\ninitial_sfn = {}", self.phich_code, self.frames, self.initial_sfn);
        let _ = writeln!(o, "ue_arrival_rate = {}\nue_lifetime_s = {}\ninitial_ues = {}", self.ue_arrival_rate, self.ue_lifetime_s, self.initial_ues);
        let _ = writeln!(o, "dci_rate = {}\nul_fraction = {}", self.dci_rate, self.ul_fraction);
        let _ = writeln!(o, "format_mix = {}", join(self.format_mix.iter().map(|(f, w)| format!("{f}:{w}")).collect()));
        let _ = writeln!(o, "aggregation_mix = {}", join(self.aggregation_mix.iter().map(|w| w.to_string()).collect()));
        let _ = writeln!(o, "mcs_max = {}\nn_rb_min = {}\nn_rb_max = {}", self.mcs_max, self.n_rb_min, self.n_rb_max);
        let _ = writeln!(o, "si_period_frames = {}\npaging_rate = {}\npdsch_power = {}", self.si_period_frames, self.paging_rate, self.pdsch_power);
        let _ = writeln!(o, "snr_db = {}", i.snr_db.map_or("inf".to_string(), |s| s.to_string()));
        let _ = writeln!(o, "cfo_hz = {}\nshifts = {}", i.cfo_hz, join(i.shifts.iter().map(|(f, d)| format!("{f}:{d}")).collect()));
        let _ = writeln!(o, "drift_per_frame = {}\nctrl_offset_fraction = {}\nctrl_offset_samples = {}", i.drift_per_frame, i.ctrl_offset_fraction, i.ctrl_offset_samples);
        let _ = writeln!(o, "interference_rbs = {}\ninterference_power = {}", join(i.interference_rbs.iter().map(|r| r.to_string()).collect()), i.interference_power);
        let _ = writeln!(o, "seed = {}", self.seed);
        o
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        let n = self.cfg.n_rb_dl;
        if self.n_rb_min == 0 || self.n_rb_min > self.n_rb_max || self.n_rb_max > n {
            return Err(Error::Config(format!("allocation size range {}..={} over {n} RBs", self.n_rb_min, self.n_rb_max)));
        }
        if self.mcs_max > 28 {
            return Err(Error::Config(format!("mcs_max {} above 28", self.mcs_max)));
        }
        if self.phich_code > 3 {
            return Err(Error::Config(format!("phich_code {}", self.phich_code)));
        }
        if self.impairments.interference_rbs.iter().any(|&r| r >= n) {
            return Err(Error::Config("interference block outside the carrier".into()));
        }
        if !(0.0..=1.0).contains(&self.ul_fraction) || !(0.0..=1.0).contains(&self.impairments.ctrl_offset_fraction) {
            return Err(Error::Config("fractions must lie in [0, 1]".into()));
        }
        let cp = self.cfg.cp_len(1) as i64;
        if self.impairments.ctrl_offset_samples.abs() > cp {
            return Err(Error::Config(format!("control offset beyond the cyclic prefix ({cp})")));
        }
        if self.format_mix.iter().any(|(f, _)| matches!(f, DciFormat::F0 | DciFormat::F1C)) {
            return Err(Error::Config("format_mix lists downlink UE formats only (no 0 or 1C)".into()));
        }
        Ok(())
    }

    pub fn ng_sixths(&self) -> usize {
        [1, 3, 6, 12][usize::from(self.phich_code & 3)]
    }

    pub fn duration_s(&self) -> f64 {
        self.frames as f64 * 0.01
    }
}
