//! Baseband traces: in-memory form, raw f32 files with a `.meta` sidecar,
//! and a streaming source abstraction.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IqTrace {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    /// First frame boundary, once sync has found it.
    pub start_offset: Option<usize>,
}

impl IqTrace {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0) {
            return Err(Error::Config(format!("sample rate {sample_rate} must be positive")));
        }
        Ok(IqTrace {
            samples,
            sample_rate,
            start_offset: None,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

/// Contents of the `.meta` sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub sample_rate_hz: f64,
    pub n_rb_dl: Option<usize>,
    pub pci: Option<u16>,
}

impl TraceMeta {
    pub fn parse(text: &str) -> Result<Self> {
        let mut rate = None;
        let mut n_rb = None;
        let mut pci = None;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("meta line `{line}`")))?;
            let bad = || Error::Parse(format!("meta value `{line}`"));
            match k.trim() {
                "sample_rate_hz" => rate = Some(v.trim().parse::<f64>().map_err(|_| bad())?),
                "n_rb_dl" => n_rb = Some(v.trim().parse::<usize>().map_err(|_| bad())?),
                "pci" => pci = Some(v.trim().parse::<u16>().map_err(|_| bad())?),
                _ => {}
            }
        }
        let sample_rate_hz = rate.ok_or_else(|| Error::Parse("meta: missing sample_rate_hz".into()))?;
        Ok(TraceMeta {
            sample_rate_hz,
            n_rb_dl: n_rb,
            pci,
        })
    }

    pub fn render(&self) -> String {
        let mut s = format!("sample_rate_hz={}\n", self.sample_rate_hz);
        if let Some(n) = self.n_rb_dl {
            s += &format!("n_rb_dl={n}\n");
        }
        if let Some(p) = self.pci {
            s += &format!("pci={p}\n");
        }
        s
    }
}

/// `capture.iq` -> `capture.meta`
pub fn meta_path(trace_path: &Path) -> PathBuf {
    trace_path.with_extension("meta")
}

pub fn read_meta(trace_path: &Path) -> Result<TraceMeta> {
    TraceMeta::parse(&std::fs::read_to_string(meta_path(trace_path))?)
}

/// Streaming writer of interleaved little-endian f32 I/Q.
pub struct TraceWriter {
    out: BufWriter<File>,
    written: usize,
}

impl TraceWriter {
    pub fn create(path: &Path, meta: &TraceMeta) -> Result<Self> {
        std::fs::write(meta_path(path), meta.render())?;
        Ok(TraceWriter {
            out: BufWriter::with_capacity(1 << 20, File::create(path)?),
            written: 0,
        })
    }

    pub fn write(&mut self, samples: &[Complex64]) -> Result<()> {
        let mut buf = Vec::with_capacity(samples.len() * 8);
        for s in samples {
            buf.extend_from_slice(&(s.re as f32).to_le_bytes());
            buf.extend_from_slice(&(s.im as f32).to_le_bytes());
        }
        self.out.write_all(&buf)?;
        self.written += samples.len();
        Ok(())
    }

    pub fn samples_written(&self) -> usize {
        self.written
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn write_trace(path: &Path, trace: &IqTrace, n_rb_dl: Option<usize>, pci: Option<u16>) -> Result<()> {
    let meta = TraceMeta {
        sample_rate_hz: trace.sample_rate,
        n_rb_dl,
        pci,
    };
    let mut w = TraceWriter::create(path, &meta)?;
    w.write(&trace.samples)?;
    w.finish()
}

pub fn read_trace(path: &Path) -> Result<(IqTrace, TraceMeta)> {
    let meta = read_meta(path)?;
    let mut src = FileSource::open(path)?;
    let mut samples = Vec::new();
    while src.read_chunk(&mut samples, 1 << 20)? > 0 {}
    Ok((IqTrace::new(samples, meta.sample_rate_hz)?, meta))
}

/// Anything that yields samples in order: files, memory, the simulator.
pub trait SampleSource {
    /// Appends up to `max` samples to `buf`; returns how many, 0 at the end.
    fn read_chunk(&mut self, buf: &mut Vec<Complex64>, max: usize) -> Result<usize>;
    fn sample_rate(&self) -> f64;
}

pub struct FileSource {
    reader: BufReader<File>,
    sample_rate: f64,
}

impl FileSource {
    pub fn open(path: &Path) -> Result<Self> {
        let meta = read_meta(path)?;
        let file = File::open(path)?;
        if file.metadata()?.len() % 8 != 0 {
            return Err(Error::Parse(format!(
                "{}: length is not a whole number of f32 I/Q pairs",
                path.display()
            )));
        }
        Ok(FileSource {
            reader: BufReader::with_capacity(1 << 20, file),
            sample_rate: meta.sample_rate_hz,
        })
    }
}

impl SampleSource for FileSource {
    fn read_chunk(&mut self, buf: &mut Vec<Complex64>, max: usize) -> Result<usize> {
        let mut n = 0;
        while n < max {
            let avail = self.reader.fill_buf()?;
            if avail.len() < 8 {
                if avail.is_empty() {
                    break;
                }
                // a pair split across buffer refills
                let mut pair = [0u8; 8];
                self.reader.read_exact(&mut pair)?;
                buf.push(decode_pair(&pair));
                n += 1;
                continue;
            }
            let take = (avail.len() / 8).min(max - n);
            buf.extend(avail[..take * 8].chunks_exact(8).map(decode_pair));
            self.reader.consume(take * 8);
            n += take;
        }
        Ok(n)
    }

    fn sample_rate(&self) -> f64 {
        self.sample_rate
    }
}

fn decode_pair(b: &[u8]) -> Complex64 {
    let re = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
    let im = f32::from_le_bytes([b[4], b[5], b[6], b[7]]);
    Complex64::new(f64::from(re), f64::from(im))
}

/// In-memory source over a trace.
pub struct MemorySource<'a> {
    trace: &'a IqTrace,
    pos: usize,
}

impl<'a> MemorySource<'a> {
    pub fn new(trace: &'a IqTrace) -> Self {
        MemorySource { trace, pos: 0 }
    }
}

impl SampleSource for MemorySource<'_> {
    fn read_chunk(&mut self, buf: &mut Vec<Complex64>, max: usize) -> Result<usize> {
        let end = (self.pos + max).min(self.trace.samples.len());
        buf.extend_from_slice(&self.trace.samples[self.pos..end]);
        let n = end - self.pos;
        self.pos = end;
        Ok(n)
    }

    fn sample_rate(&self) -> f64 {
        self.trace.sample_rate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meta_round_trip_and_errors() {
        let m = TraceMeta {
            sample_rate_hz: 7.68e6,
            n_rb_dl: Some(25),
            pci: Some(301),
        };
        assert_eq!(TraceMeta::parse(&m.render()).unwrap(), m);
        assert!(TraceMeta::parse("n_rb_dl=25\n").is_err());
        assert!(TraceMeta::parse("sample_rate_hz=abc\n").is_err());
        let bare = TraceMeta::parse("sample_rate_hz=1920000\n").unwrap();
        assert_eq!((bare.n_rb_dl, bare.pci), (None, None));
    }

    #[test]
    fn file_round_trip_is_f32_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.iq");
        let samples: Vec<Complex64> = (0..1000)
            .map(|i| Complex64::new(f64::from(i as f32 * 0.25), -f64::from(i as f32)))
            .collect();
        let t = IqTrace::new(samples, 1.92e6).unwrap();
        write_trace(&path, &t, Some(6), None).unwrap();
        let (back, meta) = read_trace(&path).unwrap();
        assert_eq!(back, t);
        assert_eq!(meta.n_rb_dl, Some(6));
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.iq");
        std::fs::write(&path, [0u8; 12]).unwrap();
        std::fs::write(meta_path(&path), "sample_rate_hz=1920000\n").unwrap();
        assert!(FileSource::open(&path).is_err());
    }

    #[test]
    fn nonpositive_rate_rejected() {
        assert!(IqTrace::new(vec![], 0.0).is_err());
    }
}
