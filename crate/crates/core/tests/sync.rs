use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::SeedableRng;

use ltewatch::cellsim::{generate, ScenarioConfig, Simulator};
use ltewatch::coding::qpsk::complex_noise;
use ltewatch::errlog::EventKind;
use ltewatch::grid::{CellConfig, IqTrace, SampleSource};
use ltewatch::pipeline::{DecodedSubframe, DecoderOptions, StreamDecoder};
use ltewatch::sync::detect::pss_detect;
use ltewatch::sync::acquire;
use ltewatch::Error;

fn quiet(frames: usize) -> ScenarioConfig {
    ScenarioConfig {
        frames,
        ue_arrival_rate: 0.0,
        si_period_frames: 0,
        paging_rate: 0.0,
        ..ScenarioConfig::default()
    }
}

fn stream(s: &ScenarioConfig) -> (StreamDecoder, Vec<DecodedSubframe>) {
    let mut sim = Simulator::new(s).unwrap();
    let opts = DecoderOptions { tuner_jobs: false, ..DecoderOptions::default() };
    let mut dec = StreamDecoder::new(sim.sample_rate(), opts);
    let mut out = Vec::new();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        if sim.read_chunk(&mut buf, 50_000).unwrap() == 0 {
            break;
        }
        dec.push(&buf, &mut out).unwrap();
    }
    dec.finish(&mut out).unwrap();
    (dec, out)
}

#[test]
fn pci_recovered_for_edge_identities() {
    for n1 in [0u16, 84, 167] {
        for n2 in 0..3 {
            let pci = 3 * n1 + n2;
            let s = ScenarioConfig { cfg: CellConfig::with_default_fft(25, pci, 1).unwrap(), initial_sfn: 513, ..quiet(3) };
            let (trace, _) = generate(&s).unwrap();
            let acq = acquire(&trace.samples, trace.sample_rate, 0).unwrap();
            assert_eq!(acq.state.pci, pci);
            assert_eq!(acq.state.frame_start, 0);
            assert_eq!(acq.state.sfn, 513);
            assert_eq!(acq.cfg.n_rb_dl, 25);
        }
    }
}

#[test]
fn noise_alone_is_no_cell() {
    let mut rng = StdRng::seed_from_u64(1);
    let samples: Vec<Complex64> = (0..3 * 76_800).map(|_| complex_noise(&mut rng, 1.0)).collect();
    let trace = IqTrace::new(samples, 7.68e6).unwrap();
    assert!(matches!(pss_detect(&trace), Err(Error::NoCell { .. })));
}

#[test]
fn slow_drift_is_tracked_without_resync() {
    let mut s = ScenarioConfig { initial_ues: 4, ..quiet(30) };
    s.impairments.drift_per_frame = 3.0;
    let truth = Simulator::new(&s).unwrap().truth().clone();
    let (dec, out) = stream(&s);
    assert_eq!(dec.log.count(EventKind::Resync), 0, "{}", dec.log.render());
    assert_eq!(dec.log.count(EventKind::SyncLoss), 0);
    assert!(dec.log.count(EventKind::Slew) > 0);
    let got: usize = out.iter().map(|d| d.report.dcis.len()).sum();
    assert_eq!(got, truth.dcis.len());
}

#[test]
fn jump_is_resynced_within_a_frame() {
    let mut s = ScenarioConfig { initial_ues: 4, ..quiet(20) };
    s.impairments.shifts = vec![(10, 100)];
    let truth = Simulator::new(&s).unwrap().truth().clone();
    let (dec, out) = stream(&s);
    assert!(dec.log.count(EventKind::Resync) + dec.log.count(EventKind::Reacquired) >= 1, "{}", dec.log.render());
    // frames after the jump decode exactly
    let after = |i: u64| i >= 110;
    let got: usize = out.iter().filter(|d| after(d.index)).map(|d| d.report.dcis.len()).sum();
    assert_eq!(got, truth.dcis.iter().filter(|r| after(r.index)).count());
    // subframe indices stay contiguous, so the frame number advanced by one each frame
    assert!(out.windows(2).all(|w| w[1].index == w[0].index + 1));
}

#[test]
fn perfect_trace_needs_no_adjustment() {
    let s = quiet(1000);
    let (dec, out) = stream(&s);
    assert_eq!(out.len(), 10_000);
    assert!(dec.log.events().is_empty(), "{}", dec.log.render());
    assert!(out.windows(2).all(|w| w[1].index == w[0].index + 1));
    assert_eq!(out.last().unwrap().index, 9_999);
}
