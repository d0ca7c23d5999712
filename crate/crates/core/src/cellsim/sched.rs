//! Traffic generation and eNodeB-side scheduling. Runs ahead of signal
//! synthesis and fixes every message, location and allocation of the run.

use std::collections::{BTreeSet, VecDeque};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Exp};

use super::config::ScenarioConfig;
use super::truth::{GroundTruth, RarTruth, SubframeTruth};
use crate::coding::BitString;
use crate::dcilog::DciLogRecord;
use crate::error::{Error, Result};
use crate::grid::pdsch::overlaps_broadcast;
use crate::pdcch::dci::{rbg_size, step_1c, Allocation, DciSpec, Field, FieldValues};
use crate::pdcch::decode::{C_RNTI_MAX, C_RNTI_MIN, MAX_CODE_RATE, P_RNTI, SI_RNTI};
use crate::pdcch::{parse_dci, CandidateLocation, Cfi, DciFormat, DciSizes, Direction, Layouts};
use crate::tracker::rar::RarMessage;
use crate::tracker::ra_rnti_for;

/// A message waiting longer than this many subframes is a scheduling error.
pub const MAX_DEFERRAL: usize = 40;
/// Random access response follows the preamble after this many subframes.
pub const RAR_DELAY: usize = 3;
/// First dedicated message follows the response after this many subframes.
pub const CONNECT_DELAY: usize = 6;
/// Highest code rate (payload plus CRC over channel bits) the scheduler uses.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedDci {
    pub rnti: u16,
    pub format: DciFormat,
    pub location: CandidateLocation,
    pub payload: BitString,
    /// Downlink blocks carrying the shared-channel part.
    pub rbs: u128,
    pub rar: Option<RarMessage>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubframePlan {
    /// Unwrapped subframe index.
    pub index: u64,
    pub cfi: Cfi,
    pub dcis: Vec<PlannedDci>,
    pub interference: u128,
    pub ctrl_offset: bool,
}

impl SubframePlan {
    pub fn subframe(&self) -> usize {
        (self.index % 10) as usize
    }

    pub fn sfn(&self) -> u16 {
        crate::dcilog::sfn_sf(self.index).0
    }
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub subframes: Vec<SubframePlan>,
    pub truth: GroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Rar,
    SystemInfo,
    Paging,
    Dedicated,
}

#[derive(Debug, Clone)]
struct Request {
    kind: Kind,
    created: usize,
    /// Not schedulable before this subframe.
    ready: usize,
    rnti: u16,
    format: DciFormat,
    aggregation: usize,
    n_rb: usize,
    mcs: u8,
    extra: FieldValues,
    rar: Option<RarMessage>,
    ue: Option<usize>,
}

#[derive(Debug, Clone)]
struct Ue {
    rnti: u16,
    /// First subframe of dedicated traffic, set once the response is sent.
    start: Option<usize>,
    lifetime: usize,
}

impl Ue {
    fn active(&self, t: usize) -> bool {
        self.start.is_some_and(|s| t >= s && t - s < self.lifetime)
    }
}

fn contiguous(start: usize, len: usize) -> u128 {
    ((1u128 << len) - 1) << start
}

fn weighted<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

/// Smallest aggregation at or above `wanted` that keeps the code rate sane.
fn min_aggregation(size: usize, wanted: usize) -> usize {
    [1, 2, 4, 8]
        .into_iter()
        .find(|&l| l >= wanted && (size + 16) as f64 <= MAX_CODE_RATE * (72 * l) as f64)
        .unwrap_or(8)
}

struct Scheduler<'a> {
    s: &'a ScenarioConfig,
    sizes: DciSizes,
    layouts: Layouts,
    rng: StdRng,
    ues: Vec<Ue>,
    used_rntis: BTreeSet<u16>,
    pending: VecDeque<Request>,
    interference: u128,
}

impl<'a> Scheduler<'a> {
    fn draw_rnti(&mut self) -> Result<u16> {
        if self.used_rntis.len() > usize::from(C_RNTI_MAX - C_RNTI_MIN) / 2 {
            return Err(Error::Config("C-RNTI space exhausted".into()));
        }
        loop {
            let r = self.rng.random_range(C_RNTI_MIN..=C_RNTI_MAX);
            if self.used_rntis.insert(r) {
                return Ok(r);
            }
        }
    }

    fn request(&mut self, kind: Kind, t: usize, rnti: u16, format: DciFormat) -> Request {
        let s = self.s;
        let wanted = [1, 2, 4, 8][weighted(&mut self.rng, &s.aggregation_mix)];
        let mcs = self.rng.random_range(0..=s.mcs_max);
        let n_rb = self.rng.random_range(s.n_rb_min..=s.n_rb_max);
        let mut extra = FieldValues::new();
        let draw = |f: Field, hi: u64, e: &mut FieldValues, rng: &mut StdRng| {
            e.insert(f, rng.random_range(0..hi));
        };
        match format {
            DciFormat::F0 => {
                draw(Field::Ndi, 2, &mut extra, &mut self.rng);
                draw(Field::Tpc, 4, &mut extra, &mut self.rng);
                draw(Field::Dmrs, 8, &mut extra, &mut self.rng);
            }
            DciFormat::F1C => {}
            _ => {
                draw(Field::Harq, 8, &mut extra, &mut self.rng);
                draw(Field::Ndi, 2, &mut extra, &mut self.rng);
                draw(Field::Tpc, 4, &mut extra, &mut self.rng);
                match format {
                    DciFormat::F1B | DciFormat::F1D => {
                        draw(Field::Tpmi, 4, &mut extra, &mut self.rng);
                        draw(Field::PmiConfirm, 2, &mut extra, &mut self.rng);
                        draw(Field::PowerOffset, 2, &mut extra, &mut self.rng);
                    }
                    DciFormat::F2 | DciFormat::F2A => {
                        draw(Field::Swap, 2, &mut extra, &mut self.rng);
                        draw(Field::Ndi2, 2, &mut extra, &mut self.rng);
                        draw(Field::Rv2, 4, &mut extra, &mut self.rng);
                        extra.insert(Field::Mcs2, u64::from(self.rng.random_range(0..=s.mcs_max)));
                        if format == DciFormat::F2 {
                            draw(Field::Precoding, 8, &mut extra, &mut self.rng);
                        }
                    }
                    _ => {}
                }
            }
        }
        Request {
            kind,
            created: t,
            ready: t,
            rnti,
            format,
            aggregation: min_aggregation(self.sizes.size(format), wanted),
            n_rb,
            mcs,
            extra,
            rar: None,
            ue: None,
        }
    }

    /// Picks downlink blocks for a request among `free`, or `None`.
    fn allocate(&mut self, req: &Request, free: u128, sf: usize) -> Option<(Allocation, u128)> {
        let n = self.s.cfg.n_rb_dl;
        match req.format {
            DciFormat::F0 => {
                let len = req.n_rb;
                let start = self.rng.random_range(0..=n - len);
                Some((Allocation::Contiguous { start, len }, 0))
            }
            DciFormat::F1 | DciFormat::F2 | DciFormat::F2A => {
                let p = rbg_size(n);
                let groups: Vec<usize> = (0..n.div_ceil(p))
                    .filter(|&g| {
                        let m = contiguous(g * p, p.min(n - g * p));
                        free & m == m
                    })
                    .collect();
                let want = req.n_rb.div_ceil(p).min(groups.len());
                if want == 0 {
                    return None;
                }
                let picked = rand::seq::index::sample(&mut self.rng, groups.len(), want);
                let mask = picked.iter().fold(0u64, |m, i| m | 1 << groups[i]);
                let spec_rbs = DciSpec {
                    format: req.format,
                    mcs: 0,
                    allocation: Allocation::Groups(mask),
                    extra: FieldValues::new(),
                }
                .rbs(n);
                Some((Allocation::Groups(mask), spec_rbs))
            }
            f => {
                let step = if f == DciFormat::F1C { step_1c(n) } else { 1 };
                let len = (req.n_rb.div_ceil(step) * step).min(n / step * step);
                let avoid_centre = req.kind == Kind::Rar;
                let starts: Vec<usize> = (0..=n.saturating_sub(len))
                    .step_by(step)
                    .filter(|&st| {
                        let m = contiguous(st, len);
                        free & m == m && !(avoid_centre && (st..st + len).any(|rb| overlaps_broadcast(&self.s.cfg, sf, rb)))
                    })
                    .collect();
                if starts.is_empty() {
                    return None;
                }
                let start = starts[self.rng.random_range(0..starts.len())];
                Some((Allocation::Contiguous { start, len }, contiguous(start, len)))
            }
        }
    }

    /// First free aligned location of `aggregation` CCEs.
    fn place(n_cce: usize, used: &[bool], aggregation: usize) -> Option<CandidateLocation> {
        (0..n_cce)
            .step_by(aggregation)
            .take_while(|s| s + aggregation <= n_cce)
            .find(|&s| used[s..s + aggregation].iter().all(|u| !u))
            .map(|s| CandidateLocation::new(s, aggregation))
    }

    /// Tries to fit the ready requests at one CFI. Returns the placed ones
    /// (index into `ready`, location, allocation, rbs).
    fn fit(&mut self, cfi: Cfi, ready: &[Request], sf: usize) -> Vec<(usize, CandidateLocation, Allocation, u128)> {
        let n_cce = self.layouts.get(cfi).n_cce;
        let mut used = vec![false; n_cce];
        let mut free = !self.interference & contiguous(0, self.s.cfg.n_rb_dl);
        let mut out = Vec::new();
        for (i, req) in ready.iter().enumerate() {
            let Some(loc) = Self::place(n_cce, &used, req.aggregation) else { continue };
            let Some((alloc, rbs)) = self.allocate(req, free, sf) else { continue };
            used[loc.cces()].iter_mut().for_each(|u| *u = true);
            free &= !rbs;
            out.push((i, loc, alloc, rbs));
        }
        out
    }
}

/// Builds the full message schedule of a scenario.
pub fn plan(s: &ScenarioConfig) -> Result<Plan> {
    s.validate()?;
    let n = s.cfg.n_rb_dl;
    let mut sch = Scheduler {
        s,
        sizes: DciSizes::new(n),
        layouts: Layouts::new(&s.cfg, s.ng_sixths()),
        rng: StdRng::seed_from_u64(s.seed),
        ues: Vec::new(),
        used_rntis: BTreeSet::new(),
        pending: VecDeque::new(),
        interference: s.impairments.interference_rbs.iter().fold(0u128, |m, &r| m | 1 << r),
    };
    let total = s.frames * 10;
    let base = u64::from(s.initial_sfn) * 10;
    let life = Exp::new(1.0 / s.ue_lifetime_s.max(1e-3)).map_err(|e| Error::Config(e.to_string()))?;
    let mut truth = GroundTruth::default();
    for _ in 0..s.initial_ues {
        let rnti = sch.draw_rnti()?;
        let lifetime = (life.sample(&mut sch.rng) * 1000.0) as usize;
        sch.ues.push(Ue { rnti, start: Some(0), lifetime });
        truth.warm_rntis.push(rnti);
    }
    // preamble arrivals, as subframe numbers
    let mut arrivals = VecDeque::new();
    if s.ue_arrival_rate > 0.0 {
        let gap = Exp::new(s.ue_arrival_rate).map_err(|e| Error::Config(e.to_string()))?;
        let mut t = gap.sample(&mut sch.rng);
        while t * 1000.0 < total as f64 {
            arrivals.push_back((t * 1000.0) as usize);
            t += gap.sample(&mut sch.rng);
        }
    }
    let p_dci = s.dci_rate / 1000.0;
    let dl_formats: Vec<DciFormat> = s.format_mix.iter().map(|(f, _)| *f).collect();
    let dl_weights: Vec<f64> = s.format_mix.iter().map(|(_, w)| *w).collect();
    let mut subframes = Vec::with_capacity(total);

    for t in 0..total {
        let index = base + t as u64;
        let sf = (index % 10) as usize;
        let frame = (index / 10) as usize;
        while arrivals.front().is_some_and(|&a| a <= t) {
            let a = arrivals.pop_front().expect("front");
            let rnti = sch.draw_rnti()?;
            let ra_rnti = ra_rnti_for((a % 10) as u8)?;
            let lifetime = (life.sample(&mut sch.rng) * 1000.0) as usize;
            sch.ues.push(Ue { rnti, start: None, lifetime });
            let ue = sch.ues.len() - 1;
            let ta = sch.rng.random_range(0..64u16);
            let grant = sch.rng.random_range(0..1u32 << 20);
            let preamble = sch.rng.random_range(0..64u8);
            let mut extra = FieldValues::new();
            extra.insert(Field::Tpc, 2);
            sch.pending.push_back(Request {
                kind: Kind::Rar,
                created: a,
                ready: a + RAR_DELAY,
                rnti: ra_rnti,
                format: DciFormat::F1A,
                aggregation: 4,
                n_rb: 3,
                mcs: 0,
                extra,
                rar: Some(RarMessage::new(preamble, ta, grant, rnti)),
                ue: Some(ue),
            });
        }
        if s.si_period_frames > 0 && sf == 5 && frame.is_multiple_of(s.si_period_frames) {
            let mut r = sch.request(Kind::SystemInfo, t, SI_RNTI, DciFormat::F1C);
            r.mcs = sch.rng.random_range(0..=8);
            r.aggregation = 4;
            sch.pending.push_back(r);
        }
        if s.paging_rate > 0.0 && sch.rng.random::<f64>() < s.paging_rate / 1000.0 {
            let mut r = sch.request(Kind::Paging, t, P_RNTI, DciFormat::F1A);
            r.mcs = sch.rng.random_range(0..=9);
            r.extra.insert(Field::Tpc, 0);
            r.aggregation = r.aggregation.max(4);
            sch.pending.push_back(r);
        }
        for u in 0..sch.ues.len() {
            if !sch.ues[u].active(t) {
                continue;
            }
            let rnti = sch.ues[u].rnti;
            if sch.rng.random::<f64>() < p_dci {
                let format = if sch.rng.random::<f64>() < s.ul_fraction {
                    DciFormat::F0
                } else {
                    dl_formats[weighted(&mut sch.rng, &dl_weights)]
                };
                let mut r = sch.request(Kind::Dedicated, t, rnti, format);
                r.ue = Some(u);
                sch.pending.push_back(r);
            }
        }
        // expired sessions lose their queued traffic
        let ues = &sch.ues;
        sch.pending.retain(|r| r.kind != Kind::Dedicated || r.ue.is_none_or(|u| ues[u].active(t)));

        let mut ready: Vec<Request> = Vec::new();
        let mut later = VecDeque::new();
        for r in sch.pending.drain(..) {
            if r.ready <= t {
                ready.push(r);
            } else {
                later.push_back(r);
            }
        }
        ready.sort_by_key(|r| (r.kind, r.created));
        let mut chosen = None;
        for cfi in Cfi::ALL {
            let placed = sch.fit(cfi, &ready, sf);
            let complete = placed.len() == ready.len();
            if complete || cfi == Cfi::ALL[2] {
                chosen = Some((cfi, placed));
                break;
            }
        }
        let (cfi, placed) = chosen.expect("CFI 3 always chosen last");
        let mut dcis = Vec::with_capacity(placed.len());
        let mut occupied = sch.interference;
        let mut done = vec![false; ready.len()];
        for (i, loc, allocation, rbs) in placed {
            let req = &ready[i];
            done[i] = true;
            let spec = DciSpec {
                format: req.format,
                mcs: req.mcs,
                allocation,
                extra: req.extra.clone(),
            };
            let payload = sch.sizes.pack(req.format, &spec.values(&sch.sizes)?)?;
            let fields = parse_dci(&payload, req.format, &sch.sizes, req.rnti)?;
            occupied |= rbs;
            truth.dcis.push(DciLogRecord {
                index,
                rnti: req.rnti,
                direction: req.format.direction(),
                format: fields.format,
                mcs: fields.mcs,
                n_rb: fields.n_rb,
                tbs: fields.tbs,
                cce_start: loc.cce_start,
                aggregation: loc.aggregation,
                decode_path: None,
                cfi: cfi.value(),
            });
            if let Some(msg) = &req.rar {
                truth.rars.push(RarTruth {
                    index,
                    ra_rnti: req.rnti,
                    temp_crnti: msg.temp_crnti,
                });
                sch.ues[req.ue.expect("response belongs to a UE")].start = Some(t + CONNECT_DELAY);
            }
            dcis.push(PlannedDci {
                rnti: req.rnti,
                format: req.format,
                location: loc,
                payload,
                rbs: if req.format.direction() == Direction::Downlink { rbs } else { 0 },
                rar: req.rar.clone(),
            });
        }
        for (r, d) in ready.into_iter().zip(done) {
            if d {
                continue;
            }
            if t - r.ready >= MAX_DEFERRAL {
                return Err(Error::Schedule {
                    abs_sf: (index % 10_240) as u32,
                    detail: format!("{} message to {:#06x} deferred {} subframes", r.format, r.rnti, t - r.ready),
                });
            }
            later.push_back(r);
        }
        sch.pending = later;
        dcis.sort_by_key(|d| d.location.cce_start);
        let ctrl_offset = s.impairments.ctrl_offset_fraction > 0.0 && sch.rng.random::<f64>() < s.impairments.ctrl_offset_fraction;
        truth.subframes.push(SubframeTruth {
            index,
            cfi: cfi.value(),
            occupied,
            interference: sch.interference,
            ctrl_offset,
        });
        subframes.push(SubframePlan {
            index,
            cfi,
            dcis,
            interference: sch.interference,
            ctrl_offset,
        });
    }
    truth.dcis.sort_by_key(|r| (r.index, r.cce_start));
    Ok(Plan { subframes, truth })
}
