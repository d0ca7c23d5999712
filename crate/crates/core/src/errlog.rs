//! Event log: one `abs_sf<TAB>event<TAB>detail` line per event.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    /// Frame timing moved by a few samples.
    Slew,
    /// Timing jump beyond the slew limit, recovered locally.
    Resync,
    /// PSS no longer found near the expected position.
    SyncLoss,
    /// Full cell search after a loss.
    Reacquired,
    MibFailure,
    CfiUncertain,
    RarCrcError,
    RarSkipped,
    /// Several identifiers matched the same candidate.
    DciCollision,
    TunerTimeout,
    /// Uncertain location abandoned at the tuner deadline.
    Lost,
    Overrun,
}

impl EventKind {
    pub const ALL: [EventKind; 12] = [
        EventKind::Slew,
        EventKind::Resync,
        EventKind::SyncLoss,
        EventKind::Reacquired,
        EventKind::MibFailure,
        EventKind::CfiUncertain,
        EventKind::RarCrcError,
        EventKind::RarSkipped,
        EventKind::DciCollision,
        EventKind::TunerTimeout,
        EventKind::Lost,
        EventKind::Overrun,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Slew => "slew",
            EventKind::Resync => "resync",
            EventKind::SyncLoss => "sync-loss",
            EventKind::Reacquired => "reacquired",
            EventKind::MibFailure => "mib-failure",
            EventKind::CfiUncertain => "cfi-uncertain",
            EventKind::RarCrcError => "rar-crc-error",
            EventKind::RarSkipped => "rar-skipped",
            EventKind::DciCollision => "dci-collision",
            EventKind::TunerTimeout => "tuner-timeout",
            EventKind::Lost => "lost",
            EventKind::Overrun => "overrun",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown event `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrEvent {
    pub abs_sf: u32,
    pub kind: EventKind,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ErrLog {
    events: Vec<ErrEvent>,
}

impl ErrLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, abs_sf: u32, kind: EventKind, detail: impl Into<String>) {
        let detail = detail.into().replace(['\t', '\n'], " ");
        log::debug!("{abs_sf} {kind}: {detail}");
        self.events.push(ErrEvent { abs_sf, kind, detail });
    }

    pub fn extend(&mut self, other: ErrLog) {
        self.events.extend(other.events);
    }

    pub fn events(&self) -> &[ErrEvent] {
        &self.events
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn render(&self) -> String {
        self.events
            .iter()
            .map(|e| format!("{}\t{}\t{}\n", e.abs_sf, e.kind, e.detail))
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut log = ErrLog::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let mut it = line.splitn(3, '\t');
            let (Some(sf), Some(kind), detail) = (it.next(), it.next(), it.next()) else {
                return Err(Error::Parse(format!("errlog line `{line}`")));
            };
            let abs_sf = sf.parse().map_err(|_| Error::Parse(format!("errlog time `{sf}`")))?;
            log.push(abs_sf, kind.parse()?, detail.unwrap_or(""));
        }
        Ok(log)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_parse_round_trip() {
        let mut log = ErrLog::new();
        log.push(10_239, EventKind::Resync, "jump 100\tsamples");
        log.push(0, EventKind::Slew, "");
        let text = log.render();
        assert_eq!(text.lines().next().unwrap(), "10239\tresync\tjump 100 samples");
        assert_eq!(ErrLog::parse(&text).unwrap(), log);
        assert!(ErrLog::parse("x\tslew\t").is_err());
        assert!(ErrLog::parse("1\tnope\t").is_err());
    }
}
