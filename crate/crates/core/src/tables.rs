//! Checked-in code tables.
//!
//! The files under `data/` are embedded at compile time and verified against
//! a SHA-256 digest the first time they are parsed.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

struct DataFile {
    name: &'static str,
    text: &'static str,
    sha256: &'static str,
}

const TBCC_POLY: DataFile = DataFile {
    name: "tbcc_poly.dat",
    text: include_str!("../data/tbcc_poly.dat"),
    sha256: "106b2e10455faab6ef5e14f465e579307c0d78427ca1e0b586f15a8b66d95993",
};

const CRC_POLY: DataFile = DataFile {
    name: "crc_poly.dat",
    text: include_str!("../data/crc_poly.dat"),
    sha256: "597a273238733dd3059272be7d9fa1109e66e32b4065d70c7688f34ad7c7ba5d",
};

const SUBBLOCK_PERM: DataFile = DataFile {
    name: "subblock_perm.dat",
    text: include_str!("../data/subblock_perm.dat"),
    sha256: "f2fab050daf5a248f67392be2555b1ca22abd19866cfb70cfda76024778fa7dc",
};

const QPP_SIZES: DataFile = DataFile {
    name: "qpp_sizes.dat",
    text: include_str!("../data/qpp_sizes.dat"),
    sha256: "d88235e53aed41bc9d559558af12bdbd1bab5bfe12e225906e3287cc3bc14d7a",
};

const SYNC_TABLES: DataFile = DataFile {
    name: "sync_tables.dat",
    text: include_str!("../data/sync_tables.dat"),
    sha256: "1a51852a924ff1675efe251f7c85fe8f9d024c34ca73de5d1cb03cc85593640d",
};

const TBS_TABLE: DataFile = DataFile {
    name: "tbs_table.dat",
    text: include_str!("../data/tbs_table.dat"),
    sha256: "7c7b35d70a4a081201269f52cfe10399d52a28a243e9045585e4f6808983c478",
};

impl DataFile {
    fn verified(&self) -> Result<&'static str> {
        let digest = hex::encode(Sha256::digest(self.text.as_bytes()));
        if digest != self.sha256 {
            return Err(Error::Table(format!(
                "{}: integrity hash mismatch (got {digest})",
                self.name
            )));
        }
        Ok(self.text)
    }

    /// Non-comment, non-empty lines.
    fn lines(&self) -> Result<impl Iterator<Item = &'static str>> {
        Ok(self
            .verified()?
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty()))
    }

    fn parse_err(&self, what: impl std::fmt::Display) -> Error {
        Error::Table(format!("{}: {what}", self.name))
    }
}

/// Convolutional code description.
#[derive(Debug, Clone)]
pub struct ConvSpec {
    pub constraint_length: usize,
    /// Generator polynomials, MSB = current input bit.
    pub polys: Vec<u32>,
}

/// Synchronisation signal building blocks.
#[derive(Debug, Clone)]
pub struct SyncTables {
    /// Zadoff-Chu root per N_ID_2.
    pub pss_roots: [u32; 3],
    pub x_s: [u8; 31],
    pub x_c: [u8; 31],
    pub x_z: [u8; 31],
    /// (m0, m1) per N_ID_1.
    pub m: Vec<(usize, usize)>,
}

#[derive(Debug)]
pub struct Tables {
    pub conv: ConvSpec,
    pub crc16_poly: u32,
    pub crc24a_poly: u32,
    pub subblock_perm: [usize; 32],
    /// block size -> (f1, f2)
    pub qpp: BTreeMap<usize, (usize, usize)>,
    /// `tbs[i_tbs][n_rb - 1]`
    pub tbs: Vec<Vec<u32>>,
    /// MCS -> TBS index; `None` for the retransmission-only indices.
    pub mcs_dl: [Option<u8>; 32],
    pub mcs_ul: [Option<u8>; 32],
    /// Format 1C sizes by TBS index.
    pub tbs_1c: [u32; 32],
    pub sync: SyncTables,
}

fn load_sync() -> Result<SyncTables> {
    let f = &SYNC_TABLES;
    let mut roots = [None; 3];
    let mut seqs: [Option<[u8; 31]>; 3] = [None; 3];
    let mut m = vec![None; 168];
    let num = |v: &str| v.parse::<usize>().map_err(|e| f.parse_err(e));
    for line in f.lines()? {
        let v: Vec<&str> = line.split_whitespace().collect();
        match v[..] {
            ["pss_root", n2, root] => {
                let n2 = num(n2)?;
                *roots.get_mut(n2).ok_or_else(|| f.parse_err("n_id_2 > 2"))? = Some(num(root)? as u32);
            }
            [name @ ("x_s" | "x_c" | "x_z"), bits] => {
                let b: Vec<u8> = bits.bytes().map(|c| c.wrapping_sub(b'0')).collect();
                let arr: [u8; 31] = b
                    .try_into()
                    .ok()
                    .filter(|a: &[u8; 31]| a.iter().all(|&x| x < 2))
                    .ok_or_else(|| f.parse_err(format!("{name}: expected 31 binary digits")))?;
                let slot = match name {
                    "x_s" => 0,
                    "x_c" => 1,
                    _ => 2,
                };
                seqs[slot] = Some(arr);
            }
            ["m", n1, m0, m1] => {
                let n1 = num(n1)?;
                *m.get_mut(n1).ok_or_else(|| f.parse_err("n_id_1 > 167"))? = Some((num(m0)?, num(m1)?));
            }
            _ => return Err(f.parse_err(format!("bad line `{line}`"))),
        }
    }
    let missing = || f.parse_err("incomplete table");
    Ok(SyncTables {
        pss_roots: [roots[0].ok_or_else(missing)?, roots[1].ok_or_else(missing)?, roots[2].ok_or_else(missing)?],
        x_s: seqs[0].ok_or_else(missing)?,
        x_c: seqs[1].ok_or_else(missing)?,
        x_z: seqs[2].ok_or_else(missing)?,
        m: m.into_iter().collect::<Option<_>>().ok_or_else(missing)?,
    })
}

fn load() -> Result<Tables> {
    let mut constraint_length = None;
    let mut polys = Vec::new();
    for line in TBCC_POLY.lines()? {
        let mut it = line.split_whitespace();
        match (it.next(), it.next()) {
            (Some("constraint_length"), Some(v)) => {
                constraint_length = Some(v.parse().map_err(|e| TBCC_POLY.parse_err(e))?)
            }
            (Some("poly"), Some(v)) => {
                polys.push(u32::from_str_radix(v, 8).map_err(|e| TBCC_POLY.parse_err(e))?)
            }
            _ => return Err(TBCC_POLY.parse_err(format!("bad line `{line}`"))),
        }
    }
    let conv = ConvSpec {
        constraint_length: constraint_length
            .ok_or_else(|| TBCC_POLY.parse_err("missing constraint_length"))?,
        polys,
    };

    let mut crc = BTreeMap::new();
    for line in CRC_POLY.lines()? {
        let v: Vec<&str> = line.split_whitespace().collect();
        let [name, width, poly] = v[..] else {
            return Err(CRC_POLY.parse_err(format!("bad line `{line}`")));
        };
        let width: u32 = width.parse().map_err(|e| CRC_POLY.parse_err(e))?;
        let poly = u32::from_str_radix(poly, 16).map_err(|e| CRC_POLY.parse_err(e))?;
        crc.insert(name, (width, poly));
    }
    let crc_poly = |name: &str, width: u32| match crc.get(name) {
        Some(&(w, p)) if w == width => Ok(p),
        _ => Err(CRC_POLY.parse_err(format!("missing {width}-bit `{name}`"))),
    };
    let crc16_poly = crc_poly("crc16", 16)?;
    let crc24a_poly = crc_poly("crc24a", 24)?;

    let perm: Vec<usize> = SUBBLOCK_PERM
        .lines()?
        .flat_map(|l| l.split_whitespace())
        .map(|v| v.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| SUBBLOCK_PERM.parse_err(e))?;
    let subblock_perm: [usize; 32] = perm
        .try_into()
        .map_err(|_| SUBBLOCK_PERM.parse_err("expected 32 entries"))?;

    let mut qpp = BTreeMap::new();
    for line in QPP_SIZES.lines()? {
        let v: Vec<usize> = line
            .split_whitespace()
            .map(|x| x.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| QPP_SIZES.parse_err(e))?;
        if v.len() != 3 {
            return Err(QPP_SIZES.parse_err(format!("bad line `{line}`")));
        }
        qpp.insert(v[0], (v[1], v[2]));
    }

    let f = &TBS_TABLE;
    let mut tbs: Vec<Vec<u32>> = Vec::new();
    let mut mcs_dl = [None; 32];
    let mut mcs_ul = [None; 32];
    let mut mcs_seen = [[false; 32]; 2];
    let mut tbs_1c = None;
    for line in f.lines()? {
        let v: Vec<&str> = line.split_whitespace().collect();
        match v[0] {
            "mcs" => {
                let [_, dir, mcs, itbs] = v[..] else {
                    return Err(f.parse_err(format!("bad line `{line}`")));
                };
                let mcs: usize = mcs.parse().map_err(|e| f.parse_err(e))?;
                if mcs >= 32 {
                    return Err(f.parse_err(format!("mcs {mcs} out of range")));
                }
                let itbs = match itbs {
                    "retx" => None,
                    x => Some(x.parse::<u8>().map_err(|e| f.parse_err(e))?),
                };
                let d = match dir {
                    "dl" => 0,
                    "ul" => 1,
                    _ => return Err(f.parse_err(format!("direction `{dir}`"))),
                };
                mcs_seen[d][mcs] = true;
                if d == 0 {
                    mcs_dl[mcs] = itbs;
                } else {
                    mcs_ul[mcs] = itbs;
                }
            }
            "tbs1c" => {
                let vals: Vec<u32> = v[1..]
                    .iter()
                    .map(|x| x.parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| f.parse_err(e))?;
                tbs_1c = Some(<[u32; 32]>::try_from(vals).map_err(|_| f.parse_err("tbs1c needs 32 values"))?);
            }
            _ => tbs.push(
                v.iter()
                    .map(|x| x.parse::<u32>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| f.parse_err(e))?,
            ),
        }
    }
    if tbs.len() != 27 || tbs.iter().any(|r| r.len() != 110) {
        return Err(f.parse_err("expected 27 rows of 110 columns"));
    }
    if mcs_seen.iter().any(|d| d.contains(&false)) {
        return Err(f.parse_err("incomplete mcs mapping"));
    }
    let tbs_1c = tbs_1c.ok_or_else(|| f.parse_err("missing tbs1c"))?;

    Ok(Tables {
        conv,
        crc16_poly,
        crc24a_poly,
        subblock_perm,
        qpp,
        tbs,
        mcs_dl,
        mcs_ul,
        tbs_1c,
        sync: load_sync()?,
    })
}

static TABLES: LazyLock<std::result::Result<Tables, String>> =
    LazyLock::new(|| load().map_err(|e| e.to_string()));

/// Loads and verifies all tables; call at startup to surface errors early.
pub fn try_tables() -> Result<&'static Tables> {
    TABLES.as_ref().map_err(|e| Error::Table(e.clone()))
}

/// Verified tables. Panics if the embedded data is corrupt, which can only
/// happen through a bad build.
pub fn tables() -> &'static Tables {
    try_tables().expect("embedded code tables failed verification")
}
