//! File formats: event CSVs, JSON documents, TOML configs, and campaign
//! traces.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tslg_core::config::{CaseConfig, CaseId};
use tslg_core::estimate::TraceRow;
use tslg_core::ndd::EventRecord;

#[derive(Debug, Serialize, Deserialize)]
struct CutinRow {
    range: f64,
    range_rate: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct FollowingRow {
    kind: String,
    v_lead: Option<f64>,
    range: Option<f64>,
    v_follow: Option<f64>,
    v: Option<f64>,
    u: Option<f64>,
}

/// Cut-in files have columns `range,range_rate`; car-following files
/// `kind,v_lead,range,v_follow,v,u` with `kind` one of `following` or
/// `free_driving` and the other kind's columns left empty.
pub fn write_events(path: &Path, case: CaseId, events: &[EventRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for e in events {
        match (*e, case) {
            (EventRecord::CutIn { range, range_rate }, CaseId::Cutin) => w.serialize(CutinRow { range, range_rate })?,
            (EventRecord::Following { v_lead, range, v_follow }, CaseId::HighwayExit | CaseId::CarFollowing) => {
                w.serialize(FollowingRow {
                    kind: "following".into(),
                    v_lead: Some(v_lead),
                    range: Some(range),
                    v_follow: Some(v_follow),
                    v: None,
                    u: None,
                })?
            }
            (EventRecord::FreeDriving { v, u }, CaseId::HighwayExit | CaseId::CarFollowing) => w.serialize(FollowingRow {
                kind: "free_driving".into(),
                v_lead: None,
                range: None,
                v_follow: None,
                v: Some(v),
                u: Some(u),
            })?,
            (e, case) => bail!("{:?} record does not belong in a {} event file", e, case),
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_events(path: &Path, case: CaseId) -> Result<Vec<EventRecord>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    match case {
        CaseId::Cutin => {
            for (i, row) in r.deserialize::<CutinRow>().enumerate() {
                let row = row.with_context(|| format!("{} record {}", path.display(), i + 1))?;
                out.push(EventRecord::CutIn {
                    range: row.range,
                    range_rate: row.range_rate,
                });
            }
        }
        CaseId::HighwayExit | CaseId::CarFollowing => {
            for (i, row) in r.deserialize::<FollowingRow>().enumerate() {
                let row = row.with_context(|| format!("{} record {}", path.display(), i + 1))?;
                let missing = || anyhow!("{} record {}: missing field for kind {}", path.display(), i + 1, row.kind);
                out.push(match row.kind.as_str() {
                    "following" => EventRecord::Following {
                        v_lead: row.v_lead.ok_or_else(missing)?,
                        range: row.range.ok_or_else(missing)?,
                        v_follow: row.v_follow.ok_or_else(missing)?,
                    },
                    "free_driving" => EventRecord::FreeDriving {
                        v: row.v.ok_or_else(missing)?,
                        u: row.u.ok_or_else(missing)?,
                    },
                    other => bail!("{} record {}: unknown kind {:?}", path.display(), i + 1, other),
                });
            }
        }
    }
    if out.is_empty() {
        bail!("{} holds no events", path.display());
    }
    Ok(out)
}

/// Pretty JSON with a trailing newline. Field order follows the type
/// definitions, so equal values always produce equal bytes.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let mut s = String::new();
    File::open(path)
        .with_context(|| format!("opening {}", path.display()))?
        .read_to_string(&mut s)?;
    serde_json::from_str(&s).with_context(|| format!("parsing {}", path.display()))
}

/// A case config from TOML. Missing sections take their defaults.
pub fn read_config(path: &Path) -> Result<CaseConfig> {
    let s = std::fs::read_to_string(path).with_context(|| format!("opening {}", path.display()))?;
    let cfg: CaseConfig = toml::from_str(&s).with_context(|| format!("parsing {}", path.display()))?;
    cfg.validate().map_err(|e| anyhow!("{}: {}", path.display(), e))?;
    Ok(cfg)
}

pub fn config_to_toml(cfg: &CaseConfig) -> Result<String> {
    Ok(toml::to_string_pretty(cfg)?)
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize().collect::<Result<_, _>>().map_err(Into::into)
}
