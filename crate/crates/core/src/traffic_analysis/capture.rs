//! Line-oriented DNS capture logs.
//!
//! ```text
//! ts=1650000000 dev=yi-camera ipl=UK udl=HK q=api.xiaoyi.com.tw a=203.0.113.7,203.0.113.8
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. `a=` may be empty.

use std::net::IpAddr;
use std::path::Path;

use crate::dns_wire::Name;
use crate::geo_zone::RegionCode;

use super::AnalysisError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureRecord {
    pub timestamp: u64,
    pub device_id: String,
    pub ip_based_location: RegionCode,
    pub user_defined_location: RegionCode,
    pub qname: Name,
    pub resolved_ips: Vec<IpAddr>,
}

impl CaptureRecord {
    pub fn to_line(&self) -> String {
        let ips: Vec<String> = self.resolved_ips.iter().map(|a| a.to_string()).collect();
        format!(
            "ts={} dev={} ipl={} udl={} q={} a={}",
            self.timestamp,
            self.device_id,
            self.ip_based_location,
            self.user_defined_location,
            self.qname,
            ips.join(",")
        )
    }
}

/// Records in non-decreasing time order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CaptureLog {
    records: Vec<CaptureRecord>,
    resorted: bool,
}

impl CaptureLog {
    /// Sorts by timestamp (stable) when needed and remembers that it did.
    pub fn new(mut records: Vec<CaptureRecord>) -> CaptureLog {
        let sorted = records.windows(2).all(|w| w[0].timestamp <= w[1].timestamp);
        if !sorted {
            records.sort_by_key(|r| r.timestamp);
        }
        CaptureLog {
            records,
            resorted: !sorted,
        }
    }

    pub fn records(&self) -> &[CaptureRecord] {
        &self.records
    }

    /// True when the input was out of time order and had to be sorted.
    pub fn was_resorted(&self) -> bool {
        self.resorted
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_device(&self, device: &str) -> bool {
        self.records.iter().any(|r| r.device_id == device)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_line());
            out.push('\n');
        }
        out
    }
}

pub fn ingest_log(path: impl AsRef<Path>) -> Result<CaptureLog, AnalysisError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| AnalysisError::Io(format!("{}: {e}", path.display())))?;
    parse_log(&text)
}

pub fn parse_log(text: &str) -> Result<CaptureLog, AnalysisError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rec = parse_record(line).map_err(|message| AnalysisError::Parse {
            line: i + 1,
            message,
        })?;
        records.push(rec);
    }
    Ok(CaptureLog::new(records))
}

fn parse_record(line: &str) -> Result<CaptureRecord, String> {
    let mut ts = None;
    let mut dev = None;
    let mut ipl = None;
    let mut udl = None;
    let mut q = None;
    let mut a = None;
    for field in line.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| format!("field {field:?} is not key=value"))?;
        let slot = match key {
            "ts" => &mut ts,
            "dev" => &mut dev,
            "ipl" => &mut ipl,
            "udl" => &mut udl,
            "q" => &mut q,
            "a" => &mut a,
            other => return Err(format!("unknown field {other:?}")),
        };
        if slot.replace(value).is_some() {
            return Err(format!("field {key:?} repeated"));
        }
    }
    fn need<'a>(v: Option<&'a str>, k: &str) -> Result<&'a str, String> {
        v.ok_or_else(|| format!("missing field {k:?}"))
    }
    let timestamp = need(ts, "ts")?
        .parse::<u64>()
        .map_err(|_| format!("timestamp {:?} is not a non-negative integer", ts.unwrap()))?;
    let device_id = need(dev, "dev")?;
    if device_id.is_empty() {
        return Err("empty device id".into());
    }
    let ip_based_location = RegionCode::new(need(ipl, "ipl")?).map_err(|e| e.to_string())?;
    let user_defined_location = RegionCode::new(need(udl, "udl")?).map_err(|e| e.to_string())?;
    let qname = Name::new(need(q, "q")?).map_err(|e| e.to_string())?;
    let resolved_ips = need(a, "a")?
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<IpAddr>().map_err(|_| format!("invalid address {s:?}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CaptureRecord {
        timestamp,
        device_id: device_id.to_string(),
        ip_based_location,
        user_defined_location,
        qname,
        resolved_ips,
    })
}
