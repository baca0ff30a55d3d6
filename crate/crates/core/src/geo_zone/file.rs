//! Zone file reader.
//!
//! ```toml
//! origin = "example.iot"
//!
//! [regions]                      # optional; the built-in map is used when absent
//! HK = "198.18.8.0/24"
//! UK = "198.18.14.0/24"
//!
//! [[name]]
//! qname = "api.example.iot"
//! ttl = 300                      # optional, defaults to 300
//! default = ["10.1.0.1", "10.2.0.1"]   # optional, must equal the union
//! [name.answers]
//! UK = ["10.1.0.1"]              # region code from [regions] ...
//! HK = ["10.2.0.1"]
//! "192.0.2.0/24" = ["10.9.0.1"]  # ... or a literal CIDR prefix
//! ```

use std::collections::BTreeMap;
use std::net::IpAddr;
use std::path::Path;

use serde::Deserialize;

use super::{GeoZone, LocationPrefixMap, NameSpec, RegionCode, RegionalAnswer, ZoneError};
use crate::dns_wire::Name;
use crate::prefix::IpPrefix;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawZone {
    origin: Option<String>,
    regions: Option<BTreeMap<String, String>>,
    #[serde(default, rename = "name")]
    names: Vec<RawName>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawName {
    qname: String,
    ttl: Option<u32>,
    #[serde(default)]
    answers: BTreeMap<String, Vec<String>>,
    default: Option<Vec<String>>,
}

pub fn load_zone(path: impl AsRef<Path>) -> Result<GeoZone, ZoneError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ZoneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_zone(&text)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the `qname = "<name>"` declaration, for error context.
fn qname_line(text: &str, qname: &str) -> Option<usize> {
    text.lines()
        .position(|l| {
            let l = l.trim();
            l.starts_with("qname") && l.contains(&format!("\"{qname}\""))
        })
        .map(|i| i + 1)
}

pub fn parse_zone(text: &str) -> Result<GeoZone, ZoneError> {
    let raw: RawZone = toml::from_str(text).map_err(|e| ZoneError::Parse {
        line: e.span().map(|s| line_of(text, s.start)),
        field: "document".into(),
        message: e.message().to_string(),
    })?;

    let field_err = |line: Option<usize>, field: String, message: String| ZoneError::Parse {
        line,
        field,
        message,
    };

    let origin = raw
        .origin
        .as_deref()
        .map(Name::new)
        .transpose()
        .map_err(|e| field_err(None, "origin".into(), e.to_string()))?;

    let regions = match &raw.regions {
        Some(table) => {
            let mut entries = BTreeMap::new();
            for (code, prefix) in table {
                let code = RegionCode::new(code)
                    .map_err(|e| field_err(None, format!("regions.{code}"), e.to_string()))?;
                let prefix: IpPrefix = prefix
                    .parse()
                    .map_err(|e: crate::prefix::PrefixError| {
                        field_err(None, format!("regions.{code}"), e.to_string())
                    })?;
                entries.insert(code, prefix);
            }
            Some(
                LocationPrefixMap::new(entries)
                    .map_err(|e| field_err(None, "regions".into(), e.to_string()))?,
            )
        }
        None => None,
    };
    let fallback_map = LocationPrefixMap::default();
    let region_map = regions.as_ref().unwrap_or(&fallback_map);

    let mut names = Vec::with_capacity(raw.names.len());
    for (i, rn) in raw.names.into_iter().enumerate() {
        let line = qname_line(text, &rn.qname);
        let qname = Name::new(&rn.qname)
            .map_err(|e| field_err(line, format!("name[{i}].qname"), e.to_string()))?;
        if let Some(origin) = &origin {
            let inside = qname == *origin
                || qname.as_str().ends_with(&format!(".{}", origin.as_str()));
            if !inside {
                return Err(field_err(
                    line,
                    format!("name[{i}].qname"),
                    format!("{qname} is outside origin {origin}"),
                ));
            }
        }
        let mut answers = Vec::with_capacity(rn.answers.len());
        for (key, addrs) in &rn.answers {
            let field = format!("name[{i}].answers.{key}");
            let (prefix, region) = match RegionCode::new(key) {
                Ok(code) => (
                    region_map
                        .region_to_prefix(&code)
                        .map_err(|e| field_err(line, field.clone(), e.to_string()))?,
                    Some(code),
                ),
                Err(_) => (
                    key.parse::<IpPrefix>()
                        .map_err(|e| field_err(line, field.clone(), e.to_string()))?,
                    None,
                ),
            };
            let addresses = parse_addrs(addrs).map_err(|m| field_err(line, field.clone(), m))?;
            answers.push(RegionalAnswer {
                prefix,
                region,
                addresses,
                ttl: 0,
            });
        }
        let default = rn
            .default
            .as_ref()
            .map(|d| parse_addrs(d))
            .transpose()
            .map_err(|m| field_err(line, format!("name[{i}].default"), m))?;
        names.push(NameSpec {
            qname,
            ttl: rn.ttl,
            answers,
            default,
        });
    }

    GeoZone::new(origin, regions, names).map_err(|e| match e {
        ZoneError::Parse {
            line: None,
            field,
            message,
        } => {
            let line = field
                .strip_prefix("name ")
                .and_then(|rest| rest.split(' ').next())
                .and_then(|q| qname_line(text, q));
            ZoneError::Parse {
                line,
                field,
                message,
            }
        }
        other => other,
    })
}

fn parse_addrs(list: &[String]) -> Result<Vec<IpAddr>, String> {
    list.iter()
        .map(|s| s.parse::<IpAddr>().map_err(|_| format!("invalid address {s:?}")))
        .collect()
}
