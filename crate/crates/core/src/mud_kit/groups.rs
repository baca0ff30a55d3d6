//! Region-specific domain variants of one service.
//!
//! Group files are TOML:
//!
//! ```toml
//! [[group]]
//! canonical = "ot.io.mi.com"
//!
//! [group.variants]
//! SG = "sg.ot.io.mi.com"
//! DE = "de.ot.io.mi.com"
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use crate::dns_wire::Name;
use crate::geo_zone::RegionCode;

use super::MudError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionDomainGroup {
    canonical: Name,
    variants: BTreeMap<RegionCode, Name>,
}

impl RegionDomainGroup {
    /// Variants must be non-empty and pairwise distinct.
    pub fn new(
        canonical: Name,
        variants: BTreeMap<RegionCode, Name>,
    ) -> Result<RegionDomainGroup, MudError> {
        if variants.is_empty() {
            return Err(MudError::InvalidGroup(format!("{canonical}: no variants")));
        }
        let distinct: BTreeSet<&Name> = variants.values().collect();
        if distinct.len() != variants.len() {
            return Err(MudError::InvalidGroup(format!(
                "{canonical}: two regions share one variant"
            )));
        }
        Ok(RegionDomainGroup {
            canonical,
            variants,
        })
    }

    pub fn canonical(&self) -> &Name {
        &self.canonical
    }

    pub fn variants(&self) -> &BTreeMap<RegionCode, Name> {
        &self.variants
    }

    pub fn contains_variant(&self, name: &Name) -> bool {
        self.variants.values().any(|v| v == name)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupFile {
    #[serde(default)]
    group: Vec<GroupEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupEntry {
    canonical: Name,
    variants: BTreeMap<RegionCode, Name>,
}

pub fn parse_groups(text: &str) -> Result<Vec<RegionDomainGroup>, MudError> {
    let de = toml::Deserializer::new(text);
    let file: GroupFile = serde_path_to_error::deserialize(de).map_err(|e| MudError::Schema {
        path: e.path().to_string(),
        message: e.inner().message().to_string(),
    })?;
    file.group
        .into_iter()
        .map(|g| RegionDomainGroup::new(g.canonical, g.variants))
        .collect()
}

pub fn load_groups(path: impl AsRef<Path>) -> Result<Vec<RegionDomainGroup>, MudError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| MudError::Io(format!("{}: {e}", path.display())))?;
    parse_groups(&text)
}

pub fn groups_to_toml(groups: &[RegionDomainGroup]) -> String {
    let mut out = String::new();
    for (i, g) in groups.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("[[group]]\ncanonical = \"{}\"\n\n[group.variants]\n", g.canonical));
        for (r, v) in &g.variants {
            out.push_str(&format!("{r} = \"{v}\"\n"));
        }
    }
    out
}
