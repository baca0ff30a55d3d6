use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;

use crate::dns_wire::Name;
use crate::geo_zone::RegionCode;
use crate::traffic_analysis::{ratio_to_decimal, DomainSet};

use super::ace::{Ace, AceTuple, Action, Direction, Endpoint, MudFile, Port, Protocol};
use super::groups::RegionDomainGroup;
use super::MudError;

/// Protocol, ports and direction applied to every generated entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AceTemplate {
    pub protocol: Protocol,
    pub source_port: Port,
    pub destination_port: Port,
    pub direction: Direction,
}

impl Default for AceTemplate {
    /// TCP from any source port to 443, device-initiated.
    fn default() -> Self {
        AceTemplate {
            protocol: Protocol::Tcp,
            source_port: Port::Any,
            destination_port: Port::Num(443),
            direction: Direction::FromDevice,
        }
    }
}

pub fn default_mud_url(device_id: &str) -> String {
    format!("https://mud.example.com/{device_id}.json")
}

/// One accept entry per concrete name; pool members are expanded.
pub fn generate_mud(
    ds: &DomainSet,
    device_id: &str,
    template: &AceTemplate,
) -> Result<MudFile, MudError> {
    if ds.is_empty() {
        return Err(MudError::EmptyDomainSet);
    }
    let aces = ds
        .concrete_names()
        .into_iter()
        .map(|n| {
            Ace::new(
                Endpoint::Domain(n),
                template.protocol,
                template.source_port,
                template.destination_port,
                template.direction,
                Action::Accept,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MudFile::new(device_id, default_mud_url(device_id), aces))
}

/// Union of ACLs. The smallest MUD URL is kept so the result does not depend
/// on argument order.
pub fn unify(muds: &[MudFile]) -> Result<MudFile, MudError> {
    let first = muds.first().ok_or(MudError::NoInput)?;
    if let Some(other) = muds.iter().find(|m| m.device_id() != first.device_id()) {
        return Err(MudError::MixedDevices(
            first.device_id().to_string(),
            other.device_id().to_string(),
        ));
    }
    let url = muds.iter().map(MudFile::mud_url).min().unwrap();
    Ok(MudFile::new(
        first.device_id(),
        url,
        muds.iter().flat_map(|m| m.acl().iter().cloned()),
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CollapseReport {
    /// Variants named by a group but absent from the input.
    pub unmatched: Vec<(Name, RegionCode, Name)>,
    /// Groups whose variants disagree on protocol, ports, direction or action,
    /// with the number of distinct tuples kept.
    pub splits: Vec<(Name, usize)>,
}

impl CollapseReport {
    pub fn is_clean(&self) -> bool {
        self.unmatched.is_empty() && self.splits.is_empty()
    }
}

/// Replace regional variants by their group's canonical domain. A name listed
/// in several groups belongs to the first.
pub fn ecs_collapse(
    unified: &MudFile,
    groups: &[RegionDomainGroup],
) -> Result<(MudFile, CollapseReport), MudError> {
    let mut owner: BTreeMap<&Name, usize> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        for v in g.variants().values() {
            owner.entry(v).or_insert(i);
        }
    }
    let present = unified.domains();
    let mut report = CollapseReport::default();
    for g in groups {
        for (r, v) in g.variants() {
            if !present.contains(v) {
                report
                    .unmatched
                    .push((g.canonical().clone(), *r, v.clone()));
            }
        }
    }

    let mut tuples: BTreeMap<usize, BTreeSet<AceTuple>> = BTreeMap::new();
    let mut out = Vec::with_capacity(unified.acl().len());
    for ace in unified.acl() {
        match ace.endpoint().domain().and_then(|d| owner.get(d)) {
            Some(&g) => {
                tuples.entry(g).or_default().insert(ace.tuple());
            }
            None => out.push(ace.clone()),
        }
    }
    for (g, set) in tuples {
        let canonical = groups[g].canonical();
        if set.len() > 1 {
            report.splits.push((canonical.clone(), set.len()));
        }
        for t in set {
            out.push(Ace::from_tuple(Endpoint::Domain(canonical.clone()), t)?);
        }
    }
    Ok((
        MudFile::new(unified.device_id(), unified.mud_url(), out),
        report,
    ))
}

/// Labels, lowercase, that stand for a region without being its code.
pub const DEFAULT_REGION_ALIASES: [(&str, &str); 3] = [("eu", "DE"), ("gb", "UK"), ("tw", "HK")];

/// Propose groups of names that differ only in one region-like label.
/// Advisory: the result should be reviewed before [`ecs_collapse`].
pub fn suggest_groups(
    ds: &DomainSet,
    regions: &[RegionCode],
    aliases: &[(&str, &str)],
) -> Vec<RegionDomainGroup> {
    let wanted: BTreeSet<RegionCode> = regions.iter().copied().collect();
    let region_of = |label: &str| -> Option<RegionCode> {
        let lower = label.to_ascii_lowercase();
        let code = aliases
            .iter()
            .find(|(a, _)| *a == lower)
            .and_then(|(_, r)| RegionCode::new(r).ok())
            .or_else(|| RegionCode::new(&lower).ok())?;
        wanted.contains(&code).then_some(code)
    };

    // (position, remaining labels) -> region -> name
    let mut candidates: BTreeMap<(usize, Vec<String>), BTreeMap<RegionCode, Name>> =
        BTreeMap::new();
    for name in ds.concrete_names() {
        let labels: Vec<&str> = name.labels().collect();
        if labels.len() < 2 {
            continue;
        }
        for (i, label) in labels.iter().enumerate() {
            if let Some(code) = region_of(label) {
                let rest: Vec<String> = labels
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, l)| l.to_string())
                    .collect();
                candidates
                    .entry((i, rest))
                    .or_default()
                    .entry(code)
                    .or_insert_with(|| name.clone());
            }
        }
    }

    let mut ordered: Vec<_> = candidates.into_iter().filter(|(_, v)| v.len() >= 2).collect();
    ordered.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(&b.0)));
    let mut used: BTreeSet<Name> = BTreeSet::new();
    let mut out = Vec::new();
    for ((_, rest), variants) in ordered {
        let variants: BTreeMap<RegionCode, Name> = variants
            .into_iter()
            .filter(|(_, n)| !used.contains(n))
            .collect();
        if variants.len() < 2 {
            continue;
        }
        let Ok(canonical) = Name::new(&rest.join(".")) else {
            continue;
        };
        used.extend(variants.values().cloned());
        if let Ok(g) = RegionDomainGroup::new(canonical, variants) {
            out.push(g);
        }
    }
    out
}

/// Distinct domain endpoints; IP and MAC entries are not counted.
pub fn domain_count(mud: &MudFile) -> usize {
    mud.domains().len()
}

fn counts(unified: &MudFile, ecs: &MudFile) -> Result<(u64, u64), MudError> {
    let u = domain_count(unified) as u64;
    let e = domain_count(ecs) as u64;
    if u == 0 || e == 0 {
        return Err(MudError::DivisionGuard { unified: u, ecs: e });
    }
    if e > u {
        return Err(MudError::NotAReduction { unified: u, ecs: e });
    }
    Ok((u, e))
}

/// (unified - ecs) / unified.
pub fn reduction_ratio(unified: &MudFile, ecs: &MudFile) -> Result<Ratio<u64>, MudError> {
    let (u, e) = counts(unified, ecs)?;
    Ok(Ratio::new(u - e, u))
}

/// (unified - ecs) / ecs: how much larger the unified file is.
pub fn excess_ratio(unified: &MudFile, ecs: &MudFile) -> Result<Ratio<u64>, MudError> {
    let (u, e) = counts(unified, ecs)?;
    Ok(Ratio::new(u - e, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepRow {
    pub locations_included: usize,
    pub unified_domains: usize,
    pub ecs_domains: usize,
    pub ratio: Ratio<u64>,
}

/// Unify the first k per-location files for k = 1..=n and collapse each.
pub fn compare_sweep(
    per_location: &[MudFile],
    groups: &[RegionDomainGroup],
) -> Result<Vec<SweepRow>, MudError> {
    (1..=per_location.len())
        .map(|k| {
            let unified = unify(&per_location[..k])?;
            let (ecs, _) = ecs_collapse(&unified, groups)?;
            Ok(SweepRow {
                locations_included: k,
                unified_domains: domain_count(&unified),
                ecs_domains: domain_count(&ecs),
                ratio: reduction_ratio(&unified, &ecs)?,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("locations_included,unified_domains,ecs_domains,ratio\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.locations_included,
            r.unified_domains,
            r.ecs_domains,
            ratio_to_decimal(&r.ratio, 6)
        ));
    }
    out
}
