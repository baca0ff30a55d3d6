use std::collections::{BTreeMap, BTreeSet};
use std::net::IpAddr;

use num_rational::Ratio;

use crate::dns_wire::Name;
use crate::geo_zone::RegionCode;

use super::capture::{CaptureLog, CaptureRecord};
use super::pools::{collapse_pools, DomainSet, DEFAULT_POOL_THRESHOLD};
use super::AnalysisError;

/// Exact similarity value in [0, 1].
pub type Similarity = Ratio<u64>;

/// |a ∩ b| / |a ∪ b| over arbitrary ordered sets; two empty sets count as equal.
pub fn jaccard_sets<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> Similarity {
    let inter = a.intersection(b).count() as u64;
    let union = a.len() as u64 + b.len() as u64 - inter;
    if union == 0 {
        return Ratio::from_integer(1);
    }
    Ratio::new(inter, union)
}

pub fn jaccard(a: &DomainSet, b: &DomainSet) -> Similarity {
    jaccard_sets(&a.key_set(), &b.key_set())
}

/// Decimal rendering with `places` digits, rounded half up.
pub fn ratio_to_decimal(r: &Similarity, places: u32) -> String {
    let scale = 10u128.pow(places);
    let numer = *r.numer() as u128;
    let denom = *r.denom() as u128;
    let scaled = (numer * scale * 2 + denom) / (denom * 2);
    let int = scaled / scale;
    if places == 0 {
        return int.to_string();
    }
    format!("{int}.{:0width$}", scaled % scale, width = places as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CumulativePoint {
    pub bucket_end: u64,
    pub unique_domains: usize,
    pub unique_ips: usize,
}

/// Analyses over one log with a fixed pool threshold.
#[derive(Debug, Clone, Copy)]
pub struct Analyzer<'a> {
    log: &'a CaptureLog,
    pool_threshold: usize,
}

impl<'a> Analyzer<'a> {
    pub fn new(log: &'a CaptureLog) -> Analyzer<'a> {
        Analyzer {
            log,
            pool_threshold: DEFAULT_POOL_THRESHOLD,
        }
    }

    pub fn with_pool_threshold(mut self, threshold: usize) -> Analyzer<'a> {
        self.pool_threshold = threshold;
        self
    }

    fn check_device(&self, device: &str) -> Result<(), AnalysisError> {
        if self.log.has_device(device) {
            Ok(())
        } else {
            Err(AnalysisError::UnknownDevice(device.to_string()))
        }
    }

    /// Records of `device` at (ip location, user location), in time order.
    pub fn select(
        &self,
        device: &'a str,
        ipl: RegionCode,
        udl: RegionCode,
    ) -> impl Iterator<Item = &'a CaptureRecord> + 'a {
        self.log.records().iter().filter(move |r| {
            r.device_id == device && r.ip_based_location == ipl && r.user_defined_location == udl
        })
    }

    pub fn domain_set(
        &self,
        device: &str,
        ipl: RegionCode,
        udl: RegionCode,
        window: Option<(u64, u64)>,
    ) -> Result<DomainSet, AnalysisError> {
        self.check_device(device)?;
        let names: BTreeSet<&Name> = self
            .log
            .records()
            .iter()
            .filter(|r| {
                r.device_id == device
                    && r.ip_based_location == ipl
                    && r.user_defined_location == udl
            })
            .filter(|r| window.is_none_or(|(t0, t1)| (t0..=t1).contains(&r.timestamp)))
            .map(|r| &r.qname)
            .collect();
        Ok(collapse_pools(names, self.pool_threshold))
    }

    fn nonempty_set(
        &self,
        device: &str,
        ipl: RegionCode,
        udl: RegionCode,
    ) -> Result<DomainSet, AnalysisError> {
        let set = self.domain_set(device, ipl, udl, None)?;
        if set.is_empty() {
            return Err(AnalysisError::EmptySelection {
                device: device.to_string(),
                ip_location: ipl,
                user_location: udl,
            });
        }
        Ok(set)
    }

    /// Last first-occurrence time over the members of the selection's domain set.
    pub fn stabilization_time(
        &self,
        device: &str,
        ipl: RegionCode,
        udl: RegionCode,
    ) -> Result<Option<u64>, AnalysisError> {
        let set = self.domain_set(device, ipl, udl, None)?;
        let index = set.index();
        let mut first: BTreeMap<&str, u64> = BTreeMap::new();
        for r in self.log.records().iter().filter(|r| {
            r.device_id == device && r.ip_based_location == ipl && r.user_defined_location == udl
        }) {
            if let Some(key) = index.get(&r.qname) {
                first.entry(key).or_insert(r.timestamp);
            }
        }
        Ok(first.values().copied().max())
    }

    /// User-defined location switched, ip location fixed at `ipl`.
    pub fn uds(
        &self,
        device: &str,
        ipl: RegionCode,
        udl_a: RegionCode,
        udl_b: RegionCode,
    ) -> Result<Similarity, AnalysisError> {
        let a = self.nonempty_set(device, ipl, udl_a)?;
        let b = self.nonempty_set(device, ipl, udl_b)?;
        Ok(jaccard(&a, &b))
    }

    /// Ip location switched, user-defined location fixed at `udl`.
    pub fn ipbs(
        &self,
        device: &str,
        udl: RegionCode,
        ipl_a: RegionCode,
        ipl_b: RegionCode,
    ) -> Result<Similarity, AnalysisError> {
        let a = self.nonempty_set(device, ipl_a, udl)?;
        let b = self.nonempty_set(device, ipl_b, udl)?;
        Ok(jaccard(&a, &b))
    }

    /// Distinct qnames and addresses seen from the first record through each
    /// bucket end; bucket i ends at start + (i + 1) * bucket, exclusive.
    pub fn cumulative_counts(
        &self,
        device: &str,
        ipl: RegionCode,
        udl: RegionCode,
        bucket: u64,
    ) -> Result<Vec<CumulativePoint>, AnalysisError> {
        if bucket == 0 {
            return Err(AnalysisError::InvalidArgument("bucket must be positive".into()));
        }
        self.check_device(device)?;
        let records: Vec<&CaptureRecord> = self
            .log
            .records()
            .iter()
            .filter(|r| {
                r.device_id == device
                    && r.ip_based_location == ipl
                    && r.user_defined_location == udl
            })
            .collect();
        let (Some(first), Some(last)) = (records.first(), records.last()) else {
            return Ok(Vec::new());
        };
        let start = first.timestamp;
        let n = (last.timestamp - start) / bucket + 1;
        let mut names: BTreeSet<&Name> = BTreeSet::new();
        let mut ips: BTreeSet<IpAddr> = BTreeSet::new();
        let mut iter = records.iter().peekable();
        let mut out = Vec::with_capacity(n as usize);
        for i in 0..n {
            let bucket_end = start + (i + 1) * bucket;
            while let Some(r) = iter.next_if(|r| r.timestamp < bucket_end) {
                names.insert(&r.qname);
                ips.extend(r.resolved_ips.iter().copied());
            }
            out.push(CumulativePoint {
                bucket_end,
                unique_domains: collapse_pools(names.iter().copied(), self.pool_threshold).len(),
                unique_ips: ips.len(),
            });
        }
        Ok(out)
    }

    /// M[i][j] = uds(device, fixed, regions[i], regions[j]).
    pub fn similarity_matrix(
        &self,
        device: &str,
        fixed: RegionCode,
        regions: &[RegionCode],
    ) -> Result<Vec<Vec<Similarity>>, AnalysisError> {
        if regions.len() < 2 {
            return Err(AnalysisError::InvalidArgument(
                "a similarity matrix needs at least two regions".into(),
            ));
        }
        let sets = regions
            .iter()
            .map(|&r| self.nonempty_set(device, fixed, r))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(sets
            .iter()
            .map(|a| sets.iter().map(|b| jaccard(a, b)).collect())
            .collect())
    }
}

pub fn domain_set(
    log: &CaptureLog,
    device: &str,
    ipl: RegionCode,
    udl: RegionCode,
    window: Option<(u64, u64)>,
) -> Result<DomainSet, AnalysisError> {
    Analyzer::new(log).domain_set(device, ipl, udl, window)
}

pub fn stabilization_time(
    log: &CaptureLog,
    device: &str,
    ipl: RegionCode,
    udl: RegionCode,
) -> Result<Option<u64>, AnalysisError> {
    Analyzer::new(log).stabilization_time(device, ipl, udl)
}

pub fn uds(
    log: &CaptureLog,
    device: &str,
    ipl: RegionCode,
    udl_a: RegionCode,
    udl_b: RegionCode,
) -> Result<Similarity, AnalysisError> {
    Analyzer::new(log).uds(device, ipl, udl_a, udl_b)
}

pub fn ipbs(
    log: &CaptureLog,
    device: &str,
    udl: RegionCode,
    ipl_a: RegionCode,
    ipl_b: RegionCode,
) -> Result<Similarity, AnalysisError> {
    Analyzer::new(log).ipbs(device, udl, ipl_a, ipl_b)
}

pub fn cumulative_counts(
    log: &CaptureLog,
    device: &str,
    ipl: RegionCode,
    udl: RegionCode,
    bucket: u64,
) -> Result<Vec<CumulativePoint>, AnalysisError> {
    Analyzer::new(log).cumulative_counts(device, ipl, udl, bucket)
}

pub fn similarity_matrix(
    log: &CaptureLog,
    device: &str,
    fixed: RegionCode,
    regions: &[RegionCode],
) -> Result<Vec<Vec<Similarity>>, AnalysisError> {
    Analyzer::new(log).similarity_matrix(device, fixed, regions)
}

pub fn series_csv(points: &[CumulativePoint]) -> String {
    let mut out = String::from("bucket_end,unique_domains,unique_ips\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.bucket_end, p.unique_domains, p.unique_ips));
    }
    out
}

pub fn matrix_csv(regions: &[RegionCode], matrix: &[Vec<Similarity>]) -> String {
    let mut out = String::from("region");
    for r in regions {
        out.push(',');
        out.push_str(r.as_str());
    }
    out.push('\n');
    for (r, row) in regions.iter().zip(matrix) {
        out.push_str(r.as_str());
        for v in row {
            out.push(',');
            out.push_str(&ratio_to_decimal(v, 6));
        }
        out.push('\n');
    }
    out
}
