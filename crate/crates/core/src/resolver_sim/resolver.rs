use std::fmt;
use std::net::IpAddr;
use std::str::FromStr;

use serde::{Deserialize, Deserializer};

use crate::dns_wire::{DnsMessage, EcsOption, Name, QType, Rcode, ResourceRecord};
use crate::geo_zone::RegionCode;
use crate::prefix::Family;

use super::cache::{Cache, CacheEntry};
use super::{AuthoritativeServer, InProcess, SimError, Upstream};

/// Prefix length a rewriting resolver uses unless told otherwise.
pub const DEFAULT_REWRITE_PREFIX_LEN: u8 = 24;

/// What a recursive resolver does with the client subnet on the way upstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResolverPolicy {
    /// Pass the client's option unchanged.
    Forward,
    /// Drop it.
    Strip,
    /// Replace it with the querying client's address cut to this many bits.
    RewriteClientSubnet(u8),
}

impl ResolverPolicy {
    pub fn rewrite(prefix_len: u8) -> Result<ResolverPolicy, SimError> {
        if prefix_len > 32 {
            return Err(SimError::InvalidConfig(format!(
                "rewrite prefix length {prefix_len} exceeds 32"
            )));
        }
        Ok(ResolverPolicy::RewriteClientSubnet(prefix_len))
    }

    /// The subnet sent upstream for a query carrying `ecs` from `client`.
    pub fn apply(&self, ecs: Option<&EcsOption>, client: IpAddr) -> Option<EcsOption> {
        match *self {
            ResolverPolicy::Forward => ecs.cloned(),
            ResolverPolicy::Strip => None,
            ResolverPolicy::RewriteClientSubnet(len) => {
                let len = len.min(Family::of(&client).max_len());
                Some(EcsOption::from_addr(client, len).expect("length clamped to family"))
            }
        }
    }
}

impl fmt::Display for ResolverPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResolverPolicy::Forward => f.write_str("forward"),
            ResolverPolicy::Strip => f.write_str("strip"),
            ResolverPolicy::RewriteClientSubnet(n) => write!(f, "rewrite:{n}"),
        }
    }
}

impl FromStr for ResolverPolicy {
    type Err = SimError;

    /// `forward`, `strip`, `rewrite` or `rewrite:<len>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "forward" => Ok(ResolverPolicy::Forward),
            "strip" => Ok(ResolverPolicy::Strip),
            "rewrite" => Ok(ResolverPolicy::RewriteClientSubnet(DEFAULT_REWRITE_PREFIX_LEN)),
            other => match other.strip_prefix("rewrite:") {
                Some(n) => ResolverPolicy::rewrite(n.parse().map_err(|_| {
                    SimError::InvalidConfig(format!("bad rewrite prefix length in {s:?}"))
                })?),
                None => Err(SimError::InvalidConfig(format!("unknown policy {s:?}"))),
            },
        }
    }
}

impl<'de> Deserialize<'de> for ResolverPolicy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Everything that happened while answering one client query.
#[derive(Debug, Clone)]
pub struct Resolution {
    pub response: DnsMessage,
    /// Subnet after applying the policy; this is what went (or would go) upstream.
    pub effective_ecs: Option<EcsOption>,
    pub upstream_query: Option<DnsMessage>,
    pub upstream_response: Option<DnsMessage>,
    pub cache_hit: bool,
}

/// A recursive resolver with a virtual clock. One owner drives it; operations
/// are applied in order.
#[derive(Debug, Clone)]
pub struct ResolverState {
    pub policy: ResolverPolicy,
    pub location: RegionCode,
    /// Source address the resolver uses towards authoritatives.
    pub address: IpAddr,
    cache: Cache,
    clock: u64,
    next_id: u16,
    caching: bool,
}

impl ResolverState {
    pub fn new(policy: ResolverPolicy, location: RegionCode, address: IpAddr) -> ResolverState {
        ResolverState {
            policy,
            location,
            address,
            cache: Cache::new(),
            clock: 0,
            next_id: 1,
            caching: true,
        }
    }

    /// Same resolver with the cache switched off; every query goes upstream.
    pub fn without_cache(mut self) -> ResolverState {
        self.caching = false;
        self
    }

    pub fn now(&self) -> u64 {
        self.clock
    }

    pub fn advance(&mut self, seconds: u64) {
        self.clock += seconds;
    }

    pub fn cache(&self) -> &Cache {
        &self.cache
    }

    pub fn cache_lookup(
        &self,
        qname: &Name,
        qtype: QType,
        effective_ecs: Option<&EcsOption>,
    ) -> Option<&CacheEntry> {
        if !self.caching {
            return None;
        }
        self.cache.lookup(qname, qtype, effective_ecs, self.clock)
    }

    /// Answer `query` sent by `client`, going upstream on a cache miss.
    pub fn resolve<U: Upstream>(
        &mut self,
        query: &DnsMessage,
        client: IpAddr,
        upstream: &mut U,
    ) -> Result<Resolution, SimError> {
        if query.is_response {
            return Err(SimError::InvalidConfig("resolver received a response".into()));
        }
        let qname = &query.question.qname;
        let qtype = query.question.qtype;
        let effective = self.policy.apply(query.ecs(), client);

        if let Some(hit) = self.cache_lookup(qname, qtype, effective.as_ref()) {
            let ttl = (hit.expires_at - self.clock) as u32;
            let records = hit
                .addresses
                .iter()
                .map(|addr| ResourceRecord {
                    name: qname.clone(),
                    ttl,
                    addr: *addr,
                })
                .collect();
            let scope = hit.scope_prefix_len;
            let response = self.client_response(query, Rcode::NOERROR, records, effective.as_ref(), scope)?;
            return Ok(Resolution {
                response,
                effective_ecs: effective,
                upstream_query: None,
                upstream_response: None,
                cache_hit: true,
            });
        }

        let mut up_query = DnsMessage::query(self.take_id(), qname.clone(), qtype, effective.clone());
        up_query.recursion_desired = false;
        let up_resp = upstream.exchange(&up_query, self.address)?;
        let scope = up_resp.ecs().map(|e| e.scope_prefix_len()).unwrap_or(0);

        if self.caching && up_resp.rcode == Rcode::NOERROR && !up_resp.answers.is_empty() {
            let ttl = up_resp.answers.iter().map(|rr| rr.ttl).min().unwrap_or(0);
            if ttl > 0 {
                self.cache.store(
                    qname,
                    qtype,
                    effective.as_ref(),
                    scope,
                    up_resp.answer_addrs(),
                    ttl,
                    self.clock,
                );
            }
        }

        let response = self.client_response(
            query,
            up_resp.rcode,
            up_resp.answers.clone(),
            effective.as_ref(),
            scope,
        )?;
        Ok(Resolution {
            response,
            effective_ecs: effective,
            upstream_query: Some(up_query),
            upstream_response: Some(up_resp),
            cache_hit: false,
        })
    }

    /// [`resolve`](Self::resolve) against an in-process authoritative.
    pub fn resolve_with(
        &mut self,
        query: &DnsMessage,
        client: IpAddr,
        server: &AuthoritativeServer,
    ) -> Result<Resolution, SimError> {
        self.resolve(query, client, &mut InProcess::new(server))
    }

    fn client_response(
        &self,
        query: &DnsMessage,
        rcode: Rcode,
        answers: Vec<ResourceRecord>,
        effective: Option<&EcsOption>,
        scope: u8,
    ) -> Result<DnsMessage, SimError> {
        let mut resp = DnsMessage::response_to(query, rcode, answers);
        resp.recursion_available = true;
        if let Some(e) = effective {
            resp.set_ecs(Some(e.with_scope(scope)?));
        }
        Ok(resp)
    }

    fn take_id(&mut self) -> u16 {
        let id = self.next_id;
        self.next_id = self.next_id.wrapping_add(1).max(1);
        id
    }
}
