//! Scope-aware answer cache (RFC 7871 §7.3).
//!
//! An entry cached with scope `s > 0` answers a later query when the query's
//! client subnet has the same family, a source prefix of at least `s` bits, and
//! the same first `s` bits. A scope-0 entry learned from a subnet-bearing
//! exchange answers every query. An entry learned from an exchange that carried
//! no usable subnet (none, or a zero-length source prefix) only answers queries
//! in the same situation.

use std::net::IpAddr;

use crate::dns_wire::{truncate_to_prefix, EcsOption, Name, QType};
use crate::prefix::Family;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheEntry {
    pub qname: Name,
    pub qtype: QType,
    pub scope_prefix_len: u8,
    /// Family of `network`; `None` for scope 0.
    pub family: Option<Family>,
    /// Client address truncated to `scope_prefix_len`.
    pub network: Vec<u8>,
    /// Learned without a usable client subnet.
    pub untailored: bool,
    pub addresses: Vec<IpAddr>,
    pub expires_at: u64,
}

impl CacheEntry {
    fn same_slot(&self, other: &CacheEntry) -> bool {
        self.qname == other.qname
            && self.qtype == other.qtype
            && self.untailored == other.untailored
            && self.scope_prefix_len == other.scope_prefix_len
            && self.family == other.family
            && self.network == other.network
    }

    fn matches(&self, ecs: Option<&EcsOption>) -> bool {
        let tailored = tailored(ecs);
        if self.untailored {
            return tailored.is_none();
        }
        if self.scope_prefix_len == 0 {
            return true;
        }
        match tailored {
            Some(e) => {
                Some(e.family()) == self.family
                    && e.source_prefix_len() >= self.scope_prefix_len
                    && truncate_to_prefix(e.ip(), self.scope_prefix_len) == self.network
            }
            None => false,
        }
    }
}

/// The client subnet if it carries at least one bit of address.
pub(crate) fn tailored(ecs: Option<&EcsOption>) -> Option<&EcsOption> {
    ecs.filter(|e| e.source_prefix_len() > 0)
}

/// Unbounded cache; entries leave only by expiry.
#[derive(Debug, Clone, Default)]
pub struct Cache {
    entries: Vec<CacheEntry>,
}

impl Cache {
    pub fn new() -> Cache {
        Cache::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CacheEntry] {
        &self.entries
    }

    /// Live entry answering this question, if any. When several match, the most
    /// specific scope wins.
    pub fn lookup(
        &self,
        qname: &Name,
        qtype: QType,
        ecs: Option<&EcsOption>,
        now: u64,
    ) -> Option<&CacheEntry> {
        self.entries
            .iter()
            .filter(|e| e.qname == *qname && e.qtype == qtype && e.expires_at > now)
            .filter(|e| e.matches(ecs))
            .max_by_key(|e| (e.scope_prefix_len, !e.untailored))
    }

    /// Store an answer learned for a query with client subnet `ecs` and response
    /// scope `scope`, replacing whatever occupied the same slot.
    #[allow(clippy::too_many_arguments)]
    pub fn store(
        &mut self,
        qname: &Name,
        qtype: QType,
        ecs: Option<&EcsOption>,
        scope: u8,
        addresses: Vec<IpAddr>,
        ttl: u32,
        now: u64,
    ) {
        let entry = match tailored(ecs) {
            None => CacheEntry {
                qname: qname.clone(),
                qtype,
                scope_prefix_len: 0,
                family: None,
                network: Vec::new(),
                untailored: true,
                addresses,
                expires_at: now + u64::from(ttl),
            },
            Some(e) => {
                let scope = scope.min(e.family().max_len());
                CacheEntry {
                    qname: qname.clone(),
                    qtype,
                    scope_prefix_len: scope,
                    family: (scope > 0).then_some(e.family()),
                    network: truncate_to_prefix(e.ip(), scope),
                    untailored: false,
                    addresses,
                    expires_at: now + u64::from(ttl),
                }
            }
        };
        self.entries.retain(|e| !e.same_slot(&entry));
        self.entries.push(entry);
    }

    pub fn purge_expired(&mut self, now: u64) {
        self.entries.retain(|e| e.expires_at > now);
    }
}
