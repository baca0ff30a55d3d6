use std::net::IpAddr;
use std::sync::Arc;

use crate::dns_wire::{
    decode_message, encode_message, DnsMessage, Rcode, ResourceRecord, WireError,
};
use crate::geo_zone::{GeoZone, ZoneError};

use super::cache::tailored;

/// Authoritative server over a [`GeoZone`].
///
/// With `legacy_geo` set, queries without a usable client subnet are answered
/// by the query's source address instead of with the all-region default set.
#[derive(Debug, Clone)]
pub struct AuthoritativeServer {
    zone: Arc<GeoZone>,
    legacy_geo: bool,
}

impl AuthoritativeServer {
    pub fn new(zone: Arc<GeoZone>) -> AuthoritativeServer {
        AuthoritativeServer {
            zone,
            legacy_geo: false,
        }
    }

    pub fn legacy_geo(zone: Arc<GeoZone>) -> AuthoritativeServer {
        AuthoritativeServer {
            zone,
            legacy_geo: true,
        }
    }

    pub fn is_legacy_geo(&self) -> bool {
        self.legacy_geo
    }

    pub fn zone(&self) -> &GeoZone {
        &self.zone
    }

    /// Answer one query arriving from `source`.
    ///
    /// A subnet-bearing query that matches a regional entry is answered with that
    /// entry's prefix length as scope. One that matches nothing gets the default set
    /// with the shortest scope that keeps it clear of every entry, or TTL 0 when no
    /// such scope exists.
    pub fn handle(&self, query: &DnsMessage, source: IpAddr) -> DnsMessage {
        let qname = &query.question.qname;
        let qtype = query.question.qtype;
        let ecs = query.ecs();
        let client = tailored(ecs);

        let answer = match (client, self.legacy_geo) {
            (None, true) => self.zone.lookup_by_source(qname, source),
            _ => self.zone.lookup(qname, ecs),
        };
        let answer = match answer {
            Ok(a) => a,
            Err(ZoneError::NameNotFound(_)) => {
                let mut resp = DnsMessage::response_to(query, Rcode::NXDOMAIN, Vec::new());
                if let Some(e) = ecs {
                    resp.set_ecs(Some(e.with_scope(0).expect("scope 0 is valid")));
                }
                return resp;
            }
            Err(_) => return DnsMessage::response_to(query, Rcode::SERVFAIL, Vec::new()),
        };

        let (scope, ttl) = match client {
            None => (0, answer.ttl),
            Some(_) if answer.matched.is_some() => (answer.scope, answer.ttl),
            Some(e) => match self.zone.isolating_scope(qname, e) {
                Some(scope) => (scope, answer.ttl),
                None => (e.source_prefix_len(), 0),
            },
        };

        let records = answer
            .addresses
            .iter()
            .filter(|a| qtype.matches(a))
            .map(|addr| ResourceRecord {
                name: qname.clone(),
                ttl,
                addr: *addr,
            })
            .collect();
        let mut resp = DnsMessage::response_to(query, Rcode::NOERROR, records);
        if let Some(e) = ecs {
            resp.set_ecs(Some(e.with_scope(scope).expect("scope within family")));
        }
        resp
    }

    /// Wire-level entry point: decode, answer, encode. Undecodable input yields
    /// `None` when not even the header could be read.
    pub fn handle_wire(&self, bytes: &[u8], source: IpAddr) -> Option<Vec<u8>> {
        match decode_message(bytes) {
            Ok(q) if !q.is_response => encode_message(&self.handle(&q, source)).ok(),
            Ok(_) => None,
            Err(e) => error_reply(bytes, &e),
        }
    }
}

/// Minimal header-only reply (FORMERR or NOTIMP) echoing the query id.
fn error_reply(bytes: &[u8], err: &WireError) -> Option<Vec<u8>> {
    if bytes.len() < 2 {
        return None;
    }
    let rcode: u16 = match err {
        WireError::UnsupportedType(_) => 4,
        _ => 1,
    };
    let mut out = vec![bytes[0], bytes[1]];
    out.extend_from_slice(&(0x8000u16 | rcode).to_be_bytes());
    out.extend_from_slice(&[0; 8]);
    Some(out)
}
