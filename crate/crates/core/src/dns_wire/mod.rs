//! DNS message subset (A/AAAA questions and answers) plus EDNS0 with the
//! Client Subnet option.
//!
//! Encoding never emits name compression. Decoding accepts compression pointers,
//! skips authority records and unknown EDNS options, and lowercases names.

mod codec;
mod ecs;

use std::fmt;
use std::net::IpAddr;
use std::str::FromStr;

use thiserror::Error;

pub use codec::{decode_message, encode_message};
pub use ecs::{truncate_to_prefix, EcsOption, ECS_OPTION_CODE};

/// Payload size advertised by queries built with [`DnsMessage::query`].
pub const DEFAULT_UDP_PAYLOAD_SIZE: u16 = 1232;

pub const MAX_LABEL_LEN: usize = 63;
pub const MAX_NAME_LEN: usize = 253;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("invalid domain name: {0}")]
    InvalidName(String),
    #[error("invalid client subnet option: {0}")]
    InvalidEcs(String),
    #[error("invalid message: {0}")]
    InvalidMessage(String),
    #[error("message truncated at offset {offset}")]
    Truncated { offset: usize },
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unsupported record type {0}")]
    UnsupportedType(u16),
}

/// A domain name in canonical form: lowercase ASCII, no trailing dot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name(String);

impl Name {
    pub fn new(s: &str) -> Result<Name, WireError> {
        let s = s.strip_suffix('.').unwrap_or(s);
        if s.is_empty() {
            return Err(WireError::InvalidName("empty name".into()));
        }
        if s.len() > MAX_NAME_LEN {
            return Err(WireError::InvalidName(format!(
                "{} octets exceeds {MAX_NAME_LEN}",
                s.len()
            )));
        }
        for label in s.split('.') {
            Name::check_label(label.as_bytes())?;
        }
        Ok(Name(s.to_ascii_lowercase()))
    }

    fn check_label(label: &[u8]) -> Result<(), WireError> {
        if label.is_empty() {
            return Err(WireError::InvalidName("empty label".into()));
        }
        if label.len() > MAX_LABEL_LEN {
            return Err(WireError::InvalidName(format!(
                "label of {} octets exceeds {MAX_LABEL_LEN}",
                label.len()
            )));
        }
        if let Some(b) = label
            .iter()
            .find(|b| !b.is_ascii_graphic() || **b == b'.')
        {
            return Err(WireError::InvalidName(format!("byte 0x{b:02x} in label")));
        }
        Ok(())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.0.split('.')
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Name {
    type Err = WireError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Name::new(s)
    }
}

impl serde::Serialize for Name {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> serde::Deserialize<'de> for Name {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Name::new(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QType {
    A,
    Aaaa,
}

impl QType {
    pub fn code(self) -> u16 {
        match self {
            QType::A => 1,
            QType::Aaaa => 28,
        }
    }

    pub fn from_code(code: u16) -> Result<QType, WireError> {
        match code {
            1 => Ok(QType::A),
            28 => Ok(QType::Aaaa),
            other => Err(WireError::UnsupportedType(other)),
        }
    }

    pub fn matches(self, addr: &IpAddr) -> bool {
        matches!(
            (self, addr),
            (QType::A, IpAddr::V4(_)) | (QType::Aaaa, IpAddr::V6(_))
        )
    }
}

impl fmt::Display for QType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QType::A => "A",
            QType::Aaaa => "AAAA",
        })
    }
}

/// Class is always IN.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Question {
    pub qname: Name,
    pub qtype: QType,
}

/// An A or AAAA record; the record type follows the address family.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ResourceRecord {
    pub name: Name,
    pub ttl: u32,
    pub addr: IpAddr,
}

impl ResourceRecord {
    pub fn rtype(&self) -> QType {
        match self.addr {
            IpAddr::V4(_) => QType::A,
            IpAddr::V6(_) => QType::Aaaa,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdnsOpt {
    pub udp_payload_size: u16,
    pub ecs: Option<EcsOption>,
}

impl EdnsOpt {
    pub fn with_ecs(ecs: Option<EcsOption>) -> EdnsOpt {
        EdnsOpt {
            udp_payload_size: DEFAULT_UDP_PAYLOAD_SIZE,
            ecs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rcode(u8);

impl Rcode {
    pub const NOERROR: Rcode = Rcode(0);
    pub const FORMERR: Rcode = Rcode(1);
    pub const SERVFAIL: Rcode = Rcode(2);
    pub const NXDOMAIN: Rcode = Rcode(3);

    pub fn new(code: u8) -> Option<Rcode> {
        (code <= 15).then_some(Rcode(code))
    }

    pub fn code(self) -> u8 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DnsMessage {
    pub id: u16,
    pub is_response: bool,
    pub recursion_desired: bool,
    pub recursion_available: bool,
    pub rcode: Rcode,
    pub question: Question,
    pub answers: Vec<ResourceRecord>,
    pub edns: Option<EdnsOpt>,
}

impl DnsMessage {
    /// A recursive query. Any ECS is attached through an OPT record with the
    /// default payload size.
    pub fn query(id: u16, qname: Name, qtype: QType, ecs: Option<EcsOption>) -> DnsMessage {
        DnsMessage {
            id,
            is_response: false,
            recursion_desired: true,
            recursion_available: false,
            rcode: Rcode::NOERROR,
            question: Question { qname, qtype },
            answers: Vec::new(),
            edns: ecs.map(|e| EdnsOpt::with_ecs(Some(e))),
        }
    }

    /// Response skeleton echoing id and question.
    pub fn response_to(query: &DnsMessage, rcode: Rcode, answers: Vec<ResourceRecord>) -> DnsMessage {
        DnsMessage {
            id: query.id,
            is_response: true,
            recursion_desired: query.recursion_desired,
            recursion_available: false,
            rcode,
            question: query.question.clone(),
            answers,
            edns: None,
        }
    }

    pub fn ecs(&self) -> Option<&EcsOption> {
        self.edns.as_ref().and_then(|e| e.ecs.as_ref())
    }

    /// Replace (or clear) the ECS option, creating or keeping the OPT record.
    pub fn set_ecs(&mut self, ecs: Option<EcsOption>) {
        match (&mut self.edns, ecs) {
            (Some(opt), ecs) => opt.ecs = ecs,
            (None, Some(ecs)) => self.edns = Some(EdnsOpt::with_ecs(Some(ecs))),
            (None, None) => {}
        }
    }

    pub fn answer_addrs(&self) -> Vec<IpAddr> {
        self.answers.iter().map(|rr| rr.addr).collect()
    }

    pub(crate) fn validate(&self) -> Result<(), WireError> {
        if !self.is_response && !self.answers.is_empty() {
            return Err(WireError::InvalidMessage(
                "query carries answer records".into(),
            ));
        }
        if let Some(ecs) = self.ecs() {
            if !self.is_response && ecs.scope_prefix_len() != 0 {
                return Err(WireError::InvalidEcs(format!(
                    "query scope prefix length must be 0, got {}",
                    ecs.scope_prefix_len()
                )));
            }
        }
        Ok(())
    }
}
