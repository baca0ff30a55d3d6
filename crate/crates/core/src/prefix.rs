//! IP prefixes (address plus prefix length) with the host bits cleared.

use std::fmt;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrefixError {
    #[error("invalid prefix syntax {0:?}")]
    Syntax(String),
    #[error("prefix length {len} out of range for {family}")]
    Length { len: u8, family: &'static str },
    #[error("host bits set in {0}")]
    HostBits(String),
}

/// Address family as carried in the ECS FAMILY field (IANA address family numbers).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    V4,
    V6,
}

impl Family {
    pub fn of(addr: &IpAddr) -> Family {
        match addr {
            IpAddr::V4(_) => Family::V4,
            IpAddr::V6(_) => Family::V6,
        }
    }

    pub fn code(self) -> u16 {
        match self {
            Family::V4 => 1,
            Family::V6 => 2,
        }
    }

    pub fn from_code(code: u16) -> Option<Family> {
        match code {
            1 => Some(Family::V4),
            2 => Some(Family::V6),
            _ => None,
        }
    }

    pub fn max_len(self) -> u8 {
        match self {
            Family::V4 => 32,
            Family::V6 => 128,
        }
    }

    pub fn octets(self) -> usize {
        match self {
            Family::V4 => 4,
            Family::V6 => 16,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Family::V4 => "IPv4",
            Family::V6 => "IPv6",
        }
    }
}

/// Address octets in network order.
pub fn addr_octets(addr: &IpAddr) -> Vec<u8> {
    match addr {
        IpAddr::V4(a) => a.octets().to_vec(),
        IpAddr::V6(a) => a.octets().to_vec(),
    }
}

/// Rebuild an address from up to `family.octets()` leading bytes, zero padding the rest.
pub fn addr_from_prefix_bytes(family: Family, bytes: &[u8]) -> IpAddr {
    match family {
        Family::V4 => {
            let mut b = [0u8; 4];
            b[..bytes.len().min(4)].copy_from_slice(&bytes[..bytes.len().min(4)]);
            IpAddr::V4(Ipv4Addr::from(b))
        }
        Family::V6 => {
            let mut b = [0u8; 16];
            b[..bytes.len().min(16)].copy_from_slice(&bytes[..bytes.len().min(16)]);
            IpAddr::V6(Ipv6Addr::from(b))
        }
    }
}

/// Keep the first `len` bits of `bytes`, zeroing the rest in place.
pub(crate) fn mask_bits(bytes: &mut [u8], len: u8) {
    let len = len as usize;
    for (i, b) in bytes.iter_mut().enumerate() {
        let start = i * 8;
        if start >= len {
            *b = 0;
        } else if start + 8 > len {
            let keep = len - start;
            *b &= 0xffu8 << (8 - keep);
        }
    }
}

/// An IP network: address with every bit past `len` zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IpPrefix {
    addr: IpAddr,
    len: u8,
}

impl IpPrefix {
    /// Strict constructor; host bits must already be zero.
    pub fn new(addr: IpAddr, len: u8) -> Result<IpPrefix, PrefixError> {
        let p = IpPrefix::truncating(addr, len)?;
        if p.addr != addr {
            return Err(PrefixError::HostBits(format!("{addr}/{len}")));
        }
        Ok(p)
    }

    /// Clears host bits instead of rejecting them.
    pub fn truncating(addr: IpAddr, len: u8) -> Result<IpPrefix, PrefixError> {
        let family = Family::of(&addr);
        if len > family.max_len() {
            return Err(PrefixError::Length {
                len,
                family: family.name(),
            });
        }
        let mut bytes = addr_octets(&addr);
        mask_bits(&mut bytes, len);
        Ok(IpPrefix {
            addr: addr_from_prefix_bytes(family, &bytes),
            len,
        })
    }

    pub fn addr(&self) -> IpAddr {
        self.addr
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn family(&self) -> Family {
        Family::of(&self.addr)
    }

    pub fn contains(&self, addr: &IpAddr) -> bool {
        if Family::of(addr) != self.family() {
            return false;
        }
        let mut bytes = addr_octets(addr);
        mask_bits(&mut bytes, self.len);
        bytes == addr_octets(&self.addr)
    }

    pub fn contains_prefix(&self, other: &IpPrefix) -> bool {
        other.len >= self.len && self.contains(&other.addr)
    }

    pub fn overlaps(&self, other: &IpPrefix) -> bool {
        self.contains_prefix(other) || other.contains_prefix(self)
    }
}

impl fmt::Display for IpPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr, self.len)
    }
}

impl FromStr for IpPrefix {
    type Err = PrefixError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (addr, len) = s
            .trim()
            .split_once('/')
            .ok_or_else(|| PrefixError::Syntax(s.to_string()))?;
        let addr: IpAddr = addr
            .parse()
            .map_err(|_| PrefixError::Syntax(s.to_string()))?;
        let len: u8 = len.parse().map_err(|_| PrefixError::Syntax(s.to_string()))?;
        IpPrefix::new(addr, len)
    }
}
