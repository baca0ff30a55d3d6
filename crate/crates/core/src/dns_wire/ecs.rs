//! EDNS Client Subnet option (RFC 7871).

use std::fmt;
use std::net::IpAddr;

use super::WireError;
use crate::prefix::{addr_from_prefix_bytes, addr_octets, mask_bits, Family, IpPrefix};

/// EDNS0 option code for Client Subnet.
pub const ECS_OPTION_CODE: u16 = 8;

/// Returns the first `ceil(prefix_len / 8)` octets of `address` with every bit past
/// `prefix_len` cleared. Lengths beyond the family width are clamped.
pub fn truncate_to_prefix(address: IpAddr, prefix_len: u8) -> Vec<u8> {
    let len = prefix_len.min(Family::of(&address).max_len());
    let mut bytes = addr_octets(&address);
    bytes.truncate(len.div_ceil(8) as usize);
    mask_bits(&mut bytes, len);
    bytes
}

/// A client subnet: FAMILY | SOURCE PREFIX-LENGTH | SCOPE PREFIX-LENGTH | ADDRESS.
///
/// The address holds only the significant octets and never carries bits past the
/// source prefix length.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EcsOption {
    family: Family,
    source_prefix_len: u8,
    scope_prefix_len: u8,
    address: Vec<u8>,
}

impl EcsOption {
    pub fn new(
        family: Family,
        source_prefix_len: u8,
        scope_prefix_len: u8,
        address: Vec<u8>,
    ) -> Result<EcsOption, WireError> {
        let max = family.max_len();
        if source_prefix_len > max {
            return Err(WireError::InvalidEcs(format!(
                "source prefix length {source_prefix_len} exceeds {max}"
            )));
        }
        if scope_prefix_len > max {
            return Err(WireError::InvalidEcs(format!(
                "scope prefix length {scope_prefix_len} exceeds {max}"
            )));
        }
        let want = source_prefix_len.div_ceil(8) as usize;
        if address.len() != want {
            return Err(WireError::InvalidEcs(format!(
                "address has {} octets, source prefix {} needs {}",
                address.len(),
                source_prefix_len,
                want
            )));
        }
        let mut masked = address.clone();
        mask_bits(&mut masked, source_prefix_len);
        if masked != address {
            return Err(WireError::InvalidEcs(format!(
                "address bits set beyond source prefix length {source_prefix_len}"
            )));
        }
        Ok(EcsOption {
            family,
            source_prefix_len,
            scope_prefix_len,
            address,
        })
    }

    /// Query-side option for `addr/source_prefix_len`, scope 0.
    pub fn from_addr(addr: IpAddr, source_prefix_len: u8) -> Result<EcsOption, WireError> {
        let family = Family::of(&addr);
        if source_prefix_len > family.max_len() {
            return Err(WireError::InvalidEcs(format!(
                "source prefix length {source_prefix_len} exceeds {}",
                family.max_len()
            )));
        }
        EcsOption::new(
            family,
            source_prefix_len,
            0,
            truncate_to_prefix(addr, source_prefix_len),
        )
    }

    pub fn from_prefix(prefix: &IpPrefix) -> EcsOption {
        EcsOption::from_addr(prefix.addr(), prefix.len()).expect("prefix length in range")
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn source_prefix_len(&self) -> u8 {
        self.source_prefix_len
    }

    pub fn scope_prefix_len(&self) -> u8 {
        self.scope_prefix_len
    }

    pub fn address(&self) -> &[u8] {
        &self.address
    }

    /// The address zero-padded to full width.
    pub fn ip(&self) -> IpAddr {
        addr_from_prefix_bytes(self.family, &self.address)
    }

    pub fn prefix(&self) -> IpPrefix {
        IpPrefix::new(self.ip(), self.source_prefix_len).expect("ECS address is truncated")
    }

    pub fn with_scope(&self, scope_prefix_len: u8) -> Result<EcsOption, WireError> {
        EcsOption::new(
            self.family,
            self.source_prefix_len,
            scope_prefix_len,
            self.address.clone(),
        )
    }

    /// Option data, without the OPTION-CODE and OPTION-LENGTH fields.
    pub fn encode_data(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.address.len());
        out.extend_from_slice(&self.family.code().to_be_bytes());
        out.push(self.source_prefix_len);
        out.push(self.scope_prefix_len);
        out.extend_from_slice(&self.address);
        out
    }

    pub fn decode_data(data: &[u8]) -> Result<EcsOption, WireError> {
        if data.len() < 4 {
            return Err(WireError::Malformed(format!(
                "ECS option length {} shorter than 4",
                data.len()
            )));
        }
        let code = u16::from_be_bytes([data[0], data[1]]);
        let family = Family::from_code(code)
            .ok_or_else(|| WireError::Malformed(format!("unknown ECS family {code}")))?;
        EcsOption::new(family, data[2], data[3], data[4..].to_vec())
            .map_err(|e| WireError::Malformed(e.to_string()))
    }
}

impl fmt::Display for EcsOption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}",
            self.ip(),
            self.source_prefix_len,
            self.scope_prefix_len
        )
    }
}
