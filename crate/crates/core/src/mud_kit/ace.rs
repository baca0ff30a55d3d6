use std::collections::BTreeSet;
use std::fmt;
use std::net::IpAddr;
use std::str::FromStr;

use crate::dns_wire::Name;

use super::MudError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MacAddr(pub [u8; 6]);

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[0], b[1], b[2], b[3], b[4], b[5]
        )
    }
}

impl FromStr for MacAddr {
    type Err = MudError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MudError::InvalidAce(format!("invalid MAC address {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 6 {
            return Err(bad());
        }
        let mut out = [0u8; 6];
        for (o, p) in out.iter_mut().zip(parts) {
            if p.len() != 2 {
                return Err(bad());
            }
            *o = u8::from_str_radix(p, 16).map_err(|_| bad())?;
        }
        Ok(MacAddr(out))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    Domain(Name),
    Ip(IpAddr),
    Mac(MacAddr),
}

impl Endpoint {
    pub fn domain(&self) -> Option<&Name> {
        match self {
            Endpoint::Domain(n) => Some(n),
            _ => None,
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Domain(n) => n.fmt(f),
            Endpoint::Ip(a) => a.fmt(f),
            Endpoint::Mac(m) => m.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    Tcp,
    Udp,
    Icmp,
    Any,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Tcp => "tcp",
            Protocol::Udp => "udp",
            Protocol::Icmp => "icmp",
            Protocol::Any => "any",
        }
    }
}

impl FromStr for Protocol {
    type Err = MudError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tcp" => Ok(Protocol::Tcp),
            "udp" => Ok(Protocol::Udp),
            "icmp" => Ok(Protocol::Icmp),
            "any" => Ok(Protocol::Any),
            _ => Err(MudError::InvalidAce(format!("unknown protocol {s:?}"))),
        }
    }
}

/// `Any` sorts before every number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Port {
    Any,
    Num(u16),
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Port::Any => f.write_str("any"),
            Port::Num(n) => n.fmt(f),
        }
    }
}

impl FromStr for Port {
    type Err = MudError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("any") {
            return Ok(Port::Any);
        }
        s.parse()
            .map(Port::Num)
            .map_err(|_| MudError::InvalidAce(format!("invalid port {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    ToDevice,
    FromDevice,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::ToDevice => "to-device",
            Direction::FromDevice => "from-device",
        }
    }
}

impl FromStr for Direction {
    type Err = MudError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('_', "-").as_str() {
            "to-device" => Ok(Direction::ToDevice),
            "from-device" => Ok(Direction::FromDevice),
            _ => Err(MudError::InvalidAce(format!("unknown direction {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Accept,
    Drop,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Accept => "accept",
            Action::Drop => "drop",
        }
    }
}

impl FromStr for Action {
    type Err = MudError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "accept" => Ok(Action::Accept),
            "drop" => Ok(Action::Drop),
            _ => Err(MudError::InvalidAce(format!("unknown action {s:?}"))),
        }
    }
}

/// Match fields of an ACE other than the endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AceTuple {
    pub protocol: Protocol,
    pub direction: Direction,
    pub source_port: Port,
    pub destination_port: Port,
    pub action: Action,
}

/// One access control entry. Field order is the canonical sort order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ace {
    endpoint: Endpoint,
    protocol: Protocol,
    direction: Direction,
    source_port: Port,
    destination_port: Port,
    action: Action,
}

impl Ace {
    /// ICMP entries must use `Port::Any` on both sides.
    pub fn new(
        endpoint: Endpoint,
        protocol: Protocol,
        source_port: Port,
        destination_port: Port,
        direction: Direction,
        action: Action,
    ) -> Result<Ace, MudError> {
        if protocol == Protocol::Icmp && (source_port != Port::Any || destination_port != Port::Any)
        {
            return Err(MudError::InvalidAce(format!(
                "ICMP entry for {endpoint} carries a port"
            )));
        }
        Ok(Ace {
            endpoint,
            protocol,
            direction,
            source_port,
            destination_port,
            action,
        })
    }

    pub fn from_tuple(endpoint: Endpoint, t: AceTuple) -> Result<Ace, MudError> {
        Ace::new(
            endpoint,
            t.protocol,
            t.source_port,
            t.destination_port,
            t.direction,
            t.action,
        )
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn source_port(&self) -> Port {
        self.source_port
    }

    pub fn destination_port(&self) -> Port {
        self.destination_port
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn action(&self) -> Action {
        self.action
    }

    pub fn tuple(&self) -> AceTuple {
        AceTuple {
            protocol: self.protocol,
            direction: self.direction,
            source_port: self.source_port,
            destination_port: self.destination_port,
            action: self.action,
        }
    }
}

impl fmt::Display for Ace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}->{} {} {}",
            self.endpoint,
            self.protocol.as_str(),
            self.source_port,
            self.destination_port,
            self.direction.as_str(),
            self.action.as_str()
        )
    }
}

/// Allowlist for one device. The ACL is kept sorted and free of duplicates;
/// anything it does not match is dropped.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MudFile {
    device_id: String,
    mud_url: String,
    acl: Vec<Ace>,
}

impl MudFile {
    pub fn new(
        device_id: impl Into<String>,
        mud_url: impl Into<String>,
        acl: impl IntoIterator<Item = Ace>,
    ) -> MudFile {
        let acl: BTreeSet<Ace> = acl.into_iter().collect();
        MudFile {
            device_id: device_id.into(),
            mud_url: mud_url.into(),
            acl: acl.into_iter().collect(),
        }
    }

    pub fn device_id(&self) -> &str {
        &self.device_id
    }

    pub fn mud_url(&self) -> &str {
        &self.mud_url
    }

    pub fn acl(&self) -> &[Ace] {
        &self.acl
    }

    pub fn default_action(&self) -> Action {
        Action::Drop
    }

    /// Distinct domain-name endpoints, sorted.
    pub fn domains(&self) -> BTreeSet<&Name> {
        self.acl.iter().filter_map(|a| a.endpoint.domain()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom(s: &str) -> Endpoint {
        Endpoint::Domain(Name::new(s).unwrap())
    }

    #[test]
    fn icmp_with_port_rejected() {
        let r = Ace::new(
            dom("a.x"),
            Protocol::Icmp,
            Port::Any,
            Port::Num(1),
            Direction::ToDevice,
            Action::Accept,
        );
        assert!(matches!(r, Err(MudError::InvalidAce(_))));
    }

    #[test]
    fn mud_file_dedups_and_sorts() {
        let a = |d| {
            Ace::new(
                dom(d),
                Protocol::Tcp,
                Port::Any,
                Port::Num(443),
                Direction::FromDevice,
                Action::Accept,
            )
            .unwrap()
        };
        let m = MudFile::new("cam", "https://x", [a("b.x"), a("a.x"), a("b.x")]);
        let eps: Vec<String> = m.acl().iter().map(|a| a.endpoint().to_string()).collect();
        assert_eq!(eps, ["a.x", "b.x"]);
        assert_eq!(m.default_action(), Action::Drop);
    }

    #[test]
    fn mac_roundtrip() {
        let m: MacAddr = "00:1a:2B:3c:4d:5e".parse().unwrap();
        assert_eq!(m.to_string(), "00:1a:2b:3c:4d:5e");
        assert!("00:1a:2b".parse::<MacAddr>().is_err());
    }
}
