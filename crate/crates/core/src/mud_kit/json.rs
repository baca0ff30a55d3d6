//! JSON documents shaped like RFC 8520: a `ietf-mud:mud` container that points
//! at one ACL, and the ACL's entries under `ietf-access-control-list:acls`.
//! Only the fields below are understood; this is not a YANG validator.
//!
//! ```json
//! {
//!   "ietf-mud:mud": {
//!     "mud-version": 1,
//!     "mud-url": "https://mud.example.com/yi-camera.json",
//!     "systeminfo": "yi-camera",
//!     "default-action": "drop",
//!     "from-device-policy": { "access-lists": { "access-list": [ { "name": "mud-acl" } ] } },
//!     "to-device-policy": { "access-lists": { "access-list": [ { "name": "mud-acl" } ] } }
//!   },
//!   "ietf-access-control-list:acls": {
//!     "acl": [ { "name": "mud-acl", "aces": { "ace": [ {
//!       "name": "ace-0",
//!       "matches": {
//!         "endpoint": { "domain": "api.eu.xiaoyi.com" },
//!         "protocol": "tcp",
//!         "source-port": "any",
//!         "destination-port": 443,
//!         "direction": "from-device"
//!       },
//!       "actions": { "forwarding": "accept" }
//!     } ] } } ]
//!   }
//! }
//! ```

use std::net::IpAddr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dns_wire::Name;

use super::ace::{Ace, Action, Direction, Endpoint, MacAddr, MudFile, Port, Protocol};
use super::MudError;

const ACL_NAME: &str = "mud-acl";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(rename = "ietf-mud:mud")]
    mud: MudContainer,
    #[serde(rename = "ietf-access-control-list:acls")]
    acls: Acls,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct MudContainer {
    mud_version: u8,
    mud_url: String,
    systeminfo: String,
    default_action: DropOnly,
    from_device_policy: Policy,
    to_device_policy: Policy,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct Policy {
    access_lists: AccessLists,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct AccessLists {
    access_list: Vec<AclRef>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AclRef {
    name: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Acls {
    acl: Vec<Acl>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Acl {
    name: String,
    aces: Aces,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Aces {
    ace: Vec<AceDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AceDoc {
    name: String,
    matches: Matches,
    actions: Actions,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct Matches {
    endpoint: EndpointDoc,
    protocol: Protocol,
    source_port: Port,
    destination_port: Port,
    direction: Direction,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
enum EndpointDoc {
    Domain(Name),
    Ip(IpAddr),
    Mac(MacAddr),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Actions {
    forwarding: Action,
}

struct DropOnly;

impl Serialize for DropOnly {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("drop")
    }
}

impl<'de> Deserialize<'de> for DropOnly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match String::deserialize(d)?.as_str() {
            "drop" => Ok(DropOnly),
            other => Err(D::Error::custom(format!(
                "default action must be \"drop\", found {other:?}"
            ))),
        }
    }
}

macro_rules! serde_via_str {
    ($t:ty, $show:expr) => {
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                let show: fn(&$t) -> String = $show;
                s.serialize_str(&show(self))
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                String::deserialize(d)?.parse().map_err(D::Error::custom)
            }
        }
    };
}

serde_via_str!(Protocol, |p| p.as_str().to_string());
serde_via_str!(Direction, |d| d.as_str().to_string());
serde_via_str!(Action, |a| a.as_str().to_string());
serde_via_str!(MacAddr, |m| m.to_string());

impl Serialize for Port {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Port::Any => s.serialize_str("any"),
            Port::Num(n) => s.serialize_u16(*n),
        }
    }
}

impl<'de> Deserialize<'de> for Port {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(n) => u16::try_from(n)
                .map(Port::Num)
                .map_err(|_| D::Error::custom(format!("port {n} out of range"))),
            Raw::Str(s) if s == "any" => Ok(Port::Any),
            Raw::Str(s) => Err(D::Error::custom(format!(
                "port must be a number or \"any\", found {s:?}"
            ))),
        }
    }
}

fn policy() -> Policy {
    Policy {
        access_lists: AccessLists {
            access_list: vec![AclRef {
                name: ACL_NAME.into(),
            }],
        },
    }
}

/// Pretty-printed JSON with a trailing newline. Equal files serialize to
/// identical bytes.
pub fn serialize_mud(mud: &MudFile) -> Vec<u8> {
    let aces = mud
        .acl()
        .iter()
        .enumerate()
        .map(|(i, a)| AceDoc {
            name: format!("ace-{i}"),
            matches: Matches {
                endpoint: match a.endpoint() {
                    Endpoint::Domain(n) => EndpointDoc::Domain(n.clone()),
                    Endpoint::Ip(ip) => EndpointDoc::Ip(*ip),
                    Endpoint::Mac(m) => EndpointDoc::Mac(*m),
                },
                protocol: a.protocol(),
                source_port: a.source_port(),
                destination_port: a.destination_port(),
                direction: a.direction(),
            },
            actions: Actions {
                forwarding: a.action(),
            },
        })
        .collect();
    let doc = Document {
        mud: MudContainer {
            mud_version: 1,
            mud_url: mud.mud_url().to_string(),
            systeminfo: mud.device_id().to_string(),
            default_action: DropOnly,
            from_device_policy: policy(),
            to_device_policy: policy(),
        },
        acls: Acls {
            acl: vec![Acl {
                name: ACL_NAME.into(),
                aces: Aces { ace: aces },
            }],
        },
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("plain data serializes");
    out.push(b'\n');
    out
}

/// Entries of every listed ACL are merged into one file.
pub fn parse_mud(bytes: &[u8]) -> Result<MudFile, MudError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let doc: Document = serde_path_to_error::deserialize(&mut de).map_err(|e| MudError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    de.end().map_err(|e| MudError::Schema {
        path: ".".into(),
        message: e.to_string(),
    })?;
    if doc.mud.mud_version != 1 {
        return Err(MudError::Schema {
            path: "ietf-mud:mud.mud-version".into(),
            message: format!("unsupported version {}", doc.mud.mud_version),
        });
    }
    let mut aces = Vec::new();
    for (i, acl) in doc.acls.acl.into_iter().enumerate() {
        for (j, a) in acl.aces.ace.into_iter().enumerate() {
            let m = a.matches;
            let endpoint = match m.endpoint {
                EndpointDoc::Domain(n) => Endpoint::Domain(n),
                EndpointDoc::Ip(ip) => Endpoint::Ip(ip),
                EndpointDoc::Mac(mac) => Endpoint::Mac(mac),
            };
            let ace = Ace::new(
                endpoint,
                m.protocol,
                m.source_port,
                m.destination_port,
                m.direction,
                a.actions.forwarding,
            )
            .map_err(|e| MudError::Schema {
                path: format!("ietf-access-control-list:acls.acl[{i}].aces.ace[{j}].matches"),
                message: e.to_string(),
            })?;
            aces.push(ace);
        }
    }
    Ok(MudFile::new(doc.mud.systeminfo, doc.mud.mud_url, aces))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MudFile {
        let ace = |ep: Endpoint, proto, dport| {
            Ace::new(
                ep,
                proto,
                Port::Any,
                dport,
                Direction::FromDevice,
                Action::Accept,
            )
            .unwrap()
        };
        MudFile::new(
            "yi-camera",
            "https://mud.example.com/yi-camera.json",
            [
                ace(
                    Endpoint::Domain(Name::new("api.eu.xiaoyi.com").unwrap()),
                    Protocol::Tcp,
                    Port::Num(443),
                ),
                ace(
                    Endpoint::Ip("192.0.2.1".parse().unwrap()),
                    Protocol::Icmp,
                    Port::Any,
                ),
                ace(
                    Endpoint::Mac("00:11:22:33:44:55".parse().unwrap()),
                    Protocol::Udp,
                    Port::Num(123),
                ),
            ],
        )
    }

    #[test]
    fn roundtrip_is_byte_stable() {
        let m = sample();
        let bytes = serialize_mud(&m);
        let back = parse_mud(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(serialize_mud(&back), bytes);
    }

    #[test]
    fn missing_direction_reports_path() {
        let mut doc: serde_json::Value = serde_json::from_slice(&serialize_mud(&sample())).unwrap();
        doc["ietf-access-control-list:acls"]["acl"][0]["aces"]["ace"][0]["matches"]
            .as_object_mut()
            .unwrap()
            .remove("direction")
            .unwrap();
        match parse_mud(doc.to_string().as_bytes()) {
            Err(MudError::Schema { path, message }) => {
                assert_eq!(path, "ietf-access-control-list:acls.acl[0].aces.ace[0].matches");
                assert!(message.contains("direction"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_non_drop_default_and_bad_port() {
        let text = String::from_utf8(serialize_mud(&sample())).unwrap();
        let accept = text.replace("\"default-action\": \"drop\"", "\"default-action\": \"accept\"");
        assert!(matches!(parse_mud(accept.as_bytes()), Err(MudError::Schema { .. })));
        let port = text.replacen("443", "70000", 1);
        match parse_mud(port.as_bytes()) {
            Err(MudError::Schema { path, .. }) => assert!(path.ends_with("destination-port"), "{path}"),
            other => panic!("{other:?}"),
        }
    }
}
