use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use super::{
    DnsMessage, EcsOption, EdnsOpt, Name, QType, Question, Rcode, ResourceRecord, WireError,
    ECS_OPTION_CODE, MAX_NAME_LEN,
};

const TYPE_OPT: u16 = 41;
const CLASS_IN: u16 = 1;
const HEADER_LEN: usize = 12;
const MAX_POINTER_HOPS: usize = 64;

const FLAG_QR: u16 = 0x8000;
const FLAG_RD: u16 = 0x0100;
const FLAG_RA: u16 = 0x0080;

fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn put_name(out: &mut Vec<u8>, name: &Name) {
    for label in name.labels() {
        out.push(label.len() as u8);
        out.extend_from_slice(label.as_bytes());
    }
    out.push(0);
}

/// Serialize a message. Names are written uncompressed; an EDNS section becomes
/// a single OPT record in the additional section.
pub fn encode_message(msg: &DnsMessage) -> Result<Vec<u8>, WireError> {
    msg.validate()?;
    let mut out = Vec::with_capacity(64);
    put_u16(&mut out, msg.id);
    let mut flags = u16::from(msg.rcode.code());
    if msg.is_response {
        flags |= FLAG_QR;
    }
    if msg.recursion_desired {
        flags |= FLAG_RD;
    }
    if msg.recursion_available {
        flags |= FLAG_RA;
    }
    put_u16(&mut out, flags);
    put_u16(&mut out, 1);
    let ancount = u16::try_from(msg.answers.len())
        .map_err(|_| WireError::InvalidMessage("too many answers".into()))?;
    put_u16(&mut out, ancount);
    put_u16(&mut out, 0);
    put_u16(&mut out, u16::from(msg.edns.is_some()));

    put_name(&mut out, &msg.question.qname);
    put_u16(&mut out, msg.question.qtype.code());
    put_u16(&mut out, CLASS_IN);

    for rr in &msg.answers {
        put_name(&mut out, &rr.name);
        put_u16(&mut out, rr.rtype().code());
        put_u16(&mut out, CLASS_IN);
        out.extend_from_slice(&rr.ttl.to_be_bytes());
        match rr.addr {
            IpAddr::V4(a) => {
                put_u16(&mut out, 4);
                out.extend_from_slice(&a.octets());
            }
            IpAddr::V6(a) => {
                put_u16(&mut out, 16);
                out.extend_from_slice(&a.octets());
            }
        }
    }

    if let Some(opt) = &msg.edns {
        out.push(0); // root owner name
        put_u16(&mut out, TYPE_OPT);
        put_u16(&mut out, opt.udp_payload_size);
        out.extend_from_slice(&0u32.to_be_bytes()); // extended rcode, version, flags
        let rdata = opt
            .ecs
            .as_ref()
            .map(|ecs| {
                let data = ecs.encode_data();
                let mut o = Vec::with_capacity(4 + data.len());
                put_u16(&mut o, ECS_OPTION_CODE);
                put_u16(&mut o, data.len() as u16);
                o.extend_from_slice(&data);
                o
            })
            .unwrap_or_default();
        put_u16(&mut out, rdata.len() as u16);
        out.extend_from_slice(&rdata);
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|end| *end <= self.buf.len())
            .ok_or(WireError::Truncated {
                offset: self.buf.len(),
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Read a possibly compressed name. `None` is the root name.
    fn name(&mut self) -> Result<Option<Name>, WireError> {
        let mut labels: Vec<String> = Vec::new();
        let mut wire_len = 0usize;
        let mut cursor = self.pos;
        let mut resume: Option<usize> = None;
        let mut hops = 0;
        loop {
            let len = *self.buf.get(cursor).ok_or(WireError::Truncated {
                offset: self.buf.len(),
            })?;
            match len & 0xc0 {
                0x00 => {
                    cursor += 1;
                    if len == 0 {
                        break;
                    }
                    let len = len as usize;
                    let label = self
                        .buf
                        .get(cursor..cursor + len)
                        .ok_or(WireError::Truncated {
                            offset: self.buf.len(),
                        })?;
                    wire_len += len + 1;
                    if wire_len > MAX_NAME_LEN + 1 {
                        return Err(WireError::Malformed("name exceeds 253 octets".into()));
                    }
                    let label = std::str::from_utf8(label)
                        .map_err(|_| WireError::Malformed("non-ASCII label".into()))?;
                    labels.push(label.to_string());
                    cursor += len;
                }
                0xc0 => {
                    let second = *self.buf.get(cursor + 1).ok_or(WireError::Truncated {
                        offset: self.buf.len(),
                    })?;
                    hops += 1;
                    if hops > MAX_POINTER_HOPS {
                        return Err(WireError::Malformed("compression pointer loop".into()));
                    }
                    if resume.is_none() {
                        resume = Some(cursor + 2);
                    }
                    let target = (usize::from(len & 0x3f) << 8) | usize::from(second);
                    if target >= cursor {
                        return Err(WireError::Malformed(
                            "compression pointer does not point backwards".into(),
                        ));
                    }
                    cursor = target;
                }
                _ => {
                    return Err(WireError::Malformed(format!(
                        "invalid label length byte 0x{len:02x}"
                    )))
                }
            }
        }
        self.pos = resume.unwrap_or(cursor);
        if labels.is_empty() {
            return Ok(None);
        }
        Name::new(&labels.join("."))
            .map(Some)
            .map_err(|e| WireError::Malformed(e.to_string()))
    }

    fn require_name(&mut self) -> Result<Name, WireError> {
        self.name()?
            .ok_or_else(|| WireError::Malformed("unexpected root name".into()))
    }
}

/// Parse wire bytes into a message.
pub fn decode_message(bytes: &[u8]) -> Result<DnsMessage, WireError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if bytes.len() < HEADER_LEN {
        return Err(WireError::Truncated {
            offset: bytes.len(),
        });
    }
    let id = r.u16()?;
    let flags = r.u16()?;
    let qdcount = r.u16()?;
    let ancount = r.u16()?;
    let nscount = r.u16()?;
    let arcount = r.u16()?;
    if qdcount != 1 {
        return Err(WireError::Malformed(format!(
            "expected one question, found {qdcount}"
        )));
    }
    let is_response = flags & FLAG_QR != 0;
    let rcode = Rcode::new((flags & 0x000f) as u8).expect("4-bit rcode");

    let qname = r.require_name()?;
    let qtype = QType::from_code(r.u16()?)?;
    let qclass = r.u16()?;
    if qclass != CLASS_IN {
        return Err(WireError::Malformed(format!("question class {qclass}")));
    }

    let mut answers = Vec::with_capacity(ancount as usize);
    for _ in 0..ancount {
        let name = r.require_name()?;
        let rtype = r.u16()?;
        let _class = r.u16()?;
        let ttl = r.u32()?;
        let rdlen = r.u16()? as usize;
        let rdata = r.take(rdlen)?;
        let addr = match (QType::from_code(rtype)?, rdlen) {
            (QType::A, 4) => IpAddr::V4(Ipv4Addr::new(rdata[0], rdata[1], rdata[2], rdata[3])),
            (QType::Aaaa, 16) => {
                let mut b = [0u8; 16];
                b.copy_from_slice(rdata);
                IpAddr::V6(Ipv6Addr::from(b))
            }
            (t, n) => {
                return Err(WireError::Malformed(format!(
                    "{t} record with {n}-octet rdata"
                )))
            }
        };
        answers.push(ResourceRecord { name, ttl, addr });
    }

    for _ in 0..nscount {
        r.name()?;
        r.take(8)?;
        let rdlen = r.u16()? as usize;
        r.take(rdlen)?;
    }

    let mut edns = None;
    for _ in 0..arcount {
        let owner = r.name()?;
        let rtype = r.u16()?;
        let class = r.u16()?;
        let _ttl = r.u32()?;
        let rdlen = r.u16()? as usize;
        let rdata = r.take(rdlen)?;
        if rtype != TYPE_OPT {
            continue;
        }
        if owner.is_some() {
            return Err(WireError::Malformed("OPT owner is not the root".into()));
        }
        if edns.is_some() {
            return Err(WireError::Malformed("more than one OPT record".into()));
        }
        edns = Some(EdnsOpt {
            udp_payload_size: class,
            ecs: decode_options(rdata)?,
        });
    }

    if r.pos != bytes.len() {
        return Err(WireError::Malformed(format!(
            "{} trailing octets",
            bytes.len() - r.pos
        )));
    }

    let msg = DnsMessage {
        id,
        is_response,
        recursion_desired: flags & FLAG_RD != 0,
        recursion_available: flags & FLAG_RA != 0,
        rcode,
        question: Question { qname, qtype },
        answers,
        edns,
    };
    msg.validate().map_err(|e| WireError::Malformed(e.to_string()))?;
    Ok(msg)
}

fn decode_options(mut rdata: &[u8]) -> Result<Option<EcsOption>, WireError> {
    let mut ecs = None;
    while !rdata.is_empty() {
        if rdata.len() < 4 {
            return Err(WireError::Malformed("option header cut short".into()));
        }
        let code = u16::from_be_bytes([rdata[0], rdata[1]]);
        let len = u16::from_be_bytes([rdata[2], rdata[3]]) as usize;
        let data = rdata
            .get(4..4 + len)
            .ok_or_else(|| WireError::Malformed(format!("option {code} length {len} overruns OPT")))?;
        if code == ECS_OPTION_CODE {
            if ecs.is_some() {
                return Err(WireError::Malformed("duplicate client subnet option".into()));
            }
            ecs = Some(EcsOption::decode_data(data)?);
        }
        rdata = &rdata[4 + len..];
    }
    Ok(ecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prefix::Family;

    fn name(s: &str) -> Name {
        Name::new(s).unwrap()
    }

    #[test]
    fn plain_query_roundtrip() {
        let q = DnsMessage::query(0x1234, name("example.com"), QType::A, None);
        let bytes = encode_message(&q).unwrap();
        assert_eq!(bytes.len(), 12 + 13 + 4);
        assert_eq!(&bytes[..4], &[0x12, 0x34, 0x01, 0x00]);
        assert_eq!(decode_message(&bytes).unwrap(), q);
    }

    #[test]
    fn ecs_query_layout() {
        let ecs = EcsOption::from_addr("111.111.111.0".parse().unwrap(), 24).unwrap();
        let q = DnsMessage::query(7, name("a.b"), QType::A, Some(ecs));
        let bytes = encode_message(&q).unwrap();
        // OPT: root, type 41, class 1232, ttl 0, rdlen 11, option 8 len 7, data
        let tail = [
            0x00, 0x00, 0x29, 0x04, 0xd0, 0, 0, 0, 0, 0x00, 0x0b, 0x00, 0x08, 0x00, 0x07, 0x00,
            0x01, 0x18, 0x00, 0x6f, 0x6f, 0x6f,
        ];
        assert!(bytes.ends_with(&tail));
        assert_eq!(bytes[11], 1); // arcount
        assert_eq!(decode_message(&bytes).unwrap(), q);
    }

    #[test]
    fn response_with_answers_roundtrip() {
        let q = DnsMessage::query(9, name("api.example.iot"), QType::Aaaa, None);
        let mut resp = DnsMessage::response_to(
            &q,
            Rcode::NOERROR,
            vec![ResourceRecord {
                name: name("api.example.iot"),
                ttl: 300,
                addr: "2001:db8::7".parse().unwrap(),
            }],
        );
        resp.set_ecs(Some(
            EcsOption::new(Family::V6, 48, 40, vec![0x20, 0x01, 0x0d, 0xb8, 0, 0]).unwrap(),
        ));
        let bytes = encode_message(&resp).unwrap();
        assert_eq!(decode_message(&bytes).unwrap(), resp);
    }

    #[test]
    fn empty_and_short_input() {
        assert!(matches!(decode_message(&[]), Err(WireError::Truncated { .. })));
        let q = DnsMessage::query(1, name("example.com"), QType::A, None);
        let bytes = encode_message(&q).unwrap();
        for cut in 0..bytes.len() {
            assert!(
                matches!(decode_message(&bytes[..cut]), Err(WireError::Truncated { .. })),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn dirty_ecs_bit_is_malformed() {
        let ecs = EcsOption::from_addr("111.111.111.0".parse().unwrap(), 23).unwrap();
        let q = DnsMessage::query(3, name("x.y"), QType::A, Some(ecs));
        let mut bytes = encode_message(&q).unwrap();
        // last address octet is 0x6e for /23; set the 24th bit
        let last = bytes.len() - 1;
        assert_eq!(bytes[last], 0x6e);
        bytes[last] |= 0x01;
        assert!(matches!(decode_message(&bytes), Err(WireError::Malformed(_))));
    }

    #[test]
    fn unsupported_qtype_reported() {
        let q = DnsMessage::query(3, name("x.y"), QType::A, None);
        let mut bytes = encode_message(&q).unwrap();
        let n = bytes.len();
        bytes[n - 3] = 15; // MX
        assert_eq!(decode_message(&bytes), Err(WireError::UnsupportedType(15)));
    }

    #[test]
    fn accepts_compression_and_unknown_options() {
        // response for "www.example.com" A with the answer owner compressed to the
        // question name, plus an OPT carrying a cookie (10) before the ECS option
        let mut b = vec![0xab, 0xcd, 0x81, 0x80, 0, 1, 0, 1, 0, 0, 0, 1];
        b.extend_from_slice(b"\x03WWW\x07example\x03com\x00");
        b.extend_from_slice(&[0, 1, 0, 1]);
        b.extend_from_slice(&[0xc0, 0x0c, 0, 1, 0, 1, 0, 0, 0x0e, 0x10, 0, 4, 192, 0, 2, 1]);
        b.extend_from_slice(&[0, 0, 41, 0x10, 0, 0, 0, 0, 0]);
        let opts = [
            0, 10, 0, 8, 1, 2, 3, 4, 5, 6, 7, 8, // cookie
            0, 8, 0, 7, 0, 1, 24, 24, 198, 18, 3, // ECS scope 24
        ];
        b.extend_from_slice(&[0, opts.len() as u8]);
        b.extend_from_slice(&opts);
        let m = decode_message(&b).unwrap();
        assert_eq!(m.question.qname.as_str(), "www.example.com");
        assert_eq!(m.answers[0].name.as_str(), "www.example.com");
        assert_eq!(m.answers[0].ttl, 3600);
        assert_eq!(m.edns.as_ref().unwrap().udp_payload_size, 4096);
        let ecs = m.ecs().unwrap();
        assert_eq!(ecs.scope_prefix_len(), 24);
        assert_eq!(ecs.address(), &[198, 18, 3]);
    }

    #[test]
    fn pointer_loop_rejected() {
        let mut b = vec![0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0];
        b.extend_from_slice(&[0xc0, 0x0c, 0, 1, 0, 1]);
        assert!(matches!(decode_message(&b), Err(WireError::Malformed(_))));
    }

    #[test]
    fn query_scope_must_be_zero() {
        let ecs = EcsOption::new(Family::V4, 24, 24, vec![1, 2, 3]).unwrap();
        let mut q = DnsMessage::query(1, name("a.b"), QType::A, None);
        q.set_ecs(Some(ecs));
        assert!(matches!(encode_message(&q), Err(WireError::InvalidEcs(_))));
    }
}
