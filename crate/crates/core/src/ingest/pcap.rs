//! Classic libpcap container: 24-byte global header followed by 16-byte
//! record headers and payloads. Both magics (usec/nsec) and both byte
//! orders are accepted; pcapng is not.

use serde::{Deserialize, Serialize};

use crate::context::{Direction, MessageRecord, RawRef};

const MAGIC_USEC: u32 = 0xa1b2_c3d4;
const MAGIC_NSEC: u32 = 0xa1b2_3c4d;
const GLOBAL_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MagicKind {
    Usec,
    Nsec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ByteOrder {
    /// Little-endian on disk.
    Same,
    /// Big-endian on disk.
    Swapped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcapPacket {
    pub index: u64,
    pub ts_sec: u32,
    pub ts_subsec: u32,
    pub incl_len: u32,
    pub orig_len: u32,
    /// Byte offset of the payload within the source file.
    pub offset: u64,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcapCapture {
    pub magic_kind: MagicKind,
    pub byte_order: ByteOrder,
    pub version: (u16, u16),
    pub thiszone: i32,
    pub sigfigs: u32,
    pub snaplen: u32,
    pub linktype: u32,
    pub packets: Vec<PcapPacket>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PcapError {
    #[error("bad magic 0x{0:08x}")]
    BadMagic(u32),
    #[error("truncated global header ({0} bytes)")]
    TruncatedHeader(usize),
    #[error("unsupported version {0}.{1}")]
    UnsupportedVersion(u16, u16),
    #[error("truncated record at packet index {0}")]
    TruncatedRecord(u64),
    #[error("incl_len at packet index {0} exceeds the remaining bytes")]
    InclLenExceedsRemaining(u64),
    #[error("incl_len exceeds orig_len at packet index {0}")]
    InclLenExceedsOrigLen(u64),
}

/// Timestamp-normalized view used to compare captures across magics and
/// byte orders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicalPacket {
    pub timestamp_ns: u64,
    pub incl_len: u32,
    pub orig_len: u32,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicalCapture {
    pub version: (u16, u16),
    pub snaplen: u32,
    pub linktype: u32,
    pub packets: Vec<LogicalPacket>,
}

impl PcapCapture {
    pub fn logical(&self) -> LogicalCapture {
        LogicalCapture {
            version: self.version,
            snaplen: self.snaplen,
            linktype: self.linktype,
            packets: self
                .packets
                .iter()
                .map(|p| LogicalPacket {
                    timestamp_ns: self.timestamp_ns(p),
                    incl_len: p.incl_len,
                    orig_len: p.orig_len,
                    payload: p.payload.clone(),
                })
                .collect(),
        }
    }

    pub fn timestamp_ns(&self, p: &PcapPacket) -> u64 {
        let sub = match self.magic_kind {
            MagicKind::Usec => u64::from(p.ts_subsec) * 1_000,
            MagicKind::Nsec => u64::from(p.ts_subsec),
        };
        u64::from(p.ts_sec) * 1_000_000_000 + sub
    }

    pub fn timestamp_us(&self, p: &PcapPacket) -> i64 {
        (self.timestamp_ns(p) / 1_000) as i64
    }

    /// One record per packet. No payload decoding: the protocol is the
    /// link type, the payload stays addressable through `raw_ref`.
    pub fn to_message_records(&self) -> Vec<MessageRecord> {
        let protocol = linktype_token(self.linktype);
        self.packets
            .iter()
            .map(|p| MessageRecord {
                protocol: protocol.clone(),
                name: "Packet".to_string(),
                timestamp_us: self.timestamp_us(p),
                direction: Direction::Internal,
                index: p.index,
                raw_ref: Some(RawRef {
                    offset: p.offset,
                    length: u64::from(p.incl_len),
                }),
            })
            .collect()
    }
}

pub fn linktype_token(linktype: u32) -> String {
    match linktype {
        1 => "ETHERNET".to_string(),
        101 => "RAW".to_string(),
        113 => "LINUX_SLL".to_string(),
        147..=162 => format!("USER{}", linktype - 147),
        228 => "IPV4".to_string(),
        229 => "IPV6".to_string(),
        252 => "WIRESHARK_UPPER_PDU".to_string(),
        other => format!("LINKTYPE_{other}"),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    big_endian: bool,
}

impl Reader<'_> {
    fn u32_at(&self, at: usize) -> u32 {
        let b: [u8; 4] = self.bytes[at..at + 4].try_into().expect("4-byte slice");
        if self.big_endian {
            u32::from_be_bytes(b)
        } else {
            u32::from_le_bytes(b)
        }
    }

    fn u16_at(&self, at: usize) -> u16 {
        let b: [u8; 2] = self.bytes[at..at + 2].try_into().expect("2-byte slice");
        if self.big_endian {
            u16::from_be_bytes(b)
        } else {
            u16::from_le_bytes(b)
        }
    }
}

pub fn parse_pcap(bytes: &[u8]) -> Result<PcapCapture, PcapError> {
    if bytes.len() < 4 {
        return Err(PcapError::TruncatedHeader(bytes.len()));
    }
    let le = u32::from_le_bytes(bytes[..4].try_into().expect("4 bytes"));
    let be = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes"));
    let (magic_kind, byte_order) = match (le, be) {
        (MAGIC_USEC, _) => (MagicKind::Usec, ByteOrder::Same),
        (MAGIC_NSEC, _) => (MagicKind::Nsec, ByteOrder::Same),
        (_, MAGIC_USEC) => (MagicKind::Usec, ByteOrder::Swapped),
        (_, MAGIC_NSEC) => (MagicKind::Nsec, ByteOrder::Swapped),
        _ => return Err(PcapError::BadMagic(le)),
    };
    if bytes.len() < GLOBAL_HEADER_LEN {
        return Err(PcapError::TruncatedHeader(bytes.len()));
    }
    let r = Reader {
        bytes,
        big_endian: byte_order == ByteOrder::Swapped,
    };
    let version = (r.u16_at(4), r.u16_at(6));
    if version != (2, 4) {
        return Err(PcapError::UnsupportedVersion(version.0, version.1));
    }
    let thiszone = r.u32_at(8) as i32;
    let sigfigs = r.u32_at(12);
    let snaplen = r.u32_at(16);
    let linktype = r.u32_at(20);

    let mut packets = Vec::new();
    let mut at = GLOBAL_HEADER_LEN;
    while at < bytes.len() {
        let index = packets.len() as u64;
        if bytes.len() - at < RECORD_HEADER_LEN {
            return Err(PcapError::TruncatedRecord(index));
        }
        let ts_sec = r.u32_at(at);
        let ts_subsec = r.u32_at(at + 4);
        let incl_len = r.u32_at(at + 8);
        let orig_len = r.u32_at(at + 12);
        at += RECORD_HEADER_LEN;
        let remaining = bytes.len() - at;
        if incl_len as usize > remaining {
            // A length beyond the snapshot length is a corrupt field rather
            // than a file cut short.
            return Err(if incl_len > snaplen.max(1) {
                PcapError::InclLenExceedsRemaining(index)
            } else {
                PcapError::TruncatedRecord(index)
            });
        }
        if incl_len > orig_len {
            return Err(PcapError::InclLenExceedsOrigLen(index));
        }
        let payload = bytes[at..at + incl_len as usize].to_vec();
        packets.push(PcapPacket {
            index,
            ts_sec,
            ts_subsec,
            incl_len,
            orig_len,
            offset: at as u64,
            payload,
        });
        at += incl_len as usize;
    }
    Ok(PcapCapture {
        magic_kind,
        byte_order,
        version,
        thiszone,
        sigfigs,
        snaplen,
        linktype,
        packets,
    })
}

/// Serializes `capture` in its own magic and byte order.
pub fn write_pcap(capture: &PcapCapture) -> Vec<u8> {
    let big = capture.byte_order == ByteOrder::Swapped;
    let mut out = Vec::with_capacity(
        GLOBAL_HEADER_LEN
            + capture
                .packets
                .iter()
                .map(|p| RECORD_HEADER_LEN + p.payload.len())
                .sum::<usize>(),
    );
    let put32 = |out: &mut Vec<u8>, v: u32| {
        out.extend_from_slice(&if big {
            v.to_be_bytes()
        } else {
            v.to_le_bytes()
        })
    };
    let put16 = |out: &mut Vec<u8>, v: u16| {
        out.extend_from_slice(&if big {
            v.to_be_bytes()
        } else {
            v.to_le_bytes()
        })
    };
    put32(
        &mut out,
        match capture.magic_kind {
            MagicKind::Usec => MAGIC_USEC,
            MagicKind::Nsec => MAGIC_NSEC,
        },
    );
    put16(&mut out, capture.version.0);
    put16(&mut out, capture.version.1);
    put32(&mut out, capture.thiszone as u32);
    put32(&mut out, capture.sigfigs);
    put32(&mut out, capture.snaplen);
    put32(&mut out, capture.linktype);
    for p in &capture.packets {
        put32(&mut out, p.ts_sec);
        put32(&mut out, p.ts_subsec);
        put32(&mut out, p.payload.len() as u32);
        put32(&mut out, p.orig_len);
        out.extend_from_slice(&p.payload);
    }
    out
}
