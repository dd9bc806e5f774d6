//! Generator for arbitrary well-formed pcap captures.

use proptest::prelude::*;
use telehub_core::ingest::{ByteOrder, MagicKind, PcapCapture, PcapPacket};

pub fn capture() -> impl Strategy<Value = PcapCapture> {
    let packet = (
        any::<u32>(),
        any::<u32>(),
        prop::collection::vec(any::<u8>(), 0..40),
        0u32..8,
    );
    (
        any::<bool>(),
        any::<bool>(),
        any::<i32>(),
        any::<u32>(),
        any::<u32>(),
        any::<u32>(),
        prop::collection::vec(packet, 0..6),
    )
        .prop_map(
            |(nsec, swapped, thiszone, sigfigs, snaplen, linktype, packets)| {
                let mut offset = 24u64;
                let packets = packets
                    .into_iter()
                    .enumerate()
                    .map(|(i, (sec, sub, payload, extra))| {
                        offset += 16;
                        let p = PcapPacket {
                            index: i as u64,
                            ts_sec: sec,
                            ts_subsec: if nsec {
                                sub % 1_000_000_000
                            } else {
                                sub % 1_000_000
                            },
                            incl_len: payload.len() as u32,
                            orig_len: payload.len() as u32 + extra,
                            offset,
                            payload,
                        };
                        offset += u64::from(p.incl_len);
                        p
                    })
                    .collect();
                PcapCapture {
                    magic_kind: if nsec {
                        MagicKind::Nsec
                    } else {
                        MagicKind::Usec
                    },
                    byte_order: if swapped {
                        ByteOrder::Swapped
                    } else {
                        ByteOrder::Same
                    },
                    version: (2, 4),
                    thiszone,
                    sigfigs,
                    snaplen,
                    linktype,
                    packets,
                }
            },
        )
}
