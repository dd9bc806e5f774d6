//! Raw artifact parsers: libpcap captures, decoded message traces and
//! srsRAN-style logs, plus log-window slicing.

pub mod pcap;
pub mod srsran;
pub mod trace;
pub mod window;

pub use pcap::{parse_pcap, write_pcap, ByteOrder, MagicKind, PcapCapture, PcapError, PcapPacket};
pub use srsran::{extract_message_records, parse_srsran_log, LogLevel, LogLine, SrsranParse};
pub use trace::{parse_decoded_trace, write_decoded_trace, TraceError};
pub use window::{make_window, reindex, WindowError};
