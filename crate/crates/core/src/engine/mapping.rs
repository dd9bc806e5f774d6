//! Raw artifacts to message records, and the merge done by pcap-processing.

use crate::context::{ContextObject, MessageRecord, Schema, TextBlob};
use crate::graph::MapperKind;
use crate::ingest::{extract_message_records, parse_decoded_trace, parse_srsran_log, TraceError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MappingError {
    #[error("{mapper:?} mapper cannot read {schema} objects")]
    WrongInput { mapper: MapperKind, schema: Schema },
    #[error("decoded trace: {0}")]
    Trace(#[from] TraceError),
    #[error("{0}")]
    Decode(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mapped {
    pub records: Vec<MessageRecord>,
    /// Log lines that did not match the srsRAN grammar.
    pub skipped_lines: usize,
}

/// Runs one mapper over one object. Message records pass through
/// unchanged whatever the mapper, since captures arrive already parsed.
pub fn apply_mapper(
    mapper: MapperKind,
    invert: bool,
    object: &ContextObject,
) -> Result<Mapped, MappingError> {
    let wrong = || MappingError::WrongInput {
        mapper,
        schema: object.schema(),
    };
    match object.schema() {
        Schema::MessageRecord => {
            let r: MessageRecord = object
                .decode_payload()
                .map_err(|e| MappingError::Decode(e.to_string()))?;
            Ok(Mapped {
                records: vec![r],
                skipped_lines: 0,
            })
        }
        Schema::TextBlob => {
            let blob: TextBlob = object
                .decode_payload()
                .map_err(|e| MappingError::Decode(e.to_string()))?;
            match mapper {
                MapperKind::DecodedTrace => Ok(Mapped {
                    records: parse_decoded_trace(&blob.text)?,
                    skipped_lines: 0,
                }),
                MapperKind::SrsranLog => {
                    let parsed = parse_srsran_log(&blob.text);
                    Ok(Mapped {
                        records: extract_message_records(&parsed.lines, invert),
                        skipped_lines: parsed.skip_count(),
                    })
                }
                MapperKind::Pcap | MapperKind::Passthrough => Err(wrong()),
            }
        }
        _ => Err(wrong()),
    }
}

/// Merges per-source record lists by timestamp. Equal timestamps put
/// decoded-trace records first, then sources in the order given; the
/// result is reindexed 0..N-1. Each record carries a tag along.
pub fn merge_tagged<T>(
    sources: Vec<(MapperKind, Vec<(MessageRecord, T)>)>,
) -> Vec<(MessageRecord, T)> {
    let mut keyed = Vec::new();
    for (order, (kind, records)) in sources.into_iter().enumerate() {
        let rank = if kind == MapperKind::DecodedTrace {
            0
        } else {
            1
        };
        keyed.extend(
            records
                .into_iter()
                .map(|r| ((r.0.timestamp_us, rank, order), r)),
        );
    }
    // stable: records keep their within-source order on full ties
    keyed.sort_by_key(|(k, _)| *k);
    keyed
        .into_iter()
        .enumerate()
        .map(|(i, (_, (mut r, tag)))| {
            r.index = i as u64;
            (r, tag)
        })
        .collect()
}

/// [`merge_tagged`] without tags.
pub fn merge_records(sources: Vec<(MapperKind, Vec<MessageRecord>)>) -> Vec<MessageRecord> {
    let tagged = sources
        .into_iter()
        .map(|(k, rs)| (k, rs.into_iter().map(|r| (r, ())).collect()))
        .collect();
    merge_tagged(tagged).into_iter().map(|(r, _)| r).collect()
}
