use crate::context::{LogWindow, MessageRecord};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WindowError {
    #[error("window start {start} outside [0, {len}]")]
    StartOutOfRange { start: usize, len: usize },
    #[error("window size must be at least 1")]
    ZeroSize,
}

/// Window over `[start, min(start + size, N))`. Records are expected to be
/// indexed by position (the engine reindexes merged traces).
pub fn make_window(
    source_id: &str,
    records: &[MessageRecord],
    window_size: usize,
    start_index: usize,
) -> Result<LogWindow, WindowError> {
    if window_size == 0 {
        return Err(WindowError::ZeroSize);
    }
    if start_index > records.len() {
        return Err(WindowError::StartOutOfRange {
            start: start_index,
            len: records.len(),
        });
    }
    let end = start_index.saturating_add(window_size).min(records.len());
    let slice = &records[start_index..end];
    debug_assert!(slice
        .iter()
        .enumerate()
        .all(|(i, r)| r.index == (start_index + i) as u64));
    Ok(LogWindow {
        source_id: source_id.to_string(),
        start_index: start_index as u64,
        end_index: end as u64,
        records: slice.to_vec(),
    })
}

/// Renumbers `records` to 0..N-1 in their current order.
pub fn reindex(records: &mut [MessageRecord]) {
    for (i, r) in records.iter_mut().enumerate() {
        r.index = i as u64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::Direction;

    fn recs(n: usize) -> Vec<MessageRecord> {
        (0..n)
            .map(|i| MessageRecord {
                protocol: "RRC".into(),
                name: format!("M{i}"),
                timestamp_us: i as i64,
                direction: Direction::Ul,
                index: i as u64,
                raw_ref: None,
            })
            .collect()
    }

    fn indices(w: &LogWindow) -> Vec<u64> {
        w.records.iter().map(|r| r.index).collect()
    }

    #[test]
    fn size_beyond_len() {
        let w = make_window("t", &recs(5), 10, 0).unwrap();
        assert_eq!((w.start_index, w.end_index, w.records.len()), (0, 5, 5));
    }

    #[test]
    fn partial_tail() {
        let w = make_window("t", &recs(12), 4, 10).unwrap();
        assert_eq!((w.start_index, w.end_index), (10, 12));
        assert_eq!(indices(&w), [10, 11]);
    }

    #[test]
    fn middle_window() {
        let w = make_window("t", &recs(12), 4, 4).unwrap();
        assert_eq!(indices(&w), [4, 5, 6, 7]);
    }

    #[test]
    fn bounds() {
        assert!(make_window("t", &recs(3), 2, 3).unwrap().records.is_empty());
        assert_eq!(
            make_window("t", &recs(3), 2, 4),
            Err(WindowError::StartOutOfRange { start: 4, len: 3 })
        );
        assert_eq!(make_window("t", &recs(3), 0, 0), Err(WindowError::ZeroSize));
    }
}
