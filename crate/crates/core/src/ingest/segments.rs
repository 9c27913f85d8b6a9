use super::photic::PhoticTrain;
use super::{overlap_error, IngestError, Recording, Segment, SegmentKind};

/// Attach IPS, HV and resting segments.
///
/// IPS spans the first to the last train; HV comes from the annotation;
/// resting is the longest span touching neither.
pub fn locate_segments(
    mut recording: Recording,
    trains: &[PhoticTrain],
    hv: Option<(usize, usize)>,
) -> Result<Recording, IngestError> {
    let n = recording.n_samples();
    let mut stimuli = Vec::new();
    if let (Some(first), Some(last)) = (
        trains.iter().map(|t| t.start_sample).min(),
        trains.iter().map(|t| t.end_sample).max(),
    ) {
        stimuli.push(Segment { kind: SegmentKind::Ips, start: first, end: last.min(n) });
    }
    if let Some((start, end)) = hv {
        stimuli.push(Segment { kind: SegmentKind::Hv, start, end });
    }
    for s in &stimuli {
        if s.is_empty() || s.end > n {
            return Err(IngestError::SegmentOutOfRange { kind: s.kind, start: s.start, end: s.end, len: n });
        }
    }
    if stimuli.len() == 2 && stimuli[0].overlaps(&stimuli[1]) {
        return Err(overlap_error(&stimuli[0], &stimuli[1]));
    }

    stimuli.sort_by_key(|s| s.start);
    let mut best: Option<Segment> = None;
    let mut cursor = 0;
    let mut consider = |start: usize, end: usize| {
        if end > start && best.is_none_or(|b| end - start > b.len()) {
            best = Some(Segment { kind: SegmentKind::Resting, start, end });
        }
    };
    for s in &stimuli {
        consider(cursor, s.start);
        cursor = s.end;
    }
    consider(cursor, n);

    recording.segments = stimuli;
    recording.segments.extend(best);
    recording.segments.sort_by_key(|s| s.start);
    Ok(recording)
}
