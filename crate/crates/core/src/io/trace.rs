//! Line-oriented trace files.
//!
//! ```text
//! # tilecast-trace v1
//! 0,1,roi,0,0,4,3
//! 2,1,tiles,17,18,19
//! 4,2,zoom,3
//! 6,3,channel,0,0,0,0.02,0.2,0.5,0.8,1
//! ```
//!
//! Fields are `time_s,user_id,kind` followed by the payload: a rectangle
//! `x,y,w,h` in tiles for `roi`, tile ids for `tiles`, a level for `zoom`
//! and one loss probability per rate for `channel`. Further `#` lines are
//! comments.

use std::path::Path;

use crate::simulator::{RoiSpec, TraceEvent, TraceKind};

use super::IoError;

pub const TRACE_HEADER: &str = "# tilecast-trace v1";

pub fn parse_trace_str(text: &str) -> Result<Vec<TraceEvent>, IoError> {
    let first = text.lines().next().unwrap_or_default().trim();
    if first != TRACE_HEADER {
        return Err(IoError::Parse {
            line: Some(1),
            field: None,
            message: format!("expected header `{TRACE_HEADER}`"),
        });
    }
    let mut events = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for (n, raw) in text.lines().enumerate() {
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let record: Vec<&str> = raw.split(',').map(str::trim).collect();
        let line = Some(n + 1);
        let err = |field: &str, message: String| IoError::Parse { line, field: Some(field.into()), message };
        if record.len() < 3 {
            return Err(err("kind", "expected time_s,user_id,kind,...".into()));
        }
        let time_s: f64 = record[0].parse().map_err(|_| err("time_s", format!("`{}` is not a number", record[0])))?;
        if !time_s.is_finite() || time_s < 0.0 {
            return Err(err("time_s", format!("{time_s} is not a valid time")));
        }
        if time_s < last {
            return Err(err("time_s", format!("{time_s} is earlier than the previous record ({last})")));
        }
        last = time_s;
        let user_id: u32 = record[1].parse().map_err(|_| err("user_id", format!("`{}` is not a user id", record[1])))?;
        let payload = &record[3..];
        let ints = |name: &str| -> Result<Vec<u32>, IoError> {
            payload.iter().map(|v| v.parse().map_err(|_| err(name, format!("`{v}` is not a non-negative integer")))).collect()
        };
        let kind = match record[2] {
            "roi" => {
                let v = ints("roi")?;
                let [x, y, w, h] = v[..] else {
                    return Err(err("roi", format!("expected x,y,w,h, found {} values", v.len())));
                };
                TraceKind::Roi(RoiSpec::Rect { x, y, w, h })
            }
            "tiles" => TraceKind::Roi(RoiSpec::Tiles(ints("tiles")?)),
            "zoom" => match ints("zoom")?[..] {
                [level] if level >= 1 => TraceKind::Zoom(level as usize),
                _ => return Err(err("zoom", "expected one level of at least 1".into())),
            },
            "channel" => {
                let row = payload
                    .iter()
                    .map(|v| v.parse::<f64>().map_err(|_| err("channel", format!("`{v}` is not a probability"))))
                    .collect::<Result<Vec<_>, _>>()?;
                if row.is_empty() || row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(err("channel", "expected probabilities in [0, 1]".into()));
                }
                TraceKind::Channel(row)
            }
            other => return Err(err("kind", format!("unknown event kind `{other}` (roi, tiles, zoom or channel)"))),
        };
        events.push(TraceEvent { time_s, user_id, kind });
    }
    Ok(events)
}

pub fn parse_trace(path: &Path) -> Result<Vec<TraceEvent>, IoError> {
    parse_trace_str(&super::read(path)?).map_err(|e| e.in_file(path))
}

pub fn write_trace_string(events: &[TraceEvent]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    let mut writer = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    for e in events {
        let mut row = vec![e.time_s.to_string(), e.user_id.to_string()];
        match &e.kind {
            TraceKind::Roi(RoiSpec::Rect { x, y, w, h }) => {
                row.push("roi".into());
                row.extend([x, y, w, h].map(|v| v.to_string()));
            }
            TraceKind::Roi(RoiSpec::Tiles(t)) => {
                row.push("tiles".into());
                row.extend(t.iter().map(|v| v.to_string()));
            }
            TraceKind::Zoom(l) => row.extend(["zoom".into(), l.to_string()]),
            TraceKind::Channel(p) => {
                row.push("channel".into());
                row.extend(p.iter().map(|v| v.to_string()));
            }
        }
        writer.write_record(&row).expect("writing to memory");
    }
    out.push_str(&String::from_utf8(writer.into_inner().expect("in-memory writer")).expect("ASCII fields"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "# tilecast-trace v1\n\n0,1,roi,0,0,4,3\n# a comment\n2,1,tiles,17,18\n4.5,2,zoom,3\n6,3,channel,0,0.1,1\n";

    #[test]
    fn parses_every_kind() {
        let events = parse_trace_str(SAMPLE).unwrap();
        assert_eq!(events.len(), 4);
        assert_eq!(events[0].kind, TraceKind::Roi(RoiSpec::Rect { x: 0, y: 0, w: 4, h: 3 }));
        assert_eq!(events[1].kind, TraceKind::Roi(RoiSpec::Tiles(vec![17, 18])));
        assert_eq!(events[2].kind, TraceKind::Zoom(3));
        assert_eq!(events[2].time_s, 4.5);
        assert_eq!(events[3].kind, TraceKind::Channel(vec![0.0, 0.1, 1.0]));
    }

    #[test]
    fn round_trip_is_identity() {
        let events = parse_trace_str(SAMPLE).unwrap();
        let text = write_trace_string(&events);
        assert_eq!(parse_trace_str(&text).unwrap(), events);
        assert_eq!(write_trace_string(&parse_trace_str(&text).unwrap()), text);
    }

    #[test]
    fn times_must_not_go_back() {
        let text = "# tilecast-trace v1\n2,1,zoom,1\n# note\n1,1,zoom,2\n";
        match parse_trace_str(text) {
            Err(IoError::Parse { line: Some(4), field: Some(f), .. }) => assert_eq!(f, "time_s"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_name_the_line() {
        let text = "# tilecast-trace v1\n0,1,roi,0,0,4\n";
        assert!(matches!(parse_trace_str(text), Err(IoError::Parse { line: Some(2), .. })));
        let text = "# tilecast-trace v1\n0,1,teleport,0\n";
        assert!(matches!(parse_trace_str(text), Err(IoError::Parse { line: Some(2), .. })));
        assert!(matches!(parse_trace_str("0,1,zoom,1\n"), Err(IoError::Parse { line: Some(1), .. })));
    }
}
