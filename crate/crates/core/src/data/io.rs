use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CarFollowingEvent, RawSample, Trajectory, MAX_SAMPLE_GAP_S};
use crate::error::{Error, Result};

pub const TRAJECTORY_HEADER: [&str; 6] = [
    "driver_id",
    "timestamp_s",
    "ego_speed_mps",
    "ego_accel_mps2",
    "rel_distance_m",
    "rel_speed_mps",
];

fn parse_field(
    path: &Path,
    row: usize,
    name: &str,
    raw: &str,
    required: bool,
) -> Result<Option<f64>> {
    let raw = raw.trim();
    if raw.is_empty() {
        if required {
            return Err(Error::MalformedRow {
                path: path.into(),
                row,
                message: format!("empty {name}"),
            });
        }
        return Ok(None);
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::MalformedRow {
            path: path.into(),
            row,
            message: format!("cannot parse {name} from {raw:?}"),
        }),
    }
}

/// Read a trajectory CSV. Rows are grouped by driver (in order of first
/// appearance) and split into blocks wherever consecutive samples are more
/// than one sample period apart. Row numbers in errors count the header as
/// row 1.
pub fn load_trajectories(path: impl AsRef<Path>) -> Result<Vec<Trajectory>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(BufReader::new(file));

    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => {
            return Err(Error::Format { path: path.into(), message: e.to_string() })
        }
        Err(e) => return Err(Error::Format { path: path.into(), message: e.to_string() }),
    };
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    if headers.iter().map(str::trim).ne(TRAJECTORY_HEADER.iter().copied()) {
        return Err(Error::Format {
            path: path.into(),
            message: format!("expected header {}", TRAJECTORY_HEADER.join(",")),
        });
    }

    let mut order: Vec<String> = Vec::new();
    let mut per_driver: HashMap<String, Vec<RawSample>> = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::MalformedRow {
            path: path.into(),
            row,
            message: e.to_string(),
        })?;
        let driver_id = record[0].trim().to_string();
        if driver_id.is_empty() {
            return Err(Error::MalformedRow { path: path.into(), row, message: "empty driver_id".into() });
        }
        let sample = RawSample {
            timestamp: parse_field(path, row, "timestamp_s", &record[1], true)?.unwrap(),
            ego_speed: parse_field(path, row, "ego_speed_mps", &record[2], true)?.unwrap(),
            ego_accel: parse_field(path, row, "ego_accel_mps2", &record[3], true)?.unwrap(),
            rel_distance: parse_field(path, row, "rel_distance_m", &record[4], false)?,
            rel_speed: parse_field(path, row, "rel_speed_mps", &record[5], false)?,
        };
        let samples = per_driver.entry(driver_id.clone()).or_insert_with(|| {
            order.push(driver_id.clone());
            Vec::new()
        });
        if let Some(prev) = samples.last() {
            if sample.timestamp <= prev.timestamp {
                return Err(Error::OutOfOrder {
                    path: path.into(),
                    row,
                    driver_id,
                    timestamp: sample.timestamp,
                });
            }
        }
        samples.push(sample);
    }

    let mut out = Vec::new();
    for driver_id in order {
        let samples = per_driver.remove(&driver_id).unwrap_or_default();
        let mut block: Vec<RawSample> = Vec::new();
        for s in samples {
            if let Some(prev) = block.last() {
                if s.timestamp - prev.timestamp > MAX_SAMPLE_GAP_S {
                    out.push(Trajectory { driver_id: driver_id.clone(), samples: std::mem::take(&mut block) });
                }
            }
            block.push(s);
        }
        if !block.is_empty() {
            out.push(Trajectory { driver_id: driver_id.clone(), samples: block });
        }
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn write_trajectories_csv(path: impl AsRef<Path>, trajectories: &[Trajectory]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", TRAJECTORY_HEADER.join(",")).map_err(io)?;
    for t in trajectories {
        for s in &t.samples {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                t.driver_id,
                s.timestamp,
                s.ego_speed,
                s.ego_accel,
                opt(s.rel_distance),
                opt(s.rel_speed)
            )
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// One JSON document per driver listing its extracted events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverEvents {
    pub driver_id: String,
    pub events: Vec<EventRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub start_s: f64,
    pub duration_s: f64,
    pub samples: Vec<RawSample>,
}

impl DriverEvents {
    pub fn new(driver_id: &str, events: &[CarFollowingEvent]) -> Self {
        Self {
            driver_id: driver_id.to_string(),
            events: events
                .iter()
                .map(|e| EventRecord {
                    start_s: e.samples.first().map_or(0.0, |s| s.timestamp),
                    duration_s: e.duration(),
                    samples: e.samples.clone(),
                })
                .collect(),
        }
    }

    pub fn into_events(self) -> Vec<CarFollowingEvent> {
        let id = self.driver_id;
        self.events
            .into_iter()
            .map(|r| CarFollowingEvent { driver_id: id.clone(), samples: r.samples })
            .collect()
    }
}

pub fn write_events_json(path: impl AsRef<Path>, doc: &DriverEvents) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, doc).map_err(|e| Error::Format { path: path.into(), message: e.to_string() })?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_events_json(path: impl AsRef<Path>) -> Result<DriverEvents> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Format { path: path.into(), message: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    const HEADER: &str = "driver_id,timestamp_s,ego_speed_mps,ego_accel_mps2,rel_distance_m,rel_speed_mps\n";

    #[test]
    fn two_rows_one_driver() {
        let f = write(&format!("{HEADER}a,0.0,25,0.1,40,0\na,0.1,25.1,0.1,39.9,\n"));
        let t = load_trajectories(f.path()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].samples.len(), 2);
        assert_eq!(t[0].samples[1].rel_speed, None);
    }

    #[test]
    fn shuffled_timestamps_name_the_row() {
        let f = write(&format!("{HEADER}a,0.0,25,0,40,0\na,0.2,25,0,40,0\na,0.1,25,0,40,0\n"));
        match load_trajectories(f.path()) {
            Err(Error::OutOfOrder { row, .. }) => assert_eq!(row, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn partitions_by_driver() {
        let f = write(&format!("{HEADER}a,0.0,25,0,40,0\nb,0.0,25,0,40,0\na,0.1,25,0,40,0\n"));
        let t = load_trajectories(f.path()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].driver_id, "a");
        assert_eq!(t[0].samples.len(), 2);
        assert_eq!(t[1].driver_id, "b");
    }

    #[test]
    fn missing_lead_is_kept_as_gap() {
        let f = write(&format!("{HEADER}a,0.0,25,0,,\na,0.1,25,0,40,0\n"));
        let t = load_trajectories(f.path()).unwrap();
        assert_eq!(t[0].samples[0].rel_distance, None);
    }

    #[test]
    fn time_gap_starts_a_new_block() {
        let f = write(&format!("{HEADER}a,0.0,25,0,40,0\na,0.1,25,0,40,0\na,10.0,25,0,40,0\n"));
        assert_eq!(load_trajectories(f.path()).unwrap().len(), 2);
    }

    #[test]
    fn malformed_row_is_rejected() {
        let f = write(&format!("{HEADER}a,0.0,25,0,40,0\na,0.1,fast,0,40,0\n"));
        match load_trajectories(f.path()) {
            Err(Error::MalformedRow { row, .. }) => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
        let f = write(&format!("{HEADER}a,0.0,25,0\n"));
        assert!(matches!(load_trajectories(f.path()), Err(Error::MalformedRow { row: 2, .. })));
    }

    #[test]
    fn empty_file_is_empty() {
        let f = write("");
        assert!(load_trajectories(f.path()).unwrap().is_empty());
        let f = write(HEADER);
        assert!(load_trajectories(f.path()).unwrap().is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let traj = Trajectory {
            driver_id: "x".into(),
            samples: (0..5)
                .map(|i| RawSample {
                    timestamp: i as f64 * 0.1,
                    ego_speed: 20.0 + i as f64 * 0.013,
                    ego_accel: -0.25,
                    rel_distance: if i == 2 { None } else { Some(33.3 + i as f64) },
                    rel_speed: Some(0.5),
                })
                .collect(),
        };
        let f = tempfile::NamedTempFile::new().unwrap();
        write_trajectories_csv(f.path(), std::slice::from_ref(&traj)).unwrap();
        assert_eq!(load_trajectories(f.path()).unwrap(), vec![traj]);
    }
}
