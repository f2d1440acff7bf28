//! Per-seed learning-curve logs: comma-separated, fixed header.

use std::io::{Read, Write};

use rtrl_core::agents::CurveRecord;

pub const HEADER: [&str; 7] = [
    "step",
    "episode_return",
    "policy_loss",
    "value_loss",
    "popart_mean",
    "popart_scale",
    "wall_time",
];

/// Column index of the only non-deterministic field.
pub const WALL_TIME_COLUMN: usize = 6;

pub struct LogWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> LogWriter<W> {
    pub fn new(w: W) -> csv::Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(HEADER)?;
        Ok(Self { inner })
    }

    /// Floats use the shortest form that parses back to the same bits.
    pub fn write(&mut self, r: &CurveRecord, wall_time: f64) -> csv::Result<()> {
        self.inner.write_record([
            r.step.to_string(),
            r.episode_return.to_string(),
            r.policy_loss.to_string(),
            r.value_loss.to_string(),
            r.popart_mean.to_string(),
            r.popart_scale.to_string(),
            format!("{wall_time:.3}"),
        ])?;
        self.inner.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub record: CurveRecord,
    pub wall_time: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("unexpected header {0:?}")]
    Header(Vec<String>),
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
}

pub fn read_log<R: Read>(r: R) -> Result<Vec<LogRow>, LogError> {
    let mut reader = csv::Reader::from_reader(r);
    let header = reader.headers()?;
    if header.iter().ne(HEADER) {
        return Err(LogError::Header(header.iter().map(String::from).collect()));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let field = |k: usize| -> Result<f64, LogError> {
            rec[k].parse::<f64>().map_err(|e| LogError::Row {
                row,
                reason: format!("{}: {e}", HEADER[k]),
            })
        };
        let step = rec[0].parse::<u64>().map_err(|e| LogError::Row {
            row,
            reason: format!("step: {e}"),
        })?;
        rows.push(LogRow {
            record: CurveRecord {
                step,
                episode_return: field(1)?,
                policy_loss: field(2)?,
                value_loss: field(3)?,
                popart_mean: field(4)?,
                popart_scale: field(5)?,
            },
            wall_time: field(WALL_TIME_COLUMN)?,
        });
    }
    Ok(rows)
}

/// The log text with the wall-time column removed from every line.
pub fn without_wall_time(text: &str) -> String {
    text.lines()
        .map(|l| {
            let mut fields: Vec<&str> = l.split(',').collect();
            if fields.len() > WALL_TIME_COLUMN {
                fields.remove(WALL_TIME_COLUMN);
            }
            fields.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(step: u64) -> CurveRecord {
        CurveRecord {
            step,
            episode_return: -1.0 / 3.0,
            policy_loss: f64::NAN,
            value_loss: 1e-300,
            popart_mean: 0.1 + 0.2,
            popart_scale: 1.0,
        }
    }

    #[test]
    fn round_trips_bit_exactly() {
        let mut buf = Vec::new();
        let mut w = LogWriter::new(&mut buf).unwrap();
        w.write(&record(0), 0.0).unwrap();
        w.write(&record(2500), 1.25).unwrap();
        drop(w);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "step,episode_return,policy_loss,value_loss,popart_mean,popart_scale,wall_time\n"
        ));
        let rows = read_log(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        let (a, b) = (rows[1].record, record(2500));
        assert_eq!(a.step, b.step);
        assert_eq!(a.episode_return.to_bits(), b.episode_return.to_bits());
        assert!(a.policy_loss.is_nan());
        assert_eq!(a.value_loss, b.value_loss);
        assert_eq!(a.popart_mean, b.popart_mean);
        assert_eq!(rows[1].wall_time, 1.25);
    }

    #[test]
    fn wall_time_is_stripped() {
        assert_eq!(
            without_wall_time("a,b,c,d,e,f,g\n1,2,3,4,5,6,7.5"),
            "a,b,c,d,e,f\n1,2,3,4,5,6"
        );
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(matches!(
            read_log("a,b\n1,2\n".as_bytes()),
            Err(LogError::Header(_))
        ));
    }
}
