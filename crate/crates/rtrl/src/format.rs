//! File formats: the plain-text finite MDP table and binary parameter
//! checkpoints.
//!
//! MDP text layout (whitespace separated, `#` starts a comment):
//!
//! ```text
//! 2 1          # |S| |A|
//! 1 0          # μ
//! 0.5 0.5      # p(·|s=0, a=0)
//! 0 1          # p(·|s=1, a=0)
//! 1            # r(0, ·)
//! -1           # r(1, ·)
//! ```
//!
//! Checkpoint layout: the magic `RTRLCKPT`, a little-endian `u32` version,
//! a `u32` block count, one `(u64 rows, u64 cols)` pair per block, a `u64`
//! weight count and then the weights as little-endian `f64`.

use std::fmt::Write as _;
use std::io::{self, Read, Write};

use rtrl_core::mdp::FiniteMdp;
use rtrl_core::nn::{Layout, ParameterVector};
use thiserror::Error;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RTRLCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unexpected end of input: {0}")]
    Truncated(String),
    #[error("invalid MDP: {0}")]
    Mdp(#[from] rtrl_core::Error),
    #[error("not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint holds {found} weights, its layout needs {expected}")]
    WeightCount { expected: u64, found: u64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Non-empty lines with comments stripped, numbered from 1.
fn rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let body = l.split('#').next().unwrap_or("");
        let fields: Vec<&str> = body.split_whitespace().collect();
        (!fields.is_empty()).then_some((i + 1, fields))
    })
}

fn numbers<T: std::str::FromStr>(
    line: usize,
    fields: &[&str],
    expected: usize,
    what: &str,
) -> Result<Vec<T>, FormatError> {
    if fields.len() != expected {
        return Err(FormatError::Parse {
            line,
            reason: format!(
                "{what}: expected {expected} numbers, found {}",
                fields.len()
            ),
        });
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<T>().map_err(|_| FormatError::Parse {
                line,
                reason: format!("{what}: `{f}` is not a number"),
            })
        })
        .collect()
}

pub fn parse_mdp(text: &str) -> Result<FiniteMdp, FormatError> {
    let mut lines = rows(text);
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| FormatError::Truncated(what.to_string()))
    };
    let (line, header) = next("header")?;
    let dims: Vec<usize> = numbers(line, &header, 2, "header")?;
    let (ns, na) = (dims[0], dims[1]);
    let (line, fields) = next("initial distribution")?;
    let initial = numbers(line, &fields, ns, "initial distribution")?;
    let mut transitions = Vec::with_capacity(ns * na * ns);
    for s in 0..ns {
        for a in 0..na {
            let what = format!("transition row ({s}, {a})");
            let (line, fields) = next(&what)?;
            transitions.extend(numbers::<f64>(line, &fields, ns, &what)?);
        }
    }
    let mut rewards = Vec::with_capacity(ns * na);
    for s in 0..ns {
        let what = format!("reward row {s}");
        let (line, fields) = next(&what)?;
        rewards.extend(numbers::<f64>(line, &fields, na, &what)?);
    }
    if let Some((line, _)) = lines.next() {
        return Err(FormatError::Parse {
            line,
            reason: "trailing data after the reward rows".into(),
        });
    }
    Ok(FiniteMdp::new(ns, na, initial, transitions, rewards)?)
}

/// Shortest round-tripping decimal form of every entry.
pub fn format_mdp(mdp: &FiniteMdp) -> String {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let join = |xs: &[f64]| xs.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
    let mut out = String::new();
    writeln!(out, "{ns} {na}").unwrap();
    writeln!(out, "{}", join(mdp.initial())).unwrap();
    for s in 0..ns {
        for a in 0..na {
            writeln!(out, "{}", join(mdp.transition_row(s, a))).unwrap();
        }
    }
    for row in mdp.rewards().chunks(na) {
        writeln!(out, "{}", join(row)).unwrap();
    }
    out
}

pub fn write_checkpoint<W: Write>(mut w: W, theta: &ParameterVector) -> io::Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let shapes = theta.layout.shapes();
    w.write_all(&(shapes.len() as u32).to_le_bytes())?;
    for (rows, cols) in shapes {
        w.write_all(&(rows as u64).to_le_bytes())?;
        w.write_all(&(cols as u64).to_le_bytes())?;
    }
    w.write_all(&(theta.values.len() as u64).to_le_bytes())?;
    for v in &theta.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

fn read_array<const N: usize, R: Read>(r: &mut R, what: &str) -> Result<[u8; N], FormatError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => FormatError::Truncated(what.to_string()),
        _ => FormatError::Io(e),
    })?;
    Ok(buf)
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ParameterVector, FormatError> {
    if &read_array::<8, _>(&mut r, "magic")? != CHECKPOINT_MAGIC {
        return Err(FormatError::BadMagic);
    }
    let version = u32::from_le_bytes(read_array(&mut r, "version")?);
    if version != CHECKPOINT_VERSION {
        return Err(FormatError::Version(version));
    }
    let blocks = u32::from_le_bytes(read_array(&mut r, "block count")?);
    let mut shapes = Vec::with_capacity(blocks as usize);
    for _ in 0..blocks {
        let rows = u64::from_le_bytes(read_array(&mut r, "layout")?) as usize;
        let cols = u64::from_le_bytes(read_array(&mut r, "layout")?) as usize;
        shapes.push((rows, cols));
    }
    let layout = Layout::from_shapes(&shapes);
    let count = u64::from_le_bytes(read_array(&mut r, "weight count")?);
    if count != layout.len() as u64 {
        return Err(FormatError::WeightCount {
            expected: layout.len() as u64,
            found: count,
        });
    }
    let mut values = Vec::with_capacity(count as usize);
    for _ in 0..count {
        values.push(f64::from_le_bytes(read_array(&mut r, "weights")?));
    }
    Ok(ParameterVector::from_values(layout, values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rtrl_core::envs::random_finite_mdp;

    #[test]
    fn documented_example_parses() {
        let text = "2 1  # |S| |A|\n1 0\n0.5 0.5\n0 1\n1\n-1\n";
        let mdp = parse_mdp(text).unwrap();
        assert_eq!(mdp.p(1, 0, 0), 0.5);
        assert_eq!(mdp.r(1, 0), -1.0);
    }

    #[test]
    fn mdp_text_round_trips_exactly() {
        let mdp = random_finite_mdp(12, 4, 3, (-2.0, 2.0));
        assert_eq!(parse_mdp(&format_mdp(&mdp)).unwrap(), mdp);
    }

    #[test]
    fn malformed_mdp_names_the_line() {
        let err = parse_mdp("2 1\n1 0\n0.5 x\n0 1\n1\n-1\n").unwrap_err();
        assert!(matches!(err, FormatError::Parse { line: 3, .. }), "{err}");
        assert!(matches!(
            parse_mdp("2 1\n1 0\n"),
            Err(FormatError::Truncated(_))
        ));
        assert!(matches!(
            parse_mdp("1 1\n1\n0.9\n0\n"),
            Err(FormatError::Mdp(_))
        ));
    }

    #[test]
    fn checkpoint_round_trips() {
        let layout = Layout::from_shapes(&[(2, 3), (1, 3)]);
        let theta =
            ParameterVector::from_values(layout, (0..9).map(|i| i as f64 / 7.0 - 0.3).collect())
                .unwrap();
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &theta).unwrap();
        assert_eq!(bytes.len(), 8 + 4 + 4 + 2 * 16 + 8 + 9 * 8);
        assert_eq!(read_checkpoint(bytes.as_slice()).unwrap(), theta);
        assert!(matches!(
            read_checkpoint(&bytes[..40]),
            Err(FormatError::Truncated(_))
        ));
        bytes[0] = b'X';
        assert!(matches!(
            read_checkpoint(bytes.as_slice()),
            Err(FormatError::BadMagic)
        ));
    }
}
