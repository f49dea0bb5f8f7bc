use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const HEADER: [&str; 8] = [
    "episode",
    "score",
    "cumulative_reward",
    "discounted_return",
    "steps",
    "epsilon",
    "mean_loss",
    "frames_total",
];

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub episode: u64,
    /// Apples eaten.
    pub score: u32,
    /// Undiscounted sum of step rewards.
    pub cumulative_reward: f64,
    pub discounted_return: f64,
    pub steps: u64,
    /// Exploration rate when the episode ended.
    pub epsilon: f64,
    /// Mean TD loss of the updates made during the episode (0 if none).
    pub mean_loss: f64,
    pub frames_total: u64,
}

impl EpisodeMetrics {
    /// Field values in header order. Floats use Rust's shortest
    /// round-trip formatting, which never depends on locale.
    pub fn to_record(&self) -> [String; 8] {
        [
            self.episode.to_string(),
            self.score.to_string(),
            self.cumulative_reward.to_string(),
            self.discounted_return.to_string(),
            self.steps.to_string(),
            self.epsilon.to_string(),
            self.mean_loss.to_string(),
            self.frames_total.to_string(),
        ]
    }

    fn from_record(rec: &csv::StringRecord, line: usize) -> Result<Self> {
        let field = |i: usize| -> Result<&str> {
            rec.get(i).ok_or_else(|| Error::Parse {
                line,
                message: format!("missing column '{}'", HEADER[i]),
            })
        };
        fn num<T: std::str::FromStr>(s: &str, col: &str, line: usize) -> Result<T> {
            s.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad value '{s}' in column '{col}'"),
            })
        }
        if rec.len() != HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} columns, found {}", HEADER.len(), rec.len()),
            });
        }
        Ok(EpisodeMetrics {
            episode: num(field(0)?, HEADER[0], line)?,
            score: num(field(1)?, HEADER[1], line)?,
            cumulative_reward: num(field(2)?, HEADER[2], line)?,
            discounted_return: num(field(3)?, HEADER[3], line)?,
            steps: num(field(4)?, HEADER[4], line)?,
            epsilon: num(field(5)?, HEADER[5], line)?,
            mean_loss: num(field(6)?, HEADER[6], line)?,
            frames_total: num(field(7)?, HEADER[7], line)?,
        })
    }
}

/// Append-only CSV sink; every row is flushed so a crash loses nothing.
pub struct MetricsWriter {
    path: PathBuf,
    out: csv::Writer<BufWriter<File>>,
}

impl MetricsWriter {
    /// Truncate `path` and write the header.
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = MetricsWriter {
            path: path.to_owned(),
            out: csv::Writer::from_writer(BufWriter::new(file)),
        };
        w.out.write_record(HEADER).map_err(|e| w.csv_err(e))?;
        w.flush()?;
        Ok(w)
    }

    /// Continue an existing file, keeping only rows for episodes before
    /// `next_episode` (rows written after the last checkpoint are dropped).
    pub fn resume(path: &Path, next_episode: u64) -> Result<Self> {
        let kept: Vec<EpisodeMetrics> = read_metrics(path)?
            .into_iter()
            .filter(|m| m.episode < next_episode)
            .collect();
        let mut w = Self::create(path)?;
        for m in &kept {
            w.append(m)?;
        }
        Ok(w)
    }

    pub fn append(&mut self, m: &EpisodeMetrics) -> Result<()> {
        self.out
            .write_record(m.to_record())
            .map_err(|e| self.csv_err(e))?;
        self.flush()
    }

    fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }

    fn csv_err(&self, e: csv::Error) -> Error {
        Error::io(&self.path, std::io::Error::other(e))
    }
}

/// Check that `path` can be created without clobbering it.
pub fn probe_writable(path: &Path) -> Result<()> {
    let probe = path.with_extension("probe");
    OpenOptions::new()
        .write(true)
        .create(true)
        .truncate(true)
        .open(&probe)
        .and_then(|mut f| f.write_all(b""))
        .map_err(|e| Error::io(path, e))?;
    std::fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

pub fn parse_metrics(text: &str) -> Result<Vec<EpisodeMetrics>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if i == 0 {
            if rec.iter().ne(HEADER.iter().copied()) {
                return Err(Error::Parse {
                    line,
                    message: format!("expected header {}", HEADER.join(",")),
                });
            }
            continue;
        }
        rows.push(EpisodeMetrics::from_record(&rec, line)?);
    }
    Ok(rows)
}

pub fn read_metrics(path: &Path) -> Result<Vec<EpisodeMetrics>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metrics(&text)
}
