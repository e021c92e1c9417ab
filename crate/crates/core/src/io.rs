//! JSON file formats: system specs, trajectories and strict schema parsing.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{DistanceMatrix, FiniteMetricSystem, FiniteTrajectory};

/// Parses `text` as `T`, reporting failures with a JSON pointer to the
/// offending location.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let pointer = json_pointer(err.path());
        Error::Schema { pointer, message: err.into_inner().to_string() }
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    parse_json(&text)
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSpec {
    Matrix(Vec<Vec<f64>>),
    CircleGrid(usize),
    LineGrid(usize),
}

/// On-disk system description:
/// `{"points": [labels], "metric": {...}, "map": [indices]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    #[serde(default)]
    pub points: Vec<String>,
    pub metric: MetricSpec,
    pub map: Vec<usize>,
}

impl SystemFile {
    pub fn into_system(self) -> Result<FiniteMetricSystem> {
        let raw = match self.metric {
            MetricSpec::Matrix(rows) => DistanceMatrix::from_rows(&rows)?,
            MetricSpec::CircleGrid(n) => DistanceMatrix::circle_grid(n),
            MetricSpec::LineGrid(n) => DistanceMatrix::line_grid(n),
        };
        FiniteMetricSystem::new(self.points, raw, self.map)
    }

    pub fn from_system(sys: &FiniteMetricSystem) -> Self {
        SystemFile {
            points: sys.labels().to_vec(),
            metric: MetricSpec::Matrix(sys.metric().to_rows()),
            map: sys.map().to_vec(),
        }
    }
}

pub fn load_system(path: &Path) -> Result<FiniteMetricSystem> {
    read_json::<SystemFile>(path)?.into_system()
}

pub fn parse_system(text: &str) -> Result<FiniteMetricSystem> {
    parse_json::<SystemFile>(text)?.into_system()
}

/// Trajectory file: either a bare array (origin 0) or
/// `{"origin": k, "entries": [...]}`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum TrajectoryFile {
    Bare(Vec<usize>),
    Full { origin: i64, entries: Vec<usize> },
}

pub fn parse_trajectory(text: &str) -> Result<FiniteTrajectory> {
    match parse_json::<TrajectoryFile>(text)? {
        TrajectoryFile::Bare(entries) => FiniteTrajectory::from_zero(entries),
        TrajectoryFile::Full { origin, entries } => FiniteTrajectory::new(origin, entries),
    }
}

pub fn load_trajectory(path: &Path) -> Result<FiniteTrajectory> {
    parse_trajectory(&std::fs::read_to_string(path)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::invalid(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
