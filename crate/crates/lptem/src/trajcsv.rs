//! Trajectory tables.
//!
//! Ground truth: `frame,id,x_nm,y_nm,theta_rad`.
//! Tracker output: `frame,id,x_px,y_px[,x_nm,y_nm],theta_rad,area_px`.
//!
//! Rows are sorted by frame, then id. Readers locate columns by header name,
//! so either layout (or any superset) can be read back.

use std::collections::BTreeMap;
use std::path::Path;

use lptem_core::tracklink::Track;
use lptem_core::{Sample, Trajectory};

use crate::error::{CliError, Result};
use crate::fsutil;

/// Length unit of coordinates loaded from a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Units {
    Nm,
    Px,
}

impl Units {
    pub fn suffix(self) -> &'static str {
        match self {
            Units::Nm => "nm",
            Units::Px => "px",
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|t| t.to_string()).unwrap_or_default()
}

fn finish(path: &Path, w: csv::Writer<Vec<u8>>) -> Result<()> {
    let bytes = w.into_inner().map_err(|e| CliError::data(path, e.to_string()))?;
    fsutil::write_atomic(path, &bytes)
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::data(path, e.to_string())
}

pub fn write_ground_truth(path: &Path, trajs: &[Trajectory]) -> Result<()> {
    let mut rows: Vec<(usize, u32, &Sample)> =
        trajs.iter().flat_map(|t| t.samples.iter().map(move |s| (s.frame, t.id, s))).collect();
    rows.sort_by_key(|r| (r.0, r.1));
    let mut w = csv::Writer::from_writer(Vec::new());
    let e = csv_err(path);
    w.write_record(["frame", "id", "x_nm", "y_nm", "theta_rad"]).map_err(&e)?;
    for (frame, id, s) in rows {
        w.write_record([frame.to_string(), id.to_string(), s.x.to_string(), s.y.to_string(), opt(s.theta)])
            .map_err(&e)?;
    }
    finish(path, w)
}

pub fn write_tracks(path: &Path, tracks: &[Track], pixel_size: Option<f64>) -> Result<()> {
    let mut rows: Vec<_> =
        tracks.iter().flat_map(|t| t.detections.iter().map(move |d| (d.frame, t.id, d))).collect();
    rows.sort_by_key(|r| (r.0, r.1));
    let mut w = csv::Writer::from_writer(Vec::new());
    let e = csv_err(path);
    let mut header = vec!["frame", "id", "x_px", "y_px"];
    if pixel_size.is_some() {
        header.extend(["x_nm", "y_nm"]);
    }
    header.extend(["theta_rad", "area_px"]);
    w.write_record(&header).map_err(&e)?;
    for (frame, id, d) in rows {
        let mut rec = vec![frame.to_string(), id.to_string(), d.x.to_string(), d.y.to_string()];
        if let Some(ps) = pixel_size {
            rec.push((d.x * ps).to_string());
            rec.push((d.y * ps).to_string());
        }
        rec.push(d.theta.to_string());
        rec.push(d.area.to_string());
        w.write_record(&rec).map_err(&e)?;
    }
    finish(path, w)
}

/// Raw rows of a trajectory table with the coordinate columns it offers.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub rows: Vec<Row>,
    pub has_nm: bool,
    pub has_px: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Row {
    pub frame: usize,
    pub id: u32,
    pub nm: Option<(f64, f64)>,
    pub px: Option<(f64, f64)>,
    pub theta: Option<f64>,
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = fsutil::read_to_string(path)?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = r.headers().map_err(csv_err(path))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(c_frame), Some(c_id)) = (col("frame"), col("id")) else {
        return Err(CliError::data(path, "header must contain `frame` and `id` columns"));
    };
    let nm_cols = col("x_nm").zip(col("y_nm"));
    let px_cols = col("x_px").zip(col("y_px"));
    if nm_cols.is_none() && px_cols.is_none() {
        return Err(CliError::data(path, "header needs x_nm,y_nm or x_px,y_px columns"));
    }
    let c_theta = col("theta_rad");
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let line = i + 2;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let num = |c: usize| -> Result<f64> {
            field(c)
                .parse::<f64>()
                .map_err(|_| CliError::data(path, format!("line {line}: bad number {:?}", field(c))))
        };
        let int = |c: usize| -> Result<u64> {
            field(c)
                .parse::<u64>()
                .map_err(|_| CliError::data(path, format!("line {line}: bad integer {:?}", field(c))))
        };
        let pair = |cols: Option<(usize, usize)>| -> Result<Option<(f64, f64)>> {
            cols.map(|(a, b)| Ok((num(a)?, num(b)?))).transpose()
        };
        let theta = match c_theta {
            Some(c) if !field(c).is_empty() => Some(num(c)?),
            _ => None,
        };
        rows.push(Row {
            frame: int(c_frame)? as usize,
            id: u32::try_from(int(c_id)?).map_err(|_| CliError::data(path, format!("line {line}: id too large")))?,
            nm: pair(nm_cols)?,
            px: pair(px_cols)?,
            theta,
        });
    }
    Ok(Table { rows, has_nm: nm_cols.is_some(), has_px: px_cols.is_some() })
}

fn group(path: &Path, rows: impl Iterator<Item = (u32, Sample)>, dt: f64) -> Result<Vec<Trajectory>> {
    let mut by_id: BTreeMap<u32, Vec<Sample>> = BTreeMap::new();
    for (id, s) in rows {
        by_id.entry(id).or_default().push(s);
    }
    by_id
        .into_iter()
        .map(|(id, mut samples)| {
            samples.sort_by_key(|s| s.frame);
            Trajectory::new(id, samples, dt).map_err(|e| CliError::data(path, e.to_string()))
        })
        .collect()
}

/// Loads trajectories in physical units where possible: nm columns are used
/// directly, px columns are scaled by `pixel_size` when given and left in px
/// otherwise.
pub fn read_physical(path: &Path, frame_interval: f64, pixel_size: Option<f64>) -> Result<(Vec<Trajectory>, Units)> {
    let t = read_table(path)?;
    let (units, scale, use_nm) = match (t.has_nm, pixel_size) {
        (true, _) => (Units::Nm, 1.0, true),
        (false, Some(ps)) => (Units::Nm, ps, false),
        (false, None) => (Units::Px, 1.0, false),
    };
    let rows = t.rows.iter().map(|r| {
        let (x, y) = if use_nm { r.nm.unwrap() } else { r.px.unwrap() };
        (r.id, Sample { frame: r.frame, x: x * scale, y: y * scale, theta: r.theta })
    });
    Ok((group(path, rows, frame_interval)?, units))
}

/// Loads trajectories in pixels: px columns when present, otherwise nm
/// columns divided by `pixel_size`.
pub fn read_pixels(path: &Path, pixel_size: f64) -> Result<Vec<Trajectory>> {
    let t = read_table(path)?;
    let rows = t.rows.iter().map(|r| {
        let (x, y) = match r.px {
            Some(p) => p,
            None => {
                let (x, y) = r.nm.unwrap();
                (x / pixel_size, y / pixel_size)
            }
        };
        (r.id, Sample { frame: r.frame, x, y, theta: r.theta })
    });
    group(path, rows, 1.0)
}
