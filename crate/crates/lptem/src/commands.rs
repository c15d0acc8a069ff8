//! Library entry points behind each subcommand.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use lptem_core::segmetrics::{self, CentroidAgreement, MetricReport};
use lptem_core::tracklink::{extract_detections, link, Detection, Track};
use lptem_core::trajstats::{
    self, DiffusionFit, DisplacementAxis, DisplacementHist, MsdCurve, VacfCurve,
};
use lptem_core::{Error as CoreError, Trajectory};

use crate::config::{RunConfig, StatsSection, TrackSection};
use crate::dataset::{self, DatasetMeta};
use crate::error::{CliError, Result};
use crate::plot::{Plot, Series, Style, PALETTE};
use crate::trajcsv::{self, Units};
use crate::fsutil;

pub fn simulate(cfg: &RunConfig, out: &Path, preview_8bit: bool) -> Result<DatasetMeta> {
    cfg.validate().map_err(CliError::Usage)?;
    dataset::write_dataset(out, cfg, preview_8bit)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackOptions {
    pub section: TrackSection,
    /// nm per pixel; read from a neighbouring `meta.json` when absent.
    pub pixel_size: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrackSummary {
    pub tracks: usize,
    pub frames: usize,
    pub detections: usize,
    /// Tracks beginning after the first frame or ending before the last;
    /// each is a candidate fragmentation or identity change.
    pub late_starts: usize,
    pub early_ends: usize,
    /// Frames bridged inside tracks.
    pub gaps: usize,
    pub max_gap: usize,
    pub pixel_size_known: bool,
}

impl std::fmt::Display for TrackSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "tracks={} frames={} detections={} late_starts={} early_ends={} gaps={} max_gap={}",
            self.tracks, self.frames, self.detections, self.late_starts, self.early_ends, self.gaps, self.max_gap
        )
    }
}

pub fn track(masks: &Path, out_csv: &Path, opts: &TrackOptions) -> Result<(Vec<Track>, TrackSummary)> {
    let dir = dataset::resolve_mask_dir(masks);
    let frames = dataset::read_masks(&dir)?;
    let det_cfg = opts.section.detect_config();
    let detections: Vec<Vec<Detection>> =
        frames.par_iter().map(|(i, m)| extract_detections(m, *i, &det_cfg)).collect();
    let tracks = link(&detections, &opts.section.link_config());
    let pixel_size = opts.pixel_size.or_else(|| dataset::find_meta(&dir).map(|m| m.pixel_size_nm));
    trajcsv::write_tracks(out_csv, &tracks, pixel_size)?;
    let (first, last) = (frames[0].0, frames[frames.len() - 1].0);
    let gaps: Vec<usize> = tracks.iter().flat_map(|t| t.gaps().into_iter().map(|g| g.1)).collect();
    let summary = TrackSummary {
        tracks: tracks.len(),
        frames: frames.len(),
        detections: detections.iter().map(Vec::len).sum(),
        late_starts: tracks.iter().filter(|t| t.detections[0].frame > first).count(),
        early_ends: tracks.iter().filter(|t| t.detections[t.detections.len() - 1].frame < last).count(),
        gaps: gaps.iter().sum(),
        max_gap: gaps.iter().copied().max().unwrap_or(0),
        pixel_size_known: pixel_size.is_some(),
    };
    Ok((tracks, summary))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsOptions {
    pub section: StatsSection,
    pub pixel_size: Option<f64>,
    /// Seconds per frame; looked up in a `meta.json` beside the table, then
    /// defaults to 1 s with a warning.
    pub frame_interval: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsSummary {
    pub trajectories: usize,
    pub analysed: Vec<u32>,
    pub skipped: Vec<(u32, String)>,
    pub units: Units,
    pub frame_interval: f64,
    pub fits: Vec<(u32, DiffusionFit)>,
    pub pooled_fit: Option<DiffusionFit>,
    pub warnings: Vec<String>,
}

fn csv_bytes(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let e = |e: csv::Error| CliError::data(path, e.to_string());
    w.write_record(header).map_err(e)?;
    for r in rows {
        w.write_record(&r).map_err(e)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::data(path, e.to_string()))?;
    fsutil::write_atomic(path, &bytes)
}

fn write_msd(path: &Path, c: &MsdCurve, u: &str) -> Result<()> {
    let header = ["tau_s".to_string(), format!("msd_{u}2"), "n_pairs".into()];
    csv_bytes(path, &header, c.points.iter().map(|p| vec![p.tau.to_string(), p.msd.to_string(), p.n_pairs.to_string()]))
}

fn write_vacf(path: &Path, c: &VacfCurve) -> Result<()> {
    let header = ["tau_s".to_string(), "vacf".into(), "n_pairs".into()];
    csv_bytes(path, &header, c.points.iter().map(|p| vec![p.tau.to_string(), p.c.to_string(), p.n_pairs.to_string()]))
}

fn write_hist(path: &Path, h: &DisplacementHist, reference: Option<&[f64]>, u: &str) -> Result<()> {
    let header = [
        format!("bin_left_{u}"),
        format!("bin_right_{u}"),
        format!("density_per_{u}"),
        format!("gaussian_per_{u}"),
    ];
    let rows = h.bin_edges.windows(2).enumerate().map(|(i, e)| {
        vec![
            e[0].to_string(),
            e[1].to_string(),
            h.density[i].to_string(),
            reference.map(|r| r[i].to_string()).unwrap_or_default(),
        ]
    });
    csv_bytes(path, &header, rows)
}

fn gaussian_on(h: &DisplacementHist, fit: Option<&DiffusionFit>) -> Option<Vec<f64>> {
    if h.axis == DisplacementAxis::Radial {
        return None;
    }
    let f = fit?;
    trajstats::gaussian_reference(f.diffusion_coefficient, h.tau).ok().map(|g| g.on_bins(&h.bin_edges))
}

fn insufficient(e: &CoreError) -> bool {
    matches!(e, CoreError::InsufficientData(_) | CoreError::Fit(_))
}

pub fn stats(table: &Path, out_dir: &Path, opts: &StatsOptions) -> Result<StatsSummary> {
    let st = &opts.section;
    let mut warnings = Vec::new();
    let dt = match opts.frame_interval {
        Some(dt) => dt,
        None => match table.parent().and_then(|d| dataset::find_meta(if d.as_os_str().is_empty() { Path::new(".") } else { d })) {
            Some(m) => m.frame_interval_s,
            None => {
                warnings.push("frame interval unknown; using 1 s (lag times are in frames)".to_string());
                1.0
            }
        },
    };
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CliError::Usage(format!("frame interval must be > 0, got {dt}")));
    }
    let (trajs, units) = trajcsv::read_physical(table, dt, opts.pixel_size)?;
    if units == Units::Px {
        warnings.push("no nm columns and no pixel size; statistics are in pixels".to_string());
    }
    let u = units.suffix();
    fsutil::create_dir_all(out_dir)?;

    let mut analysed: Vec<&Trajectory> = Vec::new();
    let mut skipped = Vec::new();
    let mut fits = Vec::new();
    let mut curves = Vec::new();
    for t in &trajs {
        let curve = match trajstats::msd(t, st.max_lag_fraction) {
            Ok(c) if !c.points.is_empty() => c,
            Ok(_) => {
                skipped.push((t.id, "no displacement pairs".to_string()));
                continue;
            }
            Err(e) if insufficient(&e) => {
                skipped.push((t.id, e.to_string()));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        write_msd(&out_dir.join(format!("msd_id{}.csv", t.id)), &curve, u)?;
        match trajstats::vacf(t, st.max_lag_fraction) {
            Ok(v) => write_vacf(&out_dir.join(format!("vacf_id{}.csv", t.id)), &v)?,
            Err(e) if insufficient(&e) => warnings.push(format!("id {}: no VACF ({e})", t.id)),
            Err(e) => return Err(e.into()),
        }
        let fit = match trajstats::fit_diffusion(&curve, st.fit_lags.min(curve.points.len())) {
            Ok(f) => {
                fits.push((t.id, f));
                Some(f)
            }
            Err(e) if insufficient(&e) => {
                warnings.push(format!("id {}: no diffusion fit ({e})", t.id));
                None
            }
            Err(e) => return Err(e.into()),
        };
        match trajstats::displacement_pdf(t, st.hist_lag_frames, st.n_bins, st.axis) {
            Ok(h) => {
                let g = gaussian_on(&h, fit.as_ref());
                write_hist(&out_dir.join(format!("disp_hist_id{}.csv", t.id)), &h, g.as_deref(), u)?
            }
            Err(e) if insufficient(&e) => warnings.push(format!("id {}: no displacement histogram ({e})", t.id)),
            Err(e) => return Err(e.into()),
        }
        analysed.push(t);
        curves.push((t.id, curve));
    }
    for (id, why) in &skipped {
        warnings.push(format!("id {id}: skipped ({why})"));
    }

    let pooled: Vec<Trajectory> = analysed.iter().map(|t| (*t).clone()).collect();
    let mut pooled_fit = None;
    let mut pooled_msd = None;
    let mut pooled_vacf = None;
    let mut pooled_hist = None;
    if !pooled.is_empty() {
        let m = trajstats::ensemble_msd(&pooled, st.max_lag_fraction)?;
        write_msd(&out_dir.join("msd.csv"), &m, u)?;
        pooled_fit = trajstats::fit_diffusion(&m, st.fit_lags.min(m.points.len())).ok();
        if let Ok(v) = trajstats::ensemble_vacf(&pooled, st.max_lag_fraction) {
            write_vacf(&out_dir.join("vacf.csv"), &v)?;
            pooled_vacf = Some(v);
        }
        let values: Vec<f64> =
            pooled.iter().flat_map(|t| trajstats::displacements(t, st.hist_lag_frames, st.axis)).collect();
        if let Ok(h) = trajstats::displacement_pdf_from(&values, st.hist_lag_frames as f64 * dt, st.n_bins, st.axis) {
            let g = gaussian_on(&h, pooled_fit.as_ref());
            write_hist(&out_dir.join("disp_hist.csv"), &h, g.as_deref(), u)?;
            pooled_hist = Some((h, g));
        }
        pooled_msd = Some(m);
    }

    let fit_row = |id: String, n: usize, f: Option<&DiffusionFit>| {
        vec![
            id,
            n.to_string(),
            f.map(|f| f.diffusion_coefficient.to_string()).unwrap_or_default(),
            f.map(|f| f.alpha.to_string()).unwrap_or_default(),
            f.map(|f| f.n_points.to_string()).unwrap_or_default(),
        ]
    };
    let mut rows: Vec<Vec<String>> = analysed
        .iter()
        .map(|t| fit_row(t.id.to_string(), t.len(), fits.iter().find(|f| f.0 == t.id).map(|f| &f.1)))
        .collect();
    if !pooled.is_empty() {
        rows.push(fit_row("pooled".into(), pooled.iter().map(Trajectory::len).sum(), pooled_fit.as_ref()));
    }
    let header = ["id".to_string(), "n_samples".into(), format!("d_{u}2_s"), "alpha".into(), "fit_points".into()];
    csv_bytes(&out_dir.join("fits.csv"), &header, rows.into_iter())?;

    write_plots(out_dir, u, &trajs, &curves, pooled_msd.as_ref(), pooled_fit.as_ref(), pooled_vacf.as_ref(), pooled_hist.as_ref())?;

    Ok(StatsSummary {
        trajectories: trajs.len(),
        analysed: analysed.iter().map(|t| t.id).collect(),
        skipped,
        units,
        frame_interval: dt,
        fits,
        pooled_fit,
        warnings,
    })
}

#[allow(clippy::too_many_arguments)]
fn write_plots(
    out: &Path,
    u: &str,
    trajs: &[Trajectory],
    curves: &[(u32, MsdCurve)],
    pooled: Option<&MsdCurve>,
    fit: Option<&DiffusionFit>,
    vacf: Option<&VacfCurve>,
    hist: Option<&(DisplacementHist, Option<Vec<f64>>)>,
) -> Result<()> {
    let color = |i: usize| PALETTE[i % PALETTE.len()];
    let mut msd_plot = Plot {
        title: "Mean squared displacement".into(),
        x_label: "lag time τ (s)".into(),
        y_label: format!("MSD ({u}²)"),
        log_x: true,
        log_y: true,
        series: Vec::new(),
    };
    for (i, (id, c)) in curves.iter().enumerate() {
        let pts = c.points.iter().map(|p| (p.tau, p.msd)).collect();
        msd_plot.series.push(Series::new(format!("id {id}"), color(i), Style::Markers, pts));
    }
    if let Some(m) = pooled {
        if curves.len() > 1 {
            let pts = m.points.iter().map(|p| (p.tau, p.msd)).collect();
            msd_plot.series.push(Series::new("pooled", "#000000", Style::Line, pts));
        }
        if let Some(f) = fit {
            let pts = m.points.iter().map(|p| (p.tau, 4.0 * f.diffusion_coefficient * p.tau)).collect();
            let label = format!("4Dτ, D = {}", crate::plot::fmt_num(f.diffusion_coefficient));
            msd_plot.series.push(Series::new(label, "#555555", Style::Dashed, pts));
        }
    }
    fsutil::write_atomic(&out.join("msd.svg"), msd_plot.to_svg().as_bytes())?;

    if let Some(v) = vacf {
        let plot = Plot {
            title: "Velocity autocorrelation".into(),
            x_label: "lag time τ (s)".into(),
            y_label: "normalized VACF c(τ)".into(),
            series: vec![Series::new("pooled", PALETTE[0], Style::Line, v.points.iter().map(|p| (p.tau, p.c)).collect())],
            ..Plot::default()
        };
        fsutil::write_atomic(&out.join("vacf.svg"), plot.to_svg().as_bytes())?;
    }

    if let Some((h, g)) = hist {
        let axis = match h.axis {
            DisplacementAxis::X => "Δx",
            DisplacementAxis::Y => "Δy",
            DisplacementAxis::Radial => "|Δr|",
            DisplacementAxis::BothAxesPooled => "Δx, Δy",
        };
        let mut series = vec![Series::bars("measured", PALETTE[0], &h.bin_edges, &h.density)];
        if let Some(g) = g {
            series.push(Series::new("Gaussian, fitted D", PALETTE[1], Style::Dashed, h.bin_centers().into_iter().zip(g.iter().copied()).collect()));
        }
        let plot = Plot {
            title: format!("Displacement distribution, τ = {} s", crate::plot::fmt_num(h.tau)),
            x_label: format!("displacement {axis} ({u})"),
            y_label: format!("probability density (1/{u})"),
            series,
            ..Plot::default()
        };
        fsutil::write_atomic(&out.join("disp_hist.svg"), plot.to_svg().as_bytes())?;
    }

    let plot = Plot {
        title: "Trajectories".into(),
        x_label: format!("x ({u})"),
        y_label: format!("y ({u})"),
        series: trajs
            .iter()
            .enumerate()
            .map(|(i, t)| Series::new(format!("id {}", t.id), color(i), Style::Line, t.samples.iter().map(|s| (s.x, s.y)).collect()))
            .collect(),
        ..Plot::default()
    };
    fsutil::write_atomic(&out.join("trajectories.svg"), plot.to_svg().as_bytes())
}

#[derive(Debug, Clone, Serialize)]
pub struct Conventions {
    pub boundary: &'static str,
    pub tolerance: &'static str,
    pub both_empty: &'static str,
    pub one_empty: &'static str,
    pub object_matching: &'static str,
    pub video_mean: &'static str,
    pub frame_indexing: &'static str,
}

pub const CONVENTIONS: Conventions = Conventions {
    boundary: "foreground pixels with a 4-neighbour outside the mask; the image border counts as outside",
    tolerance: "Euclidean pixel distance, inclusive",
    both_empty: "object absent from prediction and truth: frame excluded for that object",
    one_empty: "object present on one side only: J = 0, F = 0",
    object_matching: "each ground-truth id, ascending, takes the unused predicted id of maximum IoU on the first frame where both occur",
    video_mean: "video_mean_* average all scored (frame, object) records; mean_of_object_means averages per-object means",
    frame_indexing: "per_frame.frame counts from 0 at the first mask file",
};

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub pred: PathBuf,
    pub gt: PathBuf,
    pub frames: usize,
    pub first_frame: usize,
    pub width: usize,
    pub height: usize,
    pub tolerance_px: f64,
    pub tolerance_is_default: bool,
    pub conventions: Conventions,
    pub correspondence: Vec<(u16, Option<u16>)>,
    #[serde(flatten)]
    pub metrics: MetricReport,
}

pub fn eval(pred: &Path, gt: &Path, tolerance: Option<f64>, out: &Path) -> Result<EvalReport> {
    let pd = dataset::resolve_mask_dir(pred);
    let gd = dataset::resolve_mask_dir(gt);
    let p = dataset::read_masks(&pd)?;
    let g = dataset::read_masks(&gd)?;
    if p.len() != g.len() || p[0].0 != g[0].0 {
        return Err(CliError::Mismatch(format!(
            "prediction {} has frames {}..={}, ground truth {} has {}..={}",
            pd.display(),
            p[0].0,
            p[p.len() - 1].0,
            gd.display(),
            g[0].0,
            g[g.len() - 1].0
        )));
    }
    let (w, h) = (g[0].1.width, g[0].1.height);
    let tol = tolerance.unwrap_or_else(|| segmetrics::default_tolerance(w, h));
    let pm: Vec<_> = p.into_iter().map(|x| x.1).collect();
    let first = g[0].0;
    let gm: Vec<_> = g.into_iter().map(|x| x.1).collect();
    let correspondence = segmetrics::match_objects(&pm, &gm);
    let metrics = segmetrics::jf_video(&pm, &gm, tol, Some(&correspondence)).map_err(|e| match e {
        CoreError::InputMismatch(m) => CliError::Mismatch(m),
        e => e.into(),
    })?;
    let report = EvalReport {
        format_version: dataset::FORMAT_VERSION,
        pred: pd,
        gt: gd,
        frames: gm.len(),
        first_frame: first,
        width: w,
        height: h,
        tolerance_px: tol,
        tolerance_is_default: tolerance.is_none(),
        conventions: CONVENTIONS,
        correspondence,
        metrics,
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    fsutil::write_atomic(out, text.as_bytes())?;
    Ok(report)
}

pub fn centroid_agree(pred: &Path, reference: &Path, pixel_size: f64, out: &Path) -> Result<CentroidAgreement> {
    if !(pixel_size > 0.0 && pixel_size.is_finite()) {
        return Err(CliError::Usage(format!("pixel size must be > 0, got {pixel_size}")));
    }
    let p = trajcsv::read_pixels(pred, pixel_size)?;
    let r = trajcsv::read_pixels(reference, pixel_size)?;
    let agreement = segmetrics::centroid_agreement(&p, &r, pixel_size).map_err(|e| match e {
        CoreError::InputMismatch(m) => CliError::Mismatch(m),
        e => e.into(),
    })?;
    let header = ["frame", "ref_id", "pred_id", "distance_nm"].map(String::from);
    let rows = agreement
        .distances
        .iter()
        .map(|d| vec![d.frame.to_string(), d.ref_id.to_string(), d.pred_id.to_string(), d.distance.to_string()]);
    csv_bytes(out, &header, rows)?;
    Ok(agreement)
}
