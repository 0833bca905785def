//! SVG figures, each written next to the data table it was drawn from.

use std::path::Path;

use anyhow::{anyhow, Result};
use plotters::prelude::*;
use serde::Serialize;
use snakebench::game::{EpisodeRecord, Phase};
use snakebench::policy::Player;

use crate::tables::{write_records, Trace};

type DrawResult<T> = Result<T, Box<dyn std::error::Error>>;

fn wrap<T>(r: DrawResult<T>) -> Result<T> {
    r.map_err(|e| anyhow!("drawing failed: {e}"))
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-6);
    (lo - pad, hi + pad)
}

/// Blue (low) to red (high) through grey.
fn ramp(t: f64) -> RGBColor {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64, s: f64| (a + (b - a) * s).round() as u8;
    if t < 0.5 {
        let s = t * 2.0;
        RGBColor(lerp(40.0, 170.0, s), lerp(80.0, 170.0, s), lerp(220.0, 170.0, s))
    } else {
        let s = (t - 0.5) * 2.0;
        RGBColor(lerp(170.0, 220.0, s), lerp(170.0, 40.0, s), lerp(170.0, 40.0, s))
    }
}

fn circle(cx: f64, cy: f64, r: f64) -> Vec<(f64, f64)> {
    (0..32)
        .map(|k| {
            let a = k as f64 / 32.0 * std::f64::consts::TAU;
            (cx + r * a.cos(), cy + r * a.sin())
        })
        .collect()
}

#[derive(Serialize)]
struct PathRow {
    t: f64,
    head_x: f64,
    head_y: f64,
    reward: f64,
    triggered: bool,
}

/// Head path over the maze, each segment coloured by its step reward. The
/// colour scale spans the 5th to 95th percentile so single spikes do not
/// wash out the rest.
pub fn path(trace: &Trace, svg: &Path, table: &Path) -> Result<()> {
    let rows: Vec<PathRow> = trace
        .steps
        .iter()
        .map(|s| PathRow {
            t: s.t,
            head_x: s.head.x,
            head_y: s.head.y,
            reward: s.reward,
            triggered: s.triggered,
        })
        .collect();
    write_records(table, &rows)?;

    let sc = &trace.scenario;
    let xs = rows.iter().map(|r| r.head_x).chain([sc.spawn.position.x, sc.goal.x]);
    let ys = rows.iter().map(|r| r.head_y).chain([sc.spawn.position.y, sc.goal.y]);
    let ((x0, x1), (y0, y1)) = (span(xs), span(ys));
    let half = 0.5 * (x1 - x0).max(y1 - y0);
    let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let mut sorted: Vec<f64> = rows.iter().map(|r| r.reward).collect();
    sorted.sort_by(f64::total_cmp);
    let pick = |q: f64| sorted.get(((sorted.len().max(1) - 1) as f64 * q) as usize).copied().unwrap_or(0.0);
    let (lo, hi) = (pick(0.05), pick(0.95));
    let scale = |r: f64| if hi > lo { (r - lo) / (hi - lo) } else { 0.5 };

    let caption = format!(
        "Head path coloured by step reward ({:?} at {:.1} s)",
        trace.episode.status, trace.episode.task_time
    );
    wrap((|| -> DrawResult<()> {
        let root = SVGBackend::new(svg, (700, 700)).into_drawing_area();
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(&caption, ("sans-serif", 18))
            .margin(12)
            .x_label_area_size(36)
            .y_label_area_size(48)
            .build_cartesian_2d(cx - half..cx + half, cy - half..cy + half)?;
        chart.configure_mesh().x_desc("x (m)").y_desc("y (m)").draw()?;
        chart.draw_series(sc.obstacles.iter().map(|o| Polygon::new(circle(o.center.x, o.center.y, o.radius), BLACK.mix(0.7).filled())))?;
        chart.draw_series(std::iter::once(Polygon::new(
            circle(sc.goal.x, sc.goal.y, sc.accept_radius),
            GREEN.mix(0.25).filled(),
        )))?;
        chart.draw_series(rows.windows(2).map(|w| {
            PathElement::new(
                vec![(w[0].head_x, w[0].head_y), (w[1].head_x, w[1].head_y)],
                ramp(scale(w[1].reward)).stroke_width(2),
            )
        }))?;
        root.present()?;
        Ok(())
    })())
}

#[derive(Serialize)]
struct CurveRow {
    index: usize,
    iteration: usize,
    phase: Phase,
    learner: Option<Player>,
    reward: f64,
    moving_average: f64,
}

/// Episode reward against episode index, coloured by who was learning,
/// with a trailing moving average.
pub fn curve(episodes: &[EpisodeRecord], window: usize, svg: &Path, table: &Path) -> Result<()> {
    let window = window.max(1);
    let rows: Vec<CurveRow> = episodes
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let from = (i + 1).saturating_sub(window);
            let slice = &episodes[from..=i];
            CurveRow {
                index: i,
                iteration: e.iteration,
                phase: e.phase,
                learner: e.learner,
                reward: e.reward,
                moving_average: slice.iter().map(|e| e.reward).sum::<f64>() / slice.len() as f64,
            }
        })
        .collect();
    write_records(table, &rows)?;

    let (y0, y1) = span(rows.iter().map(|r| r.reward));
    let n = rows.len().max(2) as f64;
    wrap((|| -> DrawResult<()> {
        let root = SVGBackend::new(svg, (900, 500)).into_drawing_area();
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .caption("Episode reward during training", ("sans-serif", 18))
            .margin(12)
            .x_label_area_size(36)
            .y_label_area_size(64)
            .build_cartesian_2d(0.0..n, y0..y1)?;
        chart.configure_mesh().x_desc("episode").y_desc("reward").draw()?;
        let groups: [(&str, RGBColor, fn(&CurveRow) -> bool); 3] = [
            ("evaluation", RGBColor(120, 120, 120), |r| r.phase == Phase::Evaluation),
            ("regulator learns", RGBColor(200, 60, 40), |r| r.learner == Some(Player::Regulator) && r.phase == Phase::Learning),
            ("controller learns", RGBColor(40, 90, 200), |r| r.learner == Some(Player::Controller) && r.phase == Phase::Learning),
        ];
        for (label, color, pick) in groups {
            chart
                .draw_series(rows.iter().filter(|r| pick(r)).map(|r| Circle::new((r.index as f64, r.reward), 2, color.mix(0.6).filled())))?
                .label(label)
                .legend(move |(x, y)| Circle::new((x + 8, y), 4, color.filled()));
        }
        chart
            .draw_series(LineSeries::new(rows.iter().map(|r| (r.index as f64, r.moving_average)), BLACK.stroke_width(2)))?
            .label("moving average")
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], BLACK.stroke_width(2)));
        chart.configure_series_labels().border_style(BLACK).background_style(WHITE.mix(0.8)).draw()?;
        root.present()?;
        Ok(())
    })())
}

#[derive(Serialize)]
struct EventRow {
    t: f64,
    tonic_delta: f64,
    inv_sqrt_kf: f64,
    kappa_1: f64,
    f_1: f64,
    triggered: bool,
}

/// Stacked time series of the first link's tonic imbalance, the option's
/// frequency factor, the first curvature and the first contact force, with
/// steps where the regulator acted shaded.
pub fn events(trace: &Trace, svg: &Path, table: &Path) -> Result<()> {
    let rows: Vec<EventRow> = trace
        .steps
        .iter()
        .map(|s| EventRow {
            t: s.t,
            tonic_delta: s.tonic_delta.first().copied().unwrap_or(0.0),
            inv_sqrt_kf: if s.k_f > 0.0 { 1.0 / s.k_f.sqrt() } else { 0.0 },
            kappa_1: s.kappa.first().copied().unwrap_or(0.0),
            f_1: s.f.first().copied().unwrap_or(0.0),
            triggered: s.triggered,
        })
        .collect();
    write_records(table, &rows)?;

    let t1 = rows.last().map_or(1.0, |r| r.t).max(1e-3);
    let panels: [(&str, fn(&EventRow) -> f64); 4] = [
        ("u_e - u_f", |r| r.tonic_delta),
        ("K_f^-1/2", |r| r.inv_sqrt_kf),
        ("kappa_1 (1/m)", |r| r.kappa_1),
        ("f_1 (N)", |r| r.f_1),
    ];
    wrap((|| -> DrawResult<()> {
        let root = SVGBackend::new(svg, (900, 800)).into_drawing_area();
        root.fill(&WHITE)?;
        for (area, (name, get)) in root.split_evenly((4, 1)).iter().zip(panels) {
            let (y0, y1) = span(rows.iter().map(get));
            let mut chart = ChartBuilder::on(area)
                .margin(8)
                .x_label_area_size(28)
                .y_label_area_size(64)
                .build_cartesian_2d(0.0..t1, y0..y1)?;
            chart.configure_mesh().y_desc(name).x_desc("t (s)").draw()?;
            chart.draw_series(rows.windows(2).filter(|w| w[1].triggered).map(|w| {
                Rectangle::new([(w[0].t, y0), (w[1].t, y1)], RGBColor(250, 200, 120).mix(0.5).filled())
            }))?;
            chart.draw_series(LineSeries::new(rows.iter().map(|r| (r.t, get(r))), BLUE.stroke_width(1)))?;
        }
        root.present()?;
        Ok(())
    })())
}
