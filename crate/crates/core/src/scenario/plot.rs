//! Static SVG plots: agent trajectories (plan view for planar logs, fixed
//! isometric projection otherwise) and one error-vs-time plot per axis.
//!
//! Followers are blue, leaders red, joining agents green.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::csv::{read_errors, read_trajectory, CsvError, ErrorRow, TrajectoryRow};
use super::Obstacle;
use crate::geometry::Vec3;
use crate::sim::LogRole;

pub const FOLLOWER_COLOR: &str = "#1f5fbf";
pub const LEADER_COLOR: &str = "#d62728";
pub const JOINER_COLOR: &str = "#2ca02c";

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 60.0;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("{0} log is empty")]
    Empty(&'static str),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error("{path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    Plan,
    Isometric,
}

impl Projection {
    fn apply(self, p: &Vec3) -> (f64, f64) {
        match self {
            Projection::Plan => (p.x, p.y),
            Projection::Isometric => {
                let (c, s) = (30f64.to_radians().cos(), 30f64.to_radians().sin());
                ((p.x - p.y) * c, (p.x + p.y) * s + p.z)
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PlotOptions {
    pub title: String,
    /// Formation outlines are drawn at the logged samples nearest these times.
    /// Empty means five evenly spaced snapshots.
    pub snapshots: Vec<f64>,
    pub obstacles: Vec<Obstacle>,
    /// Chosen from the data when `None`: plan view iff every z is zero.
    pub projection: Option<Projection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Follower,
    Leader,
    Joiner,
}

impl Kind {
    fn color(self) -> &'static str {
        match self {
            Kind::Follower => FOLLOWER_COLOR,
            Kind::Leader => LEADER_COLOR,
            Kind::Joiner => JOINER_COLOR,
        }
    }
}

/// Maps data coordinates into the drawing area, y up.
struct Frame {
    x0: f64,
    y0: f64,
    sx: f64,
    sy: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>, equal: bool) -> Self {
        let (mut xmin, mut xmax, mut ymin, mut ymax) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in points {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
        let pad = |lo: f64, hi: f64| {
            let span = (hi - lo).max(1e-12);
            (lo - 0.05 * span, hi + 0.05 * span)
        };
        let (xmin, xmax) = pad(xmin, xmax);
        let (ymin, ymax) = pad(ymin, ymax);
        let (w, h) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
        let (mut sx, mut sy) = (w / (xmax - xmin), h / (ymax - ymin));
        let (mut x0, mut y0) = (xmin, ymin);
        if equal {
            let s = sx.min(sy);
            x0 -= (w / s - (xmax - xmin)) / 2.0;
            y0 -= (h / s - (ymax - ymin)) / 2.0;
            sx = s;
            sy = s;
        }
        Self { x0, y0, sx, sy }
    }

    fn map(&self, (x, y): (f64, f64)) -> (f64, f64) {
        (MARGIN + (x - self.x0) * self.sx, HEIGHT - MARGIN - (y - self.y0) * self.sy)
    }
}

fn points_attr(frame: &Frame, pts: impl Iterator<Item = (f64, f64)>) -> String {
    let mut s = String::new();
    for p in pts {
        let (x, y) = frame.map(p);
        if !s.is_empty() {
            s.push(' ');
        }
        let _ = write!(s, "{x:.2},{y:.2}");
    }
    s
}

fn header(title: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"30\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn obstacle_outline(o: &Obstacle, proj: Projection) -> Vec<(f64, f64)> {
    let corners: Vec<Vec3> = match o {
        Obstacle::Box { min, max } => {
            let mut c = Vec::new();
            for &x in &[min[0], max[0]] {
                for &y in &[min[1], max[1]] {
                    for &z in &[min[2], max[2]] {
                        c.push(Vec3::new(x, y, z));
                    }
                }
            }
            c
        }
        Obstacle::Polygon { points, z } => {
            let [z0, z1] = z.unwrap_or([0.0, 0.0]);
            if proj == Projection::Plan {
                return points.iter().map(|p| (p[0], p[1])).collect();
            }
            points.iter().flat_map(|p| [Vec3::new(p[0], p[1], z0), Vec3::new(p[0], p[1], z1)]).collect()
        }
    };
    convex_hull(corners.iter().map(|c| proj.apply(c)).collect())
}

/// Renders the trajectory plot from parsed trajectory rows.
pub fn trajectory_svg(rows: &[TrajectoryRow], opts: &PlotOptions) -> Result<String, PlotError> {
    if rows.is_empty() {
        return Err(PlotError::Empty("trajectory"));
    }
    let proj = opts.projection.unwrap_or(if rows.iter().all(|r| r.position.z == 0.0) {
        Projection::Plan
    } else {
        Projection::Isometric
    });

    let mut tracks: BTreeMap<usize, Vec<&TrajectoryRow>> = BTreeMap::new();
    let mut kinds: BTreeMap<usize, Kind> = BTreeMap::new();
    for r in rows {
        tracks.entry(r.agent).or_default().push(r);
        let k = kinds.entry(r.agent).or_insert(Kind::Follower);
        match r.role {
            LogRole::Joining => *k = Kind::Joiner,
            LogRole::Leader if *k != Kind::Joiner => *k = Kind::Leader,
            _ => {}
        }
    }
    for t in tracks.values_mut() {
        t.sort_by(|a, b| a.t.total_cmp(&b.t));
    }

    let outlines: Vec<Vec<(f64, f64)>> = opts.obstacles.iter().map(|o| obstacle_outline(o, proj)).collect();
    let frame =
        Frame::fit(rows.iter().map(|r| proj.apply(&r.position)).chain(outlines.iter().flatten().copied()), true);

    let title = if opts.title.is_empty() { "trajectories".to_string() } else { opts.title.clone() };
    let view = match proj {
        Projection::Plan => "plan view (x, y)",
        Projection::Isometric => "isometric view",
    };
    let mut svg = header(&format!("{title}: {view}"));

    for outline in &outlines {
        let _ = writeln!(
            svg,
            "<polygon class=\"obstacle\" points=\"{}\" fill=\"#999999\" fill-opacity=\"0.35\" stroke=\"#666666\"/>",
            points_attr(&frame, outline.iter().copied())
        );
    }

    let times: Vec<f64> = {
        let mut t: Vec<f64> = rows.iter().map(|r| r.t).collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    };
    let wanted: Vec<f64> = if opts.snapshots.is_empty() {
        let (a, b) = (times[0], times[times.len() - 1]);
        (0..5).map(|k| a + (b - a) * k as f64 / 4.0).collect()
    } else {
        opts.snapshots.clone()
    };
    for w in wanted {
        let nearest = times.iter().copied().min_by(|a, b| (a - w).abs().total_cmp(&(b - w).abs())).expect("non-empty");
        let mut members: Vec<&TrajectoryRow> =
            rows.iter().filter(|r| r.t == nearest && r.role != LogRole::Joining).collect();
        members.sort_by_key(|r| r.agent);
        if members.len() >= 2 {
            let _ = writeln!(
                svg,
                "<polygon class=\"snapshot\" data-t=\"{nearest}\" points=\"{}\" fill=\"none\" stroke=\"#444444\" stroke-dasharray=\"4 3\" stroke-width=\"1\"/>",
                points_attr(&frame, members.iter().map(|r| proj.apply(&r.position)))
            );
        }
        for r in rows.iter().filter(|r| r.t == nearest) {
            let (x, y) = frame.map(proj.apply(&r.position));
            let _ = writeln!(svg, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"4\" fill=\"{}\"/>", kinds[&r.agent].color());
        }
    }

    for (agent, track) in &tracks {
        let kind = kinds[agent];
        let _ = writeln!(
            svg,
            "<polyline class=\"track\" data-agent=\"{agent}\" points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>",
            points_attr(&frame, track.iter().map(|r| proj.apply(&r.position))),
            kind.color()
        );
        let (x, y) = frame.map(proj.apply(&track[track.len() - 1].position));
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\">{agent}</text>",
            x + 6.0,
            y - 6.0
        );
    }

    let legend = [("follower", Kind::Follower), ("leader", Kind::Leader), ("new agent", Kind::Joiner)];
    for (k, (label, kind)) in legend.iter().enumerate() {
        let y = 50.0 + 18.0 * k as f64;
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{}\" stroke-width=\"3\"/><text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{label}</text>",
            WIDTH - 150.0,
            WIDTH - 125.0,
            kind.color(),
            WIDTH - 118.0,
            y + 4.0
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Renders one error-vs-time plot per axis (`x`, `y`, `z`).
pub fn error_svgs(rows: &[ErrorRow], kinds: &BTreeMap<usize, LogRole>) -> Result<[String; 3], PlotError> {
    if rows.is_empty() {
        return Err(PlotError::Empty("error"));
    }
    let mut tracks: BTreeMap<usize, Vec<&ErrorRow>> = BTreeMap::new();
    for r in rows {
        tracks.entry(r.agent).or_default().push(r);
    }
    for t in tracks.values_mut() {
        t.sort_by(|a, b| a.t.total_cmp(&b.t));
    }
    let color = |agent: usize| match kinds.get(&agent) {
        Some(LogRole::Joining) => JOINER_COLOR,
        Some(LogRole::Leader) => LEADER_COLOR,
        _ => FOLLOWER_COLOR,
    };
    let out: Vec<String> = ["x", "y", "z"]
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let frame = Frame::fit(rows.iter().map(|r| (r.t, r.error[k])), false);
            let mut svg = header(&format!("tracking error, {name} component"));
            let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r.error[k]), hi.max(r.error[k]))
            });
            let (t0, t1) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.t), b.max(r.t)));
            let (ax0, ay0) = (MARGIN, HEIGHT - MARGIN);
            let _ = writeln!(
                svg,
                "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#000000\"/>",
                WIDTH - 2.0 * MARGIN,
                HEIGHT - 2.0 * MARGIN
            );
            if lo <= 0.0 && hi >= 0.0 {
                let (_, yz) = frame.map((t0, 0.0));
                let _ = writeln!(
                    svg,
                    "<line x1=\"{MARGIN}\" y1=\"{yz:.2}\" x2=\"{}\" y2=\"{yz:.2}\" stroke=\"#bbbbbb\"/>",
                    WIDTH - MARGIN
                );
            }
            let label = |x: f64, y: f64, anchor: &str, text: String| {
                format!("<text x=\"{x:.2}\" y=\"{y:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"{anchor}\">{text}</text>\n")
            };
            svg.push_str(&label(ax0 - 4.0, MARGIN + 4.0, "end", format!("{hi:.3e}")));
            svg.push_str(&label(ax0 - 4.0, ay0, "end", format!("{lo:.3e}")));
            svg.push_str(&label(ax0, ay0 + 16.0, "start", format!("t = {t0}")));
            svg.push_str(&label(WIDTH - MARGIN, ay0 + 16.0, "end", format!("t = {t1} s")));
            for (agent, track) in &tracks {
                let _ = writeln!(
                    svg,
                    "<polyline class=\"error\" data-agent=\"{agent}\" points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\"/>",
                    points_attr(&frame, track.iter().map(|r| (r.t, r.error[k]))),
                    color(*agent)
                );
            }
            svg.push_str("</svg>\n");
            svg
        })
        .collect();
    Ok(out.try_into().expect("three axes"))
}

fn dominant_roles(rows: &[TrajectoryRow]) -> BTreeMap<usize, LogRole> {
    let mut kinds = BTreeMap::new();
    for r in rows {
        let k = kinds.entry(r.agent).or_insert(r.role);
        if r.role == LogRole::Joining || (r.role == LogRole::Leader && *k != LogRole::Joining) {
            *k = r.role;
        }
    }
    kinds
}

fn read_file(path: &Path) -> Result<std::fs::File, PlotError> {
    std::fs::File::open(path).map_err(|source| PlotError::Io { path: path.display().to_string(), source })
}

/// Reads both CSVs and writes `trajectory.svg`, `error_x.svg`, `error_y.svg`
/// and `error_z.svg` into `out_dir`.
pub fn render_plots(
    trajectory_csv: &Path,
    errors_csv: &Path,
    out_dir: &Path,
    opts: &PlotOptions,
) -> Result<Vec<PathBuf>, PlotError> {
    let traj = read_trajectory(read_file(trajectory_csv)?)?;
    let errs = read_errors(read_file(errors_csv)?)?;
    let traj_svg = trajectory_svg(&traj, opts)?;
    let err_svgs = error_svgs(&errs, &dominant_roles(&traj))?;
    std::fs::create_dir_all(out_dir).map_err(|source| PlotError::Io { path: out_dir.display().to_string(), source })?;
    let mut written = Vec::new();
    let files = [
        ("trajectory.svg", &traj_svg),
        ("error_x.svg", &err_svgs[0]),
        ("error_y.svg", &err_svgs[1]),
        ("error_z.svg", &err_svgs[2]),
    ];
    for (name, body) in files {
        let path = out_dir.join(name);
        std::fs::write(&path, body).map_err(|source| PlotError::Io { path: path.display().to_string(), source })?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polyline_points(svg: &str, class: &str) -> Vec<Vec<(f64, f64)>> {
        svg.lines()
            .filter(|l| l.starts_with(&format!("<polyline class=\"{class}\"")))
            .map(|l| {
                let start = l.find("points=\"").unwrap() + 8;
                let end = start + l[start..].find('"').unwrap();
                l[start..end]
                    .split(' ')
                    .map(|p| {
                        let (x, y) = p.split_once(',').unwrap();
                        (x.parse().unwrap(), y.parse().unwrap())
                    })
                    .collect()
            })
            .collect()
    }

    fn row(t: f64, agent: usize, role: LogRole, p: Vec3) -> TrajectoryRow {
        TrajectoryRow { t, agent, role, position: p, velocity: Vec3::zeros() }
    }

    #[test]
    fn straight_leader_is_straight_polyline() {
        let rows: Vec<TrajectoryRow> =
            (0..20).map(|k| row(k as f64, 1, LogRole::Leader, Vec3::new(k as f64, 0.5 * k as f64, 0.0))).collect();
        let svg = trajectory_svg(&rows, &PlotOptions::default()).unwrap();
        assert!(svg.contains(LEADER_COLOR));
        let tracks = polyline_points(&svg, "track");
        assert_eq!(tracks.len(), 1);
        let pts = &tracks[0];
        let (a, b) = (pts[0], pts[pts.len() - 1]);
        for p in pts {
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
            assert!(cross.abs() / len < 0.02, "{p:?}");
        }
    }

    #[test]
    fn exponential_error_is_monotone() {
        let rows: Vec<ErrorRow> = (0..50)
            .map(|k| {
                let t = k as f64 * 0.1;
                ErrorRow { t, agent: 1, error: Vec3::new((-t).exp(), 0.0, 0.0) }
            })
            .collect();
        let svgs = error_svgs(&rows, &BTreeMap::new()).unwrap();
        let pts = &polyline_points(&svgs[0], "error")[0];
        // Screen y grows downward, so a decreasing error has increasing y.
        assert!(pts.windows(2).all(|w| w[1].1 >= w[0].1 && w[1].0 > w[0].0));
    }

    #[test]
    fn colors_and_projection() {
        let mut rows = Vec::new();
        for k in 0..5 {
            let t = k as f64;
            rows.push(row(t, 1, LogRole::Follower, Vec3::new(t, 0.0, 1.0)));
            rows.push(row(t, 2, LogRole::Leader, Vec3::new(t, 1.0, 0.0)));
            let role = if k < 3 { LogRole::Joining } else { LogRole::Follower };
            rows.push(row(t, 3, role, Vec3::new(t, 2.0, 0.5)));
        }
        let opts = PlotOptions {
            obstacles: vec![Obstacle::Box { min: [1.0, 1.0, 0.0], max: [2.0, 2.0, 1.0] }],
            ..PlotOptions::default()
        };
        let svg = trajectory_svg(&rows, &opts).unwrap();
        assert!(svg.contains("isometric"));
        for c in [FOLLOWER_COLOR, LEADER_COLOR, JOINER_COLOR] {
            assert!(svg.contains(&format!("stroke=\"{c}\" stroke-width=\"1.5\"")), "{c}");
        }
        assert!(svg.contains("class=\"obstacle\""));
        assert!(svg.contains("class=\"snapshot\""));
    }

    #[test]
    fn empty_logs_rejected() {
        assert!(matches!(trajectory_svg(&[], &PlotOptions::default()), Err(PlotError::Empty(_))));
        assert!(matches!(error_svgs(&[], &BTreeMap::new()), Err(PlotError::Empty(_))));
    }

    #[test]
    fn hull_of_square_with_interior_point() {
        let hull = convex_hull(vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5)]);
        assert_eq!(hull.len(), 4);
    }
}
