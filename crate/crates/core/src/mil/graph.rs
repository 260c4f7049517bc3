//! Anomaly graphs: CSV and SVG output, and rank comparison of a full video's
//! graph with its trimmed counterpart.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::features::{segment_video, SegmentFeatures};
use super::net::{score_forward, MilWeights, ScoreSeries};
use crate::error::{Error, Result};
use crate::trim::{map_to_original, TrimSegmentMap};

const SVG_WIDTH: f64 = 640.0;
const SVG_HEIGHT: f64 = 320.0;
const MARGIN_LEFT: f64 = 48.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_Y: f64 = 16.0;

pub fn scores_to_csv(series: &ScoreSeries) -> String {
    let mut out = String::from("segment,score\n");
    for (i, s) in series.scores().iter().enumerate() {
        let _ = writeln!(out, "{i},{s:.6}");
    }
    out
}

pub fn parse_scores_csv(text: &str) -> Result<ScoreSeries> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("segment,score") {
        return Err(Error::Parse("score CSV must start with `segment,score`".into()));
    }
    let mut scores = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (idx, score) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("score line {}: {line:?}", n + 2)))?;
        if idx.trim().parse::<usize>().ok() != Some(scores.len()) {
            return Err(Error::Parse(format!("score line {}: expected segment {}", n + 2, scores.len())));
        }
        let v: f64 = score
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("score line {}: bad score {score:?}", n + 2)))?;
        scores.push(v);
    }
    ScoreSeries::new(scores).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_scores_csv(path: impl AsRef<Path>) -> Result<ScoreSeries> {
    let path = path.as_ref();
    parse_scores_csv(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// Scores rounded the way the CSV stores them.
fn as_written(series: &ScoreSeries) -> ScoreSeries {
    parse_scores_csv(&scores_to_csv(series)).expect("CSV of a valid series parses")
}

/// Self-contained line chart: one polyline of score against segment index,
/// y axis from 0 to 1 with ticks at 0, 0.5 and 1.
pub fn render_svg(series: &ScoreSeries) -> String {
    let plot_w = SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = SVG_HEIGHT - 2.0 * MARGIN_Y;
    let y_of = |s: f64| MARGIN_Y + (1.0 - s) * plot_h;
    let n = series.len();
    let x_of = |i: usize| {
        if n > 1 {
            MARGIN_LEFT + plot_w * i as f64 / (n - 1) as f64
        } else {
            MARGIN_LEFT
        }
    };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, x1, yb) = (MARGIN_LEFT, SVG_WIDTH - MARGIN_RIGHT, y_of(0.0));
    let _ = writeln!(
        svg,
        r#"<path d="M{x0} {top} L{x0} {yb} L{x1} {yb}" stroke="black" fill="none"/>"#,
        top = y_of(1.0)
    );
    for tick in [0.0, 0.5, 1.0] {
        let y = y_of(tick);
        let _ = writeln!(
            svg,
            r#"<line x1="{a}" y1="{y}" x2="{x0}" y2="{y}" stroke="black"/><text x="{t}" y="{ty}" font-size="11" text-anchor="end">{tick}</text>"#,
            a = x0 - 4.0,
            t = x0 - 6.0,
            ty = y + 4.0
        );
    }
    let points: Vec<String> = series
        .scores()
        .iter()
        .enumerate()
        .map(|(i, &s)| format!("{:.2},{:.2}", x_of(i), y_of(s)))
        .collect();
    let _ = writeln!(
        svg,
        r#"<polyline points="{}" stroke="crimson" stroke-width="2" fill="none"/>"#,
        points.join(" ")
    );
    svg.push_str("</svg>\n");
    svg
}

pub fn graph_paths(out_prefix: &Path) -> (PathBuf, PathBuf) {
    let with = |ext: &str| {
        let mut p = out_prefix.as_os_str().to_owned();
        p.push(ext);
        PathBuf::from(p)
    };
    (with(".csv"), with(".svg"))
}

/// Score the segments and write `<prefix>.csv` and `<prefix>.svg`. Returns
/// the series as stored in the CSV.
pub fn score_video(
    features: &SegmentFeatures,
    weights: &MilWeights,
    out_prefix: impl AsRef<Path>,
) -> Result<ScoreSeries> {
    let series = as_written(&score_forward(features, weights)?);
    let (csv, svg) = graph_paths(out_prefix.as_ref());
    fs::write(&csv, scores_to_csv(&series)).map_err(|e| Error::io(&csv, e))?;
    fs::write(&svg, render_svg(&series)).map_err(|e| Error::io(&svg, e))?;
    Ok(series)
}

/// 1-based ranks, ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation with average ranks. A constant side has no rank
/// order, and the result is then 0.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::SizeMismatch(format!(
            "rank correlation needs two equal series of length >= 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - mean) * (y - mean);
        va += (x - mean) * (x - mean);
        vb += (y - mean) * (y - mean);
    }
    if va == 0.0 || vb == 0.0 {
        return Ok(0.0);
    }
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

/// For each trimmed segment, the index of the full-video segment containing
/// the original position of its middle frame.
pub fn pair_segments(
    full_segments: usize,
    trimmed_segments: usize,
    map: &TrimSegmentMap,
    full_n_frames: usize,
) -> Result<Vec<usize>> {
    if let Some(last) = map.last_index().filter(|&l| l >= full_n_frames) {
        return Err(Error::InconsistentMap(format!(
            "map references frame {last} of a {full_n_frames}-frame video"
        )));
    }
    if map.total_kept() < trimmed_segments {
        return Err(Error::InconsistentMap(format!(
            "map keeps {} frames, fewer than the {trimmed_segments} trimmed segments",
            map.total_kept()
        )));
    }
    let full = segment_video(full_n_frames, full_segments)
        .map_err(|e| Error::InconsistentMap(e.to_string()))?;
    segment_video(map.total_kept(), trimmed_segments)?
        .into_iter()
        .map(|(s, e)| {
            let orig = map_to_original(map, (s + e) / 2)?;
            Ok(full.partition_point(|&(_, end)| end < orig))
        })
        .collect()
}

/// Rank agreement between a full video's graph and its trimmed graph.
pub fn compare_graphs(
    full: &ScoreSeries,
    trimmed: &ScoreSeries,
    map: &TrimSegmentMap,
    full_n_frames: usize,
) -> Result<f64> {
    let pairs = pair_segments(full.len(), trimmed.len(), map, full_n_frames)?;
    let paired_full: Vec<f64> = pairs.iter().map(|&k| full.scores()[k]).collect();
    spearman(&paired_full, trimmed.scores())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(v: Vec<f64>) -> ScoreSeries {
        ScoreSeries::new(v).unwrap()
    }

    #[test]
    fn csv_and_svg_for_constant_scores() {
        let dir = tempfile::tempdir().unwrap();
        let feats = SegmentFeatures::new(vec![vec![1.0, 2.0]; 32]).unwrap();
        let prefix = dir.path().join("graph");
        let s = score_video(&feats, &MilWeights::zeros(2, 4, 3), &prefix).unwrap();
        assert_eq!(s.len(), 32);
        let csv = fs::read_to_string(dir.path().join("graph.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 33);
        assert_eq!(lines[0], "segment,score");
        assert!(lines[1..].iter().enumerate().all(|(i, l)| *l == format!("{i},0.500000")));
        assert_eq!(read_scores_csv(dir.path().join("graph.csv")).unwrap(), s);

        let svg = fs::read_to_string(dir.path().join("graph.svg")).unwrap();
        assert!(svg.contains(r#"viewBox="0 0 640 320""#));
        assert_eq!(svg.matches("<polyline").count(), 1);
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        let ys: Vec<&str> = pts.split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
        assert!(ys.iter().all(|y| *y == ys[0]));
    }

    #[test]
    fn csv_round_trip_of_arbitrary_scores() {
        let s = series(vec![0.1234564, 0.9999995, 0.0, 1.0, 1.0 / 3.0]);
        let written = as_written(&s);
        assert_eq!(parse_scores_csv(&scores_to_csv(&written)).unwrap(), written);
        assert!(parse_scores_csv("x,y\n0,0.5\n").is_err());
        assert!(parse_scores_csv("segment,score\n1,0.5\n").is_err());
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn identity_and_reversed_pairings() {
        let map = TrimSegmentMap::from_runs(vec![(0, 63)]).unwrap();
        let full = series((0..32).map(|i| ((i * 37) % 32) as f64 / 32.0).collect());
        assert_eq!(compare_graphs(&full, &full, &map, 64).unwrap(), 1.0);
        let rfull = series((0..32).map(|i| i as f64 / 32.0).collect());
        let rrev = series(rfull.scores().iter().rev().copied().collect());
        assert_eq!(compare_graphs(&rfull, &rrev, &map, 64).unwrap(), -1.0);
    }

    #[test]
    fn midpoint_pairing() {
        // full: 8 frames in 4 segments; trimmed keeps frames 2..=5 as 2 segments
        let map = TrimSegmentMap::from_runs(vec![(2, 5)]).unwrap();
        assert_eq!(pair_segments(4, 2, &map, 8).unwrap(), vec![1, 2]);
        assert!(matches!(pair_segments(4, 2, &map, 5), Err(Error::InconsistentMap(_))));
        assert!(matches!(pair_segments(4, 5, &map, 8), Err(Error::InconsistentMap(_))));
    }

    #[test]
    fn constant_side_gives_zero() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[0.5, 0.5, 0.5]).unwrap(), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn spearman_is_bounded_and_rank_based(v in prop::collection::vec(0.0f64..1.0, 2..40), w in prop::collection::vec(0.0f64..1.0, 2..40)) {
                let n = v.len().min(w.len());
                let (a, b) = (&v[..n], &w[..n]);
                let r = spearman(a, b).unwrap();
                prop_assert!((-1.0..=1.0).contains(&r));
                let squashed: Vec<f64> = a.iter().map(|x| x * x * x).collect();
                prop_assert!((spearman(&squashed, b).unwrap() - r).abs() < 1e-12);
            }
        }
    }
}
