//! Timing harnesses for granulation and graph construction.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::data::{synthetic_scene, DataError};
use crate::granulation::{granulate, GranularRectangle, GranulationConfig, GranulationError};
use crate::graph::{build_graph, GraphError};

pub const DEFAULT_SIDES: [usize; 4] = [100, 200, 224, 500];
pub const DEFAULT_NODE_COUNTS: [usize; 4] = [2000, 4000, 6000, 8000];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no sizes to benchmark")]
    EmptySizes,
    #[error("repeats must be >= 1")]
    NoRepeats,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Granulation(#[from] GranulationError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GranulationTiming {
    pub side: usize,
    pub pixels: usize,
    pub rectangles: usize,
    /// Fastest of the repeats.
    pub millis: f64,
    pub median_millis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphBuildTiming {
    pub nodes: usize,
    pub edges: usize,
    pub seconds: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Granulate one synthetic scene per side length, on the calling thread.
pub fn time_granulation(
    sides: &[usize],
    repeats: usize,
    config: &GranulationConfig,
    seed: u64,
) -> Result<Vec<GranulationTiming>, BenchError> {
    if sides.is_empty() {
        return Err(BenchError::EmptySizes);
    }
    if repeats == 0 {
        return Err(BenchError::NoRepeats);
    }
    sides
        .iter()
        .map(|&side| {
            let image = synthetic_scene(side, seed)?;
            let mut times = Vec::with_capacity(repeats);
            let mut rectangles = 0;
            for _ in 0..repeats {
                let t = Instant::now();
                let rects = granulate(&image, config)?;
                times.push(t.elapsed().as_secs_f64() * 1e3);
                rectangles = rects.len();
            }
            Ok(GranulationTiming {
                side,
                pixels: side * side,
                rectangles,
                millis: times.iter().copied().fold(f64::INFINITY, f64::min),
                median_millis: median(times),
            })
        })
        .collect()
}

/// `k` small random rectangles scattered over a `side x side` image.
pub fn random_rectangles(k: usize, side: usize, seed: u64) -> Vec<GranularRectangle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| GranularRectangle {
            center_x: rng.gen_range(0..side),
            center_y: rng.gen_range(0..side),
            r_x: rng.gen_range(0..4),
            r_y: rng.gen_range(0..4),
            purity: 1.0,
            variance: 0.0,
            mean: 0.5,
            max_val: 0.5,
            min_val: 0.5,
        })
        .collect()
}

/// Fastest-of-`repeats` `build_graph` time for each node count.
pub fn time_graph_build(node_counts: &[usize], repeats: usize, seed: u64) -> Result<Vec<GraphBuildTiming>, BenchError> {
    if node_counts.is_empty() {
        return Err(BenchError::EmptySizes);
    }
    if repeats == 0 {
        return Err(BenchError::NoRepeats);
    }
    let side = 1000;
    node_counts
        .iter()
        .map(|&k| {
            let rects = random_rectangles(k, side, seed);
            let mut best = f64::INFINITY;
            let mut edges = 0;
            for _ in 0..repeats {
                let t = Instant::now();
                let g = build_graph(&rects, side, side, 0)?;
                best = best.min(t.elapsed().as_secs_f64());
                edges = g.num_edges();
            }
            Ok(GraphBuildTiming {
                nodes: k,
                edges,
                seconds: best,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticFit {
    /// `y ~ a x^2`.
    pub a: f64,
    /// Largest `|y - a x^2| / (a x^2)` over the points.
    pub max_relative_deviation: f64,
}

/// Least-relative-squares fit of `y = a x^2`.
pub fn fit_quadratic(points: &[(f64, f64)]) -> QuadraticFit {
    let num: f64 = points.iter().map(|&(x, y)| x * x / y).sum();
    let den: f64 = points.iter().map(|&(x, y)| x.powi(4) / (y * y)).sum();
    let a = num / den;
    let max_relative_deviation = points
        .iter()
        .map(|&(x, y)| ((y - a * x * x) / (a * x * x)).abs())
        .fold(0.0, f64::max);
    QuadraticFit {
        a,
        max_relative_deviation,
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

pub fn write_granulation_csv(rows: &[GranulationTiming], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_graph_build_csv(rows: &[GraphBuildTiming], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_fit_recovers_exact_data() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&x| (x, 3.0 * x * x)).collect();
        let fit = fit_quadratic(&pts);
        assert!((fit.a - 3.0).abs() < 1e-12);
        assert!(fit.max_relative_deviation < 1e-12);
        assert!((loglog_slope(&pts) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn linear_data_is_not_quadratic() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&x| (x, x)).collect();
        assert!(fit_quadratic(&pts).max_relative_deviation > 0.2);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(matches!(
            time_granulation(&[], 1, &GranulationConfig::default(), 0),
            Err(BenchError::EmptySizes)
        ));
        assert!(matches!(time_graph_build(&[10], 0, 0), Err(BenchError::NoRepeats)));
    }

    #[test]
    fn small_runs_report_counts() {
        let rows = time_granulation(&[16, 24], 1, &GranulationConfig::default(), 1).unwrap();
        assert_eq!(rows.iter().map(|r| r.pixels).collect::<Vec<_>>(), vec![256, 576]);
        assert!(rows.iter().all(|r| r.rectangles >= 1 && r.millis >= 0.0));
        let builds = time_graph_build(&[5, 50], 1, 2).unwrap();
        assert_eq!(builds[1].nodes, 50);
        let mut buf = Vec::new();
        write_granulation_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("side,pixels,rectangles,millis,median_millis"));
    }
}
