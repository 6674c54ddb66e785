//! Granulation time against image size and graph construction against k.
//!
//!     cargo run --release --example bench_scaling

use grbfl::bench::{
    fit_quadratic, loglog_slope, time_granulation, time_graph_build, DEFAULT_NODE_COUNTS, DEFAULT_SIDES,
};
use grbfl::granulation::GranulationConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for t in time_granulation(&DEFAULT_SIDES, 3, &GranulationConfig::default(), 0)? {
        println!(
            "{0:>4}x{0:<4} {1:>9.3} ms (median {2:.3}), {3} rectangles",
            t.side, t.millis, t.median_millis, t.rectangles
        );
    }

    let builds = time_graph_build(&DEFAULT_NODE_COUNTS, 5, 0)?;
    for b in &builds {
        println!("k = {:>5}: {:.3} ms, {} edges", b.nodes, b.seconds * 1e3, b.edges);
    }
    let pts: Vec<(f64, f64)> = builds.iter().map(|b| (b.nodes as f64, b.seconds)).collect();
    let fit = fit_quadratic(&pts);
    println!(
        "t ~ {:.3e} k^2, worst deviation {:.1}%, log-log slope {:.2}",
        fit.a,
        100.0 * fit.max_relative_deviation,
        loglog_slope(&pts)
    );
    Ok(())
}
