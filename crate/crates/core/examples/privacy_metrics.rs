//! S_p, CE and PEUM from made-up round logs.

use grbfl::federation::RoundLog;
use grbfl::metrics::{communication_efficiency, peum, privacy_score_from_mse, MetricConfig, MetricReport, DEFAULT_PHI};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for m in [0.0, 0.01, 0.1, 1.0, 3.0] {
        println!("MSE {m:<5} -> S_p {:.4}", privacy_score_from_mse(m));
    }

    let traffic = 2.0 * 5.0 * 1152.0;
    for t in [0.0, 1e-4, 1e-3, 1e-2] {
        println!(
            "comm {t:<6} s over {traffic} params -> CE {:.4}",
            communication_efficiency(t, traffic, DEFAULT_PHI)?
        );
    }

    let p = peum(0.9, 0.9, 0.9);
    println!("PEUM(0.9, 0.9, 0.9) = {:.4}", p.value);
    let p = peum(0.95, 0.9, 0.0);
    println!("PEUM with S_p = 0: {} (defined: {})", p.value, p.defined);

    let logs: Vec<RoundLog> = (0..3)
        .map(|round| RoundLog {
            round,
            seconds: 2e-4,
            params_transferred: traffic as u64,
            accuracy: 0.8 + 0.05 * round as f64,
        })
        .collect();
    let report = MetricReport::from_runs(&logs, &[0.21, 0.18, 0.25], &MetricConfig::default())?;
    println!("{}", report.to_json());
    Ok(())
}
