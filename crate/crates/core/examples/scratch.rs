use illiquidity::log_infinite::solve_log;
use illiquidity::mc::{evaluate_policy, policy_from_log, SimConfig};
use illiquidity::presets;
use std::time::Instant;

fn main() {
    let p = presets::base_log();
    let sol = solve_log(&p).unwrap();
    let policy = policy_from_log(&sol);
    let cfg = SimConfig {
        t_trunc: 200.0,
        n_paths: 1_000_000,
        seed: 2024,
        ..SimConfig::default()
    };
    let start = Instant::now();
    let est = evaluate_policy(&p, &policy, &cfg).unwrap();
    let el = start.elapsed();
    println!(
        "n=1e6: mean {:.6} vs b {:.6} | err {:.4} | 3se {:.4} | tail {:.2e} | {:?}",
        est.mean,
        sol.b,
        (est.mean - sol.b).abs(),
        3.0 * est.std_err,
        est.tail_bound,
        el
    );
}
