//! Side-by-side dual vs fast-only run over the bundled hazard suite,
//! printing per-scenario collision counts and slow-pathway activation.

use dualpath_core::harness::{run_episode, RunMode};
use dualpath_core::Config;

fn main() {
    let cfg = Config::default();
    let seed = 0;
    let started = std::time::Instant::now();
    let mut dual_total = 0;
    let mut fast_total = 0;
    let mut strict = 0;
    let mut slow_ticks = 0u32;
    let mut ticks = 0u32;
    for (name, sc) in dualpath_core::suite::hazard_suite() {
        let dual = run_episode(&sc, &name, &cfg, RunMode::Dual, seed).expect("dual");
        let fast = run_episode(&sc, &name, &cfg, RunMode::FastOnly, seed).expect("fast");
        let d = dual.summary.collision_events;
        let f = fast.summary.collision_events;
        dual_total += d;
        fast_total += f;
        if d < f {
            strict += 1;
        }
        slow_ticks += dual.summary.slow_ticks;
        ticks += dual.summary.ticks;
        println!(
            "{name:18} dual={d} fast={f} slow_rate={:.2} rc_dual={:.2} rc_fast={:.2}{}",
            dual.summary.slow_activation_rate,
            dual.summary.route_completion,
            fast.summary.route_completion,
            if d > f { "  <-- REGRESSION" } else { "" },
        );
    }
    println!(
        "totals: dual={dual_total} fast={fast_total} strict_improvements={strict} slow_rate={:.3} wall={:.2}s",
        slow_ticks as f64 / ticks as f64,
        started.elapsed().as_secs_f64(),
    );
}
