//! Print the arbitration thresholds calibrated on the bundled benign
//! suite. The numbers frozen into `SwitchConfig::default` come from
//! this procedure.

use dualpath_core::harness::calibrate_thresholds;
use dualpath_core::Config;

fn main() {
    let cfg = Config::default();
    let (tau_reward, tau_uncertainty) = calibrate_thresholds(&cfg, 0).expect("calibration");
    println!("tau_reward (25th pct of benign best rewards): {tau_reward:.17}");
    println!("tau_uncertainty (75th pct of benign uncertainty): {tau_uncertainty:.17}");
}
