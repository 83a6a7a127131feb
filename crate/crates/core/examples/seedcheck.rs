// temporary probe: post-pretraining state only (no adversarial steps)
use ganice::dgp::{IhdpBenchmark, StateSampler};
use ganice::estimator::{train, GaniceConfig};
use ganice::numeric::{mean, mix_seed};

fn main() {
    let b = IhdpBenchmark::generate(747, 100).unwrap();
    for (label, lr, lam, mse) in [
        ("mse only   @2e-4", 2e-4, 0.0, 1.0),
        ("mse+pair   @2e-4", 2e-4, 1.0, 1.0),
        ("mse6+pair  @5e-4", 5e-4, 1.0, 6.0),
        ("mse6+pair  @1e-3", 1e-3, 1.0, 6.0),
        ("mse12+pair @1e-3", 1e-3, 1.0, 12.0),
    ] {
        let mut cfg = GaniceConfig::ihdp_paper();
        cfg.adversarial_steps = 0;
        cfg.restarts = 1;
        cfg.calibration = None;
        cfg.pretrain_lr = Some(lr);
        cfg.lambda_trans = lam;
        cfg.pretrain_mse_weight = Some(mse);
        cfg.seed = 5;
        let g = train(&cfg, &b.dataset, &b.design).unwrap().model;
        let mut gap = 0.0;
        let mut sdm = 0.0;
        let n = b.design.len();
        for si in 0..n {
            let st = &b.design.states[si];
            let m = g.sample_state(st, 500, mix_seed(1, si as u64));
            let mm = mean(&m);
            gap += (mm - b.true_mean(st)).abs() / n as f64;
            sdm += (m.iter().map(|v| (v - mm) * (v - mm)).sum::<f64>() / 499.0).sqrt() / n as f64;
        }
        println!("{label}: mean gap {gap:.4}, model sd {sdm:.4}");
    }
}
