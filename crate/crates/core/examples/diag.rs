use ndarray::{Array2, Array3};
use urlflow_core::gibbs::{fit, GibbsSchedule, Priors};
use urlflow_core::hawkes::{simulate, HawkesParams, LagKernelGrid};

fn geometric_pmfs(k: usize, grid: &LagKernelGrid) -> Array3<f64> {
    let b = grid.num_bins();
    let raw: Vec<f64> = (0..b).map(|i| 0.5f64.powi(i as i32)).collect();
    let total: f64 = raw.iter().sum();
    let mut pmfs = Array3::zeros((k, k, b));
    for s in 0..k {
        for t in 0..k {
            for (i, &v) in raw.iter().enumerate() {
                pmfs[[s, t, i]] = v / total;
            }
        }
    }
    pmfs
}

fn main() {
    let grid = LagKernelGrid::default_720();
    let null_truth = HawkesParams::new(
        vec![0.01; 2],
        Array2::zeros((2, 2)),
        geometric_pmfs(2, &grid),
        grid.clone(),
    )
    .unwrap();
    let k1_truth = HawkesParams::new(
        vec![0.01],
        Array2::from_elem((1, 1), 0.4),
        geometric_pmfs(1, &grid),
        grid.clone(),
    )
    .unwrap();
    let mut w3 = Array2::from_elem((3, 3), 0.1);
    for i in 0..3 {
        w3[[i, i]] = 0.3;
    }
    let k3_truth = HawkesParams::new(
        vec![0.002, 0.001, 0.003],
        w3,
        geometric_pmfs(3, &grid),
        grid.clone(),
    )
    .unwrap();

    for (aw, bw) in [(0.05, 2.0)] {
        let priors = Priors {
            w_shape: aw,
            w_rate: bw,
            ..Priors::default()
        };

        // null: 20 replicates as in the acceptance criterion
        let mut entries = Vec::new();
        for r in 0..20u64 {
            let counts = simulate(&null_truth, 20_000, 500 + r).unwrap();
            let s = fit(&counts, &grid, &priors, &GibbsSchedule::default(), 700 + r).unwrap();
            entries.extend(s.mean_weights.iter().copied());
        }
        entries.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let p95 = entries[(0.95 * entries.len() as f64).ceil() as usize - 1];
        let max = entries.last().unwrap();

        // K=1 recovery over 4 seeds
        let mut k1 = Vec::new();
        for seed in 0..4u64 {
            let counts = simulate(&k1_truth, 50_000, 1000 + seed).unwrap();
            let s = fit(&counts, &grid, &priors, &GibbsSchedule::default(), 2000 + seed).unwrap();
            k1.push(s.mean_weights[[0, 0]]);
        }

        println!(
            "aw={aw:<5} bw={bw:<4}: null p95={p95:.4} max={max:.4} | k1 W = {:?}",
            k1.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>(),
        );

        // K=3 recovery, acceptance-shaped: 16 urls aggregated, 10 replicates,
        // per-cell aggregate errors over cells with >= 50 attributed events
        for rep in 0..10u64 {
            let mut w_hat = Array2::<f64>::zeros((3, 3));
            let mut attr = Array2::<f64>::zeros((3, 3));
            let n_urls = 16;
            for u in 0..n_urls {
                let counts = simulate(&k3_truth, 20_160, 3000 + rep * 100 + u).unwrap();
                let s =
                    fit(&counts, &grid, &priors, &GibbsSchedule::default(), 4000 + rep * 100 + u)
                        .unwrap();
                w_hat += &s.mean_weights.mapv(|v| v / n_urls as f64);
                attr += &s.mean_edge_totals;
            }
            let mut cells = Vec::new();
            for s in 0..3 {
                for t in 0..3 {
                    if attr[[s, t]] >= 50.0 {
                        cells.push(format!(
                            "{s}{t}:{:+.3}",
                            w_hat[[s, t]] - k3_truth.weights[[s, t]]
                        ));
                    }
                }
            }
            println!("  k3 rep {rep}: {}", cells.join(" "));
        }
    }
}
