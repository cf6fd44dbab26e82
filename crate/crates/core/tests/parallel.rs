use sg2d_core::chaos::chaos_moments;
use sg2d_core::gibbs::sample_rn_prior;
use sg2d_core::stats::mean;
use sg2d_core::{GridSpec, SpectralGrid};

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn replica_dispatch_does_not_change_statistics() {
    let g = SpectralGrid::new(GridSpec::new(8, 3.0)).unwrap();
    let seq = in_pool(1, || (mean(&sample_rn_prior(&g, 500, 4)), chaos_moments(&g, g.constants(), &[(1, 0)], 300, 4).unwrap()));
    let par = in_pool(4, || (mean(&sample_rn_prior(&g, 500, 4)), chaos_moments(&g, g.constants(), &[(1, 0)], 300, 4).unwrap()));
    assert!((seq.0 - par.0).abs() <= 1e-12 * seq.0.abs());
    assert!((seq.1.mean.mean - par.1.mean.mean).norm() <= 1e-12);
    assert!((seq.1.two_point[0].estimate.mean - par.1.two_point[0].estimate.mean).abs() <= 1e-12);
}
