use rand_distr::{Distribution, StandardNormal};

use diffc::codec::{reconstruct_ancestral_at, AnalyticSource, FlowIntegrator, ScoreModel, DEFAULT_ODE_STEPS};
use diffc::gaussian_rd::{diffc_a_point, diffc_f_point, Spectrum};
use diffc::rng::labelled;
use diffc::stats::MeanEstimate;

fn simulated_distortion(spectrum: &Spectrum, sigma: f64, flow: bool, n: usize) -> MeanEstimate {
    let src = AnalyticSource::gaussian(spectrum, None).unwrap();
    let integrator = FlowIntegrator::new(&src, sigma, DEFAULT_ODE_STEPS).unwrap();
    let mut rng = labelled(5, if flow { "mc/flow" } else { "mc/ancestral" });
    let a = (1.0 - sigma * sigma).sqrt();
    let errors: Vec<f64> = (0..n)
        .map(|_| {
            let mut x = vec![0.0; spectrum.dim()];
            src.sample(&mut rng, &mut x);
            let z: Vec<f64> = x
                .iter()
                .map(|xi| {
                    let u: f64 = StandardNormal.sample(&mut rng);
                    a * xi + sigma * u
                })
                .collect();
            let xh = if flow {
                integrator.solve(&z).unwrap()
            } else {
                reconstruct_ancestral_at(&z, &src, sigma, &mut rng).unwrap()
            };
            x.iter().zip(&xh).map(|(p, q)| (p - q) * (p - q)).sum()
        })
        .collect();
    MeanEstimate::from_samples(&errors)
}

#[test]
fn closed_form_distortions_match_simulation() {
    let sp = Spectrum::new(vec![4.0, 1.0, 0.25]).unwrap();
    for sigma in [0.2, 0.5, 0.8] {
        let a = diffc_a_point(&sp, sigma).unwrap().distortion;
        let f = diffc_f_point(&sp, sigma).unwrap().distortion;
        let ma = simulated_distortion(&sp, sigma, false, 40_000);
        let mf = simulated_distortion(&sp, sigma, true, 5_000);
        assert!((ma.mean - a).abs() < 3.0 * ma.std_error, "ancestral σ={sigma}: {ma:?} vs {a}");
        assert!((mf.mean - f).abs() < 3.0 * mf.std_error, "flow σ={sigma}: {mf:?} vs {f}");
    }
}
