use nalgebra::DMatrix;
use rand::SeedableRng;

use ebvi::cavi::{run_cavi, select_and_refit, CaviConfig, RefitStatus, StopReason};
use ebvi::dataset::simulate;
use ebvi::pilot::{default_lambda_grid, fit_l1_logistic, jitter_zeros};
use ebvi::posterior::enumerate_posterior;
use ebvi::{Configuration, Dataset, DesignKind, HyperParams, Signal, SimRng, SimScenario};

const X: [[f64; 3]; 12] = [
    [0.8, -1.2, 0.3],
    [-0.5, 0.4, 1.1],
    [1.5, 0.2, -0.7],
    [-1.1, -0.9, 0.5],
    [0.3, 1.7, -1.4],
    [2.0, -0.3, 0.9],
    [-1.8, 0.6, 0.2],
    [0.7, 1.1, -0.4],
    [-0.2, -1.5, 1.3],
    [1.2, 0.5, 0.6],
    [-0.9, 0.8, -1.0],
    [0.4, -0.6, -0.2],
];
const Y: [f64; 12] = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0];

fn literal() -> Dataset {
    let x = DMatrix::from_fn(12, 3, |i, j| X[i][j]);
    Dataset::unnamed(x, Y.to_vec()).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

// Reference values from a 40-digit re-implementation of the same updates.
#[test]
fn cavi_matches_high_precision_reference() {
    let d = literal();
    let res = run_cavi(&d, &[2.0, 0.7, -0.3], &CaviConfig::default(), &HyperParams::default()).unwrap();
    assert_eq!(res.sweeps, 5);
    assert_eq!(res.stopped_reason, StopReason::Converged);
    let phi = [0.98109433628854298, 0.17648683389598093, 0.13608021161111921];
    for (got, want) in res.phi.iter().zip(phi) {
        assert!(close(*got, want, 1e-12), "{got} vs {want}");
    }
    let trace = [
        -6.7232781784604197,
        -4.9591048505115794,
        -4.9480731654819307,
        -4.9480621563914459,
        -4.9480621478659788,
        -4.9480621478584895,
    ];
    assert_eq!(res.objective_trace.len(), trace.len());
    for (got, want) in res.objective_trace.iter().zip(trace) {
        assert!(close(*got, want, 1e-12), "{got} vs {want}");
    }
    assert_eq!(res.selected, Configuration::new(vec![0]).unwrap());
}

#[test]
fn enumeration_matches_high_precision_reference() {
    let table = enumerate_posterior(&literal(), &HyperParams::default(), 1).unwrap();
    assert_eq!(table.entries.len(), 4);
    assert!(close(table.log_norm_const, -3.8001658803601745, 1e-10));
    let incl = [0.97631657940640089, 0.0061293823190283004, 0.005692125568206654];
    for (got, want) in table.inclusion.iter().zip(incl) {
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
    assert_eq!(table.mode().indices, Configuration::new(vec![0]).unwrap());
}

#[test]
fn csv_to_selection() {
    let sc = SimScenario {
        n: 200,
        p: 20,
        s: 2,
        signal: Signal::Fixed(4.0),
        design: DesignKind::IidGaussian { sigma: 1.0 },
        seed: 11,
    };
    let sim = simulate(&sc, &mut sc.rng()).unwrap();
    let text = sim.data.to_csv_string("label");
    let d = Dataset::from_csv_str(&text, "label").unwrap();
    assert_eq!(d.x(), sim.data.x());
    assert_eq!(d.y(), sim.data.y());

    let mut rng = SimRng::seed_from_u64(3);
    let grid = default_lambda_grid(&d, 50, 0.01);
    let pilot = fit_l1_logistic(&d, &grid, 5, &mut rng).unwrap();
    let bt = jitter_zeros(&pilot, 0.01, &mut rng).unwrap();
    let h = HyperParams::default();
    let res = run_cavi(&d, &bt.beta_tilde, &CaviConfig::default(), &h).unwrap();
    for (j, &f) in res.phi.iter().enumerate() {
        if sim.support.contains(j) {
            assert!(f > 0.9, "signal {j}: {f}");
        } else {
            assert!(f < 0.1, "noise {j}: {f}");
        }
    }
    let sel = select_and_refit(&res.phi, &d, 0.5).unwrap();
    assert_eq!(sel.support, sim.support);
    assert_eq!(sel.status, RefitStatus::Fitted);

    let exact = enumerate_posterior(&d, &h, 3).unwrap();
    for &j in sim.support.indices() {
        assert!(exact.inclusion[j] > 0.9);
    }
}
