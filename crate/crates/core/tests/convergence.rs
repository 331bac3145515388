use dmed_core::dmed::{Simulation, SimulationSetup};
use dmed_core::metrics::{dist_to_set, median_set};
use dmed_core::{ObservationParams, ScheduleParams, SeedTree, StaticGraph};

fn max_dist_at(graph: StaticGraph, theta: &[f64], checkpoints: &[u64]) -> Vec<f64> {
    let obs = ObservationParams::new(theta.to_vec(), 0.0, 1.0, 0.0).unwrap();
    let schedule = ScheduleParams::default().into_schedule().unwrap();
    let setup = SimulationSetup::new(graph, 0.0, obs, schedule).unwrap();
    let m = median_set(theta).unwrap();
    let mut sim = Simulation::new(&setup, SeedTree::new(0).trial(0)).unwrap();
    let mut out = Vec::new();
    for &t in checkpoints {
        while sim.state().t < t {
            sim.advance().unwrap();
        }
        out.push(sim.state().x.iter().map(|&v| dist_to_set(v, &m)).fold(0.0, f64::max));
    }
    out
}

#[test]
fn noise_free_residual_tracks_alpha_gamma_over_beta() {
    // The quasi-static offset is proportional to alpha_t gamma_t / beta_t = O(t^-0.7).
    let ts = [10_000u64, 100_000, 1_000_000];
    let d = max_dist_at(StaticGraph::complete(5), &[1.0, 2.0, 3.0, 4.0, 5.0], &ts);
    let scaled: Vec<f64> = ts.iter().zip(&d).map(|(&t, v)| v * ((t + 1) as f64).powf(0.7)).collect();
    for w in scaled.windows(2) {
        let r = w[1] / w[0];
        assert!((0.8..1.25).contains(&r), "scaled residuals {scaled:?}");
    }
    // on K5 the middle agent sits (alpha gamma / beta) / N below the median
    let t = ts[1] as f64 + 1.0;
    let predicted = 200.0 * t.powf(-0.7) / 5.0;
    assert!((d[1] - predicted).abs() < 0.05 * predicted, "{} vs {predicted}", d[1]);
    assert!(d[2] < 1e-2);
}
