mod common;

use bayes_ergm::gof::GofStart;
use bayes_ergm::rng::{stream, Domain};
use bayes_ergm::sampler::TieSampler;
use bayes_ergm::{bgof, Execution, Graph, GofSettings, PosteriorSample};
use common::*;

fn point_mass(theta: Vec<f64>, names: Vec<String>) -> PosteriorSample {
    PosteriorSample { names, nchains: 1, iterations: 1, draws: vec![theta], acceptance_rate: 0.0, imputed_networks: vec![] }
}

#[test]
fn observed_proportions_by_hand() {
    // triangle 0-1-2 plus the isolated edge 3-4
    let g = Graph::from_edge_list(&[(0, 1), (1, 2), (2, 0), (3, 4)], 5, false).unwrap();
    let m = model("edges + gwesp(0.5, fixed = TRUE)", &g);
    let s = GofSettings { sample_size: 4, aux_iters: 10, n_deg: 4, n_esp: 3, n_dist: 3, ..Default::default() };
    let r = bgof(&point_mass(vec![0.0, 0.0], m.free_names()), &m, &g, &s).unwrap();
    let observed = |f: &str| r.family(f).unwrap().bins.iter().map(|b| b.observed).collect::<Vec<_>>();
    assert_eq!(observed("degree"), [0.0, 0.4, 0.6, 0.0]);
    assert_eq!(observed("esp"), [0.25, 0.75, 0.0]);
    assert_eq!(observed("distance"), [0.4, 0.0, 0.6]);
}

#[test]
fn truth_is_covered_when_sampling_at_the_truth() {
    let mut rng = stream(3, Domain::Simulate, 0);
    let g0 = random_graph(&mut rng, 20, false, 0.0);
    let m = model("edges + gwesp(0.5, fixed = TRUE)", &g0);
    let theta = vec![-2.0, 0.3];
    let mut y = g0.clone();
    TieSampler::new(&m, &theta).unwrap().run(&mut y, 50_000, &mut rng);
    let s = GofSettings { sample_size: 200, aux_iters: 20_000, seed: 1, ..Default::default() };
    let r = bgof(&point_mass(theta, m.free_names()), &m, &y, &s).unwrap();
    assert!(r.coverage() >= 0.9, "coverage {}", r.coverage());
    for f in &r.families {
        for b in &f.bins {
            assert!(b.quantiles.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}

#[test]
fn directed_caps_fix_the_bin_counts() {
    let mut rng = stream(4, Domain::Simulate, 0);
    let g = random_graph(&mut rng, 15, true, 0.1);
    let m = model("edges + mutual", &g);
    let s = GofSettings {
        sample_size: 20,
        aux_iters: 2000,
        n_ideg: 11,
        n_odeg: 11,
        n_esp: 8,
        n_dist: 5,
        start: GofStart::Empty,
        ..Default::default()
    };
    let r = bgof(&point_mass(vec![-2.0, 1.0], m.free_names()), &m, &g, &s).unwrap();
    let sizes: Vec<(&str, usize)> = r.families.iter().map(|f| (f.name.as_str(), f.bins.len())).collect();
    assert_eq!(sizes, [("idegree", 11), ("odegree", 11), ("esp", 8), ("distance", 5)]);
    // every node has in-degree below the cap, so the proportions are complete
    let total: f64 = r.family("idegree").unwrap().bins.iter().map(|b| b.observed).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn report_is_reproducible_and_checked() {
    let mut rng = stream(5, Domain::Simulate, 0);
    let g = random_graph(&mut rng, 12, false, 0.2);
    let m = model("edges + gwesp(0.5, fixed = TRUE)", &g);
    let sample = point_mass(vec![-1.5, 0.2], m.free_names());
    let mut s = GofSettings { sample_size: 30, aux_iters: 1000, seed: 8, ..Default::default() };
    let a = bgof(&sample, &m, &g, &s).unwrap();
    s.execution = Execution::Sequential;
    assert_eq!(a.families, bgof(&sample, &m, &g, &s).unwrap().families);
    assert!(bgof(&point_mass(vec![0.0], vec!["edges".into()]), &m, &g, &s).is_err());
}
