use rand::Rng;

use complexnn::categorical::{burt_table, categorical_som_train, disjunctive_table, CategoricalTable, EncodingKind};
use complexnn::rng::seeded;
use complexnn::som::{MapLattice, NeighborhoodSchedule};

/// Two noisy copies of a latent binary trait plus two unrelated answers.
fn survey(seed: u64, n: usize) -> CategoricalTable {
    let mut rng = seeded(seed);
    let rows: Vec<Vec<String>> = (0..n)
        .map(|_| {
            let z: bool = rng.random();
            let copy = |rng: &mut complexnn::rng::Rng| if rng.random::<f64>() < 0.05 { !z } else { z };
            let (a, b) = (copy(&mut rng), copy(&mut rng));
            let c: bool = rng.random();
            let d = rng.random_range(0..3);
            vec![format!("{}", a as u8), format!("{}", b as u8), format!("{}", c as u8), format!("{d}")]
        })
        .collect();
    CategoricalTable::from_labels(["a", "b", "c", "d"].map(String::from).to_vec(), &rows).unwrap()
}

#[test]
fn burt_grand_total_is_n_v_squared() {
    for (seed, n) in [(1, 1), (2, 17), (3, 200)] {
        let t = survey(seed, n);
        let total: f64 = burt_table(&t).matrix.iter().flatten().sum();
        assert_eq!(total, (n * 16) as f64);
        let cdt = disjunctive_table(&t).matrix;
        assert!(cdt.iter().all(|r| r.iter().sum::<f64>() == 4.0));
    }
}

#[test]
fn correlated_categories_share_a_neuron() {
    let lattice = MapLattice::grid(2, 2).unwrap();
    let schedule = NeighborhoodSchedule::default_for(&lattice);
    let mut together = 0;
    for seed in 0..10 {
        let t = survey(100 + seed, 300);
        let map = categorical_som_train(&t, EncodingKind::Burt, &lattice, &schedule, seed).unwrap();
        let at = |label: &str| map.map.assignments[map.row_labels.iter().position(|l| l == label).unwrap()];
        let ok = at("a=1") == at("b=1") && at("a=0") == at("b=0") && at("a=1") != at("a=0");
        println!("seed {seed}: {:?} -> {ok}", map.row_labels.iter().zip(&map.map.assignments).collect::<Vec<_>>());
        together += ok as usize;
    }
    assert!(together >= 9, "linked categories shared a neuron in {together}/10 runs");
}

#[test]
fn cdt_map_groups_individuals_by_trait() {
    let lattice = MapLattice::string(2).unwrap();
    let schedule = NeighborhoodSchedule::default_for(&lattice);
    let t = survey(7, 200);
    let map = categorical_som_train(&t, EncodingKind::Cdt, &lattice, &schedule, 0).unwrap();
    assert_eq!(map.map.assignments.len(), 200);
    let cdt = disjunctive_table(&t).matrix;
    // column 0 is the first category of `a` met in the data
    let agree = (0..200).filter(|&i| (cdt[i][0] == 1.0) == (map.map.assignments[i] == map.map.assignments[0])).count();
    let purity = agree.max(200 - agree) as f64 / 200.0;
    assert!(purity >= 0.85, "trait purity {purity}");
}
