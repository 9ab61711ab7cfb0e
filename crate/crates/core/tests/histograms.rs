mod common;

use metaplastic::bnn::Network;
use metaplastic::metaplastic::{TrainConfig, Trainer};
use metaplastic::numerics::SeededRng;
use metaplastic::probe::{export_histogram, network_histogram, write_histograms_csv};

fn net() -> Network {
    Network::binarized(&[20, 30, 4], 0.1, &mut SeededRng::new(8)).unwrap()
}

#[test]
fn counts_cover_every_weight() {
    let n = net();
    let hs = export_histogram(&n, 25).unwrap();
    assert_eq!(hs.len(), 2);
    for (h, l) in hs.iter().zip(n.layers()) {
        assert_eq!(h.counts.iter().sum::<usize>(), l.hidden.len());
        let min = l
            .hidden
            .data()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let max = l
            .hidden
            .data()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((h.lo, h.hi), (min, max));
    }
    assert_eq!(
        network_histogram(&n, 25)
            .unwrap()
            .counts
            .iter()
            .sum::<usize>(),
        20 * 30 + 30 * 4
    );
    assert!(export_histogram(&n, 9).is_err());
}

#[test]
fn metaplastic_training_widens_the_distribution() {
    let fresh = net();
    let data = common::toy_separable(400, 20, 4, 1);
    let mut t = Trainer::new(fresh.clone(), TrainConfig::new(1.35, 0.01, 20).unwrap()).unwrap();
    let mut rng = SeededRng::new(0);
    for e in 0..10 {
        t.train_epoch(&data, e, &mut rng).unwrap();
    }
    let before = network_histogram(&fresh, 40).unwrap();
    let after = network_histogram(t.network(), 40).unwrap();
    assert_eq!(before.mass_beyond(0.5), 0);
    assert!(after.mass_beyond(0.5) > 0);
    assert!(after.hi - after.lo > before.hi - before.lo);
}

#[test]
fn csv_has_one_row_per_bin() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("h.csv");
    write_histograms_csv(
        &export_histogram(&net(), 10).unwrap(),
        &p,
        Some("config_hash=abc"),
    )
    .unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# config_hash=abc");
    assert_eq!(lines[1], "layer,bin_lo,bin_hi,count");
    assert_eq!(lines.len(), 2 + 20);
}
