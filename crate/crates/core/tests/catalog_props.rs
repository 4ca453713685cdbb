use meco_core::catalog::{NewServiceDistribution, Service, ServiceCatalog};
use meco_core::ServiceId;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn catalog_from(weights: &[f64]) -> ServiceCatalog {
    let total: f64 = weights.iter().sum();
    let services = weights
        .iter()
        .enumerate()
        .map(|(i, w)| Service::new(format!("s{i}"), w / total, [format!("m{i}")]))
        .collect();
    ServiceCatalog::new(services, 0.0).unwrap()
}

fn weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, 1..8)
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]
    #[test]
    fn pushes_keep_popularity_normalized(w in weights(), pushes in prop::collection::vec(1e-6f64..0.9, 0..40)) {
        let mut cat = catalog_from(&w);
        for (i, p) in pushes.iter().enumerate() {
            cat = cat.push_service(Service::new(format!("n{i}"), *p, [format!("nm{i}")])).unwrap();
        }
        let sum: f64 = cat.services().iter().map(|s| s.popularity).sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn hit_rate_monotone_under_inclusion(w in weights(), a in prop::collection::vec(any::<bool>(), 8), b in prop::collection::vec(any::<bool>(), 8)) {
        let cat = catalog_from(&w);
        let ids: Vec<ServiceId> = cat.services().iter().map(|s| s.id.clone()).collect();
        let small: Vec<&ServiceId> = ids.iter().zip(&a).filter(|(_, &x)| x).map(|(id, _)| id).collect();
        let large: Vec<&ServiceId> = ids.iter().zip(a.iter().zip(&b)).filter(|(_, (&x, &y))| x || y).map(|(id, _)| id).collect();
        prop_assert!(cat.hit_rate(small).unwrap() <= cat.hit_rate(large).unwrap() + 1e-15);
    }

    #[test]
    fn cached_minus_uncached_is_new_popularity(w in weights(), mask in prop::collection::vec(any::<bool>(), 8), p in 1e-6f64..0.999) {
        let cat = catalog_from(&w);
        let deployed: Vec<ServiceId> = cat.services().iter().zip(&mask).filter(|(_, &x)| x).map(|(s, _)| s.id.clone()).collect();
        let new = Service::new("new", p, ["nm"]);
        let cached = cat.hit_rate_after_push(&deployed, &new, true).unwrap();
        let uncached = cat.hit_rate_after_push(&deployed, &new, false).unwrap();
        prop_assert!(((cached - uncached) - p).abs() <= 1e-12);
        let pushed = cat.push_service(new).unwrap();
        prop_assert!((pushed.hit_rate(&deployed).unwrap() - uncached).abs() <= 1e-12);
    }

    #[test]
    fn push_preserves_relative_order(w in weights(), p in 1e-6f64..0.999) {
        let cat = catalog_from(&w);
        let pushed = cat.push_service(Service::new("new", p, ["nm"])).unwrap();
        let n = cat.len();
        for i in 0..n {
            let expected = cat.services()[i].popularity * (1.0 - p);
            prop_assert!((pushed.services()[i].popularity - expected).abs() <= 1e-15);
            for j in 0..n {
                if cat.services()[i].popularity < cat.services()[j].popularity {
                    prop_assert!(pushed.services()[i].popularity <= pushed.services()[j].popularity);
                }
            }
        }
    }
}

#[test]
fn new_service_frequencies_follow_indicator_distribution() {
    let dist = NewServiceDistribution::new(vec![0.2, 0.4], 0.5, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let draws = 100_000;
    let (mut absent, mut low, mut high) = (0, 0, 0);
    for _ in 0..draws {
        match dist.sample(&mut rng).unwrap() {
            None => absent += 1,
            Some(g) if g == 0.2 => low += 1,
            Some(g) if g == 0.4 => high += 1,
            Some(g) => panic!("unexpected popularity {g}"),
        }
    }
    let f = |c: i32| c as f64 / draws as f64;
    assert!((f(absent) - 0.5).abs() <= 0.01, "absent {}", f(absent));
    assert!((f(low) - 0.25).abs() <= 0.01, "0.2 drawn {}", f(low));
    assert!((f(high) - 0.25).abs() <= 0.01, "0.4 drawn {}", f(high));
}

#[test]
fn five_pushes_of_a_tenth_stay_normalized() {
    let mut cat = catalog_from(&[0.5, 0.3, 0.2]);
    for i in 0..5 {
        cat = cat.push_service(Service::new(format!("n{i}"), 0.1, [format!("x{i}")])).unwrap();
    }
    let mut total = 0.0;
    for s in cat.services() {
        total += s.popularity;
    }
    assert!((total - 1.0).abs() <= 1e-9);
}
