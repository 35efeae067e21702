use recscale_core::seed;
use recscale_core::synthgen::{
    background_ctr, build_teacher, sample_stream, FeatureSchema, Sample, SparseTableSpec, Split, TeacherSpec, Zipf,
};
use recscale_core::trainer::normalized_entropy;
use recscale_core::Error;

fn schema() -> FeatureSchema {
    FeatureSchema {
        num_dense: 4,
        tables: vec![
            SparseTableSpec { vocab_size: 500, hots: 1, zipf_exponent: 1.1 },
            SparseTableSpec { vocab_size: 80, hots: 3, zipf_exponent: 0.8 },
            SparseTableSpec { vocab_size: 2000, hots: 1, zipf_exponent: 1.3 },
        ],
    }
}

fn spec(target_ctr: f64, weight_scale: f64) -> TeacherSpec {
    TeacherSpec { seed: 42, target_ctr, weight_scale, test_zipf_shift: 0.0 }
}

#[test]
fn teacher_is_deterministic() {
    let a = build_teacher(&schema(), &spec(0.2, 2.0)).unwrap();
    let b = build_teacher(&schema(), &spec(0.2, 2.0)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.bias().to_bits(), b.bias().to_bits());
}

#[test]
fn invalid_ctr_is_a_config_error() {
    for ctr in [0.0, 1.0, -0.1, f64::NAN] {
        assert!(matches!(build_teacher(&schema(), &spec(ctr, 1.0)), Err(Error::Config { .. })));
    }
}

#[test]
fn zero_weights_label_by_fair_coin() {
    let teacher = build_teacher(&schema(), &spec(0.5, 0.0)).unwrap();
    assert_eq!(teacher.bias(), 0.0);
    let samples = sample_stream(&schema(), &teacher, 7, 20_000).unwrap();
    for s in samples.iter().take(100) {
        assert_eq!(teacher.click_probability(&s.dense, &s.sparse), 0.5);
    }
    let ctr = background_ctr(&samples).unwrap();
    let se = (0.25f64 / 20_000.0).sqrt();
    assert!((ctr - 0.5).abs() < 3.0 * se, "{ctr}");
}

#[test]
fn label_mean_matches_target_ctr() {
    let teacher = build_teacher(&schema(), &spec(0.2, 2.0)).unwrap();
    let n = 100_000;
    let samples = sample_stream(&schema(), &teacher, 11, n).unwrap();
    let ctr = background_ctr(&samples).unwrap();
    let se = (0.2f64 * 0.8 / n as f64).sqrt();
    assert!((ctr - 0.2).abs() < 3.0 * se, "ctr {ctr}, se {se}");
}

#[test]
fn stream_contracts() {
    let teacher = build_teacher(&schema(), &spec(0.3, 1.0)).unwrap();
    assert!(sample_stream(&schema(), &teacher, 1, 0).unwrap().is_empty());
    let long = sample_stream(&schema(), &teacher, 1, 1000).unwrap();
    assert_eq!(long, sample_stream(&schema(), &teacher, 1, 1000).unwrap());
    assert_ne!(long, sample_stream(&schema(), &teacher, 2, 1000).unwrap());
    for k in [1, 17, 256, 999] {
        assert_eq!(&long[..k], &sample_stream(&schema(), &teacher, 1, k).unwrap()[..]);
    }
    for s in &long {
        assert_eq!(s.dense.len(), 4);
        for (indices, t) in s.sparse.iter().zip(&schema().tables) {
            assert_eq!(indices.len(), t.hots as usize);
            assert!(indices.iter().all(|&i| i < t.vocab_size));
        }
    }
}

#[test]
fn train_and_test_streams_differ() {
    let teacher = build_teacher(&schema(), &spec(0.3, 1.0)).unwrap();
    let train: Vec<Sample> = teacher.stream(5, Split::Train).take(50).collect();
    let test: Vec<Sample> = teacher.stream(5, Split::Test).take(50).collect();
    // Same seed, same popularity (no shift): the populations coincide.
    assert_eq!(train, test);
    let shifted = build_teacher(&schema(), &TeacherSpec { test_zipf_shift: 0.5, ..spec(0.3, 1.0) }).unwrap();
    let test: Vec<Sample> = shifted.stream(5, Split::Test).take(50).collect();
    assert_ne!(train, test);
}

#[test]
fn zipf_head_probability() {
    let n = 1000u32;
    let zipf = Zipf::new(n, 1.0);
    let harmonic: f64 = (1..=n).map(|k| 1.0 / k as f64).sum();
    let head = 1.0 / harmonic;
    assert!((zipf.probability(0) - head).abs() < 1e-12);

    let mut rng = seed::rng(77);
    let draws = 1_000_000;
    let hits = (0..draws).filter(|_| zipf.sample(&mut rng) == 0).count();
    let share = hits as f64 / draws as f64;
    assert!((share - head).abs() / head < 0.01, "share {share}, analytic {head}");
}

#[test]
fn background_ctr_examples() {
    let mk = |label| Sample { dense: vec![0.0], sparse: vec![vec![0]], label };
    assert_eq!(background_ctr(&[mk(true), mk(false), mk(true), mk(false)]).unwrap(), 0.5);
    assert_eq!(background_ctr(&vec![mk(true); 4]).unwrap(), 1.0);
    assert!(matches!(background_ctr(&[]), Err(Error::Domain(_))));
}

#[test]
fn labels_are_learnable() {
    let shifted = TeacherSpec { test_zipf_shift: 0.3, ..spec(0.2, 2.0) };
    let teacher = build_teacher(&schema(), &shifted).unwrap();
    let held_out: Vec<Sample> = teacher.stream(123, Split::Test).take(50_000).collect();
    let probs: Vec<f64> = held_out.iter().map(|s| teacher.click_probability(&s.dense, &s.sparse)).collect();
    let labels: Vec<bool> = held_out.iter().map(|s| s.label).collect();
    let ne = normalized_entropy(&probs, &labels).unwrap();
    assert!(ne < 0.95, "{ne}");
}
