use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skyjo_autodiff::{init, ParamStore, StoreError, Tensor};

fn sample() -> ParamStore {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let mut s = ParamStore::new();
    s.add("embed.value", init::normal(16, 8, 0.02, &mut r), true);
    s.add("ln.gain", Tensor::filled(1, 8, 1.0), false);
    s.add("empty", Tensor::zeros(0, 4), false);
    s
}

#[test]
fn save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = sample();
    let meta = serde_json::json!({"schema_version": 1});
    let m = s.save(dir.path(), meta.clone()).unwrap();
    let (back, m2) = ParamStore::load(dir.path()).unwrap();
    assert_eq!(back, s);
    assert_eq!(m2, m);
    assert_eq!(m2.meta, meta);
    assert_eq!(back.sha256(), s.sha256());
}

#[test]
fn binary_layout_is_length_prefixed_le() {
    let mut s = ParamStore::new();
    s.add("a", Tensor::from_vec(1, 2, vec![1.0, -2.5]), true);
    let b = s.values_bytes();
    assert_eq!(&b[..8], &2u64.to_le_bytes());
    assert_eq!(&b[8..12], &1.0f32.to_le_bytes());
    assert_eq!(&b[12..16], &(-2.5f32).to_le_bytes());
    assert_eq!(b.len(), 16);
}

#[test]
fn corrupt_files_are_rejected() {
    let s = sample();
    let m = s.manifest(serde_json::Value::Null);
    let bytes = s.values_bytes();
    assert!(matches!(ParamStore::from_parts(&m, &bytes[..bytes.len() - 1]), Err(StoreError::Io(_))));
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(matches!(ParamStore::from_parts(&m, &extra), Err(StoreError::Trailing)));
    let mut wrong = m.clone();
    wrong.params[1].shape = [1, 9];
    assert!(matches!(ParamStore::from_parts(&wrong, &bytes), Err(StoreError::Length { .. })));
    let mut fmt = m;
    fmt.version = 99;
    assert!(matches!(ParamStore::from_parts(&fmt, &bytes), Err(StoreError::Format(..))));
}

#[test]
fn hash_changes_with_values() {
    let mut s = sample();
    let h = s.sha256();
    let id = s.find("ln.gain").unwrap();
    s.get_mut(id).data[0] = 1.5;
    assert_ne!(s.sha256(), h);
    assert_eq!(h.len(), 64);
}
