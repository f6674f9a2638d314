use lingprobe::embio::{decode_embeddings, write_embeddings_to, HEADER_LEN};

/// Builds a file image field by field, the way an independent writer would.
fn hand_built(ids: &[&str], layers: &[Vec<Vec<f32>>]) -> Vec<u8> {
    let dim = layers[0][0].len();
    let mut b = Vec::new();
    b.extend_from_slice(b"LPEM");
    for v in [1u32, layers.len() as u32, ids.len() as u32, dim as u32] {
        b.extend_from_slice(&v.to_le_bytes());
    }
    for id in ids {
        b.extend_from_slice(&(id.len() as u16).to_le_bytes());
        b.extend_from_slice(id.as_bytes());
    }
    for layer in layers {
        for row in layer {
            for v in row {
                b.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    b
}

fn sample() -> (Vec<&'static str>, Vec<Vec<Vec<f32>>>) {
    let ids = vec!["u1", "utt-ä2", "u3"];
    let layers = (0..2)
        .map(|l| {
            (0..3)
                .map(|r| (0..4).map(|d| (l * 100 + r * 10 + d) as f32 * 0.5 - 3.0).collect())
                .collect()
        })
        .collect();
    (ids, layers)
}

#[test]
fn reads_a_hand_built_file() {
    let (ids, layers) = sample();
    let bytes = hand_built(&ids, &layers);
    let store = decode_embeddings(&bytes).unwrap();
    assert_eq!((store.n_layers(), store.n_rows(), store.dim()), (2, 3, 4));
    assert_eq!(store.ids(), ["u1", "utt-ä2", "u3"]);
    for (l, layer) in layers.iter().enumerate() {
        for (r, row) in layer.iter().enumerate() {
            assert_eq!(store.row(l + 1, r), row.as_slice());
        }
    }
}

#[test]
fn writes_the_same_bytes_back() {
    let (ids, layers) = sample();
    let bytes = hand_built(&ids, &layers);
    let mut out = Vec::new();
    write_embeddings_to(&decode_embeddings(&bytes).unwrap(), &mut out).unwrap();
    assert_eq!(out, bytes);
}

#[test]
fn header_is_twenty_bytes() {
    let (ids, layers) = sample();
    let bytes = hand_built(&ids, &layers);
    let id_block: usize = ids.iter().map(|s| 2 + s.len()).sum();
    assert_eq!(bytes.len(), HEADER_LEN + id_block + 2 * 3 * 4 * 4);
    assert_eq!(HEADER_LEN, 20);
}

#[test]
fn rejects_damaged_files() {
    let (ids, layers) = sample();
    let bytes = hand_built(&ids, &layers);
    assert!(decode_embeddings(&bytes[..bytes.len() - 1]).is_err());
    assert!(decode_embeddings(&bytes[..10]).is_err());
    let mut extra = bytes.clone();
    extra.extend_from_slice(&[0; 4]);
    assert!(decode_embeddings(&extra).is_err());
    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(decode_embeddings(&magic).is_err());
    let mut version = bytes.clone();
    version[4] = 2;
    assert!(decode_embeddings(&version).is_err());
    let mut dup = hand_built(&["a", "a"], &[vec![vec![0.0], vec![1.0]]]);
    assert!(decode_embeddings(&dup).is_err());
    dup = hand_built(&["a", "b"], &[vec![vec![0.0], vec![1.0]]]);
    assert!(decode_embeddings(&dup).is_ok());
}
