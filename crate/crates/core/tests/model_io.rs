mod common;

use lbpe::{load_model, save_model, ModelFile, PieceKind, TrainerConfig};

fn trained() -> lbpe::TokenizerModel {
    let langs = common::languages(2, 300, 8);
    let docs = common::mixed_corpus(&langs, 4_000, 8);
    let cfg = TrainerConfig {
        vocabulary_size: 768,
        ..TrainerConfig::default()
    };
    lbpe::train_bpe(&docs, &cfg).unwrap()
}

#[test]
fn save_load_save_is_byte_identical() {
    let model = trained();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    save_model(&model, &a).unwrap();
    let loaded = load_model(&a).unwrap();
    assert_eq!(loaded, model);
    save_model(&loaded, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let text = "Sta brorts kia, 42 🦀";
    assert_eq!(loaded.encode_ids(text), model.encode_ids(text));
}

#[test]
fn tampered_files_are_rejected() {
    let model = trained();
    let json = model.to_canonical_json().unwrap();

    let mut file = ModelFile::from_json(&json).unwrap();
    file.pieces.swap(0, 1);
    assert!(file.into_model().is_err());

    let mut file = ModelFile::from_json(&json).unwrap();
    file.merges.pop();
    assert!(file.into_model().is_err());

    let mut file = ModelFile::from_json(&json).unwrap();
    file.version = 99;
    assert!(file.into_model().is_err());

    let truncated = &json[..json.len() / 2];
    assert!(ModelFile::from_json(truncated).is_err());
}

#[test]
fn merges_reference_earlier_pieces() {
    let model = trained();
    let vocab = model.vocabulary();
    let regular = vocab.block(PieceKind::Regular);
    for (rank, rule) in model.merges().iter().enumerate() {
        assert_eq!(rule.rank, rank);
        assert_eq!(rule.result, format!("{}{}", rule.left, rule.right));
        assert_eq!(vocab.id_of(&rule.result), Some((regular.start + rank) as u32));
        for operand in [&rule.left, &rule.right] {
            let id = vocab.id_of(operand).unwrap() as usize;
            let kind = vocab.pieces()[id].kind;
            assert!(kind == PieceKind::SingleChar || (kind == PieceKind::Regular && id < regular.start + rank));
        }
    }
}
