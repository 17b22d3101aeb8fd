use std::time::Instant;

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stancebench_core::prompt::tokenize;
use stancebench_core::StanceLabel;
use stancebench_model::train::{batch_loss, train_step, OptimizerConfig, TrainExample, TrainState};
use stancebench_model::vision::Image;
use stancebench_model::{match_label, ModelConfig, MultimodalModel, VisionConfig};

const TEXTS: [(&str, StanceLabel); 8] = [
    ("a: love the new car\nb: great range", StanceLabel::Favor),
    ("a: the car is ugly\nb: agreed, awful", StanceLabel::Against),
    ("a: what time is it\nb: noon", StanceLabel::None),
    ("a: best buy of my life\nb: so fast", StanceLabel::Favor),
    ("a: recall again, lol\nb: junk", StanceLabel::Against),
    ("a: nice weather today\nb: yes", StanceLabel::None),
    ("a: charging is a breeze\nb: true", StanceLabel::Favor),
    ("a: it broke in a week\nb: refund it", StanceLabel::Against),
];

fn examples(model: &MultimodalModel) -> Vec<TrainExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let size = model.vision.image_size;
    TEXTS
        .iter()
        .map(|(text, label)| {
            let pixels = Array3::from_shape_fn((size, size, 3), |_| rng.gen::<f64>());
            let features = model.image_features(&[Image::new(pixels).unwrap()]).unwrap();
            let gamma_t = tokenize(&format!("[sd]\nb on car?\n{text}")).ids;
            TrainExample::new(tokenize("img:").ids, features, gamma_t, *label)
        })
        .collect()
}

fn accuracy(model: &MultimodalModel, examples: &[TrainExample]) -> usize {
    examples
        .iter()
        .filter(|ex| {
            let text = model.generate(&ex.input(model).unwrap(), 12, true).unwrap();
            let gold = std::str::from_utf8(&ex.answer[..ex.answer.len() - 1].iter().map(|&b| b as u8).collect::<Vec<_>>())
                .unwrap()
                .to_string();
            match_label(&text).matched.as_str() == gold
        })
        .count()
}

#[test]
fn eight_examples_are_memorised() {
    let config = ModelConfig {
        d_v: 64,
        max_len: 256,
        ..Default::default()
    };
    let vision = VisionConfig {
        image_size: 16,
        patch_size: 8,
        ..Default::default()
    };
    let mut model = MultimodalModel::new(config, vision).unwrap();
    let examples = examples(&model);
    let start = Instant::now();
    let mut state = TrainState::new(OptimizerConfig::default());
    let mut reached = None;
    for step in 1..=500 {
        let loss = train_step(&mut model, &examples, &mut state).unwrap();
        if step % 25 == 0 {
            let acc = accuracy(&model, &examples);
            eprintln!("step {step} loss {loss:.4} acc {acc}/8 t={:?}", start.elapsed());
            if acc == examples.len() {
                reached = Some(step);
                break;
            }
        }
    }
    let (loss, _) = batch_loss(&model, &examples, false).unwrap();
    eprintln!("final loss {loss}");
    assert!(reached.is_some());
}
