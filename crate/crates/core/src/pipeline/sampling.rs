//! Balanced training-pixel sampling for the shadow and tissue classifiers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::boost::{RowSource, TrainingSet};
use crate::error::Result;
use crate::features::FeatureStack;
use crate::imagecore::{Label, LabelMap};

fn draw(rng: &mut ChaCha8Rng, pool: &[usize], k: usize) -> Vec<usize> {
    let mut picked: Vec<usize> = rand::seq::index::sample(rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    picked.sort_unstable();
    picked
}

fn push_rows(ts: &mut TrainingSet, stack: &FeatureStack, image: usize, pixels: &[usize], label: u8) -> Result<()> {
    let w = stack.width();
    for &i in pixels {
        let (row, col) = (i / w, i % w);
        ts.push(&stack.pixel(row, col), label, RowSource { image, row, col })?;
    }
    Ok(())
}

/// Draw up to `per_image / 2` positives and as many negatives from one image.
///
/// Shadow classifier: positives S, negatives T and B. Tissue classifier: positives T,
/// negatives S and B. An image lacking either side contributes nothing to that classifier.
pub fn sample_image(
    image: usize,
    stack: &FeatureStack,
    lm: &LabelMap,
    per_image: usize,
    seed: u64,
) -> Result<(TrainingSet, TrainingSet)> {
    let mut shadow = TrainingSet::for_stack(stack);
    let mut tissue = TrainingSet::for_stack(stack);
    if lm.width() != stack.width() || lm.height() != stack.height() {
        return Err(crate::error::Error::dims(
            format!("{}x{}", stack.width(), stack.height()),
            format!("{}x{}", lm.width(), lm.height()),
        ));
    }
    for (k, (target, ts)) in [(Label::Shadow, &mut shadow), (Label::Tissue, &mut tissue)].into_iter().enumerate() {
        let (pos, neg): (Vec<usize>, Vec<usize>) = (0..lm.labels().len()).partition(|&i| lm.labels()[i] == target);
        if pos.is_empty() || neg.is_empty() {
            log::warn!("image {image}: no {} pixels for the {target:?} classifier, skipped", if pos.is_empty() { "positive" } else { "negative" });
            continue;
        }
        let n = (per_image / 2).min(pos.len()).min(neg.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2 * image as u64 + k as u64);
        let p = draw(&mut rng, &pos, n);
        let q = draw(&mut rng, &neg, n);
        push_rows(ts, stack, image, &p, 1)?;
        push_rows(ts, stack, image, &q, 0)?;
    }
    Ok((shadow, tissue))
}

/// Pool the per-image samples of `(image id, stack, label map)` triples.
pub fn sample_training_pixels(
    items: &[(usize, &FeatureStack, &LabelMap)],
    per_image: usize,
    seed: u64,
) -> Result<(TrainingSet, TrainingSet)> {
    let first = items.first().ok_or_else(|| crate::error::Error::invalid("no images to sample"))?;
    let mut shadow = TrainingSet::for_stack(first.1);
    let mut tissue = TrainingSet::for_stack(first.1);
    for &(id, stack, lm) in items {
        let (s, t) = sample_image(id, stack, lm, per_image, seed)?;
        shadow.extend(&s)?;
        tissue.extend(&t)?;
    }
    Ok((shadow, tissue))
}
