use std::collections::BTreeMap;

use rand::seq::index::sample;

use super::{DatasetError, DatasetManifest};
use crate::rng::stream_rng;
use crate::taxonomy::PreShape;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochSample {
    pub epoch: u64,
    /// Selected seq_ids per class, in manifest order.
    pub per_class: BTreeMap<PreShape, Vec<String>>,
}

impl EpochSample {
    pub fn len(&self) -> usize {
        self.per_class.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Downsamples every grasping class to the minority-class size, without
/// replacement. Deterministic in `(manifest, epoch, seed)`; epoch `e` draws
/// from stream `e` of `seed`.
pub fn balance_epoch(manifest: &DatasetManifest, epoch: u64, seed: u64) -> Result<EpochSample, DatasetError> {
    let mut by_class: BTreeMap<PreShape, Vec<&str>> = BTreeMap::new();
    for row in &manifest.rows {
        by_class.entry(row.pre_shape).or_default().push(&row.seq_id);
    }
    if let Some(missing) = PreShape::GRASPING.iter().find(|c| !by_class.contains_key(c)) {
        return Err(DatasetError::Invalid(format!("class {missing} has no sequences")));
    }
    let minority = PreShape::GRASPING.iter().map(|c| by_class[c].len()).min().expect("four classes");
    let mut rng = stream_rng(seed, epoch);
    let per_class = PreShape::GRASPING
        .iter()
        .map(|c| {
            let ids = &by_class[c];
            let mut picked = sample(&mut rng, ids.len(), minority).into_vec();
            picked.sort_unstable();
            (*c, picked.into_iter().map(|i| ids[i].to_string()).collect())
        })
        .collect();
    Ok(EpochSample { epoch, per_class })
}
