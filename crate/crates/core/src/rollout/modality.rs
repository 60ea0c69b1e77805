use rand::Rng;
use serde::{Deserialize, Serialize};

use super::RolloutError;
use crate::frame_cache::GridTHW;
use crate::reward::DataType;
use crate::seed;

/// One linear layer `y = W x + b`, `W` row-major `d_out x d_in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub d_in: usize,
    pub d_out: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Branch {
    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    /// Forward pass that marks every parameter it reads in `touched`.
    fn forward(&self, x: &[f64], touched: &mut [bool]) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.d_out);
        for j in 0..self.d_out {
            let mut acc = -0.0;
            for (i, xi) in x.iter().enumerate() {
                let k = j * self.d_in + i;
                acc += self.weight[k] * xi;
                touched[k] = true;
            }
            acc += self.bias[j];
            touched[self.weight.len() + j] = true;
            y.push(acc);
        }
        y
    }
}

/// Mock vision tower with separate image and video branches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockEncoder {
    pub image: Branch,
    pub video: Branch,
}

impl MockEncoder {
    pub fn random(d_in: usize, d_out: usize, seed_value: u64) -> Self {
        let branch = |stream| {
            let mut rng = seed::rng_for(seed_value, "encoder", stream, 0);
            Branch {
                d_in,
                d_out,
                weight: (0..d_in * d_out).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                bias: (0..d_out).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            }
        };
        Self {
            image: branch(1),
            video: branch(2),
        }
    }

    fn branch(&self, dt: DataType) -> &Branch {
        match dt {
            DataType::Image => &self.image,
            DataType::Video => &self.video,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchItem {
    pub id: String,
    pub data_type: DataType,
    pub features: Vec<f64>,
    pub placeholder_count: usize,
    pub visual_feature_count: usize,
}

impl BatchItem {
    /// Item whose feature count comes from its patch grid.
    pub fn from_grid(
        id: impl Into<String>,
        data_type: DataType,
        features: Vec<f64>,
        placeholder_count: usize,
        grid: GridTHW,
        merge_size: usize,
    ) -> Result<Self, RolloutError> {
        let id = id.into();
        let visual_feature_count = grid.feature_count(merge_size).ok_or_else(|| {
            RolloutError::InvalidInput(format!(
                "sample {id}: grid {}x{}x{} not divisible by merge {merge_size}^2",
                grid.t, grid.h, grid.w
            ))
        })?;
        Ok(Self {
            id,
            data_type,
            features,
            placeholder_count,
            visual_feature_count,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MicroBatch {
    pub items: Vec<BatchItem>,
}

/// Which encoder parameters took part in a forward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participation {
    pub image: Vec<bool>,
    pub video: Vec<bool>,
}

impl Participation {
    fn new(enc: &MockEncoder) -> Self {
        Self {
            image: vec![false; enc.image.param_count()],
            video: vec![false; enc.video.param_count()],
        }
    }

    fn slot(&mut self, dt: DataType) -> &mut [bool] {
        match dt {
            DataType::Image => &mut self.image,
            DataType::Video => &mut self.video,
        }
    }

    pub fn covers_all(&self) -> bool {
        self.image.iter().chain(&self.video).all(|t| *t)
    }

    pub fn touched_fraction(&self) -> f64 {
        let total = self.image.len() + self.video.len();
        let hit = self.image.iter().chain(&self.video).filter(|t| **t).count();
        hit as f64 / total.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardOutput {
    pub outputs: Vec<Vec<f64>>,
    /// Modality that received a zero-valued dummy input, if any.
    pub dummy: Option<DataType>,
    pub participation: Participation,
}

fn check_batch(enc: &MockEncoder, batch: &MicroBatch) -> Result<(), RolloutError> {
    if batch.items.is_empty() {
        return Err(RolloutError::InvalidInput("empty micro-batch".into()));
    }
    for it in &batch.items {
        let want = enc.branch(it.data_type).d_in;
        if it.features.len() != want {
            return Err(RolloutError::InvalidInput(format!(
                "sample {}: {} input features, encoder expects {want}",
                it.id,
                it.features.len()
            )));
        }
    }
    Ok(())
}

/// Plain per-item forward through the matching branch.
pub fn forward_without_dummy(
    enc: &MockEncoder,
    batch: &MicroBatch,
) -> Result<(Vec<Vec<f64>>, Participation), RolloutError> {
    check_batch(enc, batch)?;
    let mut part = Participation::new(enc);
    let outputs = batch
        .items
        .iter()
        .map(|it| enc.branch(it.data_type).forward(&it.features, part.slot(it.data_type)))
        .collect();
    Ok((outputs, part))
}

/// Forward pass in which both branches always participate.
///
/// A single-modality batch runs a zero input through the idle branch and
/// adds its output with weight zero.
pub fn mixed_modality_forward(enc: &MockEncoder, batch: &MicroBatch) -> Result<ForwardOutput, RolloutError> {
    let (mut outputs, mut part) = forward_without_dummy(enc, batch)?;
    let has = |dt| batch.items.iter().any(|it| it.data_type == dt);
    let missing = [DataType::Image, DataType::Video].into_iter().find(|&dt| !has(dt));
    if let Some(dt) = missing {
        let branch = enc.branch(dt);
        let dummy = branch.forward(&vec![0.0; branch.d_in], part.slot(dt));
        for out in &mut outputs {
            for (o, d) in out.iter_mut().zip(dummy.iter().cycle()) {
                // 0 * -|d| is -0.0, and x + -0.0 == x bit for bit, signed zeros included.
                *o += 0.0 * -d.abs();
            }
        }
    }
    Ok(ForwardOutput {
        outputs,
        dummy: missing,
        participation: part,
    })
}

/// Strict check that every sample's placeholder tokens match its visual
/// features. Nothing is truncated or padded.
pub fn validate_placeholder_alignment(batch: &MicroBatch) -> Result<(), RolloutError> {
    for it in &batch.items {
        if it.visual_feature_count == 0 {
            return Err(RolloutError::DegenerateSample { sample_id: it.id.clone() });
        }
        if it.placeholder_count != it.visual_feature_count {
            return Err(RolloutError::PlaceholderMismatch {
                sample_id: it.id.clone(),
                placeholders: it.placeholder_count,
                features: it.visual_feature_count,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn item(id: &str, dt: DataType, x: Vec<f64>) -> BatchItem {
        BatchItem {
            id: id.into(),
            data_type: dt,
            features: x,
            placeholder_count: 4,
            visual_feature_count: 4,
        }
    }

    fn bits(v: &[Vec<f64>]) -> Vec<Vec<u64>> {
        v.iter().map(|r| r.iter().map(|x| x.to_bits()).collect()).collect()
    }

    #[test]
    fn single_modality_batches_touch_everything() {
        let enc = MockEncoder::random(3, 2, 5);
        for dt in [DataType::Video, DataType::Image] {
            let b = MicroBatch { items: vec![item("a", dt, vec![1.0, -2.0, 0.5])] };
            let out = mixed_modality_forward(&enc, &b).unwrap();
            let (plain, part) = forward_without_dummy(&enc, &b).unwrap();
            assert!(!part.covers_all());
            assert!(out.participation.covers_all());
            assert_ne!(out.dummy, Some(dt));
            assert_eq!(bits(&out.outputs), bits(&plain));
        }
    }

    #[test]
    fn mixed_batch_needs_no_dummy() {
        let enc = MockEncoder::random(2, 2, 5);
        let b = MicroBatch {
            items: vec![item("a", DataType::Image, vec![1.0, 2.0]), item("b", DataType::Video, vec![0.0, 1.0])],
        };
        let out = mixed_modality_forward(&enc, &b).unwrap();
        assert_eq!(out.dummy, None);
        assert!(out.participation.covers_all());
    }

    #[test]
    fn negative_zero_survives_dummy_path() {
        let mut enc = MockEncoder::random(1, 1, 0);
        enc.video.weight = vec![1.0];
        enc.video.bias = vec![-0.0];
        enc.image.bias = vec![-3.0];
        let b = MicroBatch { items: vec![item("z", DataType::Video, vec![-0.0])] };
        let out = mixed_modality_forward(&enc, &b).unwrap();
        assert_eq!(out.outputs[0][0].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn alignment_examples() {
        let grid = GridTHW { t: 10, h: 30, w: 42 };
        let ok = BatchItem::from_grid("v", DataType::Video, vec![], 3150, grid, 2).unwrap();
        assert_eq!(ok.visual_feature_count, 3150);
        validate_placeholder_alignment(&MicroBatch { items: vec![ok.clone()] }).unwrap();

        let off = BatchItem { placeholder_count: 3149, ..ok };
        let err = validate_placeholder_alignment(&MicroBatch { items: vec![off] }).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("3149") && msg.contains("3150") && msg.contains('v'), "{msg}");

        let empty = BatchItem::from_grid("e", DataType::Video, vec![], 0, GridTHW { t: 0, h: 30, w: 42 }, 2).unwrap();
        assert!(matches!(
            validate_placeholder_alignment(&MicroBatch { items: vec![empty] }),
            Err(RolloutError::DegenerateSample { .. })
        ));
    }

    proptest! {
        #[test]
        fn dummy_path_is_bitwise_neutral(
            xs in prop::collection::vec(prop::collection::vec(prop_oneof![-1e6f64..1e6, Just(0.0), Just(-0.0)], 4), 1..6),
            video in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let enc = MockEncoder::random(4, 3, seed);
            let dt = if video { DataType::Video } else { DataType::Image };
            let b = MicroBatch {
                items: xs.into_iter().enumerate().map(|(i, x)| item(&i.to_string(), dt, x)).collect(),
            };
            let out = mixed_modality_forward(&enc, &b).unwrap();
            let (plain, _) = forward_without_dummy(&enc, &b).unwrap();
            prop_assert_eq!(bits(&out.outputs), bits(&plain));
            prop_assert!(out.participation.covers_all());
        }
    }
}
