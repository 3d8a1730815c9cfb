use bevbench_corrupt::perturb_extrinsic;
use bevbench_geom::CameraModel;
use bevbench_rng::SampleRng;
use bevbench_sim::FrameData;
use bevbench_tensor::{
    accumulate_param_grads, update_running_stats, AdamConfig, GradTape, ModelRun, ParamStore,
    RunMode, Tensor4,
};

use crate::config::DetectorConfig;
use crate::features::{lift_camera_to_bev, pillarize, stack_batch};
use crate::head::{build_model, DetectorModel};
use crate::loss::detection_loss;
use crate::targets::{encode_targets, Targets};
use crate::DetectorError;

/// The staged learning-rate schedule with optional last-epoch misalignment
/// augmentation. Stage `(e, r)` applies rate `r` from epoch `e` (1-based)
/// until the next stage starts.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub lr_stages: Vec<(usize, f64)>,
    pub batch_size: usize,
    pub augment_last_epoch: bool,
    /// Translation limit in meters for the augmentation noise.
    pub augment_translation: f64,
    /// Rotation limit in radians for the augmentation noise.
    pub augment_rotation: f64,
}

impl TrainSchedule {
    /// Six epochs at 1e-3, stepping down to 1e-4 at epoch 4 and 1e-5 in the
    /// final epoch, batches of four, no augmentation.
    pub fn paper_style() -> Self {
        TrainSchedule {
            epochs: 6,
            lr_stages: vec![(1, 1e-3), (4, 1e-4), (6, 1e-5)],
            batch_size: 4,
            augment_last_epoch: false,
            augment_translation: 0.1,
            augment_rotation: 1.0_f64.to_radians(),
        }
    }

    /// [`Self::paper_style`] with the last-epoch misalignment noise on.
    pub fn augmented() -> Self {
        TrainSchedule {
            augment_last_epoch: true,
            ..Self::paper_style()
        }
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        let invalid = |m: String| Err(DetectorError::InvalidConfig(m));
        if self.epochs == 0 || self.batch_size == 0 {
            return invalid("epochs and batch_size must be positive".into());
        }
        if self.lr_stages.first().map(|s| s.0) != Some(1) {
            return invalid("the first lr stage must start at epoch 1".into());
        }
        for pair in self.lr_stages.windows(2) {
            let ((e0, r0), (e1, r1)) = (pair[0], pair[1]);
            if e1 <= e0 {
                return invalid(format!("lr stage epochs must increase: {e0} then {e1}"));
            }
            if r1 >= r0 {
                return invalid(format!("lr stage rates must decrease: {r0} then {r1}"));
            }
        }
        for (e, r) in &self.lr_stages {
            if *e > self.epochs {
                return invalid(format!("lr stage epoch {e} is past the last epoch"));
            }
            if !(r.is_finite() && *r > 0.0) {
                return invalid(format!("lr rate {r} must be positive and finite"));
            }
        }
        for (name, limit) in [
            ("augment_translation", self.augment_translation),
            ("augment_rotation", self.augment_rotation),
        ] {
            if !(limit.is_finite() && limit >= 0.0) {
                return invalid(format!("{name} must be finite and non-negative, got {limit}"));
            }
        }
        Ok(())
    }

    /// Learning rate in force at `epoch` (1-based).
    pub fn rate_for(&self, epoch: usize) -> f64 {
        self.lr_stages
            .iter()
            .take_while(|(e, _)| *e <= epoch)
            .last()
            .expect("validate pins the first stage to epoch 1")
            .1
    }
}

/// One optimizer step's record.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
}

/// Renders a history as aligned whitespace-separated text with a header
/// line, one row per optimizer step.
pub fn history_text(rows: &[HistoryRow]) -> String {
    let mut out = String::from("epoch step lr loss\n");
    for r in rows {
        out.push_str(&format!("{} {} {:e} {:.12e}\n", r.epoch, r.step, r.lr, r.loss));
    }
    out
}

/// A trained detector: the model description, its parameters (including
/// batch-norm running statistics), and the per-step loss history.
#[derive(Debug, Clone)]
pub struct TrainedDetector {
    pub model: DetectorModel,
    pub store: ParamStore,
    pub history: Vec<HistoryRow>,
}

fn augmented_cameras(
    frame: &FrameData,
    schedule: &TrainSchedule,
    seed: u64,
) -> Result<Vec<CameraModel>, DetectorError> {
    frame
        .cameras
        .iter()
        .enumerate()
        .map(|(i, cam)| {
            let mut rng = SampleRng::new(seed, &frame.key, &format!("augment-cam{i}"));
            let extrinsic = perturb_extrinsic(
                &cam.extrinsic,
                schedule.augment_translation,
                schedule.augment_rotation,
                &mut rng,
            )?;
            Ok(CameraModel {
                extrinsic,
                ..cam.clone()
            })
        })
        .collect()
}

/// Trains a detector with the given fusion variant on the frames. Feature
/// extraction runs once up front (misalignment augmentation re-lifts the
/// camera features of the final epoch only), the model then follows
/// mini-batch Adam under the staged learning rates. Deterministic in
/// `seed`; aborts if the loss stops being finite.
pub fn train(
    frames: &[FrameData],
    config: &DetectorConfig,
    schedule: &TrainSchedule,
    seed: u64,
) -> Result<TrainedDetector, DetectorError> {
    config.validate()?;
    schedule.validate()?;
    if frames.is_empty() {
        return Err(DetectorError::Input("cannot train on zero frames".into()));
    }

    let mut store = ParamStore::new();
    let mut init_rng = SampleRng::new(seed, "detector-init", config.variant.name());
    let model = build_model(config, &mut store, &mut init_rng)?;

    let pillar: Vec<Tensor4> = frames
        .iter()
        .map(|f| pillarize(&f.cloud, &config.grid))
        .collect();
    let camera: Vec<Tensor4> = frames
        .iter()
        .map(|f| {
            lift_camera_to_bev(&f.images, &f.cameras, &config.grid, config.camera_channels())
        })
        .collect::<Result<_, _>>()?;
    let targets: Vec<Targets> = frames
        .iter()
        .map(|f| encode_targets(&f.boxes, &config.grid, &config.anchor))
        .collect();

    let mut history = Vec::new();
    let mut step = 0usize;
    for epoch in 1..=schedule.epochs {
        let lr = schedule.rate_for(epoch);

        let augmented: Option<Vec<Tensor4>> =
            if schedule.augment_last_epoch && epoch == schedule.epochs {
                Some(
                    frames
                        .iter()
                        .map(|f| {
                            let cams = augmented_cameras(f, schedule, seed)?;
                            lift_camera_to_bev(
                                &f.images,
                                &cams,
                                &config.grid,
                                config.camera_channels(),
                            )
                        })
                        .collect::<Result<_, _>>()?,
                )
            } else {
                None
            };
        let epoch_camera = augmented.as_ref().unwrap_or(&camera);

        let mut order: Vec<usize> = (0..frames.len()).collect();
        let mut shuffle_rng = SampleRng::new(seed, "detector-train", &format!("shuffle-{epoch}"));
        for i in (1..order.len()).rev() {
            let j = shuffle_rng.below(i as u64 + 1) as usize;
            order.swap(i, j);
        }

        for batch in order.chunks(schedule.batch_size) {
            let batch_lidar =
                stack_batch(&batch.iter().map(|&i| pillar[i].clone()).collect::<Vec<_>>())?;
            let batch_camera = stack_batch(
                &batch.iter().map(|&i| epoch_camera[i].clone()).collect::<Vec<_>>(),
            )?;
            let batch_targets: Vec<Targets> =
                batch.iter().map(|&i| targets[i].clone()).collect();

            let mut tape = GradTape::new();
            let mut run = ModelRun::new(&mut tape, &store, RunMode::Train);
            let lv = run.tape.leaf(batch_lidar);
            let cv = run.tape.leaf(batch_camera);
            let (obj, reg) = model.forward(&mut run, lv, cv)?;
            let loss = detection_loss(run.tape, obj, reg, &batch_targets)?;
            let trace = run.finish();

            let loss_value = tape.value(loss).data()[0];
            step += 1;
            if !loss_value.is_finite() {
                return Err(DetectorError::Diverged {
                    epoch,
                    step,
                    loss: loss_value,
                });
            }

            let grads = tape.backward(loss)?;
            store.zero_grads();
            accumulate_param_grads(&mut store, &grads, &trace)?;
            store.adam_step(AdamConfig {
                lr,
                ..AdamConfig::default()
            })?;
            update_running_stats(&mut store, &tape, &trace)?;

            history.push(HistoryRow {
                epoch,
                step,
                lr,
                loss: loss_value,
            });
        }
    }

    Ok(TrainedDetector {
        model,
        store,
        history,
    })
}
