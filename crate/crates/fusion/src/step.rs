use bevbench_rng::SampleRng;
use bevbench_tensor::{fan_in_uniform, insert_bn_params, ModelRun, ParamStore, Var};

use crate::config::{BranchCombine, FusionConfig, FusionVariant};
use crate::FusionError;

/// One constructed fusion step. Parameters live in the [`ParamStore`] given
/// to [`make_step`] under names prefixed by the variant name, so several
/// steps can share a store without collisions.
#[derive(Debug, Clone)]
pub struct FusionStep {
    variant: FusionVariant,
    config: FusionConfig,
}

fn insert_conv(
    store: &mut ParamStore,
    rng: &mut SampleRng,
    name: &str,
    c_out: usize,
    c_in: usize,
    k: usize,
) -> Result<(), FusionError> {
    let fan_in = c_in * k * k;
    store.insert(
        &format!("{name}.w"),
        fan_in_uniform(rng, [c_out, c_in, k, k], fan_in),
        true,
    )?;
    store.insert(
        &format!("{name}.b"),
        fan_in_uniform(rng, [1, c_out, 1, 1], fan_in),
        true,
    )?;
    Ok(())
}

fn insert_dense(
    store: &mut ParamStore,
    rng: &mut SampleRng,
    name: &str,
    f_out: usize,
    f_in: usize,
) -> Result<(), FusionError> {
    store.insert(
        &format!("{name}.w"),
        fan_in_uniform(rng, [f_out, f_in, 1, 1], f_in),
        true,
    )?;
    store.insert(
        &format!("{name}.b"),
        fan_in_uniform(rng, [1, f_out, 1, 1], f_in),
        true,
    )?;
    Ok(())
}

fn conv_params(c_out: usize, c_in: usize, k: usize) -> usize {
    c_out * c_in * k * k + c_out
}

fn dense_params(f_out: usize, f_in: usize) -> usize {
    f_out * f_in + f_out
}

fn bn_params(channels: usize) -> usize {
    2 * channels
}

/// Validates the per-variant preconditions, registers the variant's
/// parameters in `store` (drawing initial values from `rng` in a fixed
/// order), and returns the ready step.
pub fn make_step(
    variant: FusionVariant,
    config: &FusionConfig,
    store: &mut ParamStore,
    rng: &mut SampleRng,
) -> Result<FusionStep, FusionError> {
    config.validate()?;
    let invalid = |message: String| Err(FusionError::InvalidConfig(message));
    let cin = config.c1 + config.c2;
    let cf = config.c_f;
    let r = config.se_reduction;
    let p = variant.name();

    let needs_reducing_conv = matches!(
        variant,
        FusionVariant::Conv | FusionVariant::ConvEd | FusionVariant::ConvSe | FusionVariant::ConvEdSe
    );
    if needs_reducing_conv && cf >= cin {
        return invalid(format!(
            "fusion convolution must reduce channels: c_f = {cf} >= c1+c2 = {cin}"
        ));
    }
    if matches!(variant, FusionVariant::ConvEd | FusionVariant::ConvEdSe) && cf % 2 != 0 {
        return invalid(format!("c_f = {cf} must be even for the channel funnel"));
    }
    if variant == FusionVariant::ConvSe && cf % r != 0 {
        return invalid(format!("se_reduction {r} must divide c_f = {cf}"));
    }

    match variant {
        FusionVariant::Concat => {}
        FusionVariant::Add => {
            if config.c1 != config.c2 {
                insert_conv(store, rng, &format!("{p}.proj"), config.c1, config.c2, 1)?;
            }
        }
        FusionVariant::Conv => {
            insert_fuse_stage(store, rng, p, config)?;
        }
        FusionVariant::FullyConnected => {
            let f_in = cin * config.h * config.w;
            let f_out = config.fc_hidden;
            let needed = dense_params(f_out, f_in);
            if needed > config.fc_param_budget {
                return Err(FusionError::ParameterBudget {
                    variant: variant.name(),
                    needed,
                    budget: config.fc_param_budget,
                });
            }
            insert_dense(store, rng, &format!("{p}.dense"), f_out, f_in)?;
            insert_bn_params(store, &format!("{p}.bn"), cf)?;
        }
        FusionVariant::ConvEd => {
            insert_fuse_stage(store, rng, p, config)?;
            insert_conv(store, rng, &format!("{p}.ch_enc"), cf / 2, cf, 1)?;
            insert_bn_params(store, &format!("{p}.ch_enc_bn"), cf / 2)?;
            insert_conv(store, rng, &format!("{p}.ch_dec"), cf, cf / 2, 1)?;
            insert_bn_params(store, &format!("{p}.ch_dec_bn"), cf)?;
            insert_conv(store, rng, &format!("{p}.sp"), cf, cf, 3)?;
            insert_bn_params(store, &format!("{p}.sp_bn"), cf)?;
        }
        FusionVariant::ConvSe => {
            insert_fuse_stage(store, rng, p, config)?;
            insert_se(store, rng, p, cf, r)?;
        }
        FusionVariant::ConvEdSe => {
            let se_channels = match config.branch_combine {
                BranchCombine::Concat => 3 * cf,
                BranchCombine::Sum => cf,
            };
            if se_channels % r != 0 {
                return invalid(format!(
                    "se_reduction {r} must divide the combined channels {se_channels}"
                ));
            }
            insert_fuse_stage(store, rng, p, config)?;
            insert_conv(store, rng, &format!("{p}.b1"), cf, cf, 3)?;
            insert_bn_params(store, &format!("{p}.b1_bn"), cf)?;
            insert_conv(store, rng, &format!("{p}.b2"), cf, cf, 3)?;
            insert_bn_params(store, &format!("{p}.b2_bn"), cf)?;
            insert_conv(store, rng, &format!("{p}.b3_enc"), cf / 2, cf, 1)?;
            insert_bn_params(store, &format!("{p}.b3_enc_bn"), cf / 2)?;
            insert_conv(store, rng, &format!("{p}.b3_mid"), cf / 2, cf / 2, 3)?;
            insert_bn_params(store, &format!("{p}.b3_mid_bn"), cf / 2)?;
            insert_conv(store, rng, &format!("{p}.b3_dec"), cf, cf / 2, 1)?;
            insert_bn_params(store, &format!("{p}.b3_dec_bn"), cf)?;
            insert_se(store, rng, p, se_channels, r)?;
            insert_conv(store, rng, &format!("{p}.out"), cf, se_channels, 1)?;
            insert_bn_params(store, &format!("{p}.out_bn"), cf)?;
        }
    }

    Ok(FusionStep {
        variant,
        config: config.clone(),
    })
}

fn insert_fuse_stage(
    store: &mut ParamStore,
    rng: &mut SampleRng,
    prefix: &str,
    config: &FusionConfig,
) -> Result<(), FusionError> {
    insert_conv(
        store,
        rng,
        &format!("{prefix}.fuse"),
        config.c_f,
        config.c1 + config.c2,
        config.kernel,
    )?;
    insert_bn_params(store, &format!("{prefix}.fuse_bn"), config.c_f)?;
    Ok(())
}

fn insert_se(
    store: &mut ParamStore,
    rng: &mut SampleRng,
    prefix: &str,
    channels: usize,
    reduction: usize,
) -> Result<(), FusionError> {
    insert_dense(
        store,
        rng,
        &format!("{prefix}.se_squeeze"),
        channels / reduction,
        channels,
    )?;
    insert_dense(
        store,
        rng,
        &format!("{prefix}.se_excite"),
        channels,
        channels / reduction,
    )?;
    Ok(())
}

impl FusionStep {
    pub fn variant(&self) -> FusionVariant {
        self.variant
    }

    pub fn config(&self) -> &FusionConfig {
        &self.config
    }

    /// Channels of the fused output: `C1 + C2` for concat, `C1` for add
    /// (the sum lives in the LiDAR feature space), `C_f` for every
    /// parameterized variant.
    pub fn out_channels(&self) -> usize {
        match self.variant {
            FusionVariant::Concat => self.config.c1 + self.config.c2,
            FusionVariant::Add => self.config.c1,
            _ => self.config.c_f,
        }
    }

    /// Trainable parameter count, computed in closed form from the config.
    pub fn expected_param_count(&self) -> usize {
        let cfg = &self.config;
        let cin = cfg.c1 + cfg.c2;
        let cf = cfg.c_f;
        let k = cfg.kernel;
        let fuse = conv_params(cf, cin, k) + bn_params(cf);
        match self.variant {
            FusionVariant::Concat => 0,
            FusionVariant::Add => {
                if cfg.c1 == cfg.c2 {
                    0
                } else {
                    conv_params(cfg.c1, cfg.c2, 1)
                }
            }
            FusionVariant::Conv => fuse,
            FusionVariant::FullyConnected => {
                dense_params(cfg.fc_hidden, cin * cfg.h * cfg.w) + bn_params(cf)
            }
            FusionVariant::ConvEd => {
                fuse + conv_params(cf / 2, cf, 1)
                    + bn_params(cf / 2)
                    + conv_params(cf, cf / 2, 1)
                    + bn_params(cf)
                    + conv_params(cf, cf, 3)
                    + bn_params(cf)
            }
            FusionVariant::ConvSe => fuse + se_params(cf, cfg.se_reduction),
            FusionVariant::ConvEdSe => {
                let se_channels = match cfg.branch_combine {
                    BranchCombine::Concat => 3 * cf,
                    BranchCombine::Sum => cf,
                };
                fuse + 2 * (conv_params(cf, cf, 3) + bn_params(cf))
                    + conv_params(cf / 2, cf, 1)
                    + bn_params(cf / 2)
                    + conv_params(cf / 2, cf / 2, 3)
                    + bn_params(cf / 2)
                    + conv_params(cf, cf / 2, 1)
                    + bn_params(cf)
                    + se_params(se_channels, cfg.se_reduction)
                    + conv_params(cf, se_channels, 1)
                    + bn_params(cf)
            }
        }
    }

    /// Runs the step on LiDAR features `l` of shape `(B, C1, H, W)` and
    /// camera features `c` of shape `(B, C2, H, W)`.
    pub fn forward(&self, run: &mut ModelRun, l: Var, c: Var) -> Result<Var, FusionError> {
        self.check_inputs(run, l, c)?;
        let p = self.variant.name();
        match self.variant {
            FusionVariant::Concat => Ok(run.tape.concat_channels(&[l, c])?),
            FusionVariant::Add => {
                let camera = if self.config.c1 == self.config.c2 {
                    c
                } else {
                    let w = run.param(&format!("{p}.proj.w"))?;
                    let b = run.param(&format!("{p}.proj.b"))?;
                    run.tape.conv2d(c, w, b, 1, 0)?
                };
                Ok(run.tape.add(l, camera)?)
            }
            FusionVariant::Conv => self.fuse_stage(run, l, c),
            FusionVariant::FullyConnected => {
                let cfg = &self.config;
                let batch = run.tape.value(l).batch();
                let cat = run.tape.concat_channels(&[l, c])?;
                let f_in = (cfg.c1 + cfg.c2) * cfg.h * cfg.w;
                let flat = run.tape.reshape(cat, [batch, f_in, 1, 1])?;
                let w = run.param(&format!("{p}.dense.w"))?;
                let b = run.param(&format!("{p}.dense.b"))?;
                let dense = run.tape.linear(flat, w, b)?;
                let grid = run
                    .tape
                    .reshape(dense, [batch, cfg.c_f, cfg.h, cfg.w])?;
                let normed = run.batch_norm(grid, &format!("{p}.bn"))?;
                Ok(run.tape.relu(normed))
            }
            FusionVariant::ConvEd => {
                let fused = self.fuse_stage(run, l, c)?;
                let channel = {
                    let w = run.param(&format!("{p}.ch_enc.w"))?;
                    let b = run.param(&format!("{p}.ch_enc.b"))?;
                    let enc = run.tape.conv2d(fused, w, b, 1, 0)?;
                    let enc = run.batch_norm(enc, &format!("{p}.ch_enc_bn"))?;
                    let enc = run.tape.relu(enc);
                    let w = run.param(&format!("{p}.ch_dec.w"))?;
                    let b = run.param(&format!("{p}.ch_dec.b"))?;
                    let dec = run.tape.conv2d(enc, w, b, 1, 0)?;
                    run.batch_norm(dec, &format!("{p}.ch_dec_bn"))?
                };
                let spatial = {
                    let down = run.tape.down2(fused)?;
                    let w = run.param(&format!("{p}.sp.w"))?;
                    let b = run.param(&format!("{p}.sp.b"))?;
                    let conv = run.tape.conv2d(down, w, b, 1, 1)?;
                    let conv = run.batch_norm(conv, &format!("{p}.sp_bn"))?;
                    run.tape.up2(conv)
                };
                Ok(run.tape.add(channel, spatial)?)
            }
            FusionVariant::ConvSe => {
                let fused = self.fuse_stage(run, l, c)?;
                let gate = self.se_gate(run, fused)?;
                Ok(run.tape.mul_channel(fused, gate)?)
            }
            FusionVariant::ConvEdSe => {
                let fused = self.fuse_stage(run, l, c)?;
                let b1 = {
                    let w = run.param(&format!("{p}.b1.w"))?;
                    let b = run.param(&format!("{p}.b1.b"))?;
                    let conv = run.tape.conv2d(fused, w, b, 1, 1)?;
                    run.batch_norm(conv, &format!("{p}.b1_bn"))?
                };
                let b2 = {
                    let down = run.tape.down2(fused)?;
                    let w = run.param(&format!("{p}.b2.w"))?;
                    let b = run.param(&format!("{p}.b2.b"))?;
                    let conv = run.tape.conv2d(down, w, b, 1, 1)?;
                    let conv = run.batch_norm(conv, &format!("{p}.b2_bn"))?;
                    run.tape.up2(conv)
                };
                let b3 = {
                    let down = run.tape.down2(fused)?;
                    let w = run.param(&format!("{p}.b3_enc.w"))?;
                    let b = run.param(&format!("{p}.b3_enc.b"))?;
                    let enc = run.tape.conv2d(down, w, b, 1, 0)?;
                    let enc = run.batch_norm(enc, &format!("{p}.b3_enc_bn"))?;
                    let enc = run.tape.relu(enc);
                    let w = run.param(&format!("{p}.b3_mid.w"))?;
                    let b = run.param(&format!("{p}.b3_mid.b"))?;
                    let mid = run.tape.conv2d(enc, w, b, 1, 1)?;
                    let mid = run.batch_norm(mid, &format!("{p}.b3_mid_bn"))?;
                    let mid = run.tape.relu(mid);
                    let w = run.param(&format!("{p}.b3_dec.w"))?;
                    let b = run.param(&format!("{p}.b3_dec.b"))?;
                    let dec = run.tape.conv2d(mid, w, b, 1, 0)?;
                    let dec = run.batch_norm(dec, &format!("{p}.b3_dec_bn"))?;
                    run.tape.up2(dec)
                };
                let combined = match self.config.branch_combine {
                    BranchCombine::Concat => run.tape.concat_channels(&[b1, b2, b3])?,
                    BranchCombine::Sum => {
                        let partial = run.tape.add(b1, b2)?;
                        run.tape.add(partial, b3)?
                    }
                };
                let gate = self.se_gate(run, combined)?;
                let gated = run.tape.mul_channel(combined, gate)?;
                let w = run.param(&format!("{p}.out.w"))?;
                let b = run.param(&format!("{p}.out.b"))?;
                let out = run.tape.conv2d(gated, w, b, 1, 0)?;
                let out = run.batch_norm(out, &format!("{p}.out_bn"))?;
                Ok(run.tape.relu(out))
            }
        }
    }

    /// concat -> channel-reducing conv -> batch norm -> relu, the shared
    /// front half of every convolutional variant.
    fn fuse_stage(&self, run: &mut ModelRun, l: Var, c: Var) -> Result<Var, FusionError> {
        let p = self.variant.name();
        let cat = run.tape.concat_channels(&[l, c])?;
        let w = run.param(&format!("{p}.fuse.w"))?;
        let b = run.param(&format!("{p}.fuse.b"))?;
        let conv = run
            .tape
            .conv2d(cat, w, b, 1, (self.config.kernel - 1) / 2)?;
        let normed = run.batch_norm(conv, &format!("{p}.fuse_bn"))?;
        Ok(run.tape.relu(normed))
    }

    /// Squeeze-and-excitation gate over the channels of `x`:
    /// global average pool, bottleneck dense pair, sigmoid. The gate is
    /// strictly inside (0, 1) because it is a sigmoid output.
    fn se_gate(&self, run: &mut ModelRun, x: Var) -> Result<Var, FusionError> {
        let p = self.variant.name();
        let pooled = run.tape.global_avg_pool(x);
        let w = run.param(&format!("{p}.se_squeeze.w"))?;
        let b = run.param(&format!("{p}.se_squeeze.b"))?;
        let squeezed = run.tape.linear(pooled, w, b)?;
        let squeezed = run.tape.relu(squeezed);
        let w = run.param(&format!("{p}.se_excite.w"))?;
        let b = run.param(&format!("{p}.se_excite.b"))?;
        let excited = run.tape.linear(squeezed, w, b)?;
        Ok(run.tape.sigmoid(excited))
    }

    fn check_inputs(&self, run: &ModelRun, l: Var, c: Var) -> Result<(), FusionError> {
        let ls = run.tape.value(l).shape();
        let cs = run.tape.value(c).shape();
        let cfg = &self.config;
        if ls[1] != cfg.c1 || ls[2] != cfg.h || ls[3] != cfg.w {
            return Err(FusionError::Input(format!(
                "LiDAR features {ls:?} do not match config ({}, {}, {})",
                cfg.c1, cfg.h, cfg.w
            )));
        }
        if cs != [ls[0], cfg.c2, cfg.h, cfg.w] {
            return Err(FusionError::Input(format!(
                "camera features {cs:?} do not match config ({}, {}, {}, {})",
                ls[0], cfg.c2, cfg.h, cfg.w
            )));
        }
        Ok(())
    }
}

fn se_params(channels: usize, reduction: usize) -> usize {
    dense_params(channels / reduction, channels) + dense_params(channels, channels / reduction)
}
