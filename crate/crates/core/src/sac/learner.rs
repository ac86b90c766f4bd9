use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::SacConfig;
use super::update::{
    action_noise, actor_objective, critic_loss, critic_target, soft_update, Batch, Temperature,
};
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig, Checkpoint, InputShape, Network, NetworkSpec};
use crate::regularizers::RegConfig;
use crate::transforms::TransformSuite;

pub const POLICY: &str = "policy";
pub const Q1: &str = "q1";
pub const Q2: &str = "q2";
pub const Q1_TARGET: &str = "q1_target";
pub const Q2_TARGET: &str = "q2_target";
pub const LOG_ALPHA: &str = "log_alpha";

/// Statistics from one gradient update.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
    pub l_t: f64,
    pub l_s: f64,
    pub lambda_ir: f64,
}

/// Networks, optimizers and temperature; the single owner of parameters.
#[derive(Debug, Clone)]
pub struct Learner {
    pub policy: Network<f32>,
    pub q1: Network<f32>,
    pub q2: Network<f32>,
    pub q1_target: Network<f32>,
    pub q2_target: Network<f32>,
    policy_opt: Adam<f32>,
    q1_opt: Adam<f32>,
    q2_opt: Adam<f32>,
    pub temperature: Temperature,
    cfg: SacConfig,
    reg: RegConfig,
    suite: TransformSuite,
    updates: u64,
}

impl Learner {
    pub fn new<R: Rng + ?Sized>(
        input: InputShape,
        cfg: SacConfig,
        reg: RegConfig,
        suite: TransformSuite,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        reg.validate()?;
        let policy = Network::init(NetworkSpec::policy(input), rng)?;
        let q1 = Network::init(NetworkSpec::critic(input), rng)?;
        let q2 = Network::init(NetworkSpec::critic(input), rng)?;
        Self::from_networks(policy, q1, q2, cfg, reg, suite)
    }

    pub fn from_networks(
        policy: Network<f32>,
        q1: Network<f32>,
        q2: Network<f32>,
        cfg: SacConfig,
        reg: RegConfig,
        suite: TransformSuite,
    ) -> Result<Self> {
        let adam = AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        };
        Ok(Self {
            policy_opt: Adam::new(adam, policy.params()),
            q1_opt: Adam::new(adam, q1.params()),
            q2_opt: Adam::new(adam, q2.params()),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            policy,
            q1,
            q2,
            temperature: Temperature::new(cfg.alpha_init)?,
            cfg,
            reg,
            suite,
            updates: 0,
        })
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn alpha(&self) -> f64 {
        self.temperature.alpha()
    }

    pub fn config(&self) -> &SacConfig {
        &self.cfg
    }

    /// Critic step, actor step, temperature step, then target blending.
    pub fn update<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &mut self,
        batch: &Batch<f32>,
        rng: &mut R1,
        reg_rng: &mut R2,
    ) -> Result<UpdateStats> {
        let n = batch.len();
        let alpha = self.temperature.alpha() as f32;

        let target_noise = action_noise::<f32, _>(n, rng);
        let targets = critic_target(
            batch,
            &self.policy,
            &self.q1_target,
            &self.q2_target,
            alpha,
            self.cfg.gamma as f32,
            &target_noise,
        )?;
        let (l1, g1) = critic_loss(&self.q1, batch, &targets)?;
        let (l2, g2) = critic_loss(&self.q2, batch, &targets)?;
        let critic = 0.5 * (l1 + l2);
        if !critic.is_finite() {
            return Err(Error::numeric(format!("critic loss is {critic}")));
        }
        self.q1_opt.step(self.q1.params_mut(), &g1)?;
        self.q2_opt.step(self.q2.params_mut(), &g2)?;

        let actor_noise = action_noise::<f32, _>(n, rng);
        let actor = actor_objective(
            batch,
            &self.policy,
            &self.q1,
            &self.q2,
            alpha,
            &self.reg,
            &self.suite,
            &actor_noise,
            reg_rng,
        )?;
        if !actor.loss.is_finite() || !actor.grad.all_finite() {
            return Err(Error::numeric(format!("actor loss is {}", actor.loss)));
        }
        self.policy_opt.step(self.policy.params_mut(), &actor.grad)?;

        let alpha = self
            .temperature
            .update(actor.mean_log_prob, self.cfg.target_entropy, self.cfg.lr);
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::numeric(format!("alpha became {alpha}")));
        }

        let tau = self.cfg.tau as f32;
        soft_update(&mut self.q1_target, &self.q1, tau)?;
        soft_update(&mut self.q2_target, &self.q2, tau)?;
        self.updates += 1;
        Ok(UpdateStats {
            critic_loss: critic,
            actor_loss: actor.loss,
            alpha,
            l_t: actor.penalty.l_t,
            l_s: actor.penalty.l_s,
            lambda_ir: actor.penalty.lambda_ir_mean,
        })
    }

    pub fn checkpoint(&self, step: u64, config_hash: &str, compat_hash: &str) -> Checkpoint {
        let mut scalars = BTreeMap::new();
        scalars.insert(LOG_ALPHA.to_string(), self.temperature.log_alpha);
        scalars.insert("updates".to_string(), self.updates as f64);
        Checkpoint {
            step,
            config_hash: config_hash.to_string(),
            compat_hash: compat_hash.to_string(),
            scalars,
            networks: vec![
                (POLICY.into(), self.policy.clone()),
                (Q1.into(), self.q1.clone()),
                (Q2.into(), self.q2.clone()),
                (Q1_TARGET.into(), self.q1_target.clone()),
                (Q2_TARGET.into(), self.q2_target.clone()),
            ],
        }
    }
}
