use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use crate::rouge::RewardConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaSchedule {
    /// Linear from 0 to `eta_max` over the transfer steps.
    Ramp,
    /// `eta_max` throughout.
    Constant,
}

impl FromStr for EtaSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ramp" => Ok(EtaSchedule::Ramp),
            "constant" => Ok(EtaSchedule::Constant),
            other => Err(Error::Invalid(format!("unknown eta schedule `{other}`"))),
        }
    }
}

impl fmt::Display for EtaSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EtaSchedule::Ramp => "ramp",
            EtaSchedule::Constant => "constant",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub hidden: usize,
    pub emb: usize,
    pub max_enc: usize,
    pub max_dec: usize,
    pub vocab_k: usize,
    pub gamma0_pretrain: f64,
    pub gamma0_rl: f64,
    pub epochs_pretrain: usize,
    pub epochs_transfer: usize,
    pub epochs_coverage: usize,
    pub beam: usize,
    pub zeta_clip: f64,
    pub eta_schedule: EtaSchedule,
    pub eta_max: f64,
    pub coverage_lambda: f64,
    pub seed: u64,
    pub pointer: bool,
    pub reward: RewardConfig,
    pub grad_clip: f64,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 48,
            hidden: 256,
            emb: 128,
            max_enc: 400,
            max_dec: 100,
            vocab_k: 50_000,
            gamma0_pretrain: 0.15,
            gamma0_rl: 0.001,
            epochs_pretrain: 15,
            epochs_transfer: 10,
            epochs_coverage: 2,
            beam: 4,
            zeta_clip: 1.0,
            eta_schedule: EtaSchedule::Ramp,
            eta_max: 1.0,
            coverage_lambda: 1.0,
            seed: 0,
            pointer: true,
            reward: RewardConfig::default(),
            grad_clip: 2.0,
            init_scale: 0.02,
        }
    }
}

pub const KEYS: [&str; 21] = [
    "batch_size",
    "hidden",
    "emb",
    "max_enc",
    "max_dec",
    "vocab_k",
    "gamma0_pretrain",
    "gamma0_rl",
    "epochs_pretrain",
    "epochs_transfer",
    "epochs_coverage",
    "beam",
    "zeta_clip",
    "eta_schedule",
    "eta_max",
    "coverage_lambda",
    "seed",
    "pointer",
    "reward",
    "grad_clip",
    "init_scale",
];

fn num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config {
        line,
        msg: format!("bad value `{v}` for `{key}`"),
    })
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size),
            ("hidden", self.hidden),
            ("emb", self.emb),
            ("max_enc", self.max_enc),
            ("max_dec", self.max_dec),
            ("vocab_k", self.vocab_k),
            ("epochs_pretrain", self.epochs_pretrain),
            ("epochs_transfer", self.epochs_transfer),
            ("beam", self.beam),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(Error::Invalid(format!("`{k}` must be positive")));
            }
        }
        let rates = [
            ("gamma0_pretrain", self.gamma0_pretrain),
            ("gamma0_rl", self.gamma0_rl),
            ("grad_clip", self.grad_clip),
            ("init_scale", self.init_scale),
        ];
        for (k, v) in rates {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!("`{k}` must be positive, got {v}")));
            }
        }
        if !(self.zeta_clip > 0.0 && self.zeta_clip <= 1.0) {
            return Err(Error::Invalid(format!(
                "zeta_clip {} outside (0, 1]",
                self.zeta_clip
            )));
        }
        if !(0.0..=1.0).contains(&self.eta_max) {
            return Err(Error::Invalid(format!(
                "eta_max {} outside [0, 1]",
                self.eta_max
            )));
        }
        if !(self.coverage_lambda >= 0.0 && self.coverage_lambda.is_finite()) {
            return Err(Error::Invalid(format!(
                "coverage_lambda {}",
                self.coverage_lambda
            )));
        }
        Ok(())
    }

    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<()> {
        match key {
            "batch_size" => self.batch_size = num(line, key, v)?,
            "hidden" => self.hidden = num(line, key, v)?,
            "emb" => self.emb = num(line, key, v)?,
            "max_enc" => self.max_enc = num(line, key, v)?,
            "max_dec" => self.max_dec = num(line, key, v)?,
            "vocab_k" => self.vocab_k = num(line, key, v)?,
            "gamma0_pretrain" => self.gamma0_pretrain = num(line, key, v)?,
            "gamma0_rl" => self.gamma0_rl = num(line, key, v)?,
            "epochs_pretrain" => self.epochs_pretrain = num(line, key, v)?,
            "epochs_transfer" => self.epochs_transfer = num(line, key, v)?,
            "epochs_coverage" => self.epochs_coverage = num(line, key, v)?,
            "beam" => self.beam = num(line, key, v)?,
            "zeta_clip" => self.zeta_clip = num(line, key, v)?,
            "eta_schedule" => {
                self.eta_schedule = v.parse().map_err(|e: Error| Error::Config {
                    line,
                    msg: e.to_string(),
                })?
            }
            "eta_max" => self.eta_max = num(line, key, v)?,
            "coverage_lambda" => self.coverage_lambda = num(line, key, v)?,
            "seed" => self.seed = num(line, key, v)?,
            "pointer" => self.pointer = num(line, key, v)?,
            "reward" => {
                self.reward = v.parse().map_err(|e: Error| Error::Config {
                    line,
                    msg: e.to_string(),
                })?
            }
            "grad_clip" => self.grad_clip = num(line, key, v)?,
            "init_scale" => self.init_scale = num(line, key, v)?,
            other => {
                return Err(Error::Config {
                    line,
                    msg: format!("unknown key `{other}`"),
                })
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. Blank lines and `#`
    /// comments are ignored; unknown and repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        let mut seen = [false; KEYS.len()];
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                msg: String::from("expected `key = value`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let slot = KEYS
                .iter()
                .position(|k| *k == key)
                .ok_or_else(|| Error::Config {
                    line,
                    msg: format!("unknown key `{key}`"),
                })?;
            if seen[slot] {
                return Err(Error::Config {
                    line,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            seen[slot] = true;
            cfg.set(line, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every key, one per line, in [`KEYS`] order.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let v = match key {
                "batch_size" => self.batch_size.to_string(),
                "hidden" => self.hidden.to_string(),
                "emb" => self.emb.to_string(),
                "max_enc" => self.max_enc.to_string(),
                "max_dec" => self.max_dec.to_string(),
                "vocab_k" => self.vocab_k.to_string(),
                "gamma0_pretrain" => self.gamma0_pretrain.to_string(),
                "gamma0_rl" => self.gamma0_rl.to_string(),
                "epochs_pretrain" => self.epochs_pretrain.to_string(),
                "epochs_transfer" => self.epochs_transfer.to_string(),
                "epochs_coverage" => self.epochs_coverage.to_string(),
                "beam" => self.beam.to_string(),
                "zeta_clip" => self.zeta_clip.to_string(),
                "eta_schedule" => self.eta_schedule.to_string(),
                "eta_max" => self.eta_max.to_string(),
                "coverage_lambda" => self.coverage_lambda.to_string(),
                "seed" => self.seed.to_string(),
                "pointer" => self.pointer.to_string(),
                "reward" => self.reward.to_string(),
                "grad_clip" => self.grad_clip.to_string(),
                _ => self.init_scale.to_string(),
            };
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}
