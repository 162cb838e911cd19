//! Versioned binary checkpoint container. All integers and floats are
//! little-endian; see `docs/formats.md` for the byte layout.

use std::io::{Read, Write};
use std::path::Path;

use super::{AdamConfig, Mlp, MlpLayout, OptimizerState, Parameters, Tabular};
use crate::config::Hyperparameters;
use crate::error::{Error, Result};
use crate::games::{GameSpec, StateKey};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"KLENTCK\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub game: GameSpec,
    pub hp: Hyperparameters,
    pub params: Parameters,
    pub optimizer: OptimizerState,
    pub iteration: u64,
    pub sim_evals: u64,
    pub config_hash: u64,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u128(&mut self, v: u128) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for &x in v {
            self.f64(x);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self) -> Result<usize> {
        let n = self.u64()? as usize;
        if n > self.buf.len() {
            return Err(Error::Checkpoint(format!("implausible length {n}")));
        }
        Ok(n)
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.u64(self.config_hash);
        w.u64(self.iteration);
        w.u64(self.sim_evals);
        let (kind, a, b) = match self.game {
            GameSpec::CountUp { target, max_increment } => (0, target, max_increment),
            GameSpec::Hex { side } => (1, side as u32, 0),
            GameSpec::Othello { side } => (2, side as u32, 0),
        };
        w.u8(kind);
        w.u32(a);
        w.u32(b);
        w.f64(self.hp.alpha);
        w.f64(self.hp.beta);
        w.f64(self.hp.lambda);
        w.f64(self.hp.gamma);
        match &self.params {
            Parameters::Tabular(t) => {
                w.u8(0);
                w.u32(t.num_actions() as u32);
                w.u64(t.keys().len() as u64);
                for k in t.keys() {
                    w.u128(k.0);
                }
            }
            Parameters::Mlp(m) => {
                let l = m.layout();
                w.u8(1);
                w.u32(l.actions as u32);
                w.u32(l.input as u32);
                w.u32(l.hidden.len() as u32);
                for &h in &l.hidden {
                    w.u32(h as u32);
                }
            }
        }
        w.f64s(self.params.theta());
        let o = &self.optimizer;
        w.u64(o.step);
        w.f64(o.config.learning_rate);
        w.f64(o.config.beta1);
        w.f64(o.config.beta2);
        w.f64(o.config.epsilon);
        w.f64s(&o.m);
        w.f64s(&o.v);
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic; not a checkpoint file".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {version} (expected {CHECKPOINT_VERSION})"
            )));
        }
        let config_hash = r.u64()?;
        let iteration = r.u64()?;
        let sim_evals = r.u64()?;
        let (kind, a, b) = (r.u8()?, r.u32()?, r.u32()?);
        let game = match kind {
            0 => GameSpec::countup(a, b),
            1 => GameSpec::hex(a as usize),
            2 => GameSpec::othello(a as usize),
            k => return Err(Error::Checkpoint(format!("unknown game kind {k}"))),
        };
        game.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
        let hp = Hyperparameters {
            alpha: r.f64()?,
            beta: r.f64()?,
            lambda: r.f64()?,
            gamma: r.f64()?,
        };
        let backend = r.u8()?;
        let actions = r.u32()? as usize;
        if actions != game.num_actions() {
            return Err(Error::Checkpoint(format!(
                "action count {actions} does not match {game}"
            )));
        }
        let params = match backend {
            0 => {
                let rows = r.len()?;
                let keys = (0..rows).map(|_| r.u128().map(StateKey)).collect::<Result<Vec<_>>>()?;
                let theta = r.f64s()?;
                Parameters::Tabular(Tabular::from_parts(actions, keys, theta)?)
            }
            1 => {
                let input = r.u32()? as usize;
                let n = r.u32()? as usize;
                let hidden = (0..n)
                    .map(|_| r.u32().map(|h| h as usize))
                    .collect::<Result<Vec<_>>>()?;
                let theta = r.f64s()?;
                let layout = MlpLayout { input, hidden, actions };
                Parameters::Mlp(Mlp::from_parts(layout, theta)?)
            }
            b => return Err(Error::Checkpoint(format!("unknown backend tag {b}"))),
        };
        let step = r.u64()?;
        let config = AdamConfig {
            learning_rate: r.f64()?,
            beta1: r.f64()?,
            beta2: r.f64()?,
            epsilon: r.f64()?,
        };
        let m = r.f64s()?;
        let v = r.f64s()?;
        if m.len() != v.len() || m.len() > params.theta().len() {
            return Err(Error::Checkpoint("optimizer moments do not match parameters".into()));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        if params.theta().iter().any(|x| !x.is_finite()) {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        Ok(Checkpoint {
            game,
            hp,
            params,
            optimizer: OptimizerState { step, config, m, v },
            iteration,
            sim_evals,
            config_hash,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}
