//! Pool-method evolution of the collapse tree.

use std::sync::Arc;

use super::gate::{BlockUnitary, ChargeLayout};
use super::node::{diagonal_node, node_collapse};
use super::state::{SiteState, Summary};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::rng::{Draws, RandomStream};
use crate::stats::{log_typical, LogTypical};

pub const Z_FLOOR: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Protocol {
    /// Maximally mixed leaves; order parameter `1 − λ_max`.
    Purification,
    /// Charge-superposition leaves; order parameter is the minority charge weight.
    Sharpening,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Purification => "purification",
            Protocol::Sharpening => "sharpening",
        }
    }

    pub fn initial_state(self, d: usize) -> Result<SiteState> {
        match self {
            Protocol::Purification => SiteState::maximally_mixed(d),
            Protocol::Sharpening => SiteState::charge_superposition(d),
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "purification" | "pur" => Ok(Protocol::Purification),
            "sharpening" | "sharp" => Ok(Protocol::Sharpening),
            _ => Err(Error::InvalidArgument(format!("unknown protocol '{s}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PoolConfig {
    pub d: usize,
    pub p: f64,
    pub protocol: Protocol,
    pub pool_size: usize,
    pub k_max: usize,
    pub seed: u64,
    pub z_floor: f64,
    pub exec: Execution,
}

impl PoolConfig {
    pub fn new(d: usize, p: f64, protocol: Protocol) -> Self {
        Self { d, p, protocol, pool_size: 100_000, k_max: 300, seed: 1, z_floor: Z_FLOOR, exec: Execution::Parallel }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidArgument("d must be ≥ 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidArgument(format!("p = {} outside [0, 1]", self.p)));
        }
        if self.pool_size < 10 {
            return Err(Error::InvalidArgument(format!("pool_size = {} below 10", self.pool_size)));
        }
        Ok(())
    }
}

/// Per-generation statistics of both order parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerationStats {
    pub k: usize,
    pub pur: LogTypical,
    pub sharp: LogTypical,
}

impl GenerationStats {
    fn from_summaries(k: usize, s: &[Summary], floor: f64) -> Self {
        let pur = log_typical(s.iter().map(|x| x.z_pur), floor);
        let sharp = log_typical(s.iter().map(|x| x.z_sharp), floor);
        Self { k, pur, sharp }
    }

    /// The statistic the protocol is judged by.
    pub fn primary(&self, protocol: Protocol) -> LogTypical {
        match protocol {
            Protocol::Purification => self.pur,
            Protocol::Sharpening => self.sharp,
        }
    }
}

/// Evolves the pool for `k_max` generations; entry `k` of the result holds the
/// statistics of generation `k`, starting with the leaves at `k = 0`.
pub fn pool_evolve(cfg: &PoolConfig) -> Result<Vec<GenerationStats>> {
    pool_evolve_with(cfg, |_, _| {})
}

/// As [`pool_evolve`], handing every generation's summaries to `observe`.
///
/// At `d = 1` purification runs on diagonal charge weights, which is exact
/// and draws the same random numbers as the general path.
pub fn pool_evolve_with<F>(cfg: &PoolConfig, observe: F) -> Result<Vec<GenerationStats>>
where
    F: FnMut(usize, &[Summary]),
{
    cfg.validate()?;
    let layout: Arc<ChargeLayout> = ChargeLayout::new(cfg.d)?;
    if cfg.d == 1 && cfg.protocol == Protocol::Purification {
        return evolve(cfg, [0.5, 0.5], diagonal_summary, observe, |a, b, draws| {
            let gate = BlockUnitary::sample(&layout, draws)?;
            Ok(diagonal_node(*a, *b, &gate, cfg.p, draws)?.0)
        });
    }
    evolve(cfg, cfg.protocol.initial_state(cfg.d)?, SiteState::summarize, observe, |a, b, draws| {
        let gate = BlockUnitary::sample(&layout, draws)?;
        Ok(node_collapse(a, b, &gate, cfg.p, draws)?.0)
    })
}

fn diagonal_summary(w: &[f64; 2]) -> Summary {
    let z = w[0].min(w[1]) / (w[0] + w[1]);
    Summary { z_pur: z, z_sharp: z, charge: u8::from(w[1] > w[0]) }
}

fn evolve<S, F, G, N>(cfg: &PoolConfig, leaf: S, summarize: G, mut observe: F, node: N) -> Result<Vec<GenerationStats>>
where
    S: Clone + Send + Sync,
    F: FnMut(usize, &[Summary]),
    G: Fn(&S) -> Summary + Sync + Send,
    N: Fn(&S, &S, &mut Draws) -> Result<S> + Sync + Send,
{
    let stream = RandomStream::new(cfg.seed);
    let m = cfg.pool_size;
    let mut pool = vec![leaf; m];
    let mut summaries: Vec<Summary> = pool.iter().map(&summarize).collect();
    observe(0, &summaries);
    let mut series = vec![GenerationStats::from_summaries(0, &summaries, cfg.z_floor)];
    for k in 1..=cfg.k_max {
        let prev = &pool;
        let next = cfg.exec.try_map(m, |i| {
            let mut draws = stream.at(k as u64, i as u64);
            let a = draws.index(m);
            let b = draws.index(m);
            let state = node(&prev[a], &prev[b], &mut draws)?;
            let summary = summarize(&state);
            Ok::<_, Error>((state, summary))
        })?;
        let (states, sums): (Vec<_>, Vec<_>) = next.into_iter().unzip();
        pool = states;
        summaries = sums;
        observe(k, &summaries);
        series.push(GenerationStats::from_summaries(k, &summaries, cfg.z_floor));
    }
    Ok(series)
}
