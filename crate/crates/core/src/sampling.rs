//! Seeded scenario generators.
//!
//! All streams use `ChaCha8Rng` (pinned `rand_chacha` version). Each draw
//! consumes a fixed number of 64-bit words: uniforms come from one word and
//! normals from one open-interval uniform pushed through an inverse CDF, so
//! generating `n` scenarios and then `m` more yields the same draws as
//! generating `n + m` at once.
//!
//! * 2-D halfspaces `a1 x1 + a2 x2 <= b` with `a1, a2 ~ U[-4, 4]`,
//!   `b ~ U[10, 15]`, drawn in the order `a1, a2, b`.
//! * EV scenarios: per agent and time step `delta_u = 0.3 * u * g` with
//!   `u ~ U(0, 1)`, `g ~ N(1, 3^2)` (drawn `u` then `g`, row-major), then
//!   `delta_e = 0.05 * N(0, 1)` per agent.
//! * EV nominal energies `E_nom ~ U[10, 17]`.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope::Halfspace;

/// XOR mask turning a construction seed into its test-set seed.
pub const TEST_SEED_MASK: u64 = 0x5DEE_CE66_D1CE_4E5B;

pub const HALFSPACE_A_RANGE: (f64, f64) = (-4.0, 4.0);
pub const HALFSPACE_B_RANGE: (f64, f64) = (10.0, 15.0);
pub const EV_NOMINAL_RANGE: (f64, f64) = (10.0, 17.0);

/// Seed for the test multisample paired with a construction seed.
pub fn test_seed(seed: u64) -> u64 {
    seed ^ TEST_SEED_MASK
}

/// Independent seed for sub-stream `stream` of `seed` (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Inverse of the standard normal CDF (Acklam's rational approximation,
/// relative error below 1.2e-9). `p` must lie in `(0, 1)`.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    }
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    inverse_normal_cdf(rng.sample(Open01))
}

/// Which generator produced a scenario set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioModel {
    TwodHalfspace,
    EvUncertainty { m_agents: usize, horizon: usize },
}

/// `n` draws of a model together with the seed that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet<T> {
    pub model: ScenarioModel,
    pub seed: u64,
    pub n: usize,
    pub draws: Vec<T>,
}

impl<T: Serialize + DeserializeOwned> ScenarioSet<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let set: Self =
            serde_json::from_str(s).map_err(|e| Error::InvalidParameters(e.to_string()))?;
        if set.draws.len() != set.n {
            return Err(Error::InvalidParameters(format!(
                "scenario set declares {} draws but holds {}",
                set.n,
                set.draws.len()
            )));
        }
        Ok(set)
    }
}

/// One realization of the EV uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvScenario {
    /// Additive noise on the upper charging bounds, `M x d`.
    pub delta_u: Vec<Vec<f64>>,
    /// Multiplicative noise on the energy demand, length `M`.
    pub delta_e: Vec<f64>,
}

/// Endless stream of 2-D halfspaces.
pub struct HalfspaceSampler {
    rng: ChaCha8Rng,
}

impl HalfspaceSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: rng_from_seed(seed),
        }
    }
}

impl Iterator for HalfspaceSampler {
    type Item = Halfspace;

    fn next(&mut self) -> Option<Halfspace> {
        loop {
            let a1 = uniform(&mut self.rng, HALFSPACE_A_RANGE);
            let a2 = uniform(&mut self.rng, HALFSPACE_A_RANGE);
            let b = uniform(&mut self.rng, HALFSPACE_B_RANGE);
            // A (near) zero normal has probability zero; redraw if it occurs.
            if let Ok(h) = Halfspace::new(vec![a1, a2], b) {
                return Some(h);
            }
        }
    }
}

/// Endless stream of EV scenarios for `m_agents x horizon`.
pub struct EvScenarioSampler {
    rng: ChaCha8Rng,
    m_agents: usize,
    horizon: usize,
}

impl EvScenarioSampler {
    pub fn new(seed: u64, m_agents: usize, horizon: usize) -> Result<Self> {
        if m_agents == 0 || horizon == 0 {
            return Err(Error::InvalidParameters(
                "EV scenarios need at least one agent and one time step".into(),
            ));
        }
        Ok(Self {
            rng: rng_from_seed(seed),
            m_agents,
            horizon,
        })
    }
}

impl Iterator for EvScenarioSampler {
    type Item = EvScenario;

    fn next(&mut self) -> Option<EvScenario> {
        let rng = &mut self.rng;
        let delta_u = (0..self.m_agents)
            .map(|_| {
                (0..self.horizon)
                    .map(|_| {
                        let u: f64 = rng.random();
                        let g = 1.0 + 3.0 * standard_normal(rng);
                        0.3 * u * g
                    })
                    .collect()
            })
            .collect();
        let delta_e = (0..self.m_agents)
            .map(|_| 0.05 * standard_normal(rng))
            .collect();
        Some(EvScenario { delta_u, delta_e })
    }
}

pub fn sample_2d_halfspaces(seed: u64, n: usize) -> Result<ScenarioSet<Halfspace>> {
    if n == 0 {
        return Err(Error::InvalidParameters("need at least one scenario".into()));
    }
    Ok(ScenarioSet {
        model: ScenarioModel::TwodHalfspace,
        seed,
        n,
        draws: HalfspaceSampler::new(seed).take(n).collect(),
    })
}

pub fn sample_ev_scenarios(
    seed: u64,
    n: usize,
    m_agents: usize,
    horizon: usize,
) -> Result<ScenarioSet<EvScenario>> {
    if n == 0 {
        return Err(Error::InvalidParameters("need at least one scenario".into()));
    }
    Ok(ScenarioSet {
        model: ScenarioModel::EvUncertainty { m_agents, horizon },
        seed,
        n,
        draws: EvScenarioSampler::new(seed, m_agents, horizon)?.take(n).collect(),
    })
}

/// Nominal energy demand per agent.
pub fn sample_ev_nominals(seed: u64, m_agents: usize) -> Result<Vec<f64>> {
    if m_agents == 0 {
        return Err(Error::InvalidParameters("need at least one agent".into()));
    }
    let mut rng = rng_from_seed(seed);
    Ok((0..m_agents)
        .map(|_| uniform(&mut rng, EV_NOMINAL_RANGE))
        .collect())
}
