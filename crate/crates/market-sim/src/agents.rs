use model_core::{MarketParams, SignalSpec};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentKind {
    #[serde(rename = "AI")]
    Ai,
    #[serde(rename = "HUMAN")]
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: usize,
    pub kind: AgentKind,
    pub cost: f64,
    pub d_bench: f64,
}

impl AgentSpec {
    /// round(N·φ) AI agents followed by humans, zero cost, benchmark `d_bench`.
    pub fn population(n: usize, phi: f64, d_bench: f64) -> Vec<AgentSpec> {
        let n_ai = ((n as f64) * phi).round() as usize;
        (0..n)
            .map(|id| AgentSpec {
                id,
                kind: if id < n_ai { AgentKind::Ai } else { AgentKind::Human },
                cost: 0.0,
                d_bench,
            })
            .collect()
    }
}

/// One tick of signal observations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Observations {
    /// Shared AI error η_k.
    pub eta: Vec<f64>,
    /// Agent-major observations, `x[i * K + k]`.
    pub x: Vec<f64>,
    pub k: usize,
}

impl Observations {
    pub fn agent(&self, i: usize) -> &[f64] {
        &self.x[i * self.k..(i + 1) * self.k]
    }
}

/// Draws one tick of observations.
///
/// AI: f_k + ρ_k η_k + √(1−ρ_k²) ν_ik. Human: f_k + ε^H_ik. Every agent
/// consumes K normals whatever its kind, so streams stay aligned when the
/// AI share changes.
pub fn generate_signals<R: Rng + ?Sized>(
    f: &[f64],
    agents: &[AgentSpec],
    signals: &[SignalSpec],
    market: &MarketParams,
    rng: &mut R,
    out: &mut Observations,
) {
    let k_sig = f.len();
    out.k = k_sig;
    out.eta.clear();
    for _ in 0..k_sig {
        out.eta.push(market.sigma_eta * rng.sample::<f64, _>(StandardNormal));
    }
    out.x.clear();
    out.x.reserve(agents.len() * k_sig);
    for ag in agents {
        for k in 0..k_sig {
            let z: f64 = rng.sample(StandardNormal);
            let obs = match ag.kind {
                AgentKind::Ai => {
                    let rho = signals[k].rho;
                    f[k] + rho * out.eta[k] + (1.0 - rho * rho).sqrt() * market.sigma_nu * z
                }
                AgentKind::Human => f[k] + market.sigma_h * z,
            };
            out.x.push(obs);
        }
    }
}

/// Linear demand a_k·x.
pub fn agent_demand(observation: f64, spec: &SignalSpec) -> f64 {
    spec.a * observation
}
