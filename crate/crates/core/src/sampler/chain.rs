//! A single tempered chain: its current state, proposal and RNG stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ladder::Exchange;
use crate::error::Result;
use crate::likelihood::tempered;
use crate::model::Target;
use crate::prior::WhitenMap;
use crate::proposal::{mh_accept, propose_agrw, propose_igrw, propose_pcn, Decision, ProposalKind, ProposalState};

/// Chain position in whitened coordinates with cached densities.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Walker {
    pub z: Vec<f64>,
    pub log_prior: f64,
    pub log_like: f64,
}

impl Exchange for Walker {
    fn log_likelihood(&self) -> f64 {
        self.log_like
    }
}

impl Walker {
    pub fn at<T: Target + ?Sized>(target: &T, whiten: &WhitenMap, z: Vec<f64>) -> Self {
        let theta = whiten.unwhiten(&z);
        Walker {
            log_prior: target.prior().log_density(&theta),
            log_like: target.log_likelihood(&theta),
            z,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub walker: Walker,
    pub proposal: ProposalState,
    pub rng: ChaCha8Rng,
}

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl ChainState {
    /// Starts from a prior draw taken from the chain's own stream.
    pub fn from_prior<T: Target + ?Sized>(
        target: &T,
        whiten: &WhitenMap,
        proposal: ProposalState,
        mut rng: ChaCha8Rng,
    ) -> Self {
        let theta = target.prior().sample(&mut rng);
        let walker = Walker::at(target, whiten, whiten.whiten(&theta));
        ChainState {
            walker,
            proposal,
            rng,
        }
    }

    /// One proposal and accept/reject at inverse temperature `beta`.
    pub fn step<T: Target + ?Sized>(&mut self, target: &T, whiten: &WhitenMap, beta: f64) -> Result<Decision> {
        let p = &self.proposal;
        let z = &self.walker.z;
        let proposed = match p.kind {
            ProposalKind::Igrw => propose_igrw(z, p.eta, &mut self.rng),
            ProposalKind::Agrw => propose_agrw(z, p, &mut self.rng),
            ProposalKind::Pcn => propose_pcn(z, p.eta, target.prior(), whiten, &mut self.rng)?,
        };
        let next = Walker::at(target, whiten, proposed);
        // pCN leaves the prior invariant, so only the tempered likelihood enters
        let (current_lp, proposed_lp) = match p.kind {
            ProposalKind::Pcn => (
                tempered(0.0, self.walker.log_like, beta),
                tempered(0.0, next.log_like, beta),
            ),
            _ => (
                tempered(self.walker.log_prior, self.walker.log_like, beta),
                tempered(next.log_prior, next.log_like, beta),
            ),
        };
        let decision = mh_accept(current_lp, proposed_lp, 0.0, &mut self.rng);
        if decision.accepted() {
            self.walker = next;
        }
        if decision == Decision::RejectNan {
            self.proposal.nan_rejects += 1;
        }
        self.proposal.adapt_step(decision.accepted());
        self.proposal.observe(&self.walker.z);
        Ok(decision)
    }
}
