//! Actor and critic containers: a Gaussian policy head over an MLP mean with
//! a state-independent log-std, and the centralized value network. Each owns
//! its Adam state so updates stay self-contained.

use serde::{Deserialize, Serialize};

use crate::neural::{
    adam_update, forward, gaussian_logprob_entropy, gaussian_sample, AdamState, GradientBundle,
    MlpParams, NeuralError, LOG_STD_MAX, LOG_STD_MIN,
};
use crate::rng::{child_seed, seeded};

/// One buyer policy: MLP mean, scalar log-std, and optimizer accumulators.
/// The log-std shares the network's Adam step counter so bias correction
/// stays in lockstep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub net: MlpParams,
    pub log_std: f64,
    pub opt: AdamState,
    log_std_m: f64,
    log_std_v: f64,
}

impl Policy {
    pub fn new(obs_dim: usize, hidden: &[usize], learning_rate: f64, seed: u64) -> Policy {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let net = MlpParams::init(&sizes, &mut seeded(seed));
        let opt = AdamState::new(&net, learning_rate);
        // σ ≈ 0.37: enough spread for credit assignment through the tanh bid
        // map without starting at full-range noise.
        Policy {
            net,
            log_std: -1.0,
            opt,
            log_std_m: 0.0,
            log_std_v: 0.0,
        }
    }

    pub fn mean(&self, obs: &[f64]) -> Result<f64, NeuralError> {
        Ok(forward(&self.net, obs)?[0])
    }

    /// Draw a raw action and return (z, log_prob, entropy).
    pub fn sample(
        &self,
        obs: &[f64],
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<(f64, f64, f64), NeuralError> {
        let mean = self.mean(obs)?;
        let z = gaussian_sample(&[mean], &[self.log_std], rng)[0];
        let (log_prob, entropy) = gaussian_logprob_entropy(&[mean], &[self.log_std], &[z]);
        Ok((z, log_prob, entropy))
    }

    /// Log-probability and entropy of a stored raw action under the current
    /// parameters, plus the mean it came from.
    pub fn evaluate(&self, obs: &[f64], raw_action: f64) -> Result<(f64, f64, f64), NeuralError> {
        let mean = self.mean(obs)?;
        let (log_prob, entropy) = gaussian_logprob_entropy(&[mean], &[self.log_std], &[raw_action]);
        Ok((mean, log_prob, entropy))
    }

    /// One Adam step on the network and the log-std together; either both
    /// apply or neither does.
    pub fn apply_update(
        &mut self,
        net_grads: &GradientBundle,
        log_std_grad: f64,
    ) -> Result<(), NeuralError> {
        if !log_std_grad.is_finite() {
            return Err(NeuralError::NonFiniteGradient);
        }
        adam_update(&mut self.net, net_grads, &mut self.opt)?;
        let o = &self.opt;
        self.log_std_m = o.beta1 * self.log_std_m + (1.0 - o.beta1) * log_std_grad;
        self.log_std_v = o.beta2 * self.log_std_v + (1.0 - o.beta2) * log_std_grad * log_std_grad;
        let bias1 = 1.0 - o.beta1.powi(o.step as i32);
        let bias2 = 1.0 - o.beta2.powi(o.step as i32);
        let m_hat = self.log_std_m / bias1;
        let v_hat = self.log_std_v / bias2;
        self.log_std -= o.learning_rate * m_hat / (v_hat.sqrt() + o.epsilon);
        self.log_std = self.log_std.clamp(LOG_STD_MIN, LOG_STD_MAX);
        Ok(())
    }
}

/// The buyers' policies: one per agent by default, or a single shared policy
/// that sees a one-hot agent id appended to the observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySet {
    pub shared: bool,
    pub agent_count: usize,
    pub base_obs_dim: usize,
    pub policies: Vec<Policy>,
}

impl PolicySet {
    pub fn new(
        agent_count: usize,
        base_obs_dim: usize,
        hidden: &[usize],
        shared: bool,
        learning_rate: f64,
        seed: u64,
    ) -> PolicySet {
        let input_dim = if shared {
            base_obs_dim + agent_count
        } else {
            base_obs_dim
        };
        let count = if shared { 1 } else { agent_count.max(1) };
        let policies = (0..count)
            .map(|i| {
                Policy::new(
                    input_dim,
                    hidden,
                    learning_rate,
                    child_seed(seed, 10 + i as u64),
                )
            })
            .collect();
        PolicySet {
            shared,
            agent_count,
            base_obs_dim,
            policies,
        }
    }

    /// The network input for an agent: the base observation, plus a one-hot
    /// id when parameters are shared.
    pub fn input_for(&self, agent_id: usize, base_obs: &[f64]) -> Vec<f64> {
        let mut input = base_obs.to_vec();
        if self.shared {
            let mut one_hot = vec![0.0; self.agent_count];
            one_hot[agent_id] = 1.0;
            input.extend(one_hot);
        }
        input
    }

    pub fn policy_index(&self, agent_id: usize) -> usize {
        if self.shared {
            0
        } else {
            agent_id
        }
    }

    pub fn policy(&self, agent_id: usize) -> &Policy {
        &self.policies[self.policy_index(agent_id)]
    }

    pub fn policy_mut(&mut self, agent_id: usize) -> &mut Policy {
        let index = self.policy_index(agent_id);
        &mut self.policies[index]
    }
}

/// Centralized critic over the global state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Critic {
    pub net: MlpParams,
    pub opt: AdamState,
}

impl Critic {
    pub fn new(state_dim: usize, hidden: &[usize], learning_rate: f64, seed: u64) -> Critic {
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let net = MlpParams::init(&sizes, &mut seeded(seed));
        let opt = AdamState::new(&net, learning_rate);
        Critic { net, opt }
    }

    pub fn value(&self, state: &[f64]) -> Result<f64, NeuralError> {
        Ok(forward(&self.net, state)?[0])
    }

    /// Jump the output bias to `level` in one move. Adam steps are bounded by
    /// the learning rate, so reaching a distant output scale by gradient
    /// alone would eat most of a training run.
    pub fn warm_start_bias(&mut self, level: f64) {
        if let Some(output) = self.net.biases.last_mut() {
            output[0] = level;
        }
    }

    pub fn apply_update(&mut self, grads: &GradientBundle) -> Result<(), NeuralError> {
        adam_update(&mut self.net, grads, &mut self.opt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn sampled_actions_score_their_own_log_prob() {
        let policy = Policy::new(4, &[8], 1e-3, 5);
        let obs = [0.2, 0.4, 0.1, 0.9];
        let mut rng = seeded(1);
        let (z, log_prob, entropy) = policy.sample(&obs, &mut rng).unwrap();
        let (_, replayed, replayed_entropy) = policy.evaluate(&obs, z).unwrap();
        assert_eq!(log_prob, replayed);
        assert_eq!(entropy, replayed_entropy);
        assert!(log_prob.is_finite());
    }

    #[test]
    fn fresh_policy_is_near_truthful_with_moderate_noise() {
        let policy = Policy::new(4, &[16, 16], 1e-3, 7);
        // Output layer gain is tiny, so the mean starts near zero.
        assert!(policy.mean(&[0.3, 0.5, 0.2, 0.8]).unwrap().abs() < 0.1);
        assert_eq!(policy.log_std, -1.0);
    }

    #[test]
    fn shared_set_appends_one_hot_ids() {
        let set = PolicySet::new(3, 4, &[8], true, 1e-3, 0);
        assert_eq!(set.policies.len(), 1);
        let input = set.input_for(1, &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(input, vec![0.1, 0.2, 0.3, 0.4, 0.0, 1.0, 0.0]);
        assert_eq!(set.policy_index(2), 0);

        let per_agent = PolicySet::new(3, 4, &[8], false, 1e-3, 0);
        assert_eq!(per_agent.policies.len(), 3);
        assert_eq!(per_agent.input_for(1, &[0.1, 0.2, 0.3, 0.4]).len(), 4);
        assert_eq!(per_agent.policy_index(2), 2);
        // Distinct agents get distinct initializations.
        assert_ne!(per_agent.policies[0].net, per_agent.policies[1].net);
    }

    #[test]
    fn log_std_update_shares_the_step_counter_and_clamps() {
        let mut policy = Policy::new(2, &[4], 0.5, 3);
        let grads = GradientBundle::zeros_like(&policy.net);
        for _ in 0..40 {
            policy.apply_update(&grads, -1.0).unwrap();
        }
        assert_eq!(policy.opt.step, 40);
        assert!(policy.log_std <= LOG_STD_MAX);
        assert!(policy.log_std > 0.0);
        let err = policy.apply_update(&grads, f64::NAN).unwrap_err();
        assert_eq!(err, NeuralError::NonFiniteGradient);
        assert_eq!(policy.opt.step, 40);
    }

    #[test]
    fn critic_scores_states_deterministically() {
        let critic = Critic::new(6, &[8, 8], 1e-3, 9);
        let state = [0.1; 6];
        assert_eq!(critic.value(&state).unwrap(), critic.value(&state).unwrap());
        assert!(critic.value(&[0.0; 5]).is_err());
    }

    #[test]
    fn warm_start_moves_the_output_level() {
        let mut critic = Critic::new(4, &[8], 1e-3, 2);
        let state = [0.2, 0.4, 0.1, 0.3];
        let cold = critic.value(&state).unwrap();
        critic.warm_start_bias(22.0);
        let warm = critic.value(&state).unwrap();
        assert!((warm - (cold + 22.0)).abs() < 1e-12);
    }
}
