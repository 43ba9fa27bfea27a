//! Generalized advantage estimation.

/// Discounted horizon factor Σ_{j<steps} γ^j: the value of one reward unit
/// per slot over the remaining `steps` slots.
///
/// Multiplying a per-slot value estimate by this factor satisfies the
/// recursion annuity(k) = 1 + γ·annuity(k−1), so a constant per-slot estimate
/// telescopes cleanly through one-step TD errors all the way to episode end.
pub fn annuity(gamma: f64, steps: usize) -> f64 {
    if (1.0 - gamma).abs() < 1e-12 {
        return steps as f64;
    }
    (1.0 - gamma.powi(steps as i32)) / (1.0 - gamma)
}

/// Compute GAE advantages and return targets for one trajectory.
///
/// `bootstrap_value` stands in for V(s_T); episodes that terminate pass 0.
/// With λ = 1 and a zero value function the targets reduce to plain
/// discounted returns.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    bootstrap_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(
        rewards.len(),
        values.len(),
        "rewards and values must align"
    );
    let horizon = rewards.len();
    let mut advantages = vec![0.0; horizon];
    let mut carried = 0.0;
    for t in (0..horizon).rev() {
        let next_value = if t + 1 < horizon {
            values[t + 1]
        } else {
            bootstrap_value
        };
        let delta = rewards[t] + gamma * next_value - values[t];
        carried = delta + gamma * lambda * carried;
        advantages[t] = carried;
    }
    let targets = advantages
        .iter()
        .zip(values)
        .map(|(a, v)| a + v)
        .collect();
    (advantages, targets)
}
