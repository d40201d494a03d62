/// Generalized advantage estimates for one contiguous segment of transitions.
///
/// `dones[t]` marks a terminal step: nothing is bootstrapped across it.
/// `last_value` is the value of the observation following the final step and
/// is used unless that step was terminal.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = rewards.len();
    assert!(
        values.len() == n && dones.len() == n,
        "segment arrays differ in length"
    );
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { last_value };
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        running = delta + gamma * lambda * live * running;
        adv[t] = running;
    }
    adv
}

/// Advantages and returns (advantage plus value) for one segment.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let adv = gae(rewards, values, dones, last_value, gamma, lambda);
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// Shift to zero mean and scale to unit (population) standard deviation.
///
/// Batches of one element, or with zero spread, are only centered.
pub fn normalize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let scale = if std > 1e-12 && xs.len() > 1 {
        1.0 / std
    } else {
        1.0
    };
    for x in xs.iter_mut() {
        *x = (*x - mean) * scale;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_terminal_step() {
        assert_eq!(gae(&[1.0], &[0.0], &[true], 5.0, 0.99, 0.95), vec![1.0]);
    }

    #[test]
    fn lambda_zero_is_one_step_td() {
        let r = [1.0, -0.5, 2.0];
        let v = [0.3, 0.1, -0.2];
        let adv = gae(&r, &v, &[false, false, false], 0.7, 0.9, 0.0);
        let expected = [
            1.0 + 0.9 * 0.1 - 0.3,
            -0.5 + 0.9 * -0.2 - 0.1,
            2.0 + 0.9 * 0.7 + 0.2,
        ];
        for (a, e) in adv.iter().zip(expected) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn two_step_terminal() {
        let adv = gae(&[1.0, 1.0], &[0.0, 0.0], &[false, true], 0.0, 0.99, 1.0);
        assert!((adv[0] - 1.99).abs() < 1e-12);
        assert_eq!(adv[1], 1.0);
    }

    #[test]
    fn no_bootstrap_across_episode_boundary() {
        let adv = gae(&[0.0, 0.0], &[0.0, 10.0], &[true, false], 0.0, 1.0, 1.0);
        assert_eq!(adv[0], 0.0);
    }

    #[test]
    fn normalization() {
        let mut xs = vec![1.0, 2.0, 3.0, 4.0];
        normalize(&mut xs);
        let mean: f64 = xs.iter().sum::<f64>() / 4.0;
        let var: f64 = xs.iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        let mut one = vec![5.0];
        normalize(&mut one);
        assert_eq!(one, vec![0.0]);
    }
}
