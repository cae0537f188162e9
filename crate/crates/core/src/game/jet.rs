//! Jets of the state: φ and its first k time derivatives, estimated by
//! backward finite differences over the tick history.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// φ(t), φ̇(t), …, φ⁽ᵏ⁾(t) at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jet {
    pub order: usize,
    /// `values[m]` is the m-th derivative. Missing derivatives (warm-up) are zero.
    pub values: Vec<Vec<f64>>,
    /// Highest derivative order actually backed by history.
    pub available: usize,
}

impl Jet {
    /// A jet with only φ known and zero derivatives.
    pub fn from_state(phi: &[f64], order: usize) -> Self {
        let mut values = vec![phi.to_vec()];
        values.extend((0..order).map(|_| vec![0.0; phi.len()]));
        Jet { order, values, available: 0 }
    }

    pub fn state(&self) -> &[f64] {
        &self.values[0]
    }

    /// True once the stencil is filled for every declared order.
    pub fn is_complete(&self) -> bool {
        self.available >= self.order
    }

    /// Stacked `[φ; φ̇; …; φ⁽ᵏ⁾]`.
    pub fn stacked(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    pub fn stacked_len(state_dim: usize, order: usize) -> usize {
        state_dim * (order + 1)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Rolling history of the last k+1 states.
#[derive(Debug, Clone)]
pub struct JetHistory {
    order: usize,
    dt: f64,
    recent: VecDeque<Vec<f64>>,
}

impl JetHistory {
    pub fn new(order: usize, dt: f64) -> Self {
        Self { order, dt, recent: VecDeque::with_capacity(order + 1) }
    }

    pub fn push(&mut self, phi: &[f64]) {
        if self.recent.len() == self.order + 1 {
            self.recent.pop_back();
        }
        self.recent.push_front(phi.to_vec());
    }

    /// Jet at the most recently pushed state.
    pub fn jet(&self) -> Jet {
        let phi = self.recent.front().expect("jet requested before any state was pushed");
        let mut jet = Jet::from_state(phi, self.order);
        let available = (self.recent.len() - 1).min(self.order);
        for m in 1..=available {
            let scale = self.dt.powi(m as i32);
            let d = &mut jet.values[m];
            for i in 0..=m {
                let c = binomial(m, i) * if i % 2 == 0 { 1.0 } else { -1.0 };
                for (dk, x) in d.iter_mut().zip(&self.recent[i]) {
                    *dk += c * x;
                }
            }
            d.iter_mut().for_each(|v| *v /= scale);
        }
        jet.available = available;
        jet
    }
}

/// Jets for every tick of a state sequence.
pub fn jets_for_states(states: &[Vec<f64>], order: usize, dt: f64) -> Vec<Jet> {
    let mut history = JetHistory::new(order, dt);
    states
        .iter()
        .map(|phi| {
            history.push(phi);
            history.jet()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_order_backward_difference() {
        let jets = jets_for_states(&[vec![1.0], vec![1.5], vec![2.5]], 1, 0.5);
        assert!(!jets[0].is_complete());
        assert_eq!(jets[0].values[1], vec![0.0]);
        assert_eq!(jets[1].values[1], vec![1.0]);
        assert_eq!(jets[2].values[1], vec![2.0]);
        assert!(jets[2].is_complete());
        assert_eq!(jets[2].stacked(), vec![2.5, 2.0]);
    }

    #[test]
    fn second_order_is_exact_on_quadratics() {
        let dt = 0.1;
        let states: Vec<Vec<f64>> = (0..5).map(|j| vec![(j as f64 * dt).powi(2)]).collect();
        let jets = jets_for_states(&states, 2, dt);
        assert_eq!(jets[1].available, 1);
        let last = &jets[4];
        assert!(last.is_complete());
        assert!((last.values[2][0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn order_zero_has_no_warm_up() {
        let jets = jets_for_states(&[vec![3.0, 4.0]], 0, 0.01);
        assert!(jets[0].is_complete());
        assert_eq!(jets[0].stacked(), vec![3.0, 4.0]);
    }
}
