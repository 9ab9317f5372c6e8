//! Continuous-time Markov chains driving topology switching.
//!
//! A chain is specified by its generator matrix: off-diagonal entry
//! `(p, q)` is the jump rate from mode `p` to mode `q`, rows sum to zero.
//! Construction validates the shape, requires irreducibility, and solves
//! for the stationary distribution once, since the feasibility conditions
//! consume its extreme entries.
//!
//! Switching paths are drawn by direct simulation: exponential holding
//! times through inverse transform sampling, then a categorical draw over
//! the outgoing rates. Two runs with the same generator, horizon, initial
//! mode, and seed produce bit-identical paths.

use crate::matrix::{Matrix, MatrixError};
use crate::rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MarkovError {
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),
    #[error("chain is reducible: mode {from} and mode {to} do not communicate")]
    Reducible { from: usize, to: usize },
    #[error("mode {mode} out of range for a chain with {modes} modes")]
    InvalidMode { mode: usize, modes: usize },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Irreducible continuous-time Markov chain with its stationary
/// distribution precomputed.
#[derive(Debug, Clone)]
pub struct MarkovChain {
    generator: Matrix,
    stationary: Vec<f64>,
}

impl MarkovChain {
    pub fn new(generator: Matrix) -> Result<MarkovChain, MarkovError> {
        let m = generator.rows();
        if generator.cols() != m {
            return Err(MarkovError::InvalidGenerator(format!(
                "generator is {}x{}, expected square",
                generator.rows(),
                generator.cols()
            )));
        }
        if !generator.is_finite() {
            return Err(MarkovError::InvalidGenerator(
                "generator contains non-finite entries".into(),
            ));
        }
        let scale = 1.0 + generator.max_abs();
        for p in 0..m {
            let mut row_sum = 0.0;
            for q in 0..m {
                let v = generator[(p, q)];
                if p != q && v < 0.0 {
                    return Err(MarkovError::InvalidGenerator(format!(
                        "negative off-diagonal rate at ({p}, {q})"
                    )));
                }
                row_sum += v;
            }
            if row_sum.abs() > 1e-9 * scale {
                return Err(MarkovError::InvalidGenerator(format!(
                    "row {p} sums to {row_sum:.3e}, expected 0"
                )));
            }
        }
        check_irreducible(&generator)?;
        let stationary = solve_stationary(&generator)?;
        Ok(MarkovChain {
            generator,
            stationary,
        })
    }

    pub fn modes(&self) -> usize {
        self.generator.rows()
    }

    pub fn generator(&self) -> &Matrix {
        &self.generator
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// Smallest stationary probability across modes.
    pub fn pi_min(&self) -> f64 {
        self.stationary.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest stationary probability across modes.
    pub fn pi_max(&self) -> f64 {
        self.stationary.iter().copied().fold(0.0, f64::max)
    }

    /// Simulates one switching path over `[0, horizon]`, drawing the
    /// initial mode from the stationary distribution. This matches the
    /// claim that the mode distribution stays at its invariant law for
    /// all time when nothing else is specified.
    pub fn sample_path_stationary(
        &self,
        horizon: f64,
        seed: u64,
    ) -> Result<SwitchingPath, MarkovError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = rng::uniform(&mut rng);
        let mut acc = 0.0;
        let mut initial = self.modes() - 1;
        for (p, &pi) in self.stationary.iter().enumerate() {
            acc += pi;
            if draw < acc {
                initial = p;
                break;
            }
        }
        self.sample_path_from(&mut rng, horizon, initial)
    }

    /// Simulates one switching path over `[0, horizon]` from a fixed
    /// initial mode.
    pub fn sample_path(
        &self,
        horizon: f64,
        initial_mode: usize,
        seed: u64,
    ) -> Result<SwitchingPath, MarkovError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_path_from(&mut rng, horizon, initial_mode)
    }

    fn sample_path_from(
        &self,
        rng: &mut ChaCha8Rng,
        horizon: f64,
        initial_mode: usize,
    ) -> Result<SwitchingPath, MarkovError> {
        let m = self.modes();
        if initial_mode >= m {
            return Err(MarkovError::InvalidMode {
                mode: initial_mode,
                modes: m,
            });
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(MarkovError::InvalidGenerator(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        let mut breakpoints = vec![0.0];
        let mut states = vec![initial_mode];
        let mut t = 0.0;
        let mut mode = initial_mode;
        loop {
            let rate = -self.generator[(mode, mode)];
            if rate <= 0.0 {
                break;
            }
            let dwell = -(1.0 - rng::uniform(rng)).ln() / rate;
            t += dwell;
            if t >= horizon {
                break;
            }
            let draw = rng::uniform(rng) * rate;
            let mut acc = 0.0;
            let mut next = mode;
            for q in 0..m {
                if q == mode {
                    continue;
                }
                let r = self.generator[(mode, q)];
                if r <= 0.0 {
                    continue;
                }
                acc += r;
                next = q;
                if draw < acc {
                    break;
                }
            }
            breakpoints.push(t);
            states.push(next);
            mode = next;
        }
        Ok(SwitchingPath {
            breakpoints,
            states,
            horizon,
        })
    }
}

fn check_irreducible(generator: &Matrix) -> Result<(), MarkovError> {
    let m = generator.rows();
    let reach = |forward: bool| -> Vec<bool> {
        let mut seen = vec![false; m];
        seen[0] = true;
        let mut stack = vec![0usize];
        while let Some(p) = stack.pop() {
            for q in 0..m {
                let rate = if forward {
                    generator[(p, q)]
                } else {
                    generator[(q, p)]
                };
                if p != q && rate > 0.0 && !seen[q] {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
        seen
    };
    let fwd = reach(true);
    let bwd = reach(false);
    for p in 0..m {
        if !fwd[p] {
            return Err(MarkovError::Reducible { from: 0, to: p });
        }
        if !bwd[p] {
            return Err(MarkovError::Reducible { from: p, to: 0 });
        }
    }
    Ok(())
}

/// Solves `pi' * generator = 0` with `sum(pi) = 1` by replacing the last
/// balance equation with the normalization constraint.
fn solve_stationary(generator: &Matrix) -> Result<Vec<f64>, MarkovError> {
    let m = generator.rows();
    let mut system = generator.transpose();
    let mut rhs = vec![0.0; m];
    for q in 0..m {
        system[(m - 1, q)] = 1.0;
    }
    rhs[m - 1] = 1.0;
    let pi = system.solve_vec(&rhs)?;
    let scale = 1.0 + generator.max_abs();
    for p in 0..m {
        if !(pi[p] > 0.0) {
            return Err(MarkovError::InvalidGenerator(format!(
                "stationary probability of mode {p} is {:.3e}, expected positive",
                pi[p]
            )));
        }
        let residual: f64 = (0..m).map(|r| pi[r] * generator[(r, p)]).sum();
        if residual.abs() > 1e-9 * scale {
            return Err(MarkovError::InvalidGenerator(format!(
                "stationary solve residual {residual:.3e} at mode {p}"
            )));
        }
    }
    Ok(pi)
}

/// Piecewise-constant mode trajectory over a finite horizon.
///
/// `states[k]` is active on `[breakpoints[k], breakpoints[k+1])`, the
/// last state runs to the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingPath {
    breakpoints: Vec<f64>,
    states: Vec<usize>,
    horizon: f64,
}

impl SwitchingPath {
    /// Path that stays in one mode for the whole horizon.
    pub fn constant(mode: usize, horizon: f64) -> SwitchingPath {
        SwitchingPath {
            breakpoints: vec![0.0],
            states: vec![mode],
            horizon,
        }
    }

    /// Active mode at time `t`, clamping beyond either end of the horizon.
    pub fn state_at(&self, t: f64) -> usize {
        match self
            .breakpoints
            .binary_search_by(|b| b.total_cmp(&t))
        {
            Ok(k) => self.states[k],
            Err(0) => self.states[0],
            Err(k) => self.states[k - 1],
        }
    }

    /// Iterates `(start, end, mode)` segments in time order.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        (0..self.states.len()).map(move |k| {
            let start = self.breakpoints[k];
            let end = self
                .breakpoints
                .get(k + 1)
                .copied()
                .unwrap_or(self.horizon);
            (start, end, self.states[k])
        })
    }

    /// Fraction of the horizon spent in each of `modes` modes.
    pub fn occupancy_fractions(&self, modes: usize) -> Vec<f64> {
        let mut occ = vec![0.0; modes];
        for (start, end, mode) in self.segments() {
            occ[mode] += (end - start) / self.horizon;
        }
        occ
    }

    pub fn switch_count(&self) -> usize {
        self.states.len() - 1
    }

    pub fn switch_times(&self) -> &[f64] {
        &self.breakpoints[1..]
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(rows: Vec<Vec<f64>>) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn demo_chain() -> MarkovChain {
        MarkovChain::new(gen(vec![vec![-1.0, 1.0], vec![2.0, -2.0]])).unwrap()
    }

    #[test]
    fn stationary_two_modes() {
        let chain = demo_chain();
        assert!((chain.stationary()[0] - 2.0 / 3.0).abs() < 1e-10);
        assert!((chain.stationary()[1] - 1.0 / 3.0).abs() < 1e-10);
        assert!((chain.pi_min() - 1.0 / 3.0).abs() < 1e-10);
        assert!((chain.pi_max() - 2.0 / 3.0).abs() < 1e-10);

        let other = MarkovChain::new(gen(vec![vec![-3.0, 3.0], vec![1.0, -1.0]])).unwrap();
        assert!((other.stationary()[0] - 0.25).abs() < 1e-10);
        assert!((other.stationary()[1] - 0.75).abs() < 1e-10);
    }

    #[test]
    fn stationary_three_modes() {
        let chain = MarkovChain::new(gen(vec![
            vec![-2.0, 1.0, 1.0],
            vec![1.0, -1.0, 0.0],
            vec![0.0, 2.0, -2.0],
        ]))
        .unwrap();
        let pi = chain.stationary();
        assert!((pi[0] - 2.0 / 7.0).abs() < 1e-10);
        assert!((pi[1] - 4.0 / 7.0).abs() < 1e-10);
        assert!((pi[2] - 1.0 / 7.0).abs() < 1e-10);
    }

    #[test]
    fn generator_validation() {
        let err = MarkovChain::new(gen(vec![vec![-1.0, 2.0], vec![1.0, -1.0]])).unwrap_err();
        assert!(matches!(err, MarkovError::InvalidGenerator(_)));

        let err = MarkovChain::new(gen(vec![vec![1.0, -1.0], vec![-1.0, 1.0]])).unwrap_err();
        assert!(matches!(err, MarkovError::InvalidGenerator(_)));
    }

    #[test]
    fn reducible_chains_are_rejected() {
        let absorbing = gen(vec![vec![-1.0, 1.0], vec![0.0, 0.0]]);
        assert!(matches!(
            MarkovChain::new(absorbing).unwrap_err(),
            MarkovError::Reducible { .. }
        ));

        let two_classes = gen(vec![
            vec![-1.0, 1.0, 0.0, 0.0],
            vec![1.0, -1.0, 0.0, 0.0],
            vec![0.0, 0.0, -2.0, 2.0],
            vec![0.0, 0.0, 2.0, -2.0],
        ]);
        assert!(matches!(
            MarkovChain::new(two_classes).unwrap_err(),
            MarkovError::Reducible { .. }
        ));
    }

    #[test]
    fn single_mode_chain_never_switches() {
        let chain = MarkovChain::new(gen(vec![vec![0.0]])).unwrap();
        assert_eq!(chain.stationary(), &[1.0]);
        let path = chain.sample_path(50.0, 0, 9).unwrap();
        assert_eq!(path.switch_count(), 0);
        assert_eq!(path.state_at(25.0), 0);
        assert_eq!(path.occupancy_fractions(1), vec![1.0]);
    }

    #[test]
    fn path_lookup_and_segments() {
        let path = SwitchingPath {
            breakpoints: vec![0.0, 1.5, 4.0],
            states: vec![0, 1, 0],
            horizon: 10.0,
        };
        assert_eq!(path.state_at(-0.5), 0);
        assert_eq!(path.state_at(0.0), 0);
        assert_eq!(path.state_at(1.49), 0);
        assert_eq!(path.state_at(1.5), 1);
        assert_eq!(path.state_at(3.999), 1);
        assert_eq!(path.state_at(4.0), 0);
        assert_eq!(path.state_at(99.0), 0);
        let segs: Vec<_> = path.segments().collect();
        assert_eq!(segs, vec![(0.0, 1.5, 0), (1.5, 4.0, 1), (4.0, 10.0, 0)]);
        let occ = path.occupancy_fractions(2);
        assert!((occ[0] - 0.75).abs() < 1e-12);
        assert!((occ[1] - 0.25).abs() < 1e-12);
        assert_eq!(path.switch_times(), &[1.5, 4.0]);
    }

    #[test]
    fn long_run_occupancy_tracks_stationary() {
        let chain = demo_chain();
        let path = chain.sample_path(10_000.0, 0, 7).unwrap();
        assert!(path.switch_count() > 1000);
        let occ = path.occupancy_fractions(2);
        assert!(
            (occ[0] - 2.0 / 3.0).abs() <= 0.03,
            "mode 0 occupancy {} too far from stationary 2/3",
            occ[0]
        );
    }

    #[test]
    fn stationary_start_hits_both_modes() {
        let chain = demo_chain();
        let mut starts = [0usize; 2];
        for seed in 0..40 {
            let path = chain.sample_path_stationary(1.0, seed).unwrap();
            starts[path.state_at(0.0)] += 1;
        }
        assert!(starts[0] > 0 && starts[1] > 0);
        assert!(starts[0] > starts[1], "mode 0 carries 2/3 stationary mass");
        let a = chain.sample_path_stationary(50.0, 3).unwrap();
        assert_eq!(a, chain.sample_path_stationary(50.0, 3).unwrap());
    }

    #[test]
    fn paths_are_seed_deterministic() {
        let chain = demo_chain();
        let a = chain.sample_path(100.0, 0, 42).unwrap();
        let b = chain.sample_path(100.0, 0, 42).unwrap();
        assert_eq!(a, b);
        let c = chain.sample_path(100.0, 0, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_initial_mode() {
        let chain = demo_chain();
        assert_eq!(
            chain.sample_path(1.0, 5, 0).unwrap_err(),
            MarkovError::InvalidMode { mode: 5, modes: 2 }
        );
    }
}
