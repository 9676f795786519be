//! Dense statevector simulation of depth-3 QAOA on Max-Cut.
//!
//! Basis index `k` encodes qubit `i` in bit `i` (bit 0 least significant).
//! Bit value 0 maps to spin +1, bit value 1 to spin -1, and the cost operator
//! is `H = Σ_{(i,j)∈E} Z_i Z_j`, minimized by the maximum cut.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Circuit depth used throughout.
pub const LAYERS: usize = 3;

/// Number of variational angles, `LAYERS` gammas followed by `LAYERS` betas.
pub const NUM_PARAMS: usize = 2 * LAYERS;

/// Largest qubit count the simulator accepts.
pub const MAX_QUBITS: usize = 24;

/// Step of the central difference used for the cost angles.
pub const GAMMA_FD_STEP: f64 = 1e-5;

/// Wrap an angle into `[-π, π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let w = x - TAU * ((x + PI) / TAU).floor();
    if w >= PI {
        w - TAU
    } else if w < -PI {
        w + TAU
    } else {
        w
    }
}

/// Angles `(γ1, γ2, γ3, β1, β2, β3)`; serialized as a flat 6-element array.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; NUM_PARAMS]", into = "[f64; NUM_PARAMS]")]
pub struct ParamVector {
    pub gammas: [f64; LAYERS],
    pub betas: [f64; LAYERS],
}

impl From<[f64; NUM_PARAMS]> for ParamVector {
    fn from(a: [f64; NUM_PARAMS]) -> Self {
        ParamVector {
            gammas: [a[0], a[1], a[2]],
            betas: [a[3], a[4], a[5]],
        }
    }
}

impl From<ParamVector> for [f64; NUM_PARAMS] {
    fn from(p: ParamVector) -> Self {
        p.to_array()
    }
}

impl ParamVector {
    pub fn new(gammas: [f64; LAYERS], betas: [f64; LAYERS]) -> Self {
        ParamVector { gammas, betas }
    }

    pub fn zeros() -> Self {
        Self::default()
    }

    pub fn to_array(&self) -> [f64; NUM_PARAMS] {
        let mut a = [0.0; NUM_PARAMS];
        a[..LAYERS].copy_from_slice(&self.gammas);
        a[LAYERS..].copy_from_slice(&self.betas);
        a
    }

    /// Component-wise canonical representative in `[-π, π)`.
    pub fn wrapped(&self) -> Self {
        ParamVector::from(self.to_array().map(wrap_angle))
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    /// Energy-preserving representative with every `γ` in `[-π/2, π/2)`,
    /// every `β` in `[-π/4, π/4)` and `γ1 >= 0` (up to the boundary point).
    ///
    /// Valid for any unweighted graph: `e^{-iπH_C}` is the global phase
    /// `(-1)^|E|`; a `π/2` mixer shift adds `X^{⊗n}`, which commutes with the
    /// circuit and fixes `|+⟩`; negating all angles conjugates the real-valued
    /// circuit.
    pub fn canonical(&self) -> Self {
        let reduce = |x: f64, period: f64| x - period * ((x + period / 2.0) / period).floor();
        let mut gammas = self.gammas.map(|g| reduce(g, PI));
        let mut betas = self.betas.map(|b| reduce(b, FRAC_PI_2));
        if gammas[0] < 0.0 && gammas[0] > -FRAC_PI_2 {
            gammas = gammas.map(|g| reduce(-g, PI));
            betas = betas.map(|b| reduce(-b, FRAC_PI_2));
        }
        ParamVector { gammas, betas }
    }
}

/// Diagonal of the cost operator in the computational basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CostDiagonal {
    n: usize,
    num_edges: usize,
    values: Vec<i32>,
}

impl CostDiagonal {
    pub fn new(g: &Graph) -> Result<Self> {
        check_qubits(g.n())?;
        let m = g.num_edges() as i32;
        let values = (0..1u64 << g.n())
            .map(|k| m - 2 * g.cut_value_mask(k) as i32)
            .collect();
        Ok(CostDiagonal {
            n: g.n(),
            num_edges: g.num_edges(),
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn min_value(&self) -> i64 {
        *self.values.iter().min().expect("diagonal is nonempty") as i64
    }

    /// `exp(-i·gamma·v)` for every possible value `v ∈ [-|E|, |E|]`.
    fn phase_table(&self, gamma: f64) -> Vec<Complex64> {
        let m = self.num_edges as i32;
        (-m..=m)
            .map(|v| Complex64::from_polar(1.0, -gamma * v as f64))
            .collect()
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Capacity(format!(
            "simulator supports 1..={MAX_QUBITS} qubits, got {n}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|+⟩^{⊗n}`: every amplitude equals `2^{-n/2}`.
    pub fn plus(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let dim = 1usize << n;
        let a = Complex64::new((dim as f64).sqrt().recip(), 0.0);
        Ok(StateVector {
            n,
            amps: vec![a; dim],
        })
    }

    /// Computational basis state `|k⟩`.
    pub fn basis(n: usize, k: usize) -> Result<Self> {
        check_qubits(n)?;
        if k >= 1 << n {
            return Err(Error::Parameter(format!("basis index {k} out of range")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[k] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n, amps })
    }

    /// Wrap raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let dim = amps.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "amplitude count {dim} is not a power of two >= 2"
            )));
        }
        let n = dim.trailing_zeros() as usize;
        check_qubits(n)?;
        Ok(StateVector { n, amps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Multiply amplitude `k` by `exp(-i·gamma·values[k])`.
    pub fn apply_cost_evolution(&mut self, diag: &CostDiagonal, gamma: f64) -> Result<()> {
        if diag.n != self.n {
            return Err(Error::Parameter(format!(
                "cost diagonal is for {} qubits, state has {}",
                diag.n, self.n
            )));
        }
        self.apply_cost_unchecked(diag, gamma);
        Ok(())
    }

    fn apply_cost_unchecked(&mut self, diag: &CostDiagonal, gamma: f64) {
        let table = diag.phase_table(gamma);
        let offset = diag.num_edges as i32;
        for (a, &v) in self.amps.iter_mut().zip(&diag.values) {
            *a *= table[(v + offset) as usize];
        }
    }

    /// `exp(-i·beta·Σ_i X_i)`, one single-qubit rotation per qubit.
    pub fn apply_mixer_evolution(&mut self, beta: f64) {
        let (s, c) = beta.sin_cos();
        for q in 0..self.n {
            self.rotate_x(q, c, s);
        }
    }

    /// `exp(-iθX)` on qubit `q`, given `c = cos θ` and `s = sin θ`.
    fn rotate_x(&mut self, q: usize, c: f64, s: f64) {
        let stride = 1usize << q;
        let mis = Complex64::new(0.0, -s);
        for block in self.amps.chunks_exact_mut(2 * stride) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let x0 = *a0;
                let x1 = *a1;
                *a0 = x0 * c + x1 * mis;
                *a1 = x0 * mis + x1 * c;
            }
        }
    }

    /// `⟨ψ|H|ψ⟩` for the diagonal operator `diag`.
    pub fn expectation(&self, diag: &CostDiagonal) -> f64 {
        self.amps
            .iter()
            .zip(&diag.values)
            .map(|(a, &v)| a.norm_sqr() * v as f64)
            .sum()
    }
}

/// A graph's cost diagonal plus everything needed to evaluate the depth-3
/// ansatz on it. Immutable and shareable across threads.
#[derive(Debug, Clone)]
pub struct QaoaCircuit {
    diag: CostDiagonal,
}

impl QaoaCircuit {
    pub fn new(g: &Graph) -> Result<Self> {
        Ok(QaoaCircuit {
            diag: CostDiagonal::new(g)?,
        })
    }

    pub fn diagonal(&self) -> &CostDiagonal {
        &self.diag
    }

    pub fn n(&self) -> usize {
        self.diag.n
    }

    /// Smallest eigenvalue of the cost operator.
    pub fn ground_energy(&self) -> i64 {
        self.diag.min_value()
    }

    fn apply_layers(&self, sv: &mut StateVector, params: &ParamVector, from: usize) {
        for layer in from..LAYERS {
            sv.apply_cost_unchecked(&self.diag, params.gammas[layer]);
            sv.apply_mixer_evolution(params.betas[layer]);
        }
    }

    pub fn state(&self, params: &ParamVector) -> StateVector {
        let mut sv = StateVector::plus(self.diag.n).expect("qubit count checked at construction");
        self.apply_layers(&mut sv, params, 0);
        sv
    }

    pub fn expectation(&self, params: &ParamVector) -> f64 {
        self.state(params).expectation(&self.diag)
    }

    /// Gradient in `(γ1, γ2, γ3, β1, β2, β3)` order.
    ///
    /// Each mixer angle drives `n` commuting `exp(-iβX_q)` rotations whose
    /// generators have eigenvalues ±1, so its derivative is the sum over
    /// qubits of `C(β_q + π/4) - C(β_q - π/4)`. The cost angles use a central
    /// difference because the cost spectrum is not two-valued. States before
    /// and after each layer are cached so every shifted circuit only replays
    /// its suffix.
    pub fn gradient(&self, params: &ParamVector) -> [f64; NUM_PARAMS] {
        self.value_and_gradient(params).1
    }

    /// [`Self::expectation`] and [`Self::gradient`] from one forward pass.
    pub fn value_and_gradient(&self, params: &ParamVector) -> (f64, [f64; NUM_PARAMS]) {
        let n = self.diag.n;
        let mut grad = [0.0; NUM_PARAMS];

        let mut before_cost = Vec::with_capacity(LAYERS);
        let mut after_mixer = Vec::with_capacity(LAYERS);
        let mut sv = StateVector::plus(n).expect("qubit count checked at construction");
        for layer in 0..LAYERS {
            before_cost.push(sv.clone());
            sv.apply_cost_unchecked(&self.diag, params.gammas[layer]);
            sv.apply_mixer_evolution(params.betas[layer]);
            after_mixer.push(sv.clone());
        }

        let value = sv.expectation(&self.diag);
        let mut scratch = sv;
        let (s, c) = FRAC_PI_4.sin_cos();
        for layer in 0..LAYERS {
            // Mixer angle: per-qubit two-term shift.
            let mut d = 0.0;
            for q in 0..n {
                for sign in [1.0, -1.0] {
                    scratch.amps.clone_from(&after_mixer[layer].amps);
                    scratch.rotate_x(q, c, sign * s);
                    self.apply_layers(&mut scratch, params, layer + 1);
                    d += sign * scratch.expectation(&self.diag);
                }
            }
            grad[LAYERS + layer] = d;

            // Cost angle: central difference.
            let mut e = [0.0; 2];
            for (slot, sign) in [1.0, -1.0].into_iter().enumerate() {
                scratch.amps.clone_from(&before_cost[layer].amps);
                scratch
                    .apply_cost_unchecked(&self.diag, params.gammas[layer] + sign * GAMMA_FD_STEP);
                scratch.apply_mixer_evolution(params.betas[layer]);
                self.apply_layers(&mut scratch, params, layer + 1);
                e[slot] = scratch.expectation(&self.diag);
            }
            grad[layer] = (e[0] - e[1]) / (2.0 * GAMMA_FD_STEP);
        }
        (value, grad)
    }
}

pub fn prepare_plus_state(n: usize) -> Result<StateVector> {
    StateVector::plus(n)
}

pub fn qaoa_state(g: &Graph, params: &ParamVector) -> Result<StateVector> {
    Ok(QaoaCircuit::new(g)?.state(params))
}

pub fn cost_expectation(g: &Graph, params: &ParamVector) -> Result<f64> {
    Ok(QaoaCircuit::new(g)?.expectation(params))
}

pub fn cost_gradient(g: &Graph, params: &ParamVector) -> Result<[f64; NUM_PARAMS]> {
    Ok(QaoaCircuit::new(g)?.gradient(params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{brute_force_maxcut, generate_random_graph};
    use crate::seed::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::{FRAC_PI_8, SQRT_2};

    fn single_edge() -> Graph {
        Graph::new(2, [(0, 1)]).unwrap()
    }

    fn random_state(n: usize, rng: &mut crate::seed::Rng) -> StateVector {
        let mut amps: Vec<Complex64> = (0..1 << n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        StateVector::from_amplitudes(amps).unwrap()
    }

    #[test]
    fn plus_state_amplitudes() {
        let s1 = prepare_plus_state(1).unwrap();
        for a in s1.amplitudes() {
            assert!((a.re - 1.0 / SQRT_2).abs() < 1e-15 && a.im == 0.0);
        }
        let s3 = prepare_plus_state(3).unwrap();
        assert_eq!(s3.amplitudes().len(), 8);
        for a in s3.amplitudes() {
            assert!((a.re - 1.0 / (2.0 * SQRT_2)).abs() < 1e-15);
        }
        assert!((s3.norm_sqr() - 1.0).abs() < 1e-15);
        let s8 = prepare_plus_state(8).unwrap();
        assert!(s8
            .amplitudes()
            .iter()
            .all(|a| a.re == 0.0625 && a.im == 0.0));
        assert!(matches!(prepare_plus_state(0), Err(Error::Capacity(_))));
        assert!(matches!(prepare_plus_state(25), Err(Error::Capacity(_))));
    }

    #[test]
    fn cost_evolution_examples() {
        let g = single_edge();
        let diag = CostDiagonal::new(&g).unwrap();
        assert_eq!(diag.values(), &[1, -1, -1, 1]);

        let mut rng = rng_from_seed(11);
        let s = random_state(2, &mut rng);
        let mut t = s.clone();
        t.apply_cost_evolution(&diag, 0.0).unwrap();
        assert_eq!(s, t);

        let mut zero = StateVector::basis(2, 0).unwrap();
        zero.apply_cost_evolution(&diag, PI).unwrap();
        let a = zero.amplitudes()[0];
        assert!((a.re + 1.0).abs() < 1e-15 && a.im.abs() < 1e-15);

        let wrong = CostDiagonal::new(&Graph::complete(3).unwrap()).unwrap();
        assert!(matches!(
            zero.apply_cost_evolution(&wrong, 0.1),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn norm_is_preserved_by_both_evolutions() {
        let mut rng = rng_from_seed(5);
        for trial in 0..100 {
            let n = 1 + trial % 6;
            let g = generate_random_graph(n.max(2), 0.6, trial as u64).unwrap();
            let diag = CostDiagonal::new(&g).unwrap();
            let mut s = random_state(diag.n(), &mut rng);
            let before = s.norm_sqr();
            s.apply_cost_evolution(&diag, rng.random_range(-10.0..10.0))
                .unwrap();
            assert!((s.norm_sqr() - before).abs() < 1e-12);
            s.apply_mixer_evolution(rng.random_range(-10.0..10.0));
            assert!((s.norm_sqr() - before).abs() < 1e-12);
        }
    }

    #[test]
    fn mixer_examples() {
        let mut rng = rng_from_seed(2);
        let s = random_state(3, &mut rng);
        let mut t = s.clone();
        t.apply_mixer_evolution(0.0);
        assert_eq!(s, t);

        let mut flip = StateVector::basis(1, 0).unwrap();
        flip.apply_mixer_evolution(FRAC_PI_2);
        let a = flip.amplitudes();
        assert!(a[0].norm() < 1e-15);
        assert!((a[1] - Complex64::new(0.0, -1.0)).norm() < 1e-15);

        let mut two = StateVector::basis(2, 0).unwrap();
        two.apply_mixer_evolution(FRAC_PI_4);
        for a in two.amplitudes() {
            assert!((a.norm() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_params_leave_plus_state_and_zero_energy() {
        for seed in 0..10 {
            let g = generate_random_graph(5, 0.5, seed).unwrap();
            let s = qaoa_state(&g, &ParamVector::zeros()).unwrap();
            let plus = prepare_plus_state(5).unwrap();
            for (a, b) in s.amplitudes().iter().zip(plus.amplitudes()) {
                assert!((a - b).norm() < 1e-15);
            }
            assert!(cost_expectation(&g, &ParamVector::zeros()).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn single_edge_depth_one_closed_form() {
        // <Z0 Z1> after one layer on an isolated edge is sin(4β)·sin(2γ).
        let g = single_edge();
        let mut rng = rng_from_seed(9);
        for _ in 0..20 {
            let gamma = rng.random_range(-PI..PI);
            let beta = rng.random_range(-PI..PI);
            let p = ParamVector::new([gamma, 0.0, 0.0], [beta, 0.0, 0.0]);
            let want = (4.0 * beta).sin() * (2.0 * gamma).sin();
            assert!((cost_expectation(&g, &p).unwrap() - want).abs() < 1e-12);
        }
        let p = ParamVector::new([FRAC_PI_8, 0.0, 0.0], [FRAC_PI_8, 0.0, 0.0]);
        let e = cost_expectation(&g, &p).unwrap();
        assert!((e - 1.0 / SQRT_2).abs() < 1e-12);
        // d/dβ = 4 cos(4β) sin(2γ) vanishes at β = π/8; d/dγ = 2 sin(4β) cos(2γ).
        let grad = cost_gradient(&g, &p).unwrap();
        assert!(grad[3].abs() < 1e-12, "{grad:?}");
        assert!((grad[0] - 2.0 * (FRAC_PI_4).cos()).abs() < 1e-8, "{grad:?}");
        let p = ParamVector::new([FRAC_PI_8, 0.0, 0.0], [0.1, 0.0, 0.0]);
        let grad = cost_gradient(&g, &p).unwrap();
        let want = 4.0 * (0.4f64).cos() * (FRAC_PI_4).sin();
        assert!((grad[3] - want).abs() < 1e-12);
    }

    #[test]
    fn beta_gradient_vanishes_at_origin() {
        for seed in 0..10 {
            let g = generate_random_graph(6, 0.5, seed).unwrap();
            let grad = cost_gradient(&g, &ParamVector::zeros()).unwrap();
            for b in &grad[LAYERS..] {
                assert!(b.abs() < 1e-12, "{grad:?}");
            }
        }
    }

    #[test]
    fn diagonal_matches_brute_force_and_is_flip_symmetric() {
        for seed in 0..30 {
            let n = 2 + (seed as usize % 7);
            let g = generate_random_graph(n, 0.5, seed).unwrap();
            let diag = CostDiagonal::new(&g).unwrap();
            let bf = brute_force_maxcut(&g).unwrap();
            assert_eq!(diag.min_value(), bf.ground_energy);
            let m = g.num_edges() as i32;
            let mask = (1usize << n) - 1;
            for (k, &v) in diag.values().iter().enumerate() {
                assert!((-m..=m).contains(&v));
                assert_eq!((v - m).rem_euclid(2), 0);
                assert_eq!(v, diag.values()[!k & mask]);
            }
        }
    }

    #[test]
    fn wrap_angle_range() {
        for x in [-7.0, -PI, -1.0, 0.0, 1.0, PI, 3.0 * PI / 2.0, 1e6, -1e6] {
            let w = wrap_angle(x);
            assert!((-PI..PI).contains(&w), "{x} -> {w}");
            let turns = (x - w) / TAU;
            assert!((turns - turns.round()).abs() < 1e-9);
        }
        assert_eq!(wrap_angle(PI), -PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn param_vector_serializes_as_flat_array() {
        let p = ParamVector::new([0.5, 1.0, 1.5], [-0.5, -1.0, -1.5]);
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(text, "[0.5,1.0,1.5,-0.5,-1.0,-1.5]");
        assert_eq!(serde_json::from_str::<ParamVector>(&text).unwrap(), p);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn variational_bound_and_unit_norm(n in 2usize..=7, seed in any::<u64>(), angles in prop::array::uniform6(-10.0f64..10.0)) {
            let g = generate_random_graph(n, 0.5, seed).unwrap();
            let circuit = QaoaCircuit::new(&g).unwrap();
            let p = ParamVector::from(angles);
            let s = circuit.state(&p);
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
            let e = circuit.expectation(&p);
            prop_assert!(e >= circuit.ground_energy() as f64 - 1e-10);
            prop_assert!(e <= g.num_edges() as f64 + 1e-10);
        }

        #[test]
        fn canonical_form_preserves_energy(n in 2usize..=6, seed in any::<u64>(), angles in prop::array::uniform6(-10.0f64..10.0)) {
            let g = generate_random_graph(n, 0.6, seed).unwrap();
            let circuit = QaoaCircuit::new(&g).unwrap();
            let p = ParamVector::from(angles);
            let c = p.canonical();
            prop_assert!((circuit.expectation(&p) - circuit.expectation(&c)).abs() < 1e-9);
            prop_assert!(c.gammas.iter().all(|g| (-FRAC_PI_2..FRAC_PI_2).contains(g)));
            prop_assert!(c.betas.iter().all(|b| (-FRAC_PI_4..FRAC_PI_4).contains(b)));
            prop_assert!(c.gammas[0] >= 0.0);
            prop_assert_eq!(c.canonical(), c);
        }
    }
}
