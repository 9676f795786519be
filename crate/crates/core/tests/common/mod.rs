//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls into the simulator: states and operators are built as
//! explicit dense matrices.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qaoa_ddpm::ddpm::model::Layout;
use qaoa_ddpm::ddpm::{ModelDims, NoisePredictor, ParamGroup};
use qaoa_ddpm::graph::Graph;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Square complex matrix, row-major.
#[derive(Clone, Debug)]
pub struct Dense {
    pub dim: usize,
    pub a: Vec<Complex64>,
}

impl Dense {
    pub fn identity(dim: usize) -> Self {
        let mut a = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            a[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        Dense { dim, a }
    }

    pub fn from_rows(rows: &[[Complex64; 2]; 2]) -> Self {
        Dense {
            dim: 2,
            a: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn kron(&self, other: &Dense) -> Dense {
        let dim = self.dim * other.dim;
        let mut a = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..self.dim {
            for j in 0..self.dim {
                let s = self.a[i * self.dim + j];
                for k in 0..other.dim {
                    for l in 0..other.dim {
                        a[(i * other.dim + k) * dim + j * other.dim + l] =
                            s * other.a[k * other.dim + l];
                    }
                }
            }
        }
        Dense { dim, a }
    }

    pub fn matmul(&self, other: &Dense) -> Dense {
        let d = self.dim;
        let mut a = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for k in 0..d {
                let s = self.a[i * d + k];
                for j in 0..d {
                    a[i * d + j] += s * other.a[k * d + j];
                }
            }
        }
        Dense { dim: d, a }
    }

    pub fn add_scaled(&self, other: &Dense, c: Complex64) -> Dense {
        Dense {
            dim: self.dim,
            a: self
                .a
                .iter()
                .zip(&other.a)
                .map(|(x, y)| x + c * y)
                .collect(),
        }
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.a[i * self.dim + j] * v[j]).sum())
            .collect()
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `op` on qubit `q` of `n`, identity elsewhere. Qubit `q` is bit `q` of the
/// basis index, so it is the `(n-1-q)`-th Kronecker factor from the left.
pub fn on_qubit(op: &Dense, q: usize, n: usize) -> Dense {
    let mut m = Dense::identity(1);
    for pos in (0..n).rev() {
        let f = if pos == q {
            op.clone()
        } else {
            Dense::identity(2)
        };
        m = m.kron(&f);
    }
    m
}

pub fn pauli_x() -> Dense {
    Dense::from_rows(&[[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]])
}

pub fn pauli_z() -> Dense {
    Dense::from_rows(&[[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]])
}

pub fn hadamard() -> Dense {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Dense::from_rows(&[[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]])
}

/// Σ over edges of Z_i Z_j.
pub fn cost_hamiltonian(g: &Graph) -> Dense {
    let n = g.n();
    let dim = 1 << n;
    let mut h = Dense {
        dim,
        a: vec![c(0.0, 0.0); dim * dim],
    };
    for &(i, j) in g.edges() {
        let zz = on_qubit(&pauli_z(), i, n).matmul(&on_qubit(&pauli_z(), j, n));
        h = h.add_scaled(&zz, c(1.0, 0.0));
    }
    h
}

/// exp(-iθP) = cos θ·I − i sin θ·P for an involutory P.
fn involutory_exp(p: &Dense, theta: f64) -> Dense {
    let mut m = Dense::identity(p.dim);
    for x in m.a.iter_mut() {
        *x *= theta.cos();
    }
    m.add_scaled(p, c(0.0, -theta.sin()))
}

/// ⟨ψ(γ, β)|H_C|ψ(γ, β)⟩ with every layer built as an explicit unitary.
pub fn dense_expectation(g: &Graph, gammas: &[f64; 3], betas: &[f64; 3]) -> f64 {
    let n = g.n();
    let dim = 1 << n;
    let mut psi = vec![c(0.0, 0.0); dim];
    psi[0] = c(1.0, 0.0);
    let mut hn = Dense::identity(1);
    for _ in 0..n {
        hn = hn.kron(&hadamard());
    }
    psi = hn.apply(&psi);
    for layer in 0..3 {
        let mut uc = Dense::identity(dim);
        for &(i, j) in g.edges() {
            let zz = on_qubit(&pauli_z(), i, n).matmul(&on_qubit(&pauli_z(), j, n));
            uc = involutory_exp(&zz, gammas[layer]).matmul(&uc);
        }
        psi = uc.apply(&psi);
        let mut um = Dense::identity(dim);
        for q in 0..n {
            um = involutory_exp(&on_qubit(&pauli_x(), q, n), betas[layer]).matmul(&um);
        }
        psi = um.apply(&psi);
    }
    let hpsi = cost_hamiltonian(g).apply(&psi);
    psi.iter().zip(&hpsi).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Random graph with at least one edge, independent of the crate's generator.
pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> Graph {
    loop {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        if !edges.is_empty() {
            return Graph::new(n, edges).unwrap();
        }
    }
}

/// Max cut by plain enumeration of all 2^n assignments.
pub fn enumerate_maxcut(g: &Graph) -> usize {
    (0u64..1 << g.n())
        .map(|mask| {
            g.edges()
                .iter()
                .filter(|&&(i, j)| (mask >> i & 1) != (mask >> j & 1))
                .count()
        })
        .max()
        .unwrap()
}

pub fn random_angles(rng: &mut impl Rng) -> ([f64; 3], [f64; 3]) {
    let mut draw = || rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    ([draw(), draw(), draw()], [draw(), draw(), draw()])
}

/// Outcome of a finite-difference audit of the noise-predictor gradient.
#[derive(Debug)]
pub struct BackpropAudit {
    pub checked: usize,
    pub failures: Vec<String>,
    pub groups_checked: usize,
}

/// Compare analytic loss gradients with central differences (step `h`) on a
/// random batch. Every entry of small groups is checked; large groups are
/// subsampled, with embedding rows restricted to timesteps in the batch.
pub fn audit_backprop(
    dims: ModelDims,
    seed: u64,
    per_group: usize,
    h: f64,
    rel: f64,
) -> BackpropAudit {
    let mut r = rng(seed);
    let mut model = NoisePredictor::init(dims, seed).unwrap();
    let batch: Vec<(Vec<f64>, usize, Vec<f64>)> = (0..6)
        .map(|_| {
            let x = (0..dims.input).map(|_| r.random_range(-1.5..1.5)).collect();
            let t = r.random_range(1..=dims.steps);
            let e = (0..dims.input).map(|_| r.random_range(-2.0..2.0)).collect();
            (x, t, e)
        })
        .collect();
    let mut grad = vec![0.0; model.params().len()];
    model.batch_loss(&batch, Some(&mut grad)).unwrap();
    let layout = Layout::new(&dims);
    let mut audit = BackpropAudit {
        checked: 0,
        failures: Vec::new(),
        groups_checked: 0,
    };
    for g in ParamGroup::ALL {
        let range = layout.range(g);
        let candidates: Vec<usize> =
            if matches!(g, ParamGroup::Emb1 | ParamGroup::Emb2 | ParamGroup::Emb3) {
                batch
                    .iter()
                    .flat_map(|(_, t, _)| {
                        let start = range.start + (t - 1) * dims.hidden;
                        start..start + dims.hidden
                    })
                    .collect()
            } else {
                range.clone().collect()
            };
        let picks: Vec<usize> = if candidates.len() <= per_group {
            candidates
        } else {
            (0..per_group)
                .map(|_| candidates[r.random_range(0..candidates.len())])
                .collect()
        };
        for i in picks {
            let orig = model.params()[i];
            model.params_mut()[i] = orig + h;
            let up = model.batch_loss(&batch, None).unwrap();
            model.params_mut()[i] = orig - h;
            let down = model.batch_loss(&batch, None).unwrap();
            model.params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let scale = grad[i].abs().max(fd.abs());
            audit.checked += 1;
            if (grad[i] - fd).abs() > rel * scale + 1e-9 {
                audit.failures.push(format!(
                    "{} entry {}: analytic {} fd {fd}",
                    g.name(),
                    i - range.start,
                    grad[i]
                ));
            }
        }
        audit.groups_checked += 1;
    }
    audit
}
