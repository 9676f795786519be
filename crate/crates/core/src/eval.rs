//! Head-to-head comparison of diffusion-sampled and uniformly random QAOA
//! initializations on fresh test graphs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::{denormalize_params, ENERGY_TOLERANCE};
use crate::ddpm::{sample, NoisePredictor, NoiseSchedule};
use crate::error::{Error, Result};
use crate::graph::{brute_force_maxcut, generate_random_graph, Graph};
use crate::qaoa_opt::{optimize, random_init, start_seed, OptimizerConfig};
use crate::qsim::{ParamVector, QaoaCircuit};
use crate::seed::{derive_seed, rng_from_seed, stream};

pub const RATIO_DEFINITION: &str = "ratio = best_energy_ddpm / best_energy_random when both are \
strictly negative, otherwise \"undefined\" and excluded from means; above 1 favours the diffusion arm";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub num_graphs: usize,
    /// Inclusive; instance `i` gets `n_range[0] + i mod (span)` nodes.
    pub n_range: [usize; 2],
    pub p_range: [f64; 2],
    /// Candidates drawn per arm before picking the initialization.
    pub samples_per_arm: usize,
    pub refine_steps: usize,
    /// Adam settings for refinement; `max_iters` is replaced by `refine_steps`.
    pub optimizer: OptimizerConfig,
    /// Instances whose per-step energies are kept for convergence plots.
    pub trace_instances: usize,
    /// Reuse the random arm's candidates in the diffusion arm.
    pub self_compare: bool,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            num_graphs: 50,
            n_range: [4, 8],
            p_range: [0.3, 0.75],
            samples_per_arm: 16,
            refine_steps: 100,
            optimizer: OptimizerConfig::default(),
            trace_instances: 5,
            self_compare: false,
            seed: 0,
        }
    }
}

impl EvalConfig {
    /// Eight graphs with 9 through 16 nodes, on a seed stream separate from
    /// the standard test set.
    pub fn large(seed: u64) -> Self {
        EvalConfig {
            num_graphs: 8,
            n_range: [9, 16],
            seed: derive_seed(seed, stream::EVAL_LARGE, 0),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_graphs == 0 || self.samples_per_arm == 0 || self.refine_steps == 0 {
            return Err(Error::Parameter(
                "num_graphs, samples_per_arm and refine_steps must all be at least 1".into(),
            ));
        }
        let [lo, hi] = self.n_range;
        if lo < 2 || lo > hi || hi > crate::graph::MAX_BRUTE_FORCE_NODES {
            return Err(Error::Parameter(format!("invalid node range {lo}..={hi}")));
        }
        let [plo, phi] = self.p_range;
        if !(plo > 0.0 && plo <= phi && phi <= 1.0) {
            return Err(Error::Parameter(format!(
                "invalid edge-probability range [{plo}, {phi}]"
            )));
        }
        self.refine_config().validate()
    }

    fn refine_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            max_iters: self.refine_steps,
            ..self.optimizer
        }
    }
}

/// `Some(r)` serializes as a number, `None` as the string `"undefined"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio(pub Option<f64>);

impl Ratio {
    pub fn between(ddpm: f64, random: f64) -> Self {
        Ratio((ddpm < 0.0 && random < 0.0).then(|| ddpm / random))
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            Some(r) => write!(f, "{r}"),
            None => f.write_str("undefined"),
        }
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Some(r) => s.serialize_f64(r),
            None => s.serialize_str("undefined"),
        }
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Flag(String),
        }
        match Repr::deserialize(d)? {
            Repr::Number(r) => Ok(Ratio(Some(r))),
            Repr::Flag(s) if s == "undefined" => Ok(Ratio(None)),
            Repr::Flag(s) => Err(serde::de::Error::custom(format!("unexpected ratio {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub id: usize,
    pub n: usize,
    pub num_edges: usize,
    pub p_edge: f64,
    pub ground_energy: i64,
    pub init_energy_ddpm: f64,
    pub init_energy_random: f64,
    pub best_energy_ddpm: f64,
    pub best_energy_random: f64,
    pub ratio: Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    pub instances: usize,
    pub defined: usize,
    pub mean_ratio: Ratio,
}

/// Per-step energies of both arms for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub id: usize,
    pub n: usize,
    pub energies_ddpm: Vec<f64>,
    pub energies_random: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub ratio_definition: String,
    pub rows: Vec<EvalRow>,
    pub by_size: Vec<SizeSummary>,
    pub mean_ratio: Ratio,
    pub traces: Vec<ConvergenceTrace>,
}

fn mean_ratio<'a>(rows: impl Iterator<Item = &'a EvalRow>) -> (usize, Ratio) {
    let defined: Vec<f64> = rows.filter_map(|r| r.ratio.0).collect();
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    (defined.len(), Ratio(mean))
}

/// The graph and edge probability of test instance `index`.
pub fn test_instance(cfg: &EvalConfig, index: usize) -> Result<(f64, Graph)> {
    let seed = derive_seed(cfg.seed, stream::EVAL_INSTANCE, index as u64);
    let span = cfg.n_range[1] - cfg.n_range[0] + 1;
    let n = cfg.n_range[0] + index % span;
    let p = rng_from_seed(seed).random_range(cfg.p_range[0]..=cfg.p_range[1]);
    let g = generate_random_graph(n, p, derive_seed(seed, stream::GRAPH, 0))?;
    Ok((p, g))
}

/// Lowest-energy candidate, earliest index on ties.
fn select(circuit: &QaoaCircuit, candidates: &[ParamVector]) -> (ParamVector, f64) {
    let mut best = (candidates[0], f64::INFINITY);
    for c in candidates {
        let e = circuit.expectation(c);
        if e < best.1 {
            best = (*c, e);
        }
    }
    best
}

fn evaluate_instance(
    model: &NoisePredictor,
    schedule: &NoiseSchedule,
    cfg: &EvalConfig,
    index: usize,
) -> Result<(EvalRow, ConvergenceTrace)> {
    let (p_edge, graph) = test_instance(cfg, index)?;
    let circuit = QaoaCircuit::new(&graph)?;
    let ground_energy = brute_force_maxcut(&graph)?.ground_energy;
    let seed = derive_seed(cfg.seed, stream::EVAL_INSTANCE, index as u64);

    let random_parent = derive_seed(seed, stream::EVAL_RANDOM, 0);
    let random: Vec<ParamVector> = (0..cfg.samples_per_arm)
        .map(|j| random_init(start_seed(random_parent, j)))
        .collect();
    let ddpm: Vec<ParamVector> = if cfg.self_compare {
        random.clone()
    } else {
        sample(
            model,
            schedule,
            cfg.samples_per_arm,
            derive_seed(seed, stream::EVAL_DDPM, 0),
        )?
        .iter()
        .map(|x| denormalize_params(x))
        .collect::<Result<_>>()?
    };

    let refine = cfg.refine_config();
    let (init_d, init_energy_ddpm) = select(&circuit, &ddpm);
    let (init_r, init_energy_random) = select(&circuit, &random);
    let trace_d = optimize(&circuit, &init_d, &refine)?;
    let trace_r = optimize(&circuit, &init_r, &refine)?;

    for (arm, e) in [
        ("diffusion", trace_d.best_energy),
        ("random", trace_r.best_energy),
    ] {
        if e < ground_energy as f64 - ENERGY_TOLERANCE {
            return Err(Error::Invariant(format!(
                "{arm} arm energy {e} is below ground energy {ground_energy}"
            )));
        }
    }
    let row = EvalRow {
        id: index,
        n: graph.n(),
        num_edges: graph.num_edges(),
        p_edge,
        ground_energy,
        init_energy_ddpm,
        init_energy_random,
        best_energy_ddpm: trace_d.best_energy,
        best_energy_random: trace_r.best_energy,
        ratio: Ratio::between(trace_d.best_energy, trace_r.best_energy),
    };
    let trace = ConvergenceTrace {
        id: index,
        n: graph.n(),
        energies_ddpm: trace_d.energies,
        energies_random: trace_r.energies,
    };
    Ok((row, trace))
}

/// Evaluate both arms on `cfg.num_graphs` test instances.
pub fn evaluate(
    model: &NoisePredictor,
    schedule: &NoiseSchedule,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    if model.dims().input != crate::qsim::NUM_PARAMS {
        return Err(Error::Parameter(format!(
            "model produces {}-vectors, QAOA needs {}",
            model.dims().input,
            crate::qsim::NUM_PARAMS
        )));
    }
    let results = (0..cfg.num_graphs)
        .into_par_iter()
        .map(|i| {
            evaluate_instance(model, schedule, cfg, i).map_err(|e| Error::Instance {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, traces): (Vec<EvalRow>, Vec<ConvergenceTrace>) = results.into_iter().unzip();

    let mut sizes: BTreeMap<usize, Vec<&EvalRow>> = BTreeMap::new();
    for r in &rows {
        sizes.entry(r.n).or_default().push(r);
    }
    let by_size = sizes
        .into_iter()
        .map(|(n, group)| {
            let (defined, mean_ratio) = mean_ratio(group.iter().copied());
            SizeSummary {
                n,
                instances: group.len(),
                defined,
                mean_ratio,
            }
        })
        .collect();
    let (_, overall) = mean_ratio(rows.iter());
    Ok(EvalReport {
        config: *cfg,
        ratio_definition: RATIO_DEFINITION.into(),
        by_size,
        mean_ratio: overall,
        traces: traces.into_iter().take(cfg.trace_instances).collect(),
        rows,
    })
}

pub const INSTANCE_CSV_HEADER: &str =
    "id,n,edges,p_edge,ground_energy,init_energy_ddpm,init_energy_random,best_energy_ddpm,best_energy_random,ratio";
pub const TRACE_CSV_HEADER: &str = "id,n,step,energy_ddpm,energy_random";

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization is infallible");
        s.push('\n');
        s
    }

    /// One line per instance; columns per [`INSTANCE_CSV_HEADER`].
    pub fn instances_csv(&self) -> String {
        let mut out = format!("{INSTANCE_CSV_HEADER}\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.id,
                r.n,
                r.num_edges,
                r.p_edge,
                r.ground_energy,
                r.init_energy_ddpm,
                r.init_energy_random,
                r.best_energy_ddpm,
                r.best_energy_random,
                r.ratio
            )
            .unwrap();
        }
        out
    }

    /// One line per (instance, step) of the kept traces; step 0 is the
    /// selected initialization.
    pub fn traces_csv(&self) -> String {
        let mut out = format!("{TRACE_CSV_HEADER}\n");
        for t in &self.traces {
            for (step, (d, r)) in t.energies_ddpm.iter().zip(&t.energies_random).enumerate() {
                writeln!(out, "{},{},{step},{d},{r}", t.id, t.n).unwrap();
            }
        }
        out
    }

    /// Human-readable per-size table.
    pub fn summary(&self) -> String {
        let mut out = String::from("   n  instances  defined  mean_ratio\n");
        for s in &self.by_size {
            writeln!(
                out,
                "{:>4}  {:>9}  {:>7}  {}",
                s.n,
                s.instances,
                s.defined,
                fmt_ratio(s.mean_ratio)
            )
            .unwrap();
        }
        writeln!(
            out,
            " all  {:>9}  {:>7}  {}",
            self.rows.len(),
            self.rows.iter().filter(|r| r.ratio.0.is_some()).count(),
            fmt_ratio(self.mean_ratio)
        )
        .unwrap();
        out
    }
}

fn fmt_ratio(r: Ratio) -> String {
    match r.0 {
        Some(v) => format!("{v:.4}"),
        None => "undefined".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddpm::{build_schedule, ModelDims};

    fn tiny_model() -> (NoisePredictor, NoiseSchedule) {
        let s = build_schedule(10).unwrap();
        let m = NoisePredictor::init(
            ModelDims {
                input: 6,
                hidden: 8,
                steps: 10,
            },
            2,
        )
        .unwrap();
        (m, s)
    }

    fn small_cfg() -> EvalConfig {
        EvalConfig {
            num_graphs: 6,
            samples_per_arm: 4,
            refine_steps: 15,
            trace_instances: 2,
            seed: 5,
            ..Default::default()
        }
    }

    #[test]
    fn ratio_rules() {
        assert_eq!(Ratio::between(-2.0, -1.0), Ratio(Some(2.0)));
        assert_eq!(Ratio::between(0.0, -1.0), Ratio(None));
        assert_eq!(Ratio::between(-1.0, 0.5), Ratio(None));
        assert_eq!(
            serde_json::to_string(&Ratio(None)).unwrap(),
            "\"undefined\""
        );
        assert_eq!(
            serde_json::from_str::<Ratio>("1.5").unwrap(),
            Ratio(Some(1.5))
        );
        assert_eq!(
            serde_json::from_str::<Ratio>("\"undefined\"").unwrap(),
            Ratio(None)
        );
        assert!(serde_json::from_str::<Ratio>("\"nope\"").is_err());
    }

    #[test]
    fn test_instances_balance_node_sizes() {
        let cfg = EvalConfig::default();
        let mut counts = [0; 5];
        for i in 0..cfg.num_graphs {
            let (p, g) = test_instance(&cfg, i).unwrap();
            assert!((0.3..=0.75).contains(&p));
            counts[g.n() - 4] += 1;
        }
        assert_eq!(counts, [10; 5]);
        let large = EvalConfig::large(0);
        let ns: Vec<usize> = (0..8)
            .map(|i| test_instance(&large, i).unwrap().1.n())
            .collect();
        assert_eq!(ns, (9..=16).collect::<Vec<_>>());
    }

    #[test]
    fn self_comparison_gives_unit_ratios() {
        let (m, s) = tiny_model();
        let cfg = EvalConfig {
            self_compare: true,
            ..small_cfg()
        };
        let report = evaluate(&m, &s, &cfg).unwrap();
        assert_eq!(report.rows.len(), 6);
        for r in &report.rows {
            assert_eq!(r.best_energy_ddpm, r.best_energy_random);
            assert_eq!(r.ratio, Ratio(Some(1.0)));
        }
        assert_eq!(report.mean_ratio, Ratio(Some(1.0)));
    }

    #[test]
    fn report_is_deterministic_and_consistent() {
        let (m, s) = tiny_model();
        let a = evaluate(&m, &s, &small_cfg()).unwrap();
        let b = evaluate(&m, &s, &small_cfg()).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.traces.len(), 2);
        assert_eq!(a.traces[0].energies_ddpm.len(), 16);
        for r in &a.rows {
            assert!(r.best_energy_ddpm >= r.ground_energy as f64 - 1e-9);
            assert!(r.best_energy_random >= r.ground_energy as f64 - 1e-9);
            assert!(r.best_energy_ddpm <= r.init_energy_ddpm);
        }
        let csv = a.instances_csv();
        assert_eq!(csv.lines().count(), 7);
        assert_eq!(a.traces_csv().lines().count(), 1 + 2 * 16);
        let back: EvalReport = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (m, s) = tiny_model();
        let cfg = EvalConfig {
            samples_per_arm: 0,
            ..small_cfg()
        };
        assert!(evaluate(&m, &s, &cfg).is_err());
        let wrong = NoisePredictor::zeros(ModelDims {
            input: 5,
            hidden: 4,
            steps: 10,
        })
        .unwrap();
        assert!(evaluate(&wrong, &s, &small_cfg()).is_err());
    }
}
