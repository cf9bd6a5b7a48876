//! Two-decoder orchestration: the naive all-unicast baseline and the
//! broadcast-plus-refinement scheme, with exact bit accounting.
//!
//! Both schemes couple the decoders through one shared pair stream drawn
//! from the joint prior; decoder `i` sees coordinate `i` of every pair. In
//! the hierarchical scheme the stage-one block index is broadcast, so its
//! cost is paid once per transmission no matter how many decoders listen,
//! while each decoder's refinement index travels on its own unicast link.
//! Refinement pools are drawn from the joint and rejection-filtered on the
//! block of the shared pair, so both decoders accept exactly the same draw
//! positions and stay in lockstep without extra coordination.

use std::collections::HashMap;

use serde::Serialize;

use crate::bounds::{
    bias_bound_lemma1, bound_report, deviation_bound_prop1, BiasBound, BoundReport,
    DeviationBound,
};
use crate::common_info::{gk_decompose, GkDecomposition};
use crate::dist::{
    block_marginal, condition_on_block, kl, tv, Alphabet, JointPmf, Partition, Pmf,
};
use crate::error::{Error, Result};
use crate::hier::HierMessage;
use crate::mrc::{aux_distribution, ceil_log2, encode_index};
use crate::oracles::{exact_selected_distribution_hier, exact_selected_distribution_mrc};
use crate::randomness::{fnv1a64, SharedStream, StreamSeed};

/// Which scheme(s) to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Naive,
    Hierarchical,
    Both,
}

/// Explicit size overrides; anything left `None` follows the divergence
/// rule.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SizeOverrides {
    pub n_c: Option<usize>,
    pub naive_n: Option<Vec<usize>>,
    pub n_ref: Option<Vec<Vec<usize>>>,
}

/// Run parameters shared by both schemes.
#[derive(Debug, Clone, Serialize)]
pub struct RunParams {
    /// Refinement slack in nats.
    pub t: f64,
    /// Block-stage slack in nats.
    pub t_c: f64,
    /// Transmissions per run (the estimator averages this many samples).
    pub reps: usize,
    pub seed: u64,
    pub label: String,
    pub rejection_cap: Option<u64>,
    /// Support threshold handed to the block decomposition.
    pub atol: f64,
    pub overrides: SizeOverrides,
}

/// A full experiment description for two decoders.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub joint: JointPmf,
    pub targets: Vec<Pmf>,
    pub functions: Vec<Vec<f64>>,
    pub params: RunParams,
    pub mode: Scheme,
    /// When set, replaces the computed block structure (the labels must
    /// still form a common variable; checks run against it as given).
    pub partition_override: Option<(Partition, Partition)>,
}

/// Tolerance for the cross-decoder agreement of target block marginals.
pub const BLOCK_TARGET_TOLERANCE: f64 = 1e-9;

/// Resolved proposal counts for every stage.
#[derive(Debug, Clone, Serialize)]
pub struct SampleSizes {
    pub n_c: usize,
    /// Per decoder, per block label.
    pub n_ref: Vec<Vec<usize>>,
    pub naive_n: Vec<usize>,
}

/// A scenario together with everything derived from it once.
#[derive(Debug, Clone)]
pub struct Validated {
    pub scenario: Scenario,
    pub gk: GkDecomposition,
    pub partitions: Vec<Partition>,
    pub marginals: Vec<Pmf>,
    /// The shared target block law (decoder 1's view, validated to agree
    /// with decoder 2's within tolerance).
    pub q_c: Pmf,
    pub sizes: SampleSizes,
    pub digest: u64,
}

fn digest_scenario(sc: &Scenario) -> u64 {
    let mut bytes = Vec::new();
    let push_f64 = |bytes: &mut Vec<u8>, v: f64| bytes.extend_from_slice(&v.to_bits().to_le_bytes());
    bytes.extend_from_slice(&(sc.joint.rows() as u64).to_le_bytes());
    bytes.extend_from_slice(&(sc.joint.cols() as u64).to_le_bytes());
    for &m in sc.joint.flat() {
        push_f64(&mut bytes, m);
    }
    for t in &sc.targets {
        for &m in t.mass() {
            push_f64(&mut bytes, m);
        }
    }
    for f in &sc.functions {
        for &v in f {
            push_f64(&mut bytes, v);
        }
    }
    push_f64(&mut bytes, sc.params.t);
    push_f64(&mut bytes, sc.params.t_c);
    bytes.extend_from_slice(&(sc.params.reps as u64).to_le_bytes());
    bytes.extend_from_slice(&sc.params.seed.to_le_bytes());
    bytes.extend_from_slice(sc.params.label.as_bytes());
    fnv1a64(&bytes)
}

fn ceil_exp(nats: f64) -> usize {
    nats.exp().ceil() as usize
}

/// Validates a scenario and resolves its sample sizes. Every violated rule
/// is reported by name.
pub fn validate(scenario: Scenario) -> Result<Validated> {
    if scenario.targets.len() != 2 || scenario.functions.len() != 2 {
        return Err(Error::invalid_scenario(
            "decoder-count",
            format!(
                "exactly two decoders are supported, got {} targets and {} functions",
                scenario.targets.len(),
                scenario.functions.len()
            ),
        ));
    }

    let gk = match &scenario.partition_override {
        None => gk_decompose(&scenario.joint, scenario.params.atol)?,
        Some((p1, p2)) => {
            // Rebuild the decomposition quantities on the supplied labels.
            build_decomposition_from(&scenario.joint, p1.clone(), p2.clone())?
        }
    };
    let (m1, m2) = scenario.joint.marginals();
    let marginals = vec![m1, m2];
    let partitions = vec![gk.partition1.clone(), gk.partition2.clone()];

    for (i, (target, marginal)) in scenario.targets.iter().zip(&marginals).enumerate() {
        if target.alphabet() != marginal.alphabet() {
            return Err(Error::invalid_scenario(
                "target-alphabet",
                format!("decoder {i}: target alphabet differs from its prior's"),
            ));
        }
        for sym in target.support() {
            if marginal.prob(sym) == 0.0 {
                return Err(Error::invalid_scenario(
                    "target-support",
                    format!(
                        "decoder {i}: target mass {} on symbol {:?} outside the prior support",
                        target.prob(sym),
                        target.alphabet().symbol(sym)
                    ),
                ));
            }
        }
        if scenario.functions[i].len() != target.len() {
            return Err(Error::invalid_scenario(
                "function-length",
                format!(
                    "decoder {i}: {} function values for {} symbols",
                    scenario.functions[i].len(),
                    target.len()
                ),
            ));
        }
        if scenario.functions[i].iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_scenario(
                "function-finite",
                format!("decoder {i}: function table contains a non-finite value"),
            ));
        }
    }

    // The broadcast index only means one thing if both decoders push their
    // targets to the same block law.
    let q_c_1 = clipped_block_marginal(&scenario.targets[0], &partitions[0], gk.block_count);
    let q_c_2 = clipped_block_marginal(&scenario.targets[1], &partitions[1], gk.block_count);
    for c in 0..gk.block_count {
        if (q_c_1.prob(c) - q_c_2.prob(c)).abs() > BLOCK_TARGET_TOLERANCE {
            return Err(Error::BlockTargetMismatch(format!(
                "block {c}: decoder 1 target mass {} vs decoder 2 target mass {}",
                q_c_1.prob(c),
                q_c_2.prob(c)
            )));
        }
    }

    let sizes = resolve_sizes(&scenario, &gk, &partitions, &marginals, &q_c_1)?;

    // Rejection caps must leave room for the expected waiting times.
    for (i, part) in partitions.iter().enumerate() {
        let cfg = crate::hier::HierConfig {
            partition: part.clone(),
            n_c: sizes.n_c,
            n_ref: sizes.n_ref[i].clone(),
            t_c: scenario.params.t_c,
            t: scenario.params.t,
            rejection_cap: scenario.params.rejection_cap,
        };
        cfg.validate(&scenario.targets[i], &marginals[i])
            .map_err(|e| Error::invalid_scenario("sample-sizes", e.to_string()))?;
    }

    let digest = digest_scenario(&scenario);
    Ok(Validated {
        scenario,
        gk,
        partitions,
        marginals,
        q_c: q_c_1,
        sizes,
        digest,
    })
}

/// Block marginal truncated to the live blocks (dead blocks carry no target
/// mass by the support rule, so this is a relabeling).
fn clipped_block_marginal(target: &Pmf, part: &Partition, live: usize) -> Pmf {
    let full = block_marginal(target, part);
    if full.len() == live {
        return full;
    }
    Pmf::new(Alphabet::indexed(live), full.mass()[..live].to_vec())
        .expect("dead blocks carry no target mass")
}

fn build_decomposition_from(
    joint: &JointPmf,
    p1: Partition,
    p2: Partition,
) -> Result<GkDecomposition> {
    let live = p1.block_count().min(p2.block_count());
    let mut mass = vec![0.0; live];
    for i in 0..joint.rows() {
        let c = p1.block_of(i);
        if c >= live {
            continue;
        }
        for k in 0..joint.cols() {
            if p2.block_of(k) == c {
                mass[c] += joint.prob(i, k);
            }
        }
    }
    let p_c = Pmf::new(Alphabet::indexed(live), mass).map_err(|e| {
        Error::invalid_scenario("partition-override", format!("block masses invalid: {e}"))
    })?;
    let (m1, m2) = joint.marginals();
    let mut cond1 = Vec::with_capacity(live);
    let mut cond2 = Vec::with_capacity(live);
    for c in 0..live {
        cond1.push(condition_on_block(&m1, &p1, c).map_err(|e| {
            Error::invalid_scenario("partition-override", format!("block {c}: {e}"))
        })?);
        cond2.push(condition_on_block(&m2, &p2, c).map_err(|e| {
            Error::invalid_scenario("partition-override", format!("block {c}: {e}"))
        })?);
    }
    let cgk_nats = crate::dist::entropy(&p_c);
    Ok(GkDecomposition {
        partition1: p1,
        partition2: p2,
        block_count: live,
        p_c,
        cond1,
        cond2,
        cgk_nats,
    })
}

/// Applies the divergence sizing rule with overrides taking precedence.
fn resolve_sizes(
    scenario: &Scenario,
    gk: &GkDecomposition,
    partitions: &[Partition],
    marginals: &[Pmf],
    q_c: &Pmf,
) -> Result<SampleSizes> {
    let ov = &scenario.params.overrides;
    let n_c = match ov.n_c {
        Some(n) if n >= 1 => n,
        Some(n) => {
            return Err(Error::invalid_scenario(
                "sample-sizes",
                format!("n_c override {n} must be at least 1"),
            ))
        }
        None => ceil_exp(kl(q_c, &gk.p_c)? + scenario.params.t_c),
    };

    let mut n_ref = Vec::with_capacity(2);
    for i in 0..2 {
        let part = &partitions[i];
        if let Some(table) = ov.n_ref.as_ref().map(|t| t.get(i)) {
            let table = table.ok_or_else(|| {
                Error::invalid_scenario("sample-sizes", "n_ref override missing a decoder")
            })?;
            if table.len() != part.block_count() {
                return Err(Error::invalid_scenario(
                    "sample-sizes",
                    format!(
                        "decoder {i}: {} refinement overrides for {} blocks",
                        table.len(),
                        part.block_count()
                    ),
                ));
            }
            n_ref.push(table.clone());
            continue;
        }
        let q_blocks = block_marginal(&scenario.targets[i], part);
        let mut table = Vec::with_capacity(part.block_count());
        for c in 0..part.block_count() {
            if q_blocks.prob(c) > 0.0 {
                let qc = condition_on_block(&scenario.targets[i], part, c)?;
                let pc = condition_on_block(&marginals[i], part, c)?;
                table.push(ceil_exp(kl(&qc, &pc)? + scenario.params.t));
            } else {
                table.push(1);
            }
        }
        n_ref.push(table);
    }

    let naive_n = match &ov.naive_n {
        Some(v) => {
            if v.len() != 2 || v.iter().any(|&n| n < 1) {
                return Err(Error::invalid_scenario(
                    "sample-sizes",
                    "naive_n override must list one positive count per decoder",
                ));
            }
            v.clone()
        }
        None => {
            let mut v = Vec::with_capacity(2);
            for i in 0..2 {
                v.push(ceil_exp(
                    kl(&scenario.targets[i], &marginals[i])? + scenario.params.t,
                ));
            }
            v
        }
    };

    Ok(SampleSizes {
        n_c,
        n_ref,
        naive_n,
    })
}

/// Cost record for one transmission.
#[derive(Debug, Clone, Serialize)]
pub struct PerK {
    pub broadcast_bits: f64,
    pub unicast_bits: Vec<f64>,
    /// Fresh prior draws consumed during this transmission (reused pools
    /// contribute zero here).
    pub raw_draws: u64,
}

/// Exact bit and draw accounting for one run.
#[derive(Debug, Clone, Serialize)]
pub struct CostLedger {
    pub broadcast_bits: f64,
    pub broadcast_bits_ceil: u64,
    pub unicast_bits: Vec<f64>,
    pub unicast_bits_ceil: Vec<u64>,
    pub total_bits: f64,
    pub total_bits_ceil: u64,
    /// All prior draws the encoder consumed, setup included.
    pub raw_prior_draws: u64,
    /// Draws consumed before the first transmission (the stage-one pool).
    pub setup_raw_draws: u64,
    pub per_k: Vec<PerK>,
}

impl CostLedger {
    fn assemble(setup_raw_draws: u64, per_k: Vec<PerK>, n_decoders: usize) -> CostLedger {
        let broadcast_bits: f64 = per_k.iter().map(|k| k.broadcast_bits).sum();
        let mut unicast_bits = vec![0.0; n_decoders];
        let mut unicast_bits_ceil = vec![0u64; n_decoders];
        let mut broadcast_bits_ceil = 0u64;
        let mut raw = setup_raw_draws;
        for k in &per_k {
            broadcast_bits_ceil += ceil_bits_of(k.broadcast_bits);
            for (i, &b) in k.unicast_bits.iter().enumerate() {
                unicast_bits[i] += b;
                unicast_bits_ceil[i] += ceil_bits_of(b);
            }
            raw += k.raw_draws;
        }
        let total_bits = broadcast_bits + unicast_bits.iter().sum::<f64>();
        let total_bits_ceil = broadcast_bits_ceil + unicast_bits_ceil.iter().sum::<u64>();
        CostLedger {
            broadcast_bits,
            broadcast_bits_ceil,
            unicast_bits,
            unicast_bits_ceil,
            total_bits,
            total_bits_ceil,
            raw_prior_draws: raw,
            setup_raw_draws,
            per_k,
        }
    }
}

/// Integer bits for one message whose idealized cost is `log2(n)`.
fn ceil_bits_of(bits: f64) -> u64 {
    ceil_log2(bits.exp2().round() as usize)
}

/// Per-decoder outcome of a run.
#[derive(Debug, Clone, Serialize)]
pub struct DecoderReport {
    pub estimate: Option<f64>,
    pub true_value: f64,
    pub abs_bias: Option<f64>,
    pub empirical_law: Vec<f64>,
    pub tv_to_target: Option<f64>,
    pub tv_method: &'static str,
    pub lemma1_bound: Option<BiasBound>,
    pub deviation_bound: Option<DeviationBound>,
    pub hier_bounds: Option<BoundReport>,
}

/// Everything one run produces; self-contained for replay.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scheme: &'static str,
    pub reps: usize,
    pub seed: u64,
    pub label: String,
    pub scenario_digest: u64,
    pub sizes: SampleSizes,
    pub block_count: usize,
    pub cgk_nats: f64,
    pub cgk_bits: f64,
    pub decoders: Vec<DecoderReport>,
    pub cost: CostLedger,
    /// Confidence of the two-stage guarantee holding for both decoders at
    /// once; hierarchical runs only.
    pub joint_confidence: Option<f64>,
    /// Measured mean of `n_c` plus the selected pool's raw draws, per
    /// transmission; hierarchical runs only.
    pub mean_complexity_per_transmission: Option<f64>,
    /// The closed-form complexity value the measurement is compared to.
    pub avg_complexity_bound: Option<f64>,
}

fn empirical_law(symbols: &[usize], len: usize) -> Vec<f64> {
    let mut law = vec![0.0; len];
    if symbols.is_empty() {
        return law;
    }
    let w = 1.0 / symbols.len() as f64;
    for &s in symbols {
        law[s] += w;
    }
    law
}

fn true_value(f: &[f64], target: &Pmf) -> f64 {
    f.iter().zip(target.mass()).map(|(&fv, &m)| fv * m).sum()
}

fn tv_against_target(
    law: &[f64],
    target: &Pmf,
    exact: Option<Pmf>,
) -> (Option<f64>, &'static str) {
    if let Some(exact) = exact {
        (Some(tv(&exact, target)), "oracle-exact")
    } else if law.iter().sum::<f64>() > 0.0 {
        let emp = Pmf::new(target.alphabet().clone(), law.to_vec())
            .expect("frequencies form a distribution");
        (Some(tv(&emp, target)), "empirical")
    } else {
        (None, "undefined")
    }
}

/// Runs the all-unicast baseline: each decoder gets its own index per
/// transmission, selected over its marginal view of the shared pair stream.
pub fn run_naive_unicast(v: &Validated) -> Result<RunReport> {
    let sc = &v.scenario;
    let reps = sc.params.reps;
    let base = StreamSeed::new(sc.params.seed, sc.params.label.clone()).child("naive");
    let max_n = *v.sizes.naive_n.iter().max().expect("two decoders");

    let mut selected: Vec<Vec<usize>> = (0..2).map(|_| Vec::with_capacity(reps)).collect();
    let mut per_k = Vec::with_capacity(reps);
    for k in 0..reps {
        let mut pair_stream = SharedStream::derive(&base.child(&format!("k/{k}")));
        let pairs = pair_stream.sample_joint_sequence(&sc.joint, max_n);
        // One selection impulse per transmission, shared by both decoders:
        // each index is exactly aux-distributed, and matching decoders
        // (equal priors and targets over a diagonal joint) decode in
        // lockstep.
        let u = SharedStream::derive(&base.child(&format!("k/{k}/m"))).next_unit();
        let mut unicast_bits = Vec::with_capacity(2);
        for i in 0..2 {
            let n_i = v.sizes.naive_n[i];
            let proposals: Vec<usize> = pairs[..n_i]
                .iter()
                .map(|&(a, b)| if i == 0 { a } else { b })
                .collect();
            let aux = aux_distribution(&sc.targets[i], &v.marginals[i], &proposals)?;
            let index = crate::randomness::categorical_from_unit(aux.weights(), u) + 1;
            selected[i].push(proposals[index - 1]);
            unicast_bits.push((n_i as f64).log2());
        }
        per_k.push(PerK {
            broadcast_bits: 0.0,
            unicast_bits,
            raw_draws: max_n as u64,
        });
    }

    let cost = CostLedger::assemble(0, per_k, 2);
    let mut decoders = Vec::with_capacity(2);
    for i in 0..2 {
        let f = &sc.functions[i];
        let target = &sc.targets[i];
        let law = empirical_law(&selected[i], target.len());
        let estimate = if reps > 0 {
            Some(selected[i].iter().map(|&s| f[s]).sum::<f64>() / reps as f64)
        } else {
            None
        };
        let exact = exact_selected_distribution_mrc(target, &v.marginals[i], v.sizes.naive_n[i])
            .ok()
            .map(|l| l.pmf);
        let (tv_to_target, tv_method) = tv_against_target(&law, target, exact);
        let tval = true_value(f, target);
        decoders.push(DecoderReport {
            estimate,
            true_value: tval,
            abs_bias: estimate.map(|e| (e - tval).abs()),
            empirical_law: law,
            tv_to_target,
            tv_method,
            lemma1_bound: Some(bias_bound_lemma1(f, target, &v.marginals[i], sc.params.t)?),
            deviation_bound: if reps > 0 {
                Some(deviation_bound_prop1(
                    f,
                    target,
                    &v.marginals[i],
                    sc.params.t,
                    reps,
                    0.05,
                )?)
            } else {
                None
            },
            hier_bounds: None,
        });
    }

    Ok(RunReport {
        scheme: "naive",
        reps,
        seed: sc.params.seed,
        label: sc.params.label.clone(),
        scenario_digest: v.digest,
        sizes: v.sizes.clone(),
        block_count: v.gk.block_count,
        cgk_nats: v.gk.cgk_nats,
        cgk_bits: crate::dist::nats_to_bits(v.gk.cgk_nats),
        decoders,
        cost,
        joint_confidence: None,
        mean_complexity_per_transmission: None,
        avg_complexity_bound: None,
    })
}

struct PairPool {
    /// Accepted pairs, enough for the larger of the two refinement counts.
    accepted: Vec<(usize, usize)>,
    raw_draws: u64,
}

fn draw_pair_pool(
    seed: &StreamSeed,
    joint: &JointPmf,
    part1: &Partition,
    block: usize,
    need: usize,
    cap: u64,
) -> Result<PairPool> {
    let mut stream = SharedStream::derive(seed);
    let mut accepted = Vec::with_capacity(need);
    let mut raw = 0u64;
    while accepted.len() < need {
        if raw >= cap {
            return Err(Error::RejectionCapExceeded {
                cap,
                needed: need,
                block,
            });
        }
        let pair = stream.sample_pair(joint);
        raw += 1;
        // Acceptance looks only at the shared draw's block, so every
        // decoder makes the same accept/reject call.
        if part1.block_of(pair.0) == block {
            accepted.push(pair);
        }
    }
    Ok(PairPool {
        accepted,
        raw_draws: raw,
    })
}

/// Everything the encoder produced during a hierarchical run: the wire
/// messages per decoder, the encoder's own view of the selections, and the
/// per-transmission cost rows.
#[derive(Debug, Clone)]
pub struct HierTranscript {
    pub messages: Vec<Vec<HierMessage>>,
    pub symbols: Vec<Vec<usize>>,
    pub per_k: Vec<PerK>,
    /// Mean over transmissions of `n_c` plus the selected pool's raw draws.
    pub mean_complexity: Option<f64>,
}

/// Encoder side of the broadcast scheme: one block index per transmission
/// serves both decoders, each of which refines inside the block over
/// unicast.
pub fn hier_encode_transcript(v: &Validated) -> Result<HierTranscript> {
    let sc = &v.scenario;
    let reps = sc.params.reps;
    let gk = &v.gk;
    let base = StreamSeed::new(sc.params.seed, sc.params.label.clone()).child("hier");

    // Stage-one pool from the joint; either side's labels agree on it.
    let n_c = v.sizes.n_c;
    let mut block_stream = SharedStream::derive(&base.child("block"));
    let block_pool: Vec<usize> = (0..n_c)
        .map(|_| {
            let (a, _) = block_stream.sample_pair(&sc.joint);
            gk.partition1.block_of(a)
        })
        .collect();
    let aux_c = crate::hier::block_aux(&v.q_c, &gk.p_c, &block_pool)?;
    let block_bits = (n_c as f64).log2();

    // Conditional targets and priors per decoder per block, built lazily.
    let mut conds: Vec<HashMap<usize, (Pmf, Pmf)>> = vec![HashMap::new(), HashMap::new()];
    let mut pools: HashMap<usize, PairPool> = HashMap::new();
    let mut selected: Vec<Vec<usize>> = (0..2).map(|_| Vec::with_capacity(reps)).collect();
    let mut messages: Vec<Vec<HierMessage>> = (0..2).map(|_| Vec::with_capacity(reps)).collect();
    let mut per_k = Vec::with_capacity(reps);
    let mut complexity_sum = 0.0;

    for k in 0..reps {
        let mut m_stream = SharedStream::derive(&base.child(&format!("m/{k}")));
        let m = encode_index(&mut m_stream, &aux_c).index;
        let c = block_pool[m - 1];

        let mut fresh_draws = 0u64;
        if !pools.contains_key(&m) {
            let need = v.sizes.n_ref[0][c].max(v.sizes.n_ref[1][c]);
            let cap = match sc.params.rejection_cap {
                Some(cap) => cap,
                None => (50.0 * need as f64 / gk.p_c.prob(c)).ceil() as u64,
            };
            let pool = draw_pair_pool(
                &base.child(&format!("refine/{m}")),
                &sc.joint,
                &gk.partition1,
                c,
                need,
                cap,
            )?;
            fresh_draws = pool.raw_draws;
            pools.insert(m, pool);
        }
        let pool = &pools[&m];
        complexity_sum += n_c as f64 + pool.raw_draws as f64;

        // As in the naive scheme, one refinement impulse per transmission
        // serves both decoders.
        let u = SharedStream::derive(&base.child(&format!("l/{k}"))).next_unit();
        let mut unicast_bits = Vec::with_capacity(2);
        for i in 0..2 {
            if !conds[i].contains_key(&c) {
                let qc = condition_on_block(&sc.targets[i], &v.partitions[i], c)?;
                let pc = condition_on_block(&v.marginals[i], &v.partitions[i], c)?;
                conds[i].insert(c, (qc, pc));
            }
            let (qc, pc) = &conds[i][&c];
            let n_ref = v.sizes.n_ref[i][c];
            let proposals: Vec<usize> = pool.accepted[..n_ref]
                .iter()
                .map(|&(a, b)| if i == 0 { a } else { b })
                .collect();
            let aux = crate::hier::conditional_aux(qc, pc, &proposals)?;
            let index = crate::randomness::categorical_from_unit(aux.weights(), u) + 1;
            let refine_bits = (n_ref as f64).log2();
            selected[i].push(proposals[index - 1]);
            unicast_bits.push(refine_bits);
            messages[i].push(HierMessage {
                block_index: m,
                refine_index: index,
                raw_draws: pool.raw_draws,
                block_bits,
                refine_bits,
            });
        }
        per_k.push(PerK {
            broadcast_bits: block_bits,
            unicast_bits,
            raw_draws: fresh_draws,
        });
    }

    Ok(HierTranscript {
        messages,
        symbols: selected,
        per_k,
        mean_complexity: if reps > 0 {
            Some(complexity_sum / reps as f64)
        } else {
            None
        },
    })
}

/// Decoder `i`'s reconstruction of its symbol sequence from the wire
/// messages alone: replays the shared pair stream for the stage-one pool
/// and each referenced refinement pool, then projects its own coordinate.
/// No knowledge of any target is used.
pub fn hier_decode_transcript(
    v: &Validated,
    side: usize,
    messages: &[HierMessage],
) -> Result<Vec<usize>> {
    let sc = &v.scenario;
    let base = StreamSeed::new(sc.params.seed, sc.params.label.clone()).child("hier");
    let n_c = v.sizes.n_c;
    let part = &v.partitions[side];
    let mut block_stream = SharedStream::derive(&base.child("block"));
    let block_pool: Vec<usize> = (0..n_c)
        .map(|_| {
            let pair = block_stream.sample_pair(&sc.joint);
            part.block_of(if side == 0 { pair.0 } else { pair.1 })
        })
        .collect();

    let mut pools: HashMap<usize, PairPool> = HashMap::new();
    let mut out = Vec::with_capacity(messages.len());
    for msg in messages {
        if msg.block_index < 1 || msg.block_index > n_c {
            return Err(Error::IndexOutOfRange {
                index: msg.block_index,
                n: n_c,
            });
        }
        let c = block_pool[msg.block_index - 1];
        let n_ref = v.sizes.n_ref[side][c];
        if msg.refine_index < 1 || msg.refine_index > n_ref {
            return Err(Error::IndexOutOfRange {
                index: msg.refine_index,
                n: n_ref,
            });
        }
        if !pools.contains_key(&msg.block_index) {
            // Only this side's count matters: the accepted prefix of the
            // shared stream is the same wherever the encoder stopped.
            let cap = match sc.params.rejection_cap {
                Some(cap) => cap,
                None => (50.0 * n_ref as f64 / v.gk.p_c.prob(c)).ceil() as u64,
            };
            let pool = draw_pair_pool(
                &base.child(&format!("refine/{}", msg.block_index)),
                &sc.joint,
                part,
                c,
                n_ref,
                cap,
            )?;
            pools.insert(msg.block_index, pool);
        }
        let pair = pools[&msg.block_index].accepted[msg.refine_index - 1];
        out.push(if side == 0 { pair.0 } else { pair.1 });
    }
    Ok(out)
}

/// Runs the broadcast scheme end to end and assembles the report.
pub fn run_hierarchical_broadcast(v: &Validated) -> Result<RunReport> {
    let sc = &v.scenario;
    let reps = sc.params.reps;
    let gk = &v.gk;
    let n_c = v.sizes.n_c;
    let transcript = hier_encode_transcript(v)?;
    let selected = &transcript.symbols;
    let complexity_mean = transcript.mean_complexity;

    let cost = CostLedger::assemble(n_c as u64, transcript.per_k, 2);

    let mut decoders = Vec::with_capacity(2);
    let mut joint_eps_sum = 0.0;
    let mut joint_eps = 0.0;
    for i in 0..2 {
        let f = &sc.functions[i];
        let target = &sc.targets[i];
        let law = empirical_law(&selected[i], target.len());
        let estimate = if reps > 0 {
            Some(selected[i].iter().map(|&s| f[s]).sum::<f64>() / reps as f64)
        } else {
            None
        };
        let exact = exact_selected_distribution_hier(
            target,
            &v.marginals[i],
            &v.partitions[i],
            n_c,
            &v.sizes.n_ref[i],
        )
        .ok()
        .map(|l| l.pmf);
        let (tv_to_target, tv_method) = tv_against_target(&law, target, exact);
        let bounds = bound_report(
            f,
            target,
            &v.marginals[i],
            &v.partitions[i],
            sc.params.t_c,
            sc.params.t,
            n_c,
            &v.sizes.n_ref[i],
        )?;
        joint_eps_sum += bounds.epsilon_bar;
        joint_eps = bounds.epsilon;
        let tval = true_value(f, target);
        decoders.push(DecoderReport {
            estimate,
            true_value: tval,
            abs_bias: estimate.map(|e| (e - tval).abs()),
            empirical_law: law,
            tv_to_target,
            tv_method,
            lemma1_bound: None,
            deviation_bound: None,
            hier_bounds: Some(bounds),
        });
    }

    // Guarantee for both decoders at once.
    let joint_confidence =
        1.0 - 2.0 * (gk.block_count as f64 * joint_eps_sum + 2.0 * joint_eps);

    let avg_complexity_bound = if n_c >= 2 {
        // Complexity of one decoder's rejection stage; both decoders share
        // the pool so the larger refinement count governs.
        let worst_ref: Vec<usize> = (0..gk.partition1.block_count())
            .map(|c| v.sizes.n_ref[0][c].max(v.sizes.n_ref[1][c]))
            .collect();
        let q_c_full = block_marginal(&sc.targets[0], &gk.partition1);
        crate::bounds::avg_complexity_lemma3(
            &block_marginal(&v.marginals[0], &gk.partition1),
            &q_c_full,
            n_c,
            &worst_ref,
        )
        .ok()
    } else {
        None
    };

    Ok(RunReport {
        scheme: "hierarchical",
        reps,
        seed: sc.params.seed,
        label: sc.params.label.clone(),
        scenario_digest: v.digest,
        sizes: v.sizes.clone(),
        block_count: gk.block_count,
        cgk_nats: gk.cgk_nats,
        cgk_bits: crate::dist::nats_to_bits(gk.cgk_nats),
        decoders,
        cost,
        joint_confidence: Some(joint_confidence),
        mean_complexity_per_transmission: complexity_mean,
        avg_complexity_bound,
    })
}

/// Independent single transmissions, each with a fresh stage-one pool, so
/// the decoded symbols are i.i.d. draws from the exact selected law. A full
/// run shares one stage-one pool across its transmissions, which is right
/// for costs but conditions every selection on that pool; oracle
/// comparisons need this unconditioned variant.
pub fn hier_single_shots(v: &Validated, count: usize) -> Result<Vec<Vec<usize>>> {
    let sc = &v.scenario;
    let gk = &v.gk;
    let n_c = v.sizes.n_c;
    let root = StreamSeed::new(sc.params.seed, sc.params.label.clone()).child("hier-shots");
    let mut selected: Vec<Vec<usize>> = (0..2).map(|_| Vec::with_capacity(count)).collect();
    let mut conds: Vec<HashMap<usize, (Pmf, Pmf)>> = vec![HashMap::new(), HashMap::new()];
    for s in 0..count {
        let base = root.child(&format!("shot/{s}"));
        let mut block_stream = SharedStream::derive(&base.child("block"));
        let pool: Vec<usize> = (0..n_c)
            .map(|_| gk.partition1.block_of(block_stream.sample_pair(&sc.joint).0))
            .collect();
        let aux_c = crate::hier::block_aux(&v.q_c, &gk.p_c, &pool)?;
        let mut m_stream = SharedStream::derive(&base.child("m"));
        let m = encode_index(&mut m_stream, &aux_c).index;
        let c = pool[m - 1];
        let need = v.sizes.n_ref[0][c].max(v.sizes.n_ref[1][c]);
        let cap = match sc.params.rejection_cap {
            Some(cap) => cap,
            None => (50.0 * need as f64 / gk.p_c.prob(c)).ceil() as u64,
        };
        let pairs = draw_pair_pool(&base.child("refine"), &sc.joint, &gk.partition1, c, need, cap)?;
        let u = SharedStream::derive(&base.child("l")).next_unit();
        for i in 0..2 {
            if !conds[i].contains_key(&c) {
                let qc = condition_on_block(&sc.targets[i], &v.partitions[i], c)?;
                let pc = condition_on_block(&v.marginals[i], &v.partitions[i], c)?;
                conds[i].insert(c, (qc, pc));
            }
            let (qc, pc) = &conds[i][&c];
            let n_ref = v.sizes.n_ref[i][c];
            let proposals: Vec<usize> = pairs.accepted[..n_ref]
                .iter()
                .map(|&(a, b)| if i == 0 { a } else { b })
                .collect();
            let aux = crate::hier::conditional_aux(qc, pc, &proposals)?;
            let index = crate::randomness::categorical_from_unit(aux.weights(), u);
            selected[i].push(proposals[index]);
        }
    }
    Ok(selected)
}

/// Decoder `i`'s independent reconstruction of the stage-one block labels:
/// replays the shared pair stream and applies its own partition to its own
/// coordinate.
pub fn decoder_block_view(v: &Validated, side: usize) -> Vec<usize> {
    let base = StreamSeed::new(v.scenario.params.seed, v.scenario.params.label.clone())
        .child("hier");
    let mut stream = SharedStream::derive(&base.child("block"));
    (0..v.sizes.n_c)
        .map(|_| {
            let pair = stream.sample_pair(&v.scenario.joint);
            let coord = if side == 0 { pair.0 } else { pair.1 };
            v.partitions[side].block_of(coord)
        })
        .collect()
}

/// Savings of run `b` relative to run `a` (typically naive vs hierarchical).
#[derive(Debug, Clone, Serialize)]
pub struct CostComparison {
    pub total_bits_a: f64,
    pub total_bits_b: f64,
    pub absolute_savings_bits: f64,
    pub relative_savings: f64,
    pub broadcast_bits: (f64, f64),
    pub unicast_bits: (Vec<f64>, Vec<f64>),
    pub total_bits_ceil: (u64, u64),
    /// Closed-form expected complexity per transmission, where available.
    pub lemma3_bound: Option<f64>,
    /// Measured mean complexity per transmission, where available.
    pub measured_complexity: Option<f64>,
}

pub fn cost_compare(a: &RunReport, b: &RunReport) -> Result<CostComparison> {
    if a.scenario_digest != b.scenario_digest {
        return Err(Error::MismatchedScenario(
            "reports come from different scenarios".into(),
        ));
    }
    if a.reps != b.reps {
        return Err(Error::MismatchedScenario(format!(
            "reports disagree on repetitions: {} vs {}",
            a.reps, b.reps
        )));
    }
    let savings = a.cost.total_bits - b.cost.total_bits;
    Ok(CostComparison {
        total_bits_a: a.cost.total_bits,
        total_bits_b: b.cost.total_bits,
        absolute_savings_bits: savings,
        relative_savings: if a.cost.total_bits > 0.0 {
            savings / a.cost.total_bits
        } else {
            0.0
        },
        broadcast_bits: (a.cost.broadcast_bits, b.cost.broadcast_bits),
        unicast_bits: (a.cost.unicast_bits.clone(), b.cost.unicast_bits.clone()),
        total_bits_ceil: (a.cost.total_bits_ceil, b.cost.total_bits_ceil),
        lemma3_bound: b.avg_complexity_bound.or(a.avg_complexity_bound),
        measured_complexity: b
            .mean_complexity_per_transmission
            .or(a.mean_complexity_per_transmission),
    })
}
