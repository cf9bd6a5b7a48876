//! Two-stage hierarchical sampling: block-level minimal random coding over
//! the partition law, then conditional minimal random coding inside the
//! chosen block.
//!
//! Stage one draws `n_c` samples from the prior, maps them through the
//! partition, and selects a block position by importance against the target
//! block law. Stage two draws from the prior and keeps only draws landing in
//! the selected block (rejection), until the block's refinement count is
//! reached, then selects within the accepted list by conditional importance.
//! Rejection keeps the shared-randomness story intact: acceptance depends
//! only on the shared draw and the partition, so encoder and decoder agree
//! on the accepted subsequence without extra communication.
//!
//! Stream labels are fixed by convention: `block` for the stage-one pool,
//! `m/<k>` and `l/<k>` for the encoder's index draws, and `refine/<m>` for
//! the conditional pool of the stage-one position `m`. Conditional pools are
//! reused when two repetitions select the same position, matching the
//! footnote rule for repeated block samples.

use std::collections::HashMap;

use crate::dist::{block_marginal, condition_on_block, Partition, Pmf};
use crate::error::{Error, Result};
use crate::mrc::{aux_distribution, encode_index, AuxDistribution};
use crate::randomness::{SharedStream, StreamSeed};

/// Default rejection cap multiplier: a block is allowed fifty times the
/// expected number of raw draws before the run is declared misconfigured.
const CAP_MULTIPLIER: f64 = 50.0;

/// Sampling plan for a hierarchical run.
#[derive(Debug, Clone)]
pub struct HierConfig {
    pub partition: Partition,
    /// Stage-one proposal count.
    pub n_c: usize,
    /// Per-block refinement proposal counts, indexed by block label.
    pub n_ref: Vec<usize>,
    /// Slack used to size `n_c`, in nats. Carried for reporting.
    pub t_c: f64,
    /// Slack used to size the refinement counts, in nats.
    pub t: f64,
    /// Explicit cap on raw draws per refinement pool; `None` applies the
    /// per-block default `ceil(50 * n_ref(c) / block mass)`.
    pub rejection_cap: Option<u64>,
}

impl HierConfig {
    /// Sizes both stages from the divergence rule: `n_c` from the block
    /// divergence plus `t_c`, each refinement count from the in-block
    /// divergence plus `t`, all rounded up.
    pub fn from_divergences(
        partition: Partition,
        target: &Pmf,
        prior: &Pmf,
        t_c: f64,
        t: f64,
    ) -> Result<Self> {
        let q_c = block_marginal(target, &partition);
        let p_c = block_marginal(prior, &partition);
        let n_c = ceil_exp(crate::dist::kl(&q_c, &p_c)? + t_c);
        let mut n_ref = Vec::with_capacity(partition.block_count());
        for c in 0..partition.block_count() {
            if q_c.prob(c) > 0.0 {
                let qc = condition_on_block(target, &partition, c)?;
                let pc = condition_on_block(prior, &partition, c)?;
                n_ref.push(ceil_exp(crate::dist::kl(&qc, &pc)? + t));
            } else {
                n_ref.push(1);
            }
        }
        Ok(HierConfig {
            partition,
            n_c,
            n_ref,
            t_c,
            t,
            rejection_cap: None,
        })
    }

    /// Raw-draw cap for one refinement pool in block `c`.
    pub fn cap_for(&self, c: usize, block_mass: f64) -> u64 {
        match self.rejection_cap {
            Some(cap) => cap,
            None => (CAP_MULTIPLIER * self.n_ref[c] as f64 / block_mass.max(f64::MIN_POSITIVE))
                .ceil() as u64,
        }
    }

    /// Checks the plan against the block laws it will run under.
    pub fn validate(&self, target: &Pmf, prior: &Pmf) -> Result<()> {
        if self.n_c < 1 {
            return Err(Error::DegenerateConfig("n_c must be at least 1".into()));
        }
        if self.n_ref.len() != self.partition.block_count() {
            return Err(Error::DegenerateConfig(format!(
                "{} refinement counts for {} blocks",
                self.n_ref.len(),
                self.partition.block_count()
            )));
        }
        let q_c = block_marginal(target, &self.partition);
        let p_c = block_marginal(prior, &self.partition);
        for c in 0..self.partition.block_count() {
            if q_c.prob(c) > 0.0 {
                if self.n_ref[c] < 1 {
                    return Err(Error::DegenerateConfig(format!(
                        "block {c} has target mass but no refinement proposals"
                    )));
                }
                if let Some(cap) = self.rejection_cap {
                    let needed = (self.n_ref[c] as f64 / p_c.prob(c)).ceil() as u64;
                    if cap < needed {
                        return Err(Error::DegenerateConfig(format!(
                            "rejection cap {cap} below the expected {needed} raw draws \
                             for block {c}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn ceil_exp(nats: f64) -> usize {
    nats.exp().ceil() as usize
}

/// One transmission: a block position, a refinement position within that
/// block's pool, the raw prior draws the pool consumed, and the idealized
/// bit costs of both indices.
#[derive(Debug, Clone, PartialEq)]
pub struct HierMessage {
    pub block_index: usize,
    pub refine_index: usize,
    pub raw_draws: u64,
    pub block_bits: f64,
    pub refine_bits: f64,
}

/// Encoder output: the wire messages plus the encoder's own view of the
/// selected symbols (used for estimates without re-decoding).
#[derive(Debug, Clone)]
pub struct HierEncoded {
    pub messages: Vec<HierMessage>,
    pub symbols: Vec<usize>,
}

/// Stage-one pool: draw from the prior and push each draw through the
/// partition, so every element has the block marginal's law.
pub fn block_proposals(seed: &StreamSeed, prior: &Pmf, part: &Partition, n_c: usize) -> Vec<usize> {
    let mut stream = SharedStream::derive(seed);
    (0..n_c)
        .map(|_| part.block_of(stream.sample_categorical(prior)))
        .collect()
}

/// Importance categorical over stage-one positions.
pub fn block_aux(target_c: &Pmf, p_c: &Pmf, c_samples: &[usize]) -> Result<AuxDistribution> {
    aux_distribution(target_c, p_c, c_samples)
}

/// Rejection-filtered conditional pool: draws from the prior, keeps draws in
/// block `c`, and reports how many raw draws were consumed (accepted ones
/// included).
pub fn conditional_proposals(
    seed: &StreamSeed,
    prior: &Pmf,
    part: &Partition,
    c: usize,
    n_target: usize,
    cap: u64,
) -> Result<(Vec<usize>, u64)> {
    let mut stream = SharedStream::derive(seed);
    let mut accepted = Vec::with_capacity(n_target);
    let mut raw = 0u64;
    while accepted.len() < n_target {
        if raw >= cap {
            return Err(Error::RejectionCapExceeded {
                cap,
                needed: n_target,
                block: c,
            });
        }
        let sym = stream.sample_categorical(prior);
        raw += 1;
        if part.block_of(sym) == c {
            accepted.push(sym);
        }
    }
    Ok((accepted, raw))
}

/// Importance categorical over a conditional pool.
pub fn conditional_aux(
    target_cond: &Pmf,
    prior_cond: &Pmf,
    proposals: &[usize],
) -> Result<AuxDistribution> {
    aux_distribution(target_cond, prior_cond, proposals)
}

struct RefinePool {
    proposals: Vec<usize>,
    aux: AuxDistribution,
    raw_draws: u64,
}

/// Runs `reps` hierarchical transmissions end to end on the encoder side.
///
/// One stage-one pool serves all repetitions; conditional pools are built
/// lazily per selected position and reused on repeats.
pub fn hier_encode(
    seed: &StreamSeed,
    target: &Pmf,
    prior: &Pmf,
    cfg: &HierConfig,
    reps: usize,
) -> Result<HierEncoded> {
    let part = &cfg.partition;
    let q_c = block_marginal(target, part);
    let p_c = block_marginal(prior, part);
    let pool = block_proposals(&seed.child("block"), prior, part, cfg.n_c);
    let aux_c = block_aux(&q_c, &p_c, &pool)?;
    let block_bits = (cfg.n_c as f64).log2();

    let mut conds: HashMap<usize, (Pmf, Pmf)> = HashMap::new();
    let mut pools: HashMap<usize, RefinePool> = HashMap::new();
    let mut messages = Vec::with_capacity(reps);
    let mut symbols = Vec::with_capacity(reps);

    for k in 0..reps {
        let mut m_stream = SharedStream::derive(&seed.child(&format!("m/{k}")));
        let m = encode_index(&mut m_stream, &aux_c).index;
        let c = pool[m - 1];

        if !pools.contains_key(&m) {
            if !conds.contains_key(&c) {
                let qc = condition_on_block(target, part, c)?;
                let pc = condition_on_block(prior, part, c)?;
                conds.insert(c, (qc, pc));
            }
            let (qc, pc) = &conds[&c];
            let cap = cfg.cap_for(c, p_c.prob(c));
            let (proposals, raw_draws) = conditional_proposals(
                &seed.child(&format!("refine/{m}")),
                prior,
                part,
                c,
                cfg.n_ref[c],
                cap,
            )?;
            let aux = conditional_aux(qc, pc, &proposals)?;
            pools.insert(
                m,
                RefinePool {
                    proposals,
                    aux,
                    raw_draws,
                },
            );
        }
        let refine = &pools[&m];

        let mut l_stream = SharedStream::derive(&seed.child(&format!("l/{k}")));
        let l = encode_index(&mut l_stream, &refine.aux).index;
        symbols.push(refine.proposals[l - 1]);
        messages.push(HierMessage {
            block_index: m,
            refine_index: l,
            raw_draws: refine.raw_draws,
            block_bits,
            refine_bits: (cfg.n_ref[c] as f64).log2(),
        });
    }
    Ok(HierEncoded { messages, symbols })
}

/// Decoder side of one transmission: replays the stage-one pool, maps the
/// block index to its block, replays that position's conditional pool, and
/// returns the indexed symbol. Needs no knowledge of the target.
pub fn hier_decode(
    seed: &StreamSeed,
    prior: &Pmf,
    cfg: &HierConfig,
    msg: &HierMessage,
) -> Result<usize> {
    if msg.block_index < 1 || msg.block_index > cfg.n_c {
        return Err(Error::IndexOutOfRange {
            index: msg.block_index,
            n: cfg.n_c,
        });
    }
    let part = &cfg.partition;
    let pool = block_proposals(&seed.child("block"), prior, part, cfg.n_c);
    let c = pool[msg.block_index - 1];
    if msg.refine_index < 1 || msg.refine_index > cfg.n_ref[c] {
        return Err(Error::IndexOutOfRange {
            index: msg.refine_index,
            n: cfg.n_ref[c],
        });
    }
    let p_c = block_marginal(prior, part);
    let cap = cfg.cap_for(c, p_c.prob(c));
    let (proposals, _) = conditional_proposals(
        &seed.child(&format!("refine/{}", msg.block_index)),
        prior,
        part,
        c,
        cfg.n_ref[c],
        cap,
    )?;
    Ok(proposals[msg.refine_index - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::Alphabet;

    fn pmf(mass: &[f64]) -> Pmf {
        Pmf::new(Alphabet::indexed(mass.len()), mass.to_vec()).unwrap()
    }

    fn two_block_partition() -> Partition {
        Partition::new(Alphabet::indexed(3), vec![0, 0, 1]).unwrap()
    }

    #[test]
    fn block_proposals_follow_block_law() {
        let prior = pmf(&[0.4, 0.2, 0.4]);
        let part = two_block_partition();
        let seed = StreamSeed::new(21, "bp");
        let samples = block_proposals(&seed, &prior, &part, 100_000);
        let f0 = samples.iter().filter(|&&c| c == 0).count() as f64 / samples.len() as f64;
        assert!((f0 - 0.6).abs() < 0.01, "block frequency {f0}");

        let one = Partition::one_block(Alphabet::indexed(3));
        assert!(block_proposals(&seed, &prior, &one, 50).iter().all(|&c| c == 0));

        // Singleton blocks relabel the prior draws one to one.
        let singles = Partition::singletons(Alphabet::indexed(3));
        let blocks = block_proposals(&seed, &prior, &singles, 200);
        let raw = crate::mrc::draw_proposals(&seed, &prior, 200);
        assert_eq!(blocks, raw);
    }

    #[test]
    fn block_aux_examples() {
        let p_c = pmf(&[0.6, 0.4]);
        let q_c = pmf(&[0.2, 0.8]);

        let aux = block_aux(&p_c, &p_c, &[0, 1, 0]).unwrap();
        for &w in aux.weights() {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }

        let aux = block_aux(&q_c, &p_c, &[1, 1]).unwrap();
        assert_eq!(aux.weights(), &[0.5, 0.5]);

        let aux = block_aux(&q_c, &p_c, &[0, 1]).unwrap();
        assert!((aux.weights()[0] - 1.0 / 7.0).abs() < 1e-12);
        assert!((aux.weights()[1] - 6.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn conditional_proposals_properties() {
        let prior = pmf(&[0.4, 0.2, 0.4]);
        let part = two_block_partition();
        let seed = StreamSeed::new(33, "cp");

        // One block: every draw is accepted.
        let one = Partition::one_block(Alphabet::indexed(3));
        let (props, raw) = conditional_proposals(&seed, &prior, &one, 0, 100, 10_000).unwrap();
        assert_eq!(props.len(), 100);
        assert_eq!(raw, 100);

        // Singleton block: only that symbol survives the filter.
        let singles = Partition::singletons(Alphabet::indexed(3));
        let (props, _) = conditional_proposals(&seed, &prior, &singles, 2, 50, 10_000).unwrap();
        assert!(props.iter().all(|&s| s == 2));

        // Geometric waiting time against block mass 0.6.
        let (props, raw) = conditional_proposals(&seed, &prior, &part, 0, 1000, 100_000).unwrap();
        assert_eq!(props.len(), 1000);
        let ratio = raw as f64 / 1000.0;
        assert!((ratio - 1.0 / 0.6).abs() < 0.1 * (1.0 / 0.6), "ratio {ratio}");
    }

    #[test]
    fn accepted_proposals_follow_conditional_law() {
        let prior = pmf(&[0.4, 0.2, 0.4]);
        let part = two_block_partition();
        let seed = StreamSeed::new(34, "law");
        let n = 100_000;
        let (props, _) = conditional_proposals(&seed, &prior, &part, 0, n, 10 * n as u64).unwrap();
        let cond = condition_on_block(&prior, &part, 0).unwrap();
        for sym in 0..2 {
            let freq = props.iter().filter(|&&s| s == sym).count() as f64 / n as f64;
            let p = cond.prob(sym);
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() < 3.0 * sigma + 1e-9, "sym {sym}: {freq} vs {p}");
        }
    }

    #[test]
    fn rejection_cap_trips() {
        let prior = pmf(&[0.999, 0.001]);
        let part = Partition::singletons(Alphabet::indexed(2));
        let err =
            conditional_proposals(&StreamSeed::new(35, "cap"), &prior, &part, 1, 10, 50).unwrap_err();
        assert!(matches!(err, Error::RejectionCapExceeded { .. }));
    }

    #[test]
    fn conditional_aux_examples() {
        let prior_c = pmf(&[2.0 / 3.0, 1.0 / 3.0]);
        let target_c = pmf(&[0.5, 0.5]);

        let aux = conditional_aux(&prior_c, &prior_c, &[0, 1]).unwrap();
        assert_eq!(aux.weights(), &[0.5, 0.5]);

        let aux = conditional_aux(&target_c, &prior_c, &[0, 1]).unwrap();
        assert!((aux.weights()[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((aux.weights()[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    fn demo_config(part: Partition, n_c: usize, n_ref: Vec<usize>) -> HierConfig {
        HierConfig {
            partition: part,
            n_c,
            n_ref,
            t_c: 0.0,
            t: 0.0,
            rejection_cap: None,
        }
    }

    #[test]
    fn encode_decode_round_trips() {
        let mut rng = SharedStream::derive(&StreamSeed::new(90, "cases"));
        for case in 0..1000 {
            let seed = StreamSeed::new(rng.next_u64(), format!("rt/{case}"));
            let mut mass: Vec<f64> = (0..3).map(|_| 0.1 + rng.next_unit()).collect();
            let total: f64 = mass.iter().sum();
            mass.iter_mut().for_each(|m| *m /= total);
            let prior = pmf(&mass);
            let mut tmass: Vec<f64> = (0..3).map(|_| 0.1 + rng.next_unit()).collect();
            let ttotal: f64 = tmass.iter().sum();
            tmass.iter_mut().for_each(|m| *m /= ttotal);
            let target = pmf(&tmass);
            let part = two_block_partition();
            let cfg = demo_config(part, 1 + (rng.next_u64() % 4) as usize, vec![2, 2]);

            let encoded = hier_encode(&seed, &target, &prior, &cfg, 3).unwrap();
            for (msg, &sym) in encoded.messages.iter().zip(&encoded.symbols) {
                let decoded = hier_decode(&seed, &prior, &cfg, msg).unwrap();
                assert_eq!(decoded, sym, "case {case}");
            }
        }
    }

    #[test]
    fn singleton_blocks_concentrate_cost_in_stage_one() {
        let prior = pmf(&[0.4, 0.2, 0.4]);
        let target = pmf(&[0.1, 0.1, 0.8]);
        let part = Partition::singletons(Alphabet::indexed(3));
        let cfg = demo_config(part, 4, vec![1, 1, 1]);
        let encoded = hier_encode(&StreamSeed::new(91, "sing"), &target, &prior, &cfg, 20).unwrap();
        for msg in &encoded.messages {
            assert_eq!(msg.refine_index, 1);
            assert_eq!(msg.refine_bits, 0.0);
            assert_eq!(msg.block_bits, 2.0);
        }
    }

    #[test]
    fn one_block_skips_rejection() {
        let prior = pmf(&[0.4, 0.2, 0.4]);
        let target = pmf(&[0.1, 0.1, 0.8]);
        let part = Partition::one_block(Alphabet::indexed(3));
        let cfg = demo_config(part, 2, vec![5]);
        let encoded = hier_encode(&StreamSeed::new(92, "one"), &target, &prior, &cfg, 10).unwrap();
        for msg in &encoded.messages {
            assert_eq!(msg.raw_draws, 5);
            assert_eq!(msg.block_bits, 1.0);
        }
    }

    #[test]
    fn bit_costs_are_additive_per_message() {
        let prior = pmf(&[0.4, 0.2, 0.4]);
        let target = pmf(&[0.2, 0.2, 0.6]);
        let cfg = demo_config(two_block_partition(), 8, vec![3, 2]);
        let encoded = hier_encode(&StreamSeed::new(93, "bits"), &target, &prior, &cfg, 50).unwrap();
        let pool = block_proposals(
            &StreamSeed::new(93, "bits").child("block"),
            &prior,
            &cfg.partition,
            cfg.n_c,
        );
        for msg in &encoded.messages {
            let c = pool[msg.block_index - 1];
            assert_eq!(msg.block_bits, 3.0);
            assert_eq!(msg.refine_bits, (cfg.n_ref[c] as f64).log2());
        }
    }

    #[test]
    fn pools_are_reused_per_position() {
        let prior = pmf(&[0.4, 0.2, 0.4]);
        let target = pmf(&[0.2, 0.2, 0.6]);
        let cfg = demo_config(two_block_partition(), 2, vec![3, 3]);
        let encoded = hier_encode(&StreamSeed::new(94, "reuse"), &target, &prior, &cfg, 200).unwrap();
        // Equal positions report the identical pool raw-draw count.
        let mut by_position: HashMap<usize, u64> = HashMap::new();
        for msg in &encoded.messages {
            let prev = by_position.insert(msg.block_index, msg.raw_draws);
            if let Some(prev) = prev {
                assert_eq!(prev, msg.raw_draws);
            }
        }
        assert!(by_position.len() <= 2);
    }

    #[test]
    fn config_from_divergences_applies_the_rule() {
        let prior = pmf(&[0.4, 0.2, 0.4]);
        let target = pmf(&[0.1, 0.1, 0.8]);
        let part = two_block_partition();
        let cfg = HierConfig::from_divergences(part.clone(), &target, &prior, 2.0, 1.0).unwrap();
        let q_c = block_marginal(&target, &part);
        let p_c = block_marginal(&prior, &part);
        let expect_nc = (crate::dist::kl(&q_c, &p_c).unwrap() + 2.0).exp().ceil() as usize;
        assert_eq!(cfg.n_c, expect_nc);
        for c in 0..2 {
            let qc = condition_on_block(&target, &part, c).unwrap();
            let pc = condition_on_block(&prior, &part, c).unwrap();
            let expect = (crate::dist::kl(&qc, &pc).unwrap() + 1.0).exp().ceil() as usize;
            assert_eq!(cfg.n_ref[c], expect);
        }
        cfg.validate(&target, &prior).unwrap();
    }

    #[test]
    fn validate_rejects_low_cap() {
        let prior = pmf(&[0.4, 0.2, 0.4]);
        let target = pmf(&[0.1, 0.1, 0.8]);
        let mut cfg = demo_config(two_block_partition(), 2, vec![4, 4]);
        cfg.rejection_cap = Some(3);
        assert!(matches!(
            cfg.validate(&target, &prior),
            Err(Error::DegenerateConfig(_))
        ));
    }
}
