//! Minimal random coding over a shared proposal stream.
//!
//! Encoder and decoder draw the same `n` proposals from the prior. The
//! encoder scores each proposal by its importance ratio `target/prior`,
//! draws one index from the normalized scores, and transmits only that
//! index. The decoder replays the proposal stream and picks the indexed
//! element, so the selected sample costs `log2(n)` bits.

use crate::dist::Pmf;
use crate::error::{Error, Result};
use crate::randomness::{SharedStream, StreamSeed};

/// Categorical distribution over proposal indices, with weights
/// proportional to importance ratios.
#[derive(Debug, Clone)]
pub struct AuxDistribution {
    weights: Vec<f64>,
    /// The unnormalized ratio total `τ = Σ_j q(Y_j)/p(Y_j)`.
    normalizer: f64,
}

impl AuxDistribution {
    /// Builds the categorical from raw importance ratios.
    pub fn from_ratios(ratios: &[f64]) -> Result<Self> {
        let normalizer: f64 = ratios.iter().sum();
        if normalizer.is_nan() || normalizer <= 0.0 {
            return Err(Error::DegenerateWeights);
        }
        Ok(AuxDistribution {
            weights: ratios.iter().map(|r| r / normalizer).collect(),
            normalizer,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Expected value of `f(selected proposal)` conditioned on this proposal
    /// list, i.e. the weight-averaged function value.
    pub fn expected_value(&self, proposals: &[usize], f: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(proposals)
            .map(|(&w, &sym)| w * f[sym])
            .sum()
    }
}

/// The transmitted selection: a 1-based index into the shared proposal list.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexMessage {
    pub index: usize,
    pub n: usize,
    /// Idealized cost `log2(n)` in bits.
    pub bit_cost: f64,
}

impl IndexMessage {
    /// Whole bits needed for a fixed-width encoding of an index in `[1..n]`.
    pub fn ceil_bits(&self) -> u64 {
        ceil_log2(self.n)
    }
}

/// `ceil(log2(n))` computed in integer arithmetic.
pub fn ceil_log2(n: usize) -> u64 {
    if n <= 1 {
        0
    } else {
        64 - ((n - 1) as u64).leading_zeros() as u64
    }
}

/// Draws the shared proposal list: `n` i.i.d. samples from the prior,
/// reproducible by anyone holding the same seed.
pub fn draw_proposals(seed: &StreamSeed, prior: &Pmf, n: usize) -> Vec<usize> {
    let mut stream = SharedStream::derive(seed);
    (0..n).map(|_| stream.sample_categorical(prior)).collect()
}

fn check_support_nested(target: &Pmf, prior: &Pmf) -> Result<()> {
    target.same_alphabet(prior)?;
    for i in target.support() {
        if prior.prob(i) == 0.0 {
            return Err(Error::SupportViolation(format!(
                "target puts mass {} on symbol {:?} outside the prior support",
                target.prob(i),
                target.alphabet().symbol(i)
            )));
        }
    }
    Ok(())
}

/// Importance-ratio categorical over a proposal list.
pub fn aux_distribution(target: &Pmf, prior: &Pmf, proposals: &[usize]) -> Result<AuxDistribution> {
    check_support_nested(target, prior)?;
    let ratios: Vec<f64> = proposals
        .iter()
        .map(|&sym| {
            if prior.prob(sym) == 0.0 {
                Err(Error::SupportViolation(format!(
                    "proposal symbol {:?} has zero prior mass",
                    prior.alphabet().symbol(sym)
                )))
            } else {
                Ok(target.prob(sym) / prior.prob(sym))
            }
        })
        .collect::<Result<_>>()?;
    AuxDistribution::from_ratios(&ratios)
}

/// Draws the transmitted index from the auxiliary distribution.
pub fn encode_index(stream: &mut SharedStream, aux: &AuxDistribution) -> IndexMessage {
    let u = stream.next_unit();
    let idx = crate::randomness::categorical_from_unit(aux.weights(), u);
    IndexMessage {
        index: idx + 1,
        n: aux.len(),
        bit_cost: (aux.len() as f64).log2(),
    }
}

/// Decoder side: replays the proposal stream and returns the indexed symbol.
/// Always equals the encoder's selection because both sides hold the seed.
pub fn decode_sample(seed: &StreamSeed, prior: &Pmf, msg: &IndexMessage) -> Result<usize> {
    if msg.index < 1 || msg.index > msg.n {
        return Err(Error::IndexOutOfRange {
            index: msg.index,
            n: msg.n,
        });
    }
    let proposals = draw_proposals(seed, prior, msg.n);
    Ok(proposals[msg.index - 1])
}

/// The `K`-sample estimator: independent repetitions, each with a fresh
/// proposal list under the sub-label `k/<k>`, averaging `f` over the
/// selected symbols.
pub fn mrc_estimate(
    seed: &StreamSeed,
    target: &Pmf,
    prior: &Pmf,
    f: &[f64],
    n: usize,
    reps: usize,
) -> Result<(f64, Vec<IndexMessage>)> {
    assert!(n >= 1, "need at least one proposal");
    assert!(reps >= 1, "need at least one repetition");
    assert_eq!(f.len(), prior.len(), "function table must cover the alphabet");
    let mut total = 0.0;
    let mut messages = Vec::with_capacity(reps);
    for k in 0..reps {
        let prop_seed = seed.child(&format!("k/{k}"));
        let proposals = draw_proposals(&prop_seed, prior, n);
        let aux = aux_distribution(target, prior, &proposals)?;
        let mut idx_stream = SharedStream::derive(&prop_seed.child("m"));
        let msg = encode_index(&mut idx_stream, &aux);
        total += f[proposals[msg.index - 1]];
        messages.push(msg);
    }
    Ok((total / reps as f64, messages))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::Alphabet;

    fn pmf(mass: &[f64]) -> Pmf {
        Pmf::new(Alphabet::indexed(mass.len()), mass.to_vec()).unwrap()
    }

    #[test]
    fn proposals_are_reproducible() {
        let seed = StreamSeed::new(3, "props");
        let prior = pmf(&[0.5, 0.5]);
        assert_eq!(
            draw_proposals(&seed, &prior, 64),
            draw_proposals(&seed, &prior, 64)
        );
        let point = Pmf::point_mass(Alphabet::indexed(2), 1);
        assert_eq!(draw_proposals(&seed, &point, 1), vec![1]);
    }

    #[test]
    fn proposal_frequencies_match_prior() {
        let seed = StreamSeed::new(8, "freq");
        let prior = pmf(&[0.5, 0.5]);
        let props = draw_proposals(&seed, &prior, 100_000);
        let f0 = props.iter().filter(|&&s| s == 0).count() as f64 / props.len() as f64;
        assert!((f0 - 0.5).abs() < 0.01);
    }

    #[test]
    fn aux_examples() {
        let prior = pmf(&[0.5, 0.5]);
        let target = pmf(&[0.9, 0.1]);

        let aux = aux_distribution(&prior, &prior, &[0, 1, 0]).unwrap();
        for &w in aux.weights() {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }

        // Identical proposals cancel the common ratio.
        let aux = aux_distribution(&target, &prior, &[1, 1]).unwrap();
        assert_eq!(aux.weights(), &[0.5, 0.5]);

        let aux = aux_distribution(&target, &prior, &[0, 1]).unwrap();
        assert!((aux.weights()[0] - 0.9).abs() < 1e-15);
        assert!((aux.weights()[1] - 0.1).abs() < 1e-15);
        assert!((aux.normalizer() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn ratio_scaling_leaves_weights_unchanged() {
        let ratios = [0.3, 0.6, 0.9];
        let scaled: Vec<f64> = ratios.iter().map(|r| r * 17.0).collect();
        let a = AuxDistribution::from_ratios(&ratios).unwrap();
        let b = AuxDistribution::from_ratios(&scaled).unwrap();
        for (x, y) in a.weights().iter().zip(b.weights()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_weights_error() {
        let target = pmf(&[1.0, 0.0]);
        let prior = pmf(&[0.5, 0.5]);
        let err = aux_distribution(&target, &prior, &[1, 1]).unwrap_err();
        assert!(matches!(err, Error::DegenerateWeights));
    }

    #[test]
    fn support_violation_detected() {
        let target = pmf(&[0.5, 0.5]);
        let prior = pmf(&[1.0, 0.0]);
        assert!(matches!(
            aux_distribution(&target, &prior, &[0]),
            Err(Error::SupportViolation(_))
        ));
    }

    #[test]
    fn encode_index_edge_cases() {
        let mut stream = SharedStream::derive(&StreamSeed::new(1, "enc"));
        let aux = AuxDistribution::from_ratios(&[1.0]).unwrap();
        let msg = encode_index(&mut stream, &aux);
        assert_eq!(msg.index, 1);
        assert_eq!(msg.bit_cost, 0.0);
        assert_eq!(msg.ceil_bits(), 0);

        let point = AuxDistribution::from_ratios(&[0.0, 0.0, 1.0]).unwrap();
        for _ in 0..50 {
            assert_eq!(encode_index(&mut stream, &point).index, 3);
        }
    }

    #[test]
    fn uniform_index_frequencies() {
        let aux = AuxDistribution::from_ratios(&[1.0; 4]).unwrap();
        let mut stream = SharedStream::derive(&StreamSeed::new(2, "unif"));
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[encode_index(&mut stream, &aux).index - 1] += 1;
        }
        // 3 sigma multinomial band around 1/4.
        let sigma = (0.25 * 0.75 / n as f64).sqrt();
        for &c in &counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 3.0 * sigma + 1e-9);
        }
    }

    #[test]
    fn round_trips_agree() {
        let mut rng = SharedStream::derive(&StreamSeed::new(77, "cases"));
        for case in 0..1000 {
            let seed = StreamSeed::new(rng.next_u64(), format!("rt/{case}"));
            let a = 0.05 + 0.9 * rng.next_unit();
            let b = 0.05 + 0.9 * rng.next_unit();
            let prior = pmf(&[a / (a + b), b / (a + b)]);
            let c = 0.05 + 0.9 * rng.next_unit();
            let d = 0.05 + 0.9 * rng.next_unit();
            let target = pmf(&[c / (c + d), d / (c + d)]);
            let n = 1 + (rng.next_u64() % 8) as usize;

            let proposals = draw_proposals(&seed, &prior, n);
            let aux = aux_distribution(&target, &prior, &proposals).unwrap();
            let mut idx_stream = SharedStream::derive(&seed.child("m"));
            let msg = encode_index(&mut idx_stream, &aux);
            let decoded = decode_sample(&seed, &prior, &msg).unwrap();
            assert_eq!(decoded, proposals[msg.index - 1]);
        }
    }

    #[test]
    fn decode_rejects_bad_index() {
        let seed = StreamSeed::new(0, "bad");
        let prior = pmf(&[0.5, 0.5]);
        let msg = IndexMessage {
            index: 5,
            n: 4,
            bit_cost: 2.0,
        };
        assert!(matches!(
            decode_sample(&seed, &prior, &msg),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn estimate_point_mass_is_exact() {
        let point = Pmf::point_mass(Alphabet::indexed(2), 0);
        let f = [0.7, -1.0];
        let (est, msgs) =
            mrc_estimate(&StreamSeed::new(4, "pt"), &point, &point, &f, 3, 10).unwrap();
        assert!((est - 0.7).abs() < 1e-12);
        assert_eq!(msgs.len(), 10);
    }

    #[test]
    fn estimate_converges_with_many_proposals() {
        let prior = pmf(&[0.5, 0.5]);
        let target = pmf(&[0.9, 0.1]);
        let f = [1.0, 0.0];
        let (est, _) =
            mrc_estimate(&StreamSeed::new(5, "conv"), &target, &prior, &f, 2048, 10_000).unwrap();
        assert!((est - 0.9).abs() < 0.02, "estimate {est}");
    }

    #[test]
    fn single_proposal_estimates_prior_mean() {
        let prior = pmf(&[0.5, 0.5]);
        let target = pmf(&[0.9, 0.1]);
        let f = [1.0, 0.0];
        let (est, _) =
            mrc_estimate(&StreamSeed::new(6, "n1"), &target, &prior, &f, 1, 20_000).unwrap();
        assert!((est - 0.5).abs() < 0.02, "estimate {est}");
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(4), 2);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(ceil_log2(1024), 10);
    }
}
