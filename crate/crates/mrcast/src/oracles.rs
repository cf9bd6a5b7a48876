//! Brute-force ground truth for tiny instances.
//!
//! Everything here is exact: selected-sample laws by full enumeration of
//! ordered proposal tuples (i.i.d. products, no symmetry shortcuts), biases
//! by direct inner products, expected rejection draws by geometric waiting
//! times, and block structure by exhaustive partition search. Instances past
//! the enumeration ceiling are an error, never a truncation.

use crate::dist::{block_marginal, condition_on_block, entropy, Alphabet, JointPmf, Partition, Pmf};
use crate::error::{Error, Result};

/// Hard ceiling on enumeration terms.
pub const ENUMERATION_CEILING: u128 = 10_000_000;

/// An exactly enumerated selected-sample law.
#[derive(Debug, Clone)]
pub struct ExactLaw {
    pub pmf: Pmf,
    /// Tuples summed: `|support|^n` for single-stage selection; for the
    /// two-stage law, the outer block tuples plus each block's inner
    /// enumeration.
    pub enumeration_size: u128,
    pub method: &'static str,
}

fn checked_pow(base: usize, exp: usize) -> Result<u128> {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base as u128);
        if acc > ENUMERATION_CEILING {
            return Err(Error::InfeasibleEnumeration {
                summands: acc,
                ceiling: ENUMERATION_CEILING,
            });
        }
    }
    Ok(acc)
}

/// Exact law of the symbol selected by single-stage minimal random coding
/// with `n` proposals: sums over every ordered proposal tuple the tuple's
/// probability times the index weights landing on each symbol.
pub fn exact_selected_distribution_mrc(target: &Pmf, prior: &Pmf, n: usize) -> Result<ExactLaw> {
    assert!(n >= 1);
    target.same_alphabet(prior)?;
    let support: Vec<usize> = prior.support().collect();
    for i in target.support() {
        if prior.prob(i) == 0.0 {
            return Err(Error::SupportViolation(format!(
                "target mass outside prior support at symbol {:?}",
                target.alphabet().symbol(i)
            )));
        }
    }
    let size = checked_pow(support.len(), n)?;

    let ratios: Vec<f64> = support
        .iter()
        .map(|&s| target.prob(s) / prior.prob(s))
        .collect();
    let probs: Vec<f64> = support.iter().map(|&s| prior.prob(s)).collect();

    let mut law = vec![0.0; prior.len()];
    let mut tuple = vec![0usize; n];
    enumerate_tuples(&mut tuple, 0, 1.0, 0.0, &probs, &ratios, &mut |tuple, prob, tau| {
        if tau <= 0.0 {
            return Err(Error::DegenerateWeights);
        }
        for &pos in tuple.iter() {
            law[support[pos]] += prob * ratios[pos] / tau;
        }
        Ok(())
    })?;

    Ok(ExactLaw {
        pmf: Pmf::new(prior.alphabet().clone(), law)?,
        enumeration_size: size,
        method: "mrc-enumeration",
    })
}

/// Walks all ordered tuples, carrying the running probability product and
/// the running ratio total.
fn enumerate_tuples(
    tuple: &mut Vec<usize>,
    depth: usize,
    prob: f64,
    tau: f64,
    probs: &[f64],
    ratios: &[f64],
    visit: &mut impl FnMut(&[usize], f64, f64) -> Result<()>,
) -> Result<()> {
    if depth == tuple.len() {
        return visit(tuple, prob, tau);
    }
    for choice in 0..probs.len() {
        tuple[depth] = choice;
        enumerate_tuples(
            tuple,
            depth + 1,
            prob * probs[choice],
            tau + ratios[choice],
            probs,
            ratios,
            visit,
        )?;
    }
    Ok(())
}

/// Exact law of the two-stage selection: outer enumeration over ordered
/// block tuples with stage-one weights, with each position contributing that
/// block's exact single-stage conditional law.
pub fn exact_selected_distribution_hier(
    target: &Pmf,
    prior: &Pmf,
    part: &Partition,
    n_c: usize,
    n_ref: &[usize],
) -> Result<ExactLaw> {
    assert!(n_c >= 1);
    assert_eq!(n_ref.len(), part.block_count());
    let q_c = block_marginal(target, part);
    let p_c = block_marginal(prior, part);
    for c in q_c.support() {
        if p_c.prob(c) == 0.0 {
            return Err(Error::SupportViolation(format!(
                "target block mass {} on block {c} outside the prior's block support",
                q_c.prob(c)
            )));
        }
    }
    let blocks: Vec<usize> = p_c.support().collect();

    // Feasibility: outer tuples times the largest inner enumeration.
    let outer = checked_pow(blocks.len(), n_c)?;
    let mut size = outer;
    let mut worst_inner: u128 = 1;
    for &c in &blocks {
        let block_support = part
            .block_symbols(c)
            .iter()
            .filter(|&&s| prior.prob(s) > 0.0)
            .count();
        let inner = checked_pow(block_support, n_ref[c])?;
        worst_inner = worst_inner.max(inner);
        size += inner;
    }
    if outer.saturating_mul(worst_inner) > ENUMERATION_CEILING {
        return Err(Error::InfeasibleEnumeration {
            summands: outer.saturating_mul(worst_inner),
            ceiling: ENUMERATION_CEILING,
        });
    }

    // Inner conditional laws, one per block with target mass.
    let mut inner_law: Vec<Option<Vec<f64>>> = vec![None; part.block_count()];
    for &c in &blocks {
        if q_c.prob(c) > 0.0 {
            let qc = condition_on_block(target, part, c)?;
            let pc = condition_on_block(prior, part, c)?;
            let law = exact_selected_distribution_mrc(&qc, &pc, n_ref[c])?;
            inner_law[c] = Some(law.pmf.mass().to_vec());
        }
    }

    let ratios: Vec<f64> = blocks.iter().map(|&c| q_c.prob(c) / p_c.prob(c)).collect();
    let probs: Vec<f64> = blocks.iter().map(|&c| p_c.prob(c)).collect();

    let mut law = vec![0.0; prior.len()];
    let mut tuple = vec![0usize; n_c];
    let mut block_weight = vec![0.0; part.block_count()];
    enumerate_tuples(&mut tuple, 0, 1.0, 0.0, &probs, &ratios, &mut |tuple, prob, tau| {
        if tau <= 0.0 {
            return Err(Error::DegenerateWeights);
        }
        block_weight.iter_mut().for_each(|w| *w = 0.0);
        for &pos in tuple.iter() {
            block_weight[blocks[pos]] += ratios[pos] / tau;
        }
        for &c in blocks.iter() {
            if block_weight[c] > 0.0 {
                let inner = inner_law[c].as_ref().expect("selected block has target mass");
                for (sym, &m) in inner.iter().enumerate() {
                    if m > 0.0 {
                        law[sym] += prob * block_weight[c] * m;
                    }
                }
            }
        }
        Ok(())
    })?;

    Ok(ExactLaw {
        pmf: Pmf::new(prior.alphabet().clone(), law)?,
        enumeration_size: size,
        method: "hier-enumeration",
    })
}

/// `|E_law[f] − E_target[f]|`, exactly.
pub fn exact_bias(f: &[f64], law: &Pmf, target: &Pmf) -> f64 {
    law.mass()
        .iter()
        .zip(target.mass())
        .zip(f)
        .map(|((&l, &t), &fv)| fv * (l - t))
        .sum::<f64>()
        .abs()
}

/// Expected raw prior draws of the rejection stage per transmission, given
/// the law of the chosen block: each block costs `n_ref(c) / p_C(c)` draws
/// on average (geometric waiting).
pub fn expected_refinement_draws(
    prior: &Pmf,
    part: &Partition,
    n_ref: &[usize],
    chosen_law: &Pmf,
) -> Result<f64> {
    let p_c = block_marginal(prior, part);
    let mut total = 0.0;
    for c in 0..part.block_count() {
        let w = chosen_law.prob(c);
        if w > 0.0 {
            if p_c.prob(c) == 0.0 {
                return Err(Error::ZeroBlockMass {
                    block: c,
                    context: "expected_refinement_draws".into(),
                });
            }
            total += w * n_ref[c] as f64 / p_c.prob(c);
        }
    }
    Ok(total)
}

/// All set partitions of `n` elements, as restricted growth strings.
fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn recurse(labels: &mut Vec<usize>, i: usize, max_used: usize, out: &mut Vec<Vec<usize>>) {
        if i == labels.len() {
            out.push(labels.clone());
            return;
        }
        for l in 0..=max_used + 1 {
            labels[i] = l;
            recurse(labels, i + 1, max_used.max(l), out);
        }
    }
    let mut out = Vec::new();
    let mut labels = vec![0usize; n];
    if n > 0 {
        recurse(&mut labels, 1, 0, &mut out);
    } else {
        out.push(labels);
    }
    out
}

/// Exhaustive search for the entropy-maximizing common variable: enumerates
/// all partition pairs with matched block counts, keeps those under which
/// the two block labels agree almost surely, and returns the best.
///
/// Labels follow the same convention as the graph-based decomposition:
/// blocks numbered by first appearance scanning the first alphabet, with
/// zero-marginal symbols in one extra dead block.
pub fn brute_force_gk(j: &JointPmf) -> Result<(Partition, Partition)> {
    let (m1, m2) = j.marginals();
    let sup1: Vec<usize> = m1.support().collect();
    let sup2: Vec<usize> = m2.support().collect();
    if sup1.len() > 5 || sup2.len() > 5 {
        return Err(Error::InfeasibleEnumeration {
            summands: (sup1.len() as u128).pow(sup1.len() as u32)
                * (sup2.len() as u128).pow(sup2.len() as u32),
            ceiling: 3125,
        });
    }
    if sup1.is_empty() {
        return Err(Error::InvalidDistribution(
            "joint has no support; no common variable exists".into(),
        ));
    }

    let parts1 = set_partitions(sup1.len());
    let parts2 = set_partitions(sup2.len());
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;

    for pa in &parts1 {
        let blocks_a = pa.iter().copied().max().unwrap_or(0) + 1;
        for pb in &parts2 {
            let blocks_b = pb.iter().copied().max().unwrap_or(0) + 1;
            if blocks_a != blocks_b {
                continue;
            }
            // Match side-2 blocks to side-1 blocks through the support.
            let mut matched = vec![usize::MAX; blocks_b];
            let mut valid = true;
            'scan: for (ia, &x) in sup1.iter().enumerate() {
                for (ib, &y) in sup2.iter().enumerate() {
                    if j.prob(x, y) > 0.0 {
                        let (a, b) = (pa[ia], pb[ib]);
                        if matched[b] == usize::MAX {
                            matched[b] = a;
                        } else if matched[b] != a {
                            valid = false;
                            break 'scan;
                        }
                    }
                }
            }
            if !valid || matched.iter().any(|&m| m == usize::MAX) {
                continue;
            }
            // Bijectivity: no two side-2 blocks may share a side-1 block.
            let mut seen = vec![false; blocks_a];
            if matched.iter().any(|&m| std::mem::replace(&mut seen[m], true)) {
                continue;
            }

            let mut mass = vec![0.0; blocks_a];
            for (ia, &x) in sup1.iter().enumerate() {
                mass[pa[ia]] += m1.prob(x);
            }
            let h = Pmf::new(Alphabet::indexed(blocks_a), mass)
                .map(|p| entropy(&p))
                .unwrap_or(0.0);
            if best.as_ref().map_or(true, |(bh, _, _)| h > *bh) {
                // Align side-2 labels with side 1 through the match.
                let aligned: Vec<usize> = pb.iter().map(|&b| matched[b]).collect();
                best = Some((h, pa.clone(), aligned));
            }
        }
    }

    let (_, pa, pb) = best.expect("the all-in-one-block pair is always valid");

    // Canonical relabel by first appearance on side 1, then rebuild total
    // partitions with dead symbols parked past the live labels.
    let live = pa.iter().copied().max().unwrap_or(0) + 1;
    let mut remap = vec![usize::MAX; live];
    let mut next = 0;
    for &l in &pa {
        if remap[l] == usize::MAX {
            remap[l] = next;
            next += 1;
        }
    }
    let dead = next;
    let mut label1 = vec![dead; j.alphabet1().len()];
    for (ia, &x) in sup1.iter().enumerate() {
        label1[x] = remap[pa[ia]];
    }
    let mut label2 = vec![dead; j.alphabet2().len()];
    for (ib, &y) in sup2.iter().enumerate() {
        label2[y] = remap[pb[ib]];
    }
    Ok((
        Partition::new(j.alphabet1().clone(), label1)?,
        Partition::new(j.alphabet2().clone(), label2)?,
    ))
}
