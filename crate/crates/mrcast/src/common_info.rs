//! Common random variable of a two-sided joint prior.
//!
//! A joint distribution whose support splits into disjoint rectangles admits
//! a random variable computable from either coordinate alone: the block
//! label. The decomposition here finds those blocks as connected components
//! of the support graph, together with the block law, the per-side
//! conditionals, and the entropy of the block variable.

use crate::dist::{entropy, Alphabet, JointPmf, Partition, Pmf};
use crate::error::{Error, Result};

/// The common partition of a joint prior: per-side block labels, the block
/// law `p_C`, per-block conditionals, and the block-variable entropy in nats.
///
/// `block_count` counts live blocks (positive mass). Symbols with zero
/// marginal mass are parked in one extra dead block past `block_count`, so
/// the per-side partitions stay total while `p_c` ranges over live blocks
/// only.
#[derive(Debug, Clone)]
pub struct GkDecomposition {
    pub partition1: Partition,
    pub partition2: Partition,
    pub block_count: usize,
    pub p_c: Pmf,
    pub cond1: Vec<Pmf>,
    pub cond2: Vec<Pmf>,
    pub cgk_nats: f64,
}

impl GkDecomposition {
    /// Block mass of live block `c`.
    pub fn block_mass(&self, c: usize) -> f64 {
        self.p_c.prob(c)
    }
}

/// Decomposes the joint into the blocks of its support graph.
///
/// Entries with mass at most `atol` count as zero support when building the
/// graph (pass `0.0` for exact zeros). A fully connected support yields one
/// block and zero common information. Components that touch only one side
/// (possible only with `atol > 0`) cannot serve a common variable and are
/// parked in the dead block.
pub fn gk_decompose(j: &JointPmf, atol: f64) -> Result<GkDecomposition> {
    let (n1, n2) = (j.rows(), j.cols());
    let edge = |i: usize, k: usize| j.prob(i, k) > atol;

    const UNLABELED: usize = usize::MAX;
    let mut label1 = vec![UNLABELED; n1];
    let mut label2 = vec![UNLABELED; n2];
    let mut live = 0usize;

    // Scan side-1 symbols in alphabet order; each unlabeled symbol with
    // support starts a new component explored breadth first.
    for start in 0..n1 {
        if label1[start] != UNLABELED || !(0..n2).any(|k| edge(start, k)) {
            continue;
        }
        let c = live;
        live += 1;
        label1[start] = c;
        let mut queue1 = vec![start];
        let mut queue2: Vec<usize> = Vec::new();
        while !queue1.is_empty() || !queue2.is_empty() {
            if let Some(i) = queue1.pop() {
                for k in 0..n2 {
                    if edge(i, k) && label2[k] == UNLABELED {
                        label2[k] = c;
                        queue2.push(k);
                    }
                }
            }
            if let Some(k) = queue2.pop() {
                for i in 0..n1 {
                    if edge(i, k) && label1[i] == UNLABELED {
                        label1[i] = c;
                        queue1.push(i);
                    }
                }
            }
        }
    }

    // Anything still unlabeled has no thresholded support on its side, or
    // sits in a one-sided component; either way it goes to the dead block.
    let dead = live;
    let mut has_dead = false;
    for l in label1.iter_mut().chain(label2.iter_mut()) {
        if *l == UNLABELED {
            *l = dead;
            has_dead = true;
        }
    }
    for c in 0..live {
        if !label2.contains(&c) {
            // One-sided component: demote it and compact the labels below.
            for l in label1.iter_mut().chain(label2.iter_mut()) {
                if *l == c {
                    *l = dead;
                    has_dead = true;
                }
            }
        }
    }
    if has_dead {
        // Compact labels so they are contiguous with the dead block last.
        let mut remap: Vec<Option<usize>> = vec![None; dead + 1];
        let mut next = 0usize;
        for &l in label1.iter().chain(label2.iter()) {
            if l != dead && remap[l].is_none() {
                remap[l] = Some(next);
                next += 1;
            }
        }
        live = next;
        for l in label1.iter_mut().chain(label2.iter_mut()) {
            *l = if *l == dead { next } else { remap[*l].unwrap() };
        }
    }

    let partition1 = Partition::new(j.alphabet1().clone(), label1)?;
    let partition2 = Partition::new(j.alphabet2().clone(), label2)?;

    // Block masses sum the full joint over each block rectangle, row-major.
    let mut block_mass = vec![0.0; live.max(1)];
    for i in 0..n1 {
        let c = partition1.block_of(i);
        if c >= live {
            continue;
        }
        for k in 0..n2 {
            if partition2.block_of(k) == c {
                block_mass[c] += j.prob(i, k);
            }
        }
    }
    if live == 0 {
        return Err(Error::InvalidDistribution(
            "joint has no support above the threshold".into(),
        ));
    }
    let p_c = Pmf::new(Alphabet::indexed(live), block_mass)?;

    let mut cond1 = Vec::with_capacity(live);
    let mut cond2 = Vec::with_capacity(live);
    for c in 0..live {
        let mass = p_c.prob(c);
        let m1: Vec<f64> = (0..n1)
            .map(|i| {
                if partition1.block_of(i) != c {
                    return 0.0;
                }
                (0..n2)
                    .filter(|&k| partition2.block_of(k) == c)
                    .map(|k| j.prob(i, k))
                    .sum::<f64>()
                    / mass
            })
            .collect();
        let m2: Vec<f64> = (0..n2)
            .map(|k| {
                if partition2.block_of(k) != c {
                    return 0.0;
                }
                (0..n1)
                    .filter(|&i| partition1.block_of(i) == c)
                    .map(|i| j.prob(i, k))
                    .sum::<f64>()
                    / mass
            })
            .collect();
        cond1.push(Pmf::new(j.alphabet1().clone(), m1)?);
        cond2.push(Pmf::new(j.alphabet2().clone(), m2)?);
    }

    let cgk_nats = entropy(&p_c);
    Ok(GkDecomposition {
        partition1,
        partition2,
        block_count: live,
        p_c,
        cond1,
        cond2,
        cgk_nats,
    })
}

/// Outcome of checking a decomposition against its joint.
#[derive(Debug, Clone)]
pub struct CommonVariableReport {
    /// `P[g1(Y1) != g2(Y2)]` under the joint; must be zero.
    pub mismatch_probability: f64,
    /// Largest entrywise deviation of a block's conditional joint from the
    /// product of its per-side conditionals.
    pub independence_residual: f64,
    /// True when no block can be split further, i.e. every block is one
    /// connected component of the support graph.
    pub maximal: bool,
    pub agreement_ok: bool,
    pub independence_ok: bool,
}

impl CommonVariableReport {
    pub fn all_ok(&self) -> bool {
        self.agreement_ok && self.independence_ok && self.maximal
    }
}

/// Checks that `dec` is a valid, maximal common variable for `j`.
pub fn verify_common_variable(j: &JointPmf, dec: &GkDecomposition) -> CommonVariableReport {
    let (n1, n2) = (j.rows(), j.cols());

    let mut mismatch = 0.0;
    for i in 0..n1 {
        for k in 0..n2 {
            let p = j.prob(i, k);
            if p > 0.0 && dec.partition1.block_of(i) != dec.partition2.block_of(k) {
                mismatch += p;
            }
        }
    }

    let mut residual: f64 = 0.0;
    for c in 0..dec.block_count {
        let mass = dec.p_c.prob(c);
        if mass <= 0.0 {
            continue;
        }
        for i in 0..n1 {
            if dec.partition1.block_of(i) != c {
                continue;
            }
            for k in 0..n2 {
                if dec.partition2.block_of(k) != c {
                    continue;
                }
                let cond_joint = j.prob(i, k) / mass;
                let product = dec.cond1[c].prob(i) * dec.cond2[c].prob(k);
                residual = residual.max((cond_joint - product).abs());
            }
        }
    }

    // A block is maximal when its support subgraph is connected. Walk each
    // block with exact-zero thresholding and count components.
    let mut maximal = true;
    for c in 0..dec.block_count {
        let syms1 = dec.partition1.block_symbols(c);
        let syms2 = dec.partition2.block_symbols(c);
        let live1: Vec<usize> = syms1
            .iter()
            .copied()
            .filter(|&i| syms2.iter().any(|&k| j.prob(i, k) > 0.0))
            .collect();
        if live1.is_empty() {
            continue;
        }
        let mut seen1 = vec![false; n1];
        let mut seen2 = vec![false; n2];
        let mut stack = vec![live1[0]];
        seen1[live1[0]] = true;
        while let Some(i) = stack.pop() {
            for &k in &syms2 {
                if j.prob(i, k) > 0.0 && !seen2[k] {
                    seen2[k] = true;
                    for &i2 in &syms1 {
                        if j.prob(i2, k) > 0.0 && !seen1[i2] {
                            seen1[i2] = true;
                            stack.push(i2);
                        }
                    }
                }
            }
        }
        if live1.iter().any(|&i| !seen1[i]) {
            maximal = false;
        }
    }

    CommonVariableReport {
        mismatch_probability: mismatch,
        independence_residual: residual,
        maximal,
        agreement_ok: mismatch == 0.0,
        independence_ok: residual <= 1e-12,
    }
}

/// Restriction of the joint to block `c`, renormalized. Returned on the full
/// alphabets with zeros outside the block.
pub fn conditional_joint(j: &JointPmf, dec: &GkDecomposition, c: usize) -> Result<JointPmf> {
    if c >= dec.block_count || dec.p_c.prob(c) <= 0.0 {
        return Err(Error::ZeroBlockMass {
            block: c,
            context: "conditional_joint".into(),
        });
    }
    let mass = dec.p_c.prob(c);
    let rows: Vec<Vec<f64>> = (0..j.rows())
        .map(|i| {
            (0..j.cols())
                .map(|k| {
                    if dec.partition1.block_of(i) == c && dec.partition2.block_of(k) == c {
                        j.prob(i, k) / mass
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    JointPmf::new(j.alphabet1().clone(), j.alphabet2().clone(), rows)
}
