//! Finite discrete probability types and the information functionals built
//! on them.
//!
//! Everything here is exact-arithmetic friendly: masses are validated once at
//! construction (sum within `1e-9` of one) and then used as-is, with no hidden
//! renormalization, so that two runs of the same configuration agree bit for
//! bit. All entropies and divergences are returned in nats; [`nats_to_bits`]
//! converts for reporting and for index-cost arithmetic.

use crate::error::{Error, Result};

/// Sum tolerance checked when a distribution is constructed.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Converts a quantity in nats to bits.
pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

/// An ordered list of distinct symbol names. The order is part of the
/// alphabet's identity: inverse-CDF sampling walks symbols in this order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(symbols: Vec<S>) -> Result<Self> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(Error::InvalidDistribution("alphabet is empty".into()));
        }
        for (i, s) in symbols.iter().enumerate() {
            if symbols[..i].contains(s) {
                return Err(Error::InvalidDistribution(format!(
                    "duplicate symbol {s:?} in alphabet"
                )));
            }
        }
        Ok(Alphabet { symbols })
    }

    /// Alphabet `"0", "1", ..` used for block labels.
    pub fn indexed(n: usize) -> Self {
        Alphabet {
            symbols: (0..n.max(1)).map(|i| i.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbol(&self, idx: usize) -> &str {
        &self.symbols[idx]
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }
}

/// A probability mass function over an [`Alphabet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    alphabet: Alphabet,
    mass: Vec<f64>,
}

impl Pmf {
    pub fn new(alphabet: Alphabet, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != alphabet.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} masses for {} symbols",
                mass.len(),
                alphabet.len()
            )));
        }
        let mut total = 0.0;
        for (i, &m) in mass.iter().enumerate() {
            if !m.is_finite() || m < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "mass {m} for symbol {:?}",
                    alphabet.symbol(i)
                )));
            }
            total += m;
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "masses sum to {total}, expected 1 within {MASS_TOLERANCE}"
            )));
        }
        Ok(Pmf { alphabet, mass })
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        let n = alphabet.len();
        Pmf {
            alphabet,
            mass: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(alphabet: Alphabet, idx: usize) -> Self {
        let mut mass = vec![0.0; alphabet.len()];
        mass[idx] = 1.0;
        Pmf { alphabet, mass }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn prob(&self, idx: usize) -> f64 {
        self.mass[idx]
    }

    /// Indices with strictly positive mass.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(i, _)| i)
    }

    pub fn same_alphabet(&self, other: &Pmf) -> Result<()> {
        if self.alphabet == other.alphabet {
            Ok(())
        } else {
            Err(Error::InvalidDistribution(
                "distributions live on different alphabets".into(),
            ))
        }
    }
}

/// A joint probability mass function over a pair of alphabets, stored
/// row-major (rows index the first alphabet).
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    alphabet1: Alphabet,
    alphabet2: Alphabet,
    mass: Vec<f64>,
}

impl JointPmf {
    pub fn new(alphabet1: Alphabet, alphabet2: Alphabet, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != alphabet1.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} rows for {} row symbols",
                rows.len(),
                alphabet1.len()
            )));
        }
        let mut mass = Vec::with_capacity(alphabet1.len() * alphabet2.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != alphabet2.len() {
                return Err(Error::InvalidDistribution(format!(
                    "row {i} has {} entries for {} column symbols",
                    row.len(),
                    alphabet2.len()
                )));
            }
            for (j, &m) in row.iter().enumerate() {
                if !m.is_finite() || m < 0.0 {
                    return Err(Error::InvalidDistribution(format!(
                        "mass {m} at ({:?}, {:?})",
                        alphabet1.symbol(i),
                        alphabet2.symbol(j)
                    )));
                }
                mass.push(m);
            }
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "joint masses sum to {total}, expected 1 within {MASS_TOLERANCE}"
            )));
        }
        Ok(JointPmf {
            alphabet1,
            alphabet2,
            mass,
        })
    }

    /// Product joint `p1 ⊗ p2`.
    pub fn product(p1: &Pmf, p2: &Pmf) -> Self {
        let mut mass = Vec::with_capacity(p1.len() * p2.len());
        for &a in p1.mass() {
            for &b in p2.mass() {
                mass.push(a * b);
            }
        }
        JointPmf {
            alphabet1: p1.alphabet().clone(),
            alphabet2: p2.alphabet().clone(),
            mass,
        }
    }

    pub fn alphabet1(&self) -> &Alphabet {
        &self.alphabet1
    }

    pub fn alphabet2(&self) -> &Alphabet {
        &self.alphabet2
    }

    pub fn rows(&self) -> usize {
        self.alphabet1.len()
    }

    pub fn cols(&self) -> usize {
        self.alphabet2.len()
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.mass[i * self.cols() + j]
    }

    /// Flattened row-major masses.
    pub fn flat(&self) -> &[f64] {
        &self.mass
    }

    /// Row and column sums as marginal distributions.
    pub fn marginals(&self) -> (Pmf, Pmf) {
        let (n1, n2) = (self.rows(), self.cols());
        let mut m1 = vec![0.0; n1];
        let mut m2 = vec![0.0; n2];
        for i in 0..n1 {
            for j in 0..n2 {
                let p = self.prob(i, j);
                m1[i] += p;
                m2[j] += p;
            }
        }
        (
            Pmf {
                alphabet: self.alphabet1.clone(),
                mass: m1,
            },
            Pmf {
                alphabet: self.alphabet2.clone(),
                mass: m2,
            },
        )
    }
}

/// A labelling of an alphabet's symbols into contiguous blocks `0..block_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    alphabet: Alphabet,
    block_of: Vec<usize>,
    block_count: usize,
}

impl Partition {
    pub fn new(alphabet: Alphabet, block_of: Vec<usize>) -> Result<Self> {
        if block_of.len() != alphabet.len() {
            return Err(Error::InvalidPartition(format!(
                "{} labels for {} symbols",
                block_of.len(),
                alphabet.len()
            )));
        }
        let block_count = block_of.iter().copied().max().map_or(0, |m| m + 1);
        for c in 0..block_count {
            if !block_of.contains(&c) {
                return Err(Error::InvalidPartition(format!(
                    "block {c} has no symbols (labels must be contiguous from 0)"
                )));
            }
        }
        Ok(Partition {
            alphabet,
            block_of,
            block_count,
        })
    }

    /// The trivial partition with a single block.
    pub fn one_block(alphabet: Alphabet) -> Self {
        let n = alphabet.len();
        Partition {
            alphabet,
            block_of: vec![0; n],
            block_count: 1,
        }
    }

    /// Each symbol is its own block, in alphabet order.
    pub fn singletons(alphabet: Alphabet) -> Self {
        let n = alphabet.len();
        Partition {
            alphabet,
            block_of: (0..n).collect(),
            block_count: n,
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn block_count(&self) -> usize {
        self.block_count
    }

    pub fn block_of(&self, sym: usize) -> usize {
        self.block_of[sym]
    }

    pub fn labels(&self) -> &[usize] {
        &self.block_of
    }

    /// Symbols belonging to block `c`, in alphabet order.
    pub fn block_symbols(&self, c: usize) -> Vec<usize> {
        (0..self.block_of.len())
            .filter(|&i| self.block_of[i] == c)
            .collect()
    }
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(p: &Pmf) -> f64 {
    p.mass()
        .iter()
        .filter(|&&m| m > 0.0)
        .map(|&m| -m * m.ln())
        .sum::<f64>()
        .max(0.0) // rounding can push a near-degenerate pmf a hair negative
}

/// Kullback-Leibler divergence `D(q ‖ p)` in nats.
///
/// Fails with [`Error::SupportViolation`] when some symbol carries target
/// mass but no prior mass; the importance ratio there would be infinite.
pub fn kl(q: &Pmf, p: &Pmf) -> Result<f64> {
    q.same_alphabet(p)?;
    let mut acc = 0.0;
    for (i, (&qm, &pm)) in q.mass().iter().zip(p.mass()).enumerate() {
        if qm > 0.0 {
            if pm == 0.0 {
                return Err(Error::SupportViolation(format!(
                    "symbol {:?} has target mass {qm} but zero prior mass",
                    q.alphabet().symbol(i)
                )));
            }
            acc += qm * (qm / pm).ln();
        }
    }
    Ok(acc)
}

/// Total variation distance `½ Σ |p − q|`, in `[0, 1]`.
pub fn tv(p: &Pmf, q: &Pmf) -> f64 {
    0.5 * p
        .mass()
        .iter()
        .zip(q.mass())
        .map(|(&a, &b)| (a - b).abs())
        .sum::<f64>()
}

/// Chi-square divergence `χ²(p ‖ q) = Σ p²/q − 1`.
pub fn chi_square(p: &Pmf, q: &Pmf) -> Result<f64> {
    p.same_alphabet(q)?;
    let mut acc = 0.0;
    for (i, (&pm, &qm)) in p.mass().iter().zip(q.mass()).enumerate() {
        if pm > 0.0 {
            if qm == 0.0 {
                return Err(Error::SupportViolation(format!(
                    "symbol {:?} has mass {pm} under p but zero mass under q",
                    p.alphabet().symbol(i)
                )));
            }
            acc += pm * pm / qm;
        }
    }
    Ok(acc - 1.0)
}

/// Mutual information of a joint distribution, in nats.
pub fn mutual_information(j: &JointPmf) -> f64 {
    let (m1, m2) = j.marginals();
    let mut acc = 0.0;
    for i in 0..j.rows() {
        for k in 0..j.cols() {
            let p = j.prob(i, k);
            if p > 0.0 {
                acc += p * (p / (m1.prob(i) * m2.prob(k))).ln();
            }
        }
    }
    acc.max(0.0)
}

/// Pushforward of `p` through the partition: the law of the block label.
pub fn block_marginal(p: &Pmf, part: &Partition) -> Pmf {
    let mut mass = vec![0.0; part.block_count()];
    for (i, &m) in p.mass().iter().enumerate() {
        mass[part.block_of(i)] += m;
    }
    Pmf {
        alphabet: Alphabet::indexed(part.block_count()),
        mass,
    }
}

/// Restriction of `p` to block `c`, renormalized. The returned Pmf lives on
/// the full alphabet with zeros outside the block.
pub fn condition_on_block(p: &Pmf, part: &Partition, c: usize) -> Result<Pmf> {
    let mut total = 0.0;
    for (i, &m) in p.mass().iter().enumerate() {
        if part.block_of(i) == c {
            total += m;
        }
    }
    if total <= 0.0 {
        return Err(Error::ZeroBlockMass {
            block: c,
            context: "condition_on_block".into(),
        });
    }
    let mass = p
        .mass()
        .iter()
        .enumerate()
        .map(|(i, &m)| if part.block_of(i) == c { m / total } else { 0.0 })
        .collect();
    Ok(Pmf {
        alphabet: p.alphabet().clone(),
        mass,
    })
}
