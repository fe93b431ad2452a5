//! Exact enumeration of `P(statistic >= x)` for small horizons.
//!
//! Every environment sequence of length `n0 + n` is enumerated (weight = product of
//! state weights), and along each sequence the exact pmf of `Z_k` is pushed forward
//! through convolution powers of the active offspring law. Mass at populations above
//! `z_cap` is dropped and reported, which turns the result into a two-sided bracket.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::offspring::{EnvironmentModel, OffspringLaw};
use crate::process::{ln_population, Scale, Standardizer};
use crate::stats::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EnumerationLimits {
    pub max_sequences: u64,
    pub z_cap: u64,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        Self {
            max_sequences: 1 << 16,
            z_cap: 4096,
        }
    }
}

/// Exact tail probability with the mass lost to truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactTail {
    /// Lower bound: truncated mass excluded.
    pub prob: f64,
    pub truncated_mass: f64,
}

impl ExactTail {
    /// Upper bound: all truncated mass assigned to the tail.
    pub fn upper(&self) -> f64 {
        (self.prob + self.truncated_mass).min(1.0)
    }
}

/// `law^{*z}` restricted to `[offset, z_cap]`, with the mass that fell beyond the cap.
#[derive(Debug, Clone)]
struct Power {
    offset: u64,
    probs: Vec<f64>,
    lost: f64,
}

struct ConvolutionPowers<'a> {
    law: &'a OffspringLaw,
    z_cap: u64,
    table: Vec<Power>,
}

impl<'a> ConvolutionPowers<'a> {
    fn new(law: &'a OffspringLaw, z_cap: u64) -> Self {
        Self {
            law,
            z_cap,
            table: vec![Power {
                offset: 0,
                probs: vec![1.0],
                lost: 0.0,
            }],
        }
    }

    fn get(&mut self, z: u64) -> &Power {
        while (self.table.len() as u64) <= z {
            let prev = self.table.last().expect("table starts with z = 0");
            let offset = prev.offset + self.law.min_value();
            let top = (prev.offset + prev.probs.len() as u64 - 1 + self.law.max_value())
                .min(self.z_cap)
                .max(offset);
            let mut probs = vec![0.0; (top - offset + 1) as usize];
            let mut lost = prev.lost;
            for (i, &p) in prev.probs.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for &(v, q) in self.law.support() {
                    let idx = prev.offset + i as u64 + v;
                    if idx > self.z_cap {
                        lost += p * q;
                    } else {
                        probs[(idx - offset) as usize] += p * q;
                    }
                }
            }
            self.table.push(Power {
                offset,
                probs,
                lost,
            });
        }
        &self.table[z as usize]
    }
}

/// Sparse pmf of a population size on `[lo, lo + probs.len())`.
#[derive(Debug, Clone)]
struct Pmf {
    lo: u64,
    probs: Vec<f64>,
}

impl Pmf {
    fn point(z: u64) -> Self {
        Self {
            lo: z,
            probs: vec![1.0],
        }
    }

    fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(move |(i, &p)| (self.lo + i as u64, p))
    }

    /// One generation under `powers`; returns the pushed-forward pmf and the lost mass.
    fn step(&self, powers: &mut ConvolutionPowers<'_>) -> (Pmf, f64) {
        let mut out: BTreeMap<u64, f64> = BTreeMap::new();
        let mut lost = 0.0;
        for (z, p) in self.iter() {
            let pw = powers.get(z);
            lost += p * pw.lost;
            for (j, &q) in pw.probs.iter().enumerate() {
                if q > 0.0 {
                    *out.entry(pw.offset + j as u64).or_insert(0.0) += p * q;
                }
            }
        }
        let pmf = match (out.first_key_value(), out.last_key_value()) {
            (Some((&lo, _)), Some((&hi, _))) => {
                let mut probs = vec![0.0; (hi - lo + 1) as usize];
                for (z, p) in out {
                    probs[(z - lo) as usize] = p;
                }
                Pmf { lo, probs }
            }
            _ => Pmf {
                lo: 0,
                probs: Vec::new(),
            },
        };
        (pmf, lost)
    }
}

/// Exact joint law of `(Z_{n0}, Z_{n0+n})`, aggregated over environment sequences.
#[derive(Debug, Clone, Serialize)]
pub struct RatioDistribution {
    pub n0: usize,
    pub n: usize,
    /// `((z0, z), probability)` sorted by `(z0, z)`.
    atoms: Vec<((u64, u64), f64)>,
    pub truncated_mass: f64,
    pub sequences: u64,
    /// Largest `|1 - (retained + truncated)|` over all environment sequences.
    pub max_sequence_mass_defect: f64,
}

struct Enumerator<'a> {
    env: &'a EnvironmentModel,
    powers: Vec<ConvolutionPowers<'a>>,
    n0: usize,
    horizon: usize,
    atoms: BTreeMap<(u64, u64), f64>,
    truncated: CompensatedSum,
    sequences: u64,
    max_defect: f64,
}

/// Per-sequence state: conditional pmfs of `Z_k` given `Z_{n0} = z0` (a single
/// entry keyed by `z0 = 0` before generation `n0` is reached).
#[derive(Clone)]
struct Branch {
    parts: Vec<(u64, f64, Pmf)>,
    weight: f64,
    lost: f64,
}

impl<'a> Enumerator<'a> {
    fn visit(&mut self, depth: usize, branch: Branch) {
        let branch = if depth == self.n0 {
            let mut parts = Vec::new();
            for (_, w0, pmf) in &branch.parts {
                for (z0, p) in pmf.iter() {
                    parts.push((z0, w0 * p, Pmf::point(z0)));
                }
            }
            Branch { parts, ..branch }
        } else {
            branch
        };
        if depth == self.horizon {
            let mut retained = CompensatedSum::default();
            for (z0, w0, pmf) in &branch.parts {
                for (z, p) in pmf.iter() {
                    let mass = w0 * p;
                    retained.add(mass);
                    *self.atoms.entry((*z0, z)).or_insert(0.0) += branch.weight * mass;
                }
            }
            self.truncated.add(branch.weight * branch.lost);
            self.sequences += 1;
            let defect = (1.0 - (retained.value() + branch.lost)).abs();
            self.max_defect = self.max_defect.max(defect);
            return;
        }
        for state in 0..self.env.states().len() {
            let mut lost = branch.lost;
            let parts = branch
                .parts
                .iter()
                .map(|(z0, w0, pmf)| {
                    let (next, l) = pmf.step(&mut self.powers[state]);
                    lost += w0 * l;
                    (*z0, *w0, next)
                })
                .collect();
            let child = Branch {
                parts,
                weight: branch.weight * self.env.weights()[state],
                lost,
            };
            self.visit(depth + 1, child);
        }
    }
}

impl RatioDistribution {
    pub fn enumerate(
        env: &EnvironmentModel,
        n0: usize,
        n: usize,
        limits: EnumerationLimits,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if limits.z_cap == 0 {
            return Err(Error::InvalidParameter("z_cap must be at least 1".into()));
        }
        let horizon = n0 + n;
        let count = (env.states().len() as u128)
            .checked_pow(horizon as u32)
            .unwrap_or(u128::MAX);
        if count > limits.max_sequences as u128 {
            return Err(Error::InfeasibleEnumeration {
                sequences: count,
                limit: limits.max_sequences,
            });
        }
        let mut e = Enumerator {
            env,
            powers: env
                .states()
                .iter()
                .map(|law| ConvolutionPowers::new(law, limits.z_cap))
                .collect(),
            n0,
            horizon,
            atoms: BTreeMap::new(),
            truncated: CompensatedSum::default(),
            sequences: 0,
            max_defect: 0.0,
        };
        e.visit(
            0,
            Branch {
                parts: vec![(0, 1.0, Pmf::point(1))],
                weight: 1.0,
                lost: 0.0,
            },
        );
        Ok(Self {
            n0,
            n,
            atoms: e.atoms.into_iter().collect(),
            truncated_mass: e.truncated.value(),
            sequences: e.sequences,
            max_sequence_mass_defect: e.max_defect,
        })
    }

    pub fn atoms(&self) -> &[((u64, u64), f64)] {
        &self.atoms
    }

    /// Retained (non-truncated) probability mass.
    pub fn total_mass(&self) -> f64 {
        self.atoms
            .iter()
            .map(|(_, p)| *p)
            .collect::<CompensatedSum>()
            .value()
    }

    pub fn tail(&self, x: f64, scale: Scale, standardizer: &Standardizer) -> ExactTail {
        let prob = self
            .atoms
            .iter()
            .filter(|((z0, z), _)| {
                let ln_ratio = ln_population(*z) - ln_population(*z0);
                standardizer.statistic(ln_ratio, self.n, scale) >= x
            })
            .map(|(_, p)| *p)
            .collect::<CompensatedSum>()
            .value();
        ExactTail {
            prob,
            truncated_mass: self.truncated_mass,
        }
    }
}

/// `P(Z_{n0,n} >= x)` on the standardized scale, with the environment's exact `mu`, `sigma`.
pub fn exact_tail(
    env: &EnvironmentModel,
    n0: usize,
    n: usize,
    x: f64,
    z_cap: u64,
) -> Result<ExactTail> {
    let limits = EnumerationLimits {
        z_cap,
        ..EnumerationLimits::default()
    };
    let dist = RatioDistribution::enumerate(env, n0, n, limits)?;
    Ok(dist.tail(x, Scale::Standardized, &Standardizer::from_env(env)))
}
