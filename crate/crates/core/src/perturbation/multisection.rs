use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::bundle::{AuxiliaryNorm, BundleSection, SectionClass, SectionSpec, StrongBundleModel};
use crate::error::{Error, Result};
use crate::linalg;

/// Fiber distance below which a branch passes through a bundle element.
pub const BRANCH_TOL: f64 = 1e-9;
/// Window nodes per axis used to compare branches when merging.
pub const MERGE_SAMPLES_PER_AXIS: usize = 5;

#[derive(Clone, Debug)]
pub struct Branch {
    pub section: BundleSection,
    pub weight: BigRational,
}

/// Finitely many sc⁺-sections `sᵢ` with positive rational weights `σᵢ`
/// summing to 1; `Λ(x, e) = Σ_{i: sᵢ(x) = e} σᵢ`.
#[derive(Clone, Debug)]
pub struct Multisection {
    model: Arc<StrongBundleModel>,
    branches: Vec<Branch>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    /// `"p/q"` or an integer.
    pub weight: String,
    pub section: SectionSpec,
}

/// Text form of a multisection built from parametric sections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultisectionSpec {
    pub branches: Vec<BranchSpec>,
}

impl MultisectionSpec {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

pub fn parse_weight(text: &str) -> Result<BigRational> {
    text.trim()
        .parse::<BigRational>()
        .map_err(|e| Error::WeightSum(format!("cannot parse weight {text:?}: {e}")))
}

impl Multisection {
    pub fn new(model: &Arc<StrongBundleModel>, branches: Vec<Branch>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::WeightSum("empty branch list".into()));
        }
        let mut total = BigRational::zero();
        for b in &branches {
            if !Arc::ptr_eq(b.section.model(), model) {
                return Err(Error::ModelMismatch(format!("branch {} lives on another model", b.section.name)));
            }
            if b.section.class != SectionClass::ScPlus {
                return Err(Error::TypeMismatch(format!("branch {} is not an sc⁺-section", b.section.name)));
            }
            if b.weight <= BigRational::zero() {
                return Err(Error::WeightSum(format!("nonpositive weight {}", b.weight)));
            }
            total += &b.weight;
        }
        if !total.is_one() {
            return Err(Error::WeightSum(total.to_string()));
        }
        Ok(Multisection {
            model: Arc::clone(model),
            branches,
        })
    }

    /// The zero section with weight 1.
    pub fn zero(model: &Arc<StrongBundleModel>) -> Self {
        Self::singleton(BundleSection::zero(model)).expect("zero section is sc⁺")
    }

    pub fn singleton(section: BundleSection) -> Result<Self> {
        let model = Arc::clone(section.model());
        Self::new(
            &model,
            vec![Branch {
                section,
                weight: BigRational::one(),
            }],
        )
    }

    pub fn from_spec(model: &Arc<StrongBundleModel>, spec: &MultisectionSpec) -> Result<Self> {
        let branches = spec
            .branches
            .iter()
            .map(|b| {
                Ok(Branch {
                    section: BundleSection::from_spec(model, b.section.clone())?,
                    weight: parse_weight(&b.weight)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(model, branches)
    }

    /// `None` when some branch has no parametric description.
    pub fn to_spec(&self) -> Option<MultisectionSpec> {
        let branches = self
            .branches
            .iter()
            .map(|b| {
                Some(BranchSpec {
                    weight: b.weight.to_string(),
                    section: b.section.spec()?.clone(),
                })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(MultisectionSpec { branches })
    }

    pub fn model(&self) -> &Arc<StrongBundleModel> {
        &self.model
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    /// `sᵢ(x)` for every branch.
    pub fn values(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.model.require_charted(x)?;
        self.branches.iter().map(|b| b.section.eval(x)).collect()
    }

    /// `Λ(e)` for `e` over `x`; 0 when no branch passes through `e`.
    pub fn eval(&self, x: &[f64], e: &[f64]) -> Result<BigRational> {
        let mut total = BigRational::zero();
        for (b, v) in self.branches.iter().zip(self.values(x)?) {
            if linalg::euclidean_norm(&linalg::sub(&v, e)) <= BRANCH_TOL {
                total += &b.weight;
            }
        }
        Ok(total)
    }

    /// `Λ1 ⊕ Λ2` compared on the model's merge samples.
    pub fn sum(&self, other: &Multisection) -> Result<Multisection> {
        let samples = self.model.sample_points(MERGE_SAMPLES_PER_AXIS);
        self.sum_on(other, &samples)
    }

    /// All pairwise sums `sᵢ + s'ⱼ` with weights `σᵢσ'ⱼ`, merging branches
    /// that agree within [`BRANCH_TOL`] on `samples`.
    pub fn sum_on(&self, other: &Multisection, samples: &[Vec<f64>]) -> Result<Multisection> {
        if !Arc::ptr_eq(&self.model, &other.model) {
            return Err(Error::ModelMismatch(format!("{} vs {}", self.model.name, other.model.name)));
        }
        let mut merged: Vec<(Branch, Vec<Vec<f64>>)> = Vec::new();
        for a in &self.branches {
            for b in &other.branches {
                let section = a.section.combine(&b.section, 1.0)?;
                let weight = &a.weight * &b.weight;
                let profile = samples.iter().map(|x| section.eval(x)).collect::<Result<Vec<_>>>()?;
                let same = merged.iter_mut().find(|(_, p)| {
                    p.iter()
                        .zip(&profile)
                        .all(|(u, v)| linalg::euclidean_norm(&linalg::sub(u, v)) <= BRANCH_TOL)
                });
                match same {
                    Some((branch, _)) => branch.weight += weight,
                    None => merged.push((Branch { section, weight }, profile)),
                }
            }
        }
        Multisection::new(&self.model, merged.into_iter().map(|(b, _)| b).collect())
    }

    /// `max_i N(sᵢ(x))`.
    pub fn norm(&self, n: &AuxiliaryNorm, x: &[f64]) -> Result<f64> {
        self.values(x)?
            .iter()
            .try_fold(0.0f64, |acc, v| Ok(acc.max(n.eval(&self.model, v)?)))
    }

    /// Chart balls containing every branch support, `None` if some branch
    /// has no parametric description or unbounded support.
    pub fn support(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        let mut out = Vec::new();
        for b in &self.branches {
            out.extend(b.section.spec()?.support()?);
        }
        Some(out)
    }

    /// Pointwise convex combination `(1 - t) self + t other` over all branch
    /// pairs, weights `σᵢσ'ⱼ`.
    pub fn interpolate(&self, other: &Multisection, t: f64) -> Result<Multisection> {
        if !Arc::ptr_eq(&self.model, &other.model) {
            return Err(Error::ModelMismatch(format!("{} vs {}", self.model.name, other.model.name)));
        }
        let mut branches = Vec::new();
        for a in &self.branches {
            for b in &other.branches {
                let section = scaled(&a.section, 1.0 - t)?.combine(&scaled(&b.section, t)?, 1.0)?;
                branches.push(Branch {
                    section,
                    weight: &a.weight * &b.weight,
                });
            }
        }
        Multisection::new(&self.model, branches)
    }
}

/// `c · s` for a parametric section.
fn scaled(s: &BundleSection, c: f64) -> Result<BundleSection> {
    fn go(spec: &SectionSpec, c: f64) -> SectionSpec {
        match spec {
            SectionSpec::Zero => SectionSpec::Zero,
            SectionSpec::Constant { value } => SectionSpec::Constant {
                value: linalg::scale(c, value),
            },
            SectionSpec::Bump { center, radius, value } => SectionSpec::Bump {
                center: center.clone(),
                radius: *radius,
                value: linalg::scale(c, value),
            },
            SectionSpec::Sum { terms } => SectionSpec::Sum {
                terms: terms.iter().map(|t| go(t, c)).collect(),
            },
        }
    }
    let spec = s
        .spec()
        .ok_or_else(|| Error::TypeMismatch(format!("branch {} has no parametric form", s.name)))?;
    BundleSection::from_spec(s.model(), go(spec, c))
}
