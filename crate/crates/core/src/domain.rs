//! Convex compact sets that expose a linear minimization oracle (LMO).

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::linalg::{dot, norm};

/// A convex compact set described by its kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainDescriptor {
    /// Probability simplex `Δ_n` in `R^n`.
    Simplex(usize),
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Product(Vec<DomainDescriptor>),
    /// Convex hull of finitely many points, all of equal dimension.
    Atoms(Vec<Vec<f64>>),
}

impl DomainDescriptor {
    pub fn simplex(n: usize) -> Self {
        DomainDescriptor::Simplex(n)
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        DomainDescriptor::Ball { center, radius }
    }

    pub fn origin_ball(dim: usize, radius: f64) -> Self {
        DomainDescriptor::Ball { center: vec![0.0; dim], radius }
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainDescriptor::Simplex(n) => *n,
            DomainDescriptor::Ball { center, .. } => center.len(),
            DomainDescriptor::Box { lo, .. } => lo.len(),
            DomainDescriptor::Product(parts) => parts.iter().map(|p| p.dim()).sum(),
            DomainDescriptor::Atoms(atoms) => atoms.first().map_or(0, |a| a.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DomainDescriptor::Simplex(n) => {
                if *n == 0 {
                    return Err(Error::InvalidDomain("empty simplex".into()));
                }
            }
            DomainDescriptor::Ball { center, radius } => {
                check_finite(center, "ball center")?;
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::InvalidDomain(format!("ball radius {radius} must be positive")));
                }
            }
            DomainDescriptor::Box { lo, hi } => {
                check_dim(lo.len(), hi.len())?;
                check_finite(lo, "box bounds")?;
                check_finite(hi, "box bounds")?;
                if lo.iter().zip(hi).any(|(l, h)| l > h) {
                    return Err(Error::InvalidDomain("box has lo > hi".into()));
                }
            }
            DomainDescriptor::Product(parts) => {
                if parts.is_empty() {
                    return Err(Error::InvalidDomain("empty product".into()));
                }
                for p in parts {
                    p.validate()?;
                }
            }
            DomainDescriptor::Atoms(atoms) => {
                let d = atoms
                    .first()
                    .ok_or_else(|| Error::InvalidDomain("no atoms".into()))?
                    .len();
                for a in atoms {
                    check_dim(d, a.len())?;
                    check_finite(a, "atom")?;
                }
            }
        }
        Ok(())
    }

    /// Returns `(argmin, min)` of `<c, w>` over the set.
    ///
    /// Ties go to the lowest vertex index (simplex, atoms), to `lo` for zero
    /// cost coordinates (box), and to the center for `c = 0` (ball).
    pub fn lmo_argmin(&self, c: &[f64]) -> Result<(Vec<f64>, f64)> {
        check_dim(self.dim(), c.len())?;
        check_finite(c, "linear form")?;
        let point = self.argmin_unchecked(c);
        let value = dot(c, &point);
        Ok((point, value))
    }

    fn argmin_unchecked(&self, c: &[f64]) -> Vec<f64> {
        match self {
            DomainDescriptor::Simplex(n) => {
                let mut best = 0;
                for i in 1..*n {
                    if c[i] < c[best] {
                        best = i;
                    }
                }
                let mut e = vec![0.0; *n];
                e[best] = 1.0;
                e
            }
            DomainDescriptor::Ball { center, radius } => {
                let nc = norm(c);
                if nc == 0.0 {
                    center.clone()
                } else {
                    center.iter().zip(c).map(|(x, ci)| x - radius * ci / nc).collect()
                }
            }
            DomainDescriptor::Box { lo, hi } => c
                .iter()
                .enumerate()
                .map(|(i, &ci)| if ci < 0.0 { hi[i] } else { lo[i] })
                .collect(),
            DomainDescriptor::Product(parts) => {
                let mut out = Vec::with_capacity(c.len());
                let mut off = 0;
                for p in parts {
                    let d = p.dim();
                    out.extend(p.argmin_unchecked(&c[off..off + d]));
                    off += d;
                }
                out
            }
            DomainDescriptor::Atoms(atoms) => {
                let mut best = 0;
                let mut best_val = dot(c, &atoms[0]);
                for (i, a) in atoms.iter().enumerate().skip(1) {
                    let v = dot(c, a);
                    if v < best_val {
                        best = i;
                        best_val = v;
                    }
                }
                atoms[best].clone()
            }
        }
    }

    /// Membership test with absolute slack `tol`.
    ///
    /// For [`DomainDescriptor::Atoms`] only the atoms themselves and the
    /// bounding box are checked; exact hull membership is not decided.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            DomainDescriptor::Simplex(_) => {
                x.iter().all(|&v| v >= -tol) && (x.iter().sum::<f64>() - 1.0).abs() <= tol
            }
            DomainDescriptor::Ball { center, radius } => {
                let d: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                d.sqrt() <= radius + tol
            }
            DomainDescriptor::Box { lo, hi } => x
                .iter()
                .enumerate()
                .all(|(i, &v)| v >= lo[i] - tol && v <= hi[i] + tol),
            DomainDescriptor::Product(parts) => {
                let mut off = 0;
                parts.iter().all(|p| {
                    let d = p.dim();
                    let ok = p.contains(&x[off..off + d], tol);
                    off += d;
                    ok
                })
            }
            DomainDescriptor::Atoms(atoms) => {
                if atoms.iter().any(|a| a.iter().zip(x).all(|(p, q)| (p - q).abs() <= tol)) {
                    return true;
                }
                (0..x.len()).all(|i| {
                    let lo = atoms.iter().map(|a| a[i]).fold(f64::INFINITY, f64::min);
                    let hi = atoms.iter().map(|a| a[i]).fold(f64::NEG_INFINITY, f64::max);
                    x[i] >= lo - tol && x[i] <= hi + tol
                })
            }
        }
    }

    /// Radius of the smallest origin-centered ball known to contain the set
    /// (exact for simplex, ball, box and atoms; triangle bound for products).
    pub fn enclosing_radius(&self) -> f64 {
        match self {
            DomainDescriptor::Simplex(_) => 1.0,
            DomainDescriptor::Ball { center, radius } => norm(center) + radius,
            DomainDescriptor::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| l.abs().max(h.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
            DomainDescriptor::Product(parts) => parts
                .iter()
                .map(|p| p.enclosing_radius().powi(2))
                .sum::<f64>()
                .sqrt(),
            DomainDescriptor::Atoms(atoms) => atoms.iter().map(|a| norm(a)).fold(0.0, f64::max),
        }
    }

    /// Vertex list for polytopes small enough to enumerate (simplices, atoms,
    /// boxes up to 2^16 corners, and products thereof).
    pub fn vertices(&self, limit: usize) -> Option<Vec<Vec<f64>>> {
        match self {
            DomainDescriptor::Simplex(n) => (*n <= limit).then(|| {
                (0..*n)
                    .map(|i| {
                        let mut e = vec![0.0; *n];
                        e[i] = 1.0;
                        e
                    })
                    .collect()
            }),
            DomainDescriptor::Atoms(a) => (a.len() <= limit).then(|| a.clone()),
            DomainDescriptor::Box { lo, hi } => {
                let d = lo.len();
                if d > 16 || (1usize << d) > limit {
                    return None;
                }
                Some(
                    (0..1usize << d)
                        .map(|mask| (0..d).map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] }).collect())
                        .collect(),
                )
            }
            DomainDescriptor::Product(parts) => {
                let mut acc: Vec<Vec<f64>> = vec![Vec::new()];
                for p in parts {
                    let vs = p.vertices(limit)?;
                    if acc.len().saturating_mul(vs.len()) > limit {
                        return None;
                    }
                    acc = acc
                        .iter()
                        .flat_map(|a| {
                            vs.iter().map(move |v| {
                                let mut x = a.clone();
                                x.extend_from_slice(v);
                                x
                            })
                        })
                        .collect();
                }
                Some(acc)
            }
            DomainDescriptor::Ball { .. } => None,
        }
    }
}

/// A product of Euclidean balls, the only domain shape the small primal
/// solvers work on. Block `b` occupies coordinates `offset..offset + len`.
#[derive(Clone, Debug, PartialEq)]
pub struct BallProduct {
    blocks: Vec<BallBlock>,
    dim: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BallBlock {
    pub offset: usize,
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BallBlock {
    pub fn len(&self) -> usize {
        self.center.len()
    }

    pub fn is_empty(&self) -> bool {
        self.center.is_empty()
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

impl BallProduct {
    pub fn new(balls: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if balls.is_empty() {
            return Err(Error::InvalidDomain("empty ball product".into()));
        }
        let mut blocks = Vec::with_capacity(balls.len());
        let mut offset = 0;
        for (center, radius) in balls {
            check_finite(&center, "ball center")?;
            if !(radius > 0.0) || !radius.is_finite() {
                return Err(Error::InvalidDomain(format!("ball radius {radius} must be positive")));
            }
            let len = center.len();
            blocks.push(BallBlock { offset, center, radius });
            offset += len;
        }
        Ok(BallProduct { blocks, dim: offset })
    }

    /// Origin-centered balls with the given block sizes and radii.
    pub fn origin(blocks: &[(usize, f64)]) -> Result<Self> {
        Self::new(blocks.iter().map(|&(len, r)| (vec![0.0; len], r)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[BallBlock] {
        &self.blocks
    }

    /// Radius of the smallest origin-centered ball containing the product.
    pub fn enclosing_radius(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| (norm(&b.center) + b.radius).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.center.iter().copied()).collect()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.blocks.iter().all(|b| block_dist(b, x) <= b.radius + tol)
    }

    /// A cut `g` with `<g, y> < <g, x>` for every `y` in the set, or `None`
    /// when `x` lies inside. Uses the first violated block.
    pub fn separate(&self, x: &[f64]) -> Option<Vec<f64>> {
        let b = self.blocks.iter().find(|b| block_dist(b, x) > b.radius)?;
        let mut g = vec![0.0; self.dim];
        for (i, c) in b.range().zip(&b.center) {
            g[i] = x[i] - c;
        }
        Some(g)
    }

    /// Euclidean projection, blockwise.
    pub fn project(&self, x: &mut [f64]) {
        for b in &self.blocks {
            let d = block_dist(b, x);
            if d > b.radius {
                let s = b.radius / d;
                for (i, c) in b.range().zip(&b.center) {
                    x[i] = c + (x[i] - c) * s;
                }
            }
        }
    }

    pub fn to_descriptor(&self) -> DomainDescriptor {
        let balls: Vec<_> = self
            .blocks
            .iter()
            .map(|b| DomainDescriptor::Ball { center: b.center.clone(), radius: b.radius })
            .collect();
        if balls.len() == 1 {
            balls.into_iter().next().unwrap()
        } else {
            DomainDescriptor::Product(balls)
        }
    }
}

fn block_dist(b: &BallBlock, x: &[f64]) -> f64 {
    b.range()
        .zip(&b.center)
        .map(|(i, c)| (x[i] - c) * (x[i] - c))
        .sum::<f64>()
        .sqrt()
}

impl TryFrom<&DomainDescriptor> for BallProduct {
    type Error = Error;

    fn try_from(d: &DomainDescriptor) -> Result<Self> {
        fn collect(d: &DomainDescriptor, out: &mut Vec<(Vec<f64>, f64)>) -> Result<()> {
            match d {
                DomainDescriptor::Ball { center, radius } => {
                    out.push((center.clone(), *radius));
                    Ok(())
                }
                DomainDescriptor::Product(parts) => parts.iter().try_for_each(|p| collect(p, out)),
                _ => Err(Error::InvalidDomain("expected a ball or a product of balls".into())),
            }
        }
        let mut balls = Vec::new();
        collect(d, &mut balls)?;
        BallProduct::new(balls)
    }
}
