//! Carleman weight families `phi_j(x, t) = theta(t) psi_j(x)` with per-edge
//! quadratics `psi_j = a_j x^2 + b_j x + c_j`.
//!
//! Coefficients are kept as exact rationals so the vertex matching identities
//! can be checked without tolerances; evaluation goes through cached `f64`s.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::TreeGraph;

pub fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgePoly {
    pub a: BigRational,
    pub b: BigRational,
    pub c: BigRational,
}

impl EdgePoly {
    pub fn new(a: BigRational, b: BigRational, c: BigRational) -> Self {
        Self { a, b, c }
    }

    pub fn from_ints(a: (i64, i64), b: (i64, i64), c: (i64, i64)) -> Self {
        Self::new(ratio(a.0, a.1), ratio(b.0, b.1), ratio(c.0, c.1))
    }

    pub fn value(&self, x: &BigRational) -> BigRational {
        &self.a * x * x + &self.b * x + &self.c
    }

    pub fn slope(&self, x: &BigRational) -> BigRational {
        BigRational::from_integer(2.into()) * &self.a * x + &self.b
    }

    pub fn curvature(&self) -> BigRational {
        BigRational::from_integer(2.into()) * &self.a
    }

    pub fn to_f64(&self) -> [f64; 3] {
        [to_f64(&self.a), to_f64(&self.b), to_f64(&self.c)]
    }
}

fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// `theta(t) = 1 / ((T - t)(T + t))` on `(-T, T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeFactor {
    pub horizon: f64,
}

impl TimeFactor {
    pub fn theta(&self, t: f64) -> f64 {
        1.0 / ((self.horizon - t) * (self.horizon + t))
    }

    pub fn theta_dt(&self, t: f64) -> f64 {
        let d = (self.horizon - t) * (self.horizon + t);
        2.0 * t / (d * d)
    }

    /// Time at which `theta` reaches the given value (positive branch).
    pub fn time_at(&self, theta: f64) -> f64 {
        (self.horizon * self.horizon - 1.0 / theta).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DerivOrder {
    pub dx: u8,
    pub dt: u8,
}

impl DerivOrder {
    pub const VALUE: DerivOrder = DerivOrder { dx: 0, dt: 0 };

    pub fn new(dx: u8, dt: u8) -> Self {
        Self { dx, dt }
    }
}

#[derive(Debug, Clone)]
pub struct WeightFamily {
    tree: TreeGraph,
    horizon: f64,
    polys: Vec<EdgePoly>,
    coeffs: Vec<[f64; 3]>,
    coords: Vec<BigRational>,
}

/// Exact vertex coordinates from the (binary exact) edge lengths.
fn exact_coordinates(tree: &TreeGraph) -> Vec<BigRational> {
    let mut coords = vec![BigRational::zero(); tree.n_vertices()];
    for &j in tree.root_to_leaf_order() {
        let e = tree.edge(j);
        coords[e.terminal] = &coords[e.initial] + rational(e.length);
    }
    coords
}

impl WeightFamily {
    /// Wraps coefficients without checking the vertex conditions; see
    /// [`validate_conditions`].
    pub fn from_polys(tree: &TreeGraph, horizon: f64, polys: Vec<EdgePoly>) -> Result<Self> {
        if polys.len() != tree.n_edges() {
            return Err(Error::Shape(format!("{} polynomials for {} edges", polys.len(), tree.n_edges())));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        let coeffs = polys.iter().map(EdgePoly::to_f64).collect();
        Ok(Self { tree: tree.clone(), horizon, polys, coeffs, coords: exact_coordinates(tree) })
    }

    pub fn tree(&self) -> &TreeGraph {
        &self.tree
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn time_factor(&self) -> TimeFactor {
        TimeFactor { horizon: self.horizon }
    }

    pub fn poly(&self, edge: usize) -> &EdgePoly {
        &self.polys[edge - 1]
    }

    pub fn polys(&self) -> &[EdgePoly] {
        &self.polys
    }

    pub fn exact_coordinate(&self, vertex: usize) -> &BigRational {
        &self.coords[vertex]
    }

    /// `psi_j^{(dx)}(x)` in floating point, no range checks.
    #[inline]
    pub fn psi(&self, edge: usize, x: f64, dx: u8) -> f64 {
        let [a, b, c] = self.coeffs[edge - 1];
        match dx {
            0 => (a * x + b) * x + c,
            1 => 2.0 * a * x + b,
            2 => 2.0 * a,
            _ => 0.0,
        }
    }

    /// Largest value of `psi` over the closed edges (attained at an endpoint).
    pub fn max_psi(&self) -> f64 {
        self.tree
            .edges()
            .iter()
            .flat_map(|e| {
                let (lo, hi) = self.tree.interval(e.id);
                [self.psi(e.id, lo, 0), self.psi(e.id, hi, 0)]
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn exact_max_psi(&self) -> BigRational {
        self.tree
            .edges()
            .iter()
            .flat_map(|e| {
                let p = &self.polys[e.id - 1];
                [p.value(&self.coords[e.initial]), p.value(&self.coords[e.terminal])]
            })
            .max()
            .expect("at least one edge")
    }

    /// Sum over `S_T(k)` minus sum over `S_I(k)` of `eta_j psi_j'(x_k)^3`.
    pub fn cubic_flux_imbalance(&self, k: usize) -> BigRational {
        let eta = self.tree.eta_multipliers();
        let x = &self.coords[k];
        let term = |j: usize| {
            let s = self.polys[j - 1].slope(x);
            rational(eta[j - 1]) * &s * &s * &s
        };
        let incoming: BigRational = self.tree.ending_at(k).iter().map(|&j| term(j)).sum();
        let outgoing: BigRational = self.tree.starting_at(k).iter().map(|&j| term(j)).sum();
        incoming - outgoing
    }

    pub fn to_document(&self) -> WeightDocument {
        WeightDocument {
            horizon: self.horizon,
            polys: self
                .polys
                .iter()
                .enumerate()
                .map(|(i, p)| PolyEntry {
                    edge: i + 1,
                    a: RationalValue::from_exact(&p.a),
                    b: RationalValue::from_exact(&p.b),
                    c: RationalValue::from_exact(&p.c),
                })
                .collect(),
        }
    }
}

/// The worked-example root polynomial `x^2 + 2x - 7`.
pub fn default_root_poly() -> EdgePoly {
    EdgePoly::from_ints((1, 1), (2, 1), (-7, 1))
}

pub const DEFAULT_MARGIN: i64 = 1;

/// Propagates the root polynomial through every inner vertex by solving the
/// value/slope/curvature matching system, then shifts all constants by a
/// common amount so that `max psi <= -margin`.
pub fn construct_weights(
    tree: &TreeGraph,
    root_poly: &EdgePoly,
    margin: &BigRational,
    horizon: f64,
) -> Result<WeightFamily> {
    if !root_poly.a.is_positive() {
        return Err(Error::RootCurvature { a: to_f64(&root_poly.a) });
    }
    if !root_poly.b.is_positive() {
        return Err(Error::RootDerivative { b: to_f64(&root_poly.b) });
    }
    if margin.is_negative() {
        return Err(Error::InvalidParameter("margin must be nonnegative".into()));
    }
    let coords = exact_coordinates(tree);
    let mut polys: Vec<Option<EdgePoly>> = vec![None; tree.n_edges()];
    for &j in tree.root_to_leaf_order() {
        let e = tree.edge(j);
        let poly = match tree.vertex(e.initial).parent_edge {
            None => root_poly.clone(),
            Some(parent) => {
                let up = polys[parent - 1].as_ref().expect("parents come first");
                propagate(up, &coords[e.initial], tree.starting_at(e.initial).len())
            }
        };
        polys[j - 1] = Some(poly);
    }
    let mut polys: Vec<EdgePoly> = polys.into_iter().map(|p| p.expect("all edges")).collect();

    let family = WeightFamily::from_polys(tree, horizon, polys.clone())?;
    let max = family.exact_max_psi();
    let target = -margin.clone();
    if max > target {
        let shift = max - target;
        for p in &mut polys {
            p.c -= &shift;
        }
    }
    WeightFamily::from_polys(tree, horizon, polys)
}

/// Child coefficients at a vertex at coordinate `x` with `fan` outgoing edges.
fn propagate(up: &EdgePoly, x: &BigRational, fan: usize) -> EdgePoly {
    let n = BigRational::from_integer(BigInt::from(fan));
    let n1 = &n - BigRational::one();
    let n2 = &n * &n;
    let two = BigRational::from_integer(2.into());
    let a = &up.a / &n2;
    let b = &two * &n1 * x * &up.a / &n2 + &up.b / &n;
    let c = &n1 * &n1 * x * x * &up.a / &n2 + &n1 * x * &up.b / &n + &up.c;
    EdgePoly { a, b, c }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    ValueContinuity,
    SlopeRatio,
    CurvatureRatio,
    Curvature,
    Slope,
    Negativity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ConditionKind,
    pub vertex: Option<usize>,
    pub edge: usize,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the vertex matching identities exactly and the sign conditions on
/// every closed edge. Violations are collected, never thrown.
pub fn validate_conditions(family: &WeightFamily) -> ValidationReport {
    let tree = &family.tree;
    let mut report = ValidationReport::default();
    let mut check = |ok: bool, kind, vertex, edge, detail: String| {
        report.checks += 1;
        if !ok {
            report.violations.push(Violation { kind, vertex, edge, detail });
        }
    };
    for &k in tree.inner_vertices() {
        let x = &family.coords[k];
        let fan = BigRational::from_integer(BigInt::from(tree.starting_at(k).len()));
        for &j1 in tree.ending_at(k) {
            let p1 = family.poly(j1);
            for &j2 in tree.starting_at(k) {
                let p2 = family.poly(j2);
                let (v1, v2) = (p1.value(x), p2.value(x));
                check(v1 == v2, ConditionKind::ValueContinuity, Some(k), j2, format!("{v1} != {v2}"));
                let (s1, s2) = (p1.slope(x), &fan * p2.slope(x));
                check(s1 == s2, ConditionKind::SlopeRatio, Some(k), j2, format!("{s1} != {s2}"));
                let (c1, c2) = (p1.curvature(), &fan * &fan * p2.curvature());
                check(c1 == c2, ConditionKind::CurvatureRatio, Some(k), j2, format!("{c1} != {c2}"));
            }
        }
    }
    for e in tree.edges() {
        let p = family.poly(e.id);
        check(p.a.is_positive(), ConditionKind::Curvature, None, e.id, format!("a = {}", p.a));
        let s = p.slope(&family.coords[e.initial]);
        check(s.is_positive(), ConditionKind::Slope, None, e.id, format!("psi'(x_I) = {s}"));
        let v = p.value(&family.coords[e.terminal]);
        check(v.is_negative(), ConditionKind::Negativity, None, e.id, format!("psi(x_T) = {v}"));
    }
    report
}

/// Analytic `d^dx/dx^dx d^dt/dt^dt phi_j(x, t)` for `dx <= 2`, `dt <= 1`.
pub fn eval_phi(family: &WeightFamily, edge: usize, x: f64, t: f64, order: DerivOrder) -> Result<f64> {
    if order.dx > 2 || order.dt > 1 {
        return Err(Error::UnsupportedOrder { dx: order.dx, dt: order.dt });
    }
    let horizon = family.horizon;
    if !(t.abs() < horizon) {
        return Err(Error::TimeOutOfRange { t, horizon });
    }
    let (lo, hi) = family.tree.try_edge(edge).map(|e| e.id).map(|id| family.tree.interval(id))?;
    let slack = 1e-12 * hi.abs().max(1.0);
    if x < lo - slack || x > hi + slack {
        return Err(Error::OutsideEdge { edge, x, lo, hi });
    }
    let tf = family.time_factor();
    let time = if order.dt == 0 { tf.theta(t) } else { tf.theta_dt(t) };
    Ok(time * family.psi(edge, x, order.dx))
}

/// `max_x theta(t)^l exp(2 s phi_j(x, t))` over `samples` points per edge.
pub fn vanishing_check(family: &WeightFamily, s: f64, l: u32, t_probe: f64, samples: usize) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("s must be positive, got {s}")));
    }
    if !(t_probe.abs() < family.horizon) {
        return Err(Error::TimeOutOfRange { t: t_probe, horizon: family.horizon });
    }
    let max_psi = family.max_psi();
    if max_psi >= 0.0 {
        return Err(Error::DecayNotGuaranteed { max_psi });
    }
    let theta = family.time_factor().theta(t_probe);
    let samples = samples.max(2);
    let mut best = 0.0f64;
    for e in family.tree.edges() {
        let (lo, hi) = family.tree.interval(e.id);
        for i in 0..samples {
            let x = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
            let log = l as f64 * theta.ln() + 2.0 * s * theta * family.psi(e.id, x, 0);
            best = best.max(log.exp());
        }
    }
    Ok(best)
}

/// A rational coefficient in a weight file: a plain number, `[num, den]`
/// integers, or `["num", "den"]` decimal strings for large values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalValue {
    Pair([i64; 2]),
    BigPair([String; 2]),
    Number(f64),
}

impl RationalValue {
    pub fn from_exact(q: &BigRational) -> Self {
        match (q.numer().to_i64(), q.denom().to_i64()) {
            (Some(n), Some(d)) => RationalValue::Pair([n, d]),
            _ => RationalValue::BigPair([q.numer().to_string(), q.denom().to_string()]),
        }
    }

    pub fn to_exact(&self) -> Result<BigRational> {
        match self {
            RationalValue::Pair([n, d]) => {
                if *d == 0 {
                    return Err(Error::Parse("zero denominator".into()));
                }
                Ok(ratio(*n, *d))
            }
            RationalValue::BigPair([n, d]) => {
                let n: BigInt = n.parse().map_err(|_| Error::Parse(format!("bad integer {n}")))?;
                let d: BigInt = d.parse().map_err(|_| Error::Parse(format!("bad integer {d}")))?;
                if d.is_zero() {
                    return Err(Error::Parse("zero denominator".into()));
                }
                Ok(BigRational::new(n, d))
            }
            RationalValue::Number(x) => {
                BigRational::from_float(*x).ok_or_else(|| Error::Parse(format!("non-finite coefficient {x}")))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyEntry {
    pub edge: usize,
    pub a: RationalValue,
    pub b: RationalValue,
    pub c: RationalValue,
}

/// Weight family file: `{ "T": .., "polys": [{"edge", "a", "b", "c"}] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightDocument {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub polys: Vec<PolyEntry>,
}

impl WeightDocument {
    pub fn into_family(self, tree: &TreeGraph) -> Result<WeightFamily> {
        let mut polys: Vec<Option<EdgePoly>> = vec![None; tree.n_edges()];
        for entry in self.polys {
            tree.try_edge(entry.edge)?;
            polys[entry.edge - 1] = Some(EdgePoly::new(entry.a.to_exact()?, entry.b.to_exact()?, entry.c.to_exact()?));
        }
        let polys = polys
            .into_iter()
            .enumerate()
            .map(|(i, p)| p.ok_or_else(|| Error::Parse(format!("missing polynomial for edge {}", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        WeightFamily::from_polys(tree, self.horizon, polys)
    }
}
