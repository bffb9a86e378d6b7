//! Measurement position setups.
//!
//! The deterministic setups enumerate their position sets in canonical
//! lexicographic order rather than a serpentine traversal. Every consumer
//! here (Gram matrix, OMP, metrics) is invariant to row order.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::Position;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetupKind {
    UpaShape,
    EdgeOfRegion,
    CrossShape,
    RandomDistribution,
    RandomWalk,
    Custom,
}

impl SetupKind {
    pub fn name(&self) -> &'static str {
        match self {
            SetupKind::UpaShape => "upa",
            SetupKind::EdgeOfRegion => "edge",
            SetupKind::CrossShape => "cross",
            SetupKind::RandomDistribution => "random",
            SetupKind::RandomWalk => "walk",
            SetupKind::Custom => "custom",
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, SetupKind::RandomDistribution | SetupKind::RandomWalk)
    }
}

impl fmt::Display for SetupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SetupKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "upa" => SetupKind::UpaShape,
            "edge" => SetupKind::EdgeOfRegion,
            "cross" => SetupKind::CrossShape,
            "random" => SetupKind::RandomDistribution,
            "walk" => SetupKind::RandomWalk,
            "custom" => SetupKind::Custom,
            other => return invalid(format!("unknown setup '{other}'")),
        })
    }
}

/// Provenance of a plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanParams {
    pub region: f64,
    pub spacing: Option<f64>,
    pub step: Option<f64>,
    pub seed: Option<u64>,
}

/// Ordered (Tx, Rx) measurement positions.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPlan {
    pairs: Vec<(Position, Position)>,
    setup: SetupKind,
    params: PlanParams,
}

#[derive(Serialize, Deserialize)]
struct PlanDocument {
    setup: SetupKind,
    region: f64,
    spacing: Option<f64>,
    step: Option<f64>,
    seed: Option<u64>,
    pairs: Vec<[f64; 4]>,
}

impl MeasurementPlan {
    fn build(pairs: Vec<(Position, Position)>, setup: SetupKind, params: PlanParams) -> Result<Self> {
        if pairs.is_empty() {
            return invalid("a measurement plan needs at least one pair");
        }
        if let Some((t, r)) = pairs.iter().find(|(t, r)| !(t.in_region(params.region) && r.in_region(params.region))) {
            return invalid(format!(
                "position pair ({}, {}) / ({}, {}) outside the {}x{} region",
                t.x, t.y, r.x, r.y, params.region, params.region
            ));
        }
        Ok(Self { pairs, setup, params })
    }

    /// A user-supplied plan.
    pub fn custom(pairs: Vec<(Position, Position)>, region: f64) -> Result<Self> {
        check_region(region)?;
        Self::build(pairs, SetupKind::Custom, PlanParams { region, spacing: None, step: None, seed: None })
    }

    pub fn pairs(&self) -> &[(Position, Position)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn setup(&self) -> SetupKind {
        self.setup
    }

    pub fn params(&self) -> &PlanParams {
        &self.params
    }

    pub fn region(&self) -> f64 {
        self.params.region
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.params.seed = Some(seed);
        self
    }

    /// Same plan with rows reordered by `order` (a permutation of `0..M`).
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if order.len() != self.len() || order.iter().any(|&i| i >= self.len() || std::mem::replace(&mut seen[i], true))
        {
            return invalid("order is not a permutation of the plan rows");
        }
        Ok(Self { pairs: order.iter().map(|&i| self.pairs[i]).collect(), ..self.clone() })
    }

    /// Total Tx plus Rx path length when visiting pairs in order.
    pub fn travel_distance(&self) -> f64 {
        self.pairs.windows(2).map(|w| w[0].0.distance(&w[1].0) + w[0].1.distance(&w[1].1)).sum()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "m,tx_x,tx_y,rx_x,rx_y")?;
        for (m, (t, r)) in self.pairs.iter().enumerate() {
            writeln!(w, "{},{:?},{:?},{:?},{:?}", m + 1, t.x, t.y, r.x, r.y)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = PlanDocument {
            setup: self.setup,
            region: self.params.region,
            spacing: self.params.spacing,
            step: self.params.step,
            seed: self.params.seed,
            pairs: self.pairs.iter().map(|(t, r)| [t.x, t.y, r.x, r.y]).collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: PlanDocument = serde_json::from_str(s)?;
        check_region(doc.region)?;
        let pairs = doc.pairs.iter().map(|p| (Position::new(p[0], p[1]), Position::new(p[2], p[3]))).collect();
        Self::build(
            pairs,
            doc.setup,
            PlanParams { region: doc.region, spacing: doc.spacing, step: doc.step, seed: doc.seed },
        )
    }
}

fn check_region(region: f64) -> Result<()> {
    if !(region > 0.0 && region.is_finite()) {
        return invalid(format!("region size must be positive, got {region}"));
    }
    Ok(())
}

/// `span / spacing` when it is an integer (within 1e-9).
fn integral_ratio(span: f64, spacing: f64, what: &str) -> Result<usize> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return invalid(format!("spacing must be positive, got {spacing}"));
    }
    let q = span / spacing;
    let k = q.round();
    if (q - k).abs() > 1e-9 || k < 1.0 {
        return invalid(format!("{what} {span} is not an integer multiple of spacing {spacing}"));
    }
    Ok(k as usize)
}

/// `k + 1` lattice points `-R/2 + i R / k`, endpoints exact.
fn axis_lattice(region: f64, k: usize) -> Vec<f64> {
    let half = region / 2.0;
    (0..=k).map(|i| if i == k { half } else { -half + region * i as f64 / k as f64 }).collect()
}

fn cartesian(set: &[Position]) -> Vec<(Position, Position)> {
    set.iter().flat_map(|&t| set.iter().map(move |&r| (t, r))).collect()
}

/// Per-region position set of the UPA-shape setup.
pub fn upa_positions(region: f64, spacing: f64) -> Result<Vec<Position>> {
    check_region(region)?;
    let k = integral_ratio(region, spacing, "region")?;
    let axis = axis_lattice(region, k);
    Ok(axis.iter().flat_map(|&x| axis.iter().map(move |&y| Position::new(x, y))).collect())
}

/// Per-region position set of the edge-of-region setup: `4R / spacing`
/// points spaced along the boundary, starting at the lower-left corner.
pub fn edge_positions(region: f64, spacing: f64) -> Result<Vec<Position>> {
    check_region(region)?;
    let count = integral_ratio(4.0 * region, spacing, "perimeter")?;
    let half = region / 2.0;
    let perimeter = 4.0 * region;
    let out = (0..count)
        .map(|i| {
            let arc = perimeter * i as f64 / count as f64;
            let side = ((arc + 1e-9) / region).floor().min(3.0);
            let off = (arc - side * region).clamp(0.0, region);
            match side as u8 {
                0 => Position::new(-half + off, -half),
                1 => Position::new(half, -half + off),
                2 => Position::new(half - off, half),
                _ => Position::new(-half, half - off),
            }
        })
        .collect();
    Ok(out)
}

/// Per-region position set of the cross-shape setup: the axis lattice laid
/// along both coordinate axes, with the origin kept once if it occurs.
pub fn cross_positions(region: f64, spacing: f64) -> Result<Vec<Position>> {
    check_region(region)?;
    let k = integral_ratio(region, spacing, "region")?;
    let axis: Vec<f64> = axis_lattice(region, k).into_iter().map(|w| if w.abs() < 1e-12 { 0.0 } else { w }).collect();
    let mut out: Vec<Position> = axis.iter().map(|&w| Position::new(w, 0.0)).collect();
    out.extend(axis.iter().filter(|&&w| w != 0.0).map(|&w| Position::new(0.0, w)));
    Ok(out)
}

pub fn gen_upa(region: f64, spacing: f64) -> Result<MeasurementPlan> {
    let set = upa_positions(region, spacing)?;
    MeasurementPlan::build(cartesian(&set), SetupKind::UpaShape, deterministic_params(region, spacing))
}

pub fn gen_edge(region: f64, spacing: f64) -> Result<MeasurementPlan> {
    let set = edge_positions(region, spacing)?;
    MeasurementPlan::build(cartesian(&set), SetupKind::EdgeOfRegion, deterministic_params(region, spacing))
}

pub fn gen_cross(region: f64, spacing: f64) -> Result<MeasurementPlan> {
    let set = cross_positions(region, spacing)?;
    MeasurementPlan::build(cartesian(&set), SetupKind::CrossShape, deterministic_params(region, spacing))
}

fn deterministic_params(region: f64, spacing: f64) -> PlanParams {
    PlanParams { region, spacing: Some(spacing), step: None, seed: None }
}

/// All four coordinates of every pair i.i.d. uniform over the region.
pub fn gen_random<R: Rng + ?Sized>(region: f64, m: usize, rng: &mut R) -> Result<MeasurementPlan> {
    check_region(region)?;
    if m < 1 {
        return invalid("number of measurements must be >= 1");
    }
    let half = region / 2.0;
    let mut draw = || rng.random_range(-half..=half);
    let pairs = (0..m)
        .map(|_| {
            let t = Position::new(draw(), draw());
            let r = Position::new(draw(), draw());
            (t, r)
        })
        .collect();
    MeasurementPlan::build(
        pairs,
        SetupKind::RandomDistribution,
        PlanParams { region, spacing: None, step: None, seed: None },
    )
}

/// Mirrors a coordinate back into `[-half, half]`.
fn bounce(mut v: f64, half: f64) -> f64 {
    loop {
        if v > half {
            v = 2.0 * half - v;
        } else if v < -half {
            v = -2.0 * half - v;
        } else {
            return v;
        }
    }
}

fn walk_step<R: Rng + ?Sized>(prev: Position, step: f64, half: f64, rng: &mut R) -> Position {
    let alpha = rng.random_range(0.0..2.0 * PI);
    Position::new(bounce(prev.x + step * alpha.cos(), half), bounce(prev.y + step * alpha.sin(), half))
}

/// Fixed-length steps in uniformly random directions from the origin;
/// Tx and Rx walk and bounce independently.
pub fn gen_random_walk<R: Rng + ?Sized>(region: f64, m: usize, step: f64, rng: &mut R) -> Result<MeasurementPlan> {
    check_region(region)?;
    if m < 1 {
        return invalid("number of measurements must be >= 1");
    }
    if !(step > 0.0 && step <= region) {
        return invalid(format!("walk step must be in (0, {region}], got {step}"));
    }
    let half = region / 2.0;
    let mut pairs = Vec::with_capacity(m);
    let (mut t, mut r) = (Position::ORIGIN, Position::ORIGIN);
    pairs.push((t, r));
    for _ in 1..m {
        t = walk_step(t, step, half, rng);
        r = walk_step(r, step, half, rng);
        pairs.push((t, r));
    }
    MeasurementPlan::build(
        pairs,
        SetupKind::RandomWalk,
        PlanParams { region, spacing: None, step: Some(step), seed: None },
    )
}

/// Spacing that makes a deterministic setup produce exactly `m` pairs.
pub fn spacing_for_measurements(setup: SetupKind, region: f64, m: usize) -> Result<f64> {
    let root = |m: usize, p: u32| -> Option<usize> {
        let r = (m as f64).powf(1.0 / p as f64).round() as usize;
        (r.pow(p) == m).then_some(r)
    };
    let spacing = match setup {
        SetupKind::UpaShape => match root(m, 4) {
            Some(q) if q >= 2 => region / (q - 1) as f64,
            _ => return invalid(format!("UPA setup needs M = q^4 with q >= 2, got {m}")),
        },
        SetupKind::EdgeOfRegion => match root(m, 2) {
            Some(q) if q >= 4 => 4.0 * region / q as f64,
            _ => return invalid(format!("edge setup needs M = q^2 with q >= 4, got {m}")),
        },
        SetupKind::CrossShape => match root(m, 2) {
            Some(q) if q >= 4 => 2.0 * region / (q - 2) as f64,
            _ => return invalid(format!("cross setup needs M = q^2 with q >= 4, got {m}")),
        },
        other => return invalid(format!("setup '{other}' has no measurement spacing")),
    };
    let produced = match setup {
        SetupKind::UpaShape => upa_positions(region, spacing).map(|s| s.len()),
        SetupKind::EdgeOfRegion => edge_positions(region, spacing).map(|s| s.len()),
        _ => cross_positions(region, spacing).map(|s| s.len()),
    };
    match produced {
        Ok(per_region) if per_region * per_region == m => Ok(spacing),
        Ok(per_region) => {
            invalid(format!("{setup} setup with M = {m} gives spacing {spacing} and {} pairs", per_region * per_region))
        }
        Err(e) => Err(e),
    }
}
