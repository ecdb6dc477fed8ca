//! Sample grids and per-point geometry.
//!
//! Grid points are cell centers, so every axis keeps a half-cell margin from
//! the chart boundary (where parametrizations such as spherical coordinates
//! degenerate). Each point is evaluated independently; results are stored in
//! grid order so aggregation does not depend on scheduling.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dsl::{eval_taylor, DslError, ImmersionSpec, JetPoint};
use crate::geometry::{build_frame, curvature, position_split, CurvaturePack, GeometryError, GeometryFrame, PositionSplit, TaylorGeometry};

/// Jet order used for grid samples: fourth order gives exact Hessians of the potential.
pub const SAMPLE_ORDER: usize = 4;

/// Random chart directions drawn per point for bilinear-form checks.
pub const DIRECTIONS_PER_POINT: usize = 4;

/// Cell-centered sample coordinates, first axis slowest.
pub fn grid_points(spec: &ImmersionSpec, counts: &[usize]) -> Vec<Vec<f64>> {
    let total: usize = counts.iter().product();
    (0..total)
        .map(|mut idx| {
            let mut u = vec![0.0; counts.len()];
            for axis in (0..counts.len()).rev() {
                let c = counts[axis];
                let i = idx % c;
                idx /= c;
                let iv = spec.domain[axis];
                let h = (iv.hi - iv.lo) / c as f64;
                u[axis] = iv.lo + (i as f64 + 0.5) * h;
            }
            u
        })
        .collect()
}

/// Scalars and tensors derived from exact Taylor fields at a point.
#[derive(Debug, Clone)]
pub struct PointFields {
    pub phi: f64,
    pub dphi: Vec<f64>,
    pub grad_phi: Vec<f64>,
    pub hess_phi: DMatrix<f64>,
    pub eta: f64,
    /// (∇_j x^T)^k stored at (k, j), from differentiating the chart components of x^T.
    pub nabla_xt: DMatrix<f64>,
    pub laplacian_xt: Vec<f64>,
    /// F = |x^T|² / 2 with gradient and Hessian.
    pub half_sq: f64,
    pub grad_half_sq: Vec<f64>,
    pub hess_half_sq: DMatrix<f64>,
    pub mean_curvature_sq: f64,
    pub dmean_curvature_sq: Vec<f64>,
    /// f in x^N = f H and its differential, where H ≠ 0.
    pub ss_factor: Option<(f64, Vec<f64>)>,
}

impl PointFields {
    fn from_taylor(geo: &TaylorGeometry) -> Result<PointFields, GeometryError> {
        let n = geo.n;
        let phi = geo.potential();
        let nabla = geo.covariant_xt();
        let half = geo.half_norm_xt_sq();
        let hh = geo.mean_curvature_sq();
        Ok(PointFields {
            phi: phi.value(),
            dphi: geo.differential(&phi),
            grad_phi: geo.gradient(&phi),
            hess_phi: geo.hessian(&phi)?,
            eta: geo.umbilic_factor_xn().value(),
            nabla_xt: DMatrix::from_fn(n, n, |k, j| nabla[j][k].value()),
            laplacian_xt: geo.laplacian_xt_chart()?,
            half_sq: half.value(),
            grad_half_sq: geo.gradient(&half),
            hess_half_sq: geo.hessian(&half)?,
            mean_curvature_sq: hh.value(),
            dmean_curvature_sq: geo.differential(&hh),
            ss_factor: geo.self_similar_factor().map(|f| (f.value(), geo.differential(&f))),
        })
    }
}

/// Everything computed at one valid grid point.
#[derive(Debug, Clone)]
pub struct Sample {
    pub index: usize,
    pub u: Vec<f64>,
    pub jet: JetPoint,
    pub frame: GeometryFrame,
    pub split: PositionSplit,
    pub curvature: CurvaturePack,
    pub fields: PointFields,
    /// g-unit chart directions drawn from the seeded generator.
    pub directions: Vec<Vec<f64>>,
}

impl Sample {
    pub fn scale(&self) -> f64 {
        self.frame.scale
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExcludedPoint {
    pub index: usize,
    pub u: Vec<f64>,
    pub reason: String,
}

/// A fully evaluated grid.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub spec: ImmersionSpec,
    pub counts: Vec<usize>,
    pub seed: u64,
    pub points: Vec<Vec<f64>>,
    /// One slot per grid point; None for excluded points.
    pub samples: Vec<Option<Sample>>,
    pub excluded: Vec<ExcludedPoint>,
}

fn directions(seed: u64, index: usize, frame: &GeometryFrame) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let n = frame.n;
    let basis: Vec<Vec<f64>> = (0..n).map(|a| frame.onb_chart(a)).collect();
    (0..DIRECTIONS_PER_POINT)
        .map(|_| {
            let mut c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let nrm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm == 0.0 {
                c = vec![0.0; n];
                c[0] = 1.0;
            } else {
                c.iter_mut().for_each(|x| *x /= nrm);
            }
            (0..n).map(|k| (0..n).map(|a| c[a] * basis[a][k]).sum()).collect()
        })
        .collect()
}

fn evaluate_point(spec: &ImmersionSpec, index: usize, u: &[f64], seed: u64) -> Result<Sample, String> {
    let jets = eval_taylor(spec, u, SAMPLE_ORDER).map_err(|e: DslError| e.to_string())?;
    let jet = JetPoint::from_taylor(u, &jets, 3);
    let frame = build_frame(&jet).map_err(|e| e.to_string())?;
    let split = position_split(&jet, &frame);
    let curvature = curvature(&frame);
    let geo = TaylorGeometry::new(jets).map_err(|e| e.to_string())?;
    let fields = PointFields::from_taylor(&geo).map_err(|e| e.to_string())?;
    let directions = directions(seed, index, &frame);
    Ok(Sample {
        index,
        u: u.to_vec(),
        jet,
        frame,
        split,
        curvature,
        fields,
        directions,
    })
}

impl SampleSet {
    /// Evaluates the spec on its own grid, or on `counts` when given.
    pub fn evaluate(spec: &ImmersionSpec, counts: Option<&[usize]>, seed: u64) -> Result<SampleSet, DslError> {
        let counts = counts.map(<[usize]>::to_vec).unwrap_or_else(|| spec.grid.clone());
        if counts.len() != spec.n {
            return Err(DslError::DimensionMismatch(format!(
                "grid override has {} axes, immersion has n={}",
                counts.len(),
                spec.n
            )));
        }
        if let Some(&bad) = counts.iter().find(|&&c| c < 2) {
            return Err(DslError::InvalidSpec(format!("grid counts must be >= 2, got {bad}")));
        }
        let points = grid_points(spec, &counts);
        let results: Vec<Result<Sample, String>> = points
            .par_iter()
            .enumerate()
            .map(|(i, u)| evaluate_point(spec, i, u, seed))
            .collect();
        let mut samples = Vec::with_capacity(points.len());
        let mut excluded = Vec::new();
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(s) => samples.push(Some(s)),
                Err(reason) => {
                    excluded.push(ExcludedPoint { index: i, u: points[i].clone(), reason });
                    samples.push(None);
                }
            }
        }
        Ok(SampleSet {
            spec: spec.clone(),
            counts,
            seed,
            points,
            samples,
            excluded,
        })
    }

    /// Applies `f` at every valid point, keeping grid alignment.
    pub fn map<T>(&self, f: impl Fn(&Sample) -> T) -> Vec<Option<T>> {
        self.samples.iter().map(|s| s.as_ref().map(&f)).collect()
    }

    pub fn valid(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn m(&self) -> usize {
        self.spec.m
    }
}

/// Max, mean and location of the max of a per-point series (None entries skipped).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesStats {
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    pub argmax: Option<usize>,
    pub count: usize,
}

impl SeriesStats {
    pub fn of(values: &[Option<f64>]) -> SeriesStats {
        let mut max = 0.0f64;
        let mut min = 0.0f64;
        let mut argmax = None;
        let mut sum = 0.0;
        let mut count = 0;
        for (i, v) in values.iter().enumerate() {
            if let Some(v) = v {
                if argmax.is_none() || *v < min {
                    min = *v;
                }
                if argmax.is_none() || *v > max || v.is_nan() {
                    max = *v;
                    argmax = Some(i);
                }
                sum += v;
                count += 1;
            }
        }
        SeriesStats {
            max,
            min,
            mean: if count > 0 { sum / count as f64 } else { 0.0 },
            argmax,
            count,
        }
    }

    pub fn min_of(values: &[Option<f64>]) -> Option<f64> {
        values.iter().flatten().copied().reduce(f64::min)
    }
}

/// A named per-point residual series with its tolerance verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSeries {
    pub name: String,
    /// The formula the residual measures.
    pub anchor: String,
    /// Values are divided by the point scale when true.
    pub relative_to_scale: bool,
    pub tolerance: f64,
    pub stats: SeriesStats,
    pub pass: bool,
    #[serde(skip)]
    pub values: Vec<Option<f64>>,
}

impl ResidualSeries {
    pub fn new(name: &str, anchor: &str, values: Vec<Option<f64>>, tolerance: f64, relative_to_scale: bool) -> ResidualSeries {
        let stats = SeriesStats::of(&values);
        let pass = values.iter().flatten().all(|v| *v <= tolerance);
        ResidualSeries {
            name: name.to_string(),
            anchor: anchor.to_string(),
            relative_to_scale,
            tolerance,
            stats,
            pass,
            values,
        }
    }

    /// Per-point values divided by each sample's scale.
    pub fn scaled(name: &str, anchor: &str, set: &SampleSet, raw: Vec<Option<f64>>, tolerance: f64) -> ResidualSeries {
        let values = raw
            .into_iter()
            .zip(&set.samples)
            .map(|(v, s)| v.zip(s.as_ref()).map(|(v, s)| v / s.scale()))
            .collect();
        ResidualSeries::new(name, anchor, values, tolerance, true)
    }

    pub fn max(&self) -> f64 {
        self.stats.max
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{catalog, catalog_defaults};

    #[test]
    fn cell_centered_points_avoid_boundary() {
        let s = catalog("sphere", &catalog_defaults("sphere").unwrap()).unwrap();
        let pts = grid_points(&s, &[4, 2]);
        assert_eq!(pts.len(), 8);
        let pi = std::f64::consts::PI;
        assert!((pts[0][0] - (-pi + pi / 4.0)).abs() < 1e-15);
        assert!((pts[0][1] - (-pi / 4.0)).abs() < 1e-15);
        assert!((pts[1][1] - (pi / 4.0)).abs() < 1e-15);
        for p in &pts {
            assert!(p[1].abs() < pi / 2.0);
        }
    }

    #[test]
    fn excluded_points_are_recorded() {
        let s = crate::dsl::parse("dim 1 -> 2; domain u1 in [-1, 1]; grid 3; x1 = u1^3; x2 = 0;").unwrap();
        let set = SampleSet::evaluate(&s, None, 7).unwrap();
        assert_eq!(set.excluded.len(), 1);
        assert_eq!(set.excluded[0].index, 1);
        assert!(set.excluded[0].reason.contains("rank"));
        assert_eq!(set.valid().count(), 2);
    }

    #[test]
    fn directions_are_unit_and_seeded() {
        let s = catalog("torus", &catalog_defaults("torus").unwrap()).unwrap();
        let a = SampleSet::evaluate(&s, Some(&[3, 3]), 11).unwrap();
        let b = SampleSet::evaluate(&s, Some(&[3, 3]), 11).unwrap();
        for (x, y) in a.valid().zip(b.valid()) {
            assert_eq!(x.directions, y.directions);
            for d in &x.directions {
                assert!((x.frame.chart_norm(d) - 1.0).abs() < 1e-12);
            }
        }
        let c = SampleSet::evaluate(&s, Some(&[3, 3]), 12).unwrap();
        assert_ne!(a.samples[0].as_ref().unwrap().directions, c.samples[0].as_ref().unwrap().directions);
    }

    #[test]
    fn stats() {
        let s = SeriesStats::of(&[Some(1.0), None, Some(3.0), Some(2.0)]);
        assert_eq!(s.max, 3.0);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.argmax, Some(2));
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.count, 3);
    }
}
