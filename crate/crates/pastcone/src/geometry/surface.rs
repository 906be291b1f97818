use super::{Boost, Event, GeometryError, Worldline};
use std::sync::Arc;

/// Axis-aligned spatial box used as the sampling domain for spacelike
/// validation and as the region random surfaces must cut through.
#[derive(Clone, Copy, Debug)]
pub struct SpatialBounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub dim: usize,
}

impl SpatialBounds {
    pub fn new(min: &[f64], max: &[f64]) -> Self {
        let dim = min.len();
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        lo[..dim].copy_from_slice(min);
        hi[..dim].copy_from_slice(max);
        SpatialBounds { min: lo, max: hi, dim }
    }

    pub fn symmetric(half_width: f64, dim: usize) -> Self {
        let lo = [-half_width; 3];
        let hi = [half_width; 3];
        SpatialBounds {
            min: lo,
            max: hi,
            dim,
        }
    }

    pub fn with_margin(&self, frac: f64) -> Self {
        let mut out = *self;
        for i in 0..self.dim {
            let w = (self.max[i] - self.min[i]).max(1.0);
            out.min[i] -= frac * w;
            out.max[i] += frac * w;
        }
        out
    }

    pub fn contains_interval(&self, other: &SpatialBounds) -> bool {
        (0..self.dim).all(|i| self.min[i] <= other.min[i] && self.max[i] >= other.max[i])
    }
}

/// Result of a spacelike check: the verdict plus the steepest slope seen.
#[derive(Clone, Debug)]
pub struct SpacelikeCheck {
    pub spacelike: bool,
    pub max_slope: f64,
    pub diagnostic: String,
}

/// The time-over-space mapping of a curved spacelike graph surface
/// `t = f(x)`.
#[derive(Clone)]
pub enum GraphForm {
    /// `f(x) = intercept + slope . x`
    Affine { slope: Vec<f64>, intercept: f64 },
    /// Uniform 1-D sample grid with linear interpolation; continued beyond
    /// the grid with the boundary slopes.
    Samples1D {
        x0: f64,
        dx: f64,
        times: Arc<Vec<f64>>,
    },
    /// Arbitrary analytic form.
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for GraphForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GraphForm::Affine { slope, intercept } => {
                write!(f, "Affine {{ slope: {slope:?}, intercept: {intercept} }}")
            }
            GraphForm::Samples1D { x0, dx, times } => {
                write!(f, "Samples1D {{ x0: {x0}, dx: {dx}, n: {} }}", times.len())
            }
            GraphForm::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A curved spacelike slice given as a graph `t = f(x)` with a declared
/// Lipschitz bound `< 1`.
#[derive(Clone, Debug)]
pub struct GraphSurface {
    form: GraphForm,
    lipschitz_bound: f64,
    descriptor: String,
}

impl GraphSurface {
    pub fn affine(slope: &[f64], intercept: f64) -> Self {
        let bound = slope.iter().map(|c| c * c).sum::<f64>().sqrt();
        let descriptor = format!("graph_affine(slope={slope:?};intercept={intercept})");
        GraphSurface {
            form: GraphForm::Affine {
                slope: slope.to_vec(),
                intercept,
            },
            lipschitz_bound: bound,
            descriptor,
        }
    }

    pub fn samples_1d(x0: f64, dx: f64, times: Vec<f64>) -> Result<Self, GeometryError> {
        if times.len() < 2 {
            return Err(GeometryError::MalformedSurface(
                "sampled surface needs at least two samples".into(),
            ));
        }
        if !(dx > 0.0) || !x0.is_finite() || times.iter().any(|t| !t.is_finite()) {
            return Err(GeometryError::MalformedSurface(
                "sampled surface needs finite samples and positive spacing".into(),
            ));
        }
        let mut bound: f64 = 0.0;
        for w in times.windows(2) {
            bound = bound.max((w[1] - w[0]).abs() / dx);
        }
        let descriptor = format!("graph_samples(x0={x0};dx={dx};n={})", times.len());
        Ok(GraphSurface {
            form: GraphForm::Samples1D {
                x0,
                dx,
                times: Arc::new(times),
            },
            lipschitz_bound: bound,
            descriptor,
        })
    }

    pub fn custom(
        f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
        lipschitz_bound: f64,
        descriptor: impl Into<String>,
    ) -> Self {
        GraphSurface {
            form: GraphForm::Custom(f),
            lipschitz_bound,
            descriptor: descriptor.into(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.form {
            GraphForm::Affine { slope, intercept } => {
                intercept + slope.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>()
            }
            GraphForm::Samples1D { x0, dx, times } => {
                let n = times.len();
                let s = (x[0] - x0) / dx;
                if s <= 0.0 {
                    let slope = (times[1] - times[0]) / dx;
                    times[0] + slope * (x[0] - x0)
                } else if s >= (n - 1) as f64 {
                    let slope = (times[n - 1] - times[n - 2]) / dx;
                    times[n - 1] + slope * (x[0] - (x0 + (n - 1) as f64 * dx))
                } else {
                    let i = s.floor() as usize;
                    let frac = s - i as f64;
                    times[i] * (1.0 - frac) + times[i + 1] * frac
                }
            }
            GraphForm::Custom(f) => f(x),
        }
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    pub fn form(&self) -> &GraphForm {
        &self.form
    }

    /// Spatial interval a sampled surface is trustworthy over; analytic
    /// forms span everything.
    pub fn native_domain(&self) -> Option<SpatialBounds> {
        match &self.form {
            GraphForm::Samples1D { x0, dx, times } => Some(SpatialBounds::new(
                &[*x0],
                &[x0 + dx * (times.len() - 1) as f64],
            )),
            _ => None,
        }
    }
}

/// A spacelike hypersurface: a flat boosted equal-time slice, a Lipschitz
/// graph, or the image of either under a boost.
#[derive(Clone, Debug)]
pub enum Hypersurface {
    Flat(FlatSlice),
    Graph(GraphSurface),
    Boosted {
        base: Box<Hypersurface>,
        boost: Boost,
    },
}

/// Equal-time slice `tau' = tau` of the frame moving with `frame`.
#[derive(Clone, Copy, Debug)]
pub struct FlatSlice {
    pub frame: Boost,
    pub tau: f64,
}

impl Hypersurface {
    /// Lab-frame equal-time slice `t = tau`.
    pub fn flat_lab(tau: f64, dim: usize) -> Self {
        Hypersurface::Flat(FlatSlice {
            frame: Boost::identity(dim),
            tau,
        })
    }

    pub fn flat(frame: Boost, tau: f64) -> Self {
        Hypersurface::Flat(FlatSlice { frame, tau })
    }

    pub fn graph(g: GraphSurface) -> Self {
        Hypersurface::Graph(g)
    }

    /// Signed relation of an event to the surface: negative below (past
    /// side), zero on it, positive above.
    pub fn side(&self, e: &Event) -> f64 {
        match self {
            Hypersurface::Flat(s) => s.frame.boosted_time(e) - s.tau,
            Hypersurface::Graph(g) => e.t() - g.eval(e.x()),
            Hypersurface::Boosted { base, boost } => base.side(&boost.inverse().apply(e)),
        }
    }

    /// Whether the surface passes strictly above `below` and at-or-below
    /// `above`. Used to count crossed null generators.
    pub fn separates(&self, below: &Event, above: &Event) -> bool {
        self.side(below) < 0.0 && self.side(above) >= 0.0
    }

    /// The unique intersection with a causal future-directed worldline.
    ///
    /// Uniqueness holds because the surface is spacelike; the crossing is
    /// solved in closed form on flat slices and by bisection (1e-12 absolute
    /// time tolerance) on graphs.
    pub fn cross_worldline(&self, w: &Worldline) -> Result<Event, GeometryError> {
        match self {
            Hypersurface::Flat(s) => flat_crossing(s, w),
            Hypersurface::Graph(_) => graph_crossing(self, w),
            Hypersurface::Boosted { base, boost } => {
                let pulled = w.boosted(&boost.inverse());
                let c = base.cross_worldline(&pulled)?;
                Ok(boost.apply(&c))
            }
        }
    }

    /// Spacelike check over a default symmetric domain.
    pub fn validate_spacelike(&self) -> Result<SpacelikeCheck, GeometryError> {
        let dim = self.dim_hint();
        self.validate_spacelike_in(&SpatialBounds::symmetric(16.0, dim), 0)
    }

    /// Spacelike check over `domain`; `samples_per_axis = 0` picks a
    /// dimension-appropriate default.
    pub fn validate_spacelike_in(
        &self,
        domain: &SpatialBounds,
        samples_per_axis: usize,
    ) -> Result<SpacelikeCheck, GeometryError> {
        match self {
            Hypersurface::Flat(s) => {
                let v = s.frame.speed2().sqrt();
                Ok(SpacelikeCheck {
                    spacelike: true,
                    max_slope: v,
                    diagnostic: format!("flat slice of frame |v| = {v} < 1"),
                })
            }
            Hypersurface::Graph(g) => {
                if !g.lipschitz_bound.is_finite() {
                    return Err(GeometryError::MalformedSurface(
                        "non-finite Lipschitz bound".into(),
                    ));
                }
                let dim = domain.dim;
                let n = if samples_per_axis > 0 {
                    samples_per_axis
                } else {
                    match dim {
                        1 => 513,
                        2 => 65,
                        _ => 17,
                    }
                };
                let max_slope = sampled_max_slope(g, domain, n)?;
                let declared_ok = g.lipschitz_bound < 1.0;
                let sampled_ok = max_slope < 1.0;
                Ok(SpacelikeCheck {
                    spacelike: declared_ok && sampled_ok,
                    max_slope: max_slope.max(g.lipschitz_bound),
                    diagnostic: format!(
                        "declared bound {} ({}), sampled max slope {} over {n} samples/axis",
                        g.lipschitz_bound,
                        if declared_ok { "ok" } else { "too steep" },
                        max_slope,
                    ),
                })
            }
            Hypersurface::Boosted { base, .. } => {
                // Spacelike character is boost-invariant.
                base.validate_spacelike_in(domain, samples_per_axis)
            }
        }
    }

    pub fn descriptor(&self) -> String {
        match self {
            Hypersurface::Flat(s) => {
                format!("flat(v={:?};tau={})", s.frame.velocity(), s.tau)
            }
            Hypersurface::Graph(g) => g.descriptor.clone(),
            Hypersurface::Boosted { base, boost } => {
                format!("boosted(v={:?};{})", boost.velocity(), base.descriptor())
            }
        }
    }

    /// Image of the surface under a boost of the whole scenario. Flat slices
    /// transform exactly to flat slices; graphs are wrapped.
    pub fn boosted(self, b: &Boost) -> Hypersurface {
        match self {
            Hypersurface::Flat(s) => Hypersurface::Flat(FlatSlice {
                frame: b.transform_frame(&s.frame),
                tau: s.tau,
            }),
            other => Hypersurface::Boosted {
                base: Box::new(other),
                boost: *b,
            },
        }
    }

    /// Rejects surfaces whose trusted domain does not cover `required`
    /// (sampled grids only; analytic forms span everything).
    pub fn check_spans(&self, required: &SpatialBounds) -> Result<(), GeometryError> {
        if let Hypersurface::Graph(g) = self {
            if let Some(native) = g.native_domain() {
                if !native.contains_interval(required) {
                    return Err(GeometryError::MalformedSurface(format!(
                        "sampled surface domain [{}, {}] does not span the required region \
                         [{}, {}]",
                        native.min[0], native.max[0], required.min[0], required.max[0]
                    )));
                }
            }
        }
        Ok(())
    }

    fn dim_hint(&self) -> usize {
        match self {
            Hypersurface::Flat(s) => s.frame.velocity().len(),
            Hypersurface::Graph(g) => match &g.form {
                GraphForm::Affine { slope, .. } => slope.len(),
                GraphForm::Samples1D { .. } => 1,
                GraphForm::Custom(_) => 1,
            },
            Hypersurface::Boosted { base, .. } => base.dim_hint(),
        }
    }
}

fn sampled_max_slope(
    g: &GraphSurface,
    domain: &SpatialBounds,
    n: usize,
) -> Result<f64, GeometryError> {
    let dim = domain.dim;
    let mut steps = [0.0; 3];
    for i in 0..dim {
        steps[i] = (domain.max[i] - domain.min[i]) / (n - 1) as f64;
    }
    let point = |idx: &[usize; 3]| -> Vec<f64> {
        (0..dim)
            .map(|i| domain.min[i] + steps[i] * idx[i] as f64)
            .collect()
    };
    let counts = |i: usize| if i < dim { n } else { 1 };
    let mut max_slope: f64 = 0.0;
    for i in 0..counts(0) {
        for j in 0..counts(1) {
            for k in 0..counts(2) {
                let here = point(&[i, j, k]);
                let f_here = g.eval(&here);
                if !f_here.is_finite() {
                    return Err(GeometryError::MalformedSurface(format!(
                        "surface evaluates non-finite at {here:?}"
                    )));
                }
                // Forward neighbors, diagonals included.
                for di in 0..=usize::from(dim > 0) {
                    for dj in 0..=usize::from(dim > 1) {
                        for dk in 0..=usize::from(dim > 2) {
                            if di + dj + dk == 0 {
                                continue;
                            }
                            let ni = [i + di, j + dj, k + dk];
                            if ni[0] >= counts(0) || ni[1] >= counts(1) || ni[2] >= counts(2)
                            {
                                continue;
                            }
                            let there = point(&ni);
                            let f_there = g.eval(&there);
                            let dist2: f64 = here
                                .iter()
                                .zip(there.iter())
                                .map(|(a, b)| (a - b) * (a - b))
                                .sum();
                            max_slope =
                                max_slope.max((f_there - f_here).abs() / dist2.sqrt());
                        }
                    }
                }
            }
        }
    }
    Ok(max_slope)
}

fn flat_crossing(s: &FlatSlice, w: &Worldline) -> Result<Event, GeometryError> {
    let g = s.frame.gamma();
    let v = s.frame.velocity();
    for seg in w.segments() {
        // tau'(t) is affine and strictly increasing on each segment.
        let vu: f64 = v.iter().zip(seg.velocity.iter()).map(|(a, b)| a * b).sum();
        let vx0: f64 = v.iter().zip(seg.origin.x().iter()).map(|(a, b)| a * b).sum();
        let t0 = seg.origin.t();
        // tau'(t) = g [ (1 - v.u) t - v.x0 + (v.u) t0 ]
        let t_cross = (s.tau / g + vx0 - vu * t0) / (1.0 - vu);
        let lo_ok = seg.t_start.is_infinite() || t_cross >= seg.t_start - 1e-9;
        let hi_ok = seg.t_end.is_infinite() || t_cross <= seg.t_end + 1e-9;
        if lo_ok && hi_ok {
            let t = t_cross.clamp(
                if seg.t_start.is_finite() {
                    seg.t_start
                } else {
                    t_cross
                },
                if seg.t_end.is_finite() {
                    seg.t_end
                } else {
                    t_cross
                },
            );
            return Ok(seg.position_at(t));
        }
    }
    Err(GeometryError::NotSpanning {
        id: w.id().to_string(),
        surface: format!("flat(tau={})", s.tau),
    })
}

fn graph_crossing(surface: &Hypersurface, w: &Worldline) -> Result<Event, GeometryError> {
    // h(t) = side(position(t)) is strictly increasing for spacelike graphs.
    let side_at = |t: f64, segs: &[super::Segment]| -> f64 {
        let seg = segs
            .iter()
            .find(|s| t <= s.t_end)
            .unwrap_or(&segs[segs.len() - 1]);
        surface.side(&seg.position_at(t))
    };
    let segs = w.segments();
    let (span_lo, span_hi) = w.time_span();

    let anchor = w.vertices()[0].t();
    let mut lo = if span_lo.is_finite() { span_lo } else { anchor };
    let mut hi = if span_hi.is_finite() {
        span_hi
    } else {
        anchor.max(lo)
    };

    // Expand to bracket the sign change where extensions allow.
    let mut step = (hi - lo).max(1.0);
    for _ in 0..200 {
        if side_at(lo, &segs) <= 0.0 {
            break;
        }
        if span_lo.is_finite() {
            return Err(GeometryError::NotSpanning {
                id: w.id().to_string(),
                surface: surface.descriptor(),
            });
        }
        lo -= step;
        step *= 2.0;
    }
    let mut step = (hi - lo).max(1.0);
    for _ in 0..200 {
        if side_at(hi, &segs) >= 0.0 {
            break;
        }
        if span_hi.is_finite() {
            return Err(GeometryError::NotSpanning {
                id: w.id().to_string(),
                surface: surface.descriptor(),
            });
        }
        hi += step;
        step *= 2.0;
    }
    if side_at(lo, &segs) > 0.0 || side_at(hi, &segs) < 0.0 {
        return Err(GeometryError::NotSpanning {
            id: w.id().to_string(),
            surface: surface.descriptor(),
        });
    }

    for _ in 0..400 {
        if hi - lo <= 1e-12 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if side_at(mid, &segs) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let seg = segs
        .iter()
        .find(|s| t <= s.t_end)
        .unwrap_or(&segs[segs.len() - 1]);
    Ok(seg.position_at(t))
}
