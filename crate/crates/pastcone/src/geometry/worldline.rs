use super::{Boost, Event, GeometryError};
use serde::{Deserialize, Serialize};

/// Causal-bound slack for segment validation: guards against last-ulp
/// rounding when lightlike segments are assembled from products.
const CAUSAL_SLACK: f64 = 1e-9;

/// A piecewise-linear, future-directed timelike-or-lightlike trajectory.
///
/// Optional constant-velocity extensions continue the line to `t = -inf`
/// and `t = +inf`; every segment (extensions included) satisfies
/// `|dx| <= dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Worldline {
    id: String,
    vertices: Vec<Event>,
    initial_velocity: Option<Vec<f64>>,
    terminal_velocity: Option<Vec<f64>>,
}

/// One linear piece of a worldline. `t_start`/`t_end` may be infinite for
/// the extension pieces; `origin` is an event on the piece.
#[derive(Clone, Copy, Debug)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub origin: Event,
    pub velocity: [f64; 3],
}

impl Segment {
    pub fn position_at(&self, t: f64) -> Event {
        let dt = t - self.origin.t();
        let mut x = [0.0; 3];
        for (i, xi) in x.iter_mut().enumerate().take(self.origin.dim()) {
            *xi = self.origin.x()[i] + self.velocity[i] * dt;
        }
        Event::new(t, &x[..self.origin.dim()]).expect("segment coordinates finite")
    }

    pub fn speed2(&self) -> f64 {
        self.velocity.iter().map(|c| c * c).sum()
    }
}

impl Worldline {
    pub fn new(
        id: impl Into<String>,
        vertices: Vec<Event>,
        initial_velocity: Option<Vec<f64>>,
        terminal_velocity: Option<Vec<f64>>,
    ) -> Result<Self, GeometryError> {
        let id = id.into();
        if vertices.is_empty() {
            return Err(GeometryError::EmptyWorldline { id });
        }
        let dim = vertices[0].dim();
        for (index, pair) in vertices.windows(2).enumerate() {
            let (a, b) = (&pair[0], &pair[1]);
            let dt = b.t() - a.t();
            if dt <= 0.0 {
                return Err(GeometryError::NonIncreasingTimes {
                    id,
                    index: index + 1,
                });
            }
            let dx = a.spatial_distance(b);
            if dx * dx > dt * dt * (1.0 + CAUSAL_SLACK) {
                return Err(GeometryError::SuperluminalSegment { id, index, dx, dt });
            }
        }
        for v in [&initial_velocity, &terminal_velocity].into_iter().flatten() {
            if v.len() != dim {
                return Err(GeometryError::BadDimension(v.len()));
            }
            let speed2: f64 = v.iter().map(|c| c * c).sum();
            if !speed2.is_finite() || speed2 > 1.0 + CAUSAL_SLACK {
                return Err(GeometryError::SuperluminalExtension {
                    id,
                    speed: speed2.sqrt(),
                });
            }
        }
        Ok(Worldline {
            id,
            vertices,
            initial_velocity,
            terminal_velocity,
        })
    }

    /// A card sitting at rest at `x` for all time.
    pub fn at_rest(id: impl Into<String>, x: &[f64]) -> Self {
        let anchor = Event::new(0.0, x).expect("finite position");
        let zeros = vec![0.0; x.len()];
        Worldline::new(id, vec![anchor], Some(zeros.clone()), Some(zeros))
            .expect("static line is causal")
    }

    /// Uniform motion through `(t0, x0)` with velocity `v`, for all time.
    pub fn uniform(
        id: impl Into<String>,
        t0: f64,
        x0: &[f64],
        v: &[f64],
    ) -> Result<Self, GeometryError> {
        let anchor = Event::new(t0, x0)?;
        Worldline::new(id, vec![anchor], Some(v.to_vec()), Some(v.to_vec()))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn vertices(&self) -> &[Event] {
        &self.vertices
    }

    pub fn initial_velocity(&self) -> Option<&[f64]> {
        self.initial_velocity.as_deref()
    }

    pub fn terminal_velocity(&self) -> Option<&[f64]> {
        self.terminal_velocity.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].dim()
    }

    /// Earliest and latest times the line is defined at (infinite with
    /// extensions).
    pub fn time_span(&self) -> (f64, f64) {
        let lo = if self.initial_velocity.is_some() {
            f64::NEG_INFINITY
        } else {
            self.vertices[0].t()
        };
        let hi = if self.terminal_velocity.is_some() {
            f64::INFINITY
        } else {
            self.vertices[self.vertices.len() - 1].t()
        };
        (lo, hi)
    }

    pub fn segments(&self) -> Vec<Segment> {
        let dim = self.dim();
        let mut out = Vec::new();
        if let Some(v) = &self.initial_velocity {
            let mut vel = [0.0; 3];
            vel[..dim].copy_from_slice(v);
            out.push(Segment {
                t_start: f64::NEG_INFINITY,
                t_end: self.vertices[0].t(),
                origin: self.vertices[0],
                velocity: vel,
            });
        }
        for pair in self.vertices.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let dt = b.t() - a.t();
            let mut vel = [0.0; 3];
            for i in 0..dim {
                vel[i] = (b.x()[i] - a.x()[i]) / dt;
            }
            out.push(Segment {
                t_start: a.t(),
                t_end: b.t(),
                origin: a,
                velocity: vel,
            });
        }
        if let Some(v) = &self.terminal_velocity {
            let last = self.vertices[self.vertices.len() - 1];
            let mut vel = [0.0; 3];
            vel[..dim].copy_from_slice(v);
            out.push(Segment {
                t_start: last.t(),
                t_end: f64::INFINITY,
                origin: last,
                velocity: vel,
            });
        }
        out
    }

    /// The event on the line at coordinate time `t`, if the line is defined
    /// there.
    pub fn event_at(&self, t: f64) -> Option<Event> {
        let (lo, hi) = self.time_span();
        if t < lo || t > hi {
            return None;
        }
        let seg = self
            .segments()
            .into_iter()
            .find(|s| t <= s.t_end)
            .expect("time within span");
        Some(seg.position_at(t))
    }

    /// Whether `e` lies on the line within `tol` (relative to coordinate
    /// scale).
    pub fn contains_event(&self, e: &Event, tol: f64) -> bool {
        match self.event_at(e.t()) {
            Some(p) => {
                let scale = p.scale_with(e).max(1.0);
                p.spatial_distance(e) <= tol * scale
            }
            None => false,
        }
    }

    /// Elapsed proper time between two events on the line; zero across
    /// lightlike stretches.
    pub fn proper_time(&self, e1: &Event, e2: &Event) -> Result<f64, GeometryError> {
        const TOL: f64 = 1e-9;
        for e in [e1, e2] {
            if !self.contains_event(e, TOL) {
                return Err(GeometryError::OffWorldline {
                    t: e.t(),
                    x: e.x().to_vec(),
                    id: self.id.clone(),
                });
            }
        }
        if e1.t() > e2.t() {
            return Err(GeometryError::EventsOutOfOrder(e1.t(), e2.t()));
        }
        let mut tau = 0.0;
        for seg in self.segments() {
            let a = seg.t_start.max(e1.t());
            let b = seg.t_end.min(e2.t());
            if b > a {
                let dt = b - a;
                tau += (dt * dt * (1.0 - seg.speed2())).max(0.0).sqrt();
            }
        }
        Ok(tau)
    }

    /// The same trajectory described in the frame moving with `b`.
    pub fn boosted(&self, b: &Boost) -> Worldline {
        let vertices = self.vertices.iter().map(|e| b.apply(e)).collect();
        let initial = self
            .initial_velocity
            .as_ref()
            .map(|v| b.apply_velocity(v));
        let terminal = self
            .terminal_velocity
            .as_ref()
            .map(|v| b.apply_velocity(v));
        Worldline::new(self.id.clone(), vertices, initial, terminal)
            .expect("boost preserves causal segments")
    }
}
