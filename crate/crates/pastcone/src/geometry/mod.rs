//! Flat-spacetime geometry: events, causal classification, Lorentz boosts,
//! worldlines, light cones, and spacelike hypersurfaces.
//!
//! Coordinates are natural units (`c = 1`) throughout. All types are immutable
//! values and every operation is a pure function.

mod cone;
mod surface;
mod worldline;

pub use cone::{ConeBranch, LightCone};
pub use surface::{
    FlatSlice, GraphForm, GraphSurface, Hypersurface, SpacelikeCheck, SpatialBounds,
};
pub use worldline::{Segment, Worldline};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default relative tolerance for lightlike / coincident classification.
pub const DEFAULT_EPS: f64 = 1e-9;

/// Absolute time tolerance for crossing solvers.
pub const CROSSING_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("coordinate is not finite: {0}")]
    NonFinite(f64),
    #[error("spatial dimension must be 1, 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("boost speed must satisfy |v| < 1, got |v| = {0}")]
    SuperluminalBoost(f64),
    #[error("worldline `{id}`: vertex times must be strictly increasing at vertex {index}")]
    NonIncreasingTimes { id: String, index: usize },
    #[error("worldline `{id}`: segment {index} is superluminal (|dx| = {dx} > dt = {dt})")]
    SuperluminalSegment {
        id: String,
        index: usize,
        dx: f64,
        dt: f64,
    },
    #[error("worldline `{id}`: extension velocity exceeds the causal bound (|v| = {speed})")]
    SuperluminalExtension { id: String, speed: f64 },
    #[error("worldline `{id}` has no vertices")]
    EmptyWorldline { id: String },
    #[error("worldline `{id}` does not span the surface {surface}")]
    NotSpanning { id: String, surface: String },
    #[error("event ({t}, {x:?}) does not lie on worldline `{id}`")]
    OffWorldline { t: f64, x: Vec<f64>, id: String },
    #[error("events out of order along the worldline: {0} > {1}")]
    EventsOutOfOrder(f64, f64),
    #[error("malformed surface description: {0}")]
    MalformedSurface(String),
}

/// A point in (1+d)-dimensional flat spacetime, `d` in 1..=3.
///
/// Stored as a fixed array padded with zeros; binary operations panic if the
/// dimensions differ (mixed dimensions are rejected at the scenario boundary).
#[derive(Clone, Copy, PartialEq)]
pub struct Event {
    t: f64,
    x: [f64; 3],
    dim: u8,
}

impl std::fmt::Debug for Event {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}", self.t)?;
        for c in self.x() {
            write!(f, ", {c}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for Event {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut coords = Vec::with_capacity(1 + self.dim());
        coords.push(self.t);
        coords.extend_from_slice(self.x());
        coords.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Event {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let coords = Vec::<f64>::deserialize(d)?;
        if coords.len() < 2 || coords.len() > 4 {
            return Err(serde::de::Error::custom(format!(
                "event needs [t, x...] with 1..=3 spatial coordinates, got {} entries",
                coords.len()
            )));
        }
        Event::new(coords[0], &coords[1..]).map_err(serde::de::Error::custom)
    }
}

impl Event {
    pub fn new(t: f64, x: &[f64]) -> Result<Self, GeometryError> {
        if x.is_empty() || x.len() > 3 {
            return Err(GeometryError::BadDimension(x.len()));
        }
        for &c in std::iter::once(&t).chain(x) {
            if !c.is_finite() {
                return Err(GeometryError::NonFinite(c));
            }
        }
        let mut buf = [0.0; 3];
        buf[..x.len()].copy_from_slice(x);
        Ok(Event {
            t,
            x: buf,
            dim: x.len() as u8,
        })
    }

    /// 1+1 dimensional event; the workhorse for the diagram constructions.
    pub fn d1(t: f64, x: f64) -> Self {
        Event {
            t,
            x: [x, 0.0, 0.0],
            dim: 1,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn x(&self) -> &[f64] {
        &self.x[..self.dim as usize]
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    fn check_dim(&self, other: &Event) {
        assert_eq!(
            self.dim, other.dim,
            "events of mixed spatial dimension: {} vs {}",
            self.dim, other.dim
        );
    }

    pub fn spatial_distance2(&self, other: &Event) -> f64 {
        self.check_dim(other);
        self.x
            .iter()
            .zip(other.x.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn spatial_distance(&self, other: &Event) -> f64 {
        self.spatial_distance2(other).sqrt()
    }

    /// Signed squared interval `(dt)^2 - |dx|^2`. Symmetric in its arguments;
    /// positive for timelike, zero for lightlike, negative for spacelike pairs.
    ///
    /// Panics if the dimensions differ.
    pub fn interval2(&self, other: &Event) -> f64 {
        let dt = other.t - self.t;
        dt * dt - self.spatial_distance2(other)
    }

    /// Largest coordinate magnitude of the pair; the scale against which
    /// relative tolerances are measured.
    pub fn scale_with(&self, other: &Event) -> f64 {
        let mut s: f64 = 0.0;
        for e in [self, other] {
            s = s.max(e.t.abs());
            for &c in e.x() {
                s = s.max(c.abs());
            }
        }
        s
    }

    /// Causal class of `p` relative to `self`.
    ///
    /// Points within the `eps`-band of the cone are reported as the cone
    /// class, never silently bucketed into the open regions.
    pub fn classify(&self, p: &Event, eps: f64) -> CausalClass {
        let scale = self.scale_with(p);
        let dt = p.t - self.t;
        let dx = self.spatial_distance(p);
        if dt.abs() <= eps * scale && dx <= eps * scale {
            return CausalClass::Coincident;
        }
        let s2 = dt * dt - dx * dx;
        if s2.abs() <= eps * scale * scale {
            return if dt < 0.0 {
                CausalClass::PastLightCone
            } else {
                CausalClass::FutureLightCone
            };
        }
        if s2 > 0.0 {
            if dt < 0.0 {
                CausalClass::AbsolutePast
            } else {
                CausalClass::AbsoluteFuture
            }
        } else {
            CausalClass::Ambiguous
        }
    }
}

/// Causal relation of a point relative to a reference event.
///
/// `Ambiguous` is the spacelike exterior, whose time order relative to the
/// reference is frame-dependent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CausalClass {
    AbsolutePast,
    PastLightCone,
    Ambiguous,
    FutureLightCone,
    AbsoluteFuture,
    Coincident,
}

impl CausalClass {
    /// Class seen when the two arguments are exchanged.
    pub fn exchanged(self) -> CausalClass {
        match self {
            CausalClass::AbsolutePast => CausalClass::AbsoluteFuture,
            CausalClass::AbsoluteFuture => CausalClass::AbsolutePast,
            CausalClass::PastLightCone => CausalClass::FutureLightCone,
            CausalClass::FutureLightCone => CausalClass::PastLightCone,
            other => other,
        }
    }
}

/// A pure Lorentz boost with velocity `|v| < 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Boost {
    v: [f64; 3],
    dim: u8,
}

impl Boost {
    pub fn new(v: &[f64]) -> Result<Self, GeometryError> {
        if v.is_empty() || v.len() > 3 {
            return Err(GeometryError::BadDimension(v.len()));
        }
        let speed2: f64 = v.iter().map(|c| c * c).sum();
        if !speed2.is_finite() || speed2 >= 1.0 {
            return Err(GeometryError::SuperluminalBoost(speed2.sqrt()));
        }
        let mut buf = [0.0; 3];
        buf[..v.len()].copy_from_slice(v);
        Ok(Boost {
            v: buf,
            dim: v.len() as u8,
        })
    }

    /// Boost along the first spatial axis.
    pub fn along_x(v: f64, dim: usize) -> Result<Self, GeometryError> {
        let mut buf = vec![0.0; dim];
        buf[0] = v;
        Boost::new(&buf)
    }

    pub fn identity(dim: usize) -> Self {
        Boost {
            v: [0.0; 3],
            dim: dim as u8,
        }
    }

    pub fn velocity(&self) -> &[f64] {
        &self.v[..self.dim as usize]
    }

    pub fn speed2(&self) -> f64 {
        self.v.iter().map(|c| c * c).sum()
    }

    pub fn gamma(&self) -> f64 {
        1.0 / (1.0 - self.speed2()).sqrt()
    }

    pub fn inverse(&self) -> Boost {
        let mut v = self.v;
        for c in &mut v {
            *c = -*c;
        }
        Boost { v, dim: self.dim }
    }

    /// Time coordinate of `e` in the boosted frame: `gamma (t - v.x)`.
    pub fn boosted_time(&self, e: &Event) -> f64 {
        let vx: f64 = self.v.iter().zip(e.x.iter()).map(|(a, b)| a * b).sum();
        self.gamma() * (e.t - vx)
    }

    /// Standard Lorentz transformation of an event.
    pub fn apply(&self, e: &Event) -> Event {
        assert_eq!(self.dim, e.dim, "boost/event dimension mismatch");
        let v2 = self.speed2();
        if v2 == 0.0 {
            return *e;
        }
        let g = self.gamma();
        let vx: f64 = self.v.iter().zip(e.x.iter()).map(|(a, b)| a * b).sum();
        let t = g * (e.t - vx);
        let factor = (g - 1.0) * vx / v2 - g * e.t;
        let mut x = e.x;
        for (xi, vi) in x.iter_mut().zip(self.v.iter()) {
            *xi += factor * vi;
        }
        Event {
            t,
            x,
            dim: self.dim,
        }
    }

    /// Relativistic transformation of a velocity into the boosted frame.
    /// Lightlike speeds stay lightlike.
    pub fn apply_velocity(&self, u: &[f64]) -> Vec<f64> {
        let d = self.dim as usize;
        assert_eq!(u.len(), d, "boost/velocity dimension mismatch");
        let v2 = self.speed2();
        if v2 == 0.0 {
            return u.to_vec();
        }
        let g = self.gamma();
        let vu: f64 = self.v.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
        let denom = 1.0 - vu;
        // u' = [u/gamma + v ((gamma-1)/gamma * v.u/v2 - 1)] / (1 - v.u)
        let mut out = vec![0.0; d];
        for i in 0..d {
            let parallel = self.v[i] * ((g - 1.0) / g * vu / v2 - 1.0);
            out[i] = (u[i] / g + parallel) / denom;
        }
        out
    }

    /// Frame of the image of a flat slice under this boost: the slice with
    /// four-velocity `n` maps to the slice with four-velocity `boost(n)`.
    pub fn transform_frame(&self, frame: &Boost) -> Boost {
        let g = frame.gamma();
        // Four-velocity (g, g*v) transforms like an event displacement.
        let tip = Event {
            t: g,
            x: {
                let mut x = frame.v;
                for c in &mut x {
                    *c *= g;
                }
                x
            },
            dim: self.dim,
        };
        let image = self.apply(&tip);
        let mut v = image.x;
        for c in &mut v {
            *c /= image.t;
        }
        Boost { v, dim: self.dim }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_of_pure_time_displacement() {
        let o = Event::d1(0.0, 0.0);
        assert_eq!(o.interval2(&Event::d1(1.0, 0.0)), 1.0);
    }

    #[test]
    fn interval_spacelike_arithmetic() {
        let o = Event::d1(0.0, 0.0);
        assert_eq!(o.interval2(&Event::d1(3.0, 4.0)), 9.0 - 16.0);
    }

    #[test]
    fn interval_lightlike_is_zero() {
        let o = Event::d1(0.0, 0.0);
        assert_eq!(o.interval2(&Event::d1(-1.0, 1.0)), 0.0);
    }

    #[test]
    fn interval_is_symmetric() {
        let a = Event::new(1.5, &[0.3, -2.0]).unwrap();
        let b = Event::new(-0.7, &[1.1, 0.4]).unwrap();
        assert_eq!(a.interval2(&b), b.interval2(&a));
    }

    #[test]
    #[should_panic(expected = "mixed spatial dimension")]
    fn interval_rejects_dimension_mismatch() {
        let a = Event::d1(0.0, 0.0);
        let b = Event::new(0.0, &[1.0, 2.0]).unwrap();
        a.interval2(&b);
    }

    #[test]
    fn event_rejects_non_finite() {
        assert!(Event::new(f64::NAN, &[0.0]).is_err());
        assert!(Event::new(0.0, &[f64::INFINITY]).is_err());
    }

    #[test]
    fn classify_basic_regions() {
        let o = Event::d1(0.0, 0.0);
        let eps = DEFAULT_EPS;
        assert_eq!(
            o.classify(&Event::d1(1.0, 0.0), eps),
            CausalClass::AbsoluteFuture
        );
        assert_eq!(
            o.classify(&Event::d1(0.0, 1.0), eps),
            CausalClass::Ambiguous
        );
        assert_eq!(
            o.classify(&Event::d1(-1.0, 1.0), eps),
            CausalClass::PastLightCone
        );
        assert_eq!(
            o.classify(&Event::d1(0.0, 0.0), eps),
            CausalClass::Coincident
        );
        assert_eq!(
            o.classify(&Event::d1(-3.0, 1.0), eps),
            CausalClass::AbsolutePast
        );
    }

    #[test]
    fn classify_exchange_antisymmetry() {
        let eps = DEFAULT_EPS;
        let pairs = [
            (Event::d1(0.0, 0.0), Event::d1(2.0, 0.5)),
            (Event::d1(0.0, 0.0), Event::d1(-1.0, 1.0)),
            (Event::d1(1.0, -2.0), Event::d1(1.2, 3.0)),
        ];
        for (a, b) in pairs {
            assert_eq!(a.classify(&b, eps), b.classify(&a, eps).exchanged());
        }
    }

    #[test]
    fn boost_identity_at_zero_velocity() {
        let b = Boost::along_x(0.0, 1).unwrap();
        let e = Event::d1(1.3, -0.2);
        assert_eq!(b.apply(&e), e);
    }

    #[test]
    fn boost_standard_configuration() {
        // v = 0.6 along x: gamma = 1.25; (t=0, x=1) -> (-0.75, 1.25).
        let b = Boost::along_x(0.6, 1).unwrap();
        let e = b.apply(&Event::d1(0.0, 1.0));
        assert!((e.t() - (-0.75)).abs() < 1e-15);
        assert!((e.x()[0] - 1.25).abs() < 1e-15);
    }

    #[test]
    fn collinear_boosts_compose_by_velocity_addition() {
        let half = Boost::along_x(0.5, 1).unwrap();
        let composed = Boost::along_x(0.8, 1).unwrap();
        let e = Event::d1(0.7, -1.9);
        let twice = half.apply(&half.apply(&e));
        let once = composed.apply(&e);
        assert!((twice.t() - once.t()).abs() < 1e-12);
        assert!((twice.x()[0] - once.x()[0]).abs() < 1e-12);
    }

    #[test]
    fn boost_roundtrip_is_identity() {
        let b = Boost::new(&[0.4, -0.3, 0.2]).unwrap();
        let e = Event::new(0.9, &[1.0, -2.0, 0.5]).unwrap();
        let back = b.inverse().apply(&b.apply(&e));
        assert!((back.t() - e.t()).abs() < 1e-12);
        for (a, b) in back.x().iter().zip(e.x()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn boost_rejects_superluminal() {
        assert!(Boost::along_x(1.0, 1).is_err());
        assert!(Boost::new(&[0.8, 0.8]).is_err());
    }

    #[test]
    fn boost_preserves_interval() {
        let b = Boost::new(&[0.5, 0.3]).unwrap();
        let a = Event::new(1.0, &[2.0, -1.0]).unwrap();
        let c = Event::new(-0.5, &[0.3, 0.8]).unwrap();
        let s2 = a.interval2(&c);
        let s2b = b.apply(&a).interval2(&b.apply(&c));
        assert!((s2 - s2b).abs() < 1e-12 * a.scale_with(&c).powi(2).max(1.0));
    }

    #[test]
    fn lightlike_velocity_stays_lightlike_under_boost() {
        let b = Boost::new(&[0.6, 0.2]).unwrap();
        let u = b.apply_velocity(&[1.0, 0.0]);
        let speed2: f64 = u.iter().map(|c| c * c).sum();
        assert!((speed2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transform_frame_tracks_slice_membership() {
        // q on the slice of `frame` iff boost(q) on the slice of the
        // transformed frame, with the same tau.
        let frame = Boost::along_x(0.3, 1).unwrap();
        let b = Boost::along_x(-0.55, 1).unwrap();
        let frame2 = b.transform_frame(&frame);
        let q = Event::d1(0.62, 0.41);
        let tau = frame.boosted_time(&q);
        let tau2 = frame2.boosted_time(&b.apply(&q));
        assert!((tau - tau2).abs() < 1e-12);
    }
}
