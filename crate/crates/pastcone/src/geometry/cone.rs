use super::{Event, Segment, Worldline};

/// A light cone, identified by its apex and branch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LightCone {
    pub apex: Event,
    pub branch: ConeBranch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConeBranch {
    Past,
    Future,
}

impl LightCone {
    pub fn past_of(apex: Event) -> Self {
        LightCone {
            apex,
            branch: ConeBranch::Past,
        }
    }

    pub fn future_of(apex: Event) -> Self {
        LightCone {
            apex,
            branch: ConeBranch::Future,
        }
    }

    /// Crossing of the cone with a worldline.
    ///
    /// Past branch: the event where the line exits the apex's absolute past
    /// through the cone — the last point of the initial stretch with
    /// `t - t_apex <= -|x - x_apex|`. `None` when the line never reaches the
    /// closed absolute past.
    ///
    /// Future branch: the earliest point of the line in the apex's causal
    /// future, or `None` if the line never gets there.
    pub fn cross_worldline(&self, w: &Worldline) -> Option<Event> {
        match self.branch {
            ConeBranch::Past => past_crossing(&self.apex, w),
            ConeBranch::Future => future_crossing(&self.apex, w),
        }
    }
}

/// Signed causal-distance to the past cone: negative strictly inside the
/// absolute past, zero on the cone, positive outside. Nondecreasing along
/// any future-directed causal curve.
fn g_past(apex: &Event, p: &Event) -> f64 {
    (p.t() - apex.t()) + apex.spatial_distance(p)
}

/// Mirror for the future branch: negative strictly outside the closed
/// absolute future, zero on the cone, positive strictly inside. Also
/// nondecreasing along causal curves.
fn g_future(apex: &Event, p: &Event) -> f64 {
    (p.t() - apex.t()) - apex.spatial_distance(p)
}

fn seg_g(apex: &Event, seg: &Segment, t: f64, future: bool) -> f64 {
    let p = seg.position_at(t);
    if future {
        g_future(apex, &p)
    } else {
        g_past(apex, &p)
    }
}

/// Limit of g at the infinite past end of a segment.
fn g_limit_past_end(apex: &Event, seg: &Segment) -> f64 {
    let u2 = seg.speed2();
    if u2 < 1.0 - 1e-12 {
        return f64::NEG_INFINITY;
    }
    // Lightlike: g(t) -> -(q . u) where q is the offset from the apex at
    // apex time along the segment's extrapolation.
    let q = offset_at_apex_time(apex, seg);
    let qu: f64 = q
        .iter()
        .zip(seg.velocity.iter())
        .map(|(a, b)| a * b)
        .sum();
    -qu
}

fn offset_at_apex_time(apex: &Event, seg: &Segment) -> [f64; 3] {
    let dt = apex.t() - seg.origin.t();
    let mut q = [0.0; 3];
    for i in 0..apex.dim() {
        q[i] = seg.origin.x()[i] + seg.velocity[i] * dt - apex.x()[i];
    }
    q
}

fn past_crossing(apex: &Event, w: &Worldline) -> Option<Event> {
    let segs = w.segments();
    let scale = w
        .vertices()
        .iter()
        .fold(apex.scale_with(&w.vertices()[0]), |s, v| {
            s.max(apex.scale_with(v))
        })
        .max(1.0);
    let tol = 1e-12 * scale;

    let first = &segs[0];
    let g_start = if first.t_start.is_infinite() {
        g_limit_past_end(apex, first)
    } else {
        seg_g(apex, first, first.t_start, false)
    };
    if g_start > tol {
        return None;
    }
    if g_start > 0.0 {
        // Starts on the cone within tolerance: the crossing is the start.
        return Some(first.position_at(first.t_start));
    }

    for seg in &segs {
        let g_end = if seg.t_end.is_infinite() {
            f64::INFINITY
        } else {
            seg_g(apex, seg, seg.t_end, false)
        };
        if g_end > 0.0 {
            return Some(solve_transition(apex, seg, false, scale));
        }
    }
    None
}

fn future_crossing(apex: &Event, w: &Worldline) -> Option<Event> {
    let segs = w.segments();
    let scale = w
        .vertices()
        .iter()
        .fold(apex.scale_with(&w.vertices()[0]), |s, v| {
            s.max(apex.scale_with(v))
        })
        .max(1.0);

    let first = &segs[0];
    let g_start = if first.t_start.is_infinite() {
        f64::NEG_INFINITY
    } else {
        seg_g(apex, first, first.t_start, true)
    };
    if g_start >= 0.0 {
        return Some(first.position_at(first.t_start));
    }

    for seg in &segs {
        let g_end = if seg.t_end.is_infinite() {
            // Timelike tails reach any future cone; a lightlike tail may
            // ride parallel below it forever.
            if seg.speed2() < 1.0 - 1e-12 {
                f64::INFINITY
            } else {
                let q = offset_at_apex_time(apex, seg);
                let qu: f64 = q
                    .iter()
                    .zip(seg.velocity.iter())
                    .map(|(a, b)| a * b)
                    .sum();
                // g_future -> -(|q|^2)/(2 tau) ... sign fixed by qu: limit is
                // -qu - ... for tau -> inf |p| ~ tau + qu so g -> -qu.
                -qu
            }
        } else {
            seg_g(apex, seg, seg.t_end, true)
        };
        if g_end >= 0.0 {
            return Some(solve_transition(apex, seg, true, scale));
        }
    }
    None
}

/// Solve g = 0 within a segment known to bracket the transition.
/// Analytic quadratic first, bisection fallback; bisection converges to the
/// boundary of the initial `g <= 0` region, which handles stretches riding
/// exactly on the cone.
fn solve_transition(apex: &Event, seg: &Segment, future: bool, scale: f64) -> Event {
    let atol = 1e-13 * scale;

    if let Some(t) = analytic_root(apex, seg, future) {
        let lo_ok = seg.t_start.is_infinite() || t >= seg.t_start - atol;
        let hi_ok = seg.t_end.is_infinite() || t <= seg.t_end + atol;
        if lo_ok && hi_ok && seg_g(apex, seg, t, future).abs() <= 1e-9 * scale {
            let t = t.clamp(
                if seg.t_start.is_infinite() {
                    t
                } else {
                    seg.t_start
                },
                if seg.t_end.is_infinite() { t } else { seg.t_end },
            );
            return seg.position_at(t);
        }
    }

    // Establish a finite bracket [lo, hi] with g(lo) <= 0 < g(hi).
    let anchor = if seg.t_start.is_finite() {
        seg.t_start
    } else {
        seg.t_end.min(apex.t()) - 1.0
    };
    let mut lo = anchor;
    if seg_g(apex, seg, lo, future) > 0.0 {
        let mut step = scale.max(1.0);
        let mut found = false;
        for _ in 0..80 {
            let cand = anchor - step;
            if seg_g(apex, seg, cand, future) <= 0.0 {
                lo = cand;
                found = true;
                break;
            }
            step *= 2.0;
        }
        if !found {
            // Riding the cone within rounding; report the anchor.
            return seg.position_at(anchor);
        }
    }
    let mut hi = if seg.t_end.is_finite() {
        seg.t_end
    } else {
        let mut cand = lo.max(apex.t()) + scale.max(1.0);
        let mut step = scale.max(1.0);
        for _ in 0..80 {
            if seg_g(apex, seg, cand, future) > 0.0 {
                break;
            }
            step *= 2.0;
            cand += step;
        }
        cand
    };

    for _ in 0..300 {
        if hi - lo <= atol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = seg_g(apex, seg, mid, future);
        // Past branch: converge to the last point of the g <= 0 stretch.
        // Future branch: converge to the first point with g >= 0.
        let keep_low = if future { g_mid < 0.0 } else { g_mid <= 0.0 };
        if keep_low {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    seg.position_at(if future { hi } else { lo })
}

/// Closed-form root of `(t - t_apex) = -/+ |x(t) - x_apex|` on a linear
/// segment. Returns the past-branch root for `future = false`, the
/// future-branch root otherwise.
fn analytic_root(apex: &Event, seg: &Segment, future: bool) -> Option<f64> {
    let q = offset_at_apex_time(apex, seg);
    let u = seg.velocity;
    let q2: f64 = q.iter().map(|c| c * c).sum();
    let qu: f64 = q.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
    let a = 1.0 - seg.speed2();

    let tau = if a.abs() < 1e-12 {
        // Lightlike segment: the squared equation is linear.
        if qu.abs() < 1e-300 {
            return None; // riding a generator; bisection resolves it
        }
        let tau = -q2 / (2.0 * qu);
        let valid = if future { tau >= 0.0 } else { tau <= 0.0 };
        if !valid {
            return None;
        }
        tau
    } else {
        let disc = (qu * qu + a * q2).sqrt();
        if future {
            if qu > 0.0 {
                (qu + disc) / a
            } else {
                // Rationalized to avoid cancellation.
                -q2 / (qu - disc)
            }
        } else if qu < 0.0 {
            (qu - disc) / a
        } else {
            -q2 / (qu + disc)
        }
    };
    Some(apex.t() + tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_line_crossing() {
        // Apex at the origin, card at rest at x = d: crossing at (-d, d).
        let apex = Event::d1(0.0, 0.0);
        let w = Worldline::at_rest("card", &[3.0]);
        let c = LightCone::past_of(apex).cross_worldline(&w).unwrap();
        assert!((c.t() - (-3.0)).abs() < 1e-12);
        assert!((c.x()[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn photon_crossing_reaches_origin() {
        // Apex (T, T); photon x = -t launched at the origin: crossing (0, 0).
        for exp in 0..=6 {
            let t_det = 10f64.powi(exp);
            let apex = Event::d1(t_det, t_det);
            let w = Worldline::new(
                "photon",
                vec![Event::d1(0.0, 0.0)],
                None,
                Some(vec![-1.0]),
            )
            .unwrap();
            let c = LightCone::past_of(apex).cross_worldline(&w).unwrap();
            assert!(
                c.t().abs() <= 1e-12 * t_det && c.x()[0].abs() <= 1e-12 * t_det,
                "T={t_det}: crossing {c:?}"
            );
        }
    }

    #[test]
    fn ambiguous_line_has_no_crossing() {
        // A short arc entirely spacelike to the apex.
        let apex = Event::d1(0.0, 0.0);
        let w = Worldline::new(
            "arc",
            vec![Event::d1(-0.1, 5.0), Event::d1(0.1, 5.0)],
            None,
            None,
        )
        .unwrap();
        assert!(LightCone::past_of(apex).cross_worldline(&w).is_none());
    }

    #[test]
    fn crossing_lies_on_the_cone() {
        let apex = Event::new(1.3, &[0.4, -0.2]).unwrap();
        let w = Worldline::uniform("probe", 0.0, &[4.0, 2.0], &[-0.3, 0.25]).unwrap();
        let c = LightCone::past_of(apex).cross_worldline(&w).unwrap();
        let g = (c.t() - apex.t()) + apex.spatial_distance(&c);
        assert!(g.abs() < 1e-9, "residual {g}");
    }

    #[test]
    fn moving_line_crossing_matches_hand_solution() {
        // Line x = 0.5 t + 2 vs past cone of origin: t + |0.5 t + 2| = 0
        // => t = -4/3.
        let apex = Event::d1(0.0, 0.0);
        let w = Worldline::uniform("probe", 0.0, &[2.0], &[0.5]).unwrap();
        let c = LightCone::past_of(apex).cross_worldline(&w).unwrap();
        assert!((c.t() - (-4.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn future_crossing_static_line() {
        // Detector event (0, -1); combiner at rest at x = 0: first causal
        // contact at t = 1.
        let apex = Event::d1(0.0, -1.0);
        let w = Worldline::at_rest("combiner", &[0.0]);
        let c = LightCone::future_of(apex).cross_worldline(&w).unwrap();
        assert!((c.t() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn future_crossing_none_for_parallel_photon() {
        // Photon racing away parallel to the cone never enters the future.
        let apex = Event::d1(0.0, 0.0);
        let w = Worldline::uniform("photon", 0.0, &[1.0], &[1.0]).unwrap();
        assert!(LightCone::future_of(apex).cross_worldline(&w).is_none());
    }

    #[test]
    fn own_line_crossing_is_the_apex() {
        let apex = Event::d1(2.0, 1.0);
        let w = Worldline::at_rest("card", &[1.0]);
        let c = LightCone::past_of(apex).cross_worldline(&w).unwrap();
        assert!((c.t() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn crossing_commutes_with_boost() {
        let apex = Event::d1(1.0, 0.5);
        let w = Worldline::uniform("probe", 0.0, &[3.0], &[-0.4]).unwrap();
        let c = LightCone::past_of(apex).cross_worldline(&w).unwrap();

        let b = super::super::Boost::along_x(0.7, 1).unwrap();
        let cb = LightCone::past_of(b.apply(&apex))
            .cross_worldline(&w.boosted(&b))
            .unwrap();
        let expect = b.apply(&c);
        assert!((cb.t() - expect.t()).abs() < 1e-9);
        assert!((cb.x()[0] - expect.x()[0]).abs() < 1e-9);
    }
}
