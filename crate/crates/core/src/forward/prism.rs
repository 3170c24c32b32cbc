//! Closed-form volume integrals over right rectangular prisms.
//!
//! All functions take the observer position and the prism extents in the
//! same right-handed frame (x east, y north, z down) and integrate over the
//! prism with corner-relative coordinates `u = x' - x`, `v = y' - y`,
//! `w = z' - z`.

/// `[[x0, x1], [y0, y1], [z0, z1]]`
pub type Prism = [[f64; 2]; 3];

/// `ln(a + r)` with `r = |(a, b, c)|`, evaluated without cancellation when
/// `a < 0`. Returns `None` on the singular ray `b = c = 0, a <= 0`.
#[inline]
fn ln_plus_r(a: f64, r: f64, perp2: f64) -> Option<f64> {
    if a >= 0.0 {
        Some((a + r).ln())
    } else if perp2 > 0.0 {
        Some(perp2.ln() - (r - a).ln())
    } else {
        None
    }
}

/// `atan(num / den)` with the removable `0/0` case mapped to zero.
#[inline]
fn atan_ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        // limit from the positive side, i.e. an observer at or above a top face
        std::f64::consts::FRAC_PI_2.copysign(num)
    } else {
        (num / den).atan()
    }
}

#[inline]
fn corner_sum(obs: [f64; 3], prism: &Prism, mut f: impl FnMut(f64, f64, f64) -> f64) -> f64 {
    let mut total = 0.0;
    for (a, su) in [(prism[0][0], -1.0), (prism[0][1], 1.0)] {
        for (b, sv) in [(prism[1][0], -1.0), (prism[1][1], 1.0)] {
            for (c, sw) in [(prism[2][0], -1.0), (prism[2][1], 1.0)] {
                total += su * sv * sw * f(a - obs[0], b - obs[1], c - obs[2]);
            }
        }
    }
    total
}

pub fn is_inside(obs: [f64; 3], prism: &Prism) -> bool {
    (0..3).all(|a| obs[a] > prism[a][0] && obs[a] < prism[a][1])
}

/// `∫ w / R^3 dV`: the downward attraction per unit `G * rho`, in metres.
pub fn vertical_attraction(obs: [f64; 3], prism: &Prism) -> f64 {
    -corner_sum(obs, prism, |u, v, w| {
        let r = (u * u + v * v + w * w).sqrt();
        let mut t = 0.0;
        if u != 0.0 {
            t += u * ln_plus_r(v, r, u * u + w * w).unwrap_or(0.0);
        }
        if v != 0.0 {
            t += v * ln_plus_r(u, r, v * v + w * w).unwrap_or(0.0);
        }
        if w != 0.0 {
            t -= w * atan_ratio(u * v, w * r);
        }
        t
    })
}

/// Hessian of `∫ dV / R` with respect to the observer position
/// (dimensionless). Returns `None` when the observer sits on a prism edge
/// or corner where the field is singular.
pub fn potential_hessian(obs: [f64; 3], prism: &Prism) -> Option<[[f64; 3]; 3]> {
    let mut singular = false;
    let mut h = [[0.0; 3]; 3];
    h[0][0] = corner_sum(obs, prism, |u, v, w| {
        let r = (u * u + v * v + w * w).sqrt();
        -atan_ratio(v * w, u * r)
    });
    h[1][1] = corner_sum(obs, prism, |u, v, w| {
        let r = (u * u + v * v + w * w).sqrt();
        -atan_ratio(u * w, v * r)
    });
    h[2][2] = corner_sum(obs, prism, |u, v, w| {
        let r = (u * u + v * v + w * w).sqrt();
        -atan_ratio(u * v, w * r)
    });
    let mut off = |pick: fn(f64, f64, f64) -> (f64, f64)| {
        corner_sum(obs, prism, |u, v, w| {
            let r = (u * u + v * v + w * w).sqrt();
            let (a, perp2) = pick(u, v, w);
            ln_plus_r(a, r, perp2).unwrap_or_else(|| {
                singular = true;
                0.0
            })
        })
    };
    let xy = off(|u, v, w| (w, u * u + v * v));
    let xz = off(|u, v, w| (v, u * u + w * w));
    let yz = off(|u, v, w| (u, v * v + w * w));
    h[0][1] = xy;
    h[1][0] = xy;
    h[0][2] = xz;
    h[2][0] = xz;
    h[1][2] = yz;
    h[2][1] = yz;
    if singular || h.iter().flatten().any(|v| !v.is_finite()) {
        None
    } else {
        Some(h)
    }
}
