use std::f64::consts::TAU;

use super::{ObjectSpec, Part, Shape, Viewpoint};
use crate::corpus::GrayImage;
use crate::error::{Error, Result};

type Vec3 = [f64; 3];
type Mat3 = [[f64; 3]; 3];

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn mul(m: &Mat3, v: Vec3) -> Vec3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

fn mul_t(m: &Mat3, v: Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
        m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
        m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
    ]
}

/// Object-to-camera rotation: azimuth about the vertical axis, then elevation
/// about the camera's horizontal axis. The camera looks down −z from +z.
fn rotation(azimuth: f64, elevation: f64) -> Mat3 {
    let (sa, ca) = azimuth.rem_euclid(TAU).sin_cos();
    let (se, ce) = elevation.sin_cos();
    let ry = [[ca, 0.0, sa], [0.0, 1.0, 0.0], [-sa, 0.0, ca]];
    let rx = [[1.0, 0.0, 0.0], [0.0, ce, -se], [0.0, se, ce]];
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = (0..3).map(|k| rx[i][k] * ry[k][j]).sum();
        }
    }
    m
}

/// Screen-space (x, y) half extents and center of a part.
fn projected_bounds(part: &Part, rot: &Mat3) -> ([f64; 2], [f64; 2]) {
    let c = mul(rot, part.center);
    let h = part.half_extents;
    let mut half = [0.0; 2];
    for (axis, out) in half.iter_mut().enumerate() {
        let row = rot[axis];
        *out = match part.shape {
            Shape::Cuboid => (0..3).map(|k| (row[k] * h[k]).abs()).sum(),
            Shape::Ellipsoid => (0..3).map(|k| (row[k] * h[k]).powi(2)).sum::<f64>().sqrt(),
        };
    }
    ([c[0], c[1]], half)
}

/// Nearest-to-camera hit of a +z ray on a part, in object coordinates.
/// Returns the ray parameter and the object-space normal.
fn intersect(part: &Part, origin: Vec3, dir: Vec3) -> Option<(f64, Vec3)> {
    let c = part.center;
    let h = part.half_extents;
    match part.shape {
        Shape::Cuboid => {
            let mut t_enter = f64::NEG_INFINITY;
            let mut t_exit = f64::INFINITY;
            let mut exit_normal = [0.0; 3];
            for k in 0..3 {
                let lo = c[k] - h[k];
                let hi = c[k] + h[k];
                if dir[k].abs() < 1e-12 {
                    if origin[k] < lo || origin[k] > hi {
                        return None;
                    }
                    continue;
                }
                let ta = (lo - origin[k]) / dir[k];
                let tb = (hi - origin[k]) / dir[k];
                let (t0, t1, sign) = if ta < tb { (ta, tb, 1.0) } else { (tb, ta, -1.0) };
                t_enter = t_enter.max(t0);
                if t1 < t_exit {
                    t_exit = t1;
                    exit_normal = [0.0; 3];
                    exit_normal[k] = sign;
                }
            }
            if t_enter <= t_exit && t_exit.is_finite() {
                Some((t_exit, exit_normal))
            } else {
                None
            }
        }
        Shape::Ellipsoid => {
            let q = [
                (origin[0] - c[0]) / h[0],
                (origin[1] - c[1]) / h[1],
                (origin[2] - c[2]) / h[2],
            ];
            let e = [dir[0] / h[0], dir[1] / h[1], dir[2] / h[2]];
            let a = dot(e, e);
            let b = 2.0 * dot(q, e);
            let cc = dot(q, q) - 1.0;
            let disc = b * b - 4.0 * a * cc;
            if disc < 0.0 {
                return None;
            }
            let t = (-b + disc.sqrt()) / (2.0 * a);
            let p = [
                origin[0] + t * dir[0],
                origin[1] + t * dir[1],
                origin[2] + t * dir[2],
            ];
            let n = [
                (p[0] - c[0]) / (h[0] * h[0]),
                (p[1] - c[1]) / (h[1] * h[1]),
                (p[2] - c[2]) / (h[2] * h[2]),
            ];
            let len = dot(n, n).sqrt();
            Some((t, [n[0] / len, n[1] / len, n[2] / len]))
        }
    }
}

/// Orthographic headlight rendering of `obj` from `view`, background 0.
///
/// The object's projected bounding square spans `view.scale` of the frame side
/// and is centered in the frame.
pub fn render_view(obj: &ObjectSpec, view: &Viewpoint, side: usize) -> Result<GrayImage> {
    obj.validate()?;
    if side < 16 {
        return Err(Error::Validation(format!("render side {side} is below 16")));
    }
    if !(view.scale > 0.0 && view.scale <= 1.0) {
        return Err(Error::Validation(format!("scale {} outside (0, 1]", view.scale)));
    }
    let rot = rotation(view.azimuth, view.elevation);
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for part in &obj.parts {
        let (c, h) = projected_bounds(part, &rot);
        xmin = xmin.min(c[0] - h[0]);
        xmax = xmax.max(c[0] + h[0]);
        ymin = ymin.min(c[1] - h[1]);
        ymax = ymax.max(c[1] + h[1]);
    }
    let extent = (xmax - xmin).max(ymax - ymin);
    let pixel = extent / (view.scale * side as f64);
    let (cx, cy) = (0.5 * (xmin + xmax), 0.5 * (ymin + ymax));
    let dir = mul_t(&rot, [0.0, 0.0, 1.0]);
    let half = side as f64 / 2.0;

    let mut pixels = vec![0.0; side * side];
    let mut covered = 0usize;
    for row in 0..side {
        let v = cy - (row as f64 + 0.5 - half) * pixel;
        for col in 0..side {
            let u = cx + (col as f64 + 0.5 - half) * pixel;
            let origin = mul_t(&rot, [u, v, 0.0]);
            let mut best: Option<(f64, f64)> = None;
            for part in &obj.parts {
                if let Some((t, n)) = intersect(part, origin, dir) {
                    if best.is_none_or(|(bt, _)| t > bt) {
                        let shade = mul(&rot, n)[2].max(0.0);
                        best = Some((t, part.albedo * shade));
                    }
                }
            }
            if let Some((_, value)) = best {
                pixels[row * side + col] = value.clamp(0.0, 1.0);
                covered += 1;
            }
        }
    }
    if covered == 0 {
        return Err(Error::Render(format!(
            "object `{}` projects to no pixels at scale {}",
            obj.name, view.scale
        )));
    }
    Ok(GrayImage {
        width: side,
        height: side,
        pixels,
    })
}
