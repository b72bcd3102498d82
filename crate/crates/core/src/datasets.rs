//! Analytic test shapes: the unit sphere and the six-fold bumpy sphere
//! `ρ(φ, θ) = 1 + sin(6θ) sin(6φ) / 5`, both sampled on a Fibonacci lattice.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pointcloud::PointCloud;
use crate::{Point, Vector};

/// Enclosed volume of the bumpy sphere, to the four decimals the reference tables use.
pub const BUMPY_SPHERE_VOLUME: f64 = 4.3153;

/// Enclosed volume of the unit sphere.
pub const UNIT_SPHERE_VOLUME: f64 = 4.0 * PI / 3.0;

/// Surface area of the unit sphere.
pub const UNIT_SPHERE_AREA: f64 = 4.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Sphere,
    Bumpy,
}

/// Radius of the bumpy sphere at polar angle `phi` and azimuth `theta`.
pub fn bumpy_radius(phi: f64, theta: f64) -> f64 {
    1.0 + (6.0 * theta).sin() * (6.0 * phi).sin() / 5.0
}

/// Outward unit normal of the bumpy sphere from the gradient of `r − ρ(φ, θ)`.
pub fn bumpy_normal(phi: f64, theta: f64) -> Vector {
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let r = bumpy_radius(phi, theta);
    let d_phi = 1.2 * (6.0 * theta).sin() * (6.0 * phi).cos();
    let d_theta = 1.2 * (6.0 * theta).cos() * (6.0 * phi).sin();
    let e_r = Vector::new(sp * ct, sp * st, cp);
    let e_phi = Vector::new(cp * ct, cp * st, -sp);
    let e_theta = Vector::new(-st, ct, 0.0);
    (e_r - e_phi * (d_phi / r) - e_theta * (d_theta / (r * sp))).normalize()
}

// Fibonacci lattice angles (phi, theta) for n points; `offset` rotates the lattice in azimuth.
fn fibonacci_angles(n: usize, offset: f64) -> impl Iterator<Item = (f64, f64)> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n).map(move |i| {
        let z = 1.0 - (2 * i + 1) as f64 / n as f64;
        let phi = z.clamp(-1.0, 1.0).acos();
        let theta = (i as f64 * golden + offset).rem_euclid(2.0 * PI);
        (phi, theta)
    })
}

fn azimuth_offset(seed: u64) -> f64 {
    if seed == 0 {
        0.0
    } else {
        ChaCha8Rng::seed_from_u64(seed).random::<f64>() * 2.0 * PI
    }
}

/// Quasi-uniform samples of `shape`; `seed` rotates the lattice (0 = unrotated).
pub fn generate(shape: Shape, n: usize, with_normals: bool, seed: u64) -> PointCloud {
    let offset = azimuth_offset(seed);
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for (phi, theta) in fibonacci_angles(n, offset) {
        let (sp, cp) = phi.sin_cos();
        let (st, ct) = theta.sin_cos();
        let dir = Vector::new(sp * ct, sp * st, cp);
        match shape {
            Shape::Sphere => {
                points.push(Point::from(dir));
                normals.push(dir);
            }
            Shape::Bumpy => {
                points.push(Point::from(dir * bumpy_radius(phi, theta)));
                normals.push(bumpy_normal(phi, theta));
            }
        }
    }
    let tag = match shape {
        Shape::Sphere => format!("sphere-{n}"),
        Shape::Bumpy => format!("bumpy-{n}"),
    };
    PointCloud::new(points, with_normals.then_some(normals), tag)
        .expect("analytic samples are valid")
}

/// Unit sphere with `n` Fibonacci samples.
pub fn sphere(n: usize, with_normals: bool) -> PointCloud {
    generate(Shape::Sphere, n, with_normals, 0)
}

/// Bumpy sphere with `n` Fibonacci samples.
pub fn bumpy_sphere(n: usize, with_normals: bool) -> PointCloud {
    generate(Shape::Bumpy, n, with_normals, 0)
}
