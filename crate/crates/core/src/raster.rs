//! Binary silhouettes rendered orthographically from the 20 vertices of a
//! regular dodecahedron.

use crate::error::{Error, Result};
use crate::geometry::{Mesh, Point3};

pub const VIEW_COUNT: usize = 20;
pub const DEFAULT_RESOLUTION: u32 = 256;
pub const MIN_RESOLUTION: u32 = 8;

/// Half-width of the square camera window: the unit sphere plus a 5% margin.
pub const FRUSTUM_HALF_WIDTH: f64 = 1.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Viewpoint {
    pub index: usize,
    /// Unit vector from the object center towards the camera.
    pub view_direction: [f64; 3],
    pub up: [f64; 3],
}

impl Viewpoint {
    pub fn right(&self) -> [f64; 3] {
        cross(self.up, self.view_direction)
    }

    /// Image-plane coordinates `(u, v)` of a point, `v` pointing up.
    pub fn project(&self, p: Point3) -> (f64, f64) {
        (dot(p, self.right()), dot(p, self.up))
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn unit(a: [f64; 3]) -> [f64; 3] {
    let n = dot(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Up vector for a camera direction: world +z projected onto the image plane,
/// or world +y when the camera looks almost straight along z.
fn up_for(dir: [f64; 3]) -> [f64; 3] {
    let reference = if dir[2].abs() > 0.999 {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let side = unit(cross(reference, dir));
    // `side` rotated a quarter turn about `dir`
    unit(cross(dir, side))
}

/// The dodecahedron vertices in this order: the eight cube corners
/// `(±1, ±1, ±1)` (x slowest, minus before plus), then `(0, ±1/φ, ±φ)`,
/// `(±1/φ, ±φ, 0)` and `(±φ, 0, ±1/φ)`, each block in the same sign order.
pub fn dodecahedron_viewpoints() -> Vec<Viewpoint> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let inv = 1.0 / phi;
    let signs = [-1.0, 1.0];
    let mut dirs = Vec::with_capacity(VIEW_COUNT);
    for sx in signs {
        for sy in signs {
            for sz in signs {
                dirs.push([sx, sy, sz]);
            }
        }
    }
    for a in signs {
        for b in signs {
            dirs.push([0.0, a * inv, b * phi]);
        }
    }
    for a in signs {
        for b in signs {
            dirs.push([a * inv, b * phi, 0.0]);
        }
    }
    for a in signs {
        for b in signs {
            dirs.push([a * phi, 0.0, b * inv]);
        }
    }
    dirs.into_iter()
        .enumerate()
        .map(|(index, d)| {
            let view_direction = unit(d);
            Viewpoint {
                index,
                view_direction,
                up: up_for(view_direction),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SilhouetteImage {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl SilhouetteImage {
    pub fn blank(width: usize, height: usize) -> Self {
        SilhouetteImage {
            width,
            height,
            bits: vec![0; width * height],
        }
    }

    /// Builds an image from row-major occupancy values; non-zero means set.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut img = Self::blank(width, height);
        for y in 0..height {
            for x in 0..width {
                img.bits[y * width + x] = f(x, y) as u8;
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x] != 0
    }

    /// Row-major occupancy, one byte (0 or 1) per pixel.
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    pub fn is_blank(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    pub fn or(&self, other: &SilhouetteImage) -> SilhouetteImage {
        assert_eq!((self.width, self.height), (other.width, other.height));
        SilhouetteImage {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| a | b)
                .collect(),
        }
    }

    pub fn mirrored_horizontally(&self) -> SilhouetteImage {
        SilhouetteImage::from_fn(self.width, self.height, |x, y| {
            self.get(self.width - 1 - x, y)
        })
    }

    /// Binary PGM (P5), set pixels as 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.bits.iter().map(|&b| if b != 0 { 255 } else { 0 }));
        out
    }
}

/// Edge function of `p` against the directed edge `a -> b`.
fn edge(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

/// Top or left edge of a triangle with positive `edge(v0, v1, v2)` in y-down
/// pixel coordinates.
fn is_top_left(a: (f64, f64), b: (f64, f64)) -> bool {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    (dy == 0.0 && dx > 0.0) || dy < 0.0
}

fn fill_triangle(img: &mut SilhouetteImage, mut v: [(f64, f64); 3]) {
    let area = edge(v[0], v[1], v[2]);
    if area == 0.0 || !area.is_finite() {
        return;
    }
    if area < 0.0 {
        v.swap(1, 2);
    }
    let edges = [(v[1], v[2]), (v[2], v[0]), (v[0], v[1])];
    let bias: [bool; 3] = edges.map(|(a, b)| is_top_left(a, b));

    let min_x = v.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let max_x = v.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let min_y = v.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max_y = v.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let clamp = |lo: f64, hi: f64, n: usize| -> Option<(usize, usize)> {
        let lo = (lo - 0.5).ceil().max(0.0);
        let hi = (hi - 0.5).floor().min(n as f64 - 1.0);
        (lo <= hi).then_some((lo as usize, hi as usize))
    };
    let (Some((x0, x1)), Some((y0, y1))) = (
        clamp(min_x, max_x, img.width),
        clamp(min_y, max_y, img.height),
    ) else {
        return;
    };

    for y in y0..=y1 {
        let py = y as f64 + 0.5;
        let row = y * img.width;
        for x in x0..=x1 {
            let p = (x as f64 + 0.5, py);
            let inside = edges.iter().zip(bias).all(|(&(a, b), tl)| {
                let w = edge(a, b, p);
                w > 0.0 || (w == 0.0 && tl)
            });
            if inside {
                img.bits[row + x] = 1;
            }
        }
    }
}

/// Orthographic silhouette of `part` seen from `vp`. Pixels whose centers
/// fall inside any projected triangle are set.
pub fn render_silhouette(part: &Mesh, vp: &Viewpoint, resolution: u32) -> Result<SilhouetteImage> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::Resolution(resolution));
    }
    let n = resolution as usize;
    let mut img = SilhouetteImage::blank(n, n);
    if part.is_empty() {
        return Ok(img);
    }
    let px_per_unit = n as f64 / (2.0 * FRUSTUM_HALF_WIDTH);
    let to_pixel = |p: Point3| {
        let (u, v) = vp.project(p);
        (
            (u + FRUSTUM_HALF_WIDTH) * px_per_unit,
            (FRUSTUM_HALF_WIDTH - v) * px_per_unit,
        )
    };
    let projected: Vec<(f64, f64)> = part.vertices().iter().map(|&p| to_pixel(p)).collect();
    for t in part.triangles() {
        fill_triangle(
            &mut img,
            [
                projected[t[0] as usize],
                projected[t[1] as usize],
                projected[t[2] as usize],
            ],
        );
    }
    Ok(img)
}

/// Renders every part from every viewpoint, views in viewpoint order.
pub fn render_all(
    parts: &[(String, Mesh)],
    resolution: u32,
) -> Result<Vec<(String, Vec<SilhouetteImage>)>> {
    let views = dodecahedron_viewpoints();
    parts
        .iter()
        .map(|(label, mesh)| {
            let images = views
                .iter()
                .map(|vp| render_silhouette(mesh, vp, resolution))
                .collect::<Result<Vec<_>>>()?;
            Ok((label.clone(), images))
        })
        .collect()
}
