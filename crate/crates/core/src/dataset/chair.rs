//! Procedural chairs. World is z-up, the seat faces +y and the backrest
//! sits at −y. Every chair starts with the eight corners of a fixed
//! envelope as unreferenced vertices, so all chairs share one bounding
//! sphere and therefore one normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{chair_labels, MeshBuilder, PartLabeledMesh, Point3};

pub const ENVELOPE_MIN: Point3 = [-0.4, -0.4, 0.0];
pub const ENVELOPE_MAX: Point3 = [0.4, 0.4, 1.2];

pub const SEAT_TOP: f64 = 0.46;
pub const SEAT_HALF_WIDTH: f64 = 0.22;
pub const LEG_THICKNESS: (f64, f64) = (0.02, 0.08);
pub const BACK_HEIGHT: (f64, f64) = (0.3, 0.6);
pub const SEAT_THICKNESS: (f64, f64) = (0.03, 0.08);
pub const BARS: (u8, u8) = (2, 6);

const W: f64 = SEAT_HALF_WIDTH;
const PANEL_DEPTH: f64 = 0.04;
const ROUND_SIDES: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegStyle {
    FourStraight,
    FourSplayed,
    Sled,
    Swivel5,
}

impl LegStyle {
    pub const ALL: [LegStyle; 4] = [
        LegStyle::FourStraight,
        LegStyle::FourSplayed,
        LegStyle::Sled,
        LegStyle::Swivel5,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackStyle {
    SolidPanel,
    NBars(u8),
    RoundTopPanel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeatShape {
    Square,
    Round,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Armrests {
    None,
    Box,
    Loop,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChairParams {
    pub leg_style: LegStyle,
    pub leg_thickness: f64,
    pub back_style: BackStyle,
    pub back_height: f64,
    pub seat_shape: SeatShape,
    pub seat_thickness: f64,
    pub armrests: Armrests,
    /// Seed these parameters were drawn from; 0 for hand-written ones.
    #[serde(default)]
    pub seed: u64,
}

impl Default for ChairParams {
    fn default() -> Self {
        ChairParams {
            leg_style: LegStyle::FourStraight,
            leg_thickness: 0.04,
            back_style: BackStyle::SolidPanel,
            back_height: 0.45,
            seat_shape: SeatShape::Square,
            seat_thickness: 0.05,
            armrests: Armrests::None,
            seed: 0,
        }
    }
}

fn check_range(name: &str, v: f64, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo..=hi).contains(&v) {
        return Err(Error::Param(format!("{name} = {v} outside [{lo}, {hi}]")));
    }
    Ok(())
}

impl ChairParams {
    pub fn validate(&self) -> Result<()> {
        check_range("leg_thickness", self.leg_thickness, LEG_THICKNESS)?;
        check_range("back_height", self.back_height, BACK_HEIGHT)?;
        check_range("seat_thickness", self.seat_thickness, SEAT_THICKNESS)?;
        if let BackStyle::NBars(n) = self.back_style {
            if !(BARS.0..=BARS.1).contains(&n) {
                return Err(Error::Param(format!(
                    "n_bars = {n} outside [{}, {}]",
                    BARS.0, BARS.1
                )));
            }
        }
        Ok(())
    }
}

struct Builder {
    b: MeshBuilder,
}

impl Builder {
    /// Hexahedron from a bottom and a top quad, both listed in the same
    /// rotational order.
    fn hexahedron(&mut self, bottom: [Point3; 4], top: [Point3; 4], label: u16) {
        let lo = bottom.map(|p| self.b.push_vertex(p));
        let hi = top.map(|p| self.b.push_vertex(p));
        self.b.push_polygon(&[lo[0], lo[3], lo[2], lo[1]], label);
        self.b.push_polygon(&hi, label);
        for k in 0..4 {
            let n = (k + 1) % 4;
            self.b.push_polygon(&[lo[k], lo[n], hi[n], hi[k]], label);
        }
    }

    fn cuboid(&mut self, min: Point3, max: Point3, label: u16) {
        let quad = |z: f64| {
            [
                [min[0], min[1], z],
                [max[0], min[1], z],
                [max[0], max[1], z],
                [min[0], max[1], z],
            ]
        };
        self.hexahedron(quad(min[2]), quad(max[2]), label);
    }

    /// Square-section bar from `a` to `b`. The section lies in the plane of
    /// the two axes along which the bar extends least.
    fn strut(&mut self, a: Point3, b: Point3, half: f64, label: u16) {
        let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let axis = (0..3)
            .max_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs()))
            .unwrap();
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        let section = |c: Point3| {
            [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)].map(|(su, sv)| {
                let mut p = c;
                p[u] += su * half;
                p[v] += sv * half;
                p
            })
        };
        self.hexahedron(section(a), section(b), label);
    }

    /// Extrudes a convex polygon given in the (x, z) plane along y.
    fn prism_y(&mut self, outline: &[(f64, f64)], y0: f64, y1: f64, label: u16) {
        let front: Vec<u32> = outline
            .iter()
            .map(|&(x, z)| self.b.push_vertex([x, y0, z]))
            .collect();
        let back: Vec<u32> = outline
            .iter()
            .map(|&(x, z)| self.b.push_vertex([x, y1, z]))
            .collect();
        self.b.push_polygon(&front, label);
        self.b
            .push_polygon(&back.iter().rev().copied().collect::<Vec<_>>(), label);
        self.side_walls(&front, &back, label);
    }

    /// Extrudes a convex polygon given in the (x, y) plane along z.
    fn prism_z(&mut self, outline: &[(f64, f64)], z0: f64, z1: f64, label: u16) {
        let bottom: Vec<u32> = outline
            .iter()
            .map(|&(x, y)| self.b.push_vertex([x, y, z0]))
            .collect();
        let top: Vec<u32> = outline
            .iter()
            .map(|&(x, y)| self.b.push_vertex([x, y, z1]))
            .collect();
        self.b
            .push_polygon(&bottom.iter().rev().copied().collect::<Vec<_>>(), label);
        self.b.push_polygon(&top, label);
        self.side_walls(&bottom, &top, label);
    }

    fn side_walls(&mut self, a: &[u32], b: &[u32], label: u16) {
        for k in 0..a.len() {
            let n = (k + 1) % a.len();
            self.b.push_polygon(&[a[k], a[n], b[n], b[k]], label);
        }
    }
}

fn circle(cx: f64, cy: f64, r: f64, sides: usize) -> Vec<(f64, f64)> {
    (0..sides)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / sides as f64;
            (cx + r * t.cos(), cy + r * t.sin())
        })
        .collect()
}

fn seat(g: &mut Builder, p: &ChairParams, label: u16) {
    let z0 = SEAT_TOP - p.seat_thickness;
    match p.seat_shape {
        SeatShape::Square => g.cuboid([-W, -W, z0], [W, W, SEAT_TOP], label),
        SeatShape::Round => g.prism_z(&circle(0.0, 0.0, W, ROUND_SIDES), z0, SEAT_TOP, label),
    }
}

fn legs(g: &mut Builder, p: &ChairParams, label: u16) {
    let t = p.leg_thickness;
    let h = t / 2.0;
    let under = SEAT_TOP - p.seat_thickness;
    let corners = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
    match p.leg_style {
        LegStyle::FourStraight => {
            let c = W - h - 0.01;
            for (sx, sy) in corners {
                g.cuboid(
                    [sx * c - h, sy * c - h, 0.0],
                    [sx * c + h, sy * c + h, under],
                    label,
                );
            }
        }
        LegStyle::FourSplayed => {
            let top = W - h - 0.01;
            let foot = W + 0.06;
            for (sx, sy) in corners {
                g.strut(
                    [sx * foot, sy * foot, 0.0],
                    [sx * top, sy * top, under],
                    h,
                    label,
                );
            }
        }
        LegStyle::Sled => {
            let x = W - h - 0.01;
            let reach = W + 0.05;
            for sx in [-1.0, 1.0] {
                g.cuboid([sx * x - h, -reach, 0.0], [sx * x + h, reach, t], label);
                for sy in [-1.0, 1.0] {
                    let y = sy * (W - h - 0.01);
                    g.cuboid([sx * x - h, y - h, t], [sx * x + h, y + h, under], label);
                }
            }
        }
        LegStyle::Swivel5 => {
            let hub = 0.08;
            let caster = 0.05;
            g.prism_z(&circle(0.0, 0.0, t, 12), hub, under, label);
            for k in 0..5 {
                let a = std::f64::consts::TAU * k as f64 / 5.0 + std::f64::consts::FRAC_PI_2;
                let (c, s) = (a.cos(), a.sin());
                let end = [0.3 * c, 0.3 * s, caster + 0.015];
                g.strut([0.0, 0.0, hub], end, 0.015, label);
                g.cuboid(
                    [end[0] - 0.02, end[1] - 0.02, 0.0],
                    [end[0] + 0.02, end[1] + 0.02, caster],
                    label,
                );
            }
        }
    }
}

fn backrest(g: &mut Builder, p: &ChairParams, label: u16) {
    let (y0, y1) = (-W, -W + PANEL_DEPTH);
    let (z0, z1) = (SEAT_TOP, SEAT_TOP + p.back_height);
    match p.back_style {
        BackStyle::SolidPanel => g.cuboid([-W, y0, z0], [W, y1, z1], label),
        BackStyle::NBars(n) => {
            let post = 0.04;
            let rail = 0.05;
            let bar = 0.025;
            g.cuboid([-W, y0, z0], [-W + post, y1, z1], label);
            g.cuboid([W - post, y0, z0], [W, y1, z1], label);
            g.cuboid([-W + post, y0, z1 - rail], [W - post, y1, z1], label);
            let span = 2.0 * (W - post);
            for k in 1..=n {
                let x = -W + post + span * k as f64 / (n as f64 + 1.0);
                g.cuboid(
                    [x - bar / 2.0, y0 + 0.005, z0],
                    [x + bar / 2.0, y1 - 0.005, z1 - rail],
                    label,
                );
            }
        }
        BackStyle::RoundTopPanel => {
            let zc = z1 - W;
            let mut outline = vec![(-W, z0), (W, z0)];
            outline.extend((0..=ROUND_SIDES / 2).map(|k| {
                let a = std::f64::consts::PI * k as f64 / (ROUND_SIDES / 2) as f64;
                (W * a.cos(), zc + W * a.sin())
            }));
            g.prism_y(&outline, y0, y1, label);
        }
    }
}

fn armrests(g: &mut Builder, p: &ChairParams, label: u16) {
    let z = SEAT_TOP + 0.22;
    let rest = 0.025;
    for sx in [-1.0, 1.0] {
        let x = sx * (W + 0.03);
        match p.armrests {
            Armrests::None => {}
            Armrests::Box => {
                g.cuboid(
                    [x - 0.03, W - 0.08, SEAT_TOP - 0.02],
                    [x + 0.03, W - 0.02, z],
                    label,
                );
                g.cuboid([x - 0.03, -W, z], [x + 0.03, W, z + rest], label);
            }
            Armrests::Loop => {
                for y in [W - 0.04, -W + PANEL_DEPTH + 0.02] {
                    g.strut([x, y, SEAT_TOP - 0.02], [x, y, z], 0.012, label);
                }
                g.strut([x, -W, z + 0.012], [x, W, z + 0.012], 0.015, label);
            }
        }
    }
}

/// Assembles the chair described by `p`. Deterministic: identical params
/// give bit-identical meshes.
pub fn generate_chair(p: &ChairParams) -> Result<PartLabeledMesh> {
    p.validate()?;
    let mut g = Builder {
        b: MeshBuilder::new(chair_labels()),
    };
    for i in 0..8 {
        g.b.push_vertex([
            if i & 1 == 0 {
                ENVELOPE_MIN[0]
            } else {
                ENVELOPE_MAX[0]
            },
            if i & 2 == 0 {
                ENVELOPE_MIN[1]
            } else {
                ENVELOPE_MAX[1]
            },
            if i & 4 == 0 {
                ENVELOPE_MIN[2]
            } else {
                ENVELOPE_MAX[2]
            },
        ]);
    }
    let label = |name: &str| g.b.label_index(name);
    let (back, seat_l, arms, legs_l) = (
        label("backrest")?,
        label("seat")?,
        label("armrests")?,
        label("legs")?,
    );
    backrest(&mut g, p, back);
    seat(&mut g, p, seat_l);
    armrests(&mut g, p, arms);
    legs(&mut g, p, legs_l);

    let eps = 1e-12;
    if let Some(v) =
        g.b.vertices()
            .iter()
            .find(|v| (0..3).any(|k| v[k] < ENVELOPE_MIN[k] - eps || v[k] > ENVELOPE_MAX[k] + eps))
    {
        return Err(Error::Param(format!(
            "chair geometry leaves the envelope at {v:?}"
        )));
    }
    g.b.build()
}
