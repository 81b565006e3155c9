//! Cut-cell rasterization of an offset domain.
//!
//! The mask is the epsilon-inward offset of the domain minus the puncture
//! disks of the current exhaustion stage. Classification runs scanline
//! parity fills against offset polylines (circles go through closed
//! forms); the fractional legs of boundary-adjacent cells are then
//! refined against the true geometry to 1e-10.

use crate::domain::{BoundaryCurve, ComponentRole, ComponentShape, DomainGeometry};
use num_complex::Complex64;
use std::f64::consts::PI;

use super::PdeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Exterior,
    Interior,
    BoundaryAdjacent,
}

/// What a cut leg lands on, with the data needed for Dirichlet values.
#[derive(Debug, Clone, Copy)]
pub enum CutSource {
    /// True boundary component: carries the domain-signed curvature at
    /// the nearest boundary point.
    Component { index: usize, curvature: f64 },
    Puncture { index: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct CutLeg {
    /// Fraction of h from the cell centre to the boundary, in (0, 1].
    pub frac: f64,
    pub point: Complex64,
    pub source: CutSource,
}

/// A leg from a cell toward one of its four neighbours.
#[derive(Debug, Clone, Copy)]
pub enum Leg {
    Unknown(u32),
    Cut(u32),
}

/// Directions are indexed E, W, N, S.
pub const DIRS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

pub struct Grid {
    pub origin: Complex64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub epsilon: f64,
    pub puncture_radii: Vec<f64>,
    pub kind: Vec<CellKind>,
    /// Lattice cell -> unknown index, or -1.
    pub unknown_of: Vec<i32>,
    /// Unknown -> lattice coordinates.
    pub cell_of: Vec<(u32, u32)>,
    /// Per-unknown legs, E/W/N/S.
    pub legs: Vec<[Leg; 4]>,
    pub cuts: Vec<CutLeg>,
}

impl Grid {
    pub fn n_unknowns(&self) -> usize {
        self.cell_of.len()
    }

    pub fn point(&self, i: usize, j: usize) -> Complex64 {
        self.origin + Complex64::new(i as f64 * self.h, j as f64 * self.h)
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn interior_count(&self) -> usize {
        self.kind.iter().filter(|k| **k == CellKind::Interior).count()
    }
}

enum LoopShape {
    Circle { center: Complex64, radius: f64 },
    Poly { pts: Vec<Complex64>, params: Vec<f64> },
}

struct OffsetLoop {
    shape: LoopShape,
    /// Cells must be inside (outer component) or outside (inner
    /// components and punctures) this loop.
    keep_inside: bool,
    source: LoopSource,
}

#[derive(Clone, Copy)]
enum LoopSource {
    Component(usize),
    Puncture(usize),
}

fn offset_polyline(
    curve: &BoundaryCurve,
    role: ComponentRole,
    epsilon: f64,
) -> (Vec<Complex64>, Vec<f64>) {
    let n = (64 * curve.max_freq()).max(4096);
    let mut pts = Vec::with_capacity(n);
    let mut params = Vec::with_capacity(n);
    let sign = match role {
        ComponentRole::Outer => 1.0,
        ComponentRole::Inner => -1.0,
    };
    for k in 0..n {
        let t = 2.0 * PI * k as f64 / n as f64;
        // Domain-inward offset: into the enclosed region for the outer
        // component, away from it for inner ones.
        pts.push(curve.eval(t) + sign * epsilon * curve.inward_normal(t));
        params.push(t);
    }
    (pts, params)
}

struct ScanTable {
    /// Per lattice row: sorted crossing abscissas (as fractional lattice
    /// coordinates) of one loop.
    rows: Vec<Vec<f64>>,
    cols: Vec<Vec<f64>>,
    /// Matching polyline segment indices, for seeding refinement.
    row_segs: Vec<Vec<usize>>,
    col_segs: Vec<Vec<usize>>,
}

fn scan_polyline(pts: &[Complex64], origin: Complex64, h: f64, nx: usize, ny: usize) -> ScanTable {
    let mut table = ScanTable {
        rows: vec![Vec::new(); ny],
        cols: vec![Vec::new(); nx],
        row_segs: vec![Vec::new(); ny],
        col_segs: vec![Vec::new(); nx],
    };
    let n = pts.len();
    for s in 0..n {
        let a = pts[s];
        let b = pts[(s + 1) % n];
        // Rows: half-open rule on y.
        let (ya, yb) = ((a.im - origin.im) / h, (b.im - origin.im) / h);
        let (j_lo, j_hi) = if ya < yb { (ya, yb) } else { (yb, ya) };
        let j0 = j_lo.ceil().max(0.0) as usize;
        let j1 = (j_hi.floor().min(ny as f64 - 1.0) + 1.0) as usize;
        for j in j0..j1.min(ny) {
            let y = j as f64;
            let lower = ya <= y;
            let upper = yb <= y;
            if lower != upper {
                let x = (a.re - origin.re) / h + (y - ya) * (b.re - a.re) / h / (yb - ya);
                table.rows[j].push(x);
                table.row_segs[j].push(s);
            }
        }
        // Columns.
        let (xa, xb) = ((a.re - origin.re) / h, (b.re - origin.re) / h);
        let (i_lo, i_hi) = if xa < xb { (xa, xb) } else { (xb, xa) };
        let i0 = i_lo.ceil().max(0.0) as usize;
        let i1 = (i_hi.floor().min(nx as f64 - 1.0) + 1.0) as usize;
        for i in i0..i1.min(nx) {
            let x = i as f64;
            let lower = xa <= x;
            let upper = xb <= x;
            if lower != upper {
                let y = (a.im - origin.im) / h + (x - xa) * (b.im - a.im) / h / (xb - xa);
                table.cols[i].push(y);
                table.col_segs[i].push(x_sort_key(s));
            }
        }
    }
    // Sort crossings together with their segment tags.
    for j in 0..ny {
        let mut pairs: Vec<(f64, usize)> =
            table.rows[j].iter().copied().zip(table.row_segs[j].iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        table.rows[j] = pairs.iter().map(|p| p.0).collect();
        table.row_segs[j] = pairs.iter().map(|p| p.1).collect();
    }
    for i in 0..nx {
        let mut pairs: Vec<(f64, usize)> =
            table.cols[i].iter().copied().zip(table.col_segs[i].iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        table.cols[i] = pairs.iter().map(|p| p.0).collect();
        table.col_segs[i] = pairs.iter().map(|p| p.1).collect();
    }
    table
}

fn x_sort_key(s: usize) -> usize {
    s
}

/// Options for one rasterization stage.
#[derive(Debug, Clone)]
pub struct RasterOptions {
    pub epsilon: f64,
    /// Radius of the disk carved around each puncture.
    pub puncture_radius: f64,
}

/// Build the cut-cell mask of the offset domain.
pub fn rasterize(
    geo: &DomainGeometry,
    h: f64,
    opts: &RasterOptions,
) -> Result<Grid, PdeError> {
    let epsilon = opts.epsilon;
    if h <= 0.0 || !h.is_finite() {
        return Err(PdeError::GridTooCoarse("spacing must be positive"));
    }
    // The offset band must span a couple of cells for the cut stencils
    // to see the Dirichlet data.
    if epsilon > 0.0 && h > epsilon / 2.5 {
        return Err(PdeError::GridTooCoarse("need epsilon >= 2.5 h"));
    }
    if epsilon > 0.0 {
        let reach = geo.reach_estimate();
        if epsilon >= reach {
            return Err(PdeError::EpsilonBeyondReach { epsilon, reach });
        }
    }
    if !geo.punctures.is_empty() {
        if opts.puncture_radius < 3.0 * h {
            return Err(PdeError::GridTooCoarse("puncture radius below 3h"));
        }
    }

    // Lattice: fixed across stages (independent of epsilon).
    let margin = 2.5 * h;
    let ox = geo.bbox_min.re - margin;
    let oy = geo.bbox_min.im - margin;
    let nx = ((geo.bbox_max.re - ox + margin) / h).ceil() as usize + 2;
    let ny = ((geo.bbox_max.im - oy + margin) / h).ceil() as usize + 2;
    let origin = Complex64::new(ox, oy);

    // Offset loops.
    let mut loops: Vec<OffsetLoop> = Vec::new();
    for (ci, comp) in geo.components.iter().enumerate() {
        let keep_inside = comp.role == ComponentRole::Outer;
        let shape = match &comp.shape {
            ComponentShape::Circle { center, radius } => {
                let r = match comp.role {
                    ComponentRole::Outer => radius - epsilon,
                    ComponentRole::Inner => radius + epsilon,
                };
                LoopShape::Circle { center: *center, radius: r }
            }
            ComponentShape::Trig(curve) => {
                let (pts, params) = offset_polyline(curve, comp.role, epsilon);
                LoopShape::Poly { pts, params }
            }
        };
        loops.push(OffsetLoop { shape, keep_inside, source: LoopSource::Component(ci) });
    }
    for (pi, p) in geo.punctures.iter().enumerate() {
        loops.push(OffsetLoop {
            shape: LoopShape::Circle { center: p.point, radius: opts.puncture_radius },
            keep_inside: false,
            source: LoopSource::Puncture(pi),
        });
    }

    // Membership masks per loop, then the conjunction.
    let mut inside = vec![true; nx * ny];
    let mut tables: Vec<Option<ScanTable>> = Vec::with_capacity(loops.len());
    for lp in &loops {
        match &lp.shape {
            LoopShape::Circle { center, radius } => {
                tables.push(None);
                for j in 0..ny {
                    for i in 0..nx {
                        let z = origin + Complex64::new(i as f64 * h, j as f64 * h);
                        let member = (z - center).norm() < *radius;
                        if member != lp.keep_inside {
                            inside[j * nx + i] = false;
                        }
                    }
                }
            }
            LoopShape::Poly { pts, .. } => {
                let table = scan_polyline(pts, origin, h, nx, ny);
                for j in 0..ny {
                    let xs = &table.rows[j];
                    let mut k = 0usize;
                    let mut parity = false;
                    for i in 0..nx {
                        while k < xs.len() && xs[k] < i as f64 {
                            parity = !parity;
                            k += 1;
                        }
                        if parity != lp.keep_inside {
                            inside[j * nx + i] = false;
                        }
                    }
                }
                tables.push(Some(table));
            }
        }
    }

    // Classify cells and collect unknowns.
    let mut kind = vec![CellKind::Exterior; nx * ny];
    let mut unknown_of = vec![-1i32; nx * ny];
    let mut cell_of: Vec<(u32, u32)> = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if !inside[j * nx + i] {
                continue;
            }
            let mut adjacent = false;
            for (dx, dy) in DIRS {
                let (pi, pj) = (i as i64 + dx, j as i64 + dy);
                if pi < 0 || pj < 0 || pi >= nx as i64 || pj >= ny as i64 {
                    adjacent = true;
                } else if !inside[pj as usize * nx + pi as usize] {
                    adjacent = true;
                }
            }
            kind[j * nx + i] = if adjacent { CellKind::BoundaryAdjacent } else { CellKind::Interior };
            unknown_of[j * nx + i] = cell_of.len() as i32;
            cell_of.push((i as u32, j as u32));
        }
    }

    // Legs and cuts.
    let mut legs: Vec<[Leg; 4]> = Vec::with_capacity(cell_of.len());
    let mut cuts: Vec<CutLeg> = Vec::new();
    for &(i, j) in &cell_of {
        let (i, j) = (i as usize, j as usize);
        let p = origin + Complex64::new(i as f64 * h, j as f64 * h);
        let mut cell_legs = [Leg::Unknown(0); 4];
        for (d, (dx, dy)) in DIRS.iter().enumerate() {
            let (qi, qj) = (i as i64 + dx, j as i64 + dy);
            let q_in = qi >= 0
                && qj >= 0
                && (qi as usize) < nx
                && (qj as usize) < ny
                && inside[qj as usize * nx + qi as usize];
            if q_in {
                cell_legs[d] = Leg::Unknown(unknown_of[qj as usize * nx + qi as usize] as u32);
            } else {
                let dir = Complex64::new(*dx as f64, *dy as f64);
                let cut = find_cut(geo, &loops, &tables, p, dir, h, epsilon, (i, j), d, nx, ny)?;
                cell_legs[d] = Leg::Cut(cuts.len() as u32);
                cuts.push(cut);
            }
        }
        legs.push(cell_legs);
    }

    Ok(Grid {
        origin,
        h,
        nx,
        ny,
        epsilon,
        puncture_radii: vec![opts.puncture_radius; geo.punctures.len()],
        kind,
        unknown_of,
        cell_of,
        legs,
        cuts,
    })
}

/// Locate the nearest boundary crossing along the leg from `p` toward
/// `p + h dir` and refine it against the true geometry.
#[allow(clippy::too_many_arguments)]
fn find_cut(
    geo: &DomainGeometry,
    loops: &[OffsetLoop],
    tables: &[Option<ScanTable>],
    p: Complex64,
    dir: Complex64,
    h: f64,
    epsilon: f64,
    cell: (usize, usize),
    d: usize,
    _nx: usize,
    _ny: usize,
) -> Result<CutLeg, PdeError> {
    let mut best: Option<(f64, usize, Option<usize>)> = None; // (s, loop, seg)
    for (li, lp) in loops.iter().enumerate() {
        match &lp.shape {
            LoopShape::Circle { center, radius } => {
                // |p + s h dir - c|^2 = R^2
                let w = p - center;
                let b = (w.conj() * dir).re * h;
                let c0 = w.norm_sqr() - radius * radius;
                let a = h * h;
                let disc = b * b - a * c0;
                if disc >= 0.0 {
                    let sq = disc.sqrt();
                    for s in [(-b - sq) / a, (-b + sq) / a] {
                        if s > 1e-12 && s <= 1.0 + 1e-9 {
                            let s = s.min(1.0);
                            if best.map_or(true, |bst| s < bst.0) {
                                best = Some((s, li, None));
                            }
                        }
                    }
                }
            }
            LoopShape::Poly { .. } => {
                let table = tables[li].as_ref().unwrap();
                let (i, j) = cell;
                // Crossings along the relevant row or column interval.
                let (list, segs, lo, hi, axis_coord) = match d {
                    0 => (&table.rows[j], &table.row_segs[j], i as f64, i as f64 + 1.0, true),
                    1 => (&table.rows[j], &table.row_segs[j], i as f64 - 1.0, i as f64, true),
                    2 => (&table.cols[i], &table.col_segs[i], j as f64, j as f64 + 1.0, false),
                    _ => (&table.cols[i], &table.col_segs[i], j as f64 - 1.0, j as f64, false),
                };
                let cell_coord = if axis_coord { cell.0 as f64 } else { cell.1 as f64 };
                for (x, seg) in list.iter().zip(segs) {
                    if *x >= lo - 1e-12 && *x <= hi + 1e-12 {
                        let s = (x - cell_coord).abs();
                        if s > 1e-12 && s <= 1.0 + 1e-9 {
                            let s = s.min(1.0);
                            if best.map_or(true, |bst| s < bst.0) {
                                best = Some((s, li, Some(*seg)));
                            }
                        }
                    }
                }
            }
        }
    }
    let (s0, li, seg) = best.ok_or(PdeError::GridTooCoarse("leg crossing not found"))?;
    let lp = &loops[li];

    // Refine and attach boundary data.
    match (&lp.shape, lp.source) {
        (LoopShape::Circle { .. }, LoopSource::Puncture(pi)) => {
            let s = s0.clamp(1e-9, 1.0);
            Ok(CutLeg { frac: s, point: p + dir * (s * h), source: CutSource::Puncture { index: pi } })
        }
        (LoopShape::Circle { center, radius: _ }, LoopSource::Component(ci)) => {
            let s = s0.clamp(1e-9, 1.0);
            let x = p + dir * (s * h);
            let (true_center, true_radius, role) = match &geo.components[ci].shape {
                ComponentShape::Circle { center: c, radius: r } => (*c, *r, geo.components[ci].role),
                _ => ((*center), 0.0, geo.components[ci].role),
            };
            let _ = true_center;
            let kappa = match role {
                ComponentRole::Outer => 1.0 / true_radius,
                ComponentRole::Inner => -1.0 / true_radius,
            };
            Ok(CutLeg { frac: s, point: x, source: CutSource::Component { index: ci, curvature: kappa } })
        }
        (LoopShape::Poly { params, pts: _ }, LoopSource::Component(ci)) => {
            let curve = match &geo.components[ci].shape {
                ComponentShape::Trig(c) => c,
                // Circles never build polylines.
                ComponentShape::Circle { .. } => unreachable!(),
            };
            let role = geo.components[ci].role;
            // Seed parameter from the polyline segment.
            let t_seed = seg.map(|s| params[s]).unwrap_or(0.0);
            // phi(s) = dist(x(s), curve) - epsilon, bracketing around s0.
            let mut t_cur = t_seed;
            let phi = |s: f64, t_cur: &mut f64| -> f64 {
                let x = p + dir * (s * h);
                let near = curve
                    .nearest_seeded(x, *t_cur)
                    .unwrap_or_else(|| curve.nearest(x).expect("projection"));
                *t_cur = near.t;
                near.dist - epsilon
            };
            // Expanding bracket around the polyline estimate.
            let mut lo = (s0 - 2.0e-3).max(0.0);
            let mut hi = (s0 + 2.0e-3).min(1.0);
            let mut flo = phi(lo, &mut t_cur);
            let mut fhi = phi(hi, &mut t_cur);
            let mut grow = 4.0e-3;
            while flo * fhi > 0.0 && grow < 2.0 {
                lo = (s0 - grow).max(0.0);
                hi = (s0 + grow).min(1.0);
                flo = phi(lo, &mut t_cur);
                fhi = phi(hi, &mut t_cur);
                grow *= 2.0;
            }
            let mut s = s0;
            if flo * fhi <= 0.0 {
                // Bisection to 1e-11 of a cell.
                for _ in 0..45 {
                    s = 0.5 * (lo + hi);
                    let fs = phi(s, &mut t_cur);
                    if fs == 0.0 {
                        break;
                    }
                    if flo * fs <= 0.0 {
                        hi = s;
                        fhi = fs;
                    } else {
                        lo = s;
                        flo = fs;
                    }
                    if hi - lo < 1e-11 {
                        break;
                    }
                }
                let _ = fhi;
            }
            let s = s.clamp(1e-9, 1.0);
            let x = p + dir * (s * h);
            let near = curve
                .nearest_seeded(x, t_cur)
                .unwrap_or_else(|| curve.nearest(x).expect("projection"));
            let kappa_geom = curve.curvature(near.t);
            let kappa = match role {
                ComponentRole::Outer => kappa_geom,
                ComponentRole::Inner => -kappa_geom,
            };
            Ok(CutLeg { frac: s, point: x, source: CutSource::Component { index: ci, curvature: kappa } })
        }
        (LoopShape::Poly { .. }, LoopSource::Puncture(_)) => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;

    #[test]
    fn disk_mask_cell_count() {
        let geo = DomainGeometry::build(&DomainSpec::UnitDisk).unwrap();
        let h = 1.0 / 256.0;
        let grid =
            rasterize(&geo, h, &RasterOptions { epsilon: 0.02, puncture_radius: 0.0 }).unwrap();
        let total = grid.n_unknowns() as f64;
        let expect = PI * 0.98 * 0.98 / (h * h);
        assert!((total - expect).abs() < 0.01 * expect, "count {total} vs {expect}");
        // All interior cells have four in-domain neighbours by construction.
        for (u, &(i, j)) in grid.cell_of.iter().enumerate() {
            if grid.kind[grid.idx(i as usize, j as usize)] == CellKind::Interior {
                for leg in grid.legs[u] {
                    assert!(matches!(leg, Leg::Unknown(_)));
                }
            }
        }
    }

    #[test]
    fn annulus_mask_radii() {
        let geo = DomainGeometry::build(&DomainSpec::Annulus { beta: 0.5 }).unwrap();
        let h = 1.0 / 256.0;
        let grid =
            rasterize(&geo, h, &RasterOptions { epsilon: 0.02, puncture_radius: 0.0 }).unwrap();
        for &(i, j) in &grid.cell_of {
            let r = grid.point(i as usize, j as usize).norm();
            assert!(r > 0.52 - 1e-12 && r < 0.98 + 1e-12, "r = {r}");
        }
        // Cut fractions in range and cut points on the offset circles.
        assert!(!grid.cuts.is_empty());
        for cut in &grid.cuts {
            assert!(cut.frac > 0.0 && cut.frac <= 1.0);
            let r = cut.point.norm();
            assert!((r - 0.98).abs() < 1e-9 || (r - 0.52).abs() < 1e-9);
        }
    }

    #[test]
    fn punctured_disk_mask() {
        let geo = DomainGeometry::build(&DomainSpec::Annulus { beta: 0.0 }).unwrap();
        let h = 1.0 / 256.0;
        let grid =
            rasterize(&geo, h, &RasterOptions { epsilon: 0.04, puncture_radius: 0.02 }).unwrap();
        for &(i, j) in &grid.cell_of {
            let r = grid.point(i as usize, j as usize).norm();
            assert!(r > 0.02 - 1e-12 && r < 0.96 + 1e-12);
        }
        let n_punct = grid
            .cuts
            .iter()
            .filter(|c| matches!(c.source, CutSource::Puncture { .. }))
            .count();
        assert!(n_punct > 8);
    }

    #[test]
    fn trig_curve_cuts_land_on_offset() {
        let outer = BoundaryCurve::ellipse(1.4, 1.0);
        let spec = DomainSpec::CurveBounded { outer: outer.clone(), inner: None };
        let geo = DomainGeometry::build(&spec).unwrap();
        let h = 1.0 / 64.0;
        let eps = 0.07;
        let grid = rasterize(&geo, h, &RasterOptions { epsilon: eps, puncture_radius: 0.0 }).unwrap();
        for cut in grid.cuts.iter().step_by(7) {
            let d = outer.nearest(cut.point).unwrap().dist;
            assert!((d - eps).abs() < 1e-9, "offset distance {d}");
            match cut.source {
                CutSource::Component { curvature, .. } => {
                    assert!(curvature > 0.3 && curvature < 1.6, "kappa = {curvature}");
                }
                _ => panic!("unexpected cut source"),
            }
        }
    }

    #[test]
    fn raster_preconditions() {
        let geo = DomainGeometry::build(&DomainSpec::UnitDisk).unwrap();
        assert!(matches!(
            rasterize(&geo, 0.01, &RasterOptions { epsilon: 0.02, puncture_radius: 0.0 }),
            Err(PdeError::GridTooCoarse(_))
        ));
        assert!(matches!(
            rasterize(&geo, 1.0 / 256.0, &RasterOptions { epsilon: 0.9, puncture_radius: 0.0 }),
            Err(PdeError::EpsilonBeyondReach { .. })
        ));
    }
}
