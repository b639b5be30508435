use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::flowfield::Point2;

use super::assembly::basis_gradients;
use super::mesh::Mesh;
use super::quadrature::integrate_triangle;

/// Result of a patch-wise quadratic fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveredHessian {
    pub hessian: [[f64; 2]; 2],
    /// Set when the patch could not determine a quadratic; `hessian` is zero.
    pub rank_deficient: bool,
}

/// `v = Σ aᵢ φᵢ` over a mesh.
#[derive(Debug, Clone)]
pub struct ContinuousValue {
    mesh: Arc<Mesh>,
    coefficients: Vec<f64>,
}

impl ContinuousValue {
    pub fn new(mesh: Arc<Mesh>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != mesh.node_count() {
            return Err(Error::Construction(format!(
                "{} coefficients for {} nodes",
                coefficients.len(),
                mesh.node_count()
            )));
        }
        Ok(Self { mesh, coefficients })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn goal_value(&self) -> f64 {
        self.coefficients[self.mesh.goal_node()]
    }

    pub fn value_range(&self) -> (f64, f64) {
        self.coefficients
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    fn in_triangle(&self, t: usize, p: Point2) -> f64 {
        let l = self.mesh.barycentric(t, p);
        let tri = self.mesh.triangles()[t];
        (0..3).map(|i| l[i] * self.coefficients[tri[i]]).sum()
    }

    fn triangle_gradient(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.mesh.vertices(t);
        let g = basis_gradients(a, b, c);
        let tri = self.mesh.triangles()[t];
        let mut out = [0.0; 2];
        for i in 0..3 {
            out[0] += self.coefficients[tri[i]] * g[i][0];
            out[1] += self.coefficients[tri[i]] * g[i][1];
        }
        out
    }

    fn outside(p: Point2) -> Error {
        Error::Domain(format!("point ({:.6}, {:.6}) lies outside the mesh", p.x, p.y))
    }

    /// Barycentric interpolation in the containing triangle.
    pub fn evaluate(&self, p: Point2) -> Result<f64> {
        let (t, _) = self.mesh.locate(p).ok_or_else(|| Self::outside(p))?;
        Ok(self.in_triangle(t, p))
    }

    /// Like [`evaluate`](Self::evaluate), but points outside the cover use
    /// the linear extension of the nearest triangle.
    pub fn evaluate_extended(&self, p: Point2) -> f64 {
        match self.mesh.locate(p) {
            Some((t, _)) => self.in_triangle(t, p),
            None => self.in_triangle(self.mesh.nearest_triangle(p), p),
        }
    }

    fn averaged_gradient(&self, tris: &[usize]) -> [f64; 2] {
        let mut total = 0.0;
        let mut g = [0.0; 2];
        for &t in tris {
            let area = self.mesh.area(t);
            let gt = self.triangle_gradient(t);
            g[0] += area * gt[0];
            g[1] += area * gt[1];
            total += area;
        }
        [g[0] / total, g[1] / total]
    }

    /// Element gradient inside a triangle; area-weighted average of the
    /// adjacent element gradients on shared edges and at nodes.
    pub fn gradient(&self, p: Point2) -> Result<[f64; 2]> {
        let tris = self.mesh.containing(p);
        if tris.is_empty() {
            return Err(Self::outside(p));
        }
        Ok(self.averaged_gradient(&tris))
    }

    pub fn gradient_extended(&self, p: Point2) -> [f64; 2] {
        let tris = self.mesh.containing(p);
        if tris.is_empty() {
            self.triangle_gradient(self.mesh.nearest_triangle(p))
        } else {
            self.averaged_gradient(&tris)
        }
    }

    /// Constant Hessian of a least-squares quadratic fitted to the nodal
    /// values around the node nearest `p`.
    pub fn hessian_recovered(&self, p: Point2) -> Result<RecoveredHessian> {
        if self.mesh.locate(p).is_none() {
            return Err(Self::outside(p));
        }
        Ok(self.hessian_unchecked(p))
    }

    /// Hessian recovery without the cover check.
    pub fn hessian_extended(&self, p: Point2) -> RecoveredHessian {
        self.hessian_unchecked(p)
    }

    fn hessian_unchecked(&self, p: Point2) -> RecoveredHessian {
        let center = self.mesh.nearest_node(p);
        // one ring of elements, widened to two when it cannot fix a quadratic
        for rings in 1..=2 {
            let patch = self.mesh.patch(center, rings);
            if patch.len() < 6 {
                continue;
            }
            if let Some(h) = self.fit_quadratic(center, &patch) {
                return RecoveredHessian {
                    hessian: h,
                    rank_deficient: false,
                };
            }
        }
        RecoveredHessian {
            hessian: [[0.0; 2]; 2],
            rank_deficient: true,
        }
    }

    fn fit_quadratic(&self, center: usize, patch: &[usize]) -> Option<[[f64; 2]; 2]> {
        let nodes = self.mesh.nodes();
        let c = nodes[center];
        let scale = patch
            .iter()
            .map(|&v| nodes[v].distance(&c))
            .fold(0.0f64, f64::max);
        if scale == 0.0 {
            return None;
        }
        let rows = patch.len();
        let mut a = DMatrix::<f64>::zeros(rows, 6);
        let mut b = DVector::<f64>::zeros(rows);
        for (r, &v) in patch.iter().enumerate() {
            let dx = (nodes[v].x - c.x) / scale;
            let dy = (nodes[v].y - c.y) / scale;
            let basis = [1.0, dx, dy, dx * dx, dx * dy, dy * dy];
            for (k, val) in basis.iter().enumerate() {
                a[(r, k)] = *val;
            }
            b[r] = self.coefficients[v];
        }
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smin > 1e-10 * smax) {
            return None;
        }
        let x = svd.solve(&b, 0.0).ok()?;
        let s2 = scale * scale;
        let hxy = x[4] / s2;
        Some([[2.0 * x[3] / s2, hxy], [hxy, 2.0 * x[5] / s2]])
    }

    /// `‖v − exact‖_{L2}` by 7-point quadrature on every element.
    pub fn l2_error(&self, exact: impl Fn(Point2) -> f64) -> f64 {
        let mut total = 0.0;
        for t in 0..self.mesh.triangles().len() {
            let verts = self.mesh.vertices(t);
            total += integrate_triangle(verts, |p| {
                let e = self.in_triangle(t, p) - exact(p);
                e * e
            });
        }
        total.sqrt()
    }

    /// Dense raster `x_km,y_km,value` on an `nx x ny` lattice spanning
    /// `lo..=hi`; points outside the cover use the linear extension.
    pub fn write_raster<W: Write>(
        &self,
        out: W,
        lo: Point2,
        hi: Point2,
        nx: usize,
        ny: usize,
    ) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x_km", "y_km", "value"])?;
        let step = |a: f64, b: f64, n: usize, k: usize| {
            if n <= 1 {
                a
            } else {
                a + (b - a) * k as f64 / (n - 1) as f64
            }
        };
        for j in 0..ny {
            for i in 0..nx {
                let p = Point2::new(step(lo.x, hi.x, nx, i), step(lo.y, hi.y, ny, j));
                let v = self.evaluate_extended(p);
                w.write_record([p.x.to_string(), p.y.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesh::build_mesh;
    use crate::flowfield::Rect;
    use crate::mdp::StateSpace;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mesh(n: usize, cell: f64) -> Arc<Mesh> {
        let s = StateSpace::new(Point2::new(0.0, 0.0), cell, n, n, &[], (0, 0)).unwrap();
        Arc::new(build_mesh(&s, 1).unwrap())
    }

    fn sampled(m: &Arc<Mesh>, f: impl Fn(Point2) -> f64) -> ContinuousValue {
        let coeffs = m.nodes().iter().map(|&p| f(p)).collect();
        ContinuousValue::new(m.clone(), coeffs).unwrap()
    }

    #[test]
    fn nodes_and_centroid() {
        let m = Arc::new(
            Mesh::from_parts(
                vec![Point2::new(0.0, 0.0), Point2::new(3.0, 0.0), Point2::new(0.0, 3.0)],
                vec![[0, 1, 2]],
                vec![0, 1, 2],
                0,
            )
            .unwrap(),
        );
        let v = ContinuousValue::new(m, vec![0.0, 3.0, 6.0]).unwrap();
        assert_eq!(v.evaluate(Point2::new(3.0, 0.0)).unwrap(), 3.0);
        assert!((v.evaluate(Point2::new(1.0, 1.0)).unwrap() - 3.0).abs() < 1e-15);
        assert!(matches!(v.evaluate(Point2::new(3.0, 3.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn linear_functions_are_exact() {
        let m = mesh(7, 1.3);
        let f = |p: Point2| 2.0 * p.x - p.y;
        let v = sampled(&m, f);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let p = Point2::new(rng.random_range(0.0..7.8), rng.random_range(0.0..7.8));
            assert!((v.evaluate(p).unwrap() - f(p)).abs() < 1e-12);
            let g = v.gradient(p).unwrap();
            assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 1.0).abs() < 1e-12);
        }
        let zero = sampled(&m, |_| 4.0);
        assert_eq!(zero.gradient(Point2::new(2.0, 2.0)).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn recovered_gradient_of_quadratic_is_first_order() {
        let f = |p: Point2| p.x * p.x;
        let mut errs = Vec::new();
        for n in [9, 17, 33] {
            let h = 1.0 / (n - 1) as f64;
            let m = mesh(n, h);
            let v = sampled(&m, f);
            let mut worst = 0.0f64;
            for node in 0..m.node_count() {
                if m.is_boundary(node) {
                    continue;
                }
                let p = m.nodes()[node];
                worst = worst.max((v.gradient(p).unwrap()[0] - 2.0 * p.x).abs());
            }
            errs.push(worst / h);
        }
        // error / h stays bounded
        assert!(errs.iter().all(|&e| e < 2.0), "{errs:?}");
    }

    #[test]
    fn hessian_of_quadratics() {
        let m = mesh(6, 2.0);
        let p = m.nodes()[m.nearest_node(Point2::new(4.0, 6.0))];
        let lin = sampled(&m, |p| 3.0 * p.x - p.y + 1.0).hessian_recovered(p).unwrap();
        assert!(!lin.rank_deficient);
        assert!(lin.hessian.iter().flatten().all(|v| v.abs() < 1e-10));
        let xx = sampled(&m, |p| p.x * p.x).hessian_recovered(p).unwrap();
        let expect = [[2.0, 0.0], [0.0, 0.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((xx.hessian[i][j] - expect[i][j]).abs() < 1e-6);
            }
        }
        let xy = sampled(&m, |p| p.x * p.y).hessian_recovered(p).unwrap();
        let expect = [[0.0, 1.0], [1.0, 0.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((xy.hessian[i][j] - expect[i][j]).abs() < 1e-6);
            }
        }
        // corners widen to two rings and still fit
        let corner = sampled(&m, |p| p.x * p.x).hessian_recovered(Point2::new(0.0, 0.0)).unwrap();
        assert!(!corner.rank_deficient);
        assert!((corner.hessian[0][0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn tiny_mesh_hessian_is_flagged() {
        let m = mesh(2, 1.0);
        let h = sampled(&m, |p| p.x * p.x).hessian_recovered(Point2::new(0.5, 0.5)).unwrap();
        assert!(h.rank_deficient);
        assert_eq!(h.hessian, [[0.0; 2]; 2]);
    }

    #[test]
    fn shared_edges_are_continuous() {
        let m = mesh(8, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let coeffs: Vec<f64> = (0..m.node_count()).map(|_| rng.random_range(-5.0..5.0)).collect();
        let v = ContinuousValue::new(m.clone(), coeffs).unwrap();
        let mut checked = 0;
        while checked < 1000 {
            let t = rng.random_range(0..m.triangles().len());
            let e = rng.random_range(0..3);
            let tri = m.triangles()[t];
            let (a, b) = (m.nodes()[tri[e]], m.nodes()[tri[(e + 1) % 3]]);
            let s: f64 = rng.random_range(0.0..1.0);
            let p = Point2::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y));
            let owners = m.containing(p);
            if owners.len() < 2 {
                continue;
            }
            let vals: Vec<f64> = owners.iter().map(|&o| v.in_triangle(o, p)).collect();
            for w in vals.windows(2) {
                assert!((w[0] - w[1]).abs() < 1e-12);
            }
            checked += 1;
        }
    }

    #[test]
    fn partition_of_unity() {
        let m = mesh(5, 2.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let p = Point2::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0));
            let (_, l) = m.locate(p).unwrap();
            assert!(l.iter().all(|&x| x >= -1e-12));
            assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn extension_outside_checkerboard_corner() {
        let s = StateSpace::tiling(Rect::default_ocean(), 8, 8, (2, 2)).unwrap();
        let m = Arc::new(build_mesh(&s, 2).unwrap());
        let v = sampled(&m, |p| p.x + 2.0 * p.y);
        let corner = s.center(s.index(7, 0));
        assert!(v.evaluate(corner).is_err());
        assert!((v.evaluate_extended(corner) - (corner.x + 2.0 * corner.y)).abs() < 1e-9);
        let g = v.gradient_extended(corner);
        assert!((g[0] - 1.0).abs() < 1e-12 && (g[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn raster_header() {
        let m = mesh(2, 1.0);
        let v = sampled(&m, |p| p.x);
        let mut buf = Vec::new();
        v.write_raster(&mut buf, Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), 2, 1).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x_km,y_km,value\n0,0,0\n1,0,1\n");
    }
}
