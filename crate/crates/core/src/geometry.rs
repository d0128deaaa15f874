//! Scene layout: RIS element grid, group tiling, Tx/Rx antennas, and the
//! discretized space of interest.
//!
//! One coordinate frame is shared by every module: origin at the RIS
//! center, the RIS in the y-z plane, +x normal to the RIS pointing into
//! the room, +z up. Angles are reported as (polar-from-normal, azimuth)
//! pairs in degrees, with the azimuth measured in the y-z plane from +y
//! toward +z.

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

pub(crate) fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn norm(v: Point3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn distance(a: Point3, b: Point3) -> f64 {
    norm(sub(a, b))
}

/// Incidence or reflection direction relative to the RIS normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnglePair {
    /// Angle from the +x surface normal, degrees in [0, 180].
    pub polar_deg: f64,
    /// Angle in the y-z plane from +y toward +z, degrees in (-180, 180].
    pub azimuth_deg: f64,
}

/// Static layout of the RIS, the antennas, and the space of interest.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGeometry {
    /// RIS element counts per axis; rows advance along -z, columns along +y.
    pub ris_rows: usize,
    pub ris_cols: usize,
    /// Element side length in meters (elements tile the plane without gaps).
    pub element_pitch: f64,
    /// Group tiling of the element array; each group is a rectangular tile
    /// of `(ris_rows / group_rows) x (ris_cols / group_cols)` elements.
    pub group_rows: usize,
    pub group_cols: usize,
    pub tx_position: Point3,
    pub rx_position: Point3,
    /// Corner of the space of interest with minimal coordinates.
    pub soi_origin: Point3,
    /// Side lengths (l_x, l_y, l_z) of the space of interest in meters.
    pub soi_extent: [f64; 3],
    /// Edge length of one cubic space block.
    pub block_side: f64,
    /// Block counts per axis (M_x, M_y, M_z).
    pub block_counts: [usize; 3],
}

impl SceneGeometry {
    /// Builds a scene and checks every structural invariant.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ris_rows: usize,
        ris_cols: usize,
        element_pitch: f64,
        group_rows: usize,
        group_cols: usize,
        tx_position: Point3,
        rx_position: Point3,
        soi_origin: Point3,
        block_side: f64,
        block_counts: [usize; 3],
    ) -> Result<Self> {
        let soi_extent = [
            block_counts[0] as f64 * block_side,
            block_counts[1] as f64 * block_side,
            block_counts[2] as f64 * block_side,
        ];
        let scene = Self {
            ris_rows,
            ris_cols,
            element_pitch,
            group_rows,
            group_cols,
            tx_position,
            rx_position,
            soi_origin,
            soi_extent,
            block_side,
            block_counts,
        };
        scene.validate()?;
        Ok(scene)
    }

    /// The simulation layout used throughout the experiments: a 48x48 RIS
    /// with 1.5 cm elements in 4x4 groups, Tx 1.2 m away at 60 degrees
    /// azimuth, Rx 5 cm below the bottom edge, and an 80-block space of
    /// interest starting 1 m in front of the RIS.
    pub fn default_scene() -> Self {
        let azimuth = 60.0_f64.to_radians();
        let tx = [1.2 * azimuth.cos(), 1.2 * azimuth.sin(), 0.0];
        // 48 rows at 1.5 cm span 0.72 m; bottom edge at z = -0.36.
        let rx = [0.0, 0.0, -0.41];
        Self::new(
            48,
            48,
            0.015,
            4,
            4,
            tx,
            rx,
            [1.0, -0.5, -0.8],
            0.2,
            [2, 5, 8],
        )
        .expect("default scene is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.ris_rows == 0 || self.ris_cols == 0 {
            return Err(Error::InvalidGeometry("RIS must have elements".into()));
        }
        if self.element_pitch <= 0.0 {
            return Err(Error::InvalidGeometry("element pitch must be positive".into()));
        }
        if self.group_rows == 0 || self.group_cols == 0 {
            return Err(Error::InvalidGeometry("group tiling must be non-empty".into()));
        }
        if self.ris_rows % self.group_rows != 0 || self.ris_cols % self.group_cols != 0 {
            return Err(Error::InvalidGeometry(format!(
                "group tiling {}x{} does not partition the {}x{} element array",
                self.group_rows, self.group_cols, self.ris_rows, self.ris_cols
            )));
        }
        if self.block_side <= 0.0 {
            return Err(Error::InvalidGeometry("block side must be positive".into()));
        }
        if self.block_counts.iter().any(|&c| c == 0) {
            return Err(Error::InvalidGeometry("block counts must be positive".into()));
        }
        for axis in 0..3 {
            let expect = self.block_counts[axis] as f64 * self.block_side;
            if (self.soi_extent[axis] - expect).abs() > 1e-9 * expect.max(1.0) {
                return Err(Error::InvalidGeometry(format!(
                    "space-of-interest extent on axis {axis} is {} but blocks cover {expect}",
                    self.soi_extent[axis]
                )));
            }
        }
        let bottom_edge = -(self.ris_rows as f64) * self.element_pitch / 2.0;
        if self.rx_position[2] >= bottom_edge {
            return Err(Error::InvalidGeometry(format!(
                "rx z = {} must lie below the RIS bottom edge z = {bottom_edge}",
                self.rx_position[2]
            )));
        }
        Ok(())
    }

    /// Total element count N.
    pub fn element_count(&self) -> usize {
        self.ris_rows * self.ris_cols
    }

    /// Group count L.
    pub fn group_count(&self) -> usize {
        self.group_rows * self.group_cols
    }

    /// Elements per group N_G.
    pub fn group_size(&self) -> usize {
        self.element_count() / self.group_count()
    }

    /// Block count M.
    pub fn block_count(&self) -> usize {
        self.block_counts[0] * self.block_counts[1] * self.block_counts[2]
    }

    /// Center of the `n`-th element. Elements are indexed row-major with
    /// row 0 at the top (+z) and column 0 on the -y side, so index 0 is
    /// the top-left corner of the centered array.
    pub fn element_position(&self, n: usize) -> Result<Point3> {
        let count = self.element_count();
        if n >= count {
            return Err(Error::IndexOutOfRange {
                what: "RIS element",
                index: n,
                size: count,
            });
        }
        let row = n / self.ris_cols;
        let col = n % self.ris_cols;
        let y = (col as f64 - (self.ris_cols as f64 - 1.0) / 2.0) * self.element_pitch;
        let z = ((self.ris_rows as f64 - 1.0) / 2.0 - row as f64) * self.element_pitch;
        Ok([0.0, y, z])
    }

    /// Group index of element `n`: the rectangular tile that contains it,
    /// tiles numbered row-major like the elements.
    pub fn group_of_element(&self, n: usize) -> Result<usize> {
        let count = self.element_count();
        if n >= count {
            return Err(Error::IndexOutOfRange {
                what: "RIS element",
                index: n,
                size: count,
            });
        }
        let rows_per_group = self.ris_rows / self.group_rows;
        let cols_per_group = self.ris_cols / self.group_cols;
        let row = n / self.ris_cols;
        let col = n % self.ris_cols;
        Ok((row / rows_per_group) * self.group_cols + col / cols_per_group)
    }

    /// Element indices belonging to group `l`.
    pub fn elements_in_group(&self, l: usize) -> Result<Vec<usize>> {
        let groups = self.group_count();
        if l >= groups {
            return Err(Error::IndexOutOfRange {
                what: "RIS group",
                index: l,
                size: groups,
            });
        }
        let rows_per_group = self.ris_rows / self.group_rows;
        let cols_per_group = self.ris_cols / self.group_cols;
        let gr = l / self.group_cols;
        let gc = l % self.group_cols;
        let mut out = Vec::with_capacity(rows_per_group * cols_per_group);
        for r in gr * rows_per_group..(gr + 1) * rows_per_group {
            for c in gc * cols_per_group..(gc + 1) * cols_per_group {
                out.push(r * self.ris_cols + c);
            }
        }
        Ok(out)
    }

    /// Center of the `m`-th space block. Block indexing is x-fastest,
    /// then y, then z: `m = ix + M_x * (iy + M_y * iz)`.
    pub fn block_center(&self, m: usize) -> Result<Point3> {
        let count = self.block_count();
        if m >= count {
            return Err(Error::IndexOutOfRange {
                what: "space block",
                index: m,
                size: count,
            });
        }
        let [mx, my, _] = self.block_counts;
        let ix = m % mx;
        let iy = (m / mx) % my;
        let iz = m / (mx * my);
        Ok([
            self.soi_origin[0] + (ix as f64 + 0.5) * self.block_side,
            self.soi_origin[1] + (iy as f64 + 0.5) * self.block_side,
            self.soi_origin[2] + (iz as f64 + 0.5) * self.block_side,
        ])
    }

    /// Flat block index from per-axis indices (inverse of [`Self::block_center`]
    /// up to the center offset).
    pub fn block_index(&self, ix: usize, iy: usize, iz: usize) -> Result<usize> {
        let [mx, my, mz] = self.block_counts;
        if ix >= mx || iy >= my || iz >= mz {
            return Err(Error::IndexOutOfRange {
                what: "space block axis index",
                index: ix.max(iy).max(iz),
                size: mx.max(my).max(mz),
            });
        }
        Ok(ix + mx * (iy + my * iz))
    }

    /// Block index containing `point`, if any.
    pub fn block_index_of(&self, point: Point3) -> Option<usize> {
        let mut idx = [0usize; 3];
        for axis in 0..3 {
            let rel = (point[axis] - self.soi_origin[axis]) / self.block_side;
            if rel < 0.0 || rel >= self.block_counts[axis] as f64 {
                return None;
            }
            idx[axis] = rel as usize;
        }
        Some(idx[0] + self.block_counts[0] * (idx[1] + self.block_counts[1] * idx[2]))
    }

    /// (d_n, d_nm): Tx-to-element distance, and element-to-Rx distance via
    /// the `m`-th space block.
    pub fn path_distances(&self, n: usize, m: usize) -> Result<(f64, f64)> {
        let element = self.element_position(n)?;
        let block = self.block_center(m)?;
        let d_n = distance(self.tx_position, element);
        let d_nm = distance(element, block) + distance(block, self.rx_position);
        Ok((d_n, d_nm))
    }

    /// Incidence and reflection angles at element `n` for the path through
    /// block `m`. The incidence polar angle is measured between the
    /// element-to-Tx direction and the +x normal (the usual convention),
    /// the reflection polar angle between the element-to-block direction
    /// and the normal.
    pub fn reflection_angles(&self, n: usize, m: usize) -> Result<(AnglePair, AnglePair)> {
        let element = self.element_position(n)?;
        let block = self.block_center(m)?;
        let theta_i = direction_angles(sub(self.tx_position, element), "element and tx")?;
        let theta_r = direction_angles(sub(block, element), "element and block")?;
        Ok((theta_i, theta_r))
    }

    /// Straight Tx-to-Rx distance for the direct LoS term.
    pub fn los_distance(&self) -> f64 {
        distance(self.tx_position, self.rx_position)
    }

    /// Canonical one-line description used for artifact hashing.
    pub fn canonical_string(&self) -> String {
        format!(
            "scene v1 ris={}x{} pitch={:e} groups={}x{} tx=({:e},{:e},{:e}) rx=({:e},{:e},{:e}) soi=({:e},{:e},{:e}) side={:e} blocks={}x{}x{}",
            self.ris_rows,
            self.ris_cols,
            self.element_pitch,
            self.group_rows,
            self.group_cols,
            self.tx_position[0],
            self.tx_position[1],
            self.tx_position[2],
            self.rx_position[0],
            self.rx_position[1],
            self.rx_position[2],
            self.soi_origin[0],
            self.soi_origin[1],
            self.soi_origin[2],
            self.block_side,
            self.block_counts[0],
            self.block_counts[1],
            self.block_counts[2],
        )
    }
}

fn direction_angles(v: Point3, endpoints: &'static str) -> Result<AnglePair> {
    let len = norm(v);
    if len <= 0.0 {
        return Err(Error::DegenerateDirection(endpoints));
    }
    let polar = (v[0] / len).clamp(-1.0, 1.0).acos().to_degrees();
    let azimuth = if v[1] == 0.0 && v[2] == 0.0 {
        0.0
    } else {
        v[2].atan2(v[1]).to_degrees()
    };
    Ok(AnglePair {
        polar_deg: polar,
        azimuth_deg: azimuth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tiny_scene() -> SceneGeometry {
        SceneGeometry::new(
            2,
            2,
            0.015,
            1,
            1,
            [0.6, 1.039230484541326, 0.0],
            [0.0, 0.0, -0.1],
            [1.0, -0.5, -0.8],
            0.2,
            [2, 5, 8],
        )
        .unwrap()
    }

    #[test]
    fn element_positions_of_centered_two_by_two() {
        let scene = tiny_scene();
        let p0 = scene.element_position(0).unwrap();
        assert_relative_eq!(p0[0], 0.0);
        assert_relative_eq!(p0[1], -0.0075);
        assert_relative_eq!(p0[2], 0.0075);
        let p3 = scene.element_position(3).unwrap();
        assert_relative_eq!(p3[1], 0.0075);
        assert_relative_eq!(p3[2], -0.0075);
        assert!(scene.element_position(4).is_err());
    }

    #[test]
    fn default_array_span_matches_panel_size() {
        let scene = SceneGeometry::default_scene();
        let mut min_y = f64::INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        for n in 0..scene.element_count() {
            let p = scene.element_position(n).unwrap();
            min_y = min_y.min(p[1]);
            max_y = max_y.max(p[1]);
        }
        let span = max_y - min_y + scene.element_pitch;
        assert_relative_eq!(span, 0.72, epsilon = 1e-12);
        // 69 cm panel, within one element of the active-array span.
        assert!((span - 0.69).abs() <= 2.0 * scene.element_pitch + 1e-12);
    }

    #[test]
    fn block_center_examples() {
        let scene = tiny_scene();
        let c0 = scene.block_center(0).unwrap();
        assert_relative_eq!(c0[0], 1.1);
        assert_relative_eq!(c0[1], -0.4);
        assert_relative_eq!(c0[2], -0.7);
        let last = scene.block_center(scene.block_count() - 1).unwrap();
        assert_relative_eq!(last[0], 1.3);
        assert_relative_eq!(last[1], 0.4);
        assert_relative_eq!(last[2], 0.7);
        assert_eq!(scene.block_count(), 80);
        assert!(scene.block_center(80).is_err());
    }

    #[test]
    fn grid_round_trip_is_identity() {
        let scene = tiny_scene();
        for m in 0..scene.block_count() {
            let center = scene.block_center(m).unwrap();
            assert_eq!(scene.block_index_of(center), Some(m));
        }
    }

    #[test]
    fn path_distances_basic() {
        // Tx at (2,0,0) with the element grid centered at the origin:
        // element (0, +/-0.0075, +/-0.0075) is not exactly at the origin,
        // so use a dedicated 1x1 scene for the exact check.
        let scene = SceneGeometry::new(
            1,
            1,
            0.015,
            1,
            1,
            [2.0, 0.0, 0.0],
            [0.0, 0.0, -1.0],
            [0.8, -0.1, -0.1],
            0.2,
            [2, 1, 1],
        )
        .unwrap();
        let (d_n, d_nm) = scene.path_distances(0, 0).unwrap();
        assert_relative_eq!(d_n, 2.0);
        // element at origin, block center (0.9, 0, 0), rx at (0,0,-1)
        let expect = 0.9 + (0.9f64 * 0.9 + 1.0).sqrt();
        assert_relative_eq!(d_nm, expect, epsilon = 1e-12);
        assert!(d_nm >= distance([0.0, 0.0, 0.0], scene.rx_position) - 1e-12);
    }

    #[test]
    fn two_segment_distance_example() {
        // element at origin, block at (1,0,0), rx at (0,0,-1):
        // d_nm = 1 + sqrt(2)
        let scene = SceneGeometry::new(
            1,
            1,
            0.015,
            1,
            1,
            [2.0, 0.0, 0.0],
            [0.0, 0.0, -1.0],
            [0.9, -0.1, -0.1],
            0.2,
            [1, 1, 1],
        )
        .unwrap();
        let (_, d_nm) = scene.path_distances(0, 0).unwrap();
        assert_relative_eq!(d_nm, 1.0 + 2.0f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn mirror_symmetric_elements_have_equal_block_paths() {
        // 1x2 array: elements at y = -0.0075 and +0.0075; everything else
        // on the y = 0 plane.
        let scene = SceneGeometry::new(
            1,
            2,
            0.015,
            1,
            2,
            [1.0, 0.0, 0.0],
            [0.0, 0.0, -0.5],
            [0.9, -0.1, -0.1],
            0.2,
            [1, 1, 1],
        )
        .unwrap();
        let (_, d0) = scene.path_distances(0, 0).unwrap();
        let (_, d1) = scene.path_distances(1, 0).unwrap();
        assert_relative_eq!(d0, d1, epsilon = 1e-14);
    }

    #[test]
    fn reflection_angle_conventions() {
        let scene = tiny_scene();
        // Block straight ahead of the array center: polar ~ 0 for a block
        // aligned with an element along +x. Use a 1x1 scene for exactness.
        let head_on = SceneGeometry::new(
            1,
            1,
            0.015,
            1,
            1,
            [0.6, 1.039230484541326, 0.0],
            [0.0, 0.0, -0.5],
            [0.9, -0.1, -0.1],
            0.2,
            [1, 1, 1],
        )
        .unwrap();
        let (_, theta_r) = head_on.reflection_angles(0, 0).unwrap();
        assert_relative_eq!(theta_r.polar_deg, 0.0, epsilon = 1e-9);
        assert_relative_eq!(theta_r.azimuth_deg, 0.0);

        // Tx 1.2 m away at 60 degrees azimuth in the horizontal plane.
        let (theta_i, _) = head_on.reflection_angles(0, 0).unwrap();
        assert_relative_eq!(theta_i.polar_deg, 60.0, epsilon = 1e-9);
        assert_relative_eq!(theta_i.azimuth_deg, 0.0, epsilon = 1e-9);

        // Incidence angles exist for every element of the tiny scene.
        for n in 0..scene.element_count() {
            scene.reflection_angles(n, 0).unwrap();
        }
    }

    #[test]
    fn far_tx_incidence_angles_are_nearly_uniform() {
        // With the Tx pushed far out along the same 60-degree bearing the
        // plane-wave approximation holds: direct computation over the full
        // 48x48 array bounds the polar-angle spread below one degree.
        let mut scene = SceneGeometry::default_scene();
        let d = 24.0;
        let az = 60.0_f64.to_radians();
        scene.tx_position = [d * az.cos(), d * az.sin(), 0.0];
        assert!(d > 10.0 * 0.0937); // > 10 wavelengths at 3.198 GHz
        let center = [0.0, 0.0, 0.0];
        let center_polar =
            direction_angles(sub(scene.tx_position, center), "c").unwrap().polar_deg;
        let mut max_dev = 0.0f64;
        for n in 0..scene.element_count() {
            let (theta_i, _) = scene.reflection_angles(n, 0).unwrap();
            max_dev = max_dev.max((theta_i.polar_deg - center_polar).abs());
        }
        assert!(max_dev < 1.0, "max deviation {max_dev} deg");
    }

    #[test]
    fn groups_partition_elements() {
        let scene = SceneGeometry::default_scene();
        assert_eq!(scene.group_size(), 144);
        let mut seen = vec![false; scene.element_count()];
        let mut total = 0;
        for l in 0..scene.group_count() {
            for n in scene.elements_in_group(l).unwrap() {
                assert!(!seen[n], "element {n} in two groups");
                assert_eq!(scene.group_of_element(n).unwrap(), l);
                seen[n] = true;
                total += 1;
            }
        }
        assert_eq!(total, scene.element_count());
    }

    #[test]
    fn invalid_scenes_are_rejected() {
        assert!(SceneGeometry::new(
            3,
            3,
            0.015,
            2,
            1,
            [1.0, 0.0, 0.0],
            [0.0, 0.0, -1.0],
            [1.0, 0.0, 0.0],
            0.2,
            [1, 1, 1],
        )
        .is_err());
        // rx above the bottom edge
        assert!(SceneGeometry::new(
            2,
            2,
            0.015,
            1,
            1,
            [1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            0.2,
            [1, 1, 1],
        )
        .is_err());
    }
}
