//! Scene segmentation into 4-connected regions.
//!
//! 1. Gradient magnitude of one band (central differences, replicated edges),
//!    quantized to 256 levels.
//! 2. Levels below the `scale_level` percentile are suppressed to zero.
//! 3. Regional minima (flat zones with no lower neighbor) seed a
//!    priority flood over the quantized levels; every pixel ends up in the
//!    basin that reaches it first.
//! 4. Optional merging of adjacent regions by spectral mean distance, then
//!    absorption of regions smaller than the smoothing threshold.
//!
//! Every tie is broken by raster order or lowest region id, so output is a
//! pure function of the input.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Raster, RasterHeader};

pub const GRADIENT_LEVELS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentParams {
    pub band_index: usize,
    pub scale_level: f64,
    pub merge_level: f64,
    pub smoothing_threshold: usize,
    /// Parsed and echoed in reports; does not affect segmentation.
    pub refine_range: Option<(f64, f64)>,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            band_index: 0,
            scale_level: 50.0,
            merge_level: 0.0,
            smoothing_threshold: 1,
            refine_range: None,
        }
    }
}

impl SegmentParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("scale_level", self.scale_level),
            ("merge_level", self.merge_level),
        ] {
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::Parameter(format!(
                    "{name} must lie in [0, 100], got {v}"
                )));
            }
        }
        if let Some((lo, hi)) = self.refine_range {
            if !(lo <= hi) {
                return Err(Error::Parameter(format!(
                    "refine range {lo}..{hi} is inverted"
                )));
            }
        }
        Ok(())
    }
}

/// Dense 1-based region ids over a grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentMap {
    pub nrows: usize,
    pub ncols: usize,
    pub labels: Vec<u32>,
    pub region_count: u32,
}

impl SegmentMap {
    pub fn label(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.ncols + col]
    }

    /// Builds a map from arbitrary ids, renumbering them densely in order of
    /// first appearance in raster order.
    pub fn from_raw(nrows: usize, ncols: usize, raw: &[u32]) -> Result<Self> {
        if raw.len() != nrows * ncols {
            return Err(Error::SizeMismatch {
                expected: nrows * ncols,
                actual: raw.len(),
            });
        }
        let mut map = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|&v| {
                let next = map.len() as u32 + 1;
                *map.entry(v).or_insert(next)
            })
            .collect();
        Ok(Self {
            nrows,
            ncols,
            labels,
            region_count: map.len() as u32,
        })
    }

    pub fn region_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.region_count as usize];
        for &l in &self.labels {
            sizes[l as usize - 1] += 1;
        }
        sizes
    }

    /// Checks that ids are dense in `1..=region_count` and that every region is
    /// a single 4-connected component.
    pub fn check_partition(&self) -> Result<()> {
        let n = self.nrows * self.ncols;
        if self.labels.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                actual: self.labels.len(),
            });
        }
        let rc = self.region_count as usize;
        if let Some(&bad) = self.labels.iter().find(|&&l| l == 0 || l as usize > rc) {
            return Err(Error::Parameter(format!(
                "region id {bad} outside 1..={rc}"
            )));
        }
        let mut seen_region = vec![false; rc];
        let mut visited = vec![false; n];
        let mut queue = VecDeque::new();
        for start in 0..n {
            if visited[start] {
                continue;
            }
            let id = self.labels[start];
            if std::mem::replace(&mut seen_region[id as usize - 1], true) {
                return Err(Error::Parameter(format!("region {id} is not 4-connected")));
            }
            visited[start] = true;
            queue.push_back(start);
            while let Some(p) = queue.pop_front() {
                for q in neighbors4(p, self.nrows, self.ncols) {
                    if !visited[q] && self.labels[q] == id {
                        visited[q] = true;
                        queue.push_back(q);
                    }
                }
            }
        }
        if let Some(i) = seen_region.iter().position(|s| !s) {
            return Err(Error::Parameter(format!("region id {} is unused", i + 1)));
        }
        Ok(())
    }
}

/// 4-neighbors of flat index `p` in up, left, right, down order.
fn neighbors4(p: usize, nrows: usize, ncols: usize) -> impl Iterator<Item = usize> {
    let (r, c) = (p / ncols, p % ncols);
    let up = (r > 0).then(|| p - ncols);
    let left = (c > 0).then(|| p - 1);
    let right = (c + 1 < ncols).then(|| p + 1);
    let down = (r + 1 < nrows).then(|| p + ncols);
    [up, left, right, down].into_iter().flatten()
}

/// Gradient magnitude with central differences and replicated edges.
pub fn gradient_magnitude(band: &[f32], nrows: usize, ncols: usize) -> Vec<f64> {
    let at = |r: usize, c: usize| band[r * ncols + c] as f64;
    let mut g = vec![0.0; nrows * ncols];
    for r in 0..nrows {
        let (ru, rd) = (r.saturating_sub(1), (r + 1).min(nrows - 1));
        for c in 0..ncols {
            let (cl, cr) = (c.saturating_sub(1), (c + 1).min(ncols - 1));
            let gx = 0.5 * (at(r, cr) - at(r, cl));
            let gy = 0.5 * (at(rd, c) - at(ru, c));
            g[r * ncols + c] = gx.hypot(gy);
        }
    }
    g
}

/// Quantizes to `0..=255` relative to the maximum magnitude.
pub fn quantize(grad: &[f64]) -> Vec<u8> {
    let gmax = grad.iter().copied().fold(0.0, f64::max);
    if gmax <= 0.0 {
        return vec![0; grad.len()];
    }
    let top = (GRADIENT_LEVELS - 1) as f64;
    grad.iter()
        .map(|&g| (g / gmax * top).floor().min(top) as u8)
        .collect()
}

/// Nearest-rank percentile of the quantized levels.
fn level_percentile(levels: &[u8], pct: f64) -> u8 {
    let mut hist = [0usize; GRADIENT_LEVELS];
    for &l in levels {
        hist[l as usize] += 1;
    }
    let rank = ((pct / 100.0) * levels.len() as f64).ceil().max(1.0) as usize;
    let mut acc = 0;
    for (level, &count) in hist.iter().enumerate() {
        acc += count;
        if acc >= rank {
            return level as u8;
        }
    }
    (GRADIENT_LEVELS - 1) as u8
}

/// Suppresses levels below the `scale_level` percentile to zero; 100 suppresses all.
pub fn suppress(levels: &mut [u8], scale_level: f64) {
    if scale_level >= 100.0 {
        levels.iter_mut().for_each(|l| *l = 0);
        return;
    }
    let t = level_percentile(levels, scale_level);
    levels.iter_mut().filter(|l| **l < t).for_each(|l| *l = 0);
}

/// Priority flood from regional minima over a level image.
pub fn flood(levels: &[u8], nrows: usize, ncols: usize) -> SegmentMap {
    let n = nrows * ncols;
    // Flat zones and whether each is a regional minimum.
    let mut zone = vec![u32::MAX; n];
    let mut zone_is_min = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if zone[start] != u32::MAX {
            continue;
        }
        let z = zone_is_min.len() as u32;
        let lv = levels[start];
        let mut is_min = true;
        zone[start] = z;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for q in neighbors4(p, nrows, ncols) {
                if levels[q] == lv {
                    if zone[q] == u32::MAX {
                        zone[q] = z;
                        queue.push_back(q);
                    }
                } else if levels[q] < lv {
                    is_min = false;
                }
            }
        }
        zone_is_min.push(is_min);
    }

    let mut labels = vec![0u32; n];
    let mut zone_label = vec![0u32; zone_is_min.len()];
    let mut next = 0u32;
    for p in 0..n {
        let z = zone[p] as usize;
        if zone_is_min[z] {
            if zone_label[z] == 0 {
                next += 1;
                zone_label[z] = next;
            }
            labels[p] = zone_label[z];
        }
    }

    let mut heap: BinaryHeap<Reverse<(u8, u64, usize)>> = BinaryHeap::new();
    let mut seq = 0u64;
    for p in 0..n {
        if !zone_is_min[zone[p] as usize] {
            continue;
        }
        for q in neighbors4(p, nrows, ncols) {
            if labels[q] == 0 {
                labels[q] = labels[p];
                heap.push(Reverse((levels[q], seq, q)));
                seq += 1;
            }
        }
    }
    while let Some(Reverse((_, _, p))) = heap.pop() {
        for q in neighbors4(p, nrows, ncols) {
            if labels[q] == 0 {
                labels[q] = labels[p];
                heap.push(Reverse((levels[q], seq, q)));
                seq += 1;
            }
        }
    }
    SegmentMap {
        nrows,
        ncols,
        labels,
        region_count: next,
    }
}

/// Initial segmentation: gradient, suppression, flooding.
pub fn segment(raster: &Raster, params: &SegmentParams) -> Result<SegmentMap> {
    params.validate()?;
    if params.band_index >= raster.nbands() {
        return Err(Error::Parameter(format!(
            "band index {} out of range for {} bands",
            params.band_index,
            raster.nbands()
        )));
    }
    let grad = gradient_magnitude(
        raster.band(params.band_index),
        raster.nrows(),
        raster.ncols(),
    );
    let mut levels = quantize(&grad);
    suppress(&mut levels, params.scale_level);
    Ok(flood(&levels, raster.nrows(), raster.ncols()))
}

/// Segment, merge and smooth with one parameter set.
pub fn segment_scene(raster: &Raster, params: &SegmentParams) -> Result<SegmentMap> {
    let seg = segment(raster, params)?;
    let seg = merge_regions(raster, &seg, params.merge_level)?;
    smooth(&seg, raster, params.smoothing_threshold)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cost(f64);

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

type Edge = (Cost, usize, usize);

/// Complete binary tree over per-region entries with the minimum at the root.
struct MinTree {
    leaves: usize,
    nodes: Vec<Option<Edge>>,
}

impl MinTree {
    fn new(n: usize) -> Self {
        let leaves = n.next_power_of_two();
        Self {
            leaves,
            nodes: vec![None; 2 * leaves],
        }
    }

    fn get(&self, i: usize) -> Option<Edge> {
        self.nodes[self.leaves + i]
    }

    fn set(&mut self, i: usize, v: Option<Edge>) {
        let mut k = self.leaves + i;
        self.nodes[k] = v;
        while k > 1 {
            k /= 2;
            self.nodes[k] = match (self.nodes[2 * k], self.nodes[2 * k + 1]) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (x, y) => x.or(y),
            };
        }
    }

    fn min(&self) -> Option<Edge> {
        self.nodes[1]
    }
}

/// Region adjacency graph with running spectral sums.
struct RegionGraph {
    nb: usize,
    sums: Vec<f64>,
    means: Vec<f64>,
    counts: Vec<usize>,
    adj: Vec<BTreeSet<usize>>,
    alive: Vec<bool>,
    /// Region each region was merged into (itself while alive).
    parent: Vec<usize>,
}

impl RegionGraph {
    fn build(raster: &Raster, seg: &SegmentMap) -> Result<Self> {
        if raster.nrows() != seg.nrows || raster.ncols() != seg.ncols {
            return Err(Error::Dimension {
                expected: raster.npixels(),
                actual: seg.labels.len(),
            });
        }
        let rc = seg.region_count as usize;
        let nb = raster.nbands();
        let np = raster.npixels();
        let mut sums = vec![0.0; rc * nb];
        let mut counts = vec![0; rc];
        let mut adj = vec![BTreeSet::new(); rc];
        for p in 0..np {
            let a = seg.labels[p] as usize - 1;
            counts[a] += 1;
            for b in 0..nb {
                sums[a * nb + b] += raster.samples()[b * np + p] as f64;
            }
            let (r, c) = (p / seg.ncols, p % seg.ncols);
            if c + 1 < seg.ncols {
                let o = seg.labels[p + 1] as usize - 1;
                if o != a {
                    adj[a].insert(o);
                    adj[o].insert(a);
                }
            }
            if r + 1 < seg.nrows {
                let o = seg.labels[p + seg.ncols] as usize - 1;
                if o != a {
                    adj[a].insert(o);
                    adj[o].insert(a);
                }
            }
        }
        let means = (0..rc * nb)
            .map(|i| sums[i] / counts[i / nb] as f64)
            .collect();
        Ok(Self {
            nb,
            sums,
            means,
            counts,
            adj,
            alive: vec![true; rc],
            parent: (0..rc).collect(),
        })
    }

    fn cost(&self, a: usize, b: usize) -> f64 {
        let (ma, mb) = (
            &self.means[a * self.nb..(a + 1) * self.nb],
            &self.means[b * self.nb..(b + 1) * self.nb],
        );
        ma.iter()
            .zip(mb)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    /// Folds region `from` into region `into`.
    fn merge(&mut self, into: usize, from: usize) {
        for k in 0..self.nb {
            self.sums[into * self.nb + k] += self.sums[from * self.nb + k];
        }
        self.counts[into] += self.counts[from];
        self.counts[from] = 0;
        for k in 0..self.nb {
            self.means[into * self.nb + k] =
                self.sums[into * self.nb + k] / self.counts[into] as f64;
        }
        let from_adj = std::mem::take(&mut self.adj[from]);
        for n in from_adj {
            self.adj[n].remove(&from);
            if n != into {
                self.adj[n].insert(into);
                self.adj[into].insert(n);
            }
        }
        self.adj[into].remove(&from);
        self.alive[from] = false;
        self.parent[from] = into;
    }

    /// Cheapest incident edge of `r`, ties to the lowest `(lo, hi)` pair.
    fn best_edge(&self, r: usize) -> Option<Edge> {
        self.adj[r]
            .iter()
            .map(|&n| {
                let (lo, hi) = (r.min(n), r.max(n));
                (Cost(self.cost(lo, hi)), lo, hi)
            })
            .min()
    }

    fn find(&self, mut r: usize) -> usize {
        while self.parent[r] != r {
            r = self.parent[r];
        }
        r
    }

    /// Relabels the original map through the merge forest, densely by ascending
    /// surviving id.
    fn relabel(&self, seg: &SegmentMap) -> SegmentMap {
        let rc = self.parent.len();
        let mut dense = vec![0u32; rc];
        let mut next = 0;
        for (d, &alive) in dense.iter_mut().zip(&self.alive) {
            if alive {
                next += 1;
                *d = next;
            }
        }
        let root_label: Vec<u32> = (0..rc).map(|r| dense[self.find(r)]).collect();
        SegmentMap {
            nrows: seg.nrows,
            ncols: seg.ncols,
            labels: seg
                .labels
                .iter()
                .map(|&l| root_label[l as usize - 1])
                .collect(),
            region_count: next,
        }
    }
}

/// Greedily merges the closest adjacent pair (Euclidean distance of mean
/// spectra over all bands) while its cost is within the `merge_level`
/// percentile of the initial adjacent-pair costs. Level 0 is the identity.
pub fn merge_regions(raster: &Raster, seg: &SegmentMap, merge_level: f64) -> Result<SegmentMap> {
    if !(0.0..=100.0).contains(&merge_level) {
        return Err(Error::Parameter(format!(
            "merge_level must lie in [0, 100], got {merge_level}"
        )));
    }
    let mut g = RegionGraph::build(raster, seg)?;
    if merge_level == 0.0 {
        return Ok(seg.clone());
    }
    let mut costs = Vec::new();
    for a in 0..g.adj.len() {
        for &b in g.adj[a].range(a + 1..) {
            costs.push(g.cost(a, b));
        }
    }
    if costs.is_empty() {
        return Ok(seg.clone());
    }
    costs.sort_by(f64::total_cmp);
    let rank = ((merge_level / 100.0) * costs.len() as f64).ceil().max(1.0) as usize;
    let threshold = costs[rank.min(costs.len()) - 1];

    // Each region keeps its cheapest incident edge in a tournament tree, so
    // the root is always the globally cheapest adjacent pair.
    let rc = g.adj.len();
    let mut best = MinTree::new(rc);
    for r in 0..rc {
        best.set(r, g.best_edge(r));
    }
    while let Some((Cost(c), a, b)) = best.min() {
        if c > threshold {
            break;
        }
        g.merge(a, b);
        best.set(b, None);
        let mut best_a: Option<Edge> = None;
        let mut stale = Vec::new();
        for &n in &g.adj[a] {
            let (lo, hi) = (n.min(a), n.max(a));
            let e = (Cost(g.cost(lo, hi)), lo, hi);
            if best_a.is_none_or(|cur| e < cur) {
                best_a = Some(e);
            }
            match best.get(n) {
                Some(cur) if cur <= e => {
                    if cur.1 == a || cur.2 == a || cur.1 == b || cur.2 == b {
                        stale.push(n);
                    }
                }
                _ => best.set(n, Some(e)),
            }
        }
        best.set(a, best_a);
        for n in stale {
            best.set(n, g.best_edge(n));
        }
    }
    Ok(g.relabel(seg))
}

/// Absorbs every region smaller than `threshold` pixels into its adjacent
/// region with the closest mean spectrum, smallest regions first.
pub fn smooth(seg: &SegmentMap, raster: &Raster, threshold: usize) -> Result<SegmentMap> {
    let mut g = RegionGraph::build(raster, seg)?;
    if threshold <= 1 {
        return Ok(seg.clone());
    }
    let mut by_size: BTreeSet<(usize, usize)> =
        (0..g.counts.len()).map(|r| (g.counts[r], r)).collect();
    while let Some(&(size, r)) = by_size.first() {
        if size >= threshold {
            break;
        }
        let target = g.adj[r].iter().map(|&n| (Cost(g.cost(r, n)), n)).min();
        let Some((_, n)) = target else {
            // Lone region covering the whole grid.
            break;
        };
        by_size.remove(&(size, r));
        by_size.remove(&(g.counts[n], n));
        g.merge(n, r);
        by_size.insert((g.counts[n], n));
    }
    Ok(g.relabel(seg))
}

/// Exported outer boundary of one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonFeature {
    pub region_id: u32,
    /// Closed ring of `[x, y]` pixel-corner coordinates in meters; the first
    /// vertex is repeated at the end.
    pub ring: Vec<[f64; 2]>,
    pub area: f64,
    pub perimeter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonMetadata {
    pub pixel_size: f64,
    pub geometry_type: String,
    pub holes_omitted: bool,
    /// Regions whose ring encloses pixels of other regions.
    pub regions_with_holes: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonDocument {
    pub metadata: PolygonMetadata,
    pub features: Vec<PolygonFeature>,
}

/// Traces the outer boundary of the region whose top-left-most pixel is
/// `start`, on the pixel-corner lattice, keeping the region on the right.
/// Diagonal contacts are not crossed. Returns corner vertices (in `(x, y)` =
/// `(col, row)` units) and the number of unit edges walked.
fn trace_outer(
    labels: &[u32],
    nrows: usize,
    ncols: usize,
    start: usize,
) -> (Vec<(i64, i64)>, usize) {
    let id = labels[start];
    let inside = |x: i64, y: i64| -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < ncols
            && (y as usize) < nrows
            && labels[y as usize * ncols + x as usize] == id
    };
    // Cell whose center is at v + (d ± r)/2, in doubled coordinates.
    let cell = |vx: i64, vy: i64, dx: i64, dy: i64, side: i64| -> (i64, i64) {
        let (rx, ry) = (-dy * side, dx * side);
        (
            (2 * vx + dx + rx).div_euclid(2),
            (2 * vy + dy + ry).div_euclid(2),
        )
    };
    let x0 = (start % ncols) as i64;
    let y0 = (start / ncols) as i64;
    let (mut vx, mut vy) = (x0, y0);
    let (mut dx, mut dy) = (1i64, 0i64);
    let mut verts = vec![(x0, y0)];
    let mut edges = 0;
    loop {
        vx += dx;
        vy += dy;
        edges += 1;
        let (arx, ary) = cell(vx, vy, dx, dy, 1);
        let (alx, aly) = cell(vx, vy, dx, dy, -1);
        let (ndx, ndy) = if !inside(arx, ary) {
            (-dy, dx) // right
        } else if inside(alx, aly) {
            (dy, -dx) // left
        } else {
            (dx, dy)
        };
        if vx == x0 && vy == y0 && (ndx, ndy) == (1, 0) {
            break;
        }
        if (ndx, ndy) != (dx, dy) {
            verts.push((vx, vy));
        }
        dx = ndx;
        dy = ndy;
    }
    (verts, edges)
}

fn shoelace(v: &[(i64, i64)]) -> i64 {
    let n = v.len();
    let twice: i64 = (0..n)
        .map(|i| {
            let (x0, y0) = v[i];
            let (x1, y1) = v[(i + 1) % n];
            x0 * y1 - x1 * y0
        })
        .sum();
    twice.abs() / 2
}

/// One outer ring per region, scaled by the pixel size. Holes are omitted and
/// the affected regions listed in the metadata.
pub fn export_polygons(seg: &SegmentMap, header: &RasterHeader) -> PolygonDocument {
    let ps = header.pixel_size;
    let rc = seg.region_count as usize;
    let mut first = vec![usize::MAX; rc];
    for (p, &l) in seg.labels.iter().enumerate() {
        let f = &mut first[l as usize - 1];
        if *f == usize::MAX {
            *f = p;
        }
    }
    let sizes = seg.region_sizes();
    let mut with_holes = Vec::new();
    let features = first
        .iter()
        .enumerate()
        .filter(|(_, &p)| p != usize::MAX)
        .map(|(i, &p)| {
            let (verts, edges) = trace_outer(&seg.labels, seg.nrows, seg.ncols, p);
            let cells = shoelace(&verts);
            if cells as usize != sizes[i] {
                with_holes.push(i as u32 + 1);
            }
            let mut ring: Vec<[f64; 2]> = verts
                .iter()
                .map(|&(x, y)| [x as f64 * ps, y as f64 * ps])
                .collect();
            ring.push(ring[0]);
            PolygonFeature {
                region_id: i as u32 + 1,
                ring,
                area: cells as f64 * ps * ps,
                perimeter: edges as f64 * ps,
            }
        })
        .collect();
    PolygonDocument {
        metadata: PolygonMetadata {
            pixel_size: ps,
            geometry_type: "Polygon".into(),
            holes_omitted: true,
            regions_with_holes: with_holes,
        },
        features,
    }
}
