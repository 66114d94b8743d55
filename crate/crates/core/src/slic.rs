//! SLIC superpixels: local k-means in joint intensity and position space,
//! followed by a connectivity pass that makes every block a single
//! face-connected region.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::grid::{Grid, Shape};

#[derive(Clone, Debug, PartialEq)]
pub struct SlicParams {
    /// Requested number of blocks.
    pub target_count: usize,
    /// Weight of the spatial term relative to the feature term.
    pub compactness: f64,
    pub max_iters: usize,
    /// Components smaller than this fraction of `N / target_count` are
    /// absorbed into a neighbour.
    pub conn_min_fraction: f64,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self {
            target_count: 100,
            compactness: 0.1,
            max_iters: 10,
            conn_min_fraction: 0.25,
        }
    }
}

impl SlicParams {
    pub fn validate(&self) -> Result<()> {
        if self.target_count == 0 {
            return Err(Error::param("target_count", "must be at least 1"));
        }
        if !(self.compactness > 0.0 && self.compactness.is_finite()) {
            return Err(Error::param("compactness", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        if !(self.conn_min_fraction > 0.0 && self.conn_min_fraction <= 1.0) {
            return Err(Error::param("conn_min_fraction", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Partition of the lattice into face-connected blocks with ids `0..M`.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperpixelMap {
    shape: Shape,
    block_ids: Vec<u32>,
    num_blocks: usize,
}

impl SuperpixelMap {
    /// Wraps an existing id buffer. Ids must cover `0..M` without gaps;
    /// connectivity is not checked here.
    pub fn new(shape: Shape, block_ids: Vec<u32>) -> Result<Self> {
        if block_ids.len() != shape.len() {
            return Err(Error::InvalidShape(format!(
                "{} block ids for dims {:?}",
                block_ids.len(),
                shape.dims()
            )));
        }
        let num_blocks = block_ids.iter().map(|&b| b as usize + 1).max().unwrap_or(0);
        let mut seen = vec![false; num_blocks];
        for &b in &block_ids {
            seen[b as usize] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::param(
                "block_ids",
                format!("ids are not contiguous, {missing} is unused"),
            ));
        }
        Ok(Self {
            shape,
            block_ids,
            num_blocks,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn block_ids(&self) -> &[u32] {
        &self.block_ids
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    /// Pixel indices of every block, ascending within each block.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_blocks];
        for (i, &b) in self.block_ids.iter().enumerate() {
            out[b as usize].push(i);
        }
        out
    }
}

/// Labels face-connected runs of equal ids. Component ids follow the scan
/// order of each component's first pixel.
pub fn connected_components(shape: &Shape, ids: &[u32]) -> SuperpixelMap {
    let (components, _) = label_components(shape, ids);
    let num_blocks = components.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
    SuperpixelMap {
        shape: shape.clone(),
        block_ids: components,
        num_blocks,
    }
}

fn label_components(shape: &Shape, ids: &[u32]) -> (Vec<u32>, Vec<usize>) {
    const UNSET: u32 = u32::MAX;
    let mut comp = vec![UNSET; ids.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for seed in 0..ids.len() {
        if comp[seed] != UNSET {
            continue;
        }
        let label = sizes.len() as u32;
        comp[seed] = label;
        queue.push_back(seed);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            shape.for_each_face_neighbor(i, |n| {
                if let Some(j) = n {
                    if comp[j] == UNSET && ids[j] == ids[i] {
                        comp[j] = label;
                        queue.push_back(j);
                    }
                }
            });
        }
        sizes.push(size);
    }
    (comp, sizes)
}

/// Splits every id into its face-connected components and absorbs components
/// smaller than `conn_min_fraction * N / target_count` into the largest
/// adjacent block. Output ids are compacted in scan order.
pub fn enforce_connectivity(shape: &Shape, raw_ids: &[u32], params: &SlicParams) -> Result<SuperpixelMap> {
    params.validate()?;
    if raw_ids.len() != shape.len() {
        return Err(Error::InvalidShape(format!(
            "{} ids for dims {:?}",
            raw_ids.len(),
            shape.dims()
        )));
    }
    let (comp, sizes) = label_components(shape, raw_ids);
    let min_size = params.conn_min_fraction * shape.len() as f64 / params.target_count as f64;

    let ncomp = sizes.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
    for (i, &c) in comp.iter().enumerate() {
        members[c as usize].push(i);
    }
    let mut size = sizes;
    let mut parent: Vec<usize> = (0..ncomp).collect();

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for c in 0..ncomp {
        if find(&mut parent, c) != c || (size[c] as f64) >= min_size {
            continue;
        }
        let mut best: Option<usize> = None;
        for &i in &members[c] {
            shape.for_each_face_neighbor(i, |n| {
                let Some(j) = n else { return };
                let r = find(&mut parent, comp[j] as usize);
                if r == c {
                    return;
                }
                best = match best {
                    Some(b) if size[b] > size[r] || (size[b] == size[r] && b < r) => Some(b),
                    _ => Some(r),
                };
            });
        }
        if let Some(target) = best {
            parent[c] = target;
            size[target] += size[c];
            let moved = std::mem::take(&mut members[c]);
            members[target].extend(moved);
        }
    }

    let mut remap = vec![u32::MAX; ncomp];
    let mut next = 0u32;
    let block_ids = comp
        .iter()
        .map(|&c| {
            let r = find(&mut parent, c as usize);
            if remap[r] == u32::MAX {
                remap[r] = next;
                next += 1;
            }
            remap[r]
        })
        .collect();
    Ok(SuperpixelMap {
        shape: shape.clone(),
        block_ids,
        num_blocks: next as usize,
    })
}

/// SLIC on a single-channel image.
pub fn slic_segment(image: &Grid, params: &SlicParams) -> Result<SuperpixelMap> {
    slic_segment_channels(std::slice::from_ref(image), params)
}

/// SLIC on a multichannel image; every channel is min-max scaled to [0, 1].
pub fn slic_segment_channels(channels: &[Grid], params: &SlicParams) -> Result<SuperpixelMap> {
    params.validate()?;
    let Some(first) = channels.first() else {
        return Err(Error::param("image", "no channels given"));
    };
    let shape = first.shape().clone();
    for ch in channels {
        shape.ensure_same_dims(ch.shape())?;
    }
    let n = shape.len();
    if n == 0 {
        return Err(Error::param("image", "image is empty"));
    }
    if params.target_count > n {
        return Err(Error::param(
            "target_count",
            format!("{} exceeds the pixel count {n}", params.target_count),
        ));
    }

    let features: Vec<Vec<f64>> = channels.iter().map(|c| min_max_scale(c.values())).collect();
    let lattice = Lattice::new(&shape);
    let raw = run_kmeans(&lattice, &features, params);
    enforce_connectivity(&shape, &raw, params)
}

fn min_max_scale(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|&v| (v - lo) / range).collect()
}

/// 2D inputs are handled as 3D with a unit leading axis.
struct Lattice {
    dims: [usize; 3],
    ndim: usize,
}

impl Lattice {
    fn new(shape: &Shape) -> Self {
        let d = shape.dims();
        let dims = if d.len() == 2 {
            [1, d[0], d[1]]
        } else {
            [d[0], d[1], d[2]]
        };
        Self { dims, ndim: d.len() }
    }

    fn len(&self) -> usize {
        self.dims.iter().product()
    }

    fn index(&self, c: [usize; 3]) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    fn coords(&self, i: usize) -> [usize; 3] {
        let x = i % self.dims[2];
        let y = (i / self.dims[2]) % self.dims[1];
        let z = i / (self.dims[1] * self.dims[2]);
        [z, y, x]
    }

    /// Axes that exist in the original shape.
    fn active_axes(&self) -> std::ops::Range<usize> {
        3 - self.ndim..3
    }
}

#[derive(Clone, Debug)]
struct Center {
    pos: [f64; 3],
    feat: Vec<f64>,
}

/// Grid cell counts per axis whose product does not exceed `target`.
fn grid_counts(lattice: &Lattice, side: f64, target: usize) -> [usize; 3] {
    let mut counts = [1usize; 3];
    for a in lattice.active_axes() {
        let d = lattice.dims[a];
        counts[a] = ((d as f64 / side).ceil() as usize).clamp(1, d);
    }
    while counts.iter().product::<usize>() > target {
        let mut axis = None;
        for a in lattice.active_axes() {
            if counts[a] > 1 && axis.is_none_or(|b: usize| counts[a] > counts[b]) {
                axis = Some(a);
            }
        }
        match axis {
            Some(a) => counts[a] -= 1,
            None => break,
        }
    }
    counts
}

fn gradient_magnitude(lattice: &Lattice, features: &[Vec<f64>], c: [usize; 3]) -> f64 {
    let mut g = 0.0;
    for a in lattice.active_axes() {
        let mut lo = c;
        let mut hi = c;
        lo[a] = c[a].saturating_sub(1);
        hi[a] = (c[a] + 1).min(lattice.dims[a] - 1);
        let (il, ih) = (lattice.index(lo), lattice.index(hi));
        for ch in features {
            g += (ch[ih] - ch[il]).abs();
        }
    }
    g
}

fn initial_centers(lattice: &Lattice, features: &[Vec<f64>], side: f64, target: usize) -> Vec<Center> {
    let counts = grid_counts(lattice, side, target);
    let steps: Vec<f64> = (0..3).map(|a| lattice.dims[a] as f64 / counts[a] as f64).collect();
    let mut centers = Vec::with_capacity(counts.iter().product());
    for iz in 0..counts[0] {
        for iy in 0..counts[1] {
            for ix in 0..counts[2] {
                let idx = [iz, iy, ix];
                let mut pos = [0.0; 3];
                let mut pixel = [0usize; 3];
                for a in 0..3 {
                    pos[a] = steps[a] * (idx[a] as f64 + 0.5) - 0.5;
                    pixel[a] = (pos[a].round().max(0.0) as usize).min(lattice.dims[a] - 1);
                }

                // move to the lowest-gradient pixel of the 3^ndim neighbourhood
                let here = gradient_magnitude(lattice, features, pixel);
                let mut best = (here, pixel);
                let span = |a: usize| {
                    if lattice.active_axes().contains(&a) {
                        pixel[a].saturating_sub(1)..=(pixel[a] + 1).min(lattice.dims[a] - 1)
                    } else {
                        pixel[a]..=pixel[a]
                    }
                };
                for z in span(0) {
                    for y in span(1) {
                        for x in span(2) {
                            let g = gradient_magnitude(lattice, features, [z, y, x]);
                            if g < best.0 {
                                best = (g, [z, y, x]);
                            }
                        }
                    }
                }
                if best.0 < here {
                    pixel = best.1;
                    pos = pixel.map(|v| v as f64);
                }
                let i = lattice.index(pixel);
                centers.push(Center {
                    pos,
                    feat: features.iter().map(|ch| ch[i]).collect(),
                });
            }
        }
    }
    centers
}

fn run_kmeans(lattice: &Lattice, features: &[Vec<f64>], params: &SlicParams) -> Vec<u32> {
    let n = lattice.len();
    let side = (n as f64 / params.target_count as f64).powf(1.0 / lattice.ndim as f64);
    let spatial_weight = (params.compactness / side).powi(2);
    let mut centers = initial_centers(lattice, features, side, params.target_count);

    let joint_distance = |c: &Center, i: usize, coords: [usize; 3]| -> f64 {
        let df: f64 = features.iter().zip(&c.feat).map(|(ch, &f)| (ch[i] - f).powi(2)).sum();
        let ds: f64 = (0..3).map(|a| (coords[a] as f64 - c.pos[a]).powi(2)).sum();
        df + ds * spatial_weight
    };

    let mut labels = vec![u32::MAX; n];
    let mut best = vec![f64::INFINITY; n];
    for _ in 0..params.max_iters {
        let previous = labels.clone();
        labels.fill(u32::MAX);
        best.fill(f64::INFINITY);

        for (k, c) in centers.iter().enumerate() {
            let mut lo = [0usize; 3];
            let mut hi = [0usize; 3];
            for a in 0..3 {
                let d = lattice.dims[a];
                lo[a] = (c.pos[a] - side).floor().max(0.0) as usize;
                hi[a] = ((c.pos[a] + side).ceil().max(0.0) as usize).min(d - 1);
            }
            for z in lo[0]..=hi[0] {
                for y in lo[1]..=hi[1] {
                    for x in lo[2]..=hi[2] {
                        let coords = [z, y, x];
                        let i = lattice.index(coords);
                        let dist = joint_distance(c, i, coords);
                        if dist < best[i] {
                            best[i] = dist;
                            labels[i] = k as u32;
                        }
                    }
                }
            }
        }

        // pixels outside every search window fall back to a global search
        for i in 0..n {
            if labels[i] != u32::MAX {
                continue;
            }
            let coords = lattice.coords(i);
            for (k, c) in centers.iter().enumerate() {
                let dist = joint_distance(c, i, coords);
                if dist < best[i] {
                    best[i] = dist;
                    labels[i] = k as u32;
                }
            }
        }

        if labels == previous {
            break;
        }

        let nch = features.len();
        let mut sums = vec![0.0; centers.len() * (3 + nch)];
        let mut counts = vec![0usize; centers.len()];
        for i in 0..n {
            let k = labels[i] as usize;
            let coords = lattice.coords(i);
            let row = &mut sums[k * (3 + nch)..(k + 1) * (3 + nch)];
            for a in 0..3 {
                row[a] += coords[a] as f64;
            }
            for (ch, slot) in features.iter().zip(&mut row[3..]) {
                *slot += ch[i];
            }
            counts[k] += 1;
        }
        for (k, c) in centers.iter_mut().enumerate() {
            if counts[k] == 0 {
                continue;
            }
            let m = counts[k] as f64;
            let row = &sums[k * (3 + nch)..(k + 1) * (3 + nch)];
            for a in 0..3 {
                c.pos[a] = row[a] / m;
            }
            for (f, &s) in c.feat.iter_mut().zip(&row[3..]) {
                *f = s / m;
            }
        }
    }
    labels
}
