//! Synthetic shapes and small graph oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BinaryHeap, VecDeque};
use std::cmp::Reverse;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectrumshape::raster::{save_shape, BinaryShape};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rasterizes `inside(row, col)` over an `h × w` canvas.
pub fn raster(
    w: usize,
    h: usize,
    id: &str,
    label: &str,
    inside: impl Fn(f64, f64) -> bool,
) -> BinaryShape {
    let mask: Vec<bool> = (0..h * w)
        .map(|i| inside((i / w) as f64, (i % w) as f64))
        .collect();
    BinaryShape::from_unpadded(w, h, &mask, id, label).expect("synthetic shape has foreground")
}

pub fn bar(len: usize, thick: usize, id: &str) -> BinaryShape {
    raster(len + 4, thick + 4, id, "bar", |r, c| {
        (2.0..2.0 + thick as f64).contains(&r) && (2.0..2.0 + len as f64).contains(&c)
    })
}

pub fn disk(radius: f64, id: &str) -> BinaryShape {
    let s = (2.0 * radius).ceil() as usize + 5;
    let m = s as f64 / 2.0 - 0.5;
    raster(s, s, id, "disk", |r, c| (r - m).powi(2) + (c - m).powi(2) <= radius * radius)
}

pub fn ring(outer: f64, inner: f64, id: &str) -> BinaryShape {
    let s = (2.0 * outer).ceil() as usize + 5;
    let m = s as f64 / 2.0 - 0.5;
    raster(s, s, id, "ring", |r, c| {
        let d2 = (r - m).powi(2) + (c - m).powi(2);
        d2 <= outer * outer && d2 > inner * inner
    })
}

pub fn cross(arm: usize, thick: usize, id: &str) -> BinaryShape {
    let s = 2 * arm + thick + 4;
    let lo = (2 + arm) as f64;
    let hi = lo + thick as f64;
    let span = 2.0..(s - 2) as f64;
    raster(s, s, id, "cross", |r, c| {
        ((lo..hi).contains(&r) && span.contains(&c)) || ((lo..hi).contains(&c) && span.contains(&r))
    })
}

/// Four geometrically distinct classes with jittered sizes, `per_class` each.
pub fn four_class_corpus(per_class: usize, seed: u64) -> Vec<BinaryShape> {
    let mut g = rng(seed);
    let mut out = Vec::new();
    for i in 0..per_class {
        let n = i + 1;
        out.push(bar(g.random_range(36..48), g.random_range(6..9), &format!("bar-{n:02}")));
        out.push(disk(g.random_range(12.0..17.0), &format!("disk-{n:02}")));
        let outer = g.random_range(15.0..20.0);
        out.push(ring(outer, outer - g.random_range(4.0..6.0), &format!("ring-{n:02}")));
        out.push(cross(g.random_range(14..20), g.random_range(5..8), &format!("cross-{n:02}")));
    }
    out
}

/// Union of random disks and rectangles on a canvas of at most `max × max`.
pub fn random_blob(g: &mut ChaCha8Rng, max: usize, id: &str) -> BinaryShape {
    let w = g.random_range(4..=max);
    let h = g.random_range(4..=max);
    let parts: Vec<(bool, f64, f64, f64, f64)> = (0..g.random_range(1..5))
        .map(|_| {
            (
                g.random_bool(0.5),
                g.random_range(0.0..h as f64),
                g.random_range(0.0..w as f64),
                g.random_range(1.0..(h.max(w) as f64 / 2.0).max(1.5)),
                g.random_range(1.0..(h.max(w) as f64 / 2.0).max(1.5)),
            )
        })
        .collect();
    let (r0, c0) = (parts[0].1.floor(), parts[0].2.floor());
    raster(w, h, id, "blob", move |r, c| {
        // the first part's anchor pixel keeps the blob non-empty
        (r == r0 && c == c0)
            || parts.iter().any(|&(is_disk, pr, pc, a, b)| {
                if is_disk {
                    (r - pr).powi(2) + (c - pc).powi(2) <= a * a
                } else {
                    (r - pr).abs() <= a / 2.0 && (c - pc).abs() <= b / 2.0
                }
            })
    })
}

fn ascii(rows: &[&str], id: &str) -> BinaryShape {
    BinaryShape::from_ascii(rows, id, "inv").unwrap()
}

/// Twenty shapes covering convex, concave, holed, thin, chiral and
/// disconnected cases.
pub fn invariance_corpus() -> Vec<BinaryShape> {
    let mut v = vec![
        bar(20, 5, "inv-bar"),
        disk(9.0, "inv-disk"),
        ring(11.0, 6.0, "inv-ring"),
        cross(8, 4, "inv-cross"),
        raster(24, 16, "inv-ellipse", "inv", |r, c| {
            ((r - 7.5) / 7.0).powi(2) + ((c - 11.5) / 11.0).powi(2) <= 1.0
        }),
        raster(20, 20, "inv-triangle", "inv", |r, c| c <= r && r < 18.0),
        raster(18, 18, "inv-l", "inv", |r, c| {
            (2.0..16.0).contains(&r) && (2.0..6.0).contains(&c) || (12.0..16.0).contains(&r) && (2.0..12.0).contains(&c)
        }),
        raster(20, 16, "inv-t", "inv", |r, c| {
            (1.0..5.0).contains(&r) && (1.0..19.0).contains(&c) || (5.0..15.0).contains(&r) && (8.0..12.0).contains(&c)
        }),
        raster(22, 22, "inv-spiral", "inv", |r, c| {
            // chiral hook
            (2.0..20.0).contains(&r) && (2.0..5.0).contains(&c)
                || (2.0..5.0).contains(&r) && (2.0..20.0).contains(&c)
                || (2.0..14.0).contains(&r) && (17.0..20.0).contains(&c)
                || (11.0..14.0).contains(&r) && (9.0..20.0).contains(&c)
        }),
        raster(26, 14, "inv-dumbbell", "inv", |r, c| {
            (r - 6.5).powi(2) + (c - 5.0).powi(2) <= 20.0
                || (r - 6.5).powi(2) + (c - 20.0).powi(2) <= 30.0
                || (5.0..8.0).contains(&r) && (5.0..20.0).contains(&c)
        }),
        raster(16, 16, "inv-two-squares", "inv", |r, c| {
            (1.0..6.0).contains(&r) && (1.0..6.0).contains(&c) || (8.0..15.0).contains(&r) && (9.0..14.0).contains(&c)
        }),
        raster(25, 25, "inv-crescent", "inv", |r, c| {
            (r - 12.0).powi(2) + (c - 12.0).powi(2) <= 110.0 && (r - 9.0).powi(2) + (c - 16.0).powi(2) > 70.0
        }),
        raster(20, 12, "inv-staircase", "inv", |r, c| c < 4.0 * (r / 2.0).floor() + 4.0 && c >= 4.0 * (r / 3.0).floor()),
        raster(21, 21, "inv-square-hole", "inv", |r, c| {
            let outer = (1.0..20.0).contains(&r) && (1.0..20.0).contains(&c);
            let hole = (6.0..11.0).contains(&r) && (5.0..14.0).contains(&c);
            outer && !hole
        }),
        ascii(&["#"], "inv-pixel"),
        ascii(&["##", "##"], "inv-block"),
        ascii(
            &[
                "#......",
                ".#.....",
                "..#....",
                "...##..",
                ".....#.",
                "......#",
            ],
            "inv-diagonal",
        ),
        ascii(
            &[
                "..####...",
                ".######..",
                "########.",
                "###..####",
                "##....###",
                "###..###.",
                ".######..",
                "..###....",
            ],
            "inv-lumpy",
        ),
        raster(30, 10, "inv-comb", "inv", |r, c| {
            (1.0..4.0).contains(&r) && (1.0..29.0).contains(&c) || (4.0..9.0).contains(&r) && (1.0..29.0).contains(&c) && (c as usize % 5) < 2
        }),
    ];
    v.push({
        let mut g = rng(20);
        random_blob(&mut g, 24, "inv-blob")
    });
    assert_eq!(v.len(), 20);
    v
}

/// Exact chamfer distances by Dijkstra over the 8-neighbor grid graph with
/// weights 3 and 4, seeded at every background pixel.
pub fn dijkstra_chamfer(shape: &BinaryShape) -> Vec<u32> {
    let (w, h) = (shape.width(), shape.height());
    let mut dist = vec![u32::MAX; w * h];
    let mut heap = BinaryHeap::new();
    for i in 0..w * h {
        if !shape.mask()[i] {
            dist[i] = 0;
            heap.push(Reverse((0u32, i)));
        }
    }
    while let Some(Reverse((d, i))) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        let (r, c) = ((i / w) as isize, (i % w) as isize);
        for (dr, dc) in [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)] {
            let (nr, nc) = (r + dr, c + dc);
            if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                continue;
            }
            let j = nr as usize * w + nc as usize;
            let nd = d + if dr != 0 && dc != 0 { 4 } else { 3 };
            if nd < dist[j] {
                dist[j] = nd;
                heap.push(Reverse((nd, j)));
            }
        }
    }
    dist
}

/// Number of 8-connected components among `cells` of a `w`-wide grid.
pub fn components8(mask: &[bool], w: usize) -> usize {
    let h = mask.len() / w;
    let mut seen = vec![false; mask.len()];
    let mut count = 0;
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let (r, c) = ((i / w) as isize, (i % w) as isize);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                        continue;
                    }
                    let j = nr as usize * w + nc as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    count
}

/// Writes shapes as `<shape_id>.pgm` files under `dir`.
pub fn write_dataset(dir: &Path, shapes: &[BinaryShape]) {
    std::fs::create_dir_all(dir).unwrap();
    for s in shapes {
        save_shape(s, dir.join(format!("{}.pgm", s.shape_id()))).unwrap();
    }
}

/// Random unit-mass weight vector with roughly `sparsity` of the bins zeroed.
pub fn random_unit(g: &mut ChaCha8Rng, bins: usize, sparsity: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..bins)
        .map(|_| if g.random_bool(sparsity) { 0.0 } else { g.random_range(0.0..1.0) })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        v[g.random_range(0..bins)] = 1.0;
    }
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}
