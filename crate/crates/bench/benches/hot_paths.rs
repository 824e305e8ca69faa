use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use image::Rgb;
use std::hint::black_box;
use vivid_forge_core::flow::block_match_flow;
use vivid_forge_core::geometry::{expand, hull};
use vivid_forge_core::model::{apply_mask, Fps, Frame, FrameSequence, Mask, MaskSequence};

fn blob(side: u32) -> Mask {
    let c = f64::from(side) / 2.0;
    Mask::from_fn(side, side, |x, y| {
        let (dx, dy) = (f64::from(x) - c, f64::from(y) - c);
        dx * dx + dy * dy * 2.0 <= (c * 0.6).powi(2) || (x % 17 == 0 && y > side / 3 && y < side / 2)
    })
}

fn textured(side: u32, shift: u32) -> Frame {
    Frame::from_fn(side, side, |x, y| {
        let v = ((x.wrapping_sub(shift)).wrapping_mul(2_654_435_761) ^ y.wrapping_mul(40_503)) >> 24;
        Rgb([v as u8, (v as u8).wrapping_mul(3), 255 - v as u8])
    })
}

fn geometry(c: &mut Criterion) {
    let mut g = c.benchmark_group("geometry");
    for side in [128u32, 512] {
        let m = blob(side);
        g.bench_with_input(BenchmarkId::new("expand", side), &m, |b, m| b.iter(|| expand(black_box(m), 7)));
        g.bench_with_input(BenchmarkId::new("hull", side), &m, |b, m| b.iter(|| hull(black_box(m))));
    }
    g.finish();
}

fn flow(c: &mut Criterion) {
    let mut g = c.benchmark_group("flow");
    g.sample_size(20);
    for side in [128u32, 256] {
        let (a, b) = (textured(side, 0), textured(side, 1));
        g.bench_function(BenchmarkId::new("block_match", side), |bch| {
            bch.iter(|| block_match_flow(black_box(&a), black_box(&b)))
        });
    }
    g.finish();
}

fn masking(c: &mut Criterion) {
    let frames: Vec<Frame> = (0..16).map(|i| textured(256, i)).collect();
    let video = FrameSequence::new(frames, Fps::integer(8).unwrap(), "bench").unwrap();
    let masks = MaskSequence::new(vec![blob(256); 16]).unwrap();
    c.bench_function("apply_mask/16x256", |b| b.iter(|| apply_mask(black_box(&video), black_box(&masks))));
}

criterion_group!(benches, geometry, flow, masking);
criterion_main!(benches);
