//! Binary greyscale (P5) montages of square images.

pub const MNIST_SIDE: usize = 28;
pub const MNIST_PIXELS: usize = MNIST_SIDE * MNIST_SIDE;

/// Tiles `images` (row-major, values in `[0, 1]`, clamped) on a
/// `ceil(√n) × ceil(√n)` grid; empty cells stay black.
pub fn montage(images: &[impl AsRef<[f64]>], side: usize) -> Vec<u8> {
    let grid = (images.len() as f64).sqrt().ceil() as usize;
    let width = grid * side;
    let mut pixels = vec![0u8; width * width];
    for (k, img) in images.iter().enumerate() {
        let (gr, gc) = (k / grid, k % grid);
        for (p, v) in img.as_ref().iter().enumerate().take(side * side) {
            let (r, c) = (p / side, p % side);
            let idx = (gr * side + r) * width + gc * side + c;
            pixels[idx] = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    let mut out = format!("P5\n{width} {width}\n255\n").into_bytes();
    out.extend(pixels);
    out
}
