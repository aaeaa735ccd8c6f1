//! Segment a disc, run-length encode it and compute its robust 3D centroid,
//! with and without a depth spike inside the mask.

use deixis::geometry::CameraIntrinsics;
use deixis::scene::{compute_centroid, rle_decode, rle_encode, Bitmap, DepthFrame};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let intr = CameraIntrinsics::new(300.0, 300.0, 80.0, 60.0, 160, 120, 0.001)?;
    let mut bits = Bitmap::new(160, 120);
    for y in 0..120u32 {
        for x in 0..160u32 {
            if (f64::from(x) - 100.0).hypot(f64::from(y) - 50.0) <= 15.0 {
                bits.set(x, y, true);
            }
        }
    }
    let mask = rle_encode(&bits);
    println!("mask: {} runs, {} pixels, round trip ok: {}", mask.runs.len(), mask.area(), rle_decode(&mask)? == bits);

    let mut depth = DepthFrame::filled(160, 120, 900, intr.depth_scale);
    let clean = compute_centroid(&mask, &depth, &intr)?.expect("valid depth");
    depth.set_raw(100, 50, 9000);
    depth.set_raw(101, 50, 0);
    let spiked = compute_centroid(&mask, &depth, &intr)?.expect("valid depth");
    for (name, c) in [("clean", clean), ("spiked", spiked)] {
        println!(
            "{name:>7}: ({:+.4}, {:+.4}, {:.4}) from {} pixels",
            c.point.x, c.point.y, c.point.z, c.pixel_count
        );
    }
    Ok(())
}
