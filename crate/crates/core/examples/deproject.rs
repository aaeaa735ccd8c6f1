//! Lift pixels of a synthetic depth map into camera space and project them back.

use deixis::geometry::{deproject, project, CameraIntrinsics, Pixel};
use deixis::scene::DepthFrame;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let intr = CameraIntrinsics::new(600.0, 600.0, 320.0, 240.0, 640, 480, 0.001)?;
    // Tilted plane: 1.0 m at the left edge, 1.64 m at the right.
    let mut depth = DepthFrame::filled(640, 480, 0, intr.depth_scale);
    for y in 0..480 {
        for x in 0..640 {
            depth.set_raw(x, y, 1000 + x as u16);
        }
    }
    for (u, v) in [(0u32, 0u32), (320, 240), (639, 479), (100, 400)] {
        let z = depth.meters(u, v).expect("valid depth");
        let p = deproject(Pixel::new(f64::from(u), f64::from(v)), z, &intr)?;
        let back = project(p, &intr)?;
        println!(
            "pixel ({u:>3},{v:>3}) z={z:.3} m -> ({:+.4}, {:+.4}, {:.4}) -> ({:.3}, {:.3})",
            p.x, p.y, p.z, back.u, back.v
        );
    }
    Ok(())
}
