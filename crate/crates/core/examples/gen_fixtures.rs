//! Regenerates the bundled mini dataset and demo scene under `data/`.

use std::path::Path;

use interreflect::image::write_ppm16;
use interreflect::synthetic::{demo_scene, mini_dataset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let ds = mini_dataset()?;
    ds.write_dir(root.join("mini"))?;

    let scene = demo_scene("demo.ppm")?;
    let dir = root.join("demo");
    std::fs::create_dir_all(&dir)?;
    write_ppm16(dir.join("demo.ppm"), &scene.image)?;
    std::fs::write(dir.join("demo.json"), scene.annotation.to_json()? + "\n")?;
    println!("wrote {}", root.display());
    Ok(())
}
