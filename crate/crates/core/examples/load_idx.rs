//! Loads an IDX image/label pair (the MNIST file format) and embeds it.
//!
//! cargo run --release --example load_idx -- IMAGES LABELS [N]
//!
//! Without arguments a small synthetic IDX pair is written to the temp
//! directory first, so the example also runs offline.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, WriteBytesExt};
use kernel_tsne::dataio::{IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
use kernel_tsne::prelude::*;

/// Ten 8×8 "digits": a bright horizontal bar at row `label` plus noise.
fn write_fixture(dir: &Path, count: u32) -> std::io::Result<(PathBuf, PathBuf)> {
    let (images, labels) = (dir.join("images.idx3-ubyte"), dir.join("labels.idx1-ubyte"));
    let mut fi = fs::File::create(&images)?;
    let mut fl = fs::File::create(&labels)?;
    fi.write_u32::<BigEndian>(IDX_IMAGES_MAGIC)?;
    for v in [count, 8, 8] {
        fi.write_u32::<BigEndian>(v)?;
    }
    fl.write_u32::<BigEndian>(IDX_LABELS_MAGIC)?;
    fl.write_u32::<BigEndian>(count)?;
    let mut state = 12345u32;
    for i in 0..count {
        let label = (i % 8) as u8;
        let pixels: Vec<u8> = (0..64u32)
            .map(|p| {
                state = state.wrapping_mul(1_664_525).wrapping_add(1_013_904_223);
                let noise = (state >> 26) as u8;
                if p / 8 == label as u32 { 200 + noise / 2 } else { noise }
            })
            .collect();
        fi.write_all(&pixels)?;
        fl.write_u8(label)?;
    }
    Ok((images, labels))
}

fn main() -> std::result::Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (images, labels) = match args.as_slice() {
        [i, l, ..] => (PathBuf::from(i), PathBuf::from(l)),
        _ => {
            let dir = std::env::temp_dir().join("kernel_tsne_idx_example");
            fs::create_dir_all(&dir)?;
            println!("no paths given, writing a fixture to {}", dir.display());
            write_fixture(&dir, 400)?
        }
    };
    let n: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1000);

    let mut data = load_idx(&images, Some(&labels))?;
    println!("loaded {} images of {} pixels", data.n(), data.dim());
    if data.n() > n {
        data = data.subsample(n, 0)?;
    }

    let result = run_reduction(data.x.view(), &OptimizerConfig::default())?;
    let t = trustworthiness(data.x.view(), result.embedding.view(), 10)?;
    println!("{} points, final KL {:.4}, T(10) = {t:.4}", data.n(), result.final_kl());

    fs::create_dir_all("out")?;
    render_scatter_svg(result.embedding.view(), data.labels.as_deref(), "out/idx_scatter.svg")?;
    println!("scatter written to out/idx_scatter.svg");
    Ok(())
}
