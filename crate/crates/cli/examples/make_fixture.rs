//! Regenerates the synthetic fixture used by the `report` golden test.
//!
//! Usage: cargo run -p dsdist-cli --example make_fixture -- <out-dir>
//!
//! Writes primary.fv, near.fv, far.fv, and 8x8 prediction/mask PGMs for
//! every secondary image. Predictions get noisier the farther the dataset.

use std::fs;
use std::path::PathBuf;

use dsdist_core::performance::encode_pgm;
use dsdist_core::synth::{generate, NormalStream, SynthSpec};
use dsdist_core::write_fvec;

const SIDE: usize = 8;

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).expect("output directory"));
    fs::create_dir_all(dir.join("preds")).unwrap();
    fs::create_dir_all(dir.join("masks")).unwrap();

    let primary = generate(&SynthSpec::gaussian("primary", 30, 12, 0.0, 1)).unwrap();
    write_fvec(&primary, dir.join("primary.fv")).unwrap();

    let mut stream = NormalStream::new(42);
    for (name, shift, seed, noise) in [("near", 0.5, 2, 0.15), ("far", 3.0, 3, 0.45)] {
        let m = generate(&SynthSpec::gaussian(name, 20, 12, shift, seed)).unwrap();
        write_fvec(&m, dir.join(format!("{name}.fv"))).unwrap();
        for id in m.image_ids() {
            // a random axis-aligned rectangle as the crack mask
            let x0 = (stream.uniform() * 5.0) as usize;
            let y0 = (stream.uniform() * 5.0) as usize;
            let mut mask = vec![0u8; SIDE * SIDE];
            let mut pred = vec![0u8; SIDE * SIDE];
            for y in 0..SIDE {
                for x in 0..SIDE {
                    let inside = (x0..x0 + 3).contains(&x) && (y0..y0 + 2).contains(&y);
                    let truth = if inside { 0.8 } else { 0.2 };
                    let p = (truth + noise * stream.normal()).clamp(0.0, 1.0);
                    mask[y * SIDE + x] = if inside { 255 } else { 0 };
                    pred[y * SIDE + x] = (p * 255.0).round() as u8;
                }
            }
            fs::write(dir.join("masks").join(format!("{id}.pgm")), encode_pgm(SIDE, SIDE, &mask)).unwrap();
            fs::write(dir.join("preds").join(format!("{id}.pgm")), encode_pgm(SIDE, SIDE, &pred)).unwrap();
        }
    }
}
