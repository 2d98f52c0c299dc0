use lab::grid::{GridFamily, GridParams};
use lab::Model;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let model = Model::disc();
    let mut params = GridParams::new(0.125, 5, 3, 1 << 18, 7);
    params.cover_samples = 1000;
    let family = GridFamily::build(&model, &params).unwrap();
    println!("circle build: {:?}", t0.elapsed());
    println!("constants: {:?}", family.constants);
    println!("cover: {:?}", family.cover);
    let t1 = Instant::now();
    let v = family.verify();
    println!("verify: {:?} all_ok={} sizes={:?}", t1.elapsed(), v.all_ok(), v.generation_sizes[0]);
    println!("saturated: {:?}", family.grid(0).saturated_from);

    let t2 = Instant::now();
    let model2 = Model::ball(2);
    let mut params2 = GridParams::new(0.125, 4, 3, 200_000, 7);
    params2.allow_saturation = true;
    params2.cover_samples = 1000;
    let family2 = GridFamily::build(&model2, &params2).unwrap();
    println!("sphere build: {:?}", t2.elapsed());
    println!("constants: {:?}", family2.constants);
    println!("cover: {:?}", family2.cover);
    let t3 = Instant::now();
    let v2 = family2.verify();
    println!("verify: {:?} all_ok={} sizes={:?}", t3.elapsed(), v2.all_ok(), v2.generation_sizes[0]);
    println!("saturated: {:?}", family2.grid(0).saturated_from);
}
