// SPDX-License-Identifier: Apache-2.0

//! Writes the synthetic benchmark set in GSRC text format.
//!
//! Block, net and terminal counts follow the public GSRC n-series and the
//! MCNC ami33/ami49 suites. Nets are drawn with spatial locality around a
//! hidden reference placement so the instances are routable.
//!
//! Usage: `cargo run --example gen_bench -- <out-dir>`

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Spec {
    name: &'static str,
    blocks: usize,
    nets: usize,
    terminals: usize,
    pins: usize,
    hard: bool,
    area: (f64, f64),
}

const SUITE: [Spec; 8] = [
    Spec { name: "n10", blocks: 10, nets: 118, terminals: 69, pins: 248, hard: false, area: (2.0e3, 4.0e4) },
    Spec { name: "n30", blocks: 30, nets: 349, terminals: 212, pins: 732, hard: false, area: (2.0e3, 3.0e4) },
    Spec { name: "n50", blocks: 50, nets: 485, terminals: 209, pins: 1067, hard: false, area: (2.0e3, 2.5e4) },
    Spec { name: "n100", blocks: 100, nets: 885, terminals: 334, pins: 1873, hard: false, area: (1.0e3, 1.5e4) },
    Spec { name: "n200", blocks: 200, nets: 1585, terminals: 564, pins: 3487, hard: false, area: (1.0e3, 1.2e4) },
    Spec { name: "n300", blocks: 300, nets: 1893, terminals: 569, pins: 3975, hard: false, area: (1.0e3, 1.2e4) },
    Spec { name: "ami33", blocks: 33, nets: 123, terminals: 42, pins: 480, hard: true, area: (1.0e4, 2.5e5) },
    Spec { name: "ami49", blocks: 49, nets: 408, terminals: 22, pins: 953, hard: true, area: (1.0e4, 4.0e6) },
];

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp().round()
}

/// Net degrees summing to `pins`: two plus a geometric tail, then nudged
/// one pin at a time until the total matches.
fn degrees(rng: &mut ChaCha8Rng, nets: usize, pins: usize, cap: usize) -> Vec<usize> {
    let extra = (pins as f64 / nets as f64 - 2.0).max(0.0);
    let p = 1.0 / (1.0 + extra);
    let mut d: Vec<usize> = (0..nets)
        .map(|_| {
            let mut k = 2;
            while k < cap && rng.gen::<f64>() > p {
                k += 1;
            }
            k
        })
        .collect();
    let mut total: usize = d.iter().sum();
    while total != pins {
        let i = rng.gen_range(0..nets);
        if total < pins && d[i] < cap {
            d[i] += 1;
            total += 1;
        } else if total > pins && d[i] > 2 {
            d[i] -= 1;
            total -= 1;
        }
    }
    d
}

fn generate(spec: &Spec, seed: u64) -> (String, String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let areas: Vec<f64> = (0..spec.blocks).map(|_| log_uniform(&mut rng, spec.area)).collect();
    let total: f64 = areas.iter().sum();
    let side = (total / 0.8).sqrt();
    let names: Vec<String> = (0..spec.blocks)
        .map(|i| if spec.hard { format!("bk{}", i + 1) } else { format!("sb{i}") })
        .collect();

    let mut blocks = String::new();
    let _ = writeln!(blocks, "UCSC blocks 1.0\n# synthetic instance {}\n", spec.name);
    let (soft, hard) = if spec.hard { (0, spec.blocks) } else { (spec.blocks, 0) };
    let _ = writeln!(blocks, "NumSoftRectangularBlocks : {soft}");
    let _ = writeln!(blocks, "NumHardRectilinearBlocks : {hard}");
    let _ = writeln!(blocks, "NumTerminals : {}\n", spec.terminals);
    for (name, &a) in names.iter().zip(&areas) {
        if spec.hard {
            let aspect: f64 = rng.gen_range(0.4..2.5);
            let w = (a * aspect).sqrt().round().max(1.0);
            let h = (a / w).round().max(1.0);
            let _ = writeln!(blocks, "{name} hardrectilinear 4 (0, 0) (0, {h}) ({w}, {h}) ({w}, 0)");
        } else {
            let _ = writeln!(blocks, "{name} softrectangular {a} 0.333 3.000");
        }
    }
    let _ = writeln!(blocks);
    for t in 1..=spec.terminals {
        let _ = writeln!(blocks, "p{t} terminal");
    }

    // Hidden reference positions drive net locality.
    let pos: Vec<(f64, f64)> = (0..spec.blocks).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
    let terms: Vec<(f64, f64)> = (0..spec.terminals)
        .map(|i| {
            let s = (i as f64 + 0.5) / spec.terminals as f64 * 4.0;
            match s as usize {
                0 => (s, 0.0),
                1 => (1.0, s - 1.0),
                2 => (3.0 - s, 1.0),
                _ => (0.0, 4.0 - s),
            }
        })
        .collect();
    let mut nets = String::new();
    let mut bodies = Vec::new();
    let mut pins = 0;
    let terminal_share = spec.terminals as f64 / spec.nets as f64;
    let ks = degrees(&mut rng, spec.nets, spec.pins, 10.min(spec.blocks + 1));
    for (n, &k) in ks.iter().enumerate() {
        let seed_block = rng.gen_range(0..spec.blocks);
        let (sx, sy) = pos[seed_block];
        let mut order: Vec<usize> = (0..spec.blocks).filter(|&b| b != seed_block).collect();
        let d = |b: usize| (pos[b].0 - sx).powi(2) + (pos[b].1 - sy).powi(2);
        order.sort_by(|&a, &b| d(a).total_cmp(&d(b)));
        let mut members = vec![names[seed_block].clone()];
        let want_terminal = n < spec.terminals || rng.gen::<f64>() < terminal_share * 0.3;
        let block_pins = if want_terminal { k - 1 } else { k };
        // Partners come from a small neighborhood of the seed block.
        let pool = (block_pins * 2).clamp(3, spec.blocks - 1).min(order.len());
        let mut picked: Vec<usize> = Vec::new();
        while picked.len() + 1 < block_pins && picked.len() < pool {
            let b = order[rng.gen_range(0..pool)];
            if !picked.contains(&b) {
                picked.push(b);
            }
        }
        members.extend(picked.iter().map(|&b| names[b].clone()));
        if want_terminal {
            let t = if n < spec.terminals {
                n
            } else {
                (0..spec.terminals)
                    .min_by(|&a, &b| {
                        let e = |t: usize| (terms[t].0 - sx).powi(2) + (terms[t].1 - sy).powi(2);
                        e(a).total_cmp(&e(b))
                    })
                    .unwrap_or(0)
            };
            members.push(format!("p{}", t + 1));
        }
        pins += members.len();
        let mut body = format!("NetDegree : {}\n", members.len());
        for m in &members {
            let _ = writeln!(body, "{m} B");
        }
        bodies.push(body);
    }
    let _ = writeln!(nets, "UCLA nets 1.0\n# synthetic instance {}\n", spec.name);
    let _ = writeln!(nets, "NumNets : {}\nNumPins : {pins}\n", spec.nets);
    for b in bodies {
        nets.push_str(&b);
    }

    let mut pl = String::new();
    let _ = writeln!(pl, "UCLA pl 1.0\n# synthetic instance {}\n", spec.name);
    for (t, &(x, y)) in terms.iter().enumerate() {
        let _ = writeln!(pl, "p{} {} {}", t + 1, (x * side).round(), (y * side).round());
    }
    (blocks, nets, pl)
}

fn main() -> std::io::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "benchmarks".into()));
    std::fs::create_dir_all(&out)?;
    for (i, spec) in SUITE.iter().enumerate() {
        let (b, n, p) = generate(spec, 0x5eed_0000 + i as u64);
        std::fs::write(out.join(format!("{}.blocks", spec.name)), b)?;
        std::fs::write(out.join(format!("{}.nets", spec.name)), n)?;
        std::fs::write(out.join(format!("{}.pl", spec.name)), p)?;
        println!("{}: {} blocks, {} nets, {} terminals", spec.name, spec.blocks, spec.nets, spec.terminals);
    }
    Ok(())
}
