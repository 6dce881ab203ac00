//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its measured numbers (run with `--nocapture` to see
//! them). Tolerances are pinned in the assertions.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use skinsim::anatomy::{generate_blood_network, BloodConfig};
use skinsim::lesion::{
    grow, grow_pass, new_lesion, project_mask, Axis, GrowthStencil, LesionParams,
};
use skinsim::mask::BinaryMask;
use skinsim::metrics::{circularity, dice, disk_mask, ita, ita_from_mean_lab, perimeter};
use skinsim::optics::{reduced_scattering, BLOOD_PRESETS, MELANOSOME_PRESETS};
use skinsim::pipeline::{
    build_model, generate_dataset, parse_config_str, sample_params, sweep_expand, SweepAxes,
};
use skinsim::render::{
    phase::sample_hg, render, Backing, Camera, EnvMap, RenderConfig, RenderScene, SceneConfig,
};
use std::sync::Mutex;
use std::time::Instant;

/// Heavy criteria serialize on this lock so their wall-clock budgets are
/// not distorted by concurrently running tests.
static HEAVY: Mutex<()> = Mutex::new(());

fn heavy_guard() -> std::sync::MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|e| e.into_inner())
}

/// 1. Growth branching factor: mean new cells per lone active cell per
///    pass equals the stencil probability sum 4.2014 within 2%.
#[test]
fn criterion_01_branching_factor() {
    let start = Instant::now();
    let params = LesionParams {
        time_points: 1,
        sigma: 0.0,
        irregularity_prob: 0.0,
        ..Default::default()
    };
    let stencil = GrowthStencil::base();
    let mut rng = ChaCha8Rng::seed_from_u64(20_001);
    let trials = 10_000u32;
    let mut total_new = 0usize;
    for _ in 0..trials {
        let mut vol = new_lesion(&params, [16, 16, 16]).unwrap();
        grow_pass(&mut vol, &stencil, &params, &mut rng, 0, 1);
        total_new += vol.occupied_count() - 1;
    }
    let mean = total_new as f64 / trials as f64;
    let expect = 4.2014;
    let rel = (mean - expect).abs() / expect;
    assert!(rel < 0.02, "branching {mean:.4} vs {expect} ({:.2}%)", rel * 100.0);
    assert!(start.elapsed().as_secs() < 10, "criterion 1 over budget");
    println!(
        "[PASS] criterion 1: branching factor {mean:.4} (expected {expect} +/- 2%) in {:?}",
        start.elapsed()
    );
}

/// 2. Lesion invariants at T=20 over 100 seeds: 26-connected, monotone in
///    time, and nothing outward of the surface clamp plane.
#[test]
fn criterion_02_lesion_invariants() {
    let _serial = heavy_guard();
    let start = Instant::now();
    let failures: Vec<String> = (0..100u64)
        .into_par_iter()
        .filter_map(|seed| {
            let params = LesionParams {
                time_points: 20,
                seed,
                ..Default::default()
            };
            let res = grow(&params, [96, 96, 96], &[5, 10, 15, 20]).ok()?;
            if !res.volume.is_26_connected() {
                return Some(format!("seed {seed}: not 26-connected"));
            }
            let clamp = res.volume.surface_clamp_z();
            if res.volume.occupied_voxels().iter().any(|v| v[2] <= clamp) {
                return Some(format!("seed {seed}: voxel at/above clamp plane"));
            }
            for w in res.snapshots.windows(2) {
                if !w[0].1.is_subset_of(&w[1].1) {
                    return Some(format!("seed {seed}: snapshots not monotone"));
                }
            }
            if !res.snapshots.last().unwrap().1.is_subset_of(&res.volume) {
                return Some(format!("seed {seed}: final not superset of last snapshot"));
            }
            None
        })
        .collect();
    assert!(failures.is_empty(), "{failures:?}");
    assert!(start.elapsed().as_secs() < 30, "criterion 2 over budget: {:?}", start.elapsed());
    println!(
        "[PASS] criterion 2: 100/100 lesions connected, monotone, clamped in {:?}",
        start.elapsed()
    );
}

/// 3. Regularity contrast: over 50 paired seeds at T=20, regular lesions
///    (C_p=0.0001) project more circular than irregular ones (C_p=0.001).
#[test]
fn criterion_03_regularity_contrast() {
    let _serial = heavy_guard();
    let start = Instant::now();
    let n = 50u64;
    let pairs: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|seed| {
            let run = |cp: f64| {
                let params = LesionParams {
                    time_points: 20,
                    seed,
                    irregularity_prob: cp,
                    ..Default::default()
                };
                let vol = grow(&params, [96, 96, 96], &[]).unwrap().volume;
                circularity(&project_mask(&vol, Axis::Z).unwrap()).unwrap()
            };
            (run(0.0001), run(0.001))
        })
        .collect();
    let mean_reg: f64 = pairs.iter().map(|(r, _)| r).sum::<f64>() / n as f64;
    let mean_irr: f64 = pairs.iter().map(|(_, i)| i).sum::<f64>() / n as f64;
    assert!(
        mean_reg > mean_irr,
        "regular {mean_reg:.4} not above irregular {mean_irr:.4}"
    );
    println!(
        "[PASS] criterion 3: circularity regular {mean_reg:.4} > irregular {mean_irr:.4} in {:?}",
        start.elapsed()
    );
}

/// Array-scan Dijkstra used as the independent path-cost oracle.
fn oracle_costs(adj: &[Vec<(u32, f64)>], source: u32) -> Vec<f64> {
    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[source as usize] = 0.0;
    loop {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for i in 0..n {
            if !done[i] && dist[i] < best_d {
                best = i;
                best_d = dist[i];
            }
        }
        if best == usize::MAX {
            return dist;
        }
        done[best] = true;
        for &(j, w) in &adj[best] {
            let cand = dist[best] + w;
            if cand < dist[j as usize] {
                dist[j as usize] = cand;
            }
        }
    }
}

/// 4. Blood network: every emitted vessel path matches the independent
///    shortest-path oracle in cost exactly, over 100 random networks.
#[test]
fn criterion_04_blood_network_oracle() {
    let start = Instant::now();
    let mut paths_checked = 0usize;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = BloodConfig {
            bounds_min: [-4.0, -4.0, -3.0],
            bounds_max: [4.0, 4.0, -0.4],
            node_count: 120,
            start_count: 4,
            end_count: 6,
            ..Default::default()
        };
        let net = generate_blood_network(&config, &mut rng).unwrap();
        let adj = net.adjacency();
        for (i, &s) in net.starts.iter().enumerate() {
            let oracle = oracle_costs(&adj, s);
            let best = net
                .ends
                .iter()
                .map(|&e| oracle[e as usize])
                .fold(f64::INFINITY, f64::min);
            assert_eq!(
                net.paths[i].cost_mm, best,
                "seed {seed} start {s}: cost mismatch"
            );
            paths_checked += 1;
        }
    }
    assert!(start.elapsed().as_secs() < 10, "criterion 4 over budget");
    println!(
        "[PASS] criterion 4: {paths_checked} vessel paths match the oracle exactly in {:?}",
        start.elapsed()
    );
}

fn furnace_scene(level: f64) -> RenderScene {
    use skinsim::anatomy::{build_layers, embed_lesion, LayerConfig, LesionPlacement};
    use skinsim::optics::{LayerOpticsConfig, ScatteringPower, TissueFractions};
    let layer_cfg = LayerConfig {
        epi_top_noise_um: [0.0, 0.0],
        pap_top_noise_um: [0.0, 0.0],
        derm_top_noise_um: [0.0, 0.0],
        hypo_top_noise_um: [0.0, 0.0],
        epidermis_um: [85.0, 85.0],
        papillary_um: [200.0, 200.0],
        dermis_mm: [2.0, 2.0],
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let stack = build_layers(&layer_cfg, &mut rng).unwrap();
    let lesion = grow(
        &LesionParams {
            time_points: 4,
            seed: 2,
            ..Default::default()
        },
        [48, 48, 48],
        &[],
    )
    .unwrap()
    .volume;
    let model = embed_lesion(stack, lesion, LesionPlacement::default())
        .unwrap()
        .with_fractions(0.0, 0.0);
    let scatter = ScatteringPower { a: 0.4, b: 0.0 };
    let config = SceneConfig {
        backing: Backing::Mirror,
        lesion_melanin_multiplier: 0.0,
        fractions: TissueFractions {
            melanosome: 0.0,
            blood: 0.0,
            oxygen_saturation: 0.5,
            water: 0.0,
            fat: 0.0,
        },
        optics: LayerOpticsConfig {
            baseline_absorption: 0.0,
            roughness: 1e-4,
            anisotropy: 0.5,
            epidermis_scatter: scatter,
            dermis_scatter: scatter,
            hypodermis_scatter: scatter,
            ..Default::default()
        },
    };
    RenderScene::assemble(model, config, EnvMap::uniform(level)).unwrap()
}

/// 5. White furnace: an absorption-free scene under a uniform environment
///    reproduces the environment level within 2%, single-threaded.
#[test]
fn criterion_05_white_furnace() {
    let _serial = heavy_guard();
    let start = Instant::now();
    let level = 0.8;
    let scene = furnace_scene(level);
    let cam = Camera::default().with_resolution(64, 64);
    let cfg = RenderConfig {
        spp: 256,
        max_depth: 4096,
        rr_start: 32,
        wavelengths_per_path: 4,
        seed: 99,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let out = pool.install(|| render(&scene, &cam, &cfg).unwrap());
    let mean = out.mean_luminance();
    let rel = (mean - level).abs() / level;
    assert!(rel < 0.02, "furnace mean {mean:.5} vs {level} ({:.2}%)", rel * 100.0);
    assert!(start.elapsed().as_secs() < 120, "criterion 5 over budget: {:?}", start.elapsed());
    println!(
        "[PASS] criterion 5: white furnace {mean:.5} vs env {level} ({:.3}% off) in {:?}",
        rel * 100.0,
        start.elapsed()
    );
}

/// 6. Henyey-Greenstein sampler: empirical mean scattering cosine matches
///    g within 0.01 for g in {0, 0.3, 0.9}.
#[test]
fn criterion_06_hg_sampler_moment() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let dir = [0.48, -0.6, 0.64];
    for g in [0.0, 0.3, 0.9] {
        let n = 1_000_000u32;
        let mut acc = 0.0;
        for _ in 0..n {
            let (out, _) = sample_hg(dir, g, &mut rng);
            acc += dir[0] * out[0] + dir[1] * out[1] + dir[2] * out[2];
        }
        let mean = acc / n as f64;
        assert!(
            (mean - g).abs() < 0.01,
            "HG mean cosine {mean:.4} vs g={g}"
        );
    }
    println!(
        "[PASS] criterion 6: HG mean cosine within 0.01 of g for g in {{0, 0.3, 0.9}} in {:?}",
        start.elapsed()
    );
}

/// 7. Spectral trend reproduction (direction only): increasing melanosome
///    fraction darkens the image and lowers ITA strictly; increasing blood
///    fraction darkens the image strictly. 128x128 @ 16 spp, 5 renders
///    averaged per level.
#[test]
fn criterion_07_spectral_trends() {
    let _serial = heavy_guard();
    let start = Instant::now();
    let cfg = parse_config_str(
        r#"{"seed": 77, "count": 1, "hair_probability": 0.0, "crop_enabled": false}"#,
        std::path::Path::new("inline"),
    )
    .unwrap();
    let params = sample_params(&cfg, 0).unwrap();
    let base_model = build_model(&cfg, &params).unwrap();
    let cam = Camera::default().with_resolution(128, 128);

    let render_level = |melanosome: f64, blood: f64| -> (f64, f64) {
        let mut lum_acc = 0.0;
        let mut ita_acc = 0.0;
        for seed in 0..5u64 {
            let model = base_model.clone().with_fractions(melanosome, blood);
            let scene =
                RenderScene::assemble(model, SceneConfig::default(), EnvMap::uniform(1.0)).unwrap();
            let rcfg = RenderConfig {
                spp: 16,
                seed: 7_000 + seed,
                ..Default::default()
            };
            let out = render(&scene, &cam, &rcfg).unwrap();
            lum_acc += out.mean_luminance();
            let image = skinsim::metrics::RgbImage8 {
                width: out.width,
                height: out.height,
                data: out.rgb8.clone(),
            };
            ita_acc += ita(&image, &out.mask).unwrap();
        }
        (lum_acc / 5.0, ita_acc / 5.0)
    };

    let mel_series: Vec<(f64, f64)> = MELANOSOME_PRESETS
        .iter()
        .map(|&m| render_level(m, 0.02))
        .collect();
    for w in mel_series.windows(2) {
        assert!(
            w[1].0 < w[0].0,
            "luminance not strictly decreasing over melanosome presets: {mel_series:?}"
        );
        assert!(
            w[1].1 < w[0].1,
            "ITA not strictly decreasing over melanosome presets: {mel_series:?}"
        );
    }

    let blood_series: Vec<f64> = BLOOD_PRESETS
        .iter()
        .map(|&b| render_level(0.06, b).0)
        .collect();
    for w in blood_series.windows(2) {
        assert!(
            w[1] < w[0],
            "luminance not strictly decreasing over blood presets: {blood_series:?}"
        );
    }
    assert!(start.elapsed().as_secs() < 900, "criterion 7 over budget: {:?}", start.elapsed());
    println!(
        "[PASS] criterion 7: melanin sweep luminance {:?} / ITA {:?}; blood sweep {:?} in {:?}",
        mel_series.iter().map(|v| (v.0 * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
        mel_series.iter().map(|v| (v.1 * 10.0).round() / 10.0).collect::<Vec<_>>(),
        blood_series.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
        start.elapsed()
    );
}

/// 8. Reduced-scattering power law: anchor at 500 nm and monotone decrease
///    in wavelength for b > 0, over 10^4 random parameter draws.
#[test]
fn criterion_08_reduced_scattering_law() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for _ in 0..10_000 {
        let a = rng.gen_range(0.0..50.0);
        let b = rng.gen_range(0.01..3.0);
        let anchor = reduced_scattering(500.0, a, b);
        assert!((anchor - a).abs() <= 1e-12 * a.max(1.0), "anchor {anchor} vs {a}");
        let l1 = rng.gen_range(380.0..770.0);
        let l2 = rng.gen_range(l1 + 1.0..780.0);
        let v1 = reduced_scattering(l1, a, b);
        let v2 = reduced_scattering(l2, a, b);
        assert!(
            a == 0.0 || v1 > v2,
            "not decreasing: mu'({l1})={v1}, mu'({l2})={v2} for a={a}, b={b}"
        );
    }
    println!(
        "[PASS] criterion 8: power-law anchor and monotonicity over 10^4 draws in {:?}",
        start.elapsed()
    );
}

/// 9. Metrics identities: Dice special cases, disk circularity, and the
///    ITA reference values.
#[test]
fn criterion_09_metric_identities() {
    let start = Instant::now();
    // Dice: equal, disjoint, half-overlap, both-empty.
    let a = BinaryMask::from_fn(20, 20, |x, y| y < 10 && x < 10);
    let b = BinaryMask::from_fn(20, 20, |x, y| y < 10 && (5..15).contains(&x));
    let disjoint = BinaryMask::from_fn(20, 20, |x, _| x >= 10);
    assert_eq!(dice(&a, &a).unwrap(), 1.0);
    assert_eq!(dice(&a, &disjoint).unwrap(), 0.0);
    assert_eq!(dice(&a, &b).unwrap(), 0.5);
    let e = BinaryMask::new(4, 4);
    assert_eq!(dice(&e, &e).unwrap(), 1.0);

    // Disk circularity with the pinned perimeter estimator; the analytic
    // circumference is the independent oracle.
    let disk = disk_mask(128, 63.5, 63.5, 50.0);
    let c = circularity(&disk).unwrap();
    assert!((c - 1.0).abs() <= 0.05, "disk circularity {c}");
    let p = perimeter(&disk).unwrap();
    let analytic = 2.0 * std::f64::consts::PI * 50.0;
    assert!(
        (p - analytic).abs() / analytic < 0.03,
        "disk perimeter {p} vs analytic {analytic}"
    );

    // ITA references.
    for b_star in [1.0, 10.0, 40.0] {
        assert!(ita_from_mean_lab(50.0, b_star).abs() < 1e-12);
    }
    let reference = (21.0f64 / 19.0).atan().to_degrees();
    let v = ita_from_mean_lab(71.0, 19.0);
    assert!((v - 47.86).abs() < 0.01, "ITA {v} vs 47.86");
    assert!((v - reference).abs() < 1e-12);
    println!(
        "[PASS] criterion 9: dice identities, disk circularity {c:.4}, ITA {v:.4} in {:?}",
        start.elapsed()
    );
}

/// 10. End-to-end determinism: the same config and master seed produce
///     byte-identical images, masks, and manifest across reruns and across
///     worker counts.
#[test]
fn criterion_10_determinism() {
    let _serial = heavy_guard();
    let start = Instant::now();
    let cfg = parse_config_str(
        r#"{
            "seed": 2024, "count": 4, "resolution": 64, "spp": 4,
            "lesion_time_points": [6, 8], "lesion_grid": 48,
            "blood_nodes": 60, "blood_field_resolution": 20,
            "hair_probability": 0.5
        }"#,
        std::path::Path::new("inline"),
    )
    .unwrap();

    let run = |workers: &str| -> (Vec<(String, Vec<u8>)>, Vec<u8>) {
        std::env::set_var("SSYNTH_THREADS", workers);
        let dir = tempfile::tempdir().unwrap();
        generate_dataset(&cfg, dir.path()).unwrap();
        let mut files = Vec::new();
        for sub in ["images", "masks"] {
            let mut names: Vec<_> = std::fs::read_dir(dir.path().join(sub))
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            names.sort();
            for p in names {
                files.push((
                    format!("{sub}/{}", p.file_name().unwrap().to_string_lossy()),
                    std::fs::read(&p).unwrap(),
                ));
            }
        }
        let manifest = std::fs::read(dir.path().join("manifest.csv")).unwrap();
        (files, manifest)
    };

    let (files_a, manifest_a) = run("1");
    let (files_b, manifest_b) = run("1");
    assert_eq!(files_a.len(), 8, "expected 4 images + 4 masks");
    assert_eq!(files_a, files_b, "rerun with same seed differs");
    assert_eq!(manifest_a, manifest_b, "manifest differs between reruns");

    let (files_c, manifest_c) = run("8");
    assert_eq!(files_a, files_c, "1-worker vs 8-worker output differs");
    assert_eq!(manifest_a, manifest_c, "manifest differs across worker counts");
    std::env::remove_var("SSYNTH_THREADS");
    println!(
        "[PASS] criterion 10: byte-identical dataset across reruns and worker counts in {:?}",
        start.elapsed()
    );
}

/// 11. Desk-scale performance: one 128x128 @ 16 spp image plus mask on a
///     single core in under 60 s.
#[test]
fn criterion_11_desk_scale_performance() {
    let _serial = heavy_guard();
    let cfg = parse_config_str(
        r#"{"seed": 5, "count": 1}"#,
        std::path::Path::new("inline"),
    )
    .unwrap();
    let params = sample_params(&cfg, 0).unwrap();
    let model = build_model(&cfg, &params).unwrap();
    let scene =
        RenderScene::assemble(model, SceneConfig::default(), EnvMap::SkyGradient { scale: 1.0 })
            .unwrap();
    let cam = Camera::default().with_resolution(128, 128);
    let rcfg = RenderConfig {
        spp: 16,
        seed: 5,
        ..Default::default()
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let out = pool.install(|| render(&scene, &cam, &rcfg).unwrap());
    let elapsed = start.elapsed();
    assert_eq!(out.width, 128);
    assert!(!out.mask.is_empty(), "mask should contain the lesion");
    assert!(
        elapsed.as_secs() < 60,
        "single-core render took {elapsed:?}, budget 60 s"
    );
    println!(
        "[PASS] criterion 11: 128x128 @ 16 spp image + mask in {elapsed:?} on one core"
    );
}

/// 12. Sweep expressibility: the dataset arithmetic of the controlled
///     variations (1815 x 3 = 5445, 1815 x 5 = 9075).
#[test]
fn criterion_12_sweep_arithmetic() {
    let start = Instant::now();
    let blood = SweepAxes {
        base_seeds: (0..1815).collect(),
        blood: Some(BLOOD_PRESETS.to_vec()),
        melanosome: None,
        regularity: None,
        hair: None,
    };
    assert_eq!(sweep_expand(&blood).unwrap().len(), 5445);
    let melanosome = SweepAxes {
        base_seeds: (0..1815).collect(),
        blood: None,
        melanosome: Some(MELANOSOME_PRESETS.to_vec()),
        regularity: None,
        hair: None,
    };
    assert_eq!(sweep_expand(&melanosome).unwrap().len(), 9075);
    let regularity = SweepAxes {
        base_seeds: (0..1815).collect(),
        blood: None,
        melanosome: None,
        regularity: Some(vec![0.0001, 0.001]),
        hair: None,
    };
    assert_eq!(sweep_expand(&regularity).unwrap().len(), 3630);
    let no_hair = SweepAxes {
        base_seeds: (0..1815).collect(),
        blood: None,
        melanosome: None,
        regularity: None,
        hair: Some(vec![false]),
    };
    assert_eq!(sweep_expand(&no_hair).unwrap().len(), 1815);
    println!(
        "[PASS] criterion 12: sweep arithmetic 1815x3=5445, 1815x5=9075, 1815x2=3630, 1815x1=1815 in {:?}",
        start.elapsed()
    );
}
