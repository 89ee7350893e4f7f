mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vecglyph::glyph::{
    decode_record, encode_record, from_pathset, parse_svg_path, serialize_svg_path, to_pathset,
    validate, FillRule, L_MAX, PEN_MAX, PEN_MIN,
};
use vecglyph::mdn::{
    mixture_nll, repair, sample_sequence, softmax, MixtureParams, SampleConfig,
    SequenceDistribution,
};
use vecglyph::raster::{decode_pgm, encode_pgm, render, render_commands, render_oracle};
use vecglyph::refine::{close_paths, refine_coordinates, select_best, RefineConfig};
use vecglyph::{Command, CommandType, CoverageImage, Exec, Glyph, Point, RasterConfig};

fn seq(resolution: usize) -> RasterConfig {
    RasterConfig {
        exec: Exec::Sequential,
        ..RasterConfig::with_resolution(resolution)
    }
}

fn any_command() -> impl Strategy<Value = Command> {
    (0u8..4, prop::array::uniform6(-2.0f64..2.0))
        .prop_map(|(k, args)| Command::new(CommandType::from_code(k).unwrap(), args))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binary_round_trip(g in common::glyph()) {
        // Stored as f32, so compare against the f32-rounded glyph.
        let mut q = g.clone();
        for c in &mut q.commands {
            for a in &mut c.args {
                *a = *a as f32 as f64;
            }
        }
        let bytes = encode_record(&g, L_MAX).unwrap();
        prop_assert_eq!(bytes.len(), L_MAX * vecglyph::glyph::RECORD_BYTES);
        let back = decode_record(&bytes, g.char_class).unwrap();
        prop_assert_eq!(back, q);
    }

    #[test]
    fn absolute_round_trip(g in common::glyph()) {
        let back = Glyph::from_absolute(g.char_class, &g.to_absolute());
        prop_assert_eq!(back.kinds(), g.kinds());
        for (a, b) in back.commands.iter().zip(&g.commands) {
            for k in 0..6 {
                prop_assert!((a.args[k] - b.args[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn prefix_sum_consistency(g in common::glyph()) {
        let abs = g.to_absolute();
        let mut pen = Point::ZERO;
        for (c, a) in g.commands.iter().zip(&abs) {
            if c.kind == CommandType::End {
                break;
            }
            pen += c.pair(2);
            prop_assert!(pen.distance(a.end) < 1e-12);
        }
    }

    #[test]
    fn pathset_round_trip(ps in common::pathset()) {
        let g = from_pathset(&ps, 0, L_MAX).unwrap();
        prop_assert!(validate(&g).is_valid());
        let back = to_pathset(&g).unwrap();
        prop_assert!(common::max_point_deviation(&ps, &back) < 1e-9);
    }

    #[test]
    fn glyph_round_trip_renders_identically(g in common::glyph()) {
        let ps = to_pathset(&g).unwrap();
        let g2 = from_pathset(&ps, g.char_class, L_MAX).unwrap();
        let mut cfg = seq(128);
        cfg.oracle_supersample = 4;
        let a = render_oracle(&ps, &cfg);
        let b = render_oracle(&to_pathset(&g2).unwrap(), &cfg);
        prop_assert!(a.mean_abs_diff(&b) < 1e-3);
    }

    #[test]
    fn svg_round_trip(ps in common::pathset()) {
        let text = serialize_svg_path(&ps, 6);
        let back = parse_svg_path(&text, FillRule::NonZero).unwrap();
        prop_assert!(common::max_point_deviation(&ps, &back) < 1e-6, "{}", text);
    }

    #[test]
    fn pgm_round_trip(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut img = CoverageImage::new(w, h);
        for v in &mut img.data {
            *v = rng.gen::<f64>();
        }
        let q = img.quantized();
        let back = decode_pgm(&encode_pgm(&img)).unwrap();
        prop_assert_eq!(back, q);
    }

    #[test]
    fn close_paths_shuts_every_contour(
        g in common::glyph(),
        noise in prop::collection::vec(-0.02f64..0.02, 6 * L_MAX),
    ) {
        let mut p = g.clone();
        for (j, c) in p.commands.iter_mut().enumerate() {
            let used = c.kind.used_pairs();
            for k in 0..6 {
                if used[k / 2] {
                    c.args[k] += noise[6 * j + k];
                }
            }
        }
        let closed = close_paths(&p);
        prop_assert_eq!(closed.kinds(), p.kinds());
        prop_assert!(closed.max_closure_gap() < 1e-9);
    }

    #[test]
    fn repair_always_valid(cmds in prop::collection::vec(any_command(), 0..90), class in 0usize..52) {
        let g = repair(&cmds, class, L_MAX);
        let report = validate(&g);
        prop_assert!(report.is_valid(), "{:?}", report);
    }

    #[test]
    fn render_commands_in_unit_range(cmds in prop::collection::vec(any_command(), 0..20)) {
        let img = render_commands(&cmds, &seq(16));
        prop_assert!(img.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn nll_permutation_invariant(
        comps in prop::collection::vec((0.01f64..1.0, -1.0f64..1.0, 0.001f64..0.5), 1..8),
        x in -2.0f64..2.0,
        rot in 0usize..8,
    ) {
        let total: f64 = comps.iter().map(|c| c.0).sum();
        let build = |cs: &[(f64, f64, f64)]| {
            MixtureParams::new(
                cs.iter().map(|c| c.0 / total).collect(),
                cs.iter().map(|c| c.1).collect(),
                cs.iter().map(|c| c.2).collect(),
            )
            .unwrap()
        };
        let mut permuted = comps.clone();
        permuted.rotate_left(rot % comps.len());
        permuted.reverse();
        let a = mixture_nll(&build(&comps), x).unwrap();
        let b = mixture_nll(&build(&permuted), x).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn nll_finite_far_from_means(sigma in 1e-4f64..1.0, mu in -1.0f64..1.0) {
        let p = MixtureParams::new(vec![0.3, 0.7], vec![mu, mu + sigma], vec![sigma, sigma]).unwrap();
        prop_assert!(mixture_nll(&p, mu + 101.0 * sigma).unwrap().is_finite());
        prop_assert!(mixture_nll(&p, mu - 100.0 * sigma).unwrap().is_finite());
    }

    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-500.0f64..500.0, 1..60)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn sampled_sequences_are_valid(
        g in common::glyph(),
        sigma in 0.001f64..0.3,
        seed in any::<u64>(),
        temperature in 0.0f64..2.0,
    ) {
        let mut dist = SequenceDistribution::point_mass(&g);
        for step in &mut dist.steps {
            step.type_probs = [0.3, 0.3, 0.3, 0.1];
            for c in &mut step.coords {
                c.sigma = vec![sigma];
            }
        }
        let cfg = SampleConfig { temperature, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = sample_sequence(&dist, g.char_class, &mut rng, &cfg).unwrap();
        prop_assert!(validate(&s).is_valid());
        for a in s.to_absolute() {
            prop_assert!(a.end.x >= PEN_MIN && a.end.x <= PEN_MAX);
            prop_assert!(a.end.y >= PEN_MIN && a.end.y <= PEN_MAX);
        }
    }

    #[test]
    fn whole_pixel_translation_shifts_columns(ps in common::pathset(), m in 1usize..4) {
        let res = 64;
        let cfg = seq(res);
        let shifted = ps.translate(Point::new(m as f64 / res as f64, 0.0));
        let a = render(&ps, &cfg);
        let b = render(&shifted, &cfg);
        for y in 0..res {
            for x in 0..res - m {
                prop_assert_eq!(a.get(x, y).to_bits(), b.get(x + m, y).to_bits(), "pixel ({}, {})", x, y);
            }
        }
    }

    #[test]
    fn selection_prefers_lowest_index(
        glyphs in prop::collection::vec(common::glyph(), 1..4),
        pick in 0usize..4,
    ) {
        let cfg = RefineConfig { resolution: 32, exec: Exec::Sequential, ..Default::default() };
        let pick = pick % glyphs.len();
        let target = render_commands(&glyphs[pick].commands, &cfg.raster());
        let mut list = glyphs.clone();
        list.extend(glyphs.iter().cloned());
        let (best, loss) = select_best(&list, &target, &cfg);
        prop_assert!(best < glyphs.len());
        prop_assert!(best <= pick);
        prop_assert!(loss < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn refinement_keeps_command_kinds(g in common::glyph(), dx in -0.03f64..0.03, dy in -0.03f64..0.03) {
        let cfg = RefineConfig { resolution: 32, max_iters: 15, exec: Exec::Sequential, ..Default::default() };
        let target = render_commands(&g.commands, &cfg.raster());
        let mut start = g.clone();
        start.commands[0].args[4] += dx;
        start.commands[0].args[5] += dy;
        let (out, trace) = refine_coordinates(&start, &target, &cfg).unwrap();
        prop_assert_eq!(out.kinds(), g.kinds());
        prop_assert_eq!(out.char_class, g.char_class);
        prop_assert!(out.max_closure_gap() < 1e-9);
        prop_assert!(trace.final_loss() <= trace.initial_loss());
    }
}
