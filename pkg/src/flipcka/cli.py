"""Experiment runner: load an instance, run a suite, emit tables and figures.

Every subcommand echoes its configuration and seed into summary.json, writes
CSV tables with documented columns (see --schema), renders figures next to
them, and exits 0 on success, 1 when a verified property fails, 2 on input
errors (with a machine-readable error JSON on stdout).
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

from . import __version__
from .admissible import ConfigError, load_instance, validate_admissible
from .bass_serre import base_vertex, neighbor, translation_length, vertex_element
from .model_space import ModelSpace
from .reports import REPORT_SCHEMA, ReportContext


def _fail_input(message: str, detail: str = "") -> int:
    print(json.dumps({"error": message, "detail": detail}, sort_keys=True))
    return 2


def _load(args) -> ModelSpace | None:
    try:
        graph = load_instance(args.instance)
    except FileNotFoundError:
        print(json.dumps({"error": "instance file not found", "detail": str(args.instance)}, sort_keys=True))
        return None
    except ConfigError as exc:
        print(json.dumps({"error": "invalid instance", "detail": str(exc)}, sort_keys=True))
        return None
    rep = validate_admissible(graph)
    if not rep.ok:
        print(json.dumps({"error": "instance failed admissibility", "detail": rep.lines()}, sort_keys=True))
        return None
    return ModelSpace(graph)


def _context(args, extra: dict | None = None) -> ReportContext:
    config = {
        "command": args.command,
        "instance": str(args.instance),
        "seed": args.seed,
        "samples": args.samples,
        "radius": args.radius,
        "K": args.K,
        "D": args.D,
        "theta": args.theta,
        "version": __version__,
    }
    if extra:
        config.update(extra)
    return ReportContext(Path(args.out), config, figures=not args.no_figures)


def _sample_pairs(space, rng, count, spread, word_len=5, fiber=4):
    from .sampling import random_pair

    base = base_vertex(space.graph, None)
    return [random_pair(space, rng, base, rng.randrange(spread + 1), word_len, fiber) for _ in range(count)]


def cmd_validate(args) -> int:
    try:
        graph = load_instance(args.instance)
    except FileNotFoundError as exc:
        return _fail_input("instance file not found", str(exc))
    except ConfigError as exc:
        return _fail_input("invalid instance", str(exc))
    rep = validate_admissible(graph)
    ctx = ReportContext(Path(args.out), {"command": "validate", "instance": str(args.instance)})
    ctx.write_json(
        "validation.json",
        {
            "ok": rep.ok,
            "violations": [
                {"kind": v.kind, "where": v.where, "detail": v.detail} for v in rep.violations
            ],
            "notes": rep.notes,
        },
    )
    ctx.finalize({"ok": rep.ok})
    return 0 if rep.ok else 1


def cmd_special_path(args) -> int:
    space = _load(args)
    if space is None:
        return 2
    from .special_paths import qg_fit

    rng = random.Random(args.seed)
    ctx = _context(args)
    pairs = _sample_pairs(space, rng, args.samples, spread=3)
    fit = qg_fit(space, pairs, radius=args.radius)
    rows = [(r.pair_id, r.oracle, r.special, f"{r.ratio:.6f}") for r in fit.rows]
    ctx.write_csv("special_path.csv", ["pair", "oracle", "special", "ratio"], rows)
    ctx.render_histogram(
        "special_path_ratios.png", [r.ratio for r in fit.rows], "special path / geodesic", "ratio"
    )
    ctx.render_scatter(
        "special_path_scatter.png",
        [r.oracle for r in fit.rows],
        [r.special for r in fit.rows],
        "special paths against exact distances",
        "exact distance",
        "special path length",
    )
    ctx.finalize(
        {
            "mu_mult": fit.mu_mult,
            "mu_add": fit.mu_add,
            "pairs": len(fit.rows),
            "excluded": fit.excluded,
        }
    )
    return 0


def cmd_distance_formula(args) -> int:
    space = _load(args)
    if space is None:
        return 2
    rng = random.Random(args.seed)
    ctx = _context(args, {"variant": args.variant})
    if args.variant == "piece":
        from .bbf_quasitrees import generate_quasilines, piece_formula_fit
        from .freegroup import Axis
        from .sampling import random_word

        gv = space.graph.vertices[0].id
        family = generate_quasilines(space, gv, k_tilde=args.k_tilde)
        pairs = []
        ax = Axis(family.roots[0])
        for i in range(args.samples):
            if i % 3 == 0:
                pairs.append((ax.vertex(rng.randrange(-9, 0)), ax.vertex(rng.randrange(1, 10))))
            else:
                rank = space.graph.vertex(gv).rank
                pairs.append((random_word(rng, rank, 9), random_word(rng, rank, 9)))
        fit = piece_formula_fit(family, pairs, args.K)
        ctx.write_csv(
            "formula_piece.csv",
            ["pair", "d", "sigma"],
            [(r.pair_id, r.d, r.sigma) for r in fit.rows],
        )
        ctx.render_scatter(
            "formula_piece.png",
            [r.d for r in fit.rows],
            [r.sigma for r in fit.rows],
            "projection sums against distances",
            "distance",
            "cutoff sum",
            diagonal=False,
        )
        ctx.finalize({"lower_n": fit.lower_n, "upper_mult": fit.upper_mult, "upper_add": fit.upper_add})
        return 0
    if args.variant == "x1":
        from .bbf_quasitrees import generate_quasilines, glued_formula_fit
        from .glued_hyperbolic import GluedSpace
        from .sampling import random_piece, random_word

        glued = GluedSpace(space, 0)
        base = base_vertex(space.graph, None)
        families = {
            v.id: generate_quasilines(space, v.id, k_tilde=args.k_tilde)
            for v in space.graph.vertices
        }
        pairs = []
        for _ in range(args.samples):
            a_piece = base
            b_piece = random_piece(space, rng, base, 2 * rng.randrange(1, 3))
            if b_piece.parity != 0:
                continue
            rank_a = space.graph.vertex(a_piece.graph_vertex).rank
            rank_b = space.graph.vertex(b_piece.graph_vertex).rank
            pairs.append(
                (
                    glued.piece_point(a_piece, random_word(rng, rank_a, 6)),
                    glued.piece_point(b_piece, random_word(rng, rank_b, 6)),
                )
            )
        fit = glued_formula_fit(space, glued, families, pairs, args.K)
        ctx.write_csv(
            "formula_x1.csv",
            ["pair", "d", "sigma", "d_tree"],
            [(r.pair_id, r.d, r.sigma, r.d_tree) for r in fit.rows],
        )
        ctx.render_scatter(
            "formula_x1.png",
            [r.d for r in fit.rows],
            [r.sigma + r.d_tree for r in fit.rows],
            "glued distance formula",
            "glued distance",
            "cutoff sum + tree term",
            diagonal=False,
        )
        mu = fit.lower_mu
        ctx.finalize({"lower_mu": mu, "violations": fit.lower_violations(mu, 0.0)})
        return 0
    if args.variant == "coneoff":
        from .coneoff import build_coned, piece_coneoff_fit
        from .sampling import random_word

        gv = space.graph.vertices[0].id
        rank = space.graph.vertex(gv).rank
        pairs = []
        for i in range(args.samples):
            if i % 3 == 0:
                m = rng.randrange(args.K + 1, args.K + 8)
                pairs.append(((1,) * m, (-1,) * rng.randrange(2, 6)))
            else:
                pairs.append((random_word(rng, rank, 6), random_word(rng, rank, 6)))
        from .coneoff import coned_window_words

        piece = build_coned(space, gv, args.radius, extra_words=coned_window_words(pairs))
        fit = piece_coneoff_fit(space, piece, pairs, args.K, rng=rng)
        ctx.write_csv(
            "formula_coneoff.csv",
            ["pair", "d_base", "thick2", "sigma", "mode"],
            [(r.pair_id, r.d_base, r.thick2, r.sigma, r.mode) for r in fit.rows],
        )
        ctx.render_scatter(
            "formula_coneoff.png",
            [r.d_base for r in fit.rows],
            [float(r.rhs) for r in fit.rows],
            "cone-off distance formula",
            "base distance",
            "thick + line terms",
            diagonal=False,
        )
        ctx.finalize({"upper_mult": fit.upper_mult, "lower_mult": fit.lower_mult})
        return 0
    return _fail_input("unknown variant", args.variant)


def cmd_partition(args) -> int:
    space = _load(args)
    if space is None:
        return 2
    from .bbf_quasitrees import (
        PartitionError,
        bounded_projection_check,
        generate_quasilines,
        greedy_partition,
        lines_meeting_window,
    )
    from .freegroup import ball as fg_ball, format_word

    ctx = _context(args)
    gv = space.graph.vertices[0].id
    vdata = space.graph.vertex(gv)
    family = generate_quasilines(space, gv, k_tilde=args.k_tilde)
    window = sorted(fg_ball(args.radius, vdata.rank))
    lines = lines_meeting_window(family, window, max_lines=args.samples)
    theta = args.theta
    proj = bounded_projection_check(lines, theta if theta is not None else 10 ** 9)
    if theta is None:
        theta = proj.max_diam + 1
    try:
        part = greedy_partition(lines, args.D, window)
    except PartitionError as exc:
        ctx.finalize({"ok": False, "error": str(exc)})
        return 1
    rows = []
    for ci, cls in enumerate(part.classes):
        for ax in cls:
            rows.append((ci, f"{format_word(ax.base, vdata.alphabet)}|{format_word(ax.word.root, vdata.alphabet)}"))
    ctx.write_csv("partition.csv", ["class", "line"], rows)
    ctx.render_histogram(
        "partition_sizes.png", [len(c) for c in part.classes], "partition class sizes", "lines per class"
    )
    ctx.finalize(
        {
            "classes": part.class_count(),
            "lines": len(lines),
            "covering_radius": part.covering_radius,
            "max_projection": proj.max_diam,
            "theta": theta,
            "ok": True,
        }
    )
    return 0


def cmd_quasitree(args) -> int:
    space = _load(args)
    if space is None:
        return 2
    from .bbf_quasitrees import (
        bottleneck_certificate,
        build_quasitree,
        generate_quasilines,
        greedy_partition,
        lines_meeting_window,
    )
    from .freegroup import ball as fg_ball

    rng = random.Random(args.seed)
    ctx = _context(args)
    gv = space.graph.vertices[0].id
    family = generate_quasilines(space, gv, k_tilde=args.k_tilde)
    window = sorted(fg_ball(args.radius, space.graph.vertex(gv).rank))
    lines = lines_meeting_window(family, window, max_lines=24)
    part = greedy_partition(lines, args.D, window)
    graph = build_quasitree(part.classes[0], args.K, pad=6)
    rep = bottleneck_certificate(graph, rng, samples=args.samples)
    ctx.write_csv("quasitree.csv", ["node_a", "node_b"], graph.edge_rows())
    ctx.finalize(
        {
            "delta": rep.delta,
            "failures": rep.failures,
            "lines": len(part.classes[0]),
            "ok": rep.failures == 0,
        }
    )
    return 0 if rep.failures == 0 else 1


def cmd_embed(args) -> int:
    space = _load(args)
    if space is None:
        return 2
    rng = random.Random(args.seed)
    ctx = _context(args, {"variant": args.variant})
    if args.variant == "phi":
        from .glued_hyperbolic import distortion_report

        pairs = _sample_pairs(space, rng, args.samples, spread=3)
        rep = distortion_report(space, pairs, radius=args.radius)
        ctx.write_csv(
            "embed_phi.csv",
            ["pair", "d_model", "d_first", "d_second"],
            [(r.pair_id, r.d_model, r.d_first, r.d_second) for r in rep.rows],
        )
        ctx.render_scatter(
            "embed_phi.png",
            [r.d_model for r in rep.rows],
            [r.image_sum for r in rep.rows],
            "product of glued spaces",
            "model distance",
            "image distance sum",
        )
        ctx.finalize({"upper": rep.upper, "lower": rep.lower, "excluded": rep.excluded})
        return 0
    if args.variant == "product":
        from .bbf_quasitrees import product_embedding_fit
        from .glued_hyperbolic import GluedSpace
        from .sampling import random_piece, random_word

        glued = GluedSpace(space, 0)
        base = base_vertex(space.graph, None)
        pairs = []
        for _ in range(args.samples):
            b_piece = random_piece(space, rng, base, 2)
            if b_piece.parity != 0:
                continue
            rank_a = space.graph.vertex(base.graph_vertex).rank
            rank_b = space.graph.vertex(b_piece.graph_vertex).rank
            pairs.append(
                (
                    glued.piece_point(base, random_word(rng, rank_a, 3)),
                    glued.piece_point(b_piece, random_word(rng, rank_b, 3)),
                )
            )
        fit = product_embedding_fit(
            space, glued, pairs, K=args.K, D=args.D, k_tilde=2, window_radius=2, max_lines=10
        )
        ctx.write_csv(
            "embed_product.csv",
            ["pair", "d_glued", "d_tree", "sum_classes"],
            [(r.pair_id, r.d_glued, r.d_tree, sum(r.class_terms)) for r in fit.rows],
        )
        ctx.render_scatter(
            "embed_product.png",
            [r.d_glued for r in fit.rows],
            [r.rhs for r in fit.rows],
            "tree x quasi-trees image",
            "glued distance",
            "tree + class terms",
        )
        ctx.finalize(
            {"upper": fit.upper, "lower": fit.lower, "classes": fit.class_count, "excluded": fit.excluded}
        )
        return 0
    return _fail_input("unknown variant", args.variant)


def cmd_coneoff_pipeline(args) -> int:
    space = _load(args)
    if space is None:
        return 2
    from .coneoff import qt_pipeline_check
    from .glued_hyperbolic import GluedSpace
    from .sampling import random_piece, random_word

    rng = random.Random(args.seed)
    ctx = _context(args)
    glued = GluedSpace(space, 0)
    base = base_vertex(space.graph, None)
    pairs = []
    for _ in range(args.samples):
        b_piece = random_piece(space, rng, base, 2)
        if b_piece.parity != 0:
            continue
        rank_a = space.graph.vertex(base.graph_vertex).rank
        rank_b = space.graph.vertex(b_piece.graph_vertex).rank
        pairs.append(
            (
                glued.piece_point(base, random_word(rng, rank_a, 4)),
                glued.piece_point(b_piece, random_word(rng, rank_b, 4)),
            )
        )
    rep = qt_pipeline_check(space, glued, pairs, K=args.K, window_radius=args.radius, rng=rng)
    ctx.write_csv(
        "pipeline.csv",
        ["pair", "d_glued", "thick2", "d_binding"],
        [(r.pair_id, r.d_glued, r.thick2, r.d_binding) for r in rep.rows],
    )
    ctx.render_scatter(
        "pipeline.png",
        [r.d_glued for r in rep.rows],
        [float(r.rhs) for r in rep.rows],
        "cone-off pipeline",
        "glued distance",
        "thick + binding term",
    )
    ctx.finalize({"upper": rep.upper, "lower": rep.lower, "excluded": rep.excluded})
    return 0


def cmd_subgroup(args) -> int:
    space = _load(args)
    if space is None:
        return 2
    from .bass_serre import VElt, normalize
    from .subgroups import (
        NotFreeEvidence,
        SubgroupSpec,
        build_core,
        contraction_check,
        height_probe,
        morse_test,
        orbit_map_fit,
        screen_free,
    )

    rng = random.Random(args.seed)
    ctx = _context(args, {"check": args.check})
    graph = space.graph
    base_id = graph.vertices[0].id
    if args.generator:
        from .bass_serre import parse_element

        gen = parse_element(graph, args.generator, base_id)
    else:
        steps = graph.steps_at(base_id)
        step = steps[0]
        other = graph.step_target(step)
        gen = normalize(
            graph,
            base_id,
            [VElt((2,)), step, VElt((2,)), (step[0], 1 - step[1])],
        )
    if args.check == "morse":
        pool = [gen, gen.inv(), vertex_element(graph, base_id, (1, 2), 1)]
        rows = []
        ok = True
        for i in range(args.samples):
            g = pool[rng.randrange(len(pool))].mul(pool[rng.randrange(len(pool))])
            if g.is_identity():
                continue
            length, cls = translation_length(g)
            is_morse = morse_test(g)
            ok = ok and (is_morse == (cls == "loxodromic"))
            rows.append((g.serialize(), length, int(is_morse)))
        ctx.write_csv("subgroup_morse.csv", ["element", "translation", "morse"], rows)
        ctx.finalize({"ok": ok, "elements": len(rows)})
        return 0 if ok else 1
    spec = SubgroupSpec([gen])
    if args.check == "core":
        try:
            spec = screen_free(spec, 4)
            core = build_core(space, spec, orbit_radius=2)
        except NotFreeEvidence as exc:
            ctx.finalize({"ok": False, "refused": str(exc)})
            return 1
        ctx.finalize(
            {
                "ok": True,
                "mu_core": core.mu_core,
                "delta_prime": core.delta_prime,
                "points": len(core.points),
                "orbit_fit_lower": orbit_map_fit(space, spec, 3).lower_slope,
            }
        )
        return 0
    if args.check == "contract":
        try:
            spec = screen_free(spec, 4)
            core = build_core(space, spec, orbit_radius=2)
        except NotFreeEvidence as exc:
            ctx.finalize({"ok": False, "refused": str(exc)})
            return 1
        pairs = _sample_pairs(space, rng, args.samples, spread=2, word_len=4, fiber=3)
        rep = contraction_check(space, core, pairs, rng=rng)
        ctx.write_json(
            "contraction.json",
            {
                "constant": rep.constant,
                "checked": rep.checked,
                "violations": rep.violations,
                "neighborhood_R": rep.neighborhood_R,
            },
        )
        ctx.finalize({"ok": rep.passed, "constant": rep.constant, "R": rep.neighborhood_R})
        return 0 if rep.passed else 1
    if args.check == "height":
        try:
            spec = screen_free(spec, 4)
        except NotFreeEvidence as exc:
            ctx.finalize({"ok": False, "refused": str(exc)})
            return 1
        rep = height_probe(space, spec, conj_radius=1, member_length=2)
        ctx.write_json(
            "height.json",
            {
                "witnesses": [{"conjugator": w.conjugator, "element": w.element} for w in rep.witnesses],
                "lower_bound": rep.lower_bound(),
                "essentially_distinct": rep.essentially_distinct,
                "vertex_intersections_trivial": rep.vertex_intersections_trivial,
                "finite_index_signal": rep.finite_index_signal,
                "search": {"conj_radius": rep.conj_radius, "member_length": rep.member_length},
            },
        )
        ctx.finalize({"ok": True, "lower_bound": rep.lower_bound()})
        return 0
    return _fail_input("unknown subgroup check", args.check)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flipcka",
        description="experiment workbench for flip admissible graph-of-groups geometry",
    )
    parser.add_argument("--schema", action="store_true", help="print the report column schema and exit")
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--instance", required=True, help="instance config file")
        p.add_argument("--out", default="reports", help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--samples", type=int, default=100)
        p.add_argument("--radius", type=int, default=4)
        p.add_argument("--K", type=int, default=6)
        p.add_argument("--D", type=int, default=4)
        p.add_argument("--theta", type=int, default=None)
        p.add_argument("--k-tilde", dest="k_tilde", type=int, default=3)
        p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("validate", help="admissibility check")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("special-path", help="quasi-geodesicity of special paths")
    common(p)
    p.set_defaults(func=cmd_special_path)

    p = sub.add_parser("distance-formula", help="distance formula fits")
    common(p)
    p.add_argument("--variant", choices=["piece", "x1", "coneoff"], default="piece")
    p.set_defaults(func=cmd_distance_formula)

    p = sub.add_parser("partition", help="greedy partition with verified postconditions")
    common(p)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("quasitree", help="quasi-tree of quasi-lines with bottleneck certificate")
    common(p)
    p.set_defaults(func=cmd_quasitree)

    p = sub.add_parser("embed", help="embedding distortion fits")
    common(p)
    p.add_argument("--variant", choices=["phi", "product"], default="phi")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("coneoff-pipeline", help="thick-distance times binding quasi-tree")
    common(p)
    p.set_defaults(func=cmd_coneoff_pipeline)

    p = sub.add_parser("subgroup", help="morse / core / contraction / height suites")
    common(p)
    p.add_argument("--check", choices=["morse", "core", "contract", "height"], default="morse")
    p.add_argument("--generator", help="subgroup generator in syllable syntax", default=None)
    p.set_defaults(func=cmd_subgroup)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.schema:
        print(json.dumps(REPORT_SCHEMA, indent=2, sort_keys=True))
        return 0
    if not getattr(args, "command", None):
        parser.print_help()
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
