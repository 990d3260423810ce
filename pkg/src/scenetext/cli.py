"""Command-line entry point.

Stages talk to each other only through files::

    scenetext synth    --out-dir run/
    scenetext parse    run/scene.json --priors run/priors.json -o run/graph.json
    scenetext describe run/scene.json run/graph.json --candidates run/candidates.json -o run/info.json
    scenetext reflect  run/info.json --scene run/scene.json --priors run/priors.json -o run/refined.json
    scenetext select   run/refined.json --embeddings run/embeddings.json -o run/selection.json
    scenetext eval     run/preds.jsonl -o run/report.json

Exit codes: 0 ok, 2 validation, 3 I/O, 4 provider failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .captions import caption_scene, candidates_from_dict, candidates_to_dict, crop_embeddings_from_dict, CaptionCandidate
from .config import PipelineConfig, load_config
from .errors import ProviderError, SceneTextError
from .fileio import atomic_write_text, dumps, read_json, read_jsonl, write_json
from .metrics.report import ALL_METRICS, evaluate, format_table
from .projection import MAX_VIEWS, crop_manifest
from .providers import HashEmbedder
from .reflection import OfflineCorrector, OfflineJudge, reflect
from .scene import load_priors, load_scene, priors_to_list, save_scene
from .sceneinfo import Mode, SceneInformation, build_scene_information, render_text
from .selection import EmbeddingBundle, select_all, select_top_k, select_two_round
from .spatial import build_scene_graph, graph_from_list, graph_to_list

log = logging.getLogger("scenetext")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_PROVIDER = 4


def _txt_path(path: Path) -> Path:
    return path.with_suffix(".txt")


def _config(args: argparse.Namespace, overrides: dict[str, Any]) -> PipelineConfig:
    cfg = load_config(args.config, overrides)
    if args.jobs is not None:
        cfg = load_config(None, {**cfg.to_dict(), "providers": {**cfg.to_dict()["providers"], "max_in_flight": args.jobs}})
    return cfg


def _reasoner_overrides(args: argparse.Namespace) -> dict[str, Any]:
    nearby_exclusive = None
    if args.nearby_inclusive:
        nearby_exclusive = False
    return {
        "reasoner": {
            "beta": args.beta,
            "theta_tol_deg": args.theta_tol,
            "n_sectors": args.n_sectors,
            "saliency_m": args.saliency_m,
            "nearby_exclusive": nearby_exclusive,
            "vertical_axis": args.vertical_axis,
        }
    }


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    from .synthetic import (
        default_priors,
        generate_synthetic_scene,
        synthetic_caption_candidates,
        synthetic_crop_embeddings,
        synthetic_image_text,
        synthetic_predictions,
        synthetic_question,
    )

    seed = args.seed if args.seed is not None else 0
    scene = generate_synthetic_scene(seed, args.objects, args.room, n_views=args.views)
    embedder = HashEmbedder(args.dimension)
    texts = synthetic_caption_candidates(scene, seed)
    candidates = {
        oid: [CaptionCandidate(oid, t, embedding=tuple(embedder.embed_sentence(t).tolist())) for t in ts]
        for oid, ts in texts.items()
    }
    question = synthetic_question(scene, seed)
    bundle = EmbeddingBundle(
        dimension=args.dimension,
        question=embedder.embed_tokens(question),
        image=embedder.embed_tokens(synthetic_image_text(scene, seed)),
        question_text=question,
    )
    out = Path(args.out_dir)
    save_scene(scene, out / "scene.json")
    write_json(out / "priors.json", priors_to_list(default_priors()))
    write_json(out / "candidates.json", candidates_to_dict(candidates))
    write_json(out / "crop_embeddings.json", {str(k): v for k, v in synthetic_crop_embeddings(scene, seed, embedder).items()})
    write_json(out / "embeddings.json", bundle.to_dict())
    atomic_write_text(out / "preds.jsonl", "".join(dumps(r).replace("\n", "") + "\n" for r in synthetic_predictions(scene, seed)))
    log.info("wrote synthetic scene %s with %d objects to %s", scene.scene_id, len(scene.objects), out)
    return EXIT_OK


def cmd_parse(args: argparse.Namespace) -> int:
    cfg = _config(args, _reasoner_overrides(args))
    scene = load_scene(args.scene)
    priors = load_priors(args.priors)
    graph = build_scene_graph(scene, priors, cfg.reasoner, jobs=args.jobs or 1)
    write_json(args.output, graph_to_list(graph))
    log.info("%s: %d relations", scene.scene_id, len(graph))
    return EXIT_OK


def cmd_describe(args: argparse.Namespace) -> int:
    cfg = _config(args, {"mode": args.mode})
    scene = load_scene(args.scene)
    graph = graph_from_list(read_json(args.graph))
    candidates = candidates_from_dict(read_json(args.candidates)) if args.candidates else {}
    crops = crop_embeddings_from_dict(read_json(args.crop_embeddings)) if args.crop_embeddings else None
    captions = caption_scene(
        scene,
        candidates,
        crops,
        refiner=cfg.providers.refiner(),
        top_n=args.top_n,
        max_in_flight=cfg.providers.max_in_flight,
    )
    info = build_scene_information(scene, graph, captions, cfg.mode)
    manifest = crop_manifest(scene.objects, scene.views, args.max_views) if scene.views else None

    output = Path(args.output)
    write_json(output, info.to_dict())
    atomic_write_text(_txt_path(output), render_text(info))
    if manifest is not None:
        write_json(args.crops or output.with_name("crops.json"), manifest)
    log.info("%s: %d captions, %d relation sentences, %d tokens", scene.scene_id, len(info.object_captions), len(info.relation_sentences), info.token_estimate)
    return EXIT_OK


def cmd_reflect(args: argparse.Namespace) -> int:
    cfg = _config(args, {**_reasoner_overrides(args), "reflection": {"tau": args.tau, "rounds": args.rounds}})
    info = SceneInformation.from_dict(read_json(args.info))
    scene = load_scene(args.scene)
    priors = load_priors(args.priors)
    offline = OfflineJudge(scene, priors, cfg.reasoner)
    judge = cfg.providers.judge() or offline
    corrector = cfg.providers.corrector() or OfflineCorrector(offline)
    gt = scene.labels if args.gt_labels else None
    refined, reports = reflect(
        info,
        judge,
        corrector,
        tau=cfg.reflection.tau,
        gt=gt,
        rounds=cfg.reflection.rounds,
        max_in_flight=cfg.providers.max_in_flight,
    )
    output = Path(args.output)
    write_json(output, refined.to_dict())
    atomic_write_text(_txt_path(output), render_text(refined))
    write_json(args.reports or output.with_name("reflection_reports.json"), [r.to_dict() for r in reports])
    log.info("reflection replaced %d of %d items", sum(r.replaced for r in reports), len(reports))
    return EXIT_OK


def cmd_select(args: argparse.Namespace) -> int:
    cfg = _config(args, {"selection": {"k1": args.k1, "k2": args.k2, "rounds": args.rounds}})
    info = SceneInformation.from_dict(read_json(args.info))
    bundle = EmbeddingBundle.from_dict(read_json(args.embeddings)) if args.embeddings else None
    question = args.question if args.question is not None else (bundle.question_text if bundle else "")
    rounds = cfg.selection.rounds

    if rounds == 0:
        result = select_all(info, question)
    else:
        dimension = bundle.dimension if bundle else cfg.providers.embedding_dimension
        embedder = cfg.providers.embedder() or HashEmbedder(dimension)
        q_emb = bundle.question if bundle is not None and bundle.question is not None and args.question is None else None
        if q_emb is None:
            if not question:
                raise SceneTextError("selection needs a question (--question or question_text in the embedding file)")
            q_emb = embedder.embed_tokens(question)
        cap_emb = bundle.captions if bundle else {}
        if rounds == 1:
            result = select_top_k(info, q_emb, cfg.selection.k1, cap_emb, embedder, question)
        else:
            if bundle is None or bundle.image is None:
                raise SceneTextError("two-round selection needs image embeddings in the embedding file")
            result = select_two_round(info, q_emb, bundle.image, cfg.selection.k1, cfg.selection.k2, cap_emb, embedder, question)

    output = Path(args.output)
    write_json(output, result.to_dict())
    atomic_write_text(_txt_path(output), result.prompt_prefix)
    log.info("round %d: kept %d captions, %d tokens", int(result.round), len(result.kept), result.token_count)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    records = read_jsonl(args.predictions)
    report = evaluate(records, args.metric or None)
    table = format_table(report)
    if args.output:
        output = Path(args.output)
        write_json(output, report)
        atomic_write_text(_txt_path(output), table)
    sys.stdout.write(table)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=default, help="TOML configuration file")
    p.add_argument("--jobs", type=int, default=default, help="maximum worker count")
    p.add_argument("--seed", type=int, default=default, help="random seed")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)


def _add_reasoner_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beta", type=float, help="proximity factor")
    p.add_argument("--theta-tol", type=float, help="angular tolerance in degrees")
    p.add_argument("--n-sectors", type=int, help="number of o'clock sectors")
    p.add_argument("--saliency-m", type=int, help="nearest neighbors kept per object")
    p.add_argument("--nearby-inclusive", action="store_true", help="keep directional tags for nearby pairs")
    p.add_argument("--vertical-axis", choices=["camera_up", "world_up"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scenetext", description="Parse 3D scenes into structured text.")
    parser.add_argument("--version", action="version", version=f"scenetext {__version__}")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene and offline fixtures")
    _add_globals(p, suppress=True)
    p.add_argument("--objects", type=int, default=20)
    p.add_argument("--room", type=float, nargs=3, default=[10.0, 10.0, 3.0], metavar=("X", "Y", "Z"))
    p.add_argument("--views", type=int, default=4)
    p.add_argument("--dimension", type=int, default=64, help="offline embedding dimension")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("parse", help="build the spatial relation graph")
    _add_globals(p, suppress=True)
    p.add_argument("scene")
    p.add_argument("--priors")
    p.add_argument("-o", "--output", required=True)
    _add_reasoner_flags(p)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("describe", help="caption objects and render scene information")
    _add_globals(p, suppress=True)
    p.add_argument("scene")
    p.add_argument("graph")
    p.add_argument("--candidates", help="offline caption candidate file")
    p.add_argument("--crop-embeddings", help="per-object crop embedding file")
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--top-n", type=int, default=10)
    p.add_argument("--max-views", type=int, default=MAX_VIEWS)
    p.add_argument("--crops", help="crop manifest output (default: crops.json next to output)")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("reflect", help="score and repair captions and relations")
    _add_globals(p, suppress=True)
    p.add_argument("info")
    p.add_argument("--scene", required=True)
    p.add_argument("--priors")
    p.add_argument("--tau", type=float)
    p.add_argument("--rounds", type=int)
    p.add_argument("--gt-labels", action="store_true", help="judge captions by identification against scene labels")
    p.add_argument("--reports")
    p.add_argument("-o", "--output", required=True)
    _add_reasoner_flags(p)
    p.set_defaults(func=cmd_reflect)

    p = sub.add_parser("select", help="question-conditioned top-k selection")
    _add_globals(p, suppress=True)
    p.add_argument("info")
    p.add_argument("--embeddings", help="embedding file")
    p.add_argument("--question")
    p.add_argument("--rounds", type=int, choices=[0, 1, 2])
    p.add_argument("--k1", type=int)
    p.add_argument("--k2", type=int)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("eval", help="compute metrics over a predictions file")
    _add_globals(p, suppress=True)
    p.add_argument("predictions")
    p.add_argument("--metric", action="append", choices=list(ALL_METRICS))
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ProviderError as exc:
        print(f"scenetext {args.command}: provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except SceneTextError as exc:
        print(f"scenetext {args.command}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"scenetext {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
