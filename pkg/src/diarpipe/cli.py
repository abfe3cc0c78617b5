"""Command line front end.

Subcommands:

- ``diarize``: run the pipeline on a WAV file or a ground-truth script,
  with oracle or file-imported scorer/embedder backends; writes RTTM.
- ``score``: DER of a hypothesis RTTM against a reference RTTM.
- ``synth``: generate a synthetic meeting script (and optionally oracle
  score/embedding files for it).
- ``plda-gen``: write a synthetic PLDA model file.
- ``inspect``: print blocks of a ``--dump`` directory.

The environment variable DIARPIPE_CONFIG names a default config file used
whenever ``--config`` is not given.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import (
    ClusteringBackend,
    GroundTruthScript,
    ImportedEmbedder,
    ImportedScorer,
    MeetingSpec,
    OracleScorer,
    OracleScorerConfig,
    PipelineConfig,
    PldaGenerator,
    SyntheticEmbedder,
    build_codec,
    der,
    generate,
    load_config,
    make_synthetic_model,
    read_embeddings,
    read_model,
    read_rttm,
    read_scores,
    script_to_rttm,
    write_embeddings,
    write_model,
    write_rttm,
    write_scores,
)
from .audio import load_wav
from .embedding import EmbeddingSet, build_embedding_set, clean_masks
from .pipeline import PipelineRun, _stem, run
from .powerset import to_multilabel

ENV_CONFIG = "DIARPIPE_CONFIG"


def _load_cfg(path: str | None) -> PipelineConfig:
    path = path or os.environ.get(ENV_CONFIG)
    if path:
        if not os.path.exists(path):
            raise FileNotFoundError(f"config file not found: {path}")
        return load_config(path)
    return PipelineConfig()


def _require_file(path: str, what: str) -> str:
    if not os.path.exists(path):
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


def _plda_model(args: argparse.Namespace, cfg: PipelineConfig):
    if getattr(args, "plda", None):
        return read_model(_require_file(args.plda, "PLDA model"))
    return make_synthetic_model(
        embedding_dim=cfg.embedding_dim, lda_dim=cfg.lda_dim, seed=args.seed
    )


def _write_dump(out_dir: str, result: PipelineRun) -> str:
    dump_dir = os.path.join(out_dir, f"{result.recording_id}_dump")
    os.makedirs(dump_dir, exist_ok=True)
    agg = result.aggregated
    with open(os.path.join(dump_dir, "coverage.csv"), "w", encoding="utf-8") as fh:
        for t, cov in enumerate(agg.coverage):
            fh.write(f"{t},{int(cov)}\n")
    with open(os.path.join(dump_dir, "activity.csv"), "w", encoding="utf-8") as fh:
        for t, row in enumerate(agg.scores):
            fh.write(f"{t}," + ",".join(f"{v:.6f}" for v in row) + "\n")
    with open(os.path.join(dump_dir, "count.csv"), "w", encoding="utf-8") as fh:
        for t, c in enumerate(result.count.counts):
            fh.write(f"{t},{int(c)}\n")
    with open(os.path.join(dump_dir, "assignment.csv"), "w", encoding="utf-8") as fh:
        for row in result.assignment.labels:
            fh.write(",".join(str(int(v)) for v in row) + "\n")
    return dump_dir


def cmd_diarize(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args.config)
    codec = build_codec(cfg.max_local_speakers, cfg.max_overlap)

    script: GroundTruthScript | None = None
    if args.oracle:
        ann = read_rttm(_require_file(args.oracle, "oracle script"))
        script = GroundTruthScript.from_annotation(ann, duration_s=args.duration)

    audio = None
    if args.wav:
        audio = load_wav(_require_file(args.wav, "WAV file"))
    elif script is None:
        raise ValueError("nothing to diarize: provide --wav and/or --oracle")

    if args.scores:
        scorer = ImportedScorer(per_chunk=tuple(read_scores(_require_file(args.scores, "score file"))))
    elif script is not None:
        scorer = OracleScorer(
            script=script,
            codec=codec,
            cfg=OracleScorerConfig(
                p_correct=args.p_correct, label_noise=args.label_noise, seed=args.seed
            ),
            frame_rate=cfg.frame_rate,
            sample_rate_hz=cfg.sample_rate_hz,
        )
    else:
        raise ValueError("no score source: provide --scores or --oracle")

    model = _plda_model(args, cfg)
    if args.embeddings:
        emb_set = read_embeddings(_require_file(args.embeddings, "embedding file"))
        embedder = ImportedEmbedder(embeddings=emb_set)
    elif script is not None:
        embedder = SyntheticEmbedder(
            script=script,
            generator=PldaGenerator(model=model, seed=args.seed),
            n_slots=cfg.max_local_speakers,
        )
    else:
        raise ValueError("no embedding source: provide --embeddings or --oracle")

    if script is not None:
        recording_id = args.session or script.recording_id
    else:
        recording_id = args.session or _stem(args.wav)

    backend = ClusteringBackend(model=model, cfg=cfg)
    if audio is not None:
        result = run(cfg, scorer, embedder, backend, audio=audio, recording_id=recording_id)
    else:
        result = run(
            cfg, scorer, embedder, backend, duration_s=script.duration_s, recording_id=recording_id
        )

    os.makedirs(args.out, exist_ok=True)
    rttm_path = os.path.join(args.out, f"{recording_id}.rttm")
    write_rttm(rttm_path, result.annotation)
    print(f"chunks {result.batch.n_chunks}")
    print(f"speakers {result.assignment.n_clusters}")
    print(f"rttm {rttm_path}")
    if args.dump:
        print(f"dump {_write_dump(args.out, result)}")
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    ref = read_rttm(_require_file(args.ref, "reference RTTM"))
    hyp = read_rttm(_require_file(args.hyp, "hypothesis RTTM"))
    breakdown = der(ref, hyp, collar_s=args.collar, skip_overlap=args.skip_overlap)
    print(f"t_ref {breakdown.t_ref:.3f}")
    print(f"t_miss {breakdown.t_miss:.3f}")
    print(f"t_fa {breakdown.t_fa:.3f}")
    print(f"t_conf {breakdown.t_conf:.3f}")
    print(f"DER {100.0 * breakdown.der:.2f}%")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args.config)
    spec = MeetingSpec(
        n_speakers=args.speakers,
        duration_s=args.duration,
        mean_turn_s=args.mean_turn,
        silence_target=args.silence,
        overlap_target=args.overlap,
        seed=args.seed,
    )
    script = generate(spec)
    rttm_path = f"{args.out}.rttm"
    write_rttm(rttm_path, script_to_rttm(script))
    print(f"rttm {rttm_path}")

    if args.scores_out or args.embeddings_out:
        codec = build_codec(cfg.max_local_speakers, cfg.max_overlap)
        scorer = OracleScorer(
            script=script,
            codec=codec,
            cfg=OracleScorerConfig(
                p_correct=args.p_correct, label_noise=args.label_noise, seed=args.seed
            ),
            frame_rate=cfg.frame_rate,
            sample_rate_hz=cfg.sample_rate_hz,
        )
        from .audio import AudioBuffer, sliding_window

        silent = AudioBuffer(
            samples=np.zeros(round(script.duration_s * cfg.sample_rate_hz)),
            sample_rate_hz=cfg.sample_rate_hz,
        )
        batch = sliding_window(silent, cfg)
        blocks = [
            scorer.score_chunk(batch.chunks[c], batch.span(c), c) for c in range(batch.n_chunks)
        ]
        if args.scores_out:
            write_scores(args.scores_out, blocks)
            print(f"scores {args.scores_out}")
        if args.embeddings_out:
            model = _plda_model(args, cfg)
            embedder = SyntheticEmbedder(
                script=script,
                generator=PldaGenerator(model=model, seed=args.seed),
                n_slots=cfg.max_local_speakers,
            )
            multilabel = np.stack([to_multilabel(b, codec) for b in blocks])
            masks = clean_masks(multilabel, cfg.min_num_frames)
            emb: EmbeddingSet = build_embedding_set(
                embedder,
                [batch.span(c) for c in range(batch.n_chunks)],
                masks,
                model.embedding_dim,
            )
            write_embeddings(args.embeddings_out, emb)
            print(f"embeddings {args.embeddings_out}")
    return 0


def cmd_plda_gen(args: argparse.Namespace) -> int:
    model = make_synthetic_model(
        embedding_dim=args.embedding_dim,
        lda_dim=args.lda_dim,
        separation=args.separation,
        seed=args.seed,
    )
    write_model(args.out, model)
    print(f"model {args.out}")
    return 0


BLOCK_FILES = {
    4: ["coverage.csv", "activity.csv", "count.csv"],
    6: ["assignment.csv"],
}


def cmd_inspect(args: argparse.Namespace) -> int:
    if args.block not in BLOCK_FILES:
        raise ValueError(f"no dumped data for block {args.block}; known: {sorted(BLOCK_FILES)}")
    _require_file(args.dump, "dump directory")
    for name in BLOCK_FILES[args.block]:
        path = os.path.join(args.dump, name)
        _require_file(path, f"dump file for block {args.block}")
        print(f"# {name}")
        with open(path, "r", encoding="utf-8") as fh:
            sys.stdout.write(fh.read())
    return 0


def _config_key_epilog() -> str:
    import dataclasses

    lines = ["config file keys (one 'key = value' per line):"]
    for f in dataclasses.fields(PipelineConfig):
        if f.name == "frame_rate":
            continue
        lines.append(f"  {f.name} (default {f.default})")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diarpipe",
        description=__doc__,
        epilog=_config_key_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("diarize", help="run the diarization pipeline")
    p.add_argument("--wav", help="input waveform (16 kHz RIFF/WAVE)")
    p.add_argument("--oracle", help="ground-truth RTTM driving the oracle backends")
    p.add_argument("--duration", type=float, default=None, help="override script duration (s)")
    p.add_argument("--scores", help="imported per-chunk score file")
    p.add_argument("--embeddings", help="imported embedding file")
    p.add_argument("--plda", help="PLDA model file (default: synthetic from --seed)")
    p.add_argument("--config", help=f"config file (default: ${ENV_CONFIG})")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p-correct", type=float, default=0.95, help="oracle scorer peak mass")
    p.add_argument("--label-noise", type=float, default=0.0, help="oracle scorer swap rate")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--session", help="recording id for outputs")
    p.add_argument("--dump", action="store_true", help="write intermediate CSVs")
    p.set_defaults(func=cmd_diarize)

    p = sub.add_parser("score", help="DER of hypothesis vs reference")
    p.add_argument("ref")
    p.add_argument("hyp")
    p.add_argument("--collar", type=float, default=0.0, help="seconds excluded around boundaries")
    p.add_argument("--skip-overlap", action="store_true", help="exclude overlapped reference speech")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("synth", help="generate a synthetic meeting")
    p.add_argument("--speakers", type=int, default=4)
    p.add_argument("--duration", type=float, default=30.0)
    p.add_argument("--mean-turn", type=float, default=2.0)
    p.add_argument("--silence", type=float, default=0.08)
    p.add_argument("--overlap", type=float, default=0.28)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output base path (writes <out>.rttm)")
    p.add_argument("--scores-out", help="also write oracle scores here")
    p.add_argument("--embeddings-out", help="also write synthetic embeddings here")
    p.add_argument("--plda", help="PLDA model file for embeddings")
    p.add_argument("--config", help=f"config file (default: ${ENV_CONFIG})")
    p.add_argument("--p-correct", type=float, default=0.95)
    p.add_argument("--label-noise", type=float, default=0.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("plda-gen", help="write a synthetic PLDA model")
    p.add_argument("--embedding-dim", "--dim", type=int, default=256)
    p.add_argument("--lda-dim", "--lda", type=int, default=128)
    p.add_argument("--separation", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plda_gen)

    p = sub.add_parser("inspect", help="print dumped pipeline intermediates")
    p.add_argument("dump", help="dump directory written by diarize --dump")
    p.add_argument("--block", type=int, required=True, help="pipeline block number (4 or 6)")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # surface a clean message, not a traceback
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
