"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure.  Subcommands: design, toxtrain, toxpredict, physchem, encode,
align, cluster, census.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__, descriptors, physchem, pipeline, similarity
from . import corpus as corpus_mod
from .errors import PeptasteError
from .sequences import PatternMode, Peptide, parse_pattern
from .toxicity import ensemble as ens


def _pattern(code: str):
    return parse_pattern(code if code.startswith(">") else ">" + code)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="peptaste",
        description="Taste-peptide design, toxicity screening, and profiling.",
    )
    parser.add_argument("--version", action="version", version=f"peptaste {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="run the full design workflow")
    p.add_argument("--pattern", required=True, help="request code such as x1x00")
    p.add_argument("--mode", choices=["single", "multiple"], default="multiple")
    p.add_argument("--corpus", required=True, help="annotated corpus (FASTA or TSV)")
    p.add_argument("--tox-model", required=True, help="fitted toxicity model file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--latent-dim", type=int, default=2000)
    p.add_argument("--extension-epochs", type=int, default=None)
    p.add_argument("--hidden-units", type=int, default=128)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--l1-lambda", type=float, default=0.01)
    p.add_argument("--learning-rate", type=float, default=0.001)
    p.add_argument("--candidates", type=int, default=100)
    p.add_argument("--keep-fraction", type=float, default=0.25)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--cluster-threshold", type=float, default=0.70)
    p.add_argument("--max-len", type=int, default=14)
    p.add_argument(
        "--generation-mode", choices=["prior", "jitter"], default="prior"
    )
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument(
        "--distance-space",
        choices=["pca2", "latent"],
        default="pca2",
        help="space for nearest-neighbor screening distances",
    )
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("toxtrain", help="train the toxicity ensemble")
    p.add_argument("--pos", required=True, help="toxic sequences file")
    p.add_argument("--neg", required=True, help="non-toxic sequences file")
    p.add_argument("--model-out", required=True)
    p.add_argument("--report-out", default=None, help="metrics text file")
    p.add_argument("--trace-out", default=None, help="selection trace TSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--epsilon", type=float, default=0.001)
    p.add_argument("--max-len", type=int, default=25)
    p.add_argument(
        "--selector",
        default="rf",
        help="classifier preset driving descriptor selection",
    )
    p.add_argument("--selector-trees", type=int, default=None)
    p.add_argument("--member-trees", type=int, default=None)
    p.add_argument(
        "--descriptors",
        default=None,
        help="comma-separated descriptor universe (default: all 20)",
    )

    p = sub.add_parser("toxpredict", help="score sequences with a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="sequences file")
    p.add_argument("--out", default=None, help="output TSV (default stdout)")

    p = sub.add_parser(
        "toxbench", help="evaluate a fitted model on labeled sequence files"
    )
    p.add_argument("--model", required=True)
    p.add_argument("--pos", required=True, help="known-toxic sequences")
    p.add_argument("--neg", required=True, help="known-non-toxic sequences")
    p.add_argument("--out", default=None, help="metrics TSV (default stdout)")

    p = sub.add_parser("physchem", help="physicochemical profiles")
    p.add_argument("--input", required=True, help="sequences file (FASTA or text)")
    p.add_argument("--out", default=None, help="output TSV (default stdout)")

    p = sub.add_parser("encode", help="emit descriptor vectors as TSV")
    p.add_argument("--input", required=True, help="sequences file")
    p.add_argument(
        "--descriptors", required=True, help="comma-separated descriptor names"
    )
    p.add_argument("--out", default=None, help="output TSV (default stdout)")

    p = sub.add_parser("align", help="align two sequences")
    p.add_argument("seq_a")
    p.add_argument("seq_b")
    p.add_argument("--match", type=float, default=2.0)
    p.add_argument("--mismatch", type=float, default=-1.0)
    p.add_argument("--gap-open", type=float, default=-0.5)
    p.add_argument("--gap-extend", type=float, default=-0.1)

    p = sub.add_parser("cluster", help="similarity clustering of sequences")
    p.add_argument("--input", required=True, help="sequences file")
    p.add_argument("--threshold", type=float, default=0.70)
    p.add_argument("--out", default=None, help="output TSV (default stdout)")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("census", help="taste statistics for a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", default=None, help="census TSV (default stdout)")
    return parser


def _emit(text: str, path):
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_design(args) -> int:
    run = pipeline.DesignRun(
        pattern=_pattern(args.pattern),
        mode=PatternMode(args.mode),
        corpus_path=args.corpus,
        out_dir=args.out,
        tox_model_path=args.tox_model,
        seed=args.seed,
        epochs=args.epochs,
        latent_dim=args.latent_dim,
        extension_epochs=args.extension_epochs,
        hidden_units=args.hidden_units,
        batch_size=args.batch_size,
        dropout_rate=args.dropout,
        l1_lambda=args.l1_lambda,
        learning_rate=args.learning_rate,
        candidates=args.candidates,
        keep_fraction=args.keep_fraction,
        k=args.k,
        alpha=args.alpha,
        cluster_threshold=args.cluster_threshold,
        max_len=args.max_len,
        generation_mode=args.generation_mode,
        tau=args.tau,
        distance_space=args.distance_space,
        workers=args.workers,
    )
    report = pipeline.run_design(run)
    counts = report.counts
    print(
        f"design complete: {counts['generated']} generated, "
        f"{counts['filtered']} passed filtering, "
        f"{counts['representatives']} representatives -> {report.out_dir}"
    )
    return 0


def _cmd_toxtrain(args) -> int:
    universe = (
        tuple(s.strip() for s in args.descriptors.split(","))
        if args.descriptors
        else descriptors.DESCRIPTOR_IDS
    )
    options = pipeline.ToxTrainOptions(
        seed=args.seed,
        folds=args.folds,
        epsilon=args.epsilon,
        max_len=args.max_len,
        selector=args.selector,
        selector_trees=args.selector_trees,
        member_trees=args.member_trees,
        universe=universe,
    )
    result = pipeline.run_toxtrain(args.pos, args.neg, args.model_out, options)
    text = pipeline.toxtrain_report_text(result)
    if args.report_out:
        _emit(text, args.report_out)
    if args.trace_out:
        lines = ["stage\tdescriptors\tmcc"]
        for row in result.selection.trace:
            lines.append(f"{row.stage}\t{'+'.join(row.ids)}\t{row.mcc!r}")
        _emit("\n".join(lines) + "\n", args.trace_out)
    sys.stdout.write(text)
    return 0


def _cmd_toxpredict(args) -> int:
    rows = pipeline.run_toxpredict(args.model, args.input)
    _emit(ens.predict_rows_tsv(rows), args.out)
    return 0


def _cmd_toxbench(args) -> int:
    report = pipeline.run_toxbench(args.model, args.pos, args.neg)
    lines = ["metric\tvalue"]
    for key, value in report.as_dict().items():
        lines.append(f"{key}\t{value!r}" if isinstance(value, float) else f"{key}\t{value}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_physchem(args) -> int:
    lines = ["sequence\t" + "\t".join(physchem.PROFILE_FIELDS)]
    for seq in pipeline.read_sequences(args.input):
        prof = physchem.profile(Peptide(seq))
        values = "\t".join(repr(v) for v in prof.as_dict().values())
        lines.append(f"{seq}\t{values}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_encode(args) -> int:
    ids = [s.strip() for s in args.descriptors.split(",") if s.strip()]
    peptides = [Peptide(s) for s in pipeline.read_sequences(args.input)]
    matrix = descriptors.encode_matrix(ids, peptides)
    names = descriptors.column_names(ids)
    lines = ["sequence\t" + "\t".join(names)]
    for pep, row in zip(peptides, matrix):
        lines.append(str(pep) + "\t" + "\t".join(repr(v) for v in row))
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_align(args) -> int:
    params = similarity.AlignParams(
        match=args.match,
        mismatch=args.mismatch,
        gap_open=args.gap_open,
        gap_extend=args.gap_extend,
    )
    result = similarity.nw_align(args.seq_a, args.seq_b, params)
    sim = similarity.normalized_similarity(args.seq_a, args.seq_b, params)
    print(f"score: {result.score!r}")
    print(f"normalized similarity: {sim!r}")
    print(result.aligned_a)
    print(result.aligned_b)
    return 0


def _cmd_cluster(args) -> int:
    seqs = pipeline.read_sequences(args.input)
    for s in seqs:
        Peptide(s)  # validate early with a clear error
    sim = similarity.similarity_matrix(seqs, workers=args.workers)
    clusters = similarity.build_components(seqs, threshold=args.threshold, sim=sim)
    reps = similarity.pick_representatives(clusters, sim)
    lines = ["cluster_id\tmember\tis_representative"]
    for cid, members in enumerate(clusters):
        for m in members:
            lines.append(f"{cid}\t{seqs[m]}\t{m == reps[cid]}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_census(args) -> int:
    census = corpus_mod.taste_census(pipeline.read_taste_corpus(args.corpus))
    _emit(census.to_tsv(), args.out)
    if args.out:
        print(census.summary())
    return 0


_COMMANDS = {
    "design": _cmd_design,
    "toxtrain": _cmd_toxtrain,
    "toxpredict": _cmd_toxpredict,
    "toxbench": _cmd_toxbench,
    "physchem": _cmd_physchem,
    "encode": _cmd_encode,
    "align": _cmd_align,
    "cluster": _cmd_cluster,
    "census": _cmd_census,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except PeptasteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
