"""Batch command-line front end.

Subcommands wire the pipeline end to end: ``synth`` writes a phantom
(mask, connectivity, ground truth), ``parcellate`` runs the iterative
connectivity-driven parcellation from a random initial segmentation,
``network`` builds a region network, ``metrics``/``spectrum`` emit the
graph-measure and spectral reports, and ``stats`` runs the group
comparisons. Every subcommand is a pure function of its inputs, flags
and seed; outputs are removed again if a command fails partway.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .core import (
    Parcellation,
    Rng,
    format_float,
    read_mask,
    read_parcellation,
    read_sparse,
    write_mask,
    write_parcellation,
    write_sparse,
)
from .metrics import MetricsReport, metrics_report
from .network import (
    build_network_max,
    build_network_normalized,
    preprocess,
    read_network,
    threshold_weighted,
    write_network,
)
from .parcellate import discontiguous_regions, parcellate_iterative, random_parcellation
from .spectral import (
    spectral_distance,
    spectral_histogram,
    spectrum,
    write_histogram_csv,
    write_spectrum_csv,
)
from .stats import generate_phantom, loocv_linear_svm, read_group_csv, welch_t_test


class UsageError(Exception):
    """Bad arguments or missing input files; exits with code 2."""


class _Outputs:
    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self._paths = []

    def path(self, name) -> Path:
        p = self.dir / name
        self._paths.append(p)
        return p

    def cleanup(self):
        for p in self._paths:
            try:
                p.unlink()
            except FileNotFoundError:
                pass


def _require_file(flag, value):
    if value is None:
        raise UsageError(f"--{flag} is required")
    if not Path(value).is_file():
        raise UsageError(f"--{flag} file not found: {value}")
    return value


def _parse_dims(text):
    parts = [p for p in text.split(",") if p]
    if len(parts) != 3:
        raise UsageError(f"--dims expects 'nx,ny,nz', got {text!r}")
    return tuple(int(p) for p in parts)


def _parse_float_list(text, flag):
    try:
        return [float(p) for p in text.split(",") if p]
    except ValueError:
        raise UsageError(f"--{flag} expects a comma-separated list, got {text!r}") from None


def _parse_int_list(text, flag):
    try:
        return [int(p) for p in text.split(",") if p]
    except ValueError:
        raise UsageError(f"--{flag} expects a comma-separated list, got {text!r}") from None


def cmd_synth(args) -> int:
    dims = _parse_dims(args.dims)
    n_voxels = dims[0] * dims[1] * dims[2]
    if args.blocks < 1 or args.blocks > n_voxels:
        raise UsageError(f"--blocks must be in 1..{n_voxels} for dims {dims}")
    if not args.within_mean > args.cross_mean >= 0:
        raise UsageError("need --within-mean > --cross-mean >= 0")
    phantom = generate_phantom(
        dims,
        args.blocks,
        args.within_mean,
        args.cross_mean,
        args.noise_sd,
        Rng(args.seed),
        r_conn=args.r_conn,
    )
    outs = _Outputs(args.out)
    try:
        write_mask(phantom.mask, outs.path("mask.txt"))
        write_sparse(phantom.conn, outs.path("conn.txt"))
        write_parcellation(phantom.ground_truth, outs.path("truth.txt"))
    except Exception:
        outs.cleanup()
        raise
    return 0


def cmd_parcellate(args) -> int:
    mask_path = _require_file("mask", args.mask)
    conn_path = _require_file("conn", args.conn)
    if args.k < 1:
        raise UsageError("--k must be >= 1")
    mask = read_mask(mask_path)
    conn = read_sparse(conn_path, len(mask), require_nonnegative=True)
    rng = Rng(args.seed)
    init_k = args.init_k if args.init_k is not None else max(args.k, 2)
    init = random_parcellation(mask, init_k, rng, r=args.r)
    if args.k == 1:
        labels = np.ones(len(mask), dtype=np.int64)
        outs = _Outputs(args.out)
        try:
            write_parcellation(Parcellation(labels, 1), outs.path("parcellation.txt"))
            with open(outs.path("rounds.log"), "w", encoding="utf-8", newline="\n") as fh:
                fh.write("round 1 ARI=1\n")
        except Exception:
            outs.cleanup()
            raise
        return 0
    run = parcellate_iterative(
        mask,
        conn,
        args.k,
        init,
        rng,
        sim_threshold=args.sim_threshold,
        max_rounds=args.max_rounds,
        r=args.r,
    )
    outs = _Outputs(args.out)
    try:
        write_parcellation(run.parcellation, outs.path("parcellation.txt"))
        with open(outs.path("rounds.log"), "w", encoding="utf-8", newline="\n") as fh:
            for i, ari in enumerate(run.round_similarity, start=1):
                fh.write(f"round {i} ARI={format_float(ari)}\n")
    except Exception:
        outs.cleanup()
        raise
    stages = ", ".join(
        f"{name}={secs:.3f}s" for name, secs in sorted(run.stage_seconds.items())
    )
    print(f"stage timing: {stages}", file=sys.stderr)
    bad = discontiguous_regions(run.parcellation, mask, r=args.r)
    if bad:
        print(f"note: {len(bad)} discontiguous region(s): {bad}", file=sys.stderr)
    return 0


def _build_network(conn, parcellation, variant):
    if variant == "normalized":
        return build_network_normalized(conn, parcellation)
    return build_network_max(conn, parcellation)


def cmd_network(args) -> int:
    conn_path = _require_file("conn", args.conn)
    parc_path = _require_file("parcellation", args.parcellation)
    parcellation = read_parcellation(parc_path)
    conn = read_sparse(conn_path, parcellation.n, require_nonnegative=True)
    net = _build_network(conn, parcellation, args.edge_weight)
    outs = _Outputs(args.out)
    try:
        write_network(net, outs.path("network.txt"))
    except Exception:
        outs.cleanup()
        raise
    return 0


def cmd_metrics(args) -> int:
    outs = _Outputs(args.out)
    rows = []
    if args.sweep_k:
        mask_path = _require_file("mask", args.mask)
        conn_path = _require_file("conn", args.conn)
        ks = _parse_int_list(args.sweep_k, "sweep-k")
        mask = read_mask(mask_path)
        conn = read_sparse(conn_path, len(mask), require_nonnegative=True)
        rng = Rng(args.seed)
        for k in ks:
            parcellation = random_parcellation(mask, k, rng)
            net = _build_network(conn, parcellation, args.edge_weight)
            rows.append(metrics_report(preprocess(net, eps=args.eps)).csv_row())
    else:
        net_path = _require_file("network", args.network)
        net, _ = read_network(net_path)
        rows.append(metrics_report(preprocess(net, eps=args.eps)).csv_row())
    try:
        with open(outs.path("metrics.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(MetricsReport.CSV_HEADER + "\n")
            for row in rows:
                fh.write(row + "\n")
    except Exception:
        outs.cleanup()
        raise
    return 0


def cmd_spectrum(args) -> int:
    net_path = _require_file("network", args.network)
    net, _ = read_network(net_path)
    outs = _Outputs(args.out)
    try:
        if args.eps_sweep:
            eps_values = _parse_float_list(args.eps_sweep, "eps-sweep")
            spectra = []
            for eps in eps_values:
                thresholded, _ = threshold_weighted(net, eps)
                s = spectrum(thresholded, gamma=args.gamma)
                spectra.append(s)
                write_spectrum_csv(s, outs.path(f"spectrum_eps_{format_float(eps)}.csv"))
            with open(outs.path("distances.csv"), "w", encoding="utf-8", newline="\n") as fh:
                fh.write("eps_a,eps_b,distance\n")
                for i in range(len(eps_values)):
                    for j in range(i + 1, len(eps_values)):
                        d = spectral_distance(spectra[i], spectra[j])
                        fh.write(
                            f"{format_float(eps_values[i])},"
                            f"{format_float(eps_values[j])},{format_float(d)}\n"
                        )
        else:
            cleaned, _ = threshold_weighted(net, 0.0)  # strip loops, drop isolated
            s = spectrum(cleaned, gamma=args.gamma)
            write_spectrum_csv(s, outs.path("spectrum.csv"))
            lefts, counts = spectral_histogram(s, bins=args.bins)
            write_histogram_csv(lefts, counts, outs.path("histogram.csv"))
    except Exception:
        outs.cleanup()
        raise
    return 0


def cmd_stats(args) -> int:
    csv_path = _require_file("group-csv", args.group_csv)
    sample = read_group_csv(csv_path)
    features = (
        [f for f in args.features.split(",") if f] if args.features else sample.feature_names
    )
    feature_sets = (
        [fs.split("+") for fs in args.svm_feature_sets.split(";") if fs]
        if args.svm_feature_sets
        else [features]
    )
    outs = _Outputs(args.out)
    try:
        with open(outs.path("ttest.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("feature,t,p\n")
            for name in features:
                a, b = sample.columns([name])
                t, p = welch_t_test(a.ravel(), b.ravel())
                fh.write(f"{name},{format_float(t)},{format_float(p)}\n")
        with open(outs.path("loocv.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("features,accuracy_group1,accuracy_group2\n")
            for fs in feature_sets:
                res = loocv_linear_svm(sample, fs, c=args.svm_c, rng=Rng(args.seed))
                fh.write(
                    f"{'+'.join(fs)},{format_float(res.accuracy_group1)},"
                    f"{format_float(res.accuracy_group2)}\n"
                )
    except Exception:
        outs.cleanup()
        raise
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="brainparc",
        description="Voxel-connectivity parcellation and structural network analysis.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
        p.add_argument(
            "--threads",
            type=int,
            default=1,
            help="worker thread cap; results do not depend on it",
        )
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("synth", help="generate a synthetic phantom")
    p.add_argument("--dims", default="12,12,12", help="lattice dims 'nx,ny,nz'")
    p.add_argument("--blocks", type=int, default=4, help="number of planted blocks")
    p.add_argument("--within-mean", type=float, default=5.0)
    p.add_argument("--cross-mean", type=float, default=1.0)
    p.add_argument("--noise-sd", type=float, default=0.5)
    p.add_argument("--r-conn", type=float, default=6.0, help="connection radius")
    add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("parcellate", help="iterative connectivity-driven parcellation")
    p.add_argument("--mask")
    p.add_argument("--conn")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--r", type=float, default=2.0, help="spatial adjacency radius")
    p.add_argument("--sim-threshold", type=float, default=0.9)
    p.add_argument("--max-rounds", type=int, default=10)
    p.add_argument("--init-k", type=int, default=None, help="regions in the random init")
    add_common(p)
    p.set_defaults(func=cmd_parcellate)

    p = sub.add_parser("network", help="build a region-level network")
    p.add_argument("--conn")
    p.add_argument("--parcellation")
    p.add_argument("--edge-weight", choices=("max", "normalized"), default="max")
    add_common(p)
    p.set_defaults(func=cmd_network)

    p = sub.add_parser("metrics", help="graph measures of a thresholded network")
    p.add_argument("--network")
    p.add_argument("--mask")
    p.add_argument("--conn")
    p.add_argument("--sweep-k", help="comma list of k values (random parcellations)")
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--edge-weight", choices=("max", "normalized"), default="max")
    add_common(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("spectrum", help="normalized-Laplacian spectrum of a network")
    p.add_argument("--network")
    p.add_argument("--gamma", type=float, default=0.3)
    p.add_argument("--bins", type=int, default=40)
    p.add_argument("--eps-sweep", help="comma list of eps values")
    add_common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("stats", help="group statistics and classification")
    p.add_argument("--group-csv")
    p.add_argument("--features", help="comma list (default: all in the CSV)")
    p.add_argument("--svm-feature-sets", help="semicolon list of '+'-joined sets")
    p.add_argument("--svm-c", type=float, default=1.0)
    add_common(p)
    p.set_defaults(func=cmd_stats)

    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    try:
        code = args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - surface module errors with context
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return 1
    print(f"{args.command} finished in {time.perf_counter() - t0:.3f}s", file=sys.stderr)
    return code


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
