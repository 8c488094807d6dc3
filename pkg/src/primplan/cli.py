"""Command-line pipeline: generate a library, build its collision index,
fly single episodes, and run benchmark grids.

Exit codes: 0 success, 1 runtime failure (corrupt/stale artifacts, I/O),
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .collision import (
    LibraryMismatchError,
    build_index,
    load_index,
    save_index,
)
from .config import PRESET_NAMES, resolve_config
from .errors import ConfigError, FormatError
from .library import build_library, load_library, save_library
from .paths import build_path_library
from .simulator import CSV_COLUMNS, run_episode, run_grid

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _parse_seeds(raw: str) -> List[int]:
    """Accept '7', '0,3,9', or a half-open range 'lo:hi'."""
    raw = raw.strip()
    if ":" in raw:
        lo_s, _, hi_s = raw.partition(":")
        try:
            lo, hi = int(lo_s), int(hi_s)
        except ValueError:
            raise ConfigError(f"bad --seeds range {raw!r}; expected 'lo:hi'") from None
        if hi <= lo:
            raise ConfigError(f"bad --seeds range {raw!r}; need lo < hi")
        return list(range(lo, hi))
    try:
        return [int(p) for p in raw.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"bad --seeds value {raw!r}; expected integers") from None


def _parse_int_list(raw: str, flag: str) -> List[int]:
    try:
        vals = [int(p) for p in raw.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"bad {flag} value {raw!r}; expected integers") from None
    if not vals:
        raise ConfigError(f"{flag} needs at least one value")
    return vals


# ---------------------------------------------------------------------------
# Subcommands


def cmd_generate_library(args: argparse.Namespace) -> int:
    rc = resolve_config(args.config)
    lc = rc.library
    paths = build_path_library(
        list(lc.radii), list(lc.start_angles_deg), lc.rotation_step_deg, lc.length_m
    )
    lib = build_library(
        paths,
        lc.bounds(),
        speed_step=lc.speed_step,
        sample_step=lc.sample_step,
        n_stages=lc.n_stages,
        config_echo=lc.echo(),
    )
    out = Path(args.out or "library.pplib")
    save_library(lib, out)
    print(f"wrote {out}")
    print(f"paths: {len(lib.paths)}")
    print(f"speed slices: {len(lib.speed_grid)}")
    print(f"primitives: {len(lib.primitives)}")
    if lib.infeasible:
        print(f"infeasible (path_id, speed_index) pairs: {len(lib.infeasible)}")
        for pid, k in lib.infeasible:
            print(f"  path {pid} at slice {k} (start speed {lib.speed_grid[k]:.1f})")
    else:
        print("infeasible pairs: none")
    return EXIT_OK


def cmd_build_index(args: argparse.Namespace) -> int:
    lib = load_library(args.library)
    rc = resolve_config(args.config)
    ic = rc.index
    index = build_index(
        lib,
        voxel_size=ic.voxel_size_m,
        d=ic.clearance_m,
        r_inflated=ic.r_inflated_m,
        robot_radius=ic.robot_radius_m,
    )
    out = Path(args.out or "index.ppidx")
    save_index(index, out)
    occupied = int(np.count_nonzero(np.diff(index.offsets)))
    print(f"wrote {out}")
    print(f"grid dims: {index.dims[0]} x {index.dims[1]} x {index.dims[2]}")
    print(f"voxel size: {index.voxel_size}")
    print(f"query distance: {index.query_distance}")
    print(f"occupied voxels: {occupied} / {int(np.prod(index.dims))}")
    print(f"library hash: {index.library_hash[:16]}...")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    lib = load_library(args.library)
    index = load_index(args.index, lib)
    rc = resolve_config(args.config)
    cfg = rc.episode_config(seed=args.seed, n_obs=args.n_obs)
    result = run_episode(cfg, lib, index)
    for key, value in result.row().items():
        print(f"{key}: {value}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        target = out / "episode.csv"
        with target.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            writer.writerow(result.row())
        print(f"wrote {target}")
    return EXIT_OK


def cmd_benchmark(args: argparse.Namespace) -> int:
    libraries = args.library or []
    indexes = args.index or []
    if len(libraries) != len(indexes) or not libraries:
        raise ConfigError(
            "benchmark needs matching --library/--index pairs "
            f"(got {len(libraries)} libraries, {len(indexes)} indexes)"
        )
    entries = []
    for lib_path, idx_path in zip(libraries, indexes):
        lib = load_library(lib_path)
        entries.append((lib, load_index(idx_path, lib)))
    n_obs_list = _parse_int_list(args.n_obs, "--n-obs") if args.n_obs else [100, 150, 200]
    seeds = _parse_seeds(args.seeds) if args.seeds else list(range(20))
    formats = args.format or ["csv"]
    rc = resolve_config(args.config)
    base = rc.episode_config(seed=0, n_obs=0)
    out_dir = Path(args.out or "benchmark_out")
    report = run_grid(
        entries, n_obs_list, seeds, out_dir=out_dir, formats=formats, config=base
    )
    header = (
        f"{'paths':>6} {'n_obs':>6} {'episodes':>8} {'success':>8} "
        f"{'t_mean_s':>9} {'d_mean_m':>9} {'check_us':>9}"
    )
    print(header)
    for row in report.summary_rows():
        print(
            f"{row['n_paths']:>6} {row['n_obs']:>6} {row['episodes']:>8} "
            f"{float(row['success_rate']):>8.2f} "
            f"{float(row['mean_t_total_s']):>9.2f} "
            f"{float(row['mean_d_total_m']):>9.2f} "
            f"{float(row['mean_check_us']):>9.1f}"
        )
    for path in [report.episode_csv, report.summary_csv, *report.svg_paths]:
        if path is not None:
            print(f"wrote {path}")
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace) -> int:
    if not args.library and not args.index:
        raise ConfigError("inspect needs --library and/or --index")
    lib = None
    if args.library:
        lib = load_library(args.library)
        per_slice = {}
        for (_, k) in lib.primitives:
            per_slice[k] = per_slice.get(k, 0) + 1
        print(f"library: {args.library}")
        print(f"  paths: {len(lib.paths)}")
        print(f"  speed slices: {len(lib.speed_grid)} "
              f"(step {lib.speed_step}, top {lib.speed_grid[-1]:.1f})")
        print(f"  primitives: {len(lib.primitives)}")
        print(f"  infeasible pairs: {len(lib.infeasible)}")
        print(f"  slice sizes: min {min(per_slice.values())}, "
              f"max {max(per_slice.values())}")
        print(f"  content hash: {lib.content_hash()[:16]}...")
    if args.index:
        index = load_index(args.index, lib)
        occupied = int(np.count_nonzero(np.diff(index.offsets)))
        print(f"index: {args.index}")
        print(f"  grid dims: {index.dims[0]} x {index.dims[1]} x {index.dims[2]}")
        print(f"  voxel size: {index.voxel_size}")
        print(f"  query distance: {index.query_distance}")
        print(f"  occupied voxels: {occupied} / {int(np.prod(index.dims))}")
        print(f"  built from library hash: {index.library_hash[:16]}...")
        if lib is not None:
            print("  hash check: ok (matches --library)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="primplan",
        description=(
            "Offline time-optimal primitive libraries, precomputed collision "
            "lookup, and a receding-horizon flight benchmark."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    config_help = (
        "INI config file, preset name, or 'preset:<name>' "
        f"(presets: {', '.join(PRESET_NAMES)})"
    )

    p = sub.add_parser(
        "generate-library",
        help="parameterize a path rosette into a primitive library (.pplib)",
    )
    p.add_argument("--config", help=config_help)
    p.add_argument("--out", help="output .pplib path (default library.pplib)")
    p.set_defaults(func=cmd_generate_library)

    p = sub.add_parser(
        "build-index",
        help="rasterize a library into a voxel collision index (.ppidx)",
    )
    p.add_argument("--library", required=True, help="input .pplib file")
    p.add_argument("--config", help=config_help)
    p.add_argument("--out", help="output .ppidx path (default index.ppidx)")
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("simulate", help="fly one seeded episode and print metrics")
    p.add_argument("--library", required=True, help=".pplib file")
    p.add_argument("--index", required=True, help=".ppidx file built from the library")
    p.add_argument("--config", help=config_help)
    p.add_argument("--seed", type=int, default=0, help="map/episode seed (default 0)")
    p.add_argument("--n-obs", type=int, default=None,
                   help="obstacle count (default from config, else 200)")
    p.add_argument("--out", help="directory for a one-row episode.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="run a (library x density x seed) grid")
    p.add_argument("--library", action="append",
                   help=".pplib file (repeat for multiple libraries)")
    p.add_argument("--index", action="append",
                   help=".ppidx file (repeat, paired with --library order)")
    p.add_argument("--config", help=config_help)
    p.add_argument("--n-obs", help="comma-separated obstacle counts (default 100,150,200)")
    p.add_argument("--seeds", help="seed list '0,1,2' or range 'lo:hi' (default 0:20)")
    p.add_argument("--out", help="report directory (default benchmark_out)")
    p.add_argument("--format", action="append", choices=("csv", "svg"),
                   help="report format, repeatable (default csv)")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("inspect", help="print library/index stats and check pairing")
    p.add_argument("--library", help=".pplib file")
    p.add_argument("--index", help=".ppidx file")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, LibraryMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
