"""Command-line front end.

    mixlab <subcommand> --config <path> --seed <u64> --out <dir> [--threads <n>] [--svg]

Config files are UTF-8 text, one ``key = value`` per line, ``#`` comments;
unknown keys are rejected.  Every run writes ``<subcommand>.csv`` (LF line
endings, ``#`` preamble with the resolved configuration, 9-significant-digit
numbers) plus ``<subcommand>_manifest.json``; identical config and seed give
byte-identical CSVs regardless of ``--threads``.

Exit codes: 0 success, 2 configuration error, 3 run-end check failed,
4 numerical divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .errors import ConfigError, DivergenceError, DomainError, StructuralError
from .experiments import (
    ExperimentResult,
    run_classify,
    run_cutoff,
    run_ks_sweep,
    run_lowerbound,
    run_quantile_table,
    run_validate,
)


@dataclass(frozen=True)
class Key:
    kind: str  # int | float | str | bool | floats | ints
    default: object = None  # None means required
    lo: float | None = None
    hi: float | None = None
    choices: tuple | None = None


_DATA_KEYS = {
    "d": Key("int", lo=1),
    "R": Key("float", lo=2.0),
    "delta": Key("float", lo=0.0, hi=1.0),
    "eps": Key("float", lo=0.0, hi=1.0),
    "b_rho": Key("float", default=0.5, lo=0.0, hi=1.0),
    "bulk_scale": Key("float", default=0.0, lo=0.0),  # 0 selects the built-in default
    "mode_kind": Key("str", default="uniform-ball",
                     choices=("uniform-ball", "truncated-gaussian")),
}

SCHEMAS: dict[str, dict[str, Key]] = {
    "cutoff": {
        **_DATA_KEYS,
        "mu": Key("float", default=1.0, lo=0.0),
        "n": Key("int", default=100_000, lo=100),
        "bins": Key("int", default=0, lo=0),
        "times": Key("floats", default=()),
    },
    "lowerbound": {
        **_DATA_KEYS,
        "process": Key("str", default="ou", choices=("ou", "tempered")),
        "mu": Key("float", default=1.0, lo=0.0),
        "k": Key("int", default=3, lo=3),
        "profile_a": Key("float", default=1.0, lo=0.0),
        "profile_p": Key("float", default=1.0, lo=0.0, hi=2.0),
        "ell": Key("float", default=0.0, lo=0.0),
        "r_k": Key("float", default=0.0, lo=0.0),  # 0 requests estimation
        "rk_n": Key("int", default=300_000, lo=1000),
        "n": Key("int", default=100_000, lo=100),
        "rho0": Key("str", default="data", choices=("data", "pi")),
        "times": Key("floats", default=()),
    },
    "quantile-table": {
        "p_list": Key("floats", default=(1.0, 1.2, 1.4, 1.6, 1.8)),
        "d_list": Key("ints", default=(3, 30, 300, 3000)),
        "eps": Key("float", default=0.1, lo=0.0, hi=1.0),
        "n": Key("int", default=300_000, lo=1000),
        "a": Key("float", default=1.0, lo=0.0),
        "k": Key("int", default=3, lo=3),
    },
    "ks-sweep": {
        "d": Key("int", lo=1),
        "R": Key("float", lo=0.0),
        "mu": Key("float", default=1.0, lo=0.0),
        "eps": Key("float", default=0.1, lo=0.0, hi=1.0),
        "delta": Key("float", default=0.0, lo=-1e-12, hi=1.0),
        "reps": Key("int", default=20, lo=1),
        "times": Key("floats", default=()),
    },
    "classify": {
        "p": Key("float", lo=0.0),
        "ell": Key("float", default=0.0, lo=0.0),
    },
    "validate": {
        **_DATA_KEYS,
        "process": Key("str", default="ou", choices=("ou", "tempered")),
        "mu": Key("float", default=1.0, lo=0.0),
        "k": Key("int", default=3, lo=3),
        "profile_a": Key("float", default=1.0, lo=0.0),
        "profile_p": Key("float", default=1.0, lo=0.0, hi=2.0),
        "ell": Key("float", default=0.0, lo=0.0),
        "n": Key("int", default=100_000, lo=100),
        "n_points": Key("int", default=10_000, lo=100),
        "r_max": Key("float", default=0.0, lo=0.0),
        "envelope_scale": Key("float", default=0.0, lo=0.0),
        "beta": Key("float", default=0.0, lo=0.0, hi=1.0),
        "r_k": Key("float", default=0.0, lo=0.0),
        "rk_n": Key("int", default=300_000, lo=1000),
    },
}

RUNNERS = {
    "cutoff": run_cutoff,
    "lowerbound": run_lowerbound,
    "quantile-table": run_quantile_table,
    "ks-sweep": run_ks_sweep,
    "classify": run_classify,
    "validate": run_validate,
}


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Read ``key = value`` lines; reject duplicates and malformed lines."""
    raw: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key in raw:
            raise ConfigError(f"{path}:{lineno}: duplicate key '{key}'")
        raw[key] = value.strip()
    return raw


def _parse_value(key: str, spec: Key, text: str):
    try:
        if spec.kind == "int":
            val = int(text)
        elif spec.kind == "float":
            val = float(text)
        elif spec.kind == "bool":
            low = text.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(text)
        elif spec.kind == "floats":
            val = tuple(float(s) for s in text.split(",") if s.strip())
        elif spec.kind == "ints":
            val = tuple(int(s) for s in text.split(",") if s.strip())
        else:
            val = text
    except ValueError as exc:
        raise ConfigError(f"key '{key}': cannot parse {text!r} as {spec.kind}") from exc
    if spec.choices is not None and val not in spec.choices:
        raise ConfigError(f"key '{key}': {val!r} not one of {spec.choices}")
    if spec.kind in ("int", "float"):
        if spec.lo is not None and val < spec.lo:
            raise ConfigError(f"key '{key}': {val} below minimum {spec.lo}")
        if spec.hi is not None and val > spec.hi:
            raise ConfigError(f"key '{key}': {val} above maximum {spec.hi}")
    return val


def resolve_config(subcommand: str, raw: dict[str, str]) -> dict:
    schema = SCHEMAS[subcommand]
    cfg = {}
    for key, text in raw.items():
        if key not in schema:
            raise ConfigError(f"unknown configuration key '{key}' for {subcommand}")
        cfg[key] = _parse_value(key, schema[key], text)
    for key, spec in schema.items():
        if key not in cfg:
            if spec.default is None:
                raise ConfigError(f"missing required configuration key '{key}'")
            cfg[key] = spec.default
    return cfg


def format_number(v) -> str:
    """Fixed 9-significant-digit formatting; empty string for missing values."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    f = float(v)
    if f == 0.0:
        f = 0.0  # normalize -0.0
    return format(f, ".9g")


def _echo_value(v) -> str:
    if isinstance(v, tuple):
        return ",".join(format_number(x) for x in v)
    if isinstance(v, str):
        return v
    return format_number(v)


def csv_preamble(subcommand: str, seed: int, cfg: dict) -> list[str]:
    lines = [f"tool = mixlab {__version__}", f"subcommand = {subcommand}", f"seed = {seed}"]
    for key in sorted(cfg):
        lines.append(f"config.{key} = {_echo_value(cfg[key])}")
    return lines


def write_csv(path: Path, result: ExperimentResult, preamble: list[str]) -> None:
    out = []
    for line in preamble:
        out.append(f"# {line}")
    out.append(",".join(result.columns))
    for row in result.rows:
        cells = []
        for col in result.columns:
            v = row.get(col)
            cells.append(v if isinstance(v, str) else format_number(v))
        out.append(",".join(cells))
    path.write_text("\n".join(out) + "\n", encoding="utf-8", newline="\n")


def svg_line_chart(chart: dict) -> str:
    """Minimal self-contained SVG line chart (no external renderer)."""
    width, height, margin = 720, 440, 60.0
    xs = [float(v) for v in chart["x"]]
    all_y = [float(v) for ys in chart["series"].values() for v in ys]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(all_y), max(all_y)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def px(x):
        return margin + (x - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def py(y):
        return height - margin - (y - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width/2:.1f}" y="24" text-anchor="middle" font-size="16">{chart["title"]}</text>',
        f'<line x1="{margin}" y1="{height-margin}" x2="{width-margin}" y2="{height-margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height-margin}" stroke="black"/>',
    ]
    for i in range(5):
        xt = x_lo + i * (x_hi - x_lo) / 4
        yt = y_lo + i * (y_hi - y_lo) / 4
        parts.append(
            f'<text x="{px(xt):.1f}" y="{height-margin+18:.1f}" text-anchor="middle" '
            f'font-size="11">{format(xt, ".4g")}</text>'
        )
        parts.append(
            f'<text x="{margin-8:.1f}" y="{py(yt)+4:.1f}" text-anchor="end" '
            f'font-size="11">{format(yt, ".4g")}</text>'
        )
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
    for ci, (label, ys) in enumerate(chart["series"].items()):
        pts = " ".join(f"{px(x):.2f},{py(float(y)):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{colors[ci % 4]}" stroke-width="1.5"/>')
        parts.append(
            f'<text x="{width-margin:.1f}" y="{margin+16*ci:.1f}" text-anchor="end" '
            f'font-size="12" fill="{colors[ci % 4]}">{label}</text>'
        )
    parts.append(
        f'<text x="{width/2:.1f}" y="{height-12}" text-anchor="middle" font-size="12">{chart["xlabel"]}</text>'
    )
    parts.append(f'<text x="16" y="{height/2:.1f}" font-size="12">{chart["ylabel"]}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixlab",
        description="Forward-diffusion mixing laboratory: cut-off curves, TV bounds, "
                    "quantile tables, KS sweeps, admissibility validation.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in RUNNERS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="key = value configuration file")
        sp.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
        sp.add_argument("--out", default=".", help="output directory (default .)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
        sp.add_argument("--svg", action="store_true", help="also emit a line chart")
    return parser


def _run(args) -> int:
    t0 = time.perf_counter()
    cfg = resolve_config(args.subcommand, parse_config_file(args.config))
    result = RUNNERS[args.subcommand](cfg, args.seed, args.threads)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    if args.subcommand == "classify":
        print(result.info["line"])
    else:
        csv_path = out_dir / f"{args.subcommand}.csv"
        write_csv(csv_path, result, csv_preamble(args.subcommand, args.seed, cfg))
        outputs.append(csv_path.name)
        print(f"wrote {csv_path}")
        if args.svg and result.chart is not None:
            svg_path = out_dir / f"{args.subcommand}.svg"
            svg_path.write_text(svg_line_chart(result.chart), encoding="utf-8", newline="\n")
            outputs.append(svg_path.name)
            print(f"wrote {svg_path}")
    for check in result.checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"{status} {check.name}: value = {format_number(check.value)} "
              f"{check.relation} {format_number(check.bound)}")
    manifest = {
        "tool": "mixlab",
        "version": __version__,
        "subcommand": args.subcommand,
        "seed": args.seed,
        "threads": args.threads,
        "config": {k: (_echo_value(v) if isinstance(v, tuple) else v) for k, v in cfg.items()},
        "duration_seconds": time.perf_counter() - t0,
        "outputs": outputs,
    }
    manifest_path = out_dir / f"{args.subcommand}_manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                             encoding="utf-8")
    return 0 if result.passed else 3


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (StructuralError, DomainError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return 4
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
