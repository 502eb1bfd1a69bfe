"""Command-line front end.

Every command writes a CSV (or JSON) artifact whose header manifest is
sufficient to reproduce it: command, argument echo, seed, library version,
truncation dimension, and leakage diagnostics.  Outputs are byte-identical
across re-runs with the same flags; wall-clock stamps are opt-in via
--stamp precisely because they would break that.

Exit codes: 0 success; 2 bad arguments, specs, or domains; 3 numeric,
truncation, or quadrature failures; 4 an ambiguous estimate under --strict.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .channel import PhaseDistribution
from .errors import ParseError, SpreadchanError
from .estimation import (
    ALPHA_MAX_DEFAULT,
    ExperimentConfig,
    averaged_survival,
    overlap_fluctuations,
    rmse_sweep,
    simulate,
)
from .fisher import cfi_quadrature, cfi_self_projection
from .fock import StateVector
from .measurement import (default_x_grid, p0_fixed_phase_numeric,
                          quadrature_density, quadrature_moments_closed)
from .states import StateSpec, auto_dim, build_state
from .states import parse as parse_state
from .wigner import wigner_grid

_EXIT_USAGE = 2
_EXIT_NUMERIC = 3
_EXIT_AMBIGUOUS = 4


def _fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return ""
        return f"{v:.12g}"
    return str(value)


def _json_cell(value):
    if value is None:
        return None
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return None
        return float(f"{v:.12g}")
    return str(value)


def _emit(out: Optional[str], fmt: str, manifest: List[Tuple[str, str]],
          columns: Sequence[str], rows: Sequence[Sequence]) -> None:
    if fmt == "csv":
        buf = io.StringIO()
        for key, value in manifest:
            buf.write(f"# {key}: {value}\n")
        writer = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt_cell(v) for v in row])
        text = buf.getvalue()
    else:
        payload = {
            "manifest": {key: value for key, value in manifest},
            "columns": list(columns),
            "rows": [[_json_cell(v) for v in row] for row in rows],
        }
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _parse_alpha_range(text: str) -> np.ndarray:
    """start:step:stop inclusive, or a single value."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) != 3:
            raise ValueError
        start, step, stop = (float(p) for p in parts)
    except ValueError:
        raise ParseError(f"bad range {text!r}: expected start:step:stop or a single value")
    if step <= 0:
        raise ParseError(f"range step must be > 0, got {step}")
    if stop < start:
        raise ParseError(f"range stop {stop} is below start {start}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    values = start + step * np.arange(count)
    return values


def _parse_dim(text: str) -> Optional[int]:
    if text == "auto":
        return None
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"bad dimension {text!r}: expected 'auto' or an integer")


def _resolve_dim(specs: Sequence[StateSpec], alpha_max: float,
                 requested: Optional[int]) -> int:
    if requested is not None:
        return requested
    return max(auto_dim(spec, alpha_max=alpha_max) for spec in specs)


def _build_all(specs: Sequence[StateSpec], dim: int):
    states = [build_state(spec, dim) for spec in specs]
    leakage = max(s.leakage for s in states)
    return states, leakage


def _echo_args(argv: Sequence[str]) -> str:
    """Argument echo for the manifest, minus the output destination and
    stamp flag so replayed artifacts stay byte-identical."""
    kept = []
    skip = False
    for arg in argv:
        if skip:
            skip = False
            continue
        if arg == "--out":
            skip = True
            continue
        if arg.startswith("--out="):
            continue
        if arg == "--stamp":
            continue
        kept.append(arg)
    return json.dumps(kept)


def _common_manifest(command: str, argv: Sequence[str], args) -> List[Tuple[str, str]]:
    manifest = [("command", command), ("args", _echo_args(argv)),
                ("version", __version__)]
    if getattr(args, "stamp", False):
        manifest.append(("timestamp", time.strftime("%Y-%m-%dT%H:%M:%S%z")))
    return manifest


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------

def _cmd_fidelity_curve(args, argv) -> int:
    specs = [parse_state(s) for s in args.state]
    phases = PhaseDistribution.parse(args.phases)
    alphas = _parse_alpha_range(args.alpha)
    dim = _resolve_dim(specs, float(alphas.max()), _parse_dim(args.dim))
    states, leakage = _build_all(specs, dim)
    manifest = _common_manifest("fidelity-curve", argv, args)
    manifest += [("states", ";".join(s.label() for s in specs)),
                 ("phases", phases.label()),
                 ("dim", str(dim)), ("leakage", f"{leakage:.3e}")]
    if args.fixed_phi is not None:
        manifest.append(("fixed_phi", f"{args.fixed_phi:.12g}"))
    rows = []
    for spec, state in zip(specs, states):
        if args.fixed_phi is not None:
            if not isinstance(state, StateVector):
                raise ParseError(f"{spec.label()} is mixed; fixed-direction "
                                 f"curves need a pure probe")
            values = p0_fixed_phase_numeric(state, alphas, args.fixed_phi)
        else:
            values = averaged_survival(spec, phases, alphas, dim=dim)
        label = spec.label()
        for alpha, value in zip(alphas, values):
            rows.append([float(alpha), label, float(value)])
    _emit(args.out, args.format, manifest, ["alpha", "state_label", "fidelity"], rows)
    return 0


def _cmd_cfi_curve(args, argv) -> int:
    specs = [parse_state(s) for s in args.state]
    phases = PhaseDistribution.parse(args.phases)
    alphas = _parse_alpha_range(args.alpha)
    dim = _resolve_dim(specs, max(float(alphas.max()), ALPHA_MAX_DEFAULT),
                       _parse_dim(args.dim))
    _, leakage = _build_all(specs, dim)
    manifest = _common_manifest("cfi-curve", argv, args)
    manifest += [("states", ";".join(s.label() for s in specs)),
                 ("phases", phases.label()),
                 ("dim", str(dim)), ("leakage", f"{leakage:.3e}"),
                 ("eps", f"{args.eps:.12g}")]
    if any(alphas == 0.0):
        manifest.append(("note", "information vanishes at alpha=0; cells left empty"))
    rows = []
    for spec in specs:
        label = spec.label()
        for alpha in alphas:
            if alpha == 0.0:
                rows.append([float(alpha), label, None])
                continue
            rep = cfi_self_projection(spec, phases, float(alpha), eps=args.eps,
                                      dim=dim, fixed_phi=args.fixed_phi)
            rows.append([float(alpha), label, rep.value])
    _emit(args.out, args.format, manifest, ["alpha", "state_label", "cfi"], rows)
    return 0


def _cmd_mc(args, argv) -> int:
    if args.seed is None:
        raise ParseError("--seed is required for Monte-Carlo commands")
    spec = parse_state(args.state[0]) if len(args.state) == 1 else None
    specs = [parse_state(s) for s in args.state]
    phases = PhaseDistribution.parse(args.phases)
    alphas = _parse_alpha_range(args.alpha)
    dim = _parse_dim(args.dim)
    manifest = _common_manifest("mc", argv, args)
    manifest += [("mode", args.mode),
                 ("states", ";".join(s.label() for s in specs)),
                 ("phases", phases.label()),
                 ("seed", str(args.seed)), ("eps", f"{args.eps:.12g}")]
    ambiguous_seen = False

    if args.mode == "experiment":
        if len(specs) != 1:
            raise ParseError("experiment mode takes exactly one --state")
        if alphas.size != 1:
            raise ParseError("experiment mode takes a single --alpha value")
        cfg = ExperimentConfig(probe=spec, alpha_true=float(alphas[0]),
                               shots=args.shots, seed=args.seed, phases=phases,
                               eps=args.eps,
                               randomize_rotation=args.randomize_rotation,
                               dim=dim)
        res = simulate(cfg)
        manifest += [("shots", str(args.shots)),
                     ("alpha_true", f"{cfg.alpha_true:.12g}"),
                     ("randomize_rotation", "true" if args.randomize_rotation else "false")]
        columns = ["m0", "m1", "alpha_hat", "crb_sigma", "at_boundary", "ambiguous"]
        rows = [[res.m0, res.m1, res.alpha_hat,
                 None if math.isinf(res.crb_sigma) else res.crb_sigma,
                 res.at_boundary, res.ambiguous]]
        ambiguous_seen = res.ambiguous
    elif args.mode == "overlap":
        if len(specs) != 1:
            raise ParseError("overlap mode takes exactly one --state")
        table = overlap_fluctuations(spec, alphas, args.draws, args.seed,
                                     phases=phases, dim=dim)
        manifest.append(("draws", str(args.draws)))
        columns = ["alpha", "mean_overlap", "rms"]
        rows = [[r.alpha, r.mean_overlap, r.rms] for r in table]
    elif args.mode == "rmse":
        manifest += [("shots", str(args.shots)), ("trials", str(args.trials))]
        columns = ["state_label", "alpha", "shots", "trials", "rmse", "crb", "ratio"]
        rows = []
        for s in specs:
            table = rmse_sweep(s, alphas, args.shots, args.trials, args.seed,
                               phases=phases, eps=args.eps, dim=dim)
            for r in table:
                ambiguous_seen = ambiguous_seen or r.n_ambiguous > 0
                ratio = r.ratio
                rows.append([s.label(), r.alpha, r.shots, r.trials, r.rmse,
                             None if math.isinf(r.crb) else r.crb,
                             None if math.isnan(ratio) else ratio])
    else:
        raise ParseError(f"unknown mc mode {args.mode!r}")

    _emit(args.out, args.format, manifest, columns, rows)
    if ambiguous_seen and args.strict:
        sys.stderr.write("ambiguous estimate encountered in strict mode\n")
        return _EXIT_AMBIGUOUS
    return 0


def _cmd_homodyne(args, argv) -> int:
    spec = StateSpec.squeezed(args.r)
    phases = PhaseDistribution.parse(args.phases)
    alphas = _parse_alpha_range(args.alpha)
    dim = _resolve_dim([spec], float(alphas.max()), _parse_dim(args.dim))
    psi = build_state(spec, dim)
    xs = default_x_grid(spec, alpha_max=float(alphas.max()))
    manifest = _common_manifest("homodyne", argv, args)
    manifest += [("r", f"{args.r:.12g}"), ("phases", phases.label()),
                 ("dim", str(dim)), ("leakage", f"{psi.leakage:.3e}")]
    if args.density_at is not None:
        # two-column density table instead of the information sweep
        alpha = float(args.density_at)
        dens = quadrature_density(psi, alpha, phases, xs, nodes=args.nodes)
        manifest.append(("density_alpha", f"{alpha:.12g}"))
        rows = [[float(x), float(p)] for x, p in zip(xs, dens)]
        _emit(args.out, args.format, manifest, ["x", "p"], rows)
        return 0
    if any(alphas == 0.0):
        manifest.append(("note",
                         "information and variance mapping are undefined at "
                         "alpha=0; cells left empty"))
    rows = []
    for alpha in alphas:
        alpha = float(alpha)
        if alpha == 0.0:
            rows.append([alpha, None, None, None])
            continue
        quad = cfi_quadrature(psi, alpha, phases, x_grid=xs, nodes=args.nodes)
        proj = cfi_self_projection(spec, phases, alpha)
        moments = quadrature_moments_closed(args.r, alpha)
        rows.append([alpha, quad.value, proj.value, moments.var_estimate])
    _emit(args.out, args.format, manifest,
          ["alpha", "cfi_quadrature", "cfi_self_projection", "var_estimate_closed"],
          rows)
    return 0


def _cmd_wigner(args, argv) -> int:
    if len(args.state) != 1:
        raise ParseError("wigner takes exactly one --state")
    spec = parse_state(args.state[0])
    dim = _resolve_dim([spec], 0.0, _parse_dim(args.dim))
    state = build_state(spec, dim)
    if args.half_width is not None:
        grid = np.linspace(-args.half_width, args.half_width, args.points)
        result = wigner_grid(state, xs=grid, ps=grid)
    else:
        result = wigner_grid(state, points=args.points)
    manifest = _common_manifest("wigner", argv, args)
    manifest += [("state", spec.label()), ("dim", str(dim)),
                 ("leakage", f"{state.leakage:.3e}"),
                 ("points", str(args.points)),
                 ("integral", f"{result.integral():.6f}")]
    rows = []
    for i, x in enumerate(result.xs):
        for j, p in enumerate(result.ps):
            rows.append([float(x), float(p), float(result.values[i, j])])
    _emit(args.out, args.format, manifest, ["x", "p", "w"], rows)
    return 0


def _cmd_replay(args, argv) -> int:
    with open(args.file, "r", encoding="utf-8") as fh:
        text = fh.read()
    stored: Optional[str] = None
    if text.lstrip().startswith("{"):
        stored = json.loads(text).get("manifest", {}).get("args")
    else:
        for line in text.splitlines():
            if line.startswith("# args: "):
                stored = line[len("# args: "):]
                break
    if stored is None:
        raise ParseError(f"{args.file} carries no argument manifest to replay")
    try:
        replay_argv = json.loads(stored)
    except json.JSONDecodeError as exc:
        raise ParseError(f"unreadable argument manifest in {args.file}") from exc
    if not isinstance(replay_argv, list) or not replay_argv:
        raise ParseError(f"unreadable argument manifest in {args.file}")
    if replay_argv[0] == "replay":
        raise ParseError("refusing to replay a replay")
    if args.out is not None:
        replay_argv = list(replay_argv) + ["--out", args.out]
    return run(replay_argv)


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, states: bool = True) -> None:
    if states:
        p.add_argument("--state", action="append", required=True,
                       help="probe spec, repeatable (vacuum, fock:n=5, "
                            "coh:beta=1+0i, sq:r=1.5,theta=0, "
                            "cat:k=10,nbar=10, thermal:nbar=5)")
    p.add_argument("--phases", default="uniform",
                   help="direction law: uniform, vonmises:mu=0,kappa=5, "
                        "discrete:0@0.5,3.14159@0.5")
    p.add_argument("--dim", default="auto", help="truncation dimension or 'auto'")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--stamp", action="store_true",
                   help="add a wall-clock timestamp line (breaks byte-identical re-runs)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spreadchan",
        description="survival curves, Fisher information, Monte-Carlo "
                    "estimation, and Wigner grids for randomized "
                    "displacement channels")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fidelity-curve", help="survival probability vs magnitude")
    _add_common(p)
    p.add_argument("--alpha", required=True, help="start:step:stop or single value")
    p.add_argument("--fixed-phi", type=float, default=None, dest="fixed_phi",
                   help="probe a single known direction instead of averaging")
    p.set_defaults(func=_cmd_fidelity_curve)

    p = sub.add_parser("cfi-curve", help="survival-readout information vs magnitude")
    _add_common(p)
    p.add_argument("--alpha", required=True, help="start:step:stop or single value")
    p.add_argument("--fixed-phi", type=float, default=None, dest="fixed_phi")
    p.add_argument("--eps", type=float, default=0.0, help="dark-noise rate")
    p.set_defaults(func=_cmd_cfi_curve)

    p = sub.add_parser("mc", help="Monte-Carlo experiments")
    _add_common(p)
    p.add_argument("--mode", choices=("experiment", "overlap", "rmse"),
                   default="experiment")
    p.add_argument("--alpha", required=True, help="true magnitude (range for sweeps)")
    p.add_argument("--seed", type=int, default=None, help="stream key (required)")
    p.add_argument("--shots", type=int, default=10000)
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--draws", type=int, default=50,
                   help="directions per magnitude in overlap mode")
    p.add_argument("--eps", type=float, default=0.0, help="dark-noise rate")
    p.add_argument("--randomize-rotation", action="store_true",
                   dest="randomize_rotation",
                   help="spin the probe uniformly before every shot")
    p.add_argument("--strict", action="store_true",
                   help="exit 4 when an estimate is ambiguous")
    p.set_defaults(func=_cmd_mc)

    p = sub.add_parser("homodyne", help="quadrature readout vs survival readout")
    _add_common(p, states=False)
    p.add_argument("--r", type=float, required=True, help="probe squeezing")
    p.add_argument("--alpha", required=True, help="start:step:stop or single value")
    p.add_argument("--nodes", type=int, default=256,
                   help="direction-average quadrature nodes")
    p.add_argument("--density-at", type=float, default=None, dest="density_at",
                   help="emit the (x, p) density table at this magnitude "
                        "instead of the information sweep")
    p.set_defaults(func=_cmd_homodyne)

    p = sub.add_parser("wigner", help="phase-space grid of a probe state")
    _add_common(p)
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--half-width", type=float, default=None, dest="half_width")
    p.set_defaults(func=_cmd_wigner)

    p = sub.add_parser("replay", help="re-run the command recorded in an artifact")
    p.add_argument("file", help="artifact produced by another command")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_replay)

    return parser


def run(argv: Sequence[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except SpreadchanError as exc:
        sys.stderr.write(f"error: {exc}\n")
        if isinstance(exc, ValueError):
            return _EXIT_USAGE
        return _EXIT_NUMERIC


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
