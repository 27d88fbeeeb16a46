"""Command-line batch runner: one config, one command, one output directory."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
import warnings
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import _rational as rat
from .affine_ifs import build_quadrature, doubling_scan, encode_digits, fixed_anchor, digit_matrix, sample_stream
from .config import ExperimentConfig, config_from_dict, parse_config
from .divergence_lab import (
    classify,
    default_tail_n_max,
    delta_birkhoff,
    delta_quadrature,
    growth_rate,
    tail_distribution,
)
from .errors import MockLabError, NumericError, ParseError, ValidationError
from .hadamard_spectrum import LEVEL_CONVENTION, orthonormality_defect, spectrum_csv, spectrum_level
from .mock_fourier import kernel_defect, kernel_trace, kernel_trace_csv

COMMANDS = ("validate", "spectrum", "kernel-check", "ortho", "delta", "growth", "tail", "classify", "doubling")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERIC = 2
EXIT_IO = 3


class CommandFailed(Exception):
    """A command finished but its own check failed; payload files are still written."""

    def __init__(self, message: str, files: dict):
        self.files = files
        super().__init__(message)


def dump_json(obj) -> str:
    # json writes floats with repr, which is the shortest round-trip form
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _with_convention(payload: dict) -> dict:
    return {"convention": LEVEL_CONVENTION, **payload}


def _seed_points(seed: int, count: int, dim: int) -> np.ndarray:
    return np.random.default_rng(seed).random((count, dim))


def _delta_row(triple, b, cfg: ExperimentConfig) -> dict:
    eps = cfg.tolerances["clip_eps"]
    quad = delta_quadrature(triple, b, cfg.depths["quadrature"], eps=eps, anchor=cfg.anchor)
    stream = sample_stream(cfg.seed, 1, triple.N)[0]
    birk = delta_birkhoff(triple, b, cfg.depths["orbit"], stream=stream, eps=eps)
    tol = max(2 * birk.stderr, cfg.tolerances["agreement"])
    return {
        "b": list(b),
        "log_delta_quadrature": quad.log_delta,
        "log_delta_birkhoff": birk.log_delta,
        "stderr": birk.stderr,
        "clipped_count": quad.clipped_count + birk.clipped_count,
        "tolerance": tol,
        "agree": abs(quad.log_delta - birk.log_delta) <= tol,
        "unreliable": quad.unreliable,
        "verdict": "positive" if quad.log_delta > tol and birk.log_delta > tol else "non-positive",
        "quadrature": asdict(quad),
        "birkhoff": asdict(birk),
    }


def _pick_digit(cfg: ExperimentConfig):
    """Configured tail digit, else the digit with the largest quadrature log Delta."""
    triple = cfg.triple
    if cfg.tail["digit"] is not None:
        b = tuple(cfg.tail["digit"]) if isinstance(cfg.tail["digit"], list) else (cfg.tail["digit"],)
        return b, delta_quadrature(triple, b, cfg.depths["quadrature"], anchor=cfg.anchor).log_delta
    best = None
    for b in triple.B.digits:
        est = delta_quadrature(triple, b, cfg.depths["quadrature"], anchor=cfg.anchor)
        if best is None or est.log_delta > best[1]:
            best = (b, est.log_delta)
    return best


# ---------------------------------------------------------------------------
# commands: each returns {filename: text}


def cmd_validate(cfg: ExperimentConfig, threads: int) -> dict:
    t = cfg.triple
    payload = {
        "triple": t.describe(),
        "unitarity_defect": t.defect,
        "tolerance": cfg.tolerances["unitarity"],
        "symmetric_R": t.R.is_symmetric,
        "eigenvalue_moduli": list(t.R.moduli),
        "valid": True,
    }
    return {"validation.json": dump_json(_with_convention(payload))}


def cmd_spectrum(cfg, threads):
    level = spectrum_level(cfg.triple, cfg.depths["spectrum"])
    return {"spectrum.csv": spectrum_csv(level)}


def cmd_kernel_check(cfg, threads):
    t = cfg.triple
    n_max = cfg.depths["kernel"]
    xs = _seed_points(cfg.seed, cfg.kernel_points, t.dim)
    worst, where = 0.0, None
    for n in range(n_max + 1):
        for i, x in enumerate(xs):
            d = kernel_defect(t, n, x)
            if d > worst or where is None:
                worst, where = d, {"n": n, "point_index": i, "x": [float(c) for c in x]}
    tol = cfg.tolerances["kernel"]
    payload = {
        "triple": t.describe(),
        "n_max": n_max,
        "points": cfg.kernel_points,
        "max_relative_defect": worst,
        "defect_definition": "|direct - product| / (1 + |direct|)",
        "worst": where,
        "tolerance": tol,
        "passed": worst < tol,
    }
    files = {
        "kernel_check.json": dump_json(_with_convention(payload)),
        "kernel_trace.csv": kernel_trace_csv(kernel_trace(t, n_max, xs[0])),
    }
    if not worst < tol:
        raise CommandFailed(f"kernel defect {worst:.3e} exceeds {tol:.1e}", files)
    return files


def cmd_ortho(cfg, threads):
    t = cfg.triple
    n, K = cfg.depths["ortho"], cfg.depths["truncation"]
    res = orthonormality_defect(t, n, K)
    payload = {
        "triple": t.describe(),
        "level": n,
        "truncation": K,
        "max_offdiagonal": res.max_offdiagonal,
        "diagonal_defect": res.diagonal,
        "worst_pair": [list(p) for p in res.worst_pair],
    }
    return {"ortho.json": dump_json(_with_convention(payload))}


def cmd_delta(cfg, threads):
    t = cfg.triple
    rows = [_delta_row(t, b, cfg) for b in t.B.digits]
    payload = {"triple": t.describe(), "tau": t.tau, "entries": rows}
    files = {"delta_report.json": dump_json(_with_convention(payload))}
    bad = [r["b"] for r in rows if r["unreliable"]]
    if bad:
        raise CommandFailed(f"quadrature clip-dominated for b in {bad}", files)
    return files


def cmd_growth(cfg, threads):
    t = cfg.triple
    n_max = cfg.depths["growth"]
    stream = sample_stream(cfg.seed, 1, t.N)[0]
    rows = []
    for b in t.B.digits:
        g = growth_rate(t, b, stream, n_max)
        ref = delta_quadrature(t, b, cfg.depths["quadrature"], anchor=cfg.anchor).log_delta
        rows.append(
            {
                "b": list(b),
                "slope": g.slope,
                "intercept": g.intercept,
                "max_deviation": g.max_deviation,
                "window": list(g.window),
                "log_delta_quadrature": ref,
            }
        )
    payload = {"triple": t.describe(), "n_max": n_max, "seed": cfg.seed, "entries": rows}
    return {"growth.json": dump_json(_with_convention(payload))}


def cmd_tail(cfg, threads):
    t = cfg.triple
    tail = cfg.tail
    if tail["atoms"] is not None:
        atoms = [rat.as_vector(a, t.dim) for a in tail["atoms"]]
        b, log_delta = None, None
    else:
        b, log_delta = _pick_digit(cfg)
        atoms = [fixed_anchor(t, b)]
    n_max = tail["n_max"]
    if n_max is None:
        if log_delta is None or not log_delta > 0:
            raise ValidationError("tail.n_max is required unless the chosen digit has log Delta > 0")
        n_max = default_tail_n_max(tail["alpha_ref"], log_delta)
    curve = tail_distribution(
        t,
        atoms,
        n_max,
        tail["alphas"],
        tail["samples"],
        seed=cfg.seed,
        eps=cfg.tolerances["clip_eps"],
        workers=threads,
    )
    meta = {
        "triple": t.describe(),
        "digit": None if b is None else list(b),
        "log_delta_quadrature": log_delta,
        "atoms": [rat.format_vector(a) for a in atoms],
        "n_max": n_max,
        "alphas": list(curve.alphas),
        "masses": list(curve.masses),
        "samples": curve.sample_count,
        "seed": cfg.seed,
    }
    return {"tail_curve.csv": curve.to_csv(), "tail.json": dump_json(_with_convention(meta))}


def cmd_classify(cfg, threads):
    t = cfg.triple
    report = classify(
        t,
        depth=cfg.depths["quadrature"],
        n=cfg.depths["orbit"],
        seed=cfg.seed,
        anchor=cfg.anchor,
        eps=cfg.tolerances["clip_eps"],
        floor=cfg.tolerances["agreement"],
        assume_doubling=cfg.assumptions["doubling"],
        assume_complete=cfg.assumptions["complete_spectrum"],
    )
    return {"classify_report.json": report.dumps() + "\n"}


def default_radii(rule) -> list[float]:
    """Dyadic radii from 1/2 down to 16 times the node spacing |det R|^(-m/d)."""
    floor = 16 * rule.det_R ** (-rule.depth / rule.dim)
    out, r = [], 0.5
    while r >= floor:
        out.append(r)
        r /= 2
    return out


def cmd_doubling(cfg, threads):
    t = cfg.triple
    dcfg = cfg.doubling
    depth = dcfg["depth"]
    rule = build_quadrature(t, depth, anchor=cfg.anchor)
    centers = dcfg["centers"]
    if isinstance(centers, int):
        # centers sampled from mu itself so inner balls are never empty
        digits = digit_matrix(sample_stream(cfg.seed, centers, t.N), 60)
        centers = encode_digits(t, digits)
    centers = np.asarray(centers, dtype=float).reshape(-1, t.dim)
    radii = dcfg["radii"] if dcfg["radii"] is not None else default_radii(rule)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rep = doubling_scan(rule, centers, radii)
    buf = io.StringIO()
    buf.write(f"# {LEVEL_CONVENTION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["center_index", "radius", "inner_mass", "outer_mass", "ratio"])
    for e in rep.entries:
        w.writerow([e.center_index, repr(e.radius), repr(e.inner_mass), repr(e.outer_mass), repr(e.ratio)])
    payload = {
        "triple": t.describe(),
        "depth": depth,
        "radii": list(radii),
        "centers": len(centers),
        "max_ratio": rep.max_ratio,
        "empty_count": rep.empty_count,
        "finite": math.isfinite(rep.max_ratio),
    }
    return {"doubling.json": dump_json(_with_convention(payload)), "doubling_table.csv": buf.getvalue()}


HANDLERS = {
    "validate": cmd_validate,
    "spectrum": cmd_spectrum,
    "kernel-check": cmd_kernel_check,
    "ortho": cmd_ortho,
    "delta": cmd_delta,
    "growth": cmd_growth,
    "tail": cmd_tail,
    "classify": cmd_classify,
    "doubling": cmd_doubling,
}


# ---------------------------------------------------------------------------
# emission


def emit_report(out_dir, files: dict, manifest: dict) -> list[str]:
    """Write payload files with LF endings, then manifest.json naming them."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = sorted(files)
    for name in names:
        with open(out / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(files[name])
    manifest = {**manifest, "files": names}
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_json(manifest))
    return names


def _error_payload(kind: str, exc: BaseException, code: int) -> dict:
    payload = {"error": kind, "message": str(exc), "exit_code": code}
    if isinstance(exc, ParseError):
        payload.update(line=exc.line, column=exc.column)
    return payload


def run_experiment(config, command: str, out_dir=None, threads: int | None = None, seed: int | None = None) -> int:
    """Run ``command`` on ``config`` (a path, dict or ExperimentConfig) and return the exit status."""
    start = time.perf_counter()
    threads = threads or os.cpu_count() or 1
    files: dict = {}
    cfg = None
    code, error = EXIT_OK, None
    try:
        if command not in HANDLERS:
            raise ValidationError(f"unknown command {command!r}; expected one of {list(COMMANDS)}")
        if isinstance(config, ExperimentConfig):
            cfg = config
        elif isinstance(config, dict):
            cfg = config_from_dict(config)
        else:
            cfg = parse_config(config)
        if seed is not None:
            cfg.seed = int(seed)
        files = HANDLERS[command](cfg, threads)
    except OSError as exc:
        code, error = EXIT_IO, _error_payload("IOError", exc, EXIT_IO)
    except (ValidationError, ParseError) as exc:
        code, error = EXIT_VALIDATION, _error_payload(type(exc).__name__, exc, EXIT_VALIDATION)
    except CommandFailed as exc:
        files = exc.files
        code, error = EXIT_NUMERIC, _error_payload("CheckFailed", exc, EXIT_NUMERIC)
    except NumericError as exc:
        code, error = EXIT_NUMERIC, _error_payload(type(exc).__name__, exc, EXIT_NUMERIC)
        report = getattr(exc, "report", None)
        if report is not None:
            files = {"classify_report.json": report.dumps() + "\n"}
    except MockLabError as exc:
        # budget overruns and similar are reported as numeric failures
        code, error = EXIT_NUMERIC, _error_payload(type(exc).__name__, exc, EXIT_NUMERIC)
    except ValueError as exc:
        # out-of-range settings rejected by the numerical routines
        code, error = EXIT_VALIDATION, _error_payload("ValidationError", exc, EXIT_VALIDATION)

    if error is not None:
        files = {**files, "error.json": dump_json(error)}
    target = out_dir if out_dir is not None else (cfg.output if cfg is not None else "out")
    manifest = {
        "command": command,
        "config": cfg.echo() if cfg is not None else None,
        "tool_version": __version__,
        "seed": cfg.seed if cfg is not None else None,
        "threads": threads,
        "exit_code": code,
        "wall_time_seconds": time.perf_counter() - start,
    }
    try:
        emit_report(target, files, manifest)
    except OSError as exc:
        sys.stderr.write(f"cannot write outputs to {target}: {exc}\n")
        return EXIT_IO
    if error is not None:
        sys.stderr.write(json.dumps(error) + "\n")
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mocklab", description="Mock Fourier series experiments on self-affine measures.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out", default=None, help="output directory (overrides config 'output')")
    p.add_argument("--threads", type=int, default=None, help="worker cap (default: available CPUs)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run_experiment(args.config, args.command, out_dir=args.out, threads=args.threads, seed=args.seed)


if __name__ == "__main__":
    sys.exit(main())
