"""Command line entry point: run-surgery, run-lsf, sweep, verify-events, distance."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import NumericalError, ValidationError
from .harness import (ExperimentConfig, convergence_sweep, emit_outputs, load_config, override,
                      read_track, run_level_set, run_surgery_flow, verify_events, write_report)

log = logging.getLogger("mcfsurgery")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mcfsurgery",
                                description="Mean curvature flow with surgery vs level set flow")
    sub = p.add_subparsers(dest="verb", required=True)
    for verb, help_ in [("run-surgery", "surgery flow for one or all H of the sweep"),
                        ("run-lsf", "level set flow to extinction"),
                        ("sweep", "convergence sweep over H with barrier checks"),
                        ("verify-events", "check the surgery contract on every event"),
                        ("distance", "Hausdorff distance between saved tracks")]:
        q = sub.add_parser(verb, help=help_)
        q.add_argument("--config", type=Path, help="INI experiment file (defaults: reference dumbbell)")
        q.add_argument("--out", type=Path, help="output directory")
        q.add_argument("--h", type=float, action="append", help="trigger curvature (repeatable)")
        q.add_argument("--dx", type=float, help="grid spacing")
        q.add_argument("--epsilon", type=float, help="barrier distance")
        q.add_argument("--quiet", action="store_true", help="only warnings and the final summary")
    return p


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    return override(cfg, dx=args.dx, epsilon=args.epsilon,
                    out=str(args.out) if args.out else None)


def _hs(args, cfg):
    return tuple(args.h) if args.h else cfg.h_sweep


def cmd_run_surgery(args, cfg):
    tracks, events = {}, {}
    for H in _hs(args, cfg):
        tr, ev = run_surgery_flow(cfg, H)
        tracks[H], events[H] = tr, ev
        print(f"H={H:g}: {len(ev)} events, {sum(e.standard_surgeries for e in ev)} surgeries, "
              f"{sum(len(e.discarded) for e in ev)} discards, {len(tr)} slices")
    emit_outputs(None, tracks, events, cfg.out, cfg.track_stride)
    return EXIT_OK


def cmd_run_lsf(args, cfg):
    tr, _ = run_level_set(cfg)
    counts = [len(s.components) for s in tr.slices]
    series = [c for i, c in enumerate(counts) if i == 0 or c != counts[i - 1]]
    print(f"level set: {len(tr)} slices, extinction at t={tr.meta['extinction']}, "
          f"components {' -> '.join(map(str, series))}")
    emit_outputs(None, {"lsf": tr}, {}, cfg.out, cfg.track_stride)
    return EXIT_OK


def cmd_sweep(args, cfg):
    if args.h:
        cfg = override(cfg, h_sweep=tuple(sorted(args.h)))
    out = Path(cfg.out)
    rep, khat, runs = convergence_sweep(cfg, on_row=lambda r: write_report(r, out))
    tracks = {"lsf": khat, **{H: tr for H, (tr, _) in runs.items()}}
    emit_outputs(rep, tracks, {H: ev for H, (_, ev) in runs.items()}, out, cfg.track_stride)
    print("H,surgeries,discards,hausdorff,containment")
    for r in rep.rows:
        print(f"{r.H:g},{r.surgeries},{r.discards},{r.hausdorff:.6g},"
              f"{'n/a' if r.containment is None else r.containment}")
    return EXIT_OK


def cmd_verify_events(args, cfg):
    ok = True
    for H in _hs(args, cfg):
        tr, ev = run_surgery_flow(cfg, H)
        c = verify_events(cfg, H, tr, ev)
        ok &= c.ok
        print(f"H={H:g}: events={c.events} post_max={c.worst_post:.6g} (<= {cfg.omega2 * H:g}: "
              f"{c.post_max_ok}) between_max={c.worst_between:.6g} crossing={c.crossing_ok} "
              f"discards={c.discard_ok} ball_violations={c.ball_violations} -> "
              f"{'PASS' if c.ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_NUMERICAL


def _cloud(path):
    rows = [np.column_stack([d[:, 1:], np.full(len(d), t)]) for t, d in read_track(path) if len(d)]
    if not rows:
        raise ValidationError(f"{path}: no boundary points")
    return np.vstack(rows)


def cmd_distance(args, cfg):
    out = Path(cfg.out)
    a = _cloud(out / "track_lsf.txt")
    for H in _hs(args, cfg):
        b = _cloud(out / f"track_H{H:g}.txt")
        d = max(cKDTree(b).query(a)[0].max(), cKDTree(a).query(b)[0].max())
        print(f"H={H:g}: hausdorff(track_H{H:g}, track_lsf) = {d:.6g}")
    return EXIT_OK


_VERBS = {"run-surgery": cmd_run_surgery, "run-lsf": cmd_run_lsf, "sweep": cmd_sweep,
          "verify-events": cmd_verify_events, "distance": cmd_distance}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        return _VERBS[args.verb](args, cfg)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
