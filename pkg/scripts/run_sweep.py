"""Convergence sweep of surgery flows against the level set flow.

    python3 scripts/run_sweep.py configs/coarse.ini
"""
import argparse
import sys
from pathlib import Path

from mcfsurgery.harness import ExperimentConfig, convergence_sweep, emit_outputs, load_config, override


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config", nargs="?", type=Path, help="INI file (default: reference dumbbell)")
    p.add_argument("--dx", type=float)
    p.add_argument("--out", type=Path)
    a = p.parse_args()
    cfg = load_config(a.config) if a.config else ExperimentConfig()
    cfg = override(cfg, dx=a.dx, out=str(a.out) if a.out else None, timing=True)
    rep, khat, runs = convergence_sweep(cfg)
    tracks = {"lsf": khat, **{H: tr for H, (tr, _) in runs.items()}}
    emit_outputs(rep, tracks, {H: ev for H, (_, ev) in runs.items()}, Path(cfg.out), cfg.track_stride)
    print(f"t_eps={rep.t_epsilon:.6f} h0={rep.h0:g}")
    print(f"{'H':>6} {'surg':>5} {'disc':>5} {'d_H':>10} {'contained':>10} {'seconds':>8}")
    for r in rep.rows:
        print(f"{r.H:6g} {r.surgeries:5d} {r.discards:5d} {r.hausdorff:10.6f} "
              f"{str(r.containment):>10} {r.seconds:8.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
