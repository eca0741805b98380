"""Gnuplot-ready data files from a completed run directory."""
from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path

import numpy as np


class MissingArtifact(FileNotFoundError):
    pass


def _need(run_dir: Path, name: str) -> Path:
    p = run_dir / name
    if not p.is_file():
        raise MissingArtifact(f"run directory {run_dir} lacks {name}")
    return p


def _read_trajectories(path: Path) -> dict[int, list[tuple[float, complex]]]:
    out: dict[int, list] = defaultdict(list)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[int(row["trajectory_id"])].append((float(row["eps"]), complex(float(row["re_z"]), float(row["im_z"]))))
    return dict(out)


def _limits(run_dir: Path) -> dict[int, complex]:
    p = run_dir / "resonances.json"
    if not p.is_file():
        return {}
    data = json.loads(p.read_text())
    return {e["trajectory_id"]: complex(*e["z"]) for e in data.get("estimates", [])}


def emit_plots(run_dir: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Write whitespace-separated data files under ``run_dir/plots`` (or ``out_dir``).

    Files: ``trajectory_<id>.dat`` (eps, Re z, Im z), ``convergence_<id>.dat``
    (eps, |z(eps) - z0|) for trajectories with a limit, ``field.dat`` (the
    field cross-section) and ``diagnostic.dat`` (eps, Re z, Im z, sigma_min,
    blocks separated by blank lines per eps for ``splot``).

    Raises
    ------
    MissingArtifact
        If the run has no trajectory file.
    """
    run_dir = Path(run_dir)
    dest = Path(out_dir) if out_dir is not None else run_dir / "plots"
    dest.mkdir(parents=True, exist_ok=True)
    written = []
    trajs = _read_trajectories(_need(run_dir, "trajectories.csv"))
    limits = _limits(run_dir)
    for tid, pts in sorted(trajs.items()):
        pts.sort(key=lambda p: -p[0])
        p = dest / f"trajectory_{tid}.dat"
        with open(p, "w") as fh:
            fh.write("# eps re_z im_z\n")
            for e, z in pts:
                fh.write(f"{e!r} {z.real!r} {z.imag!r}\n")
        written.append(p)
        if tid in limits:
            z0 = limits[tid]
            p = dest / f"convergence_{tid}.dat"
            with open(p, "w") as fh:
                fh.write("# eps abs_z_minus_z0\n")
                for e, z in pts:
                    fh.write(f"{e!r} {abs(z - z0)!r}\n")
            written.append(p)
    fcsv = run_dir / "field.csv"
    if fcsv.is_file():
        p = dest / "field.dat"
        with open(fcsv, newline="") as fh, open(p, "w") as out:
            rows = list(csv.reader(fh))
            out.write("# " + " ".join(rows[0]) + "\n")
            for r in rows[1:]:
                out.write(" ".join(r) + "\n")
        written.append(p)
    djson = run_dir / "diagnostic.json"
    if djson.is_file():
        table = json.loads(djson.read_text())["table"]
        p = dest / "diagnostic.dat"
        with open(p, "w") as fh:
            fh.write("# eps re_z im_z sigma_min\n")
            last = None
            for row in table:
                if last is not None and row["eps"] != last:
                    fh.write("\n")
                last = row["eps"]
                fh.write(f"{row['eps']!r} {row['z'][0]!r} {row['z'][1]!r} {row['sigma_min']!r}\n")
        written.append(p)
    return written


def loglog_slope(path: str | Path, skip: int = 0) -> float:
    """Least-squares slope of ``log |z - z0|`` against ``log eps`` in a convergence file."""
    data = np.loadtxt(path, ndmin=2)[skip:]
    data = data[data[:, 1] > 0]
    return float(np.polyfit(np.log(data[:, 0]), np.log(data[:, 1]), 1)[0])
