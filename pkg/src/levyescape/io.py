"""Artifact files: field CSV + JSON sidecar, sweep tables, heatmap images.

Every write goes to a temporary file in the destination directory and is
renamed into place, so a crashed run never leaves a half-written artifact.
"""

from __future__ import annotations

import contextlib
import csv
import io
import json
import os
import tempfile

import numpy as np

from .errors import LevyEscapeError
from .metrics import SWEEP_HEADER


class OutputError(LevyEscapeError, OSError):
    """Artifact could not be written or read."""


@contextlib.contextmanager
def atomic_open(path, mode="w"):
    d = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(d, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from None
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def write_text(path, text):
    with atomic_open(path) as fh:
        fh.write(text)


def write_json(path, obj):
    with atomic_open(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def _g6(x):
    return f"{x:.6g}"


def field_csv_text(field):
    """``v,w,value`` rows, w outer and v inner, 6 significant digits."""
    v, w = field.v, field.w
    buf = io.StringIO()
    buf.write("v,w,value\n")
    for i, wi in enumerate(w):
        ws = _g6(wi)
        row = field.values[i]
        buf.write("".join(f"{_g6(vj)},{ws},{_g6(row[j])}\n" for j, vj in enumerate(v)))
    return buf.getvalue()


def write_field(field, path, extra_meta=None):
    """Write ``path`` (CSV) and ``path`` with ``.json`` suffix (metadata)."""
    write_text(path, field_csv_text(field))
    meta = dict(field.meta)
    if extra_meta:
        meta.update(extra_meta)
    write_json(os.path.splitext(path)[0] + ".json", meta)


def read_field_csv(path):
    """Return ``(v, w, Z)`` with ``Z[i, j]`` at ``(v[j], w[i])``."""
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}") from None
    v = np.unique(data[:, 0])
    w = np.unique(data[:, 1])
    return v, w, data[:, 2].reshape(w.size, v.size)


def _cell(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_table(rows, path, header=SWEEP_HEADER):
    with atomic_open(path) as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([_cell(r.get(h)) for h in header])


def read_table(path, header=SWEEP_HEADER):
    rows = []
    try:
        with open(path, newline="") as fh:
            for r in csv.DictReader(fh):
                row = {}
                for h in header:
                    val = r.get(h, "")
                    if h == "status":
                        row[h] = val
                    else:
                        row[h] = float(val) if val != "" else None
                rows.append(row)
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}") from None
    return rows


def write_matrix(xs, ys, Z, path, x_name="alpha", y_name="ratio"):
    """Heatmap-ready matrix: first row holds x values, first column y values."""
    with atomic_open(path) as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow([f"{y_name}\\{x_name}"] + [repr(float(x)) for x in xs])
        for y, row in zip(ys, Z):
            wr.writerow([repr(float(y))] + ["" if np.isnan(z) else repr(float(z)) for z in row])


def render_heatmap(csv_path, png_path, vmin=None, vmax=None, title=None, label="value",
                   marker=None):
    """PNG from a field CSV alone; nothing is recomputed."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    v, w, Z = read_field_csv(csv_path)
    fig, ax = plt.subplots(figsize=(5, 4.2))
    im = ax.pcolormesh(v, w, Z, shading="nearest", cmap="turbo", vmin=vmin, vmax=vmax)
    fig.colorbar(im, ax=ax, label=label)
    if marker is not None:
        ax.plot(*marker, "k*", ms=9)
    ax.set_xlabel("v")
    ax.set_ylabel("w")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    with atomic_open(png_path, "wb") as fh:
        fig.savefig(fh, format="png", dpi=110)
    plt.close(fig)


def render_curves(series, png_path, xlabel, ylabel, title=None):
    """Line plot of ``{label: (xs, ys)}``."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    for label, (xs, ys) in series.items():
        ax.plot(xs, ys, "o-", ms=3, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    with atomic_open(png_path, "wb") as fh:
        fig.savefig(fh, format="png", dpi=110)
    plt.close(fig)
