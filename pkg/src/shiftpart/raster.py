"""Deterministic plain-text rasters of 2-D cell assignments.

Label images use PGM (P2): target ``i`` (0-based) maps to the gray level
``(i + 1) * 255 // (n + 1)`` and tied cells are white (255).  Figure images
use PPM (P3) with a fixed color palette per target and red for tied cells.
Pixel (row, col) shows the cell at ``x1 = col``-th column (left to right)
and ``x2`` decreasing from top to bottom, so the image matches the usual
plot orientation.  Output is byte-for-byte reproducible: ASCII only, one
image row per line, no timestamps or comments.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError
from .partition import CellAssignment

__all__ = ["label_codes", "write_label_pgm", "write_figure_ppm", "TIE_COLOR", "PALETTE"]

PALETTE = (
    (31, 119, 180),
    (255, 127, 14),
    (44, 160, 44),
    (148, 103, 189),
    (140, 86, 75),
    (23, 190, 207),
    (127, 127, 127),
    (188, 189, 34),
)
TIE_COLOR = (214, 39, 40)


def label_codes(assignment: CellAssignment, resolution) -> np.ndarray:
    """Per-pixel label grid: -1 where tied, else the 0-based target index.

    Returns an (height, width) array with width = resolution[0] and
    height = resolution[1], oriented for image output (top row = largest
    second coordinate).
    """
    res = tuple(int(r) for r in resolution)
    if len(res) != 2:
        raise InvalidArgumentError(f"rasters need a 2-D grid, got {len(res)} axes")
    n_cells = res[0] * res[1]
    if assignment.best.shape[0] != n_cells:
        raise InvalidArgumentError(
            f"assignment covers {assignment.best.shape[0]} cells but the "
            f"resolution implies {n_cells}"
        )
    labels = assignment.best.astype(np.int64).copy()
    labels[assignment.tied] = -1
    # flat C-order (i0, i1) -> image: columns = i0, rows = reversed i1
    return labels.reshape(res)[:, ::-1].T


def _write_lines(path, header: str, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(header)
        for row in rows:
            fh.write(" ".join(map(str, row)))
            fh.write("\n")


def write_label_pgm(path, assignment: CellAssignment, resolution) -> None:
    """Write the assignment as a plain (P2) PGM label image."""
    codes = label_codes(assignment, resolution)
    n = assignment.near.shape[1]
    grays = np.array([(i + 1) * 255 // (n + 1) for i in range(n)] + [255], dtype=np.int64)
    img = grays[codes]  # code -1 indexes the final (tie) entry
    h, w = img.shape
    _write_lines(path, f"P2\n{w} {h}\n255\n", img)


def write_figure_ppm(path, assignment: CellAssignment, resolution) -> None:
    """Write the assignment as a plain (P3) PPM color figure."""
    codes = label_codes(assignment, resolution)
    n = assignment.near.shape[1]
    colors = np.array(
        [PALETTE[i % len(PALETTE)] for i in range(n)] + [TIE_COLOR], dtype=np.int64
    )
    img = colors[codes].reshape(codes.shape[0], -1)
    h = codes.shape[0]
    w = codes.shape[1]
    _write_lines(path, f"P3\n{w} {h}\n255\n", img)
