"""Minimal deterministic SVG figures: polylines, circles, text, Hill boundary."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from skimage.measure import find_contours

from hillscope.core import MechanicalSystem

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _num(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".")


@dataclass
class Figure:
    """Data-space canvas; ``flip`` mirrors the vertical axis (sprinkler view)."""

    xlim: tuple
    ylim: tuple
    width: int = 640
    height: int = 480
    flip: bool = False
    title: str = ""
    _items: list = field(default_factory=list)

    def _map(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        (x0, x1), (y0, y1) = self.xlim, self.ylim
        sx = (pts[:, 0] - x0) / (x1 - x0) * self.width
        fy = (pts[:, 1] - y0) / (y1 - y0)
        sy = fy * self.height if self.flip else (1.0 - fy) * self.height
        return np.column_stack([sx, sy])

    def polyline(self, pts, color: str = "#000", width: float = 1.0, dash: str | None = None):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        pts = pts[np.all(np.isfinite(pts), axis=1)]
        if len(pts) < 2:
            return
        xy = " ".join(f"{_num(a)},{_num(b)}" for a, b in self._map(pts))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self._items.append(
            f'<polyline points="{xy}" fill="none" stroke="{color}" stroke-width="{width}"{extra}/>'
        )

    def circle(self, p, r: float = 3.0, color: str = "#000"):
        (cx, cy), = self._map(p)
        self._items.append(f'<circle cx="{_num(cx)}" cy="{_num(cy)}" r="{r}" fill="{color}"/>')

    def text(self, p, s: str, size: int = 12, color: str = "#000"):
        (cx, cy), = self._map(p)
        self._items.append(
            f'<text x="{_num(cx)}" y="{_num(cy)}" font-size="{size}" fill="{color}">{_escape(s)}</text>'
        )

    def rect(self, lo, hi, color: str = "#888", dash: str | None = "4 3"):
        (a, b), (c, d) = lo, hi
        self.polyline([(a, b), (c, b), (c, d), (a, d), (a, b)], color=color, dash=dash)

    def hill_boundary(self, s: MechanicalSystem, n: int = 301, color: str = "#555"):
        """Trace {f = 0} in the current window (planar systems)."""
        xs = np.linspace(*self.xlim, n)
        ys = np.linspace(*self.ylim, n)
        xx, yy = np.meshgrid(xs, ys, indexing="ij")
        fv = s.f(np.column_stack([xx.ravel(), yy.ravel()])).reshape(xx.shape)
        for c in find_contours(fv, 0.0):
            pts = np.column_stack([np.interp(c[:, 0], np.arange(n), xs), np.interp(c[:, 1], np.arange(n), ys)])
            self.polyline(pts, color=color, width=1.5)

    def to_string(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">')
        body = ['<rect width="100%" height="100%" fill="#fff"/>', *self._items]
        if self.title:
            body.append(f'<text x="8" y="16" font-size="13">{_escape(self.title)}</text>')
        return "\n".join([head, *body, "</svg>"]) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_string())


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def bounds(*arrays, pad: float = 0.08) -> tuple[tuple, tuple]:
    pts = np.vstack([np.asarray(a, dtype=float).reshape(-1, 2) for a in arrays])
    pts = pts[np.all(np.isfinite(pts), axis=1)]
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.maximum(hi - lo, 1e-6)
    lo, hi = lo - pad * span, hi + pad * span
    return (float(lo[0]), float(hi[0])), (float(lo[1]), float(hi[1]))
