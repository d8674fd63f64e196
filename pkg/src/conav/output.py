"""Plain-text outputs: trajectory CSV, SVG drawings and atomic file writes."""
from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

#: agent colors, cycled
PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
    "#e377c2", "#17becf", "#bcbd22", "#7f7f7f", "#393b79", "#637939",
)


def atomic_write(path, text: str) -> Path:
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def fmt(v: float) -> str:
    """Fixed 9-significant-digit decimal formatting."""
    return f"{float(v):.9g}"


# ------------------------------------------------------------------- CSV


def csv_columns(model) -> list:
    extra = [s for s in model.state_labels if s not in ("x", "y")]
    return ["agent", "t", "time_s", "x", "y", *extra, *model.control_labels]


def trajectory_csv(model, X, U, dt: float) -> str:
    """One row per (agent, step); controls are blank on the final step."""
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float)
    P = model.position(X)
    keep = [k for k, s in enumerate(model.state_labels) if s not in ("x", "y")]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_columns(model))
    N, T1, _ = X.shape
    for i in range(N):
        for t in range(T1):
            row = [str(i), str(t), fmt(t * dt), fmt(P[i, t, 0]), fmt(P[i, t, 1])]
            row += [fmt(X[i, t, k]) for k in keep]
            row += [fmt(u) for u in U[i, t]] if t < U.shape[1] else [""] * U.shape[2]
            w.writerow(row)
    return buf.getvalue()


def emit_trajectory_csv(model, X, U, dt: float, path) -> Path:
    return atomic_write(path, trajectory_csv(model, X, U, dt))


def read_trajectory_csv(path):
    """Inverse of :func:`trajectory_csv`: ``(columns, positions, extra states, controls)``.

    Arrays have shapes ``(N, T + 1, 2)``, ``(N, T + 1, n_extra)`` and
    ``(N, T, nu)``.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    cols, body = rows[0], rows[1:]
    n_agents = max(int(r[0]) for r in body) + 1
    T1 = max(int(r[1]) for r in body) + 1
    n_num = len(cols) - 3
    vals = np.full((n_agents, T1, n_num), np.nan)
    for r in body:
        vals[int(r[0]), int(r[1])] = [float(v) if v != "" else np.nan for v in r[3:]]
    # control columns are the trailing ones left blank on the final step
    n_ctrl = sum(1 for v in body[T1 - 1][3:] if v == "")
    P = vals[:, :, :2]
    extra = vals[:, :, 2 : n_num - n_ctrl]
    U = vals[:, :-1, n_num - n_ctrl :]
    return cols, P, extra, U


# ------------------------------------------------------------------- SVG


class _Svg:
    def __init__(self, workspace, width: int = 600, margin: float = 0.5):
        x0, x1, y0, y1 = workspace
        self.x0, self.y1 = x0 - margin, y1 + margin
        self.w, self.h = (x1 - x0) + 2 * margin, (y1 - y0) + 2 * margin
        self.px = width
        self.scale = width / self.w
        self.parts = []

    def X(self, x) -> str:
        return fmt(x - self.x0)

    def Y(self, y) -> str:
        # SVG y points down
        return fmt(self.y1 - y)

    def add(self, s: str):
        self.parts.append(s)

    def text(self) -> str:
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.px}" height="{int(round(self.h * self.scale))}" '
            f'viewBox="0 0 {fmt(self.w)} {fmt(self.h)}">\n'
        )
        return head + "\n".join(self.parts) + "\n</svg>\n"


def _star(svg: _Svg, x: float, y: float, r: float, color: str) -> str:
    pts = []
    for k in range(10):
        a = np.pi / 2 + k * np.pi / 5
        rr = r if k % 2 == 0 else 0.45 * r
        pts.append(f"{svg.X(x + rr * np.cos(a))},{svg.Y(y + rr * np.sin(a))}")
    return f'<polygon points="{" ".join(pts)}" fill="{color}" stroke="black" stroke-width="0.03"/>'


def _polyline(svg: _Svg, P, **attrs) -> str:
    pts = " ".join(f"{svg.X(x)},{svg.Y(y)}" for x, y in P)
    extra = " ".join(f'{k.replace("_", "-")}="{v}"' for k, v in attrs.items())
    return f'<polyline points="{pts}" fill="none" {extra}/>'


def svg_drawing(scenario, theta, X=None, title: str = "") -> str:
    """Obstacles, per-agent trajectories, start circles and goal stars."""
    svg = _Svg(scenario.workspace)
    x0, x1, y0, y1 = scenario.workspace
    svg.add(
        f'<rect x="{svg.X(x0)}" y="{svg.Y(y1)}" width="{fmt(x1 - x0)}" height="{fmt(y1 - y0)}" '
        'fill="white" stroke="#999999" stroke-width="0.05"/>'
    )
    for ob in scenario.obstacles(theta):
        if ob.kind == "circle":
            svg.add(
                f'<circle cx="{svg.X(ob.center[0])}" cy="{svg.Y(ob.center[1])}" r="{fmt(ob.radius)}" '
                'fill="#bbbbbb" stroke="#444444" stroke-width="0.05"/>'
            )
        elif ob.kind == "line":
            svg.add(
                f'<line x1="{svg.X(ob.a[0])}" y1="{svg.Y(ob.a[1])}" x2="{svg.X(ob.b[0])}" y2="{svg.Y(ob.b[1])}" '
                'stroke="#444444" stroke-width="0.15" stroke-linecap="round"/>'
            )
        elif ob.kind == "track":
            phi = np.linspace(0, 2 * np.pi, 241)
            rc = ob.centerline(phi)[0]
            for off in (-ob.half_width, ob.half_width):
                r = rc + off
                svg.add(_polyline(svg, np.stack([r * np.cos(phi), r * np.sin(phi)], 1), stroke="#444444", stroke_width="0.08"))
            svg.add(
                _polyline(svg, np.stack([rc * np.cos(phi), rc * np.sin(phi)], 1), stroke="#bbbbbb", stroke_width="0.03", stroke_dasharray="0.2 0.2")
            )
    m = scenario.dynamics
    S, G = scenario.task(theta)
    ps, pg = m.position(S), m.position(G)
    if X is not None:
        P = m.position(np.asarray(X, dtype=float))
        for i in range(P.shape[0]):
            svg.add(_polyline(svg, P[i], stroke=PALETTE[i % len(PALETTE)], stroke_width="0.06"))
    for i in range(len(ps)):
        c = PALETTE[i % len(PALETTE)]
        svg.add(
            f'<circle cx="{svg.X(ps[i, 0])}" cy="{svg.Y(ps[i, 1])}" r="{fmt(scenario.agent_radius)}" '
            f'fill="{c}" stroke="black" stroke-width="0.03"/>'
        )
        svg.add(_star(svg, pg[i, 0], pg[i, 1], scenario.agent_radius * 1.2, c))
    if title:
        svg.add(f'<text x="0.2" y="0.4" font-size="0.4" font-family="sans-serif">{_escape(title)}</text>')
    return svg.text()


def emit_svg(scenario, theta, X, path, title: str = "") -> Path:
    return atomic_write(path, svg_drawing(scenario, theta, X, title))


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
