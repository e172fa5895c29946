"""Risk-coverage plots as standalone SVG files."""

from django.utils.html import escape

from .exceptions import ConfigurationError

WIDTH, HEIGHT = 720, 480
LEFT, RIGHT, TOP, BOTTOM = 60, 230, 30, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")
WORST_CASE_COLOR = "#7f7f7f"


class SvgDocument:
    def __init__(self, width, height):
        self.width = width
        self.height = height
        self.parts = []

    def line(self, x1, y1, x2, y2, stroke="#000", width=1.0, dash=None):
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
            f'stroke="{stroke}" stroke-width="{width:.1f}"{extra}/>')

    def polyline(self, points, stroke, width=1.5, dash=None):
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{stroke}" stroke-width="{width:.1f}"{extra}/>')

    def text(self, x, y, string, anchor="start", size=12):
        self.parts.append(
            f'<text x="{x:.2f}" y="{y:.2f}" font-family="sans-serif" font-size="{size}" '
            f'text-anchor="{anchor}">{escape(string)}</text>')

    def render(self):
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">')
        body = [f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="#fff"/>', *self.parts]
        return '<?xml version="1.0" encoding="UTF-8"?>\n' + "\n".join([head, *body, "</svg>"]) + "\n"


def _plot_x(coverage):
    return LEFT + coverage * (WIDTH - LEFT - RIGHT)


def _plot_y(risk):
    return HEIGHT - BOTTOM - risk * (HEIGHT - TOP - BOTTOM)


def rc_svg(curves, title=None):
    """SVG text for named RC curves.

    `curves` is a sequence of (name, RCCurve) or (name, RCCurve, style) where
    style "worst" draws a dashed grey envelope.
    """
    curves = list(curves)
    if not curves:
        raise ConfigurationError("nothing to plot")
    doc = SvgDocument(WIDTH, HEIGHT)
    x0, x1 = _plot_x(0.0), _plot_x(1.0)
    y0, y1 = _plot_y(0.0), _plot_y(1.0)
    for tick in range(6):
        value = tick / 5
        doc.line(_plot_x(value), y0, _plot_x(value), y1, stroke="#e5e5e5")
        doc.line(x0, _plot_y(value), x1, _plot_y(value), stroke="#e5e5e5")
        doc.text(_plot_x(value), y0 + 16, f"{value:.1f}", anchor="middle", size=11)
        doc.text(x0 - 6, _plot_y(value) + 4, f"{value:.1f}", anchor="end", size=11)
    doc.line(x0, y0, x1, y0)
    doc.line(x0, y0, x0, y1)
    doc.text((x0 + x1) / 2, HEIGHT - 12, "coverage", anchor="middle")
    doc.text(16, (y0 + y1) / 2, "risk", anchor="middle")
    if title:
        doc.text((x0 + x1) / 2, 18, title, anchor="middle", size=13)

    colour = 0
    for i, entry in enumerate(curves):
        name, curve = entry[0], entry[1]
        worst = len(entry) > 2 and entry[2] == "worst"
        if len(curve) == 0:
            raise ConfigurationError(f"curve {name!r} has no points")
        points = [(_plot_x(c), _plot_y(r)) for c, r in zip(curve.coverage.tolist(), curve.risk.tolist())]
        if worst:
            stroke, dash = WORST_CASE_COLOR, "6,4"
        else:
            stroke, dash = PALETTE[colour % len(PALETTE)], None
            colour += 1
        doc.polyline(points, stroke, dash=dash)
        legend_y = TOP + 10 + 20 * i
        doc.line(x1 + 16, legend_y - 4, x1 + 40, legend_y - 4, stroke=stroke, width=2.0, dash=dash)
        doc.text(x1 + 46, legend_y, f"{name} {curve.area() * 1000.0:.1f}", size=11)
    doc.text(x1 + 16, TOP - 8, "AURC x1000", size=11)
    return doc.render()


def render_rc_svg(curves, path, title=None):
    text = rc_svg(curves, title)
    with open(path, "w") as fh:
        fh.write(text)
    return path
