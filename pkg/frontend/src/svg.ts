/** Dependency-free SVG assembly: scales, axes, paths, and panels. */

export interface Extent {
  min: number;
  max: number;
}

/** Affine map from a (possibly log-transformed) data range onto pixels. */
export class Scale {
  constructor(
    private readonly domain: Extent,
    private readonly range: Extent,
    readonly log: boolean,
  ) {}

  private t(x: number): number {
    return this.log ? Math.log10(x) : x;
  }

  pos(x: number): number {
    const { min, max } = this.domain;
    const lo = this.t(min);
    const hi = this.t(max);
    const frac = hi === lo ? 0.5 : (this.t(x) - lo) / (hi - lo);
    return this.range.min + frac * (this.range.max - this.range.min);
  }

  ticks(): number[] {
    if (!this.log) {
      const span = this.domain.max - this.domain.min;
      const step = Math.pow(10, Math.floor(Math.log10(span / 4 || 1)));
      const out: number[] = [];
      for (let v = Math.ceil(this.domain.min / step) * step; v <= this.domain.max + 1e-12; v += step) {
        out.push(Number(v.toPrecision(12)));
      }
      return out;
    }
    const out: number[] = [];
    for (let e = Math.ceil(Math.log10(this.domain.min)); e <= Math.floor(Math.log10(this.domain.max)); e++) {
      out.push(Math.pow(10, e));
    }
    return out.length >= 2 ? out : [this.domain.min, this.domain.max];
  }
}

export function extent(values: number[], padFrac = 0.05, log = false): Extent {
  const finite = values.filter((v) => Number.isFinite(v) && (!log || v > 0));
  let min = Math.min(...finite);
  let max = Math.max(...finite);
  if (log) {
    const pad = Math.pow(max / min, padFrac);
    return { min: min / pad, max: max * pad };
  }
  const pad = (max - min || 1) * padFrac;
  return { min: min - pad, max: max + pad };
}

export function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function el(tag: string, attrs: Record<string, string | number>, children: string[] = []): string {
  const attrText = Object.entries(attrs)
    .map(([k, v]) => `${k}="${v}"`)
    .join(" ");
  if (children.length === 0) return `<${tag} ${attrText}/>`;
  return `<${tag} ${attrText}>${children.join("")}</${tag}>`;
}

export function polylinePath(xs: number[], ys: number[]): string {
  return xs.map((x, i) => `${i === 0 ? "M" : "L"}${x.toFixed(2)},${ys[i].toFixed(2)}`).join("");
}

export function bandPath(xs: number[], upper: number[], lower: number[]): string {
  const fwd = polylinePath(xs, upper);
  const back = [...xs]
    .reverse()
    .map((x, i) => `L${x.toFixed(2)},${lower[lower.length - 1 - i].toFixed(2)}`)
    .join("");
  return `${fwd}${back}Z`;
}

export const PALETTE = [
  "#4363d8",
  "#e6194b",
  "#3cb44b",
  "#f58231",
  "#911eb4",
  "#46908c",
  "#808000",
  "#000075",
];

export interface Panel {
  x: number;
  y: number;
  width: number;
  height: number;
}

export function axes(panel: Panel, xScale: Scale, yScale: Scale, xLabel: string, yLabel: string): string {
  const parts: string[] = [];
  parts.push(
    el("rect", {
      x: panel.x,
      y: panel.y,
      width: panel.width,
      height: panel.height,
      fill: "none",
      stroke: "#333",
      "stroke-width": 1,
    }),
  );
  for (const t of xScale.ticks()) {
    const px = xScale.pos(t);
    parts.push(
      el("line", { x1: px, y1: panel.y + panel.height, x2: px, y2: panel.y + panel.height + 4, stroke: "#333" }),
      el(
        "text",
        { x: px, y: panel.y + panel.height + 16, "text-anchor": "middle", "font-size": 10 },
        [esc(fmtTick(t))],
      ),
    );
  }
  for (const t of yScale.ticks()) {
    const py = yScale.pos(t);
    parts.push(
      el("line", { x1: panel.x - 4, y1: py, x2: panel.x, y2: py, stroke: "#333" }),
      el("text", { x: panel.x - 6, y: py + 3, "text-anchor": "end", "font-size": 10 }, [esc(fmtTick(t))]),
    );
  }
  parts.push(
    el(
      "text",
      { x: panel.x + panel.width / 2, y: panel.y + panel.height + 30, "text-anchor": "middle", "font-size": 11 },
      [esc(xLabel)],
    ),
    el(
      "text",
      {
        x: panel.x - 38,
        y: panel.y + panel.height / 2,
        "text-anchor": "middle",
        "font-size": 11,
        transform: `rotate(-90 ${panel.x - 38} ${panel.y + panel.height / 2})`,
      },
      [esc(yLabel)],
    ),
  );
  return parts.join("");
}

function fmtTick(v: number): string {
  if (v !== 0 && (Math.abs(v) < 1e-3 || Math.abs(v) >= 1e4)) {
    return v.toExponential(0);
  }
  return `${Number(v.toPrecision(6))}`;
}

export function document(width: number, height: number, body: string[]): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
    ...body,
    "</svg>",
  ].join("\n");
}
