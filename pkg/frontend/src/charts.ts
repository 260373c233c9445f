/**
 * Deterministic SVG charts for the seven experiment CSV kinds.
 *
 * All geometry is computed with fixed-precision formatting and no
 * environment-dependent input, so rendering the same CSV twice produces
 * byte-identical output.
 */
import { ExperimentCsv, Row, SchemaError, num } from "./csv.js";

export const FIGURE_KINDS = [
  "entropy",
  "eviction_rate",
  "ttest",
  "ppp_tpr",
  "ppp_cost",
  "vc_noise",
  "trace",
] as const;

export type FigureKind = (typeof FIGURE_KINDS)[number];

/** Schema(s) each chart kind accepts. */
export const KIND_SCHEMAS: Record<FigureKind, string[]> = {
  entropy: ["chamsim/entropy/v1"],
  eviction_rate: ["chamsim/evict/v1"],
  ttest: ["chamsim/ttest/v1"],
  ppp_tpr: ["chamsim/ppp/v1"],
  ppp_cost: ["chamsim/ppp/v1"],
  vc_noise: ["chamsim/vcnoise/v1"],
  trace: ["chamsim/trace/v1"],
};

export const TTEST_THRESHOLD = 4.5;

const WIDTH = 640;
const HEIGHT = 400;
const MARGIN = { top: 40, right: 20, bottom: 70, left: 60 };
const PLOT_W = WIDTH - MARGIN.left - MARGIN.right;
const PLOT_H = HEIGHT - MARGIN.top - MARGIN.bottom;
const COLORS = ["#4269d0", "#efb118", "#ff725c", "#6cc5b0", "#3ca951", "#a463f2"];

const fmt = (v: number): string => {
  const s = v.toFixed(2);
  return s === "-0.00" ? "0.00" : s;
};

interface Bar {
  label: string;
  value: number;
  ciLow?: number;
  ciHigh?: number;
}

interface Series {
  name: string;
  points: Array<[number, number]>;
}

interface Frame {
  title: string;
  yLabel: string;
  xLabel?: string;
}

function linearScale(lo: number, hi: number, outLo: number, outHi: number) {
  const span = hi - lo || 1;
  return (v: number) => outLo + ((v - lo) / span) * (outHi - outLo);
}

function svgDocument(body: string[], frame: Frame): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="sans-serif" font-size="12">`,
    `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
    `<text x="${WIDTH / 2}" y="20" text-anchor="middle" font-size="15">${escapeXml(frame.title)}</text>`,
    `<text x="16" y="${MARGIN.top + PLOT_H / 2}" text-anchor="middle" transform="rotate(-90 16 ${MARGIN.top + PLOT_H / 2})">${escapeXml(frame.yLabel)}</text>`,
    frame.xLabel
      ? `<text x="${MARGIN.left + PLOT_W / 2}" y="${HEIGHT - 8}" text-anchor="middle">${escapeXml(frame.xLabel)}</text>`
      : "",
    ...body,
    "</svg>",
    "",
  ].join("\n");
}

function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function yAxis(lo: number, hi: number, y: (v: number) => number): string[] {
  const out: string[] = [];
  const ticks = 5;
  for (let i = 0; i <= ticks; i++) {
    const v = lo + ((hi - lo) * i) / ticks;
    const py = y(v);
    out.push(
      `<line x1="${MARGIN.left}" y1="${fmt(py)}" x2="${MARGIN.left + PLOT_W}" y2="${fmt(py)}" stroke="#ddd"/>`,
      `<text x="${MARGIN.left - 6}" y="${fmt(py + 4)}" text-anchor="end">${fmt(v)}</text>`,
    );
  }
  out.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" y2="${MARGIN.top + PLOT_H}" stroke="black"/>`,
    `<line x1="${MARGIN.left}" y1="${MARGIN.top + PLOT_H}" x2="${MARGIN.left + PLOT_W}" y2="${MARGIN.top + PLOT_H}" stroke="black"/>`,
  );
  return out;
}

function barChart(frame: Frame, bars: Bar[], threshold?: number, refLine?: number): string {
  const highs = bars.map((b) => Math.max(b.value, b.ciHigh ?? b.value));
  let hi = Math.max(...highs, threshold ?? -Infinity, refLine ?? -Infinity);
  hi = hi <= 0 ? 1 : hi * 1.1;
  const lo = 0;
  const y = linearScale(lo, hi, MARGIN.top + PLOT_H, MARGIN.top);
  const body = yAxis(lo, hi, y);
  const step = PLOT_W / bars.length;
  const barW = step * 0.6;
  bars.forEach((b, i) => {
    const x = MARGIN.left + step * i + (step - barW) / 2;
    const top = y(b.value);
    body.push(
      `<rect x="${fmt(x)}" y="${fmt(top)}" width="${fmt(barW)}" height="${fmt(MARGIN.top + PLOT_H - top)}" fill="${COLORS[i % COLORS.length]}"/>`,
    );
    if (b.ciLow !== undefined && b.ciHigh !== undefined) {
      const cx = x + barW / 2;
      body.push(
        `<line x1="${fmt(cx)}" y1="${fmt(y(b.ciLow))}" x2="${fmt(cx)}" y2="${fmt(y(b.ciHigh))}" stroke="black"/>`,
        `<line x1="${fmt(cx - 5)}" y1="${fmt(y(b.ciLow))}" x2="${fmt(cx + 5)}" y2="${fmt(y(b.ciLow))}" stroke="black"/>`,
        `<line x1="${fmt(cx - 5)}" y1="${fmt(y(b.ciHigh))}" x2="${fmt(cx + 5)}" y2="${fmt(y(b.ciHigh))}" stroke="black"/>`,
      );
    }
    body.push(
      `<text x="${fmt(x + barW / 2)}" y="${MARGIN.top + PLOT_H + 16}" text-anchor="middle" font-size="10">${escapeXml(b.label)}</text>`,
      `<text x="${fmt(x + barW / 2)}" y="${fmt(top - 4)}" text-anchor="middle" font-size="10">${fmt(b.value)}</text>`,
    );
  });
  if (threshold !== undefined) {
    const py = y(threshold);
    body.push(
      `<line class="threshold" x1="${MARGIN.left}" y1="${fmt(py)}" x2="${MARGIN.left + PLOT_W}" y2="${fmt(py)}" stroke="red" stroke-dasharray="6 3"/>`,
      `<text x="${MARGIN.left + PLOT_W - 4}" y="${fmt(py - 5)}" text-anchor="end" fill="red">${threshold}</text>`,
    );
  }
  if (refLine !== undefined) {
    const py = y(refLine);
    body.push(
      `<line class="reference" x1="${MARGIN.left}" y1="${fmt(py)}" x2="${MARGIN.left + PLOT_W}" y2="${fmt(py)}" stroke="#888" stroke-dasharray="2 3"/>`,
    );
  }
  return svgDocument(body, frame);
}

function lineChart(frame: Frame, series: Series[]): string {
  const xs = series.flatMap((s) => s.points.map((p) => p[0]));
  const ys = series.flatMap((s) => s.points.map((p) => p[1]));
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  const yHiRaw = Math.max(...ys, 0);
  const yHi = yHiRaw <= 0 ? 1 : yHiRaw * 1.1;
  const x = linearScale(xLo, xHi, MARGIN.left + 20, MARGIN.left + PLOT_W - 20);
  const y = linearScale(0, yHi, MARGIN.top + PLOT_H, MARGIN.top);
  const body = yAxis(0, yHi, y);
  for (const vx of [...new Set(xs)].sort((a, b) => a - b)) {
    body.push(
      `<text x="${fmt(x(vx))}" y="${MARGIN.top + PLOT_H + 16}" text-anchor="middle" font-size="10">${vx}</text>`,
    );
  }
  series.forEach((s, i) => {
    const sorted = [...s.points].sort((a, b) => a[0] - b[0]);
    const d = sorted.map(([px, py], j) => `${j === 0 ? "M" : "L"}${fmt(x(px))} ${fmt(y(py))}`).join(" ");
    const color = COLORS[i % COLORS.length];
    body.push(`<path d="${d}" fill="none" stroke="${color}" stroke-width="2"/>`);
    for (const [px, py] of sorted) {
      body.push(`<circle cx="${fmt(x(px))}" cy="${fmt(y(py))}" r="3" fill="${color}"/>`);
    }
    body.push(
      `<text x="${MARGIN.left + PLOT_W - 4}" y="${MARGIN.top + 14 + 14 * i}" text-anchor="end" fill="${color}">${escapeXml(s.name)}</text>`,
    );
  });
  return svgDocument(body, frame);
}

const configLabel = (r: Row): string => {
  const vc = Number(r.w_vc);
  return vc > 0 ? `${r.model} vc=${r.w_vc}` : `${r.model}`;
};

export function renderChart(kind: FigureKind, csv: ExperimentCsv): string {
  switch (kind) {
    case "entropy":
      return barChart(
        { title: "Relative eviction entropy", yLabel: "bits" },
        csv.rows.map((r) => ({
          label: configLabel(r),
          value: num(r, "bits"),
          ciLow: num(r, "ci_low"),
          ciHigh: num(r, "ci_high"),
        })),
      );
    case "eviction_rate": {
      const byProvenance = new Map<string, Array<[number, number]>>();
      for (const r of csv.rows) {
        const key = r.provenance ?? "";
        if (!byProvenance.has(key)) byProvenance.set(key, []);
        byProvenance.get(key)!.push([num(r, "run"), num(r, "success_rate")]);
      }
      return lineChart(
        { title: "Eviction success rate per run", yLabel: "success rate", xLabel: "run" },
        [...byProvenance.entries()].map(([name, points]) => ({ name, points })),
      );
    }
    case "ttest":
      return barChart(
        { title: "Welch t: profiled vs random eviction sets", yLabel: "|t|" },
        csv.rows.map((r) => ({ label: configLabel(r), value: Math.abs(num(r, "t_value")) })),
        TTEST_THRESHOLD,
      );
    case "ppp_tpr": {
      const bySeries = new Map<string, Array<[number, number]>>();
      for (const r of csv.rows) {
        const key = configLabel(r);
        if (!bySeries.has(key)) bySeries.set(key, []);
        bySeries.get(key)!.push([num(r, "n_lines"), num(r, "tpr")]);
      }
      return lineChart(
        { title: "Profiling true-positive rate", yLabel: "TPR", xLabel: "cache lines" },
        [...bySeries.entries()].map(([name, points]) => ({ name, points })),
      );
    }
    case "ppp_cost":
      return barChart(
        { title: "Attacker reads per true conflict", yLabel: "reads / true conflict" },
        csv.rows.map((r) => ({ label: configLabel(r), value: num(r, "reads_per_true") })),
      );
    case "vc_noise": {
      const points = csv.rows.map((r): [number, number] => [num(r, "w_vc"), num(r, "noisy_per_victim")]);
      return lineChart(
        { title: "Victim-cache noise in profiling", yLabel: "noisy samples / victim", xLabel: "victim-cache ways" },
        [{ name: csv.rows[0]?.model ?? "", points }],
      );
    }
    case "trace":
      return barChart(
        { title: "Relative miss rate vs baseline", yLabel: "relative miss rate" },
        csv.rows.map((r) => ({ label: r.model ?? "", value: num(r, "relative") })),
        undefined,
        1.0,
      );
    default: {
      const exhaustive: never = kind;
      throw new SchemaError(`unknown figure kind ${String(exhaustive)}`);
    }
  }
}
