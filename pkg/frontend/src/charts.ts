/**
 * Dependency-free SVG chart construction.
 *
 * Builders are pure: payloads from the metrics and prediction endpoints go
 * in, an SVG string comes out.  Data values are never recomputed -- screen
 * coordinates are an affine map of the served numbers, and each marker
 * carries its served value verbatim (6 significant digits) in data
 * attributes, so what the chart displays is exactly what the server sent.
 */

import { sig6 } from "./format.js";
import type { PredictionCurves, UncertaintyReport } from "./api.js";

export interface ChartPoint {
  x: number;
  y: number;
  label: string;
}

export interface Series {
  name: string;
  color: string;
  points: ChartPoint[];
}

const WIDTH = 560;
const HEIGHT = 300;
const MARGIN = { left: 58, right: 16, top: 18, bottom: 36 };

function xScale(domain: [number, number]): (v: number) => number {
  const span = domain[1] - domain[0] || 1;
  return (v) => MARGIN.left + ((v - domain[0]) / span) * (WIDTH - MARGIN.left - MARGIN.right);
}

function yScale(domain: [number, number]): (v: number) => number {
  const span = domain[1] - domain[0] || 1;
  return (v) =>
    HEIGHT - MARGIN.bottom - ((v - domain[0]) / span) * (HEIGHT - MARGIN.top - MARGIN.bottom);
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo)) return [0, 1];
  return lo === hi ? [lo - 1, hi + 1] : [lo, hi];
}

export function renderSeriesSvg(
  series: Series[],
  options: { xLabel: string; yLabel: string; title: string },
): string {
  const xs = series.flatMap((s) => s.points.map((p) => p.x));
  const ys = series.flatMap((s) => s.points.map((p) => p.y));
  const sx = xScale(extent(xs));
  const sy = yScale([Math.min(0, extent(ys)[0]), extent(ys)[1]]);
  const body = series
    .map((s) => {
      const path = s.points
        .map((p, i) => `${i === 0 ? "M" : "L"}${sx(p.x).toFixed(2)},${sy(p.y).toFixed(2)}`)
        .join(" ");
      const markers = s.points
        .map(
          (p) =>
            `<circle cx="${sx(p.x).toFixed(2)}" cy="${sy(p.y).toFixed(2)}" r="2.5" ` +
            `fill="${s.color}" data-x="${sig6(p.x)}" data-value="${sig6(p.y)}" ` +
            `data-series="${s.name}"><title>${s.name}: ${p.label}</title></circle>`,
        )
        .join("");
      return `<path d="${path}" fill="none" stroke="${s.color}" stroke-width="1.5"/>${markers}`;
    })
    .join("");
  const legend = series
    .map(
      (s, i) =>
        `<text x="${MARGIN.left + 8}" y="${MARGIN.top + 14 * (i + 1)}" fill="${s.color}" ` +
        `font-size="11">${s.name}</text>`,
    )
    .join("");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${WIDTH} ${HEIGHT}" role="img">` +
    `<text x="${WIDTH / 2}" y="12" text-anchor="middle" font-size="12">${options.title}</text>` +
    `<text x="${WIDTH / 2}" y="${HEIGHT - 6}" text-anchor="middle" font-size="11">${options.xLabel}</text>` +
    `<text x="12" y="${HEIGHT / 2}" font-size="11" transform="rotate(-90 12 ${HEIGHT / 2})" ` +
    `text-anchor="middle">${options.yLabel}</text>` +
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${WIDTH - MARGIN.left - MARGIN.right}" ` +
    `height="${HEIGHT - MARGIN.top - MARGIN.bottom}" fill="none" stroke="#999"/>` +
    body +
    legend +
    `</svg>`
  );
}

/** Worst-over-pressure uncertainty curves for one or more design stages. */
export function sigmaCurveSeries(
  reports: Array<{ name: string; report: UncertaintyReport }>,
  output: 0 | 1,
  colors: string[] = ["#1965b0", "#dc050c", "#4eb265", "#777777"],
): Series[] {
  return reports.map(({ name, report }, i) => ({
    name: `${name} (n=${report.design_size})`,
    color: colors[i % colors.length] ?? "#333",
    points: report.l_values.map((l, k) => {
      const value = report.curves[output]?.[k] ?? 0;
      return { x: l, y: value, label: `l=${sig6(l)}, sigma=${sig6(value)}` };
    }),
  }));
}

export function sigmaCurveSvg(
  reports: Array<{ name: string; report: UncertaintyReport }>,
  output: 0 | 1,
): string {
  return renderSeriesSvg(sigmaCurveSeries(reports, output), {
    title: output === 0 ? "Worst-pressure-case sigma_v" : "Worst-pressure-case sigma_T",
    xLabel: "liquid mole fraction of component 1",
    yLabel: output === 0 ? "sigma_v" : "sigma_T / K",
  });
}

/** Bubble- and dew-point curves at one pressure: T against l and against v. */
export function txySeries(curves: PredictionCurves): Series[] {
  return [
    {
      name: "bubble (T vs l)",
      color: "#1965b0",
      points: curves.l.map((l, i) => ({
        x: l,
        y: curves.T[i] ?? 0,
        label: `l=${sig6(l)}, T=${sig6(curves.T[i] ?? 0)}`,
      })),
    },
    {
      name: "dew (T vs v)",
      color: "#dc050c",
      points: curves.v.map((v, i) => ({
        x: v,
        y: curves.T[i] ?? 0,
        label: `v=${sig6(v)}, T=${sig6(curves.T[i] ?? 0)}`,
      })),
    },
  ];
}

export function txySvg(curves: PredictionCurves): string {
  return renderSeriesSvg(txySeries(curves), {
    title: `Equilibrium temperatures at ${sig6(curves.P)} Pa`,
    xLabel: "mole fraction of component 1 (liquid or vapor)",
    yLabel: "T / K",
  });
}

/** Prediction error against design size across recorded assessments. */
export function rmseHistorySeries(
  history: Array<{ size: number; rmse: number[] }>,
): Series[] {
  return [0, 1].map((j) => ({
    name: j === 0 ? "rho_v" : "rho_T",
    color: j === 0 ? "#1965b0" : "#dc050c",
    points: history.map((h) => ({
      x: h.size,
      y: h.rmse[j] ?? 0,
      label: `n=${h.size}, rho=${sig6(h.rmse[j] ?? 0)}`,
    })),
  }));
}

export function rmseHistorySvg(history: Array<{ size: number; rmse: number[] }>): string {
  return renderSeriesSvg(rmseHistorySeries(history), {
    title: "Prediction error vs design size",
    xLabel: "number of experiments",
    yLabel: "rmse",
  });
}
