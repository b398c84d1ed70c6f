import { scaleLinear } from "d3-scale";
import { line } from "d3-shape";

import { parseCsv } from "./csv.js";
import { PanelSpec, ROLE_COLORS } from "./panels.js";
import { aggregateByX, SeriesPoint } from "./stats.js";

const WIDTH = 560;
const HEIGHT = 360;
const MARGIN = { top: 40, right: 20, bottom: 48, left: 60 };
const INNER_W = WIDTH - MARGIN.left - MARGIN.right;
const INNER_H = HEIGHT - MARGIN.top - MARGIN.bottom;
const FONT = "Helvetica, Arial, sans-serif";
const WHISKER_CAP = 4;

/** Two-decimal coordinate, trailing zeros stripped, for stable short paths. */
function coord(value: number): string {
  const s = value.toFixed(2).replace(/\.?0+$/, "");
  return s === "-0" ? "0" : s;
}

/** Tick label: plain decimal, no float noise, no trailing zeros. */
function tickLabel(value: number): string {
  const s = value.toFixed(6).replace(/\.?0+$/, "");
  return s === "-0" ? "0" : s;
}

function escapeText(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Pad a degenerate [v, v] extent so the scale stays invertible. */
function padded(lo: number, hi: number): [number, number] {
  if (lo < hi) {
    return [lo, hi];
  }
  const pad = Math.max(1, Math.abs(lo) * 0.1);
  return [lo - pad, hi + pad];
}

interface SeriesData {
  label: string;
  color: string;
  points: SeriesPoint[];
}

/** Render one panel as a self-contained SVG string; pure in its inputs. */
export function renderPanel(spec: PanelSpec, csvText: string): string {
  const required = [spec.x, ...spec.series.map((s) => s.column)];
  const rows = parseCsv(csvText, required);
  const series: SeriesData[] = spec.series.map((s) => ({
    label: s.label,
    color: ROLE_COLORS[s.role],
    points: aggregateByX(rows, spec.x, s.column),
  }));

  const xs = series.flatMap((s) => s.points.map((p) => p.x));
  const lows = series.flatMap((s) => s.points.map((p) => p.min));
  const highs = series.flatMap((s) => s.points.map((p) => p.max));
  const x = scaleLinear()
    .domain(padded(Math.min(...xs), Math.max(...xs)))
    .range([0, INNER_W])
    .nice();
  const y = scaleLinear()
    .domain(padded(Math.min(0, ...lows), Math.max(...highs)))
    .range([INNER_H, 0])
    .nice();

  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
      `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="${FONT}" font-size="12">`,
    `<rect width="${WIDTH}" height="${HEIGHT}" fill="#ffffff"/>`,
    `<text x="${WIDTH / 2}" y="22" text-anchor="middle" font-size="14" font-weight="bold">` +
      `${escapeText(spec.title)}</text>`,
    `<g transform="translate(${MARGIN.left},${MARGIN.top})">`,
  ];

  for (const t of y.ticks(6)) {
    const ty = coord(y(t));
    parts.push(`<line x1="0" y1="${ty}" x2="${INNER_W}" y2="${ty}" stroke="#e2e8f0"/>`);
    parts.push(
      `<text x="-8" y="${ty}" text-anchor="end" dominant-baseline="middle">${tickLabel(t)}</text>`,
    );
  }
  for (const t of x.ticks(6)) {
    const tx = coord(x(t));
    parts.push(
      `<line x1="${tx}" y1="${INNER_H}" x2="${tx}" y2="${INNER_H + 5}" stroke="#2d3748"/>`,
    );
    parts.push(
      `<text x="${tx}" y="${INNER_H + 18}" text-anchor="middle">${tickLabel(t)}</text>`,
    );
  }
  parts.push(`<line x1="0" y1="${INNER_H}" x2="${INNER_W}" y2="${INNER_H}" stroke="#2d3748"/>`);
  parts.push(`<line x1="0" y1="0" x2="0" y2="${INNER_H}" stroke="#2d3748"/>`);
  parts.push(
    `<text x="${INNER_W / 2}" y="${INNER_H + 38}" text-anchor="middle">` +
      `${escapeText(spec.x)}</text>`,
  );
  parts.push(
    `<text transform="translate(${-MARGIN.left + 14},${INNER_H / 2}) rotate(-90)" ` +
      `text-anchor="middle">${escapeText(spec.yLabel)}</text>`,
  );

  const meanLine = line<SeriesPoint>()
    .x((p) => +coord(x(p.x)))
    .y((p) => +coord(y(p.mean)));
  for (const s of series) {
    for (const p of s.points) {
      if (p.max - p.min > 1e-12) {
        const px = coord(x(p.x));
        parts.push(
          `<line x1="${px}" y1="${coord(y(p.min))}" x2="${px}" y2="${coord(y(p.max))}" ` +
            `stroke="${s.color}" stroke-width="1"/>`,
        );
        for (const end of [p.min, p.max]) {
          const py = coord(y(end));
          parts.push(
            `<line x1="${coord(x(p.x) - WHISKER_CAP)}" y1="${py}" ` +
              `x2="${coord(x(p.x) + WHISKER_CAP)}" y2="${py}" ` +
              `stroke="${s.color}" stroke-width="1"/>`,
          );
        }
      }
    }
    parts.push(
      `<path d="${meanLine(s.points) ?? ""}" fill="none" stroke="${s.color}" stroke-width="2"/>`,
    );
    for (const p of s.points) {
      parts.push(
        `<circle cx="${coord(x(p.x))}" cy="${coord(y(p.mean))}" r="3" fill="${s.color}"/>`,
      );
    }
  }

  if (series.length > 1) {
    series.forEach((s, i) => {
      const ly = 12 + i * 18;
      parts.push(
        `<line x1="${INNER_W - 150}" y1="${ly}" x2="${INNER_W - 122}" y2="${ly}" ` +
          `stroke="${s.color}" stroke-width="2"/>`,
      );
      parts.push(
        `<text x="${INNER_W - 114}" y="${ly}" dominant-baseline="middle">` +
          `${escapeText(s.label)}</text>`,
      );
    });
  }

  parts.push("</g>", "</svg>", "");
  return parts.join("\n");
}
