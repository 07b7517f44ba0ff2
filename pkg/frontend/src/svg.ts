/** Static SVG figure builders: no DOM, no chart library — the figures
 * are simple enough (log-log scatter with fitted and guide lines, time
 * traces with shading) that strings are the sturdiest dependency. */

export interface Series {
  label: string;
  x: number[];
  y: number[];
  color: string;
}

const W = 640;
const H = 420;
const M = { left: 70, right: 24, top: 36, bottom: 52 };

function scale(
  v: number,
  lo: number,
  hi: number,
  outLo: number,
  outHi: number,
): number {
  if (hi === lo) return (outLo + outHi) / 2;
  return outLo + ((v - lo) / (hi - lo)) * (outHi - outLo);
}

function fmt(v: number): string {
  if (!isFinite(v)) return String(v);
  const a = Math.abs(v);
  if (a !== 0 && (a >= 1e4 || a < 1e-3)) return v.toExponential(1);
  return String(Math.round(v * 1e6) / 1e6);
}

function axisTicks(lo: number, hi: number, log: boolean): number[] {
  if (log) {
    const ticks: number[] = [];
    for (let e = Math.ceil(lo); e <= Math.floor(hi); e++) ticks.push(e);
    if (ticks.length < 2) return [lo, hi];
    return ticks;
  }
  const n = 5;
  return Array.from({ length: n + 1 }, (_, i) => lo + ((hi - lo) * i) / n);
}

export function plot(
  title: string,
  xLabel: string,
  yLabel: string,
  series: Series[],
  opts: {
    logx?: boolean;
    logy?: boolean;
    annotations?: string[];
    guide?: { slope: number; through: [number, number]; label: string };
    shade?: { x0: number; x1: number }[];
  } = {},
): string {
  const logx = opts.logx ?? false;
  const logy = opts.logy ?? false;
  const tx = (v: number) => (logx ? Math.log10(v) : v);
  const ty = (v: number) => (logy ? Math.log10(v) : v);
  const xs = series.flatMap((s) => s.x.map(tx)).filter(isFinite);
  const ys = series.flatMap((s) => s.y.map(ty)).filter(isFinite);
  let xlo = Math.min(...xs);
  let xhi = Math.max(...xs);
  let ylo = Math.min(...ys);
  let yhi = Math.max(...ys);
  if (!isFinite(xlo)) [xlo, xhi] = [0, 1];
  if (!isFinite(ylo)) [ylo, yhi] = [0, 1];
  const padx = (xhi - xlo || 1) * 0.06;
  const pady = (yhi - ylo || 1) * 0.08;
  xlo -= padx; xhi += padx; ylo -= pady; yhi += pady;
  const X = (v: number) => scale(tx(v), xlo, xhi, M.left, W - M.right);
  const Y = (v: number) => scale(ty(v), ylo, yhi, H - M.bottom, M.top);
  const out: string[] = [];
  out.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}" font-family="sans-serif" font-size="12">`,
  );
  out.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  for (const sh of opts.shade ?? []) {
    out.push(
      `<rect x="${X(sh.x0)}" y="${M.top}" width="${X(sh.x1) - X(sh.x0)}" height="${H - M.top - M.bottom}" fill="#dfefdf"/>`,
    );
  }
  // axes
  out.push(
    `<line x1="${M.left}" y1="${H - M.bottom}" x2="${W - M.right}" y2="${H - M.bottom}" stroke="black"/>`,
  );
  out.push(
    `<line x1="${M.left}" y1="${M.top}" x2="${M.left}" y2="${H - M.bottom}" stroke="black"/>`,
  );
  for (const t of axisTicks(xlo, xhi, logx)) {
    const px = scale(t, xlo, xhi, M.left, W - M.right);
    const label = logx ? `1e${t}` : fmt(t);
    out.push(
      `<line x1="${px}" y1="${H - M.bottom}" x2="${px}" y2="${H - M.bottom + 5}" stroke="black"/>`,
    );
    out.push(
      `<text x="${px}" y="${H - M.bottom + 18}" text-anchor="middle">${label}</text>`,
    );
  }
  for (const t of axisTicks(ylo, yhi, logy)) {
    const py = scale(t, ylo, yhi, H - M.bottom, M.top);
    const label = logy ? `1e${t}` : fmt(t);
    out.push(
      `<line x1="${M.left - 5}" y1="${py}" x2="${M.left}" y2="${py}" stroke="black"/>`,
    );
    out.push(
      `<text x="${M.left - 8}" y="${py + 4}" text-anchor="end">${label}</text>`,
    );
  }
  out.push(
    `<text x="${(M.left + W - M.right) / 2}" y="${H - 14}" text-anchor="middle">${xLabel}</text>`,
  );
  out.push(
    `<text x="16" y="${(M.top + H - M.bottom) / 2}" text-anchor="middle" transform="rotate(-90 16 ${(M.top + H - M.bottom) / 2})">${yLabel}</text>`,
  );
  out.push(
    `<text x="${(M.left + W - M.right) / 2}" y="20" text-anchor="middle" font-size="14">${escapeXml(title)}</text>`,
  );
  // guide line with the expected slope through a reference point
  if (opts.guide && logx && logy) {
    const g = opts.guide;
    const [gx, gy] = g.through;
    const y0 = Math.log10(gy) + g.slope * (xlo - Math.log10(gx));
    const y1 = Math.log10(gy) + g.slope * (xhi - Math.log10(gx));
    const p0y = scale(y0, ylo, yhi, H - M.bottom, M.top);
    const p1y = scale(y1, ylo, yhi, H - M.bottom, M.top);
    out.push(
      `<line x1="${M.left}" y1="${p0y}" x2="${W - M.right}" y2="${p1y}" stroke="#888" stroke-dasharray="6 4"/>`,
    );
    out.push(
      `<text x="${W - M.right - 4}" y="${p1y - 6}" text-anchor="end" fill="#666">${escapeXml(g.label)}</text>`,
    );
  }
  for (const s of series) {
    const pts = s.x
      .map((v, i) => [X(v), Y(s.y[i])])
      .filter((p) => p.every(isFinite));
    if (pts.length > 1) {
      const d = pts.map((p, i) => `${i ? "L" : "M"}${p[0]},${p[1]}`).join(" ");
      out.push(
        `<path d="${d}" fill="none" stroke="${s.color}" stroke-width="1.5"/>`,
      );
    }
    for (const p of pts) {
      out.push(`<circle cx="${p[0]}" cy="${p[1]}" r="3.5" fill="${s.color}"/>`);
    }
  }
  // legend and annotations
  let ly = M.top + 6;
  for (const s of series) {
    out.push(
      `<rect x="${W - M.right - 150}" y="${ly - 9}" width="10" height="10" fill="${s.color}"/>`,
    );
    out.push(
      `<text x="${W - M.right - 135}" y="${ly}">${escapeXml(s.label)}</text>`,
    );
    ly += 16;
  }
  for (const a of opts.annotations ?? []) {
    out.push(
      `<text x="${M.left + 10}" y="${ly}" fill="#14522d" font-weight="bold">${escapeXml(a)}</text>`,
    );
    ly += 16;
  }
  out.push("</svg>");
  return out.join("\n");
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
