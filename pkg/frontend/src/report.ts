/** Render nlbalance CSV/JSON artifacts into SVG figures and an HTML
 * index.
 *
 * Reads exactly the runner's schema: `summary.json` plus one CSV per
 * diagnostic (convergence tables `s,t,distance,slope,bound,pass`,
 * check tables `check,parameter,value,bound,pass`, and the functional
 * trace).  Every slope annotation is recomputed from the raw CSV and
 * must match the recorded value to 1e-9, else the figure errors out
 * and the exit status is nonzero.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { parseCsv, numericColumn, column, Table } from "./csv.js";
import { fitSlope, SLOPE_RECIPES } from "./slope.js";
import { plot, escapeXml, Series } from "./svg.js";

export interface Summary {
  schema_version: number;
  scenario: string;
  seed: number;
  model: { id: string; params?: Record<string, unknown> };
  schedule: Record<string, unknown>;
  diagnostics: Record<string, DiagnosticEntry>;
  pass: boolean;
}

export interface DiagnosticEntry {
  csv: string;
  kind: string;
  pass: boolean;
  slope?: number;
  checks: { id: string; parameter: string; value: number; bound: string; pass: boolean }[];
}

export interface RenderResult {
  figures: { name: string; file: string; kind: string; slope?: number }[];
  errors: string[];
  indexFile: string;
}

const SLOPE_TOLERANCE = 1e-9;

/** Theoretical orders drawn as guide lines on the log-log figures. */
const EXPECTED_SLOPES: Record<string, number> = {
  commutation: 2, // ||S_t P_t u - P_t S_t u|| = O(t^2)
  tangent: 1,     // tangent quotient decays linearly in t
  sensitivity: 1, // distance linear in the parameter gap
  limit: 1,       // Cauchy differences decay ~ first order in s
};

export function render(artifactDir: string, outDir: string): RenderResult {
  fs.mkdirSync(outDir, { recursive: true });
  const errors: string[] = [];
  const figures: RenderResult["figures"] = [];
  const summaryPath = path.join(artifactDir, "summary.json");
  let summary: Summary | null = null;
  if (fs.existsSync(summaryPath)) {
    summary = JSON.parse(fs.readFileSync(summaryPath, "utf8")) as Summary;
  }
  const entries = summary ? Object.entries(summary.diagnostics) : [];
  for (const [name, entry] of entries) {
    try {
      const csvPath = path.join(artifactDir, entry.csv);
      const table = parseCsv(fs.readFileSync(csvPath, "utf8"));
      const svg = renderDiagnostic(name, entry, table);
      const file = `${name}.svg`;
      fs.writeFileSync(path.join(outDir, file), svg);
      figures.push({ name, file, kind: entry.kind, slope: entry.slope });
    } catch (err) {
      errors.push(`${name}: ${(err as Error).message}`);
    }
  }
  const indexFile = path.join(outDir, "index.html");
  fs.writeFileSync(indexFile, buildIndex(summary, figures, errors));
  return { figures, errors, indexFile };
}

function renderDiagnostic(
  name: string,
  entry: DiagnosticEntry,
  table: Table,
): string {
  const recipe = SLOPE_RECIPES[entry.kind];
  if (recipe) {
    const x = numericColumn(table, recipe.x);
    const y = numericColumn(table, recipe.y);
    const recorded = numericColumn(table, "slope");
    const refit = fitSlope(x, y, recipe.discardCoarsest);
    for (const r of recorded) {
      if (Math.abs(r - refit) > SLOPE_TOLERANCE) {
        throw new Error(
          `slope mismatch: recorded ${r}, recomputed ${refit} (|diff| > 1e-9)`,
        );
      }
    }
    const series: Series[] = [
      { label: entry.kind, x, y, color: "#1f5fa8" },
    ];
    const mid = Math.floor(x.length / 2);
    const expected = EXPECTED_SLOPES[entry.kind];
    return plot(
      `${name}: ${entry.kind} (log-log)`,
      recipe.x,
      recipe.y,
      series,
      {
        logx: true,
        logy: true,
        guide: {
          slope: expected ?? refit,
          through: [x[mid], y[mid]],
          label: expected !== undefined
            ? `guide slope ${expected}`
            : `fit slope ${refit.toFixed(3)}`,
        },
        annotations: [
          `slope = ${refit.toFixed(9)} (recorded ${entry.slope?.toFixed(9) ?? "n/a"})`,
          entry.pass ? "checks: pass" : "checks: FAIL",
        ],
      },
    );
  }
  if (entry.kind === "trace") {
    return renderTrace(name, entry, table);
  }
  // check-style CSVs: bar-ish scatter of value per row
  const value = numericColumn(table, "value");
  const x = value.map((_, i) => i + 1);
  return plot(
    `${name}: ${entry.kind}`,
    "row",
    "value",
    [{ label: "value", x, y: value, color: "#a8571f" }],
    {
      annotations: [entry.pass ? "checks: pass" : "checks: FAIL"],
    },
  );
}

function renderTrace(
  name: string,
  entry: DiagnosticEntry,
  table: Table,
): string {
  const t = numericColumn(table, "time");
  const V = numericColumn(table, "V");
  const ups = numericColumn(table, "ups_src");
  const bound = numericColumn(table, "bound");
  // shade the intervals on which Upsilon decreases
  const shade: { x0: number; x1: number }[] = [];
  for (let i = 1; i < t.length; i++) {
    if (ups[i] < ups[i - 1]) shade.push({ x0: t[i - 1], x1: t[i] });
  }
  return plot(
    `${name}: Glimm functional trace`,
    "t",
    "functional",
    [
      { label: "V", x: t, y: V, color: "#1f5fa8" },
      { label: "Upsilon", x: t, y: ups, color: "#a81f2f" },
      { label: "bound", x: t, y: bound, color: "#888888" },
    ],
    {
      shade,
      annotations: [entry.pass ? "admission: pass" : "admission: FAIL"],
    },
  );
}

function buildIndex(
  summary: Summary | null,
  figures: RenderResult["figures"],
  errors: string[],
): string {
  const head = `<!doctype html>
<html lang="en"><head><meta charset="utf-8"><title>nlbalance report</title>
<style>body{font-family:sans-serif;margin:2em;max-width:62em}
figure{border:1px solid #ccc;padding:1em;margin:1em 0}
.fail{color:#a81f2f;font-weight:bold}.pass{color:#14522d}
table{border-collapse:collapse}td,th{border:1px solid #bbb;padding:4px 8px}
</style></head><body>`;
  const parts: string[] = [head, "<h1>nlbalance verification report</h1>"];
  if (summary) {
    parts.push(
      `<p>scenario <code>${escapeXml(summary.scenario)}</code>, model <code>${escapeXml(summary.model.id)}</code>, seed ${summary.seed}, overall ` +
        (summary.pass
          ? `<span class="pass">PASS</span>`
          : `<span class="fail">FAIL</span>`) +
        `</p>`,
    );
    parts.push("<table><tr><th>diagnostic</th><th>kind</th><th>status</th><th>checks</th></tr>");
    for (const [name, entry] of Object.entries(summary.diagnostics)) {
      const checks = entry.checks
        .map(
          (c) =>
            `${escapeXml(c.id)}: value ${c.value} vs &ldquo;${escapeXml(c.bound)}&rdquo; (${c.pass ? "pass" : "fail"})`,
        )
        .join("<br>");
      parts.push(
        `<tr><td><a href="#${name}">${escapeXml(name)}</a></td><td>${escapeXml(entry.kind)}</td>` +
          `<td class="${entry.pass ? "pass" : "fail"}">${entry.pass ? "pass" : "FAIL"}</td><td>${checks}</td></tr>`,
      );
    }
    parts.push("</table>");
  } else {
    parts.push("<p>no summary.json found: zero diagnostics.</p>");
  }
  for (const fig of figures) {
    parts.push(
      `<figure id="${fig.name}"><img src="${fig.file}" alt="${fig.name}">` +
        `<figcaption>${escapeXml(fig.name)} (${escapeXml(fig.kind)})` +
        (fig.slope !== undefined ? `, slope ${fig.slope}` : "") +
        `</figcaption></figure>`,
    );
  }
  if (errors.length) {
    parts.push("<h2 class='fail'>errors</h2><ul>");
    for (const e of errors) parts.push(`<li class="fail">${escapeXml(e)}</li>`);
    parts.push("</ul>");
  }
  parts.push("</body></html>");
  return parts.join("\n");
}

export function main(argv: string[]): number {
  const args = argv.slice(2);
  if (args.length < 1) {
    console.error("usage: report <artifact-dir> [--out DIR]");
    return 2;
  }
  const artifactDir = args[0];
  let outDir = "report";
  const outIdx = args.indexOf("--out");
  if (outIdx >= 0 && args[outIdx + 1]) {
    outDir = args[outIdx + 1];
  }
  const result = render(artifactDir, outDir);
  console.log(
    `rendered ${result.figures.length} figure(s) into ${outDir}; index at ${result.indexFile}`,
  );
  for (const e of result.errors) {
    console.error(`error: ${e}`);
  }
  return result.errors.length ? 1 : 0;
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("report.js") || entry.endsWith("report.ts")) {
  process.exit(main(process.argv));
}
