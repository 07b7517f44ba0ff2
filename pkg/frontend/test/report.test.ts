import { describe, expect, it } from "vitest";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { render, main, Summary } from "../src/report.js";
import { fitSlope } from "../src/slope.js";
import { parseCsv, numericColumn } from "../src/csv.js";

const here = path.dirname(fileURLToPath(import.meta.url));
const FIX_SCALAR = path.join(here, "fixtures", "scalar");
const FIX_SENS = path.join(here, "fixtures", "sens");

function tmpdir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "nlb-report-"));
}

describe("slope fitting", () => {
  it("recovers an exact power law", () => {
    const t = [0.4, 0.2, 0.1, 0.05];
    const v = t.map((x) => 3 * x * x);
    expect(fitSlope(t, v, false)).toBeCloseTo(2.0, 12);
  });

  it("discards the coarsest point when asked", () => {
    const t = [0.4, 0.2, 0.1, 0.05];
    const v = t.map((x) => 3 * x * x);
    v[0] *= 10; // polluted coarsest sample
    expect(fitSlope(t, v, true)).toBeCloseTo(2.0, 12);
    expect(Math.abs(fitSlope(t, v, false) - 2.0)).toBeGreaterThan(0.1);
  });
});

describe("acceptance 11: slope regeneration and index", () => {
  it("regenerates every slope annotation to 1e-9", () => {
    for (const dir of [FIX_SCALAR, FIX_SENS]) {
      const summary = JSON.parse(
        fs.readFileSync(path.join(dir, "summary.json"), "utf8"),
      ) as Summary;
      for (const [, entry] of Object.entries(summary.diagnostics)) {
        if (entry.slope === undefined || entry.slope === null) continue;
        const table = parseCsv(
          fs.readFileSync(path.join(dir, entry.csv), "utf8"),
        );
        const xcol = entry.kind === "sensitivity" ? "s"
          : entry.kind === "limit" ? "s" : "t";
        const refit = fitSlope(
          numericColumn(table, xcol),
          numericColumn(table, "distance"),
          entry.kind !== "sensitivity",
        );
        expect(Math.abs(refit - entry.slope)).toBeLessThanOrEqual(1e-9);
        for (const rec of numericColumn(table, "slope")) {
          expect(Math.abs(refit - rec)).toBeLessThanOrEqual(1e-9);
        }
      }
    }
  });

  it("renders figures and an index listing every diagnostic", () => {
    const out = tmpdir();
    const result = render(FIX_SCALAR, out);
    expect(result.errors).toEqual([]);
    const summary = JSON.parse(
      fs.readFileSync(path.join(FIX_SCALAR, "summary.json"), "utf8"),
    ) as Summary;
    const names = Object.keys(summary.diagnostics);
    expect(result.figures.map((f) => f.name).sort()).toEqual(names.sort());
    const index = fs.readFileSync(result.indexFile, "utf8");
    for (const name of names) {
      expect(index).toContain(name);
      expect(fs.existsSync(path.join(out, `${name}.svg`))).toBe(true);
    }
    // verbatim check bounds surface in the index
    expect(index).toContain("monotone decreasing");
  });

  it("is a pure function of the artifact directory", () => {
    const out1 = tmpdir();
    const out2 = tmpdir();
    render(FIX_SCALAR, out1);
    render(FIX_SCALAR, out2);
    for (const f of fs.readdirSync(out1)) {
      expect(fs.readFileSync(path.join(out1, f), "utf8")).toEqual(
        fs.readFileSync(path.join(out2, f), "utf8"),
      );
    }
  });
});

describe("edge cases", () => {
  it("empty directory yields an index with zero entries and exit 0", () => {
    const empty = tmpdir();
    const out = tmpdir();
    const code = main(["node", "report.js", empty, "--out", out]);
    expect(code).toBe(0);
    const index = fs.readFileSync(path.join(out, "index.html"), "utf8");
    expect(index).toContain("zero diagnostics");
  });

  it("flags a tampered slope column", () => {
    const dir = tmpdir();
    for (const f of fs.readdirSync(FIX_SCALAR)) {
      fs.copyFileSync(path.join(FIX_SCALAR, f), path.join(dir, f));
    }
    const csv = path.join(dir, "commutation.csv");
    const table = fs.readFileSync(csv, "utf8");
    const lines = table.split("\n");
    const cells = lines[1].split(",");
    cells[3] = String(Number(cells[3]) + 1e-6); // corrupt recorded slope
    lines[1] = cells.join(",");
    fs.writeFileSync(csv, lines.join("\n"));
    const out = tmpdir();
    const result = render(dir, out);
    expect(result.errors.length).toBe(1);
    expect(result.errors[0]).toContain("slope mismatch");
    const code = main(["node", "report.js", dir, "--out", tmpdir()]);
    expect(code).toBe(1);
  });

  it("reports malformed CSV per file, nonzero exit", () => {
    const dir = tmpdir();
    for (const f of fs.readdirSync(FIX_SCALAR)) {
      fs.copyFileSync(path.join(FIX_SCALAR, f), path.join(dir, f));
    }
    fs.writeFileSync(path.join(dir, "limit.csv"), "s,t\n1,2,3\n");
    const out = tmpdir();
    const result = render(dir, out);
    expect(result.errors.length).toBe(1);
    expect(result.errors[0]).toContain("limit");
    // the other figures still render
    expect(result.figures.length).toBe(3);
  });

  it("trace figure shades Upsilon decrease and plots the bound", () => {
    const out = tmpdir();
    render(FIX_SCALAR, out);
    const svg = fs.readFileSync(path.join(out, "trace.svg"), "utf8");
    expect(svg).toContain("Upsilon");
    expect(svg).toContain("bound");
  });
});
