import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import { FIGURE_KINDS, FigureKind, TTEST_THRESHOLD } from "../src/charts.js";
import { SchemaError, parseExperimentCsv } from "../src/csv.js";
import { render } from "../src/render.js";

const GOLDEN: Record<FigureKind, string> = {
  entropy: "entropy.csv",
  eviction_rate: "evict.csv",
  ttest: "ttest.csv",
  ppp_tpr: "ppp_tpr.csv",
  ppp_cost: "ppp_cost.csv",
  vc_noise: "vcnoise.csv",
  trace: "trace.csv",
};

const goldenPath = (kind: FigureKind) => join(__dirname, "..", "golden", GOLDEN[kind]);
const outDir = mkdtempSync(join(tmpdir(), "figures-"));

describe("rendering the golden CSVs", () => {
  for (const kind of FIGURE_KINDS) {
    it(`renders a ${kind} chart`, () => {
      const out = join(outDir, `${kind}.svg`);
      const svg = render({ csvPath: goldenPath(kind), figureKind: kind, outputPath: out });
      expect(svg.startsWith("<svg ")).toBe(true);
      expect(svg).toContain("</svg>");
      expect(readFileSync(out, "utf8")).toBe(svg);
    });
  }

  it("is byte-stable across re-renders", () => {
    for (const kind of FIGURE_KINDS) {
      const a = join(outDir, `${kind}-a.svg`);
      const b = join(outDir, `${kind}-b.svg`);
      render({ csvPath: goldenPath(kind), figureKind: kind, outputPath: a });
      render({ csvPath: goldenPath(kind), figureKind: kind, outputPath: b });
      expect(readFileSync(a)).toStrictEqual(readFileSync(b));
    }
  });

  it("draws the 4.5 decision threshold on the t-test chart", () => {
    const svg = render({
      csvPath: goldenPath("ttest"),
      figureKind: "ttest",
      outputPath: join(outDir, "ttest-threshold.svg"),
    });
    expect(svg).toContain('class="threshold"');
    expect(svg).toContain(`>${TTEST_THRESHOLD}</text>`);
  });
});

describe("schema validation", () => {
  it("rejects a CSV without a schema comment", () => {
    expect(() => parseExperimentCsv("model,bits\nA,1\n")).toThrow(SchemaError);
  });

  it("rejects an empty CSV body", () => {
    expect(() => parseExperimentCsv("#chamsim/entropy/v1\n")).toThrow(/no data rows/);
  });

  it("rejects a kind/schema mismatch", () => {
    expect(() =>
      render({
        csvPath: goldenPath("trace"),
        figureKind: "entropy",
        outputPath: join(outDir, "mismatch.svg"),
      }),
    ).toThrow(/schema chamsim\/trace\/v1 not usable/);
  });

  it("rejects an unknown figure kind", () => {
    const p = join(outDir, "tiny.csv");
    writeFileSync(p, "#chamsim/entropy/v1\nmodel,bits\nA,1\n");
    expect(() =>
      render({ csvPath: p, figureKind: "pie" as never, outputPath: join(outDir, "x.svg") }),
    ).toThrow(/unknown figure kind/);
  });

  it("rejects rows with missing numeric fields", () => {
    const p = join(outDir, "broken.csv");
    writeFileSync(
      p,
      "#chamsim/entropy/v1\nmodel,s,w,d,w_vc,trials,seed,bits,plugin_bits,ci_low,ci_high\nA,16,4,4,0,1,1,oops,1,1,1\n",
    );
    expect(() =>
      render({ csvPath: p, figureKind: "entropy", outputPath: join(outDir, "y.svg") }),
    ).toThrow(/non-numeric field "bits"/);
  });
});
