import init, { analyzeSql, linkGraph, renderPrompt } from "./pkg/dcg_web.js";

const $ = (id) => document.getElementById(id);
const COLORS = {
  AttentionMatchTable: "#d62728",
  AttentionMatchColumn: "#ff7f0e",
  ExactNameMatch: "#2ca02c",
  PartialNameMatch: "#98df8a",
  ValueMatch: "#9467bd",
  ColumnOfTable: "#bbb",
  ForeignKey: "#1f77b4",
  PrimaryKey: "#17becf",
  SameTable: "#eee",
};
let catalog = "";

function show(el, f) {
  try {
    el.classList.remove("err");
    f();
  } catch (e) {
    el.classList.add("err");
    el.textContent = String(e.message || e);
  }
}

function analyze() {
  show($("analysis"), () => {
    const r = JSON.parse(analyzeSql($("sql-a").value, $("sql-b").value));
    $("analysis").textContent = JSON.stringify(r, null, 2);
  });
}

function svgEl(name, attrs, text) {
  const e = document.createElementNS("http://www.w3.org/2000/svg", name);
  for (const [k, v] of Object.entries(attrs)) e.setAttribute(k, v);
  if (text !== undefined) e.textContent = text;
  return e;
}

function drawGraph() {
  for (const id of ["tt", "tc", "th"]) $(id + "-v").textContent = $(id).value;
  show($("graph-info"), () => {
    const g = JSON.parse(
      linkGraph(catalog, $("values").value, $("g-question").value, +$("tt").value, +$("tc").value, +$("th").value),
    );
    const svg = $("graph");
    svg.replaceChildren();
    // tokens on the left, tables in the middle, columns on the right
    const cols = { token: [], table: [], column: [] };
    g.nodes.forEach((n, i) => cols[n.kind].push(i));
    const x = { token: 80, table: 430, column: 760 };
    const rows = Math.max(...Object.values(cols).map((c) => c.length), 1);
    const step = 22;
    svg.setAttribute("height", rows * step + 30);
    const pos = [];
    for (const [kind, ids] of Object.entries(cols)) {
      ids.forEach((id, k) => (pos[id] = [x[kind], 20 + k * step]));
    }
    for (const e of g.edges) {
      if (e.type === "SameTable") continue;
      const [x1, y1] = pos[e.src];
      const [x2, y2] = pos[e.dst];
      const line = svgEl("line", { x1, y1, x2, y2, stroke: COLORS[e.type] || "#999", "stroke-width": 1.5 });
      line.appendChild(svgEl("title", {}, e.type));
      svg.appendChild(line);
    }
    g.nodes.forEach((n, i) => {
      const [cx, cy] = pos[i];
      svg.appendChild(svgEl("circle", { cx, cy, r: 4, fill: "#333" }));
      const anchor = n.kind === "token" ? "end" : "start";
      svg.appendChild(svgEl("text", { x: cx + (anchor === "end" ? -8 : 8), y: cy + 4, "text-anchor": anchor }, n.label));
    });
    const counts = {};
    for (const e of g.edges) counts[e.type] = (counts[e.type] || 0) + 1;
    $("graph-info").textContent =
      `kept ${g.kept_tables} tables, ${g.kept_columns} columns\n` +
      Object.entries(counts).map(([t, c]) => `${t}: ${c}`).join("\n") +
      (g.value_matches.length ? "\nvalues: " + g.value_matches.map((m) => `${m.column} [${m.values}]`).join("; ") : "");
  });
}

function render() {
  show($("prompt"), () => {
    const r = JSON.parse(renderPrompt(catalog, $("values").value, $("p-question").value, $("demos").value));
    $("prompt").textContent = `# demo categories: ${r.categories.join(", ") || "none"}, ~${r.token_estimate} tokens\n\n${r.prompt}`;
  });
}

async function main() {
  await init();
  catalog = await (await fetch("world.json")).text();
  $("status").textContent = "ready";
  $("legend").replaceChildren(
    ...Object.entries(COLORS)
      .filter(([t]) => t !== "SameTable")
      .map(([t, c]) => Object.assign(document.createElement("span"), { textContent: t, style: `color:${c}` })),
  );
  $("analyze").onclick = analyze;
  $("render").onclick = render;
  for (const id of ["tt", "tc", "th", "g-question", "values"]) $(id).oninput = drawGraph;
  analyze();
  drawGraph();
  render();
}

main().catch((e) => ($("status").textContent = "failed to load: " + e));
