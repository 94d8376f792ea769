import init, { trustTrajectory, convertRole, runScenario, sampleScenario } from "./pkg/xdac_wasm.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];
const $ = (id) => document.getElementById(id);

// series: [{name, points: [[x, y], ...]}], y fixed to [-1, 1]
function plot(canvas, legend, series) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 30;
  ctx.clearRect(0, 0, w, h);
  const xmax = Math.max(1, ...series.flatMap((s) => s.points.map((p) => p[0])));
  const xmin = Math.min(0, ...series.flatMap((s) => s.points.map((p) => p[0])));
  const sx = (x) => pad + ((x - xmin) / Math.max(1e-9, xmax - xmin)) * (w - 2 * pad);
  const sy = (y) => h / 2 - y * (h / 2 - pad / 2);
  ctx.strokeStyle = "#ccc";
  ctx.fillStyle = "#666";
  ctx.font = "11px sans-serif";
  for (const y of [-1, -0.5, 0, 0.5, 1]) {
    ctx.beginPath();
    ctx.moveTo(pad, sy(y));
    ctx.lineTo(w - pad, sy(y));
    ctx.stroke();
    ctx.fillText(y.toFixed(1), 2, sy(y) + 4);
  }
  legend.innerHTML = "";
  series.forEach((s, i) => {
    const c = COLORS[i % COLORS.length];
    ctx.strokeStyle = c;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    s.points.forEach(([x, y], j) => (j ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
    ctx.stroke();
    const tag = document.createElement("span");
    tag.style.color = c;
    tag.textContent = s.name;
    legend.appendChild(tag);
  });
}

function drawTrajectory() {
  try {
    const pts = JSON.parse(
      trustTrajectory(+$("alpha").value, +$("beta").value, +$("gamma").value, $("profile").value,
        +$("steps").value, +$("every").value, BigInt($("seed").value || 0)),
    );
    $("trajErr").textContent = "";
    const series = ["ex", "qos", "dtd", "rp", "td"].map((k) => ({ name: k, points: pts.map((p) => [p.k, p[k]]) }));
    plot($("trajPlot"), $("trajLegend"), series);
  } catch (e) {
    $("trajErr").textContent = String(e.message ?? e);
  }
}

function showConversion() {
  try {
    const r = JSON.parse(convertRole($("outerRole").value, $("floor").checked));
    const via = r.via ? `${r.via.outer_role} -> ${r.via.local_role} (${r.via.kind})` : "-";
    $("convOut").textContent = [
      `policy      ${r.policy}`,
      `candidates  ${r.candidates.join(", ") || "-"}`,
      `via         ${via}`,
      `converted   ${r.local_role ?? "no conversion (deny)"}`,
    ].join("\n");
  } catch (e) {
    $("convOut").textContent = String(e.message ?? e);
  }
}

function runIt() {
  let out;
  try {
    out = JSON.parse(runScenario($("scenario").value));
    $("scenErr").textContent = "";
  } catch (e) {
    $("scenErr").textContent = String(e.message ?? e);
    return;
  }
  const byName = new Map();
  for (const p of out.trajectories) {
    if (p.kind !== "pair_td") continue;
    const name = `TD(${p.domain},${p.subject})`;
    if (!byName.has(name)) byName.set(name, []);
    byName.get(name).push([p.epoch, p.value]);
  }
  plot($("pairPlot"), $("pairLegend"), [...byName].map(([name, points]) => ({ name, points })));

  const rows = ["<tr><th>seq</th><th>requester</th><th>host</th><th>resource</th><th>outcome</th><th>trust</th></tr>"];
  for (const ev of out.trace) {
    if (ev.kind !== "local_decision" && ev.kind !== "cross_decision") continue;
    const p = ev.payload;
    const host = ev.kind === "cross_decision" ? p.target : p.requester.split("/")[0];
    const d = p.decision;
    const outcome = d.reason ? `deny (${d.reason})` : "permit";
    rows.push(
      `<tr class="${d.reason ? "deny" : ""}"><td>${ev.seq}</td><td>${p.requester}</td><td>${host}</td>` +
        `<td>${p.resource}</td><td>${outcome}</td><td>${d.trust_at_decision.toFixed(4)}</td></tr>`,
    );
  }
  $("decisions").innerHTML = rows.join("");
}

await init();
for (const id of ["alpha", "beta", "gamma", "profile", "steps", "every", "seed"]) $(id).addEventListener("input", drawTrajectory);
$("outerRole").addEventListener("change", showConversion);
$("floor").addEventListener("change", showConversion);
$("runBtn").addEventListener("click", runIt);
$("scenario").value = sampleScenario();
drawTrajectory();
showConversion();
runIt();
