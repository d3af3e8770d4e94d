import init, { tradeoff_curves, oracle_leakage, age_path, closed_form_age } from "./pkg/aoileak_wasm.js";

const CURVES = [
  { name: "MBT alpha=1", color: "#1f77b4" },
  { name: "MBT best alpha", color: "#9467bd" },
  { name: "RAD", color: "#ff7f0e" },
  { name: "DAD", color: "#2ca02c" },
];

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function axes(ctx, w, h, pad, xr, yr, xl, yl) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#000";
  ctx.fillStyle = "#000";
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad, h - pad);
  ctx.stroke();
  ctx.fillText(xl, w / 2, h - 8);
  ctx.fillText(yl, 4, pad - 8);
  for (let i = 0; i <= 4; i++) {
    const xv = xr[0] + (i / 4) * (xr[1] - xr[0]);
    const yv = yr[0] + (i / 4) * (yr[1] - yr[0]);
    ctx.fillText(xv.toFixed(2), pad + (i / 4) * (w - 2 * pad) - 10, h - pad + 14);
    ctx.fillText(yv.toFixed(1), 4, h - pad - (i / 4) * (h - 2 * pad));
  }
  return (x, y) => [
    pad + ((x - xr[0]) / (xr[1] - xr[0])) * (w - 2 * pad),
    h - pad - ((y - yr[0]) / (yr[1] - yr[0])) * (h - 2 * pad),
  ];
}

function showError(el, e) {
  el.textContent = String(e);
  el.className = "err";
}

function plotCurves() {
  const legend = $("tc-legend");
  legend.className = "";
  let flat;
  try {
    flat = tradeoff_curves(num("tc-lambda"), 100, 39);
  } catch (e) {
    return showError(legend, e);
  }
  const series = CURVES.map(() => []);
  for (let i = 0; i < flat.length; i += 3) series[flat[i]].push([flat[i + 1], flat[i + 2]]);
  const xs = series.flat().map((p) => p[0]);
  const ys = series.flat().map((p) => p[1]);
  const yMax = Math.min(Math.max(...ys), 4 * Math.min(...ys) + 10);
  const canvas = $("tc-canvas");
  const ctx = canvas.getContext("2d");
  const map = axes(ctx, canvas.width, canvas.height, 40, [0, Math.max(...xs)], [0, yMax], "leakage rate (nats/slot)", "age (slots)");
  series.forEach((pts, k) => {
    ctx.strokeStyle = CURVES[k].color;
    ctx.fillStyle = CURVES[k].color;
    pts.sort((a, b) => a[0] - b[0]);
    if (k === 3) {
      for (const [x, y] of pts) if (y <= yMax) ctx.fillRect(...map(x, y).map((v) => v - 2), 4, 4);
      return;
    }
    ctx.beginPath();
    let started = false;
    for (const [x, y] of pts) {
      if (y > yMax) { started = false; continue; }
      const [px, py] = map(x, y);
      started ? ctx.lineTo(px, py) : ctx.moveTo(px, py);
      started = true;
    }
    ctx.stroke();
  });
  legend.innerHTML = CURVES.map((c) => `<span style="color:${c.color}">&#9632; ${c.name}</span>`).join(" &nbsp; ");
}

function enumerate() {
  const out = $("ol-out");
  out.className = "";
  const n = num("ol-n");
  let v;
  try {
    v = oracle_leakage($("ol-policy").value, num("ol-param"), n);
  } catch (e) {
    return showError(out, e);
  }
  const lines = [
    `exact leakage    ${v[0].toFixed(9)} nats`,
    `closed form      ${v[1].toFixed(9)} nats`,
    `support size     ${v[2]}`,
    "",
    "y        max_x P(y|x)",
  ];
  const shown = Math.min(v.length - 3, 64);
  for (let i = 0; i < shown; i++) lines.push(`${i.toString(2).padStart(n, "0")}  ${v[3 + i].toPrecision(6)}`);
  if (v.length - 3 > shown) lines.push(`... ${v.length - 3 - shown} more`);
  out.textContent = lines.join("\n");
}

function simulate() {
  const stats = $("ap-stats");
  stats.className = "";
  const [policy, lambda, param] = [$("ap-policy").value, num("ap-lambda"), num("ap-param")];
  let path;
  try {
    path = age_path(policy, lambda, param, num("ap-slots"), num("ap-seed"));
  } catch (e) {
    return showError(stats, e);
  }
  const seen = path.filter((a) => !Number.isNaN(a));
  const canvas = $("ap-canvas");
  const ctx = canvas.getContext("2d");
  const map = axes(ctx, canvas.width, canvas.height, 40, [0, path.length], [0, Math.max(...seen, 1)], "slot", "age");
  ctx.strokeStyle = "#1f77b4";
  ctx.beginPath();
  let started = false;
  path.forEach((a, t) => {
    if (Number.isNaN(a)) return;
    const [x, y] = map(t, a);
    started ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
    started = true;
  });
  ctx.stroke();
  const mean = seen.reduce((s, a) => s + a, 0) / Math.max(seen.length, 1);
  let target = "n/a";
  try {
    target = closed_form_age(policy, lambda, param).toFixed(4);
  } catch (e) {
    target = String(e);
  }
  stats.textContent = `path mean ${mean.toFixed(4)} over ${seen.length} slots; closed form ${target}`;
}

await init();
$("tc-run").onclick = plotCurves;
$("ol-run").onclick = enumerate;
$("ap-run").onclick = simulate;
plotCurves();
