import init, { analyze, threshold_curve, simulate_excess_paths } from "./pkg/scapm_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function showError(el, e) {
  el.textContent = String(e.message ?? e);
  el.className = "err";
}

function axes(ctx, w, h, pad, xMax, yMin, yMax, yLabel) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#888";
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.beginPath();
  ctx.moveTo(pad, pad / 2);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad, h - pad);
  ctx.stroke();
  for (let i = 0; i <= 4; i++) {
    const y = yMin + ((yMax - yMin) * i) / 4;
    ctx.fillText(y.toPrecision(3), 2, h - pad - ((h - 1.5 * pad) * i) / 4 + 4);
    ctx.fillText(((xMax * i) / 4).toPrecision(3), pad + ((w - 2 * pad) * i) / 4 - 8, h - pad + 14);
  }
  ctx.fillText(yLabel, pad + 4, pad / 2 + 10);
  const sx = (x) => pad + ((w - 2 * pad) * x) / xMax;
  const sy = (y) => h - pad - ((h - 1.5 * pad) * (y - yMin)) / (yMax - yMin || 1);
  return { sx, sy };
}

function line(ctx, xs, ys, sx, sy, color, width = 1.5) {
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(ys[i])) : ctx.moveTo(sx(x), sy(ys[i]))));
  ctx.stroke();
  ctx.lineWidth = 1;
}

function drawThresholds(discNorm) {
  const T = num("horizon");
  const c = JSON.parse(threshold_curve(num("eps"), num("delta"), discNorm, T, 200));
  const canvas = $("thresholds");
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 40;
  const yMax = Math.min(Math.max(discNorm * 1.5, c.weak[20]), c.loose[0]);
  const { sx, sy } = axes(ctx, w, h, pad, T, 0, yMax, "norm");
  const clip = (ys) => ys.map((y) => Math.min(y, yMax));
  line(ctx, c.t, clip(c.loose), sx, sy, "#aaa");
  line(ctx, c.t, clip(c.improved), sx, sy, "#2ca02c");
  line(ctx, c.t, clip(c.weak), sx, sy, "#1f77b4", 2);
  line(ctx, [0, T], [discNorm, discNorm], sx, sy, "#d62728", 2);
  line(ctx, c.t, c.probability.map((p) => p * yMax), sx, sy, "#9467bd");
  ctx.fillStyle = "#9467bd";
  ctx.fillText("1", w - pad + 4, sy(yMax) + 4);
  ctx.fillText("0", w - pad + 4, sy(0) + 4);
}

function runAnalyze() {
  const out = $("report");
  try {
    const r = JSON.parse(analyze($("config").value, num("eps"), num("delta"), num("horizon")));
    const p = r.risk_profile, hr = r.horizon_report;
    const fmt = (xs) => xs.map((x) => x.toFixed(5)).join(", ");
    out.className = "";
    out.textContent = [
      `securities         ${r.labels.join(", ")}`,
      `theta              ${fmt(p.theta)}`,
      `theta - sigma^0    ${fmt(p.disc)}   (norm ${Math.sqrt(p.disc_norm_sq).toFixed(5)})`,
      `SCAPM residuals    ${fmt(p.scapm_residuals)}`,
      `growth deficits    ${fmt(p.deficits)}`,
      `optimal growth     ${p.optimal_growth_rate.toFixed(5)}`,
      `portfolio weights  ${fmt(r.replication_weights)}`,
      ``,
      `at T = ${hr.horizon_t}: weak threshold ${hr.threshold_weak.toFixed(5)}, ` +
        `P(beat index by 1/delta) = ${hr.p_outperform.toFixed(4)} -> ${hr.verdict}`,
    ].join("\n");
    drawThresholds(Math.sqrt(p.disc_norm_sq));
  } catch (e) {
    showError(out, e);
  }
}

function runSimulate() {
  const note = $("simnote");
  try {
    const s = JSON.parse(
      simulate_excess_paths($("config").value, num("horizon"), num("steps"), num("paths"), BigInt(num("seed")))
    );
    const canvas = $("paths-canvas");
    const ctx = canvas.getContext("2d");
    const all = s.paths.flat().concat(s.expected);
    const { sx, sy } = axes(ctx, canvas.width, canvas.height, 40, s.t[s.t.length - 1],
      Math.min(...all), Math.max(...all), "log K - log S0");
    s.paths.forEach((p) => line(ctx, s.t, p, sx, sy, "rgba(31,119,180,0.35)", 1));
    line(ctx, s.t, s.expected, sx, sy, "#d62728", 2.5);
    const ln = Math.log(1 / num("delta"));
    line(ctx, [0, s.t[s.t.length - 1]], [ln, ln], sx, sy, "#9467bd", 1);
    note.className = "";
    note.textContent = `red: mean 0.5 * int |disc|^2 dt; purple: ln(1/delta); ` +
      `max identity residual ${s.max_identity_residual.toExponential(1)}`;
  } catch (e) {
    showError(note, e);
  }
}

await init();
$("analyze").addEventListener("click", runAnalyze);
$("simulate").addEventListener("click", runSimulate);
runAnalyze();
runSimulate();
