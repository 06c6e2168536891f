import init, { single_photon_curves, noon_curves, compile_mesh } from "./pkg/cpasim_web.js";

const COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];
const POINTS = 361;
const $ = (id) => document.getElementById(id);

function plot(canvas, xs, series, yMax) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 36;
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#444";
  ctx.font = "12px sans-serif";
  ctx.beginPath();
  ctx.moveTo(pad, 8);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - 8, h - pad);
  ctx.stroke();
  const x = (v) => pad + (v / xs[xs.length - 1]) * (w - pad - 8);
  const y = (v) => h - pad - (v / yMax) * (h - pad - 8);
  ["0", "π", "2π"].forEach((t, i) => ctx.fillText(t, x((i * xs[xs.length - 1]) / 2) - 4, h - pad + 16));
  ctx.fillText(yMax.toFixed(2), 2, 16);
  ctx.fillText("0", 20, h - pad);
  series.forEach((ys, k) => {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.lineWidth = 2;
    ctx.beginPath();
    ys.forEach((v, i) => (i ? ctx.lineTo(x(xs[i]), y(v)) : ctx.moveTo(x(xs[i]), y(v))));
    ctx.stroke();
  });
}

function render() {
  const kind = $("kind").value;
  const alpha = parseFloat($("alpha").value);
  $("alpha-out").textContent = alpha.toFixed(3);
  $("error").textContent = "";
  try {
    const fn = $("input").value === "noon" ? noon_curves : single_photon_curves;
    const c = JSON.parse(fn(kind, alpha, POINTS));
    $("legend").innerHTML = c.labels
      .map((l, k) => `<span style="color:${COLORS[k % COLORS.length]}">■ |${l}⟩</span>`)
      .join("");
    plot($("prob"), c.phis, c.probabilities, 1);
    plot($("fisher"), c.phis, [c.fisher_total], Math.max(1, Math.ceil(c.fisher_max)));
    $("fisher-max").textContent = c.fisher_max.toFixed(4);

    const m = JSON.parse(compile_mesh(kind, alpha));
    $("mesh").querySelector("tbody").innerHTML = m.mzis
      .map((z, i) => `<tr><td>${i + 1}</td><td>${z.modes.join("–")}</td><td>${z.layer}</td><td>${z.theta.toFixed(5)}</td><td>${z.phi.toFixed(5)}</td></tr>`)
      .join("");
    $("phases").textContent = m.output_phases.map((d) => d.toFixed(5)).join(", ");
  } catch (e) {
    $("error").textContent = String(e);
  }
}

await init();
for (const id of ["kind", "alpha", "input"]) $(id).addEventListener("input", render);
render();
