import init, { kde_explorer, forgetting, cl_metrics } from "./pkg/latent_replay_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const fmt = (v, d = 2) => (v === null || v === undefined ? "NA" : v.toFixed(d));
const COLORS = ["#1f77b4", "#d62728", "#2ca02c"];

function report(err) {
  $("status").textContent = String(err);
}

function table(rows) {
  const body = rows
    .map((r) => "<tr>" + r.map((v) => `<td>${typeof v === "number" ? fmt(v, 1) : v ?? ""}</td>`).join("") + "</tr>")
    .join("");
  return `<table>${body}</table>`;
}

function drawKde(view) {
  const c = $("kde-canvas");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const all = view.points.concat(view.samples);
  const xs = all.map((p) => p[0]);
  const ys = all.map((p) => p[1]);
  const [x0, x1, y0, y1] = [Math.min(...xs), Math.max(...xs), Math.min(...ys), Math.max(...ys)];
  const span = Math.max(x1 - x0, y1 - y0) * 1.05;
  const px = (p) => [((p[0] - x0) / span) * c.width, c.height - ((p[1] - y0) / span) * c.height];
  const dot = (p, r, color) => {
    const [x, y] = px(p);
    ctx.fillStyle = color;
    ctx.beginPath();
    ctx.arc(x, y, r, 0, 2 * Math.PI);
    ctx.fill();
  };
  view.points.forEach((p, i) => dot(p, 2, COLORS[view.labels[i]] + "66"));
  view.samples.forEach((p) => dot(p, 2, "#555"));
  const radius = (view.bandwidth / span) * c.width;
  for (const p of view.centers) {
    const [x, y] = px(p);
    ctx.strokeStyle = "#000";
    ctx.beginPath();
    ctx.arc(x, y, radius, 0, 2 * Math.PI);
    ctx.stroke();
    dot(p, 4, "#000");
  }
}

function runKde() {
  try {
    const view = JSON.parse(kde_explorer(num("kde-centers"), num("kde-samples"), num("kde-gmm"), num("kde-spread"), num("kde-seed")));
    drawKde(view);
    $("kde-info").innerHTML =
      `<p>bandwidth ${fmt(view.bandwidth, 3)}</p>` +
      `<p>held-out log-likelihood<br>KDE ${fmt(view.kde_loglik, 3)}<br>GMM ${fmt(view.gmm_loglik, 3)}</p>` +
      `<p class="muted">coloured: real points by class<br>grey: KDE samples<br>circles: centers ± bandwidth</p>`;
  } catch (e) {
    report(e);
  }
}

function drawCurves(runs) {
  const c = $("fg-canvas");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const pad = 30;
  const n = runs[0].first_domain.length;
  const px = (i, v) => [pad + (i / (n - 1)) * (c.width - 2 * pad), c.height - pad - (v / 100) * (c.height - 2 * pad)];
  ctx.strokeStyle = "#ccc";
  ctx.strokeRect(pad, pad, c.width - 2 * pad, c.height - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.fillText("100", 2, pad + 4);
  ctx.fillText("0", 10, c.height - pad + 4);
  ctx.fillText("session", c.width / 2 - 20, c.height - 8);
  runs.forEach((run, k) => {
    ctx.strokeStyle = COLORS[k];
    ctx.beginPath();
    run.first_domain.forEach((v, i) => {
      const [x, y] = px(i, v ?? 0);
      i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    });
    ctx.stroke();
    ctx.fillStyle = COLORS[k];
    ctx.fillText(run.strategy, c.width - pad - 60, pad + 14 + 14 * k);
  });
}

function runForgetting() {
  $("fg-info").textContent = "training…";
  setTimeout(() => {
    try {
      const runs = JSON.parse(forgetting(num("fg-alpha"), num("fg-epochs"), num("fg-seed")));
      drawCurves(runs);
      $("fg-info").innerHTML = runs
        .map((r) => `<h3>${r.strategy}</h3>ACC ${fmt(r.acc)} · ILM ${fmt(r.ilm)} · BWT ${fmt(r.bwt)}` + table(r.matrix))
        .join("");
    } catch (e) {
      report(e);
    }
  }, 10);
}

function runMetrics() {
  try {
    const m = JSON.parse(cl_metrics($("cl-matrix").value));
    $("cl-info").innerHTML = `ACC ${fmt(m.acc)} · ILM ${fmt(m.ilm)} · BWT ${fmt(m.bwt)}`;
  } catch (e) {
    $("cl-info").textContent = String(e);
  }
}

init()
  .then(() => {
    $("status").textContent = "";
    $("kde-run").onclick = runKde;
    $("fg-run").onclick = runForgetting;
    $("cl-run").onclick = runMetrics;
    runKde();
    runMetrics();
  })
  .catch(report);
