// Wires the three panels to the wasm module. No frameworks, one canvas each.

import init, {
  gain_grid_values,
  delta_profile_json,
  run_trials_json,
} from "./pkg/qpurify_web.js";

const $ = (id) => document.getElementById(id);

// diverging colormap: blue (loss) -> white (zero) -> red (gain)
function gainColor(g, maxAbs) {
  const x = Math.max(-1, Math.min(1, g / maxAbs));
  if (x >= 0) {
    const t = 1 - x;
    return [255, Math.round(90 + 165 * t), Math.round(70 + 185 * t)];
  }
  const t = 1 + x;
  return [Math.round(60 + 195 * t), Math.round(110 + 145 * t), 255];
}

// ---------------------------------------------------------------- gain grid
let gridData = null; // { res, values }

function drawGrid() {
  const res = Math.max(41, Math.min(401, Number($("grid-res").value) || 201));
  $("grid-res").value = res;
  gridData = { res, values: gain_grid_values(res) };

  const canvas = $("grid-canvas");
  const ctx = canvas.getContext("2d");
  const n = canvas.width;
  const img = ctx.createImageData(n, n);
  const { values } = gridData;
  let maxAbs = 0;
  for (const v of values) maxAbs = Math.max(maxAbs, Math.abs(v));

  for (let py = 0; py < n; py++) {
    // canvas y grows downward; f2 grows upward
    const j = Math.min(res - 1, Math.round(((n - 1 - py) / (n - 1)) * (res - 1)));
    for (let px = 0; px < n; px++) {
      const i = Math.min(res - 1, Math.round((px / (n - 1)) * (res - 1)));
      const [r, g, b] = gainColor(values[i * res + j], maxAbs);
      const o = 4 * (py * n + px);
      img.data[o] = r;
      img.data[o + 1] = g;
      img.data[o + 2] = b;
      img.data[o + 3] = 255;
    }
  }
  ctx.putImageData(img, 0, 0);

  // symmetric diagonal
  ctx.strokeStyle = "rgba(28,35,48,0.55)";
  ctx.setLineDash([6, 5]);
  ctx.beginPath();
  ctx.moveTo(0, n);
  ctx.lineTo(n, 0);
  ctx.stroke();
  ctx.setLineDash([]);
}

function gridHover(ev) {
  if (!gridData) return;
  const canvas = $("grid-canvas");
  const rect = canvas.getBoundingClientRect();
  const px = ((ev.clientX - rect.left) / rect.width) * canvas.width;
  const py = ((ev.clientY - rect.top) / rect.height) * canvas.height;
  const { res, values } = gridData;
  const i = Math.max(0, Math.min(res - 1, Math.round((px / (canvas.width - 1)) * (res - 1))));
  const j = Math.max(
    0,
    Math.min(res - 1, Math.round(((canvas.height - 1 - py) / (canvas.height - 1)) * (res - 1))),
  );
  const f1 = 0.5 + (0.5 * i) / (res - 1);
  const f2 = 0.5 + (0.5 * j) / (res - 1);
  const g = values[i * res + j];
  $("grid-readout").textContent =
    `F1=${f1.toFixed(4)}  F2=${f2.toFixed(4)}  gain=${g >= 0 ? "+" : ""}${g.toFixed(5)}  ` +
    (g > 0 ? "purify" : "do not purify");
}

// ------------------------------------------------------------ delta profile
let profile = null;

function drawDelta() {
  const canvas = $("delta-canvas");
  const ctx = canvas.getContext("2d");
  const W = canvas.width;
  const H = canvas.height;
  const L = 46;
  const B = 30;
  ctx.clearRect(0, 0, W, H);

  const yMax = profile.delta_max * 1.18;
  const xOf = (f) => L + ((f - 0.5) / 0.5) * (W - L - 8);
  const yOf = (d) => H - B - (d / yMax) * (H - B - 10);

  // axes
  ctx.strokeStyle = "#d8dde8";
  ctx.fillStyle = "#68738a";
  ctx.font = "11px system-ui";
  ctx.beginPath();
  for (let f = 0.5; f <= 1.0001; f += 0.1) {
    ctx.moveTo(xOf(f), H - B);
    ctx.lineTo(xOf(f), 10);
    ctx.fillText(f.toFixed(1), xOf(f) - 8, H - B + 14);
  }
  for (let d = 0; d <= yMax; d += 0.02) {
    ctx.moveTo(L, yOf(d));
    ctx.lineTo(W - 8, yOf(d));
    ctx.fillText(d.toFixed(2), 6, yOf(d) + 4);
  }
  ctx.stroke();

  const curve = (ys, color) => {
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    profile.f.forEach((f, k) => {
      const x = xOf(f);
      const y = yOf(ys[k]);
      if (k === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
  };
  curve(profile.delta_superior, "#2762d9");
  curve(profile.delta_inferior, "#d9622a");

  // universal maximum marker
  ctx.fillStyle = "#1c2330";
  const xs = xOf(profile.f1_star);
  const ys = yOf(profile.delta_max);
  ctx.beginPath();
  ctx.arc(xs, ys, 3.5, 0, 2 * Math.PI);
  ctx.fill();
  ctx.fillText(
    `delta_max=${profile.delta_max.toFixed(4)} at F=${profile.f1_star.toFixed(3)}`,
    xs - 70,
    ys - 10,
  );

  // legend
  ctx.fillStyle = "#2762d9";
  ctx.fillText("as superior input", W - 150, 24);
  ctx.fillStyle = "#d9622a";
  ctx.fillText("as inferior input", W - 150, 40);

  // slider marker
  const f = Number($("delta-slider").value);
  ctx.strokeStyle = "rgba(28,35,48,0.45)";
  ctx.setLineDash([4, 4]);
  ctx.beginPath();
  ctx.moveTo(xOf(f), H - B);
  ctx.lineTo(xOf(f), 10);
  ctx.stroke();
  ctx.setLineDash([]);
}

function deltaReadout() {
  const f = Number($("delta-slider").value);
  // nearest profile sample
  let k = 0;
  let best = Infinity;
  profile.f.forEach((v, idx) => {
    const d = Math.abs(v - f);
    if (d < best) {
      best = d;
      k = idx;
    }
  });
  $("delta-readout").textContent =
    `F=${profile.f[k].toFixed(4)}  delta_sup=${profile.delta_superior[k].toFixed(5)}  ` +
    `delta_inf=${profile.delta_inferior[k].toFixed(5)}  ` +
    `partner range [${profile.f2_min[k].toFixed(4)}, ${profile.f1_max[k].toFixed(4)}]`;
  drawDelta();
}

// ------------------------------------------------------------- monte carlo
function drawHistogram(times, censored) {
  const canvas = $("mc-canvas");
  const ctx = canvas.getContext("2d");
  const W = canvas.width;
  const H = canvas.height;
  ctx.clearRect(0, 0, W, H);
  ctx.font = "11px system-ui";
  if (times.length === 0) {
    ctx.fillStyle = "#68738a";
    ctx.fillText("no deliveries within the horizon", 20, 30);
    return;
  }
  const max = Math.max(...times);
  const bins = Math.min(60, Math.max(10, Math.round(Math.sqrt(times.length))));
  const counts = new Array(bins).fill(0);
  for (const t of times) {
    const b = Math.min(bins - 1, Math.floor((t / (max + 1)) * bins));
    counts[b]++;
  }
  const peak = Math.max(...counts);
  const L = 40;
  const B = 26;
  const bw = (W - L - 10) / bins;
  ctx.fillStyle = "#2762d9";
  counts.forEach((c, b) => {
    const h = (c / peak) * (H - B - 14);
    ctx.fillRect(L + b * bw + 1, H - B - h, bw - 2, h);
  });
  ctx.fillStyle = "#68738a";
  ctx.fillText("0", L, H - 8);
  ctx.fillText(`${Math.round(max)} timesteps`, W - 90, H - 8);
  ctx.fillText(`peak bin: ${peak}`, L, 14);
  if (censored > 0) {
    ctx.fillStyle = "#b5432a";
    ctx.fillText(`${censored} trials censored`, L + 90, 14);
  }
}

function runTrials() {
  const btn = $("mc-run");
  btn.disabled = true;
  $("mc-stats").textContent = "running...";
  // let the browser paint before the synchronous wasm call
  setTimeout(() => {
    try {
      const report = JSON.parse(
        run_trials_json(
          $("mc-policy").value,
          Number($("mc-hops").value),
          Number($("mc-f0").value),
          Number($("mc-pe").value),
          Number($("mc-ps").value),
          $("mc-memory").value,
          Number($("mc-tcoh").value),
          Number($("mc-fth").value),
          Number($("mc-budget").value),
          0,
          Number($("mc-trials").value),
          Number($("mc-seed").value),
        ),
      );
      const fmt = (v, d = 3) => (v === null || v === undefined ? "-" : Number(v).toFixed(d));
      $("mc-stats").innerHTML =
        `<b>${report.policy}</b> on ${report.hops} hops  ` +
        `<span class="stat">F_lim=${fmt(report.f_lim, 5)}</span>\n` +
        `eta=<b>${fmt(report.eta, 4)}</b>  delivered=${report.delivered}/${report.trials}  ` +
        `mean t=${fmt(report.mean_time, 1)}  median t=${fmt(report.median_time, 1)}  ` +
        `mean F=${fmt(report.mean_fidelity, 5)}\n` +
        `purification attempts: ${report.gains.length}  ` +
        `beneficial fraction=${fmt(report.gain_fraction_positive, 4)}  ` +
        `mean gain=${fmt(report.gain_mean, 5)}`;
      drawHistogram(report.times, report.trials - report.delivered);
    } catch (err) {
      $("mc-stats").textContent = `error: ${err.message ?? err}`;
    } finally {
      btn.disabled = false;
    }
  }, 20);
}

// ------------------------------------------------------------------- boot
await init();
profile = JSON.parse(delta_profile_json(400));
drawGrid();
drawDelta();
deltaReadout();
runTrials();

$("grid-redraw").addEventListener("click", drawGrid);
$("grid-canvas").addEventListener("mousemove", gridHover);
$("delta-slider").addEventListener("input", deltaReadout);
$("mc-run").addEventListener("click", runTrials);
