import init, { chain_decomposition, rim_decomposition, rim_halting_law } from "./pkg/hitlab_web.js";

const COLORS = { survival: "#1d232a", leading: "#2f6fdb", remainder: "#d9822b", pmf: "#9aa5b1", mu: "#b3261e" };
const PAD = { left: 56, right: 16, top: 16, bottom: 32 };

function fmt(x, digits = 4) {
  if (x === null || x === undefined) return "∞";
  if (x !== 0 && (Math.abs(x) < 1e-3 || Math.abs(x) >= 1e5)) return x.toExponential(digits - 1);
  return x.toFixed(digits);
}

function frame(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.font = "12px system-ui, sans-serif";
  return {
    ctx,
    w: canvas.width - PAD.left - PAD.right,
    h: canvas.height - PAD.top - PAD.bottom,
  };
}

function axes(f, xMax, yTicks) {
  const { ctx, w, h } = f;
  ctx.strokeStyle = "#c2cad3";
  ctx.fillStyle = "#4a5561";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(PAD.left, PAD.top);
  ctx.lineTo(PAD.left, PAD.top + h);
  ctx.lineTo(PAD.left + w, PAD.top + h);
  ctx.stroke();
  ctx.textAlign = "right";
  for (const [y, label] of yTicks) {
    ctx.fillText(label, PAD.left - 6, PAD.top + y + 4);
  }
  ctx.textAlign = "center";
  for (let i = 0; i <= 5; i++) {
    const t = Math.round((xMax * i) / 5);
    ctx.fillText(String(t), PAD.left + (w * t) / xMax, PAD.top + h + 18);
  }
}

function legend(ctx, x, entries) {
  ctx.textAlign = "left";
  entries.forEach(([name, color], i) => {
    ctx.fillStyle = color;
    ctx.fillRect(x, PAD.top + 4 + i * 16, 12, 3);
    ctx.fillStyle = "#1d232a";
    ctx.fillText(name, x + 18, PAD.top + 9 + i * 16);
  });
}

function plotDecomposition(canvas, r, log) {
  const f = frame(canvas);
  const { ctx, w, h } = f;
  const n = r.survival.length - 1;
  const floor = 1e-12;
  const ly = (v) => {
    if (!log) return h * (1 - Math.max(0, Math.min(1, v)));
    const z = Math.log10(Math.max(v, floor));
    return (h * -z) / 12;
  };
  const ticks = log
    ? [0, -3, -6, -9, -12].map((e) => [ly(10 ** e), `1e${e}`])
    : [0, 0.25, 0.5, 0.75, 1].map((v) => [ly(v), v.toFixed(2)]);
  axes(f, n, ticks);

  const pmfMax = Math.max(...r.pmf, 1e-300);
  ctx.fillStyle = COLORS.pmf;
  const bw = Math.max(1, w / (n + 1) - 1);
  r.pmf.forEach((p, t) => {
    const bh = (h * 0.35 * p) / pmfMax;
    ctx.fillRect(PAD.left + (w * t) / n - bw / 2, PAD.top + h - bh, bw, bh);
  });

  for (const key of ["survival", "leading", "remainder"]) {
    ctx.strokeStyle = COLORS[key];
    ctx.lineWidth = key === "survival" ? 2.2 : 1.6;
    ctx.beginPath();
    r[key].forEach((v, t) => {
      const x = PAD.left + (w * t) / n;
      const y = PAD.top + ly(v);
      t === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    });
    ctx.stroke();
  }
  legend(ctx, PAD.left + w - 190, [
    ["P(τ_G > t)", COLORS.survival],
    ["leading term", COLORS.leading],
    ["P(τ_*,G > t)", COLORS.remainder],
    ["P(τ_* = t < τ_G), rescaled", COLORS.pmf],
  ]);
}

function summarize(r) {
  return [
    `λ = ${fmt(r.lambda, 6)}   T = 1/(1−λ) = ${fmt(r.relaxation_time)}   δ = ${fmt(r.delta)}   α·γ = ${fmt(r.shift_factor)}`,
    `R = ${fmt(r.mean_metastability)}   a = ${fmt(r.rate_a)}   mean metastability hypothesis: ${r.hypothesis ? "holds" : "fails"}`,
    `P(τ_* < τ_G) = ${fmt(r.csqst_total, 6)}   max representation residual = ${fmt(r.residual, 2)}   ${r.status}`,
  ].join("\n");
}

function show(el, f) {
  try {
    el.classList.remove("error");
    el.textContent = f();
  } catch (e) {
    el.classList.add("error");
    el.textContent = String(e);
  }
}

function runRim() {
  const form = document.getElementById("rim-form");
  const d = new FormData(form);
  form.querySelector("output").textContent = Number(d.get("lambda")).toFixed(2);
  show(document.getElementById("rim-summary"), () => {
    const r = JSON.parse(
      rim_decomposition(Number(d.get("n")), Number(d.get("lambda")), d.get("alpha"), Number(d.get("horizon"))),
    );
    plotDecomposition(document.getElementById("rim-plot"), r, d.get("log") === "on");
    return summarize(r);
  });
}

function runChain() {
  show(document.getElementById("chain-summary"), () => {
    const r = JSON.parse(
      chain_decomposition(
        document.getElementById("chain-spec").value,
        document.getElementById("chain-alpha").value,
        Number(document.getElementById("chain-horizon").value),
      ),
    );
    plotDecomposition(document.getElementById("chain-plot"), r, false);
    return `transient states: ${r.transient.join(", ")}\n` + summarize(r);
  });
}

function plotHalting(canvas, r) {
  const f = frame(canvas);
  const { ctx, w, h } = f;
  const m = r.counts.length;
  const freq = r.counts.map((c) => (r.stopped ? c / r.stopped : 0));
  const top = Math.max(...freq, ...r.mu_star) * 1.1;
  const y = (v) => PAD.top + h * (1 - v / top);
  axes(f, m, [0, 0.5, 1].map((s) => [h * (1 - s), fmt(s * top, 3)]));
  const slot = w / m;
  freq.forEach((p, x) => {
    ctx.fillStyle = COLORS.pmf;
    ctx.fillRect(PAD.left + x * slot + slot * 0.15, y(p), slot * 0.7, PAD.top + h - y(p));
    ctx.strokeStyle = COLORS.mu;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(PAD.left + x * slot + slot * 0.05, y(r.mu_star[x]));
    ctx.lineTo(PAD.left + x * slot + slot * 0.95, y(r.mu_star[x]));
    ctx.stroke();
  });
  legend(ctx, PAD.left + w - 190, [
    ["empirical law of X_τ", COLORS.pmf],
    ["μ*", COLORS.mu],
  ]);
}

function runHalting(event) {
  event?.preventDefault();
  const d = new FormData(document.getElementById("halt-form"));
  show(document.getElementById("halt-summary"), () => {
    const r = JSON.parse(
      rim_halting_law(
        Number(d.get("n")),
        Number(d.get("lambda")),
        Number(d.get("start")),
        Number(d.get("trajectories")),
        Number(d.get("seed")),
      ),
    );
    plotHalting(document.getElementById("halt-plot"), r);
    const lines = [`${r.stopped} of ${r.trajectories} trajectories stopped before absorption`];
    if (r.test) {
      lines.push(`mean stopping time ${fmt(r.mean_stopping_time)}`);
      lines.push(
        `TV distance ${fmt(r.test.tv)} (threshold ${fmt(r.test.tv_threshold)}), max |z| ${fmt(r.test.max_abs_z, 3)}: ${r.test.pass ? "pass" : "fail"}`,
      );
    }
    return lines.join("\n");
  });
}

await init();
document.getElementById("rim-form").addEventListener("input", runRim);
document.getElementById("chain-run").addEventListener("click", runChain);
document.getElementById("halt-form").addEventListener("submit", runHalting);
runRim();
runChain();
runHalting();
